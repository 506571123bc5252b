mod common;

use common::checks::*;
use common::{random_quadratic, rng, Wavy};
use pdhams::precondition::{factorize, lambda_shift, FactorizationKind, Preconditioner};
use pdhams::samplers::{momentum_init, Kernel, KernelKind, SamplerConfig};
use pdhams::targets::{discrete_gaussian, enumerate_joint, QuadraticTarget};
use pdhams::{Matrix, Tape, Vector};
use proptest::prelude::*;

#[test]
fn rejection_free_on_matched_quadratic() {
    let mut r = rng(1);
    for trial in 0..3 {
        let target = random_quadratic(4, 3, &mut r);
        let pre = matched_pre(&target, 0.2);
        let kernels = [
            Kernel::gibbs(pre.clone()),
            Kernel::pavg(pre.clone()),
            Kernel::vpdhams(pre.clone(), cfg(0.7, 0.4, 0.0)),
            Kernel::vpdhams(pre.clone(), cfg(1.0, 1.0, 0.0)),
            Kernel::opdhams(pre.clone(), cfg(0.9, 0.3, 0.2)),
            Kernel::opdhams(pre.clone(), cfg(0.5, 0.0, -0.6)),
        ];
        for k in &kernels {
            let worst = max_abs_log_ratio(k, &target, 1000, 10 + trial);
            assert!(worst <= 1e-8, "{} trial {trial}: {worst}", k.label());
        }
    }
}

#[test]
fn first_order_pavg_is_not_rejection_free() {
    let mut r = rng(2);
    let target = random_quadratic(2, 3, &mut r);
    let kernel = Kernel::first_order_specialize(KernelKind::Pavg, 2, cfg(0.9, 0.0, 0.0)).unwrap();
    let mut state = kernel.init_state(&target, Vector::zeros(2), &mut r).unwrap();
    let mut seen_nonzero = false;
    for _ in 0..200 {
        let out = kernel.step(&target, &state, &mut r).unwrap();
        seen_nonzero |= out.log_accept_ratio.abs() > 1e-6;
        state = out.next;
    }
    assert!(seen_nonzero);
}

#[test]
fn first_order_proposal_logits() {
    let pre = Preconditioner::<f64>::first_order(2, 0.5).unwrap();
    assert!((pre.l() - Matrix::identity(2, 2) * 0.5f64.sqrt()).amax() < 1e-15);
    let grad = Vector::from_vec(vec![0.3, -1.0]);
    let z = Vector::from_vec(vec![0.2, 0.7]);
    let s = Vector::from_vec(vec![1.0, -1.0]);
    let values = [-1.0, 0.0, 1.0];
    let q = pdhams::proposals::build_proposal(&grad, &s, &z, &pre, &values).unwrap();
    for i in 0..2 {
        for (k, &a) in values.iter().enumerate() {
            let expect = -0.5 * 0.5 * a * a + (grad[i] + 0.5 * z[i]) * a;
            assert!((q.logits()[(i, k)] - expect).abs() < 1e-15);
        }
    }
}

fn check_gdb(kernel: &Kernel<f64>, target: &Wavy, seed: u64, tol: f64) {
    let (gap, finite) = gdb_max_gap(kernel, target, 100, seed);
    assert!(gap <= tol, "{}: gap {gap}", kernel.label());
    assert!(finite > 100);
}

#[test]
fn generalized_detailed_balance_vanilla() {
    for kind in [FactorizationKind::Cholesky, FactorizationKind::Eigen] {
        let (t, pre) = wavy_pre(0.3, kind);
        check_gdb(&Kernel::vpdhams(pre.clone(), cfg(0.8, 0.0, 0.0)), &t, 3, 1e-10);
        check_gdb(&Kernel::vpdhams(pre, cfg(0.8, 0.6, 0.0)), &t, 4, 1e-10);
    }
    let fo = Kernel::first_order_specialize(KernelKind::Vpdhams, 2, SamplerConfig { delta: 0.7, phi: 0.3, ..SamplerConfig::default() }).unwrap();
    check_gdb(&fo, &Wavy::new(), 5, 1e-10);
}

#[test]
fn generalized_detailed_balance_over_relaxed() {
    let (t, pre) = wavy_pre(0.3, FactorizationKind::Cholesky);
    for (beta, phi) in [(0.1, 0.0), (0.45, 0.5), (-0.8, 0.2), (0.0, 0.3), (1.0, 0.1)] {
        check_gdb(&Kernel::opdhams(pre.clone(), cfg(0.9, phi, beta)), &t, 6, 1e-8);
    }
}

#[test]
fn vpdhams_at_zero_epsilon_phi_is_pavg() {
    assert!(vzero_vs_pavg(1000, 7) < 1e-10);
}

#[test]
fn pavg_is_gibbs_on_quadratic() {
    let mut r = rng(8);
    let target = random_quadratic(3, 2, &mut r);
    assert!(pavg_vs_gibbs(&target, 0.3, 1000, 8) < 1e-10);
}

#[test]
fn gibbs_rejects_mismatched_preconditioner() {
    let mut r = rng(9);
    let target = random_quadratic(2, 2, &mut r);
    let pre = Preconditioner::first_order(2, 1.0).unwrap();
    let g = Kernel::gibbs(pre);
    let state = g.init_state(&target, Vector::zeros(2), &mut r).unwrap();
    assert!(matches!(g.step(&target, &state, &mut r), Err(pdhams::Error::Contract(_))));
    let wavy = Wavy::new();
    let g = Kernel::gibbs(wavy_pre(1.0, FactorizationKind::Cholesky).1);
    let state = g.init_state(&wavy, Vector::zeros(2), &mut r).unwrap();
    assert!(matches!(g.step(&wavy, &state, &mut r), Err(pdhams::Error::Contract(_))));
}

#[test]
fn epsilon_one_consumes_no_refresh_noise() {
    let (t, pre) = wavy_pre(0.5, FactorizationKind::Cholesky);
    let k = Kernel::vpdhams(pre, cfg(1.0, 0.2, 0.0));
    let mut r = rng(10);
    let state = k.init_state(&t, Vector::zeros(2), &mut r).unwrap();
    let mut tape = Tape::from_parts(vec![], vec![0.3, 0.6, 0.99]);
    let out = k.step(&t, &state, &mut tape).unwrap();
    assert_eq!(tape.remaining(), (0, 0));
    if !out.accepted {
        assert_eq!(out.next.v().unwrap(), &-state.v().unwrap());
    }
}

#[test]
fn rejection_stores_negated_intermediate_momentum() {
    let (t, pre) = wavy_pre(0.05, FactorizationKind::Cholesky);
    let k = Kernel::vpdhams(pre.clone(), cfg(0.6, 0.0, 0.0));
    let mut r = rng(11);
    let mut state = k.init_state(&t, Vector::zeros(2), &mut r).unwrap();
    let mut rejections = 0;
    for _ in 0..2000 {
        let tape = step_tape(&mut r, 2, 3);
        let z: Vec<f64> = tape.gaussians().copied().collect();
        let v_half = state.v().unwrap() * 0.6 + pre.l_inv_t() * Vector::from_vec(z) * (1.0f64 - 0.36).sqrt();
        let out = k.step(&t, &state, &mut tape.clone()).unwrap();
        if !out.accepted {
            rejections += 1;
            assert_eq!(out.next.s(), state.s());
            assert!((out.next.v().unwrap() + &v_half).amax() < 1e-14);
        } else {
            assert_eq!(out.next.s(), &out.proposal);
        }
        state = out.next;
    }
    assert!(rejections > 10);
}

#[test]
fn three_schemes_agree_with_kernel() {
    assert!(scheme_agreement(1000, 12) < 1e-12);
}

#[test]
fn pavg_mean_scheme_matches() {
    assert!(pavg_mean_agreement(1000, 13) < 1e-12);
}

#[test]
fn factorization_choice_does_not_change_trajectory() {
    let target = discrete_gaussian::<f64>(8, 10, 5.0, 0.9).unwrap();
    for (kind, c) in [(KernelKind::Vpdhams, cfg(0.9, 0.0, 0.0)), (KernelKind::Opdhams, cfg(0.9, 0.2, 0.1))] {
        assert!(factorization_trajectory_gap(&target, 0.058, kind, c, 300, 14) < 1e-8);
    }
}

#[test]
fn over_relaxed_at_unit_beta_has_vanilla_law() {
    assert!(unit_beta_law_gap(50, 15) < 1e-10);
}

#[test]
fn kernels_are_stationary_on_non_quadratic_target() {
    let (t, pre) = wavy_pre(0.4, FactorizationKind::Cholesky);
    let kernels = [
        Kernel::pavg(pre.clone()),
        Kernel::vpdhams(pre.clone(), cfg(0.9, 0.3, 0.0)),
        Kernel::opdhams(pre.clone(), cfg(0.9, 0.3, 0.2)),
        Kernel::metropolis(SamplerConfig { r: 1, ..SamplerConfig::default() }),
        Kernel::first_order_specialize(KernelKind::Vpdhams, 2, cfg(0.8, 0.2, 0.0)).unwrap(),
    ];
    for (i, k) in kernels.iter().enumerate() {
        let tv = stationarity_tv(k, &t, 4, 50_000, 500, 20 + i as u64);
        assert!(tv < 0.02, "{}: TV {tv}", k.label());
    }
}

#[test]
fn gibbs_on_scalar_quadratic() {
    let lattice = pdhams::targets::LatticeSpec::<f64>::symmetric_integers(1, 1).unwrap();
    let target = QuadraticTarget::new(lattice, Matrix::from_element(1, 1, -1.0), Vector::zeros(1)).unwrap();
    let pre = matched_pre(&target, 1.0);
    let exact = enumerate_joint(&target, &[0]).unwrap();
    let rec = pdhams::chains::run_chain(&Kernel::gibbs(pre), &target, &pdhams::chains::ChainStart::Random, 1_000_000, 3, 0).unwrap();
    let emp = rec.empirical_pmf(&[0], usize::MAX).unwrap();
    assert!(pdhams::diagnostics::tv_distance(&emp, &exact).unwrap() < 0.01);
    assert_eq!(rec.accept_count(), rec.len());
}

#[test]
fn metropolis_scalar_gaussian() {
    let target = discrete_gaussian::<f64>(1, 10, 5.0, 0.0).unwrap();
    let exact = enumerate_joint(&target, &[0]).unwrap();
    let k = Kernel::metropolis(SamplerConfig { r: 3, ..SamplerConfig::default() });
    let rec = pdhams::chains::run_chain(&k, &target, &pdhams::chains::ChainStart::Random, 1_000_000, 4, 0).unwrap();
    let emp = rec.slice(1000, rec.len()).empirical_pmf(&[0], usize::MAX).unwrap();
    assert!(pdhams::diagnostics::tv_distance(&emp, &exact).unwrap() < 0.01);
}

#[test]
fn metropolis_flat_target_always_accepts_in_interior() {
    let lattice = pdhams::targets::LatticeSpec::<f64>::symmetric_integers(3, 5).unwrap();
    let flat = QuadraticTarget::new(lattice, Matrix::zeros(3, 3), Vector::zeros(3)).unwrap();
    let k = Kernel::metropolis(SamplerConfig { r: 2, ..SamplerConfig::default() });
    let mut r = rng(16);
    let state = k.init_state(&flat, Vector::zeros(3), &mut r).unwrap();
    for _ in 0..200 {
        let out = k.step(&flat, &state, &mut r).unwrap();
        assert!(out.log_accept_ratio.abs() < 1e-15);
        assert!(out.accepted);
    }
    // full-width radius: uniform proposal everywhere, q symmetric even at the edges
    let k = Kernel::metropolis(SamplerConfig { r: 11, ..SamplerConfig::default() });
    let edge = k.init_state(&flat, Vector::from_element(3, 5.0), &mut r).unwrap();
    for _ in 0..200 {
        assert_eq!(k.step(&flat, &edge, &mut r).unwrap().log_accept_ratio, 0.0);
    }
}

#[test]
fn momentum_init_covariance() {
    let w = Matrix::from_row_slice(3, 3, &[-1.0, 0.4, 0.0, 0.4, -0.5, 0.2, 0.0, 0.2, 0.3]);
    let pre = factorize(&w, lambda_shift(&w, 0.5), 100.0).unwrap();
    let cov = pre.precision().clone().try_inverse().unwrap();
    let mut r = rng(17);
    let n = 1_000_000;
    let mut acc = Matrix::<f64>::zeros(3, 3);
    for _ in 0..n {
        let v = momentum_init(&pre, &mut r);
        acc += &v * v.transpose();
    }
    let est = acc / n as f64;
    for i in 0..3 {
        for j in 0..3 {
            let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)) / n as f64).sqrt();
            assert!((est[(i, j)] - cov[(i, j)]).abs() < 3.0 * se + 1e-12, "({i},{j})");
        }
    }
    let mut tape = Tape::from_parts(vec![0.3, -1.2, 0.8], vec![]);
    let v = momentum_init(&pre, &mut tape);
    let back = pre.l().transpose() * v;
    assert!((back - Vector::from_vec(vec![0.3, -1.2, 0.8])).amax() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vpdhams_rejection_free_any_parameters(eps in 0.0f64..=1.0, phi in 0.0f64..2.0, delta in 0.01f64..3.0, seed in 0u64..1000) {
        let mut r = rng(seed);
        let target = random_quadratic(3, 2, &mut r);
        let pre = matched_pre(&target, delta);
        let k = Kernel::vpdhams(pre, cfg(eps, phi, 0.0));
        prop_assert!(max_abs_log_ratio(&k, &target, 50, seed) <= 1e-8);
    }

    #[test]
    fn opdhams_rejection_free_any_beta(beta in -1.5f64..1.5, phi in 0.0f64..1.0, seed in 0u64..1000) {
        let mut r = rng(seed);
        let target = random_quadratic(3, 2, &mut r);
        let pre = matched_pre(&target, 0.3);
        let k = Kernel::opdhams(pre, cfg(0.9, phi, beta));
        prop_assert!(max_abs_log_ratio(&k, &target, 50, seed) <= 1e-8);
    }
}
