//! Measurements shared by the sampler tests and the acceptance harness. Each returns the
//! worst deviation observed; a discrete mismatch reports `f64::INFINITY`.

use super::{all_levels, random_levels, rng, Wavy};
use pdhams::chains::{run_chains, ChainStart};
use pdhams::precondition::{factorize, factorize_with, lambda_shift, FactorizationKind, Preconditioner};
use pdhams::proposals::{proposal_from_bracket, sample_product};
use pdhams::samplers::{momentum_init, ChainState, Kernel, KernelKind, SamplerConfig};
use pdhams::targets::{enumerate_joint, TargetModel};
use pdhams::{Matrix, NoiseSource, Tape, Vector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn matched_pre<M: TargetModel<f64>>(target: &M, delta: f64) -> Preconditioner<f64> {
    let w = target.quadratic().unwrap().w;
    factorize(&w, lambda_shift(&w, delta), 100.0).unwrap()
}

pub fn wavy_pre(delta: f64, kind: FactorizationKind) -> (Wavy, Preconditioner<f64>) {
    let t = Wavy::new();
    let w = t.w();
    let pre = factorize_with(&w, lambda_shift(&w, delta), kind).unwrap();
    (t, pre)
}

pub fn cfg(epsilon: f64, phi: f64, beta: f64) -> SamplerConfig {
    SamplerConfig { epsilon, phi, beta, ..SamplerConfig::default() }
}

/// Largest `|log acceptance ratio|` over `steps` steps; a rejection counts as infinite.
pub fn max_abs_log_ratio<M: TargetModel<f64>>(kernel: &Kernel<f64>, target: &M, steps: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let s0 = pdhams::chains::random_state(target.lattice(), &mut r);
    let mut state = kernel.init_state(target, s0, &mut r).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let out = kernel.step(target, &state, &mut r).unwrap();
        if !out.accepted {
            return f64::INFINITY;
        }
        worst = worst.max(out.log_accept_ratio.abs());
        state = out.next;
    }
    worst
}

const PROB_RESOLUTION: f64 = 1e-12;

/// Relative gap between `log π(s, v_h) + log Q_fwd + log α_fwd` and the reverse move from
/// `(s*, −v*)`; `None` when both directions are impossible or below resolution.
pub fn gdb_gap(
    kernel: &Kernel<f64>,
    target: &Wavy,
    state: &ChainState<f64>,
    v_half: &Vector<f64>,
    s_star: &[usize],
) -> Option<f64> {
    let fwd = kernel.pdhams_transition(target, state, v_half, s_star).unwrap();
    let back_state = fwd.proposal.clone();
    let neg_v = -&fwd.v_star;
    let rev = kernel.pdhams_transition(target, &back_state, &neg_v, state.levels()).unwrap();
    if (&rev.v_star + v_half).amax() > 1e-12 {
        return Some(f64::INFINITY);
    }
    // proposal masses come from differenced CDFs with absolute error near 1e-16, so
    // pairs this improbable in either direction carry no relative information
    if fwd.log_forward.min(rev.log_forward) < PROB_RESOLUTION.ln() {
        return None;
    }
    let lhs = kernel.joint_log_density(state, v_half) + fwd.log_forward + fwd.log_accept_ratio.min(0.0);
    let rhs = kernel.joint_log_density(&back_state, &neg_v) + rev.log_forward + rev.log_accept_ratio.min(0.0);
    match (lhs == f64::NEG_INFINITY, rhs == f64::NEG_INFINITY) {
        (true, true) => None,
        (false, false) => Some((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0)),
        _ => Some(f64::INFINITY),
    }
}

/// Worst GDB gap over `n_states` random `(s, v_h)` and every proposal on `{-1,0,1}²`,
/// with the count of finite comparisons.
pub fn gdb_max_gap(kernel: &Kernel<f64>, target: &Wavy, n_states: usize, seed: u64) -> (f64, usize) {
    let mut r = rng(seed);
    let pre = kernel.preconditioner().unwrap().clone();
    let mut worst: f64 = 0.0;
    let mut finite = 0;
    for _ in 0..n_states {
        let levels = random_levels(2, 3, &mut r);
        let state = ChainState::from_levels(target, levels, None).unwrap();
        let v_half = momentum_init(&pre, &mut r) * 1.5;
        for s_star in all_levels(2, 3) {
            if let Some(gap) = gdb_gap(kernel, target, &state, &v_half, &s_star) {
                worst = worst.max(gap);
                finite += 1;
            }
        }
    }
    (worst, finite)
}

/// One step with noise recorded from `r`, replayed identically for each consumer.
pub fn step_tape<R: rand::Rng>(r: &mut R, d: usize, n_unif: usize) -> Tape {
    Tape::record(r, d, n_unif)
}

pub fn negated(t: &Tape) -> Tape {
    Tape::from_parts(t.gaussians().map(|g| -g).collect(), t.uniforms().copied().collect())
}

fn same_outcome(a: &Vector<f64>, b: &Vector<f64>, acc_a: bool, acc_b: bool) -> bool {
    a == b && acc_a == acc_b
}

/// V-PDHAMS at `ε = φ = 0` against PAVG fed the negated Gaussians.
pub fn vzero_vs_pavg(steps: usize, seed: u64) -> f64 {
    let (t, pre) = wavy_pre(0.4, FactorizationKind::Cholesky);
    let v = Kernel::vpdhams(pre.clone(), cfg(0.0, 0.0, 0.0));
    let p = Kernel::pavg(pre);
    let mut r = rng(seed);
    let mut sv = v.init_state(&t, Vector::zeros(2), &mut r).unwrap();
    let mut sp = p.init_state(&t, Vector::zeros(2), &mut r).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let tape = step_tape(&mut r, 2, 3);
        // z = s − v_half for V-PDHAMS, z = s + (Lᵀ)⁻¹Z for PAVG
        let ov = v.step(&t, &sv, &mut negated(&tape)).unwrap();
        let op = p.step(&t, &sp, &mut tape.clone()).unwrap();
        if !same_outcome(&ov.proposal, &op.proposal, ov.accepted, op.accepted) {
            return f64::INFINITY;
        }
        worst = worst.max((ov.log_accept_ratio - op.log_accept_ratio).abs());
        sv = ov.next;
        sp = op.next;
    }
    worst
}

/// PAVG against the Gaussian-integral-trick Gibbs kernel on a quadratic target.
pub fn pavg_vs_gibbs<M: TargetModel<f64>>(target: &M, delta: f64, steps: usize, seed: u64) -> f64 {
    let d = target.dim();
    let pre = matched_pre(target, delta);
    let g = Kernel::gibbs(pre.clone());
    let p = Kernel::pavg(pre);
    let mut r = rng(seed);
    let mut sg = g.init_state(target, Vector::zeros(d), &mut r).unwrap();
    let mut sp = sg.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let tape = step_tape(&mut r, d, d + 1);
        let og = g.step(target, &sg, &mut tape.clone()).unwrap();
        let op = p.step(target, &sp, &mut tape.clone()).unwrap();
        if !op.accepted || og.next.s() != op.next.s() {
            return f64::INFINITY;
        }
        worst = worst.max(op.log_accept_ratio.abs());
        sg = og.next;
        sp = op.next;
    }
    worst
}

/// One-step law of O-PDHAMS at `β = ±1` against V-PDHAMS, over random states and all proposals.
pub fn unit_beta_law_gap(n_states: usize, seed: u64) -> f64 {
    let (t, pre) = wavy_pre(0.3, FactorizationKind::Cholesky);
    let v = Kernel::vpdhams(pre.clone(), cfg(0.9, 0.3, 0.0));
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for beta in [1.0, -1.0] {
        let o = Kernel::opdhams(pre.clone(), cfg(0.9, 0.3, beta));
        for _ in 0..n_states {
            let levels = random_levels(2, 3, &mut r);
            let state = ChainState::from_levels(&t, levels, None).unwrap();
            let v_half = momentum_init(&pre, &mut r);
            for s_star in all_levels(2, 3) {
                let a = v.pdhams_transition(&t, &state, &v_half, &s_star).unwrap();
                let b = o.pdhams_transition(&t, &state, &v_half, &s_star).unwrap();
                let pa = a.log_forward + a.log_accept_ratio.min(0.0);
                let pb = b.log_forward + b.log_accept_ratio.min(0.0);
                worst = worst.max((pa - pb).abs()).max((&a.v_star - &b.v_star).amax());
            }
        }
    }
    worst
}

pub struct SchemeStep {
    pub s: Vector<f64>,
    pub v: Vector<f64>,
    pub accepted: bool,
    pub log_ratio: f64,
}

/// Auxiliary-variable constructions of V-PDHAMS, written independently of the library kernel.
#[derive(Clone, Copy, Debug)]
pub enum Scheme {
    Mean,
    VarianceU,
    Momentum,
}

pub fn scheme_step(
    scheme: Scheme,
    target: &Wavy,
    pre: &Preconditioner<f64>,
    c: &SamplerConfig,
    s: &Vector<f64>,
    v: &Vector<f64>,
    noise: &mut Tape,
) -> SchemeStep {
    let lattice = target.lattice();
    let values = lattice.values();
    let d = s.len();
    let l = pre.l();
    let lam = pre.lambda();
    let dmat = Matrix::identity(d, d) * lam;
    let prec = pre.precision();
    let w = pre.w();
    let zn = Vector::from_vec(noise.gaussian_vec(d));
    let eps = c.epsilon;
    let refresh = (1.0 - eps * eps).sqrt();
    let g = target.grad_log_density(s);
    let f = target.log_density(s);

    // intermediate momentum in each scheme's own coordinates
    let u = l.transpose() * v;
    let u_half = &u * eps + &zn * refresh;
    let v_half = pre.l_inv_t() * &u_half;

    let bracket = match scheme {
        Scheme::Mean => {
            let z_m = l.transpose() * s - &u_half;
            &g - w * s + l * z_m
        }
        Scheme::VarianceU => &g + &dmat * s - l * &u_half,
        Scheme::Momentum => &g + &dmat * s - prec * &v_half,
    };
    let fwd = proposal_from_bracket(&bracket, lam, values).unwrap();
    let lv = sample_product(&fwd, noise);
    let s_star = lattice.point(&lv);
    let g_star = target.grad_log_density(&s_star);
    let f_star = target.log_density(&s_star);
    let corr = &g_star - &g + w * (s - &s_star);

    let (v_star, kin_new, kin_old, back_bracket) = match scheme {
        Scheme::Mean | Scheme::VarianceU => {
            let u_star = -&u_half + l.transpose() * (s - &s_star) + l.transpose() * &corr * c.phi;
            let bb = match scheme {
                Scheme::Mean => {
                    let z_m = l.transpose() * &s_star + &u_star;
                    &g_star - w * &s_star + l * z_m
                }
                _ => &g_star + &dmat * &s_star + l * &u_star,
            };
            (pre.l_inv_t() * &u_star, u_star.norm_squared(), u_half.norm_squared(), bb)
        }
        Scheme::Momentum => {
            let v_star = -&v_half + s - &s_star + &corr * c.phi;
            let kn = v_star.dot(&(prec * &v_star));
            let ko = v_half.dot(&(prec * &v_half));
            let bb = &g_star + &dmat * &s_star + prec * &v_star;
            (v_star, kn, ko, bb)
        }
    };
    let bwd = proposal_from_bracket(&back_bracket, lam, values).unwrap();
    let levels = lattice.indices_of(s).unwrap();
    let log_ratio = f_star - f - 0.5 * kin_new + 0.5 * kin_old + bwd.log_prob(&levels) - fwd.log_prob(&lv);
    let u_acc = noise.uniform();
    let accepted = log_ratio >= 0.0 || u_acc.ln() < log_ratio;
    if accepted {
        SchemeStep { s: s_star, v: v_star, accepted, log_ratio }
    } else {
        SchemeStep { s: s.clone(), v: -v_half, accepted, log_ratio }
    }
}

/// Worst relative disagreement between the three schemes and the kernel over `steps` steps.
pub fn scheme_agreement(steps: usize, seed: u64) -> f64 {
    let (t, pre) = wavy_pre(0.25, FactorizationKind::Eigen);
    let c = cfg(0.85, 0.4, 0.0);
    let kernel = Kernel::vpdhams(pre.clone(), c);
    let mut r = rng(seed);
    let mut lib_state = kernel.init_state(&t, Vector::from_vec(vec![1.0, -1.0]), &mut r).unwrap();
    let schemes = [Scheme::Mean, Scheme::VarianceU, Scheme::Momentum];
    let mut states: Vec<(Vector<f64>, Vector<f64>)> =
        vec![(lib_state.s().clone(), lib_state.v().unwrap().clone()); 3];
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let tape = step_tape(&mut r, 2, 3);
        let out = kernel.step(&t, &lib_state, &mut tape.clone()).unwrap();
        for (j, sc) in schemes.iter().enumerate() {
            let o = scheme_step(*sc, &t, &pre, &c, &states[j].0, &states[j].1, &mut tape.clone());
            if !same_outcome(&o.s, out.next.s(), o.accepted, out.accepted) {
                return f64::INFINITY;
            }
            worst = worst
                .max((o.log_ratio - out.log_accept_ratio).abs() / (1.0 + o.log_ratio.abs()))
                .max((&o.v - out.next.v().unwrap()).amax());
            states[j] = (o.s, o.v);
        }
        lib_state = out.next;
    }
    worst
}

/// PAVG written in its mean scheme (`z_m = Lᵀs + Z`) against the kernel.
pub fn pavg_mean_agreement(steps: usize, seed: u64) -> f64 {
    let (t, pre) = wavy_pre(0.3, FactorizationKind::Eigen);
    let kernel = Kernel::pavg(pre.clone());
    let mut r = rng(seed);
    let mut state = kernel.init_state(&t, Vector::zeros(2), &mut r).unwrap();
    let l = pre.l();
    let values = t.lattice().values();
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let tape = step_tape(&mut r, 2, 3);
        let out = kernel.step(&t, &state, &mut tape.clone()).unwrap();

        let mut noise = tape.clone();
        let s = state.s().clone();
        let z_m = l.transpose() * &s + Vector::from_vec(noise.gaussian_vec(2));
        let bracket = t.grad_log_density(&s) - pre.w() * &s + l * &z_m;
        let fwd = proposal_from_bracket(&bracket, pre.lambda(), values).unwrap();
        let lv = sample_product(&fwd, &mut noise);
        let s_star = t.lattice().point(&lv);
        let back = t.grad_log_density(&s_star) - pre.w() * &s_star + l * &z_m;
        let bwd = proposal_from_bracket(&back, pre.lambda(), values).unwrap();
        let delta = t.log_density(&s_star) - t.log_density(&s)
            - 0.5 * (&z_m - l.transpose() * &s_star).norm_squared()
            + 0.5 * (&z_m - l.transpose() * &s).norm_squared()
            + bwd.log_prob(state.levels())
            - fwd.log_prob(&lv);
        if s_star != out.proposal {
            return f64::INFINITY;
        }
        worst = worst.max((delta - out.log_accept_ratio).abs() / (1.0 + delta.abs()));
        state = out.next;
    }
    worst
}

/// Runs Cholesky- and eigen-factored kernels side by side with Gaussians mapped by
/// `Z₂ = L₂ᵀ (L₁ᵀ)⁻¹ Z₁` (same `(Lᵀ)⁻¹Z` under both); returns the worst momentum gap.
pub fn factorization_trajectory_gap<M: TargetModel<f64>>(
    target: &M,
    delta: f64,
    kind: KernelKind,
    c: SamplerConfig,
    steps: usize,
    seed: u64,
) -> f64 {
    let d = target.dim();
    let w = target.quadratic().unwrap().w;
    let lambda = lambda_shift(&w, delta);
    let pc = factorize_with(&w, lambda, FactorizationKind::Cholesky).unwrap();
    let pe = factorize_with(&w, lambda, FactorizationKind::Eigen).unwrap();
    let map = pe.l().transpose() * pc.l_inv_t();
    let transform = |tape: &Tape| -> Tape {
        let z = Vector::from_iterator(d, tape.gaussians().copied());
        Tape::from_parts((&map * z).iter().copied().collect(), tape.uniforms().copied().collect())
    };
    let kc = Kernel::new(kind, Some(pc.clone()), c).unwrap();
    let ke = Kernel::new(kind, Some(pe.clone()), c).unwrap();
    let mut r = rng(seed);
    let init = Tape::record(&mut r, d, 0);
    let s0 = Vector::zeros(d);
    let mut a = kc.init_state(target, s0.clone(), &mut init.clone()).unwrap();
    let mut b = ke.init_state(target, s0, &mut transform(&init)).unwrap();
    let mut worst = (a.v().unwrap() - b.v().unwrap()).amax();
    let n_unif = if kind == KernelKind::Opdhams { 2 * d + 1 } else { d + 1 };
    for _ in 0..steps {
        let tape = step_tape(&mut r, d, n_unif);
        let oa = kc.step(target, &a, &mut tape.clone()).unwrap();
        let ob = ke.step(target, &b, &mut transform(&tape)).unwrap();
        if oa.next.s() != ob.next.s() {
            return f64::INFINITY;
        }
        worst = worst.max((oa.next.v().unwrap() - ob.next.v().unwrap()).amax());
        a = oa.next;
        b = ob.next;
    }
    worst
}

/// TV between the pooled post-burn-in joint pmf of coordinates (0, 1) and enumeration.
pub fn stationarity_tv<M: TargetModel<f64>>(
    kernel: &Kernel<f64>,
    target: &M,
    chains: usize,
    draws_per_chain: usize,
    burn_in: usize,
    seed: u64,
) -> f64 {
    let exact = enumerate_joint(target, &[0, 1]).unwrap();
    let records = run_chains(kernel, target, &ChainStart::Random, chains, draws_per_chain + burn_in, seed).unwrap();
    let mut counts = vec![0.0; exact.probs.len()];
    let mut n = 0.0;
    for rec in &records {
        let p = rec.slice(burn_in, rec.len()).empirical_pmf(&[0, 1], usize::MAX).unwrap();
        let m = (rec.len() - burn_in) as f64;
        for (c, q) in counts.iter_mut().zip(&p.probs) {
            *c += q * m;
        }
        n += m;
    }
    counts.iter().zip(&exact.probs).map(|(c, p)| (c / n - p).abs()).sum::<f64>() * 0.5
}

fn cdf(pmf: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    std::iter::once(0.0)
        .chain(pmf.iter().map(|p| {
            acc += p;
            acc
        }))
        .collect()
}

/// `P(x1 | x0)` by integrating the two uniforms of the reflection: exact in `w̃` for
/// each fixed `w0`, midpoint rule with `n` nodes in `w0`.
pub fn grid_conditional(x0: usize, pmf: &[f64], beta: f64, n: usize) -> Vec<f64> {
    let f = cdf(pmf);
    let (a0, b0) = (f[x0], f[x0 + 1]);
    let mut out = vec![0.0; pmf.len()];
    for j in 0..n {
        let w0 = a0 + (b0 - a0) * (j as f64 + 0.5) / n as f64;
        for (x1, o) in out.iter_mut().enumerate() {
            let (a1, b1) = (f[x1], f[x1 + 1]);
            let mass = if beta == 0.0 {
                let w1 = (-w0).rem_euclid(1.0);
                if w1 >= a1 && w1 < b1 { 1.0 } else { 0.0 }
            } else {
                let (lo, hi) = if beta > 0.0 { (-w0, -w0 + beta) } else { (-w0 + beta, -w0) };
                let mut m = 0.0;
                for shift in (lo.floor() as i64 - 1)..=(hi.ceil() as i64 + 1) {
                    let s = shift as f64;
                    m += (hi.min(b1 + s) - lo.max(a1 + s)).max(0.0);
                }
                m / beta.abs()
            };
            *o += mass / n as f64;
        }
    }
    out
}

pub fn chi_square_p(counts: &[f64], probs: &[f64]) -> f64 {
    if probs.len() < 2 {
        return 1.0;
    }
    let n: f64 = counts.iter().sum();
    let stat: f64 = counts.iter().zip(probs).map(|(c, p)| (c - n * p).powi(2) / (n * p)).sum();
    1.0 - ChiSquared::new((probs.len() - 1) as f64).unwrap().cdf(stat)
}

pub fn sample_index<N: NoiseSource>(pmf: &[f64], noise: &mut N) -> usize {
    let u = noise.uniform();
    let mut acc = 0.0;
    for (i, p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    pmf.len() - 1
}
