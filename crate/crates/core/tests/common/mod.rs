#![allow(dead_code)]

pub mod checks;

use pdhams::precondition::CalibrationSample;
use pdhams::targets::{LatticeSpec, QuadraticTarget, TargetModel};
use pdhams::{Matrix, NoiseSource, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Non-quadratic target: `½ sᵀAs + 0.7 sin(s₁ + ½ s₂) + 0.3 s₁² s₂` on `{-1, 0, 1}²`.
pub struct Wavy {
    lattice: LatticeSpec<f64>,
    a: Matrix<f64>,
}

impl Wavy {
    pub fn new() -> Self {
        Wavy {
            lattice: LatticeSpec::symmetric_integers(2, 1).unwrap(),
            a: Matrix::from_row_slice(2, 2, &[-1.2, 0.5, 0.5, -0.8]),
        }
    }

    /// Crude second-order matrix for preconditioning (deliberately not the Hessian).
    pub fn w(&self) -> Matrix<f64> {
        self.a.clone()
    }
}

impl TargetModel<f64> for Wavy {
    fn lattice(&self) -> &LatticeSpec<f64> {
        &self.lattice
    }

    fn log_density(&self, s: &Vector<f64>) -> f64 {
        0.5 * s.dot(&(&self.a * s)) + 0.7 * (s[0] + 0.5 * s[1]).sin() + 0.3 * s[0] * s[0] * s[1]
    }

    fn grad_log_density(&self, s: &Vector<f64>) -> Vector<f64> {
        let c = 0.7 * (s[0] + 0.5 * s[1]).cos();
        &self.a * s + Vector::from_vec(vec![c + 0.6 * s[0] * s[1], 0.5 * c + 0.3 * s[0] * s[0]])
    }

    fn name(&self) -> &'static str {
        "wavy"
    }
}

pub fn random_symmetric<R: Rng>(d: usize, rng: &mut R, scale: f64) -> Matrix<f64> {
    let g = Matrix::from_fn(d, d, |_, _| rng.random_range(-scale..scale));
    (&g + g.transpose()) * 0.5
}

pub fn random_quadratic<R: Rng>(d: usize, k: usize, rng: &mut R) -> QuadraticTarget<f64> {
    let w = random_symmetric(d, rng, 1.0) - Matrix::identity(d, d) * 0.5;
    let b = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    QuadraticTarget::new(LatticeSpec::symmetric_integers(d, k).unwrap(), w, b).unwrap()
}

/// Random lattice walk: each step moves one or more coordinates by ±1 (clipped).
pub fn lattice_walk<R: Rng>(lattice: &LatticeSpec<f64>, steps: usize, rng: &mut R) -> Vec<Vector<f64>> {
    let d = lattice.dim();
    let k = lattice.k();
    let mut levels: Vec<usize> = (0..d).map(|_| rng.random_range(0..k)).collect();
    let mut out = vec![lattice.point(&levels)];
    for _ in 0..steps {
        for l in levels.iter_mut() {
            if rng.random_bool(0.6) {
                let up = rng.random_bool(0.5);
                *l = if up { (*l + 1).min(k - 1) } else { l.saturating_sub(1) };
            }
        }
        out.push(lattice.point(&levels));
    }
    out
}

pub fn walk_sample<M: TargetModel<f64>, R: Rng>(target: &M, steps: usize, rng: &mut R) -> CalibrationSample<f64> {
    let states = lattice_walk(target.lattice(), steps, rng);
    CalibrationSample::from_states(target, states).unwrap()
}

pub fn random_levels<N: NoiseSource>(d: usize, k: usize, noise: &mut N) -> Vec<usize> {
    (0..d).map(|_| ((noise.uniform() * k as f64) as usize).min(k - 1)).collect()
}

/// Every level-index tuple of `{0..k}^d` in lexicographic order.
pub fn all_levels(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        out.push(idx.clone());
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < k {
                break;
            }
            idx[i] = 0;
        }
    }
}

pub fn max_abs_diff(a: &Vector<f64>, b: &Vector<f64>) -> f64 {
    (a - b).amax()
}
