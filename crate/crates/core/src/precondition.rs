//! Calibration of the preconditioning triple `(W, D = λI, L)`.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, lstsq_pivoted_qr, solve_lyapunov_kronecker, solve_symmetric_lyapunov, symmetric_eigen_desc};
use crate::targets::TargetModel;
use crate::{Error, Matrix, Real, Result, Vector};

/// Largest dimension for which the Kronecker Lyapunov system is formed.
pub const KRONECKER_MAX_DIM: usize = 32;

pub const DEFAULT_COND_THRESHOLD: f64 = 100.0;

/// States, gradients and energies along a burn-in trajectory.
#[derive(Debug, Clone)]
pub struct CalibrationSample<T: Real> {
    states: Vec<Vector<T>>,
    grads: Vec<Vector<T>>,
    energies: Vec<T>,
}

impl<T: Real> CalibrationSample<T> {
    pub fn new(states: Vec<Vector<T>>, grads: Vec<Vector<T>>, energies: Vec<T>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::invalid("calibration needs at least two states"));
        }
        if grads.len() != states.len() || energies.len() != states.len() {
            return Err(Error::invalid("states, gradients and energies differ in length"));
        }
        let d = states[0].len();
        if let Some(bad) = states.iter().chain(&grads).find(|x| x.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        Ok(CalibrationSample { states, grads, energies })
    }

    /// Evaluates `f` and `∇f` of `target` along `states`.
    pub fn from_states<M: TargetModel<T> + ?Sized>(target: &M, states: Vec<Vector<T>>) -> Result<Self> {
        let grads = states.iter().map(|s| target.grad_log_density(s)).collect();
        let energies = states.iter().map(|s| target.log_density(s)).collect();
        Self::new(states, grads, energies)
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vector<T>] {
        &self.states
    }

    pub fn grads(&self) -> &[Vector<T>] {
        &self.grads
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    /// Indices `t` with `s_{t+1} ≠ s_t`.
    fn moving_steps(&self) -> Vec<usize> {
        (0..self.states.len() - 1)
            .filter(|&t| self.states[t + 1] != self.states[t])
            .collect()
    }

    /// Same trajectory on the lattice scaled by `c`: states `c·s`, gradients `∇f / c`.
    pub fn scaled(&self, c: T) -> Self {
        CalibrationSample {
            states: self.states.iter().map(|s| s * c).collect(),
            grads: self.grads.iter().map(|g| g / c).collect(),
            energies: self.energies.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    GradientDiff,
    EnergyDiff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovSolver {
    BartelsStewart,
    Kronecker,
}

/// Gradient-difference calibration with the Bartels–Stewart solver.
pub fn calibrate_w_gradient_diff<T: Real>(sample: &CalibrationSample<T>) -> Result<Matrix<T>> {
    calibrate_w_gradient_diff_with(sample, LyapunovSolver::BartelsStewart)
}

/// Symmetric `W` minimizing `‖D_f − D_s W‖_F`, i.e. the solution of
/// `(D_sᵀD_s) W + W (D_sᵀD_s) = D_sᵀD_f + D_fᵀD_s`.
pub fn calibrate_w_gradient_diff_with<T: Real>(
    sample: &CalibrationSample<T>,
    solver: LyapunovSolver,
) -> Result<Matrix<T>> {
    let d = sample.dim();
    let steps = sample.moving_steps();
    let ds = Matrix::from_fn(steps.len(), d, |r, c| {
        let t = steps[r];
        sample.states[t + 1][c] - sample.states[t][c]
    });
    let df = Matrix::from_fn(steps.len(), d, |r, c| {
        let t = steps[r];
        sample.grads[t + 1][c] - sample.grads[t][c]
    });
    let a = ds.transpose() * &ds;
    let cross = ds.transpose() * &df;
    let c = &cross + cross.transpose();

    let (eigs, _) = symmetric_eigen_desc(&a);
    let tol = T::lit(1e-10) * eigs[0];
    let rank = eigs.iter().filter(|&&e| e > tol).count();
    if steps.is_empty() || rank < d {
        return Err(Error::RankDeficient { rank, required: d });
    }
    match solver {
        LyapunovSolver::BartelsStewart => solve_symmetric_lyapunov(&a, &c),
        LyapunovSolver::Kronecker if d <= KRONECKER_MAX_DIM => solve_lyapunov_kronecker(&a, &c),
        LyapunovSolver::Kronecker => Err(Error::invalid(format!(
            "Kronecker solve limited to d <= {KRONECKER_MAX_DIM}"
        ))),
    }
}

/// Energy-difference calibration: least squares over the `d(d+1)/2` free entries of `W`
/// fitting `f(s_{t+1}) − f(s_t) − ∇f(s_t)ᵀΔ_t ≈ ½ Δ_tᵀ W Δ_t`.
pub fn calibrate_w_energy_diff<T: Real>(sample: &CalibrationSample<T>) -> Result<Matrix<T>> {
    let d = sample.dim();
    let p = d * (d + 1) / 2;
    let steps = sample.moving_steps();
    let half = T::lit(0.5);
    let mut design = Matrix::zeros(steps.len(), p);
    let mut resid = Vector::zeros(steps.len());
    for (row, &t) in steps.iter().enumerate() {
        let delta = &sample.states[t + 1] - &sample.states[t];
        resid[row] = sample.energies[t + 1] - sample.energies[t] - sample.grads[t].dot(&delta);
        let mut col = 0;
        for k in 0..d {
            for l in k..d {
                design[(row, col)] = if k == l {
                    half * delta[k] * delta[k]
                } else {
                    delta[k] * delta[l]
                };
                col += 1;
            }
        }
    }
    if steps.len() < p {
        return Err(Error::RankDeficient { rank: steps.len(), required: p });
    }
    let (vech, rank) = lstsq_pivoted_qr(&design, &resid, T::lit(1e-10))?;
    if rank < p {
        return Err(Error::RankDeficient { rank, required: p });
    }
    let mut w = Matrix::zeros(d, d);
    let mut col = 0;
    for k in 0..d {
        for l in k..d {
            w[(k, l)] = vech[col];
            w[(l, k)] = vech[col];
            col += 1;
        }
    }
    Ok(w)
}

pub fn calibrate_w<T: Real>(sample: &CalibrationSample<T>, method: CalibrationMethod) -> Result<Matrix<T>> {
    match method {
        CalibrationMethod::GradientDiff => calibrate_w_gradient_diff(sample),
        CalibrationMethod::EnergyDiff => calibrate_w_energy_diff(sample),
    }
}

/// Calibrates on `sample` and on its copy scaled by `c`; the second estimate should be the first over `c²`.
pub fn scaling_check<T: Real>(
    sample: &CalibrationSample<T>,
    c: T,
    method: CalibrationMethod,
) -> Result<(Matrix<T>, Matrix<T>)> {
    if c == T::zero() {
        return Err(Error::invalid("scale factor must be nonzero"));
    }
    Ok((calibrate_w(sample, method)?, calibrate_w(&sample.scaled(c), method)?))
}

/// `λ = δ − min(0, λ_min(W))`, so the smallest eigenvalue of `W + λI` is at least `δ`.
pub fn lambda_shift<T: Real>(w: &Matrix<T>, delta: T) -> T {
    let lmin = linalg::min_eigenvalue(w);
    delta - if lmin < T::zero() { lmin } else { T::zero() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorizationKind {
    Cholesky,
    Eigen,
}

/// `W`, `D = λI` and a factor `L` with `L Lᵀ = W + λI`.
#[derive(Debug, Clone)]
pub struct Preconditioner<T: Real> {
    w: Matrix<T>,
    lambda: T,
    precision: Matrix<T>,
    l: Matrix<T>,
    l_inv_t: Matrix<T>,
    kind: FactorizationKind,
    condition_number: T,
}

/// Factorizes `W + λI`: Cholesky when its condition number is below `cond_threshold`,
/// otherwise `L = U Λ^{1/2}` from the eigendecomposition.
pub fn factorize<T: Real>(w: &Matrix<T>, lambda: T, cond_threshold: T) -> Result<Preconditioner<T>> {
    factorize_inner(w, lambda, None, cond_threshold)
}

pub fn factorize_with<T: Real>(w: &Matrix<T>, lambda: T, kind: FactorizationKind) -> Result<Preconditioner<T>> {
    factorize_inner(w, lambda, Some(kind), T::lit(DEFAULT_COND_THRESHOLD))
}

fn factorize_inner<T: Real>(
    w: &Matrix<T>,
    lambda: T,
    forced: Option<FactorizationKind>,
    cond_threshold: T,
) -> Result<Preconditioner<T>> {
    let d = w.nrows();
    if w.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: w.ncols() });
    }
    if w.iter().any(|x| !Real::is_finite(*x)) || !Real::is_finite(lambda) {
        return Err(Error::NonFinite("preconditioner input".into()));
    }
    let w = linalg::symmetrize(w);
    let precision = &w + Matrix::identity(d, d) * lambda;
    let (eigs, vecs) = symmetric_eigen_desc(&precision);
    let (lmax, lmin) = (eigs[0], eigs[d - 1]);
    if !(lmin > T::zero()) {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue of W + λI is {lmin}"
        )));
    }
    let cond = lmax / lmin;
    let kind = forced.unwrap_or(if cond < cond_threshold {
        FactorizationKind::Cholesky
    } else {
        FactorizationKind::Eigen
    });
    let l = match kind {
        FactorizationKind::Cholesky => Cholesky::new(precision.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky breakdown".into()))?
            .l(),
        FactorizationKind::Eigen => {
            let root = eigs.map(|e| e.sqrt());
            &vecs * Matrix::from_diagonal(&root)
        }
    };
    let l_inv_t = l
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("singular factor".into()))?;
    Ok(Preconditioner {
        w,
        lambda,
        precision,
        l,
        l_inv_t,
        kind,
        condition_number: cond,
    })
}

impl<T: Real> Preconditioner<T> {
    /// `W = 0`, `λ = δ`, `L = √δ I`: the first-order specialization.
    pub fn first_order(d: usize, delta: T) -> Result<Self> {
        if !(delta > T::zero()) {
            return Err(Error::invalid("delta must be positive"));
        }
        let w = Matrix::zeros(d, d);
        factorize_with(&w, lambda_shift(&w, delta), FactorizationKind::Cholesky)
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn w(&self) -> &Matrix<T> {
        &self.w
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// `W + λI`.
    pub fn precision(&self) -> &Matrix<T> {
        &self.precision
    }

    pub fn l(&self) -> &Matrix<T> {
        &self.l
    }

    /// `(Lᵀ)⁻¹`.
    pub fn l_inv_t(&self) -> &Matrix<T> {
        &self.l_inv_t
    }

    pub fn kind(&self) -> FactorizationKind {
        self.kind
    }

    pub fn condition_number(&self) -> T {
        self.condition_number
    }

    /// `‖Lᵀ x‖² = xᵀ(W + λI)x`.
    pub fn kinetic(&self, x: &Vector<T>) -> T {
        self.l.tr_mul(x).norm_squared()
    }

    pub fn to_record(&self) -> PreconditionerRecord {
        let rows = |m: &Matrix<T>| {
            (0..m.nrows())
                .map(|r| m.row(r).iter().map(|x| x.as_f64()).collect())
                .collect()
        };
        PreconditionerRecord {
            w: rows(&self.w),
            lambda: self.lambda.as_f64(),
            l: rows(&self.l),
            kind: self.kind,
            condition_number: self.condition_number.as_f64(),
        }
    }
}

/// Serializable snapshot of a [`Preconditioner`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreconditionerRecord {
    pub w: Vec<Vec<f64>>,
    pub lambda: f64,
    pub l: Vec<Vec<f64>>,
    pub kind: FactorizationKind,
    pub condition_number: f64,
}

impl PreconditionerRecord {
    /// Rebuilds the preconditioner, re-deriving `L` with the recorded factorization kind.
    pub fn restore<T: Real>(&self) -> Result<Preconditioner<T>> {
        let d = self.w.len();
        if self.w.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("W record is not square"));
        }
        let w = Matrix::from_fn(d, d, |r, c| T::lit(self.w[r][c]));
        factorize_with(&w, T::lit(self.lambda), self.kind)
    }
}
