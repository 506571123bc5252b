use super::{LatticeSpec, Pmf, QuadraticTarget, TargetModel, ENUMERATION_BUDGET};
use crate::scalar::log_sum_exp;
use crate::{Error, Matrix, Real, Result, Vector};

/// Equi-correlated discrete Gaussian on `{-k, …, k}^d`:
/// `f(s) = -½ sᵀ Σ⁻¹ s` with `Σ = σ²[ρ 11ᵀ + (1-ρ) I]`.
#[derive(Debug, Clone)]
pub struct DiscreteGaussian<T: Real> {
    lattice: LatticeSpec<T>,
    sigma: T,
    rho: T,
    /// `Σ⁻¹ = α I - γ 11ᵀ`.
    alpha: T,
    gamma: T,
    precision: Matrix<T>,
}

/// Builds the discrete Gaussian target; `Σ⁻¹` comes from the Sherman–Morrison form.
pub fn discrete_gaussian<T: Real>(d: usize, k: usize, sigma: T, rho: T) -> Result<DiscreteGaussian<T>> {
    if !(sigma > T::zero()) {
        return Err(Error::invalid("sigma must be positive"));
    }
    if !(rho < T::one()) || (d > 1 && !(rho > -T::one() / T::lit((d - 1) as f64))) {
        return Err(Error::invalid(format!(
            "rho = {rho} makes the covariance singular or indefinite for d = {d}"
        )));
    }
    let lattice = LatticeSpec::symmetric_integers(d, k)?;
    let one = T::one();
    let alpha = one / (sigma * sigma * (one - rho));
    let gamma = alpha * rho / (one - rho + T::lit(d as f64) * rho);
    let precision = Matrix::from_fn(d, d, |i, j| if i == j { alpha - gamma } else { -gamma });
    Ok(DiscreteGaussian {
        lattice,
        sigma,
        rho,
        alpha,
        gamma,
        precision,
    })
}

impl<T: Real> DiscreteGaussian<T> {
    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    /// `Σ` assembled directly from its definition.
    pub fn covariance(&self) -> Matrix<T> {
        let d = self.lattice.dim();
        let s2 = self.sigma * self.sigma;
        Matrix::from_fn(d, d, |i, j| if i == j { s2 } else { s2 * self.rho })
    }

    /// Cached `Σ⁻¹`.
    pub fn precision(&self) -> &Matrix<T> {
        &self.precision
    }

    /// Exact marginal by convolving the per-coordinate weights of the summed-out
    /// coordinates over their total `S = Σ s_j`, which the interaction term depends on.
    fn marginal_by_sum(&self, coords: &[usize]) -> Result<Pmf<T>> {
        let d = self.lattice.dim();
        let kk = self.lattice.k();
        let k = (kk - 1) / 2;
        let m = coords.len();
        Pmf::<T>::check_coords(coords, d)?;
        let cells = (kk as f64).powi(m as i32);
        if cells > ENUMERATION_BUDGET {
            return Err(Error::EnumerationTooLarge {
                states: cells,
                budget: ENUMERATION_BUDGET,
            });
        }
        let half = T::lit(0.5);
        let rest = d - m;

        // log N(S) for S in [-rest·k, rest·k], stored at offset rest·k.
        let mut log_n = vec![T::zero()];
        for _ in 0..rest {
            let mut next = vec![T::neg_infinity(); log_n.len() + 2 * k];
            for (si, &ln) in log_n.iter().enumerate() {
                for vi in 0..kk {
                    let v = self.lattice.value(vi);
                    let term = ln - half * self.alpha * v * v;
                    let slot = &mut next[si + vi];
                    *slot = log_sum_exp([*slot, term]);
                }
            }
            log_n = next;
        }
        let offset = (rest * k) as i64;

        let mut log_w = Vec::with_capacity(cells as usize);
        let mut idx = vec![0usize; m];
        loop {
            let mut quad = T::zero();
            let mut sum_r = T::zero();
            for &i in &idx {
                let v = self.lattice.value(i);
                quad += v * v;
                sum_r += v;
            }
            let inner = log_sum_exp(log_n.iter().enumerate().map(|(si, &ln)| {
                let s = sum_r + T::lit((si as i64 - offset) as f64);
                ln + half * self.gamma * s * s
            }));
            log_w.push(-half * self.alpha * quad + inner);
            if !advance(&mut idx, kk) {
                break;
            }
        }
        Pmf::from_log_weights(coords.to_vec(), kk, log_w)
    }
}

/// Odometer increment, last coordinate fastest. Returns false after the final tuple.
pub(crate) fn advance(idx: &mut [usize], k: usize) -> bool {
    for slot in idx.iter_mut().rev() {
        *slot += 1;
        if *slot < k {
            return true;
        }
        *slot = 0;
    }
    false
}

impl<T: Real> TargetModel<T> for DiscreteGaussian<T> {
    fn lattice(&self) -> &LatticeSpec<T> {
        &self.lattice
    }

    fn log_density(&self, s: &Vector<T>) -> T {
        let sum = s.sum();
        let sq = s.dot(s);
        -T::lit(0.5) * (self.alpha * sq - self.gamma * sum * sum)
    }

    fn grad_log_density(&self, s: &Vector<T>) -> Vector<T> {
        let sum = s.sum();
        s.map(|x| -(self.alpha * x - self.gamma * sum))
    }

    fn name(&self) -> &'static str {
        "discrete_gaussian"
    }

    fn quadratic(&self) -> Option<QuadraticTarget<T>> {
        let d = self.lattice.dim();
        Some(QuadraticTarget {
            lattice: self.lattice.clone(),
            w: -self.precision.clone(),
            b: Vector::zeros(d),
        })
    }

    fn exact_marginal(&self, coords: &[usize]) -> Option<Result<Pmf<T>>> {
        Some(self.marginal_by_sum(coords))
    }
}
