use super::gaussian::advance;
use super::{LatticeSpec, Pmf, TargetModel, ENUMERATION_BUDGET};
use crate::scalar::log_sum_exp;
use crate::{Error, Real, Result, Vector};

/// Mixture of isotropic quadratic bumps on `{-k, …, k}^d`:
/// `f(s) = log Σ_m exp(-½ ‖s - μ_m‖² / σ_m²)`.
#[derive(Debug, Clone)]
pub struct QuadraticMixture<T: Real> {
    lattice: LatticeSpec<T>,
    means: Vec<Vector<T>>,
    variances: Vec<T>,
}

pub fn quadratic_mixture<T: Real>(
    d: usize,
    k: usize,
    means: Vec<Vector<T>>,
    variances: Vec<T>,
) -> Result<QuadraticMixture<T>> {
    if means.is_empty() {
        return Err(Error::invalid("mixture needs at least one component"));
    }
    if means.len() != variances.len() {
        return Err(Error::invalid("means and variances differ in length"));
    }
    if let Some(bad) = means.iter().find(|m| m.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    if variances.iter().any(|v| !(*v > T::zero())) {
        return Err(Error::invalid("component variances must be positive"));
    }
    Ok(QuadraticMixture {
        lattice: LatticeSpec::symmetric_integers(d, k)?,
        means,
        variances,
    })
}

/// Nine components with `μ_m = (-5.625 + 1.125 m)·1` and `σ_m² = 2.10 + 0.15 |m - 5|`, `m = 1..=M`.
pub fn quadratic_mixture_default<T: Real>(d: usize, k: usize) -> Result<QuadraticMixture<T>> {
    let m_count = 9;
    let means = (1..=m_count)
        .map(|m| Vector::from_element(d, T::lit(-5.625 + 1.125 * m as f64)))
        .collect();
    let variances = (1..=m_count)
        .map(|m: i32| T::lit(2.10 + 0.15 * (m - 5).abs() as f64))
        .collect();
    quadratic_mixture(d, k, means, variances)
}

impl<T: Real> QuadraticMixture<T> {
    pub fn means(&self) -> &[Vector<T>] {
        &self.means
    }

    pub fn variances(&self) -> &[T] {
        &self.variances
    }

    fn component_logits(&self, s: &Vector<T>) -> Vec<T> {
        let half = T::lit(0.5);
        self.means
            .iter()
            .zip(&self.variances)
            .map(|(mu, &var)| -half * (s - mu).norm_squared() / var)
            .collect()
    }

    /// Exact marginal: each component factorizes over coordinates, so the summed-out
    /// coordinates contribute a per-component constant.
    fn marginal_by_component(&self, coords: &[usize]) -> Result<Pmf<T>> {
        let d = self.lattice.dim();
        let kk = self.lattice.k();
        Pmf::<T>::check_coords(coords, d)?;
        let cells = (kk as f64).powi(coords.len() as i32);
        if cells > ENUMERATION_BUDGET {
            return Err(Error::EnumerationTooLarge {
                states: cells,
                budget: ENUMERATION_BUDGET,
            });
        }
        let half = T::lit(0.5);
        let values = self.lattice.values();
        let term = |m: usize, i: usize, a: T| {
            let x = a - self.means[m][i];
            -half * x * x / self.variances[m]
        };
        let rest: Vec<T> = (0..self.means.len())
            .map(|m| {
                (0..d)
                    .filter(|i| !coords.contains(i))
                    .map(|i| log_sum_exp(values.iter().map(|&a| term(m, i, a))))
                    .fold(T::zero(), |acc, z| acc + z)
            })
            .collect();
        let mut log_w = Vec::with_capacity(cells as usize);
        let mut idx = vec![0usize; coords.len()];
        loop {
            log_w.push(log_sum_exp(rest.iter().enumerate().map(|(m, &r)| {
                coords
                    .iter()
                    .zip(&idx)
                    .fold(r, |acc, (&i, &l)| acc + term(m, i, values[l]))
            })));
            if !advance(&mut idx, kk) {
                break;
            }
        }
        Pmf::from_log_weights(coords.to_vec(), kk, log_w)
    }
}

impl<T: Real> TargetModel<T> for QuadraticMixture<T> {
    fn lattice(&self) -> &LatticeSpec<T> {
        &self.lattice
    }

    fn log_density(&self, s: &Vector<T>) -> T {
        log_sum_exp(self.component_logits(s))
    }

    fn grad_log_density(&self, s: &Vector<T>) -> Vector<T> {
        let logits = self.component_logits(s);
        let norm = log_sum_exp(logits.iter().copied());
        let mut g = Vector::zeros(s.len());
        for ((mu, &var), &l) in self.means.iter().zip(&self.variances).zip(&logits) {
            let w = (l - norm).exp();
            g += (mu - s) * (w / var);
        }
        g
    }

    fn name(&self) -> &'static str {
        "quadratic_mixture"
    }

    fn exact_marginal(&self, coords: &[usize]) -> Option<Result<Pmf<T>>> {
        Some(self.marginal_by_component(coords))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_centered_component() {
        let t = quadratic_mixture::<f64>(3, 2, vec![Vector::zeros(3)], vec![1.0]).unwrap();
        let z = Vector::zeros(3);
        assert_eq!(t.log_density(&z), 0.0);
        assert_eq!(t.grad_log_density(&z), Vector::zeros(3));
    }

    #[test]
    fn default_is_symmetric_about_origin() {
        let t = quadratic_mixture_default::<f64>(10, 10).unwrap();
        assert_eq!(t.means()[4], Vector::zeros(10));
        assert!((t.variances()[0] - 2.70).abs() < 1e-12);
        let g = t.grad_log_density(&Vector::zeros(10));
        assert!(g.amax() < 1e-14);
        let s = Vector::from_fn(10, |i, _| (i as f64) - 4.0);
        assert!((t.log_density(&s) - t.log_density(&-s.clone())).abs() < 1e-12);
    }

    #[test]
    fn no_overflow_far_from_modes() {
        let t = quadratic_mixture_default::<f64>(10, 10).unwrap();
        let s = Vector::from_element(10, 10.0);
        let f = t.log_density(&s);
        assert!(f.is_finite());
        assert!(t.grad_log_density(&s).iter().all(|g| g.is_finite()));
    }

    #[test]
    fn component_marginal_matches_enumeration() {
        let t = quadratic_mixture_default::<f64>(3, 2).unwrap();
        let table = crate::targets::JointTable::build(&t, 1e6).unwrap();
        for coords in [vec![0], vec![2, 0], vec![0, 1, 2]] {
            let a = t.exact_marginal(&coords).unwrap().unwrap();
            let b = table.marginal(&coords).unwrap();
            for (x, y) in a.probs.iter().zip(&b.probs) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(quadratic_mixture::<f64>(2, 2, vec![], vec![]).is_err());
        assert!(quadratic_mixture::<f64>(2, 2, vec![Vector::zeros(2)], vec![0.0]).is_err());
        assert!(quadratic_mixture::<f64>(2, 2, vec![Vector::zeros(3)], vec![1.0]).is_err());
    }
}
