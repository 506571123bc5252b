//! Target distributions on homogeneous lattices.
//!
//! A target exposes its negative potential `f(s)` (the unnormalized log-mass) and
//! the gradient of the natural continuous extension of `f`, evaluated at lattice
//! points. Built-in targets cache any derived matrices at construction and are
//! immutable afterwards, so they can be shared across concurrently running chains.

mod enumerate;
mod gaussian;
mod mixture;
mod potts;
mod quadratic;

pub use enumerate::{enumerate_joint, enumerate_joint_with_budget, JointTable, Pmf, ENUMERATION_BUDGET};
pub use gaussian::{discrete_gaussian, DiscreteGaussian};
pub use mixture::{quadratic_mixture, quadratic_mixture_default, QuadraticMixture};
pub use potts::{clock_potts, ClockPotts};
pub use quadratic::QuadraticTarget;

use crate::{Error, Real, Result, Vector};

/// The support `{a_1 < … < a_K}^d` shared by every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec<T> {
    dim: usize,
    values: Vec<T>,
}

impl<T: Real> LatticeSpec<T> {
    pub fn new(dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("lattice dimension must be positive"));
        }
        if values.len() < 2 {
            return Err(Error::invalid("lattice needs at least two values"));
        }
        if values.iter().any(|v| !Real::is_finite(*v)) {
            return Err(Error::invalid("lattice values must be finite"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("lattice values must be strictly ascending"));
        }
        Ok(LatticeSpec { dim, values })
    }

    /// `{-k, …, k}^dim`.
    pub fn symmetric_integers(dim: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let k = k as i64;
        Self::new(dim, (-k..=k).map(|v| T::lit(v as f64)).collect())
    }

    /// `{0, …, q-1}^dim`.
    pub fn spins(dim: usize, q: usize) -> Result<Self> {
        Self::new(dim, (0..q).map(|v| T::lit(v as f64)).collect())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Number of levels per coordinate.
    #[inline]
    pub fn k(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn value(&self, index: usize) -> T {
        self.values[index]
    }

    /// Position of `x` among the levels, requiring exact equality.
    pub fn index_of(&self, x: T) -> Option<usize> {
        self.values
            .binary_search_by(|v| v.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less))
            .ok()
    }

    pub fn contains(&self, s: &Vector<T>) -> bool {
        s.len() == self.dim && s.iter().all(|x| self.index_of(*x).is_some())
    }

    pub fn indices_of(&self, s: &Vector<T>) -> Result<Vec<usize>> {
        if s.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: s.len(),
            });
        }
        s.iter()
            .map(|x| {
                self.index_of(*x)
                    .ok_or_else(|| Error::InvalidState(format!("{x} is not a lattice level")))
            })
            .collect()
    }

    pub fn point(&self, indices: &[usize]) -> Vector<T> {
        Vector::from_iterator(indices.len(), indices.iter().map(|&i| self.values[i]))
    }

    /// Same levels, different dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(dim, self.values.clone())
    }
}

/// Contract every target satisfies: deterministic `f` and `∇f` on lattice points.
pub trait TargetModel<T: Real>: Send + Sync {
    fn lattice(&self) -> &LatticeSpec<T>;

    /// Negative potential `f(s)`, i.e. `log π(s)` up to a constant.
    fn log_density(&self, s: &Vector<T>) -> T;

    /// Gradient of the continuous extension of `f` at `s`.
    fn grad_log_density(&self, s: &Vector<T>) -> Vector<T>;

    fn name(&self) -> &'static str;

    #[inline]
    fn dim(&self) -> usize {
        self.lattice().dim()
    }

    /// The exact `(W, b)` representation when `f(s) = ½ sᵀWs + bᵀs`.
    fn quadratic(&self) -> Option<QuadraticTarget<T>> {
        None
    }

    /// Target-specific exact marginal, when cheaper than full enumeration.
    /// Returns `None` to fall back to brute force.
    fn exact_marginal(&self, _coords: &[usize]) -> Option<Result<Pmf<T>>> {
        None
    }
}

impl<T: Real, M: TargetModel<T> + ?Sized> TargetModel<T> for Box<M> {
    fn lattice(&self) -> &LatticeSpec<T> {
        (**self).lattice()
    }
    fn log_density(&self, s: &Vector<T>) -> T {
        (**self).log_density(s)
    }
    fn grad_log_density(&self, s: &Vector<T>) -> Vector<T> {
        (**self).grad_log_density(s)
    }
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn quadratic(&self) -> Option<QuadraticTarget<T>> {
        (**self).quadratic()
    }
    fn exact_marginal(&self, coords: &[usize]) -> Option<Result<Pmf<T>>> {
        (**self).exact_marginal(coords)
    }
}

impl<T: Real, M: TargetModel<T> + ?Sized> TargetModel<T> for std::sync::Arc<M> {
    fn lattice(&self) -> &LatticeSpec<T> {
        (**self).lattice()
    }
    fn log_density(&self, s: &Vector<T>) -> T {
        (**self).log_density(s)
    }
    fn grad_log_density(&self, s: &Vector<T>) -> Vector<T> {
        (**self).grad_log_density(s)
    }
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn quadratic(&self) -> Option<QuadraticTarget<T>> {
        (**self).quadratic()
    }
    fn exact_marginal(&self, coords: &[usize]) -> Option<Result<Pmf<T>>> {
        (**self).exact_marginal(coords)
    }
}
