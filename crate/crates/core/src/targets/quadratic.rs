use super::{LatticeSpec, TargetModel};
use crate::{Error, Matrix, Real, Result, Vector};

/// Pairwise MRF `f(s) = ½ sᵀ W s + bᵀ s`.
///
/// Every preconditioned kernel is rejection-free on this target when its `W`
/// equals the target's.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTarget<T: Real> {
    pub lattice: LatticeSpec<T>,
    pub w: Matrix<T>,
    pub b: Vector<T>,
}

impl<T: Real> QuadraticTarget<T> {
    pub fn new(lattice: LatticeSpec<T>, w: Matrix<T>, b: Vector<T>) -> Result<Self> {
        let d = lattice.dim();
        if w.nrows() != d || w.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: w.nrows(),
            });
        }
        if b.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: b.len(),
            });
        }
        let scale = w.amax().max(T::one());
        if (&w - w.transpose()).amax() > T::lit(1e-12) * scale {
            return Err(Error::invalid("quadratic matrix must be symmetric"));
        }
        Ok(QuadraticTarget { lattice, w, b })
    }
}

impl<T: Real> TargetModel<T> for QuadraticTarget<T> {
    fn lattice(&self) -> &LatticeSpec<T> {
        &self.lattice
    }

    fn log_density(&self, s: &Vector<T>) -> T {
        T::lit(0.5) * s.dot(&(&self.w * s)) + self.b.dot(s)
    }

    fn grad_log_density(&self, s: &Vector<T>) -> Vector<T> {
        &self.w * s + &self.b
    }

    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn quadratic(&self) -> Option<QuadraticTarget<T>> {
        Some(self.clone())
    }
}
