use super::gaussian::advance;
use super::TargetModel;
use crate::scalar::log_sum_exp;
use crate::{Error, Real, Result, Vector};

/// Largest number of lattice states brute-force enumeration will visit.
pub const ENUMERATION_BUDGET: f64 = 1e7;

/// Probability table over a tuple of coordinates.
///
/// Cells are indexed by the level indices of `coords` in mixed radix `k`,
/// first coordinate most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf<T> {
    pub coords: Vec<usize>,
    pub k: usize,
    pub probs: Vec<T>,
}

impl<T: Real> Pmf<T> {
    pub(crate) fn check_coords(coords: &[usize], d: usize) -> Result<()> {
        if coords.is_empty() {
            return Err(Error::invalid("at least one coordinate required"));
        }
        for (i, &c) in coords.iter().enumerate() {
            if c >= d {
                return Err(Error::invalid(format!("coordinate {c} out of range for d = {d}")));
            }
            if coords[..i].contains(&c) {
                return Err(Error::invalid(format!("coordinate {c} repeated")));
            }
        }
        Ok(())
    }

    /// Normalizes unnormalized log-weights without exponentiating them raw.
    pub fn from_log_weights(coords: Vec<usize>, k: usize, log_w: Vec<T>) -> Result<Self> {
        let norm = log_sum_exp(log_w.iter().copied());
        if !Real::is_finite(norm) {
            return Err(Error::NonFinite("normalizing constant".into()));
        }
        let probs = log_w.into_iter().map(|lw| (lw - norm).exp()).collect();
        Ok(Pmf { coords, k, probs })
    }

    /// Counts of the selected coordinates over draws (given as level indices).
    pub fn empirical<'a, I>(coords: Vec<usize>, k: usize, draws: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [usize]>,
    {
        let cells = k.pow(coords.len() as u32);
        let mut counts = vec![0usize; cells];
        let mut n = 0usize;
        for row in draws {
            let mut cell = 0usize;
            for &c in &coords {
                let idx = *row
                    .get(c)
                    .ok_or_else(|| Error::invalid(format!("draw is missing coordinate {c}")))?;
                if idx >= k {
                    return Err(Error::InvalidState(format!("level index {idx} >= {k}")));
                }
                cell = cell * k + idx;
            }
            counts[cell] += 1;
            n += 1;
        }
        if n == 0 {
            return Err(Error::invalid("no draws"));
        }
        let inv = T::one() / T::lit(n as f64);
        Ok(Pmf {
            coords,
            k,
            probs: counts.into_iter().map(|c| T::lit(c as f64) * inv).collect(),
        })
    }

    pub fn cell_index(&self, levels: &[usize]) -> usize {
        levels.iter().fold(0, |acc, &i| acc * self.k + i)
    }

    pub fn prob(&self, levels: &[usize]) -> T {
        self.probs[self.cell_index(levels)]
    }

    pub fn total(&self) -> T {
        self.probs.iter().fold(T::zero(), |a, &p| a + p)
    }

    /// Marginalizes onto a subset of this table's coordinates.
    pub fn marginalize(&self, keep: &[usize]) -> Result<Pmf<T>> {
        let pos: Vec<usize> = keep
            .iter()
            .map(|c| {
                self.coords
                    .iter()
                    .position(|x| x == c)
                    .ok_or_else(|| Error::invalid(format!("coordinate {c} not in table")))
            })
            .collect::<Result<_>>()?;
        let m = self.coords.len();
        let mut out = vec![T::zero(); self.k.pow(keep.len() as u32)];
        let mut idx = vec![0usize; m];
        let mut cell = 0usize;
        loop {
            let target = pos.iter().fold(0, |acc, &p| acc * self.k + idx[p]);
            out[target] += self.probs[cell];
            cell += 1;
            if !advance(&mut idx, self.k) {
                break;
            }
        }
        Ok(Pmf {
            coords: keep.to_vec(),
            k: self.k,
            probs: out,
        })
    }
}

/// Normalized full joint over `K^d` states, for brute-force marginals and moments.
#[derive(Debug, Clone)]
pub struct JointTable<T> {
    pmf: Pmf<T>,
}

impl<T: Real> JointTable<T> {
    pub fn build<M: TargetModel<T> + ?Sized>(target: &M, budget: f64) -> Result<Self> {
        let lattice = target.lattice();
        let d = lattice.dim();
        let k = lattice.k();
        let states = (k as f64).powi(d as i32);
        if states > budget {
            return Err(Error::EnumerationTooLarge { states, budget });
        }
        let mut idx = vec![0usize; d];
        let mut log_w = Vec::with_capacity(states as usize);
        let mut s = Vector::zeros(d);
        loop {
            for (slot, &i) in s.iter_mut().zip(&idx) {
                *slot = lattice.value(i);
            }
            log_w.push(target.log_density(&s));
            if !advance(&mut idx, k) {
                break;
            }
        }
        Ok(JointTable {
            pmf: Pmf::from_log_weights((0..d).collect(), k, log_w)?,
        })
    }

    pub fn pmf(&self) -> &Pmf<T> {
        &self.pmf
    }

    pub fn marginal(&self, coords: &[usize]) -> Result<Pmf<T>> {
        Pmf::<T>::check_coords(coords, self.pmf.coords.len())?;
        self.pmf.marginalize(coords)
    }
}

/// Exact pmf over `coords`, marginalizing every other coordinate exactly.
///
/// Uses a target-specific exact route when the target offers one, otherwise
/// enumerates all `K^d` states subject to [`ENUMERATION_BUDGET`].
pub fn enumerate_joint<T: Real, M: TargetModel<T> + ?Sized>(target: &M, coords: &[usize]) -> Result<Pmf<T>> {
    enumerate_joint_with_budget(target, coords, ENUMERATION_BUDGET)
}

pub fn enumerate_joint_with_budget<T: Real, M: TargetModel<T> + ?Sized>(
    target: &M,
    coords: &[usize],
    budget: f64,
) -> Result<Pmf<T>> {
    Pmf::<T>::check_coords(coords, target.dim())?;
    if let Some(exact) = target.exact_marginal(coords) {
        return exact;
    }
    JointTable::build(target, budget)?.marginal(coords)
}
