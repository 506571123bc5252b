//! Product categorical proposals and discrete over-relaxation.

use crate::noise::NoiseSource;
use crate::precondition::Preconditioner;
use crate::scalar::log_sum_exp;
use crate::{Error, Matrix, Real, Result, Vector};

/// Floor applied to per-value log-probabilities.
pub const LOG_PROB_FLOOR: f64 = -745.0;

/// Independent categorical distributions over the lattice values, one per coordinate.
#[derive(Debug, Clone)]
pub struct ProductCategorical<T: Real> {
    logits: Matrix<T>,
    log_norms: Vector<T>,
}

impl<T: Real> ProductCategorical<T> {
    /// Rows of `logits` (d × K) are unnormalized log-probabilities.
    pub fn from_logits(logits: Matrix<T>) -> Result<Self> {
        if logits.iter().any(|x| x.is_nan() || *x == T::infinity()) {
            return Err(Error::NonFinite("proposal logits".into()));
        }
        let log_norms = Vector::from_fn(logits.nrows(), |i, _| log_sum_exp(logits.row(i).iter().copied()));
        if log_norms.iter().any(|x| !Real::is_finite(*x)) {
            return Err(Error::NonFinite("proposal normalizer".into()));
        }
        Ok(ProductCategorical { logits, log_norms })
    }

    pub fn dim(&self) -> usize {
        self.logits.nrows()
    }

    pub fn k(&self) -> usize {
        self.logits.ncols()
    }

    pub fn logits(&self) -> &Matrix<T> {
        &self.logits
    }

    pub fn log_norms(&self) -> &Vector<T> {
        &self.log_norms
    }

    #[inline]
    pub fn log_prob_at(&self, i: usize, k: usize) -> T {
        let lp = self.logits[(i, k)] - self.log_norms[i];
        let floor = T::lit(LOG_PROB_FLOOR);
        if lp < floor {
            floor
        } else {
            lp
        }
    }

    /// Joint log-probability of a point given by level indices.
    pub fn log_prob(&self, levels: &[usize]) -> T {
        levels
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &k)| acc + self.log_prob_at(i, k))
    }

    /// Row `i` as probabilities in `f64`, renormalized to sum to one.
    pub fn row_pmf(&self, i: usize) -> Vec<f64> {
        let mut p: Vec<f64> = (0..self.k()).map(|k| self.log_prob_at(i, k).as_f64().exp()).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }
}

/// `logits(i, k) = −½ λ a_k² + [g_i − (W s_ref)_i + ((W + λI) z)_i] a_k`.
pub fn build_proposal<T: Real>(
    grad: &Vector<T>,
    s_ref: &Vector<T>,
    z: &Vector<T>,
    pre: &Preconditioner<T>,
    values: &[T],
) -> Result<ProductCategorical<T>> {
    let bracket = grad - pre.w() * s_ref + pre.precision() * z;
    proposal_from_bracket(&bracket, pre.lambda(), values)
}

/// Proposal with logits `−½ λ a_k² + c_i a_k` for a precomputed coefficient vector `c`.
pub fn proposal_from_bracket<T: Real>(bracket: &Vector<T>, lambda: T, values: &[T]) -> Result<ProductCategorical<T>> {
    let half_lambda = T::lit(0.5) * lambda;
    let logits = Matrix::from_fn(bracket.len(), values.len(), |i, k| {
        let a = values[k];
        -half_lambda * a * a + bracket[i] * a
    });
    ProductCategorical::from_logits(logits)
}

/// Inverse-CDF index for `u` over `pmf`: the first `k` with `u < F(k)`, skipping empty cells.
fn inverse_cdf(pmf: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (k, &p) in pmf.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last_positive = k;
            if u < cum {
                return k;
            }
        }
    }
    last_positive
}

/// Draws one level index per coordinate, one uniform each in ascending coordinate order.
pub fn sample_product<T: Real, N: NoiseSource + ?Sized>(dist: &ProductCategorical<T>, noise: &mut N) -> Vec<usize> {
    (0..dist.dim())
        .map(|i| inverse_cdf(&dist.row_pmf(i), noise.uniform()))
        .collect()
}

fn cdf_bounds(pmf: &[f64], k: usize) -> (f64, f64) {
    let lo: f64 = pmf[..k].iter().sum();
    (lo, lo + pmf[k])
}

fn check_row(pmf: &[f64], x0: usize) -> Result<()> {
    if x0 >= pmf.len() {
        return Err(Error::InvalidState(format!("level {x0} out of range")));
    }
    if !(pmf[x0] > 0.0) {
        return Err(Error::InvalidState(format!("level {x0} has zero probability")));
    }
    Ok(())
}

/// Discrete over-relaxation of level `x0` against `pmf`.
///
/// Draws `w0 ~ U[F(x0⁻), F(x0))` and `w̃ ~ U[0, 1)` (two uniforms, in that order), maps
/// `w1 = (−w0 + β w̃) mod 1` and returns the level containing `w1` with the exact
/// log transition probability `log P(x1 | x0)`.
pub fn over_relax<N: NoiseSource + ?Sized>(x0: usize, pmf: &[f64], beta: f64, noise: &mut N) -> Result<(usize, f64)> {
    check_row(pmf, x0)?;
    let u0 = noise.uniform();
    let u1 = noise.uniform();
    if pmf.len() == 1 {
        return Ok((0, 0.0));
    }
    let (a0, b0) = cdf_bounds(pmf, x0);
    let w0 = a0 + (b0 - a0) * u0;
    let w1 = (-w0 + beta * u1).rem_euclid(1.0);
    let x1 = inverse_cdf(pmf, w1);
    Ok((x1, over_relax_log_prob(x0, x1, pmf, beta)?))
}

/// Full conditional law `P(· | x0)` of [`over_relax`].
pub fn over_relax_conditional(x0: usize, pmf: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_row(pmf, x0)?;
    if pmf.len() == 1 {
        return Ok(vec![1.0]);
    }
    Ok((0..pmf.len())
        .map(|x1| (joint_measure(pmf, x0, x1, beta) / pmf[x0]).min(1.0))
        .collect())
}

/// `log P(x1 | x0)`; `-∞` when the move is impossible.
pub fn over_relax_log_prob(x0: usize, x1: usize, pmf: &[f64], beta: f64) -> Result<f64> {
    check_row(pmf, x0)?;
    if x1 >= pmf.len() {
        return Err(Error::InvalidState(format!("level {x1} out of range")));
    }
    if pmf.len() == 1 {
        return Ok(0.0);
    }
    Ok((joint_measure(pmf, x0, x1, beta).ln() - pmf[x0].ln()).min(0.0))
}

/// Area of `[0, p_small] × [0, p_big]` below the line `x + y = t`.
fn corner_area(t: f64, p_small: f64, p_big: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= p_small + p_big {
        p_small * p_big
    } else if t <= p_small {
        0.5 * t * t
    } else if t <= p_big {
        p_small * (t - 0.5 * p_small)
    } else {
        let r = p_small + p_big - t;
        p_small * p_big - 0.5 * r * r
    }
}

/// Length of `{x + y = t}` inside the rectangle, measured along `x`.
fn diagonal_length(t: f64, p_small: f64, p_big: f64) -> f64 {
    t.min(p_small).min(p_small + p_big - t).max(0.0)
}

/// `P(x0) P(x1 | x0)`, the probability that `w0` falls in level `x0` and `w1` in `x1`.
///
/// With `w1 = (−w0 + β w̃) mod 1` the pair `(w0, w1)` has density `1/|β|` on the bands
/// `(w0 + w1) mod 1` between `0` and `β`. Writing `w0 = a0 + x`, `w1 = a1 + y` the
/// measure is a sum of band areas over the rectangle `[0, p0] × [0, p1]`, which depends
/// on the two levels only through `a0 + a1` and the unordered pair `{p0, p1}`, so the
/// result is symmetric in `(x0, x1)` bit for bit.
fn joint_measure(pmf: &[f64], x0: usize, x1: usize, beta: f64) -> f64 {
    let (p0, p1) = (pmf[x0], pmf[x1]);
    if !(p0 > 0.0 && p1 > 0.0) {
        return 0.0;
    }
    let a0: f64 = pmf[..x0].iter().sum();
    let a1: f64 = pmf[..x1].iter().sum();
    let c = a0 + a1;
    let (ps, pb) = if p0 <= p1 { (p0, p1) } else { (p1, p0) };
    let (lo, hi) = if beta >= 0.0 { (0.0, beta) } else { (beta, 0.0) };
    let n_min = (c - hi).floor() as i64 - 1;
    let n_max = (c + ps + pb - lo).ceil() as i64 + 1;
    if beta == 0.0 {
        return (n_min..=n_max).map(|n| diagonal_length(n as f64 - c, ps, pb)).sum();
    }
    let area: f64 = (n_min..=n_max)
        .map(|n| {
            let t = n as f64 - c;
            corner_area(t + hi, ps, pb) - corner_area(t + lo, ps, pb)
        })
        .sum();
    (area / beta.abs()).min(ps)
}
