//! Convergence diagnostics: TV distance to exact marginals, multi-chain ESS,
//! autocorrelation and moment bias/variance across chains.

use crate::samplers::ChainState;
use crate::targets::{enumerate_joint, Pmf, TargetModel};
use crate::{Error, Matrix, Real, Result, Vector};

/// Draw history of one chain, stored as lattice level indices.
#[derive(Debug, Clone)]
pub struct ChainRecord<T: Real> {
    dim: usize,
    values: Vec<T>,
    levels: Vec<u32>,
    energies: Vec<T>,
    accepted: Vec<bool>,
    pub seed: u64,
    pub kernel: String,
}

impl<T: Real> ChainRecord<T> {
    pub fn new(dim: usize, values: Vec<T>, seed: u64, kernel: impl Into<String>) -> Self {
        ChainRecord {
            dim,
            values,
            levels: Vec::new(),
            energies: Vec::new(),
            accepted: Vec::new(),
            seed,
            kernel: kernel.into(),
        }
    }

    pub fn for_target<M: TargetModel<T> + ?Sized>(target: &M, seed: u64, kernel: impl Into<String>) -> Self {
        Self::new(target.dim(), target.lattice().values().to_vec(), seed, kernel)
    }

    pub fn push(&mut self, state: &ChainState<T>, accepted: bool) {
        self.push_levels(state.levels(), state.energy(), accepted);
    }

    pub fn push_levels(&mut self, levels: &[usize], energy: T, accepted: bool) {
        assert_eq!(levels.len(), self.dim, "draw dimension");
        self.levels.extend(levels.iter().map(|&l| l as u32));
        self.energies.push(energy);
        self.accepted.push(accepted);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn lattice_values(&self) -> &[T] {
        &self.values
    }

    /// Level indices of draw `t`.
    pub fn levels(&self, t: usize) -> Vec<usize> {
        self.levels[t * self.dim..(t + 1) * self.dim]
            .iter()
            .map(|&l| l as usize)
            .collect()
    }

    pub fn draw(&self, t: usize) -> Vector<T> {
        Vector::from_iterator(
            self.dim,
            self.levels[t * self.dim..(t + 1) * self.dim]
                .iter()
                .map(|&l| self.values[l as usize]),
        )
    }

    pub fn coordinate(&self, i: usize) -> Vec<T> {
        (0..self.len())
            .map(|t| self.values[self.levels[t * self.dim + i] as usize])
            .collect()
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    pub fn accepted(&self) -> &[bool] {
        &self.accepted
    }

    pub fn accept_count(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.accept_count() as f64 / self.len() as f64
        }
    }

    /// Draws `from..to` as a new record.
    pub fn slice(&self, from: usize, to: usize) -> Self {
        let to = to.min(self.len());
        let from = from.min(to);
        ChainRecord {
            dim: self.dim,
            values: self.values.clone(),
            levels: self.levels[from * self.dim..to * self.dim].to_vec(),
            energies: self.energies[from..to].to_vec(),
            accepted: self.accepted[from..to].to_vec(),
            seed: self.seed,
            kernel: self.kernel.clone(),
        }
    }

    /// Empirical pmf of `coords` over the first `n_draws` draws.
    pub fn empirical_pmf(&self, coords: &[usize], n_draws: usize) -> Result<Pmf<T>> {
        Pmf::<T>::check_coords(coords, self.dim)?;
        let n = n_draws.min(self.len());
        let rows: Vec<Vec<usize>> = (0..n).map(|t| self.levels(t)).collect();
        Pmf::empirical(coords.to_vec(), self.values.len(), rows.iter().map(|r| r.as_slice()))
    }
}

/// `½ Σ |π(s) − π̂(s)|` over a shared support.
pub fn tv_distance<T: Real>(a: &Pmf<T>, b: &Pmf<T>) -> Result<T> {
    if a.coords != b.coords || a.k != b.k || a.probs.len() != b.probs.len() {
        return Err(Error::SupportMismatch(format!(
            "coords {:?}/{:?}, k {}/{}",
            a.coords, b.coords, a.k, b.k
        )));
    }
    let sum = a
        .probs
        .iter()
        .zip(&b.probs)
        .fold(T::zero(), |acc, (&p, &q)| acc + (p - q).abs());
    Ok(T::lit(0.5) * sum)
}

fn mean<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |a, &b| a + b) / T::lit(x.len() as f64)
}

/// Batch-mean ESS `T·W/B` of one scalar series observed in `m ≥ 2` chains of equal length `T ≥ 2`.
pub fn ess_multichain<T: Real>(chains: &[Vec<T>]) -> Result<T> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::invalid("ESS needs at least two chains"));
    }
    let t_len = chains[0].len();
    if t_len < 2 {
        return Err(Error::invalid("ESS needs at least two draws per chain"));
    }
    if let Some(c) = chains.iter().find(|c| c.len() != t_len) {
        return Err(Error::DimensionMismatch { expected: t_len, got: c.len() });
    }
    let means: Vec<T> = chains.iter().map(|c| mean(c)).collect();
    let grand = mean(&means);
    let mut within = T::zero();
    for (c, &mu) in chains.iter().zip(&means) {
        within += c.iter().fold(T::zero(), |a, &x| a + (x - mu) * (x - mu));
    }
    let tt = T::lit(t_len as f64);
    within /= T::lit((m * (t_len - 1)) as f64);
    let between = means.iter().fold(T::zero(), |a, &mu| a + (mu - grand) * (mu - grand)) * tt
        / T::lit((m - 1) as f64);
    if between == T::zero() {
        return Err(Error::EssUndefined);
    }
    Ok(tt * within / between)
}

/// Biased autocorrelation `ρ̂(0..=max_lag)`.
pub fn acf<T: Real>(x: &[T], max_lag: usize) -> Result<Vec<T>> {
    if x.len() <= max_lag {
        return Err(Error::invalid(format!("series of length {} too short for lag {max_lag}", x.len())));
    }
    let mu = mean(x);
    let centered: Vec<T> = x.iter().map(|&v| v - mu).collect();
    let denom = centered.iter().fold(T::zero(), |a, &v| a + v * v);
    if denom == T::zero() {
        return Err(Error::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|lag| {
            centered[..x.len() - lag]
                .iter()
                .zip(&centered[lag..])
                .fold(T::zero(), |a, (&p, &q)| a + p * q)
                / denom
        })
        .collect())
}

/// ESS per coordinate summarized by min, median and max, plus the energy series.
#[derive(Debug, Clone, PartialEq)]
pub struct EssSummary {
    /// `None` where the between-chain variance vanished.
    pub per_coordinate: Vec<Option<f64>>,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
    pub energy: Option<f64>,
}

fn defined(r: Result<impl Real>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v.as_f64())),
        Err(Error::EssUndefined) => Ok(None),
        Err(e) => Err(e),
    }
}

/// ESS over the first `n_draws` draws of each record.
pub fn ess_summary<T: Real>(records: &[ChainRecord<T>], n_draws: usize) -> Result<EssSummary> {
    let d = records.first().map(|r| r.dim()).ok_or_else(|| Error::invalid("no chains"))?;
    let n = records.iter().map(|r| r.len()).min().unwrap_or(0).min(n_draws);
    let per_coordinate = (0..d)
        .map(|i| {
            let series: Vec<Vec<T>> = records.iter().map(|r| r.coordinate(i)[..n].to_vec()).collect();
            defined(ess_multichain(&series))
        })
        .collect::<Result<Vec<_>>>()?;
    let energy_series: Vec<Vec<T>> = records.iter().map(|r| r.energies()[..n].to_vec()).collect();
    let energy = defined(ess_multichain(&energy_series))?;
    let mut sorted: Vec<f64> = per_coordinate.iter().flatten().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite ESS"));
    let median = if sorted.is_empty() {
        None
    } else if sorted.len() % 2 == 1 {
        Some(sorted[sorted.len() / 2])
    } else {
        Some(0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]))
    };
    Ok(EssSummary {
        min: sorted.first().copied(),
        max: sorted.last().copied(),
        median,
        per_coordinate,
        energy,
    })
}

/// Mean and standard deviation across chains of the TV distance between each chain's
/// empirical marginal on `coords` (first `n_draws` draws) and `exact`.
pub fn marginal_tv<T: Real>(records: &[ChainRecord<T>], exact: &Pmf<T>, n_draws: usize) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::invalid("no chains"));
    }
    let tvs = records
        .iter()
        .map(|r| Ok(tv_distance(&r.empirical_pmf(&exact.coords, n_draws)?, exact)?.as_f64()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_sd(&tvs))
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mu = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mu, 0.0);
    }
    let var = x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1.0);
    (mu, var.sqrt())
}

/// First and second moments `E[s_i]`, `E[s_i²]` and `E[s_i s_j]` (i < j, upper triangle).
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T: Real> {
    pub mean: Vector<T>,
    pub second: Vector<T>,
    pub cross: Matrix<T>,
}

impl<T: Real> Moments<T> {
    /// Sample moments of one chain.
    pub fn from_record(record: &ChainRecord<T>) -> Self {
        let d = record.dim();
        let n = T::lit(record.len() as f64);
        let mut mean = Vector::zeros(d);
        let mut second = Vector::zeros(d);
        let mut cross = Matrix::zeros(d, d);
        for t in 0..record.len() {
            let s = record.draw(t);
            mean += &s;
            second += s.component_mul(&s);
            cross += &s * s.transpose();
        }
        Moments {
            mean: mean / n,
            second: second / n,
            cross: cross / n,
        }
    }

    /// Exact moments from one- and two-coordinate marginals of `target`.
    pub fn exact<M: TargetModel<T> + ?Sized>(target: &M) -> Result<Self> {
        let d = target.dim();
        let values = target.lattice().values();
        let mut mean = Vector::zeros(d);
        let mut second = Vector::zeros(d);
        let mut cross = Matrix::zeros(d, d);
        for i in 0..d {
            let p = enumerate_joint(target, &[i])?;
            for (k, &a) in values.iter().enumerate() {
                mean[i] += p.probs[k] * a;
                second[i] += p.probs[k] * a * a;
            }
            cross[(i, i)] = second[i];
            for j in (i + 1)..d {
                let p = enumerate_joint(target, &[i, j])?;
                let mut e = T::zero();
                for (ka, &a) in values.iter().enumerate() {
                    for (kb, &b) in values.iter().enumerate() {
                        e += p.probs[ka * values.len() + kb] * a * b;
                    }
                }
                cross[(i, j)] = e;
                cross[(j, i)] = e;
            }
        }
        Ok(Moments { mean, second, cross })
    }
}

/// Squared bias of the across-chain mean estimate and across-chain variance,
/// averaged over coordinates (or over pairs `i < j` for the cross moment).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentStat {
    pub bias2: Option<f64>,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub mean: MomentStat,
    pub second: MomentStat,
    pub cross: MomentStat,
}

pub fn moment_report<T: Real>(per_chain: &[Moments<T>], exact: Option<&Moments<T>>) -> Result<MomentReport> {
    let m = per_chain.len();
    if m < 2 {
        return Err(Error::invalid("moment variance needs at least two chains"));
    }
    let d = per_chain[0].mean.len();
    let stat = |get: &dyn Fn(&Moments<T>) -> f64, exact_val: Option<f64>| -> (Option<f64>, f64) {
        let est: Vec<f64> = per_chain.iter().map(get).collect();
        let mu = est.iter().sum::<f64>() / m as f64;
        let var = est.iter().map(|e| (e - mu) * (e - mu)).sum::<f64>() / (m - 1) as f64;
        (exact_val.map(|x| (mu - x) * (mu - x)), var)
    };
    let average = |items: Vec<(Option<f64>, f64)>| -> MomentStat {
        let n = items.len().max(1) as f64;
        let bias2 = if items.iter().all(|(b, _)| b.is_some()) && !items.is_empty() {
            Some(items.iter().map(|(b, _)| b.unwrap()).sum::<f64>() / n)
        } else {
            None
        };
        MomentStat {
            bias2,
            variance: items.iter().map(|(_, v)| v).sum::<f64>() / n,
        }
    };
    let first = (0..d)
        .map(|i| stat(&|mo: &Moments<T>| mo.mean[i].as_f64(), exact.map(|e| e.mean[i].as_f64())))
        .collect();
    let second = (0..d)
        .map(|i| stat(&|mo: &Moments<T>| mo.second[i].as_f64(), exact.map(|e| e.second[i].as_f64())))
        .collect();
    let mut cross = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            cross.push(stat(
                &|mo: &Moments<T>| mo.cross[(i, j)].as_f64(),
                exact.map(|e| e.cross[(i, j)].as_f64()),
            ));
        }
    }
    Ok(MomentReport {
        mean: average(first),
        second: average(second),
        cross: average(cross),
    })
}
