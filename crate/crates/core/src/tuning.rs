//! Stepsize acceptance targeting and the staged grid search over `(δ, φ)`.

use serde::{Deserialize, Serialize};

use crate::chains::{run_chains, ChainStart};
use crate::diagnostics::ess_multichain;
use crate::precondition::{factorize, lambda_shift, Preconditioner, DEFAULT_COND_THRESHOLD};
use crate::samplers::{Kernel, KernelKind, SamplerConfig};
use crate::targets::TargetModel;
use crate::{Error, Matrix, Real, Result};

pub const DEFAULT_DECAY: f64 = 0.6;

/// How to turn a [`SamplerConfig`] into a kernel: the kind plus the calibrated `W`
/// (`None` for first-order specializations and Metropolis).
#[derive(Debug, Clone)]
pub struct KernelSpec<T: Real> {
    pub kind: KernelKind,
    pub w: Option<Matrix<T>>,
    pub cond_threshold: f64,
}

impl<T: Real> KernelSpec<T> {
    pub fn preconditioned(kind: KernelKind, w: Matrix<T>) -> Self {
        KernelSpec { kind, w: Some(w), cond_threshold: DEFAULT_COND_THRESHOLD }
    }

    pub fn first_order(kind: KernelKind) -> Self {
        KernelSpec { kind, w: None, cond_threshold: DEFAULT_COND_THRESHOLD }
    }

    pub fn preconditioner(&self, delta: f64) -> Result<Option<Preconditioner<T>>> {
        match &self.w {
            Some(w) => {
                let lambda = lambda_shift(w, T::lit(delta));
                Ok(Some(factorize(w, lambda, T::lit(self.cond_threshold))?))
            }
            None => Ok(None),
        }
    }

    pub fn build(&self, d: usize, config: SamplerConfig) -> Result<Kernel<T>> {
        if self.kind == KernelKind::Metropolis {
            return Kernel::new(KernelKind::Metropolis, None, config);
        }
        match self.preconditioner(config.delta)? {
            Some(pre) => Kernel::new(self.kind, Some(pre), config),
            None => Kernel::first_order_specialize(self.kind, d, config),
        }
    }
}

/// Multi-chain probe run used to score a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSpec {
    pub chains: usize,
    pub len: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec { chains: 10, len: 1100, burn_in: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub acceptance: f64,
    /// `None` when the energy ESS is undefined.
    pub energy_ess: Option<f64>,
}

/// Runs the probe and scores it by acceptance rate and energy ESS after burn-in.
pub fn probe<T, M>(spec: &KernelSpec<T>, config: SamplerConfig, target: &M, probe: &ProbeSpec) -> Result<ProbeResult>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
{
    if probe.len <= probe.burn_in {
        return Err(Error::invalid("probe length must exceed burn-in"));
    }
    let kernel = spec.build(target.dim(), config)?;
    let records = run_chains(&kernel, target, &ChainStart::Random, probe.chains, probe.len, probe.seed)?;
    let kept: Vec<_> = records.iter().map(|r| r.slice(probe.burn_in, probe.len)).collect();
    let accepted: usize = kept.iter().map(|r| r.accept_count()).sum();
    let total: usize = kept.iter().map(|r| r.len()).sum();
    let energies: Vec<Vec<T>> = kept.iter().map(|r| r.energies().to_vec()).collect();
    let energy_ess = match ess_multichain(&energies) {
        Ok(e) => Some(e.as_f64()),
        Err(Error::EssUndefined) => None,
        Err(e) => return Err(e),
    };
    Ok(ProbeResult {
        acceptance: accepted as f64 / total as f64,
        energy_ess,
    })
}

/// Stepsizes tried by [`target_acceptance`] with their measured acceptance rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTrace {
    pub alpha_target: f64,
    pub decay: f64,
    pub deltas: Vec<f64>,
    pub rates: Vec<f64>,
    pub chosen: f64,
}

/// Multiplicative stepsize search: for `m = 0..=M`, measure `α_m` at `δ_m`, then
/// `δ_{m+1} = δ_m · exp(±(1 + m)^{−a})` moving toward the target rate. Returns the
/// trace with the first `δ_m` minimizing `|α_m − α_target|`.
pub fn target_acceptance<F>(mut measure: F, delta0: f64, alpha_target: f64, decay: f64, m_max: usize) -> Result<TuneTrace>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(delta0 > 0.0) {
        return Err(Error::invalid("delta0 must be positive"));
    }
    if !(alpha_target > 0.0 && alpha_target < 1.0) {
        return Err(Error::invalid("target acceptance must lie in (0, 1)"));
    }
    if !(decay > 0.0) {
        return Err(Error::invalid("decay exponent must be positive"));
    }
    if m_max == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    let mut deltas = Vec::with_capacity(m_max + 1);
    let mut rates = Vec::with_capacity(m_max + 1);
    let mut delta = delta0;
    for m in 0..=m_max {
        let rate = measure(delta)?;
        deltas.push(delta);
        rates.push(rate);
        let step = ((1 + m) as f64).powf(-decay);
        if rate < alpha_target {
            delta *= step.exp();
        } else if rate > alpha_target {
            delta *= (-step).exp();
        }
    }
    let mut best = 0;
    for m in 1..rates.len() {
        if (rates[m] - alpha_target).abs() < (rates[best] - alpha_target).abs() {
            best = m;
        }
    }
    Ok(TuneTrace {
        alpha_target,
        decay,
        chosen: deltas[best],
        deltas,
        rates,
    })
}

/// [`target_acceptance`] measuring acceptance with probe runs of `spec` at each `δ`.
pub fn target_acceptance_probe<T, M>(
    spec: &KernelSpec<T>,
    base: SamplerConfig,
    target: &M,
    probe_spec: &ProbeSpec,
    delta0: f64,
    alpha_target: f64,
    decay: f64,
    m_max: usize,
) -> Result<TuneTrace>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
{
    target_acceptance(
        |delta| Ok(probe(spec, SamplerConfig { delta, ..base }, target, probe_spec)?.acceptance),
        delta0,
        alpha_target,
        decay,
        m_max,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub stage: String,
    pub config: SamplerConfig,
    pub result: ProbeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub chosen: SamplerConfig,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub delta: Vec<f64>,
    #[serde(default)]
    pub phi: Vec<f64>,
    /// Acceptance window gating the δ stage; `None` admits every candidate.
    #[serde(default)]
    pub acceptance_window: Option<(f64, f64)>,
}

fn sorted_unique(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite grid values"));
    v.dedup();
    v
}

/// Index of the largest ESS; undefined ranks last and ties keep the earliest entry.
fn best_index(results: &[&ProbeResult]) -> usize {
    let mut best = 0;
    for (i, r) in results.iter().enumerate().skip(1) {
        let better = match (r.energy_ess, results[best].energy_ess) {
            (Some(a), Some(b)) => a > b,
            (Some(_), None) => true,
            _ => false,
        };
        if better {
            best = i;
        }
    }
    best
}

/// Staged search: `ε` and `β` stay as in `base`; pick `δ` on the grid with `φ = 0`
/// by energy ESS, then pick `φ` at that `δ`. Candidates are scored with identical
/// probe seeds. When an acceptance window is given, only `δ` values inside it compete
/// (all of them if none falls inside).
pub fn staged_grid_search<T, M>(
    spec: &KernelSpec<T>,
    base: SamplerConfig,
    target: &M,
    grids: &Grids,
    probe_spec: &ProbeSpec,
) -> Result<GridSearch>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
{
    let deltas = sorted_unique(&grids.delta);
    if deltas.is_empty() {
        return Err(Error::EmptyGrid("delta".into()));
    }
    let tune_phi = spec.kind.uses_momentum();
    let phis = sorted_unique(&grids.phi);
    if tune_phi && phis.is_empty() {
        return Err(Error::EmptyGrid("phi".into()));
    }

    let mut candidates = Vec::new();
    for &delta in &deltas {
        let config = SamplerConfig { delta, phi: 0.0, ..base };
        let result = probe(spec, config, target, probe_spec)?;
        candidates.push(Candidate { stage: "delta".into(), config, result });
    }
    let in_window: Vec<&Candidate> = match grids.acceptance_window {
        Some((lo, hi)) => candidates
            .iter()
            .filter(|c| c.result.acceptance >= lo && c.result.acceptance <= hi)
            .collect(),
        None => candidates.iter().collect(),
    };
    let pool: Vec<&Candidate> = if in_window.is_empty() { candidates.iter().collect() } else { in_window };
    let results: Vec<&ProbeResult> = pool.iter().map(|c| &c.result).collect();
    let mut chosen = pool[best_index(&results)].config;

    if tune_phi {
        let start = candidates.len();
        for &phi in &phis {
            let config = SamplerConfig { phi, ..chosen };
            let result = if phi == 0.0 {
                candidates[..start]
                    .iter()
                    .find(|c| c.config == config)
                    .map(|c| c.result)
                    .map_or_else(|| probe(spec, config, target, probe_spec), Ok)?
            } else {
                probe(spec, config, target, probe_spec)?
            };
            candidates.push(Candidate { stage: "phi".into(), config, result });
        }
        let results: Vec<&ProbeResult> = candidates[start..].iter().map(|c| &c.result).collect();
        chosen = candidates[start + best_index(&results)].config;
    }
    Ok(GridSearch { chosen, candidates })
}
