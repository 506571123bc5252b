//! Calibration, chain execution, metrics and tuning for one experiment config.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use itertools::Itertools;
use log::info;
use pdhams::chains::{run_chain, run_chains, ChainStart};
use pdhams::diagnostics::{ess_summary, mean_sd, moment_report, tv_distance, MomentStat, Moments};
use pdhams::precondition::{calibrate_w, CalibrationMethod, CalibrationSample, PreconditionerRecord};
use pdhams::samplers::{Kernel, KernelKind, SamplerConfig};
use pdhams::targets::{JointTable, Pmf, TargetModel, ENUMERATION_BUDGET};
use pdhams::tuning::{self, Candidate, GridSearch, Grids, KernelSpec, ProbeSpec, TuneTrace};
use pdhams::{linalg, ChainRecord64, Matrix, Vector};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BoxedTarget, CalibrationChoice, ExperimentConfig, Init, SamplerSection};
use crate::error::{ConfigError, Warning};
use crate::io::{self, MetricRow, TvRow};

/// Where `W` came from and what it looks like.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationInfo {
    pub method: CalibrationChoice,
    pub source: String,
    /// Draws that fed the estimator, duplicates included.
    pub sample_size: Option<usize>,
    pub burn_in_acceptance: Option<f64>,
    pub w: Option<Vec<Vec<f64>>>,
    pub w_min_eigenvalue: Option<f64>,
}

pub struct Calibrated {
    pub spec: KernelSpec<f64>,
    pub info: CalibrationInfo,
}

fn rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

/// Stream index used by the calibration burn-in: one past the last production chain.
pub fn calibration_stream(config: &ExperimentConfig) -> usize {
    config.run.chains
}

/// Produces the kernel spec: exact or estimated `W`, or none for first-order kernels.
pub fn calibrate(config: &ExperimentConfig, target: &dyn TargetModel<f64>) -> Result<Calibrated> {
    let kind = config.sampler.kernel;
    let cal = &config.calibration;
    let mut info = CalibrationInfo {
        method: cal.method,
        source: "none".into(),
        sample_size: None,
        burn_in_acceptance: None,
        w: None,
        w_min_eigenvalue: None,
    };
    let w = if kind == KernelKind::Metropolis {
        None
    } else {
        match cal.method {
            CalibrationChoice::None => None,
            CalibrationChoice::ExactQuadratic => {
                let quad = target.quadratic().ok_or_else(|| {
                    ConfigError(format!("target {} has no exact quadratic form", target.name()))
                })?;
                info.source = "exact".into();
                Some(quad.w)
            }
            CalibrationChoice::GradientDiff | CalibrationChoice::EnergyDiff => {
                let method = if cal.method == CalibrationChoice::GradientDiff {
                    CalibrationMethod::GradientDiff
                } else {
                    CalibrationMethod::EnergyDiff
                };
                let states = match &cal.from_csv {
                    Some(path) => {
                        info.source = format!("csv:{}", path.display());
                        let rec = io::read_chain(path, target.lattice(), config.run.seed, "calibration")?;
                        (0..rec.len()).map(|t| rec.draw(t)).collect::<Vec<_>>()
                    }
                    None => {
                        info.source = "burn_in".into();
                        let burn_config = SamplerConfig {
                            r: cal.burn_in_r,
                            delta: cal.burn_in_delta,
                            ..SamplerConfig::default()
                        };
                        let burn = match cal.burn_in_kernel {
                            KernelKind::Metropolis => Kernel::new(KernelKind::Metropolis, None, burn_config)?,
                            kind => Kernel::first_order_specialize(kind, target.dim(), burn_config)?,
                        };
                        let rec = run_chain(
                            &burn,
                            target,
                            &start(config, target),
                            cal.burn_in,
                            config.run.seed,
                            calibration_stream(config),
                        )?;
                        info.burn_in_acceptance = Some(rec.acceptance_rate());
                        (0..rec.len()).map(|t| rec.draw(t)).collect()
                    }
                };
                info.sample_size = Some(states.len());
                let sample = CalibrationSample::from_states(target, states)?;
                Some(calibrate_w(&sample, method)?)
            }
        }
    };
    if let Some(w) = &w {
        info.w = Some(rows(w));
        info.w_min_eigenvalue = Some(linalg::min_eigenvalue(w));
    }
    let spec = KernelSpec {
        kind,
        w,
        cond_threshold: cal.cond_threshold,
    };
    Ok(Calibrated { spec, info })
}

pub fn start(config: &ExperimentConfig, target: &dyn TargetModel<f64>) -> ChainStart<f64> {
    match config.run.init {
        Init::Random => ChainStart::Random,
        Init::Lowest => {
            let low = target.lattice().value(0);
            ChainStart::Fixed(Vector::from_element(target.dim(), low))
        }
    }
}

/// Runs `f` on a worker pool of the configured size.
pub fn with_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

/// Metrics computed from kept draws, plus warnings for omitted metrics.
pub struct MetricsOutput {
    pub rows: Vec<MetricRow>,
    pub tv: Vec<TvRow>,
    pub warnings: Vec<Warning>,
}

/// Exact marginals, through the target's own route when it has one and otherwise
/// from one shared enumeration of the joint.
struct ExactMarginals<'a> {
    target: &'a dyn TargetModel<f64>,
    table: Option<JointTable<f64>>,
}

impl<'a> ExactMarginals<'a> {
    fn new(target: &'a dyn TargetModel<f64>) -> Self {
        ExactMarginals { target, table: None }
    }

    fn get(&mut self, coords: &[usize]) -> pdhams::Result<Pmf<f64>> {
        if let Some(exact) = self.target.exact_marginal(coords) {
            return exact;
        }
        if self.table.is_none() {
            self.table = Some(JointTable::build(self.target, ENUMERATION_BUDGET)?);
        }
        self.table.as_ref().expect("built above").marginal(coords)
    }
}

/// Level indices of every draw, row-major.
fn flat_levels(record: &ChainRecord64) -> Vec<u32> {
    (0..record.len())
        .flat_map(|t| record.levels(t).into_iter().map(|l| l as u32))
        .collect()
}

/// TV of each chain's empirical marginal on `exact.coords` at every checkpoint.
fn tv_by_checkpoint(levels: &[u32], d: usize, exact: &Pmf<f64>, checkpoints: &[usize]) -> pdhams::Result<Vec<f64>> {
    let mut counts = vec![0usize; exact.probs.len()];
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut t = 0;
    for &n in checkpoints {
        while t < n {
            let row = &levels[t * d..(t + 1) * d];
            let cell = exact.coords.iter().fold(0, |acc, &c| acc * exact.k + row[c] as usize);
            counts[cell] += 1;
            t += 1;
        }
        let emp = Pmf {
            coords: exact.coords.clone(),
            k: exact.k,
            probs: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        };
        out.push(tv_distance(&emp, exact)?);
    }
    Ok(out)
}

fn is_enumeration(e: &pdhams::Error) -> bool {
    matches!(e, pdhams::Error::EnumerationTooLarge { .. })
}

fn moment_rows(rows: &mut Vec<MetricRow>, name: &str, n: usize, stat: &MomentStat) {
    rows.push(MetricRow::new("moment_bias2", name, n, stat.bias2));
    rows.push(MetricRow::new("moment_variance", name, n, Some(stat.variance)));
}

/// Metrics over kept draws at every checkpoint.
pub fn compute_metrics(
    config: &ExperimentConfig,
    target: &dyn TargetModel<f64>,
    kept: &[ChainRecord64],
) -> Result<MetricsOutput> {
    let d = target.dim();
    let checkpoints = config.checkpoints();
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    let mut tv = Vec::new();

    // Per tuple: mean and sd over chains at every checkpoint; per order these are
    // then averaged over tuples.
    let mut tv_summary: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    if !config.metrics.tv_orders.is_empty() {
        let levels: Vec<Vec<u32>> = kept.par_iter().map(flat_levels).collect();
        let mut exact = ExactMarginals::new(target);
        for &order in &config.metrics.tv_orders {
            if order > d {
                warnings.push(Warning(format!("TV order {order} exceeds dimension {d}; omitted")));
                continue;
            }
            let mut sums = vec![(0.0, 0.0); checkpoints.len()];
            let mut tuples = 0usize;
            let mut rows_for_order = Vec::new();
            let mut omitted = false;
            for coords in (0..d).combinations(order) {
                let pmf = match exact.get(&coords) {
                    Ok(p) => p,
                    Err(e) if is_enumeration(&e) => {
                        warnings.push(Warning(format!("TV order {order} omitted: {e}")));
                        omitted = true;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                };
                let by_chain = levels
                    .par_iter()
                    .map(|l| tv_by_checkpoint(l, d, &pmf, &checkpoints))
                    .collect::<pdhams::Result<Vec<_>>>()?;
                for (ci, &n) in checkpoints.iter().enumerate() {
                    let vals: Vec<f64> = by_chain.iter().map(|c| c[ci]).collect();
                    let (mean, sd) = mean_sd(&vals);
                    sums[ci].0 += mean;
                    sums[ci].1 += sd;
                    rows_for_order.push(TvRow { coords: coords.clone(), n_draws: n, mean, sd });
                }
                tuples += 1;
            }
            if !omitted {
                tv.extend(rows_for_order);
                let avg = sums.iter().map(|&(m, s)| (m / tuples as f64, s / tuples as f64)).collect();
                tv_summary.push((order, avg));
            }
        }
    }

    let exact_moments = if config.metrics.moments {
        match Moments::exact(target) {
            Ok(m) => Some(m),
            Err(e) if is_enumeration(&e) => {
                warnings.push(Warning(format!("moment bias omitted: {e}")));
                None
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };

    for (ci, &n) in checkpoints.iter().enumerate() {
        for (order, avg) in &tv_summary {
            let (mean, sd) = avg[ci];
            rows.push(MetricRow::new("tv", format!("order={order};mean"), n, Some(mean)));
            rows.push(MetricRow::new("tv", format!("order={order};sd"), n, Some(sd)));
        }

        let ess = ess_summary(kept, n)?;
        rows.push(MetricRow::new("ess_min", "", n, ess.min));
        rows.push(MetricRow::new("ess_median", "", n, ess.median));
        rows.push(MetricRow::new("ess_max", "", n, ess.max));
        rows.push(MetricRow::new("ess_energy", "", n, ess.energy));

        let accepted: usize = kept.iter().map(|r| r.accepted()[..n].iter().filter(|&&a| a).count()).sum();
        rows.push(MetricRow::new(
            "acceptance",
            "",
            n,
            Some(accepted as f64 / (n * kept.len()) as f64),
        ));

        if config.metrics.moments {
            let per_chain: Vec<Moments<f64>> = kept.par_iter().map(|r| Moments::from_record(&r.slice(0, n))).collect();
            match moment_report(&per_chain, exact_moments.as_ref()) {
                Ok(rep) => {
                    moment_rows(&mut rows, "mean", n, &rep.mean);
                    moment_rows(&mut rows, "second", n, &rep.second);
                    moment_rows(&mut rows, "cross", n, &rep.cross);
                }
                Err(pdhams::Error::InvalidArgument(msg)) => {
                    if ci == 0 {
                        warnings.push(Warning(format!("moments omitted: {msg}")));
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(MetricsOutput { rows, tv, warnings })
}

fn write_metric_files(dir: &Path, out: &MetricsOutput) -> Result<()> {
    io::write_metrics(&dir.join(io::METRICS_FILE), &out.rows)?;
    io::write_tv_detail(&dir.join(io::TV_DETAIL_FILE), &out.tv)?;
    Ok(())
}

#[derive(Serialize)]
struct Seeds {
    base_seed: u64,
    generator: &'static str,
    chain_streams: std::ops::Range<usize>,
    calibration_stream: usize,
    probe_seed: Option<u64>,
}

#[derive(Serialize)]
struct TargetInfo {
    name: &'static str,
    dim: usize,
    levels: Vec<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a ExperimentConfig,
    target: TargetInfo,
    kernel: String,
    sampler: SamplerConfig,
    calibration: &'a CalibrationInfo,
    preconditioner: Option<PreconditionerRecord>,
    seeds: Seeds,
    kept_draws: usize,
    checkpoints: Vec<usize>,
    warnings: Vec<String>,
}

fn target_info(target: &dyn TargetModel<f64>) -> TargetInfo {
    TargetInfo {
        name: target.name(),
        dim: target.dim(),
        levels: target.lattice().values().to_vec(),
    }
}

fn seeds(config: &ExperimentConfig) -> Seeds {
    Seeds {
        base_seed: config.run.seed,
        generator: "ChaCha20 seeded from base_seed, one stream per chain index",
        chain_streams: 0..config.run.chains,
        calibration_stream: calibration_stream(config),
        probe_seed: config.tune.as_ref().map(|t| t.probe_seed),
    }
}

/// Result of `run`: where the artifacts went and any omitted metrics.
pub struct RunOutcome {
    pub warnings: Vec<Warning>,
    pub acceptance: f64,
}

pub fn build_kernel(config: &ExperimentConfig, cal: &Calibrated, target: &dyn TargetModel<f64>) -> Result<Kernel<f64>> {
    Ok(cal.spec.build(target.dim(), config.sampler_config())?)
}

/// Calibrates, runs every chain, and writes chains, metrics, acceptance and manifest.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let target: BoxedTarget = config.target.build().map_err(|e| ConfigError(e.to_string()))?;
    let out_dir = &config.run.output;
    fs::create_dir_all(out_dir).with_context(|| out_dir.display().to_string())?;

    with_pool(config.run.threads, || -> Result<RunOutcome> {
        let cal = calibrate(config, target.as_ref())?;
        let kernel = build_kernel(config, &cal, target.as_ref())?;
        let pre = kernel.preconditioner().map(|p| p.to_record());
        if let Some(p) = &pre {
            io::write_json(&out_dir.join(io::PRECONDITIONER_FILE), p)?;
        }
        info!(
            "running {} chains x {} steps of {} on {}",
            config.run.chains,
            config.run.length,
            kernel.label(),
            target.name()
        );
        let records = run_chains(
            &kernel,
            target.as_ref(),
            &start(config, target.as_ref()),
            config.run.chains,
            config.run.length,
            config.run.seed,
        )?;
        if config.run.write_chains {
            fs::create_dir_all(out_dir.join(io::CHAINS_DIR))?;
            records
                .par_iter()
                .enumerate()
                .try_for_each(|(i, r)| io::write_chain(&io::chain_path(out_dir, i), i, r))?;
        }
        let kept: Vec<ChainRecord64> = records
            .iter()
            .map(|r| r.slice(config.run.burn_in, config.run.length))
            .collect();
        io::write_acceptance(&out_dir.join(io::ACCEPTANCE_FILE), &kernel.label(), &kept)?;
        let metrics = compute_metrics(config, target.as_ref(), &kept)?;
        write_metric_files(out_dir, &metrics)?;
        let acceptance = kept.iter().map(|r| r.accept_count()).sum::<usize>() as f64
            / kept.iter().map(|r| r.len()).sum::<usize>() as f64;
        let manifest = Manifest {
            software: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: "run",
            config,
            target: target_info(target.as_ref()),
            kernel: kernel.label(),
            sampler: *kernel.config(),
            calibration: &cal.info,
            preconditioner: pre,
            seeds: seeds(config),
            kept_draws: config.kept(),
            checkpoints: config.checkpoints(),
            warnings: metrics.warnings.iter().map(|w| w.0.clone()).collect(),
        };
        io::write_json(&out_dir.join(io::MANIFEST_FILE), &manifest)?;
        Ok(RunOutcome { warnings: metrics.warnings, acceptance })
    })?
}

/// Recomputes `metrics.csv` and `tv_detail.csv` from the stored chain CSVs.
pub fn metrics_from_chains(config: &ExperimentConfig) -> Result<Vec<Warning>> {
    let target: BoxedTarget = config.target.build().map_err(|e| ConfigError(e.to_string()))?;
    let dir = &config.run.output;
    with_pool(config.run.threads, || -> Result<Vec<Warning>> {
        let kernel = config.sampler.kernel.name();
        let records = (0..config.run.chains)
            .into_par_iter()
            .map(|i| io::read_chain(&io::chain_path(dir, i), target.lattice(), config.run.seed, kernel))
            .collect::<Result<Vec<_>>>()?;
        if let Some(r) = records.iter().find(|r| r.len() != config.run.length) {
            return Err(ConfigError(format!(
                "stored chain has {} draws but run.length is {}",
                r.len(),
                config.run.length
            ))
            .into());
        }
        let kept: Vec<ChainRecord64> = records
            .iter()
            .map(|r| r.slice(config.run.burn_in, config.run.length))
            .collect();
        let metrics = compute_metrics(config, target.as_ref(), &kept)?;
        write_metric_files(dir, &metrics)?;
        Ok(metrics.warnings)
    })?
}

/// Calibrates only, writing the preconditioner at the configured δ and the calibration record.
pub fn calibrate_only(config: &ExperimentConfig) -> Result<CalibrationInfo> {
    let target: BoxedTarget = config.target.build().map_err(|e| ConfigError(e.to_string()))?;
    let dir = &config.run.output;
    fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    let cal = calibrate(config, target.as_ref())?;
    let kernel = build_kernel(config, &cal, target.as_ref())?;
    if let Some(p) = kernel.preconditioner() {
        io::write_json(&dir.join(io::PRECONDITIONER_FILE), &p.to_record())?;
    }
    io::write_json(&dir.join("calibration.json"), &cal.info)?;
    Ok(cal.info)
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneReport {
    pub kernel: KernelKind,
    pub chosen: SamplerConfig,
    pub candidates: Vec<Candidate>,
    pub acceptance_trace: Option<TuneTrace>,
    pub probe: ProbeSpec,
    pub calibration: CalibrationInfo,
}

/// Index of the highest energy ESS; undefined ranks last, ties keep the earliest.
fn best_by_ess(candidates: &[Candidate]) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let better = match (c.result.energy_ess, candidates[best].result.energy_ess) {
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

/// Grid search (preceded by acceptance targeting when configured); writes
/// `tuning.json` and a copy of the config with the chosen sampler as `tuned.toml`.
pub fn tune(config: &ExperimentConfig) -> Result<TuneReport> {
    let tc = config
        .tune
        .clone()
        .ok_or_else(|| ConfigError("the tune command needs a [tune] section".into()))?;
    let target: BoxedTarget = config.target.build().map_err(|e| ConfigError(e.to_string()))?;
    let dir = &config.run.output;
    fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    let base = config.sampler_config();
    let probe_spec = ProbeSpec {
        chains: tc.probe_chains,
        len: tc.probe_length,
        burn_in: tc.probe_burn_in,
        seed: tc.probe_seed,
    };

    let report = with_pool(config.run.threads, || -> Result<TuneReport> {
        let cal = calibrate(config, target.as_ref())?;
        let kind = config.sampler.kernel;
        if kind == KernelKind::Metropolis {
            let radii = if tc.r.is_empty() { vec![base.r] } else { tc.r.clone() };
            let mut candidates = Vec::new();
            for r in radii {
                let cfg = SamplerConfig { r, ..base };
                let result = tuning::probe(&cal.spec, cfg, target.as_ref(), &probe_spec)?;
                candidates.push(Candidate { stage: "r".into(), config: cfg, result });
            }
            let chosen = candidates[best_by_ess(&candidates)].config;
            return Ok(TuneReport {
                kernel: kind,
                chosen,
                candidates,
                acceptance_trace: None,
                probe: probe_spec,
                calibration: cal.info,
            });
        }
        let acceptance_trace = match tc.target_acceptance {
            Some(alpha) => Some(tuning::target_acceptance_probe(
                &cal.spec,
                base,
                target.as_ref(),
                &probe_spec,
                tc.delta0,
                alpha,
                tc.decay,
                tc.max_iter,
            )?),
            None => None,
        };
        let mut deltas = tc.delta.clone();
        if let Some(tr) = &acceptance_trace {
            deltas.push(tr.chosen);
        }
        if deltas.is_empty() {
            deltas.push(base.delta);
        }
        let grids = Grids {
            delta: deltas,
            phi: if tc.phi.is_empty() { vec![base.phi] } else { tc.phi.clone() },
            acceptance_window: tc.acceptance_window,
        };
        let GridSearch { chosen, candidates } =
            tuning::staged_grid_search(&cal.spec, base, target.as_ref(), &grids, &probe_spec)?;
        Ok(TuneReport {
            kernel: kind,
            chosen,
            candidates,
            acceptance_trace,
            probe: probe_spec,
            calibration: cal.info,
        })
    })??;

    io::write_json(&dir.join(io::TUNING_FILE), &report)?;
    let mut tuned = config.clone();
    tuned.sampler = SamplerSection::from_config(report.kernel, &report.chosen);
    fs::write(dir.join(io::TUNED_CONFIG_FILE), toml::to_string(&tuned)?)?;
    Ok(report)
}
