use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};
use pdhams::samplers::KernelKind;
use pdhams_cli::error::{EXIT_ENUMERATION, EXIT_OK};
use pdhams_cli::experiment;
use pdhams_cli::{exit_code, ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "pdhams", version, about = "Run, calibrate and tune discrete Hamiltonian-assisted samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate W and write the preconditioner at the configured δ.
    Calibrate(Overrides),
    /// Grid-search the sampler parameters and write tuning.json and tuned.toml.
    Tune(Overrides),
    /// Calibrate, run all chains and write chains, metrics and manifest.
    Run(Overrides),
    /// Recompute metrics.csv and tv_detail.csv from stored chains.
    Metrics(Overrides),
}

/// The config file plus flags overriding its fields.
#[derive(Args)]
struct Overrides {
    /// Experiment config (TOML).
    config: PathBuf,
    #[arg(long, value_parser = parse_kernel)]
    kernel: Option<KernelKind>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_kernel(s: &str) -> Result<KernelKind, String> {
    [
        KernelKind::Gibbs,
        KernelKind::Pavg,
        KernelKind::Vpdhams,
        KernelKind::Opdhams,
        KernelKind::Metropolis,
    ]
    .into_iter()
    .find(|k| k.name() == s)
    .ok_or_else(|| format!("unknown kernel {s}"))
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut c = ExperimentConfig::load(&self.config)?;
        let s = &mut c.sampler;
        if let Some(k) = self.kernel {
            s.kernel = k;
        }
        s.epsilon = self.epsilon.or(s.epsilon);
        s.delta = self.delta.or(s.delta);
        s.phi = self.phi.or(s.phi);
        s.beta = self.beta.or(s.beta);
        s.r = self.r.or(s.r);
        let run = &mut c.run;
        run.chains = self.chains.unwrap_or(run.chains);
        run.length = self.length.unwrap_or(run.length);
        run.burn_in = self.burn_in.unwrap_or(run.burn_in);
        run.seed = self.seed.unwrap_or(run.seed);
        run.threads = self.threads.unwrap_or(run.threads);
        if let Some(o) = &self.output {
            run.output = o.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn execute(command: Command) -> anyhow::Result<i32> {
    let warnings = match command {
        Command::Calibrate(o) => {
            let info = experiment::calibrate_only(&o.load()?)?;
            info!("calibration source {}, min eigenvalue of W {:?}", info.source, info.w_min_eigenvalue);
            Vec::new()
        }
        Command::Tune(o) => {
            let report = experiment::tune(&o.load()?)?;
            info!("chose {:?} from {} candidates", report.chosen, report.candidates.len());
            Vec::new()
        }
        Command::Run(o) => {
            let outcome = experiment::run(&o.load()?)?;
            info!("acceptance rate {:.4}", outcome.acceptance);
            outcome.warnings
        }
        Command::Metrics(o) => experiment::metrics_from_chains(&o.load()?)?,
    };
    for w in &warnings {
        warn!("{}", w.0);
    }
    Ok(if warnings.is_empty() { EXIT_OK } else { EXIT_ENUMERATION })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            error!("{e:#}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
