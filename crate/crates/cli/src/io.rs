//! CSV and JSON artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pdhams::targets::LatticeSpec;
use pdhams::ChainRecord64;
use serde::Serialize;

pub const CHAINS_DIR: &str = "chains";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TV_DETAIL_FILE: &str = "tv_detail.csv";
pub const ACCEPTANCE_FILE: &str = "acceptance.csv";
pub const PRECONDITIONER_FILE: &str = "preconditioner.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TUNING_FILE: &str = "tuning.json";
pub const TUNED_CONFIG_FILE: &str = "tuned.toml";

/// One line of `metrics.csv`; `None` values are written as `undefined`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub detail: String,
    pub n_draws: usize,
    pub value: Option<f64>,
}

impl MetricRow {
    pub fn new(metric: &str, detail: impl Into<String>, n_draws: usize, value: Option<f64>) -> Self {
        MetricRow {
            metric: metric.into(),
            detail: detail.into(),
            n_draws,
            value,
        }
    }
}

/// One line of `tv_detail.csv`: TV of one coordinate tuple, mean and sd over chains.
#[derive(Debug, Clone, PartialEq)]
pub struct TvRow {
    pub coords: Vec<usize>,
    pub n_draws: usize,
    pub mean: f64,
    pub sd: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

fn fmt_coords(coords: &[usize]) -> String {
    coords.iter().map(|c| (c + 1).to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
    w.write_record(["metric", "detail", "n_draws", "value"])?;
    for r in rows {
        w.write_record([&r.metric, &r.detail, &r.n_draws.to_string(), &fmt_opt(r.value)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tv_detail(path: &Path, rows: &[TvRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
    w.write_record(["metric", "coords", "n_draws", "mean", "sd"])?;
    for r in rows {
        w.write_record([
            "tv",
            &fmt_coords(&r.coords),
            &r.n_draws.to_string(),
            &r.mean.to_string(),
            &r.sd.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-chain acceptance over the kept draws plus an `all` row.
pub fn write_acceptance(path: &Path, kernel: &str, kept: &[ChainRecord64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
    w.write_record(["kernel", "chain", "n_draws", "acceptance"])?;
    let mut accepted = 0;
    let mut total = 0;
    for (i, r) in kept.iter().enumerate() {
        accepted += r.accept_count();
        total += r.len();
        w.write_record([kernel, &i.to_string(), &r.len().to_string(), &r.acceptance_rate().to_string()])?;
    }
    let overall = if total == 0 { f64::NAN } else { accepted as f64 / total as f64 };
    w.write_record([kernel, "all", &total.to_string(), &overall.to_string()])?;
    w.flush()?;
    Ok(())
}

pub fn chain_path(dir: &Path, chain: usize) -> PathBuf {
    dir.join(CHAINS_DIR).join(format!("chain_{chain}.csv"))
}

/// Writes every draw of `record`, burn-in included, as `chain,t,s_1..s_d,energy,accepted`.
pub fn write_chain(path: &Path, chain: usize, record: &ChainRecord64) -> Result<()> {
    let file = File::create(path).with_context(|| path.display().to_string())?;
    let mut w = BufWriter::new(file);
    let d = record.dim();
    let mut header = vec!["chain".to_string(), "t".to_string()];
    header.extend((1..=d).map(|i| format!("s_{i}")));
    header.push("energy".into());
    header.push("accepted".into());
    writeln!(w, "{}", header.join(","))?;
    let values = record.lattice_values();
    let energies = record.energies();
    let accepted = record.accepted();
    let mut line = String::new();
    for t in 0..record.len() {
        line.clear();
        line.push_str(&format!("{chain},{}", t + 1));
        for l in record.levels(t) {
            line.push(',');
            line.push_str(&values[l].to_string());
        }
        line.push_str(&format!(",{},{}\n", energies[t], u8::from(accepted[t])));
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a chain CSV back into a record on `lattice`. Rows of chains other than the
/// first one present are ignored.
pub fn read_chain(path: &Path, lattice: &LatticeSpec<f64>, seed: u64, kernel: &str) -> Result<ChainRecord64> {
    let mut reader = csv::Reader::from_path(path).with_context(|| path.display().to_string())?;
    let d = lattice.dim();
    let headers = reader.headers()?.clone();
    if headers.len() != d + 4 {
        bail!("{}: expected {} columns for d = {d}, found {}", path.display(), d + 4, headers.len());
    }
    let mut record = ChainRecord64::new(d, lattice.values().to_vec(), seed, kernel);
    let mut first_chain: Option<String> = None;
    let mut levels = vec![0usize; d];
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let chain = &row[0];
        match &first_chain {
            None => first_chain = Some(chain.to_string()),
            Some(c) if c != chain => continue,
            _ => {}
        }
        for (i, slot) in levels.iter_mut().enumerate() {
            let x: f64 = row[2 + i].parse().with_context(|| format!("{} row {}", path.display(), line + 2))?;
            *slot = lattice
                .index_of(x)
                .with_context(|| format!("{} row {}: {x} is not a lattice level", path.display(), line + 2))?;
        }
        let energy: f64 = row[d + 2].parse()?;
        let accepted = match &row[d + 3] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => bail!("{} row {}: bad accepted flag {other}", path.display(), line + 2),
        };
        record.push_levels(&levels, energy, accepted);
    }
    Ok(record)
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| path.display().to_string())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_csv_round_trip() {
        let lattice = LatticeSpec::symmetric_integers(3, 2).unwrap();
        let mut rec = ChainRecord64::new(3, lattice.values().to_vec(), 0, "pavg");
        rec.push_levels(&[0, 4, 2], -1.25, true);
        rec.push_levels(&[1, 1, 3], 0.1 + 0.2, false);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_chain(&path, 7, &rec).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("chain,t,s_1,s_2,s_3,energy,accepted\n7,1,-2,2,0,-1.25,1\n"));
        let back = read_chain(&path, &lattice, 0, "pavg").unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.levels(1), vec![1, 1, 3]);
        assert_eq!(back.energies(), rec.energies());
        assert_eq!(back.accepted(), rec.accepted());
    }

    #[test]
    fn undefined_values_are_spelled_out() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_metrics(&path, &[MetricRow::new("ess_min", "", 10, None), MetricRow::new("ess_max", "", 10, Some(2.5))])
            .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "metric,detail,n_draws,value\ness_min,,10,undefined\ness_max,,10,2.5\n");
    }
}
