//! Result rows and their CSV/JSON serialization.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;

use opinf_core::fom::format_float;
use opinf_core::opinf::RecoveryCertificate;
use opinf_core::rom::{write_bundle, PolynomialModel};

use crate::config::{Benchmark, ExperimentConfig};
use crate::error::CliResult;

pub const METRICS_HEADER: &str =
    "benchmark,nbar,n,mu,method,split,avg_rel_error,traj_diff,diverged,residual";
pub const SUMMARY_HEADER: &str =
    "benchmark,nbar,n,method,split,mean_avg_rel_error,mean_traj_diff,parameters,diverged";
pub const CERTIFY_HEADER: &str = "benchmark,mu,K,required,rank,cond,satisfied";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Intrusive,
    OpinfReproj,
    OpinfPlain,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Intrusive, Method::OpinfReproj, Method::OpinfPlain];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Intrusive => "intrusive",
            Method::OpinfReproj => "opinf-reproj",
            Method::OpinfPlain => "opinf-plain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One (nbar, n, parameter, method, split) evaluation. Errors are relative
/// errors of the concatenated trajectories of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub nbar: usize,
    pub n: usize,
    pub mu: Option<f64>,
    pub method: Method,
    pub split: Split,
    pub avg_rel_error: Option<f64>,
    /// Relative difference to the intrusive reduced trajectories.
    pub traj_diff: Option<f64>,
    /// Number of diverged trajectories.
    pub diverged: usize,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRow {
    pub nbar: usize,
    pub mu: Option<f64>,
    pub certificate: RecoveryCertificate,
}

/// Extra CSV output, written verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: String,
    pub rows: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub benchmark: Benchmark,
    pub metrics: Vec<MetricRow>,
    pub certificates: Vec<CertificateRow>,
    pub tables: Vec<Table>,
    /// Learned models to write as bundles, keyed by relative directory.
    pub models: Vec<(String, PolynomialModel)>,
    /// Per-parameter failures that did not abort the run.
    pub failures: Vec<String>,
}

impl Report {
    pub fn new(benchmark: Benchmark) -> Self {
        Self {
            benchmark,
            metrics: Vec::new(),
            certificates: Vec::new(),
            tables: Vec::new(),
            models: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn unsatisfied_certificates(&self) -> usize {
        self.certificates
            .iter()
            .filter(|c| !c.certificate.satisfied)
            .count()
    }
}

pub fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn metrics_csv(benchmark: Benchmark, rows: &[MetricRow]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            benchmark.as_str(),
            r.nbar,
            r.n,
            opt_float(r.mu),
            r.method.as_str(),
            r.split.as_str(),
            opt_float(r.avg_rel_error),
            opt_float(r.traj_diff),
            r.diverged,
            opt_float(r.residual),
        );
    }
    out
}

/// Means over parameters of each (nbar, n, method, split) group. Parameters
/// without a finite error are excluded from the means and counted.
pub fn summary_csv(benchmark: Benchmark, rows: &[MetricRow]) -> String {
    #[derive(Default)]
    struct Group {
        err: Vec<f64>,
        diff: Vec<f64>,
        parameters: usize,
        diverged: usize,
    }
    let mut groups: BTreeMap<(usize, usize, Split, Method), Group> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((r.nbar, r.n, r.split, r.method)).or_default();
        g.parameters += 1;
        g.diverged += r.diverged;
        g.err.extend(r.avg_rel_error);
        g.diff.extend(r.traj_diff);
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let mut out = format!("{SUMMARY_HEADER}\n");
    for ((nbar, n, split, method), g) in &groups {
        let _ = writeln!(
            out,
            "{},{nbar},{n},{},{},{},{},{},{}",
            benchmark.as_str(),
            method.as_str(),
            split.as_str(),
            opt_float(mean(&g.err)),
            opt_float(mean(&g.diff)),
            g.parameters,
            g.diverged,
        );
    }
    out
}

pub fn certify_csv(benchmark: Benchmark, rows: &[CertificateRow]) -> String {
    let mut out = format!("{CERTIFY_HEADER}\n");
    for r in rows {
        let c = &r.certificate;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            benchmark.as_str(),
            opt_float(r.mu),
            c.k,
            c.required,
            c.rank,
            format_float(c.condition_number),
            c.satisfied,
        );
    }
    out
}

/// Writes every output of `report` under `dir`.
pub fn write_report(
    dir: &Path,
    config: &ExperimentConfig,
    report: &Report,
    wall_clock_seconds: f64,
) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let b = report.benchmark;
    fs::write(dir.join("metrics.csv"), metrics_csv(b, &report.metrics))?;
    fs::write(dir.join("summary.csv"), summary_csv(b, &report.metrics))?;
    fs::write(
        dir.join("certify.csv"),
        certify_csv(b, &report.certificates),
    )?;
    for table in &report.tables {
        let mut text = format!("{}\n", table.header);
        for row in &table.rows {
            text.push_str(row);
            text.push('\n');
        }
        fs::write(dir.join(&table.file_name), text)?;
    }
    for (rel, model) in &report.models {
        write_bundle(&dir.join(rel), model, Some(config.seed))?;
    }
    write_run_json(dir, config, report, wall_clock_seconds)
}

pub fn write_run_json(
    dir: &Path,
    config: &ExperimentConfig,
    report: &Report,
    wall_clock_seconds: f64,
) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let run = json!({
        "benchmark": report.benchmark.as_str(),
        "seed": config.seed,
        "wall_clock_seconds": wall_clock_seconds,
        "unsatisfied_certificates": report.unsatisfied_certificates(),
        "failures": report.failures,
        "config": config,
    });
    let text = serde_json::to_string_pretty(&run).expect("json value serializes");
    fs::write(dir.join("run.json"), text + "\n")?;
    Ok(())
}
