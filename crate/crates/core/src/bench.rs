//! Replicated simulation experiments: minimum model size for screeners and
//! false positives / negatives for selection pipelines.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cov_block::{default_cap, default_delta, partition_dataset};
use crate::data::{ActiveSet, Dataset};
use crate::error::{Error, Result};
use crate::export::write_json;
use crate::icis::{icis_single, run_icis, IcisParams, Screener};
use crate::regression::{adaptive_lasso, lasso_cv, AdaptiveLassoConfig, LassoCvConfig};
use crate::rng::{derive_seed, substream, TaskKind};
use crate::screening::{holp_stats, semi_partial_all, sis_stats};
use crate::simgen::{generate, ModelKind, ModelSpec, SimTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMethod {
    Cis,
    Sis,
    Holp,
    Icis,
    Lasso,
    AdaptiveLasso,
    /// SIS-driven iteration with the same harness as ICIS, no resampling.
    Isis,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 7] = [
        BenchMethod::Cis,
        BenchMethod::Sis,
        BenchMethod::Holp,
        BenchMethod::Icis,
        BenchMethod::Lasso,
        BenchMethod::AdaptiveLasso,
        BenchMethod::Isis,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BenchMethod::Cis => "cis",
            BenchMethod::Sis => "sis",
            BenchMethod::Holp => "holp",
            BenchMethod::Icis => "icis",
            BenchMethod::Lasso => "lasso",
            BenchMethod::AdaptiveLasso => "adaptive-lasso",
            BenchMethod::Isis => "isis",
        }
    }

    /// Screeners are scored by minimum model size, the rest by FP/FN.
    pub fn is_screener(&self) -> bool {
        matches!(self, BenchMethod::Cis | BenchMethod::Sis | BenchMethod::Holp)
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('_', "-");
        BenchMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = BenchMethod::ALL.iter().map(|m| m.as_str()).collect();
                Error::InvalidArgument(format!(
                    "unknown method '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelSpec,
    pub methods: Vec<BenchMethod>,
    pub reps: usize,
    pub seed: u64,
    /// Threshold constant for the CIS partition.
    pub delta_c: f64,
    pub icis: IcisParams,
    /// Target FDR for the ICIS frequency threshold.
    pub q: f64,
    pub lasso_cv: LassoCvConfig,
    pub adaptive: AdaptiveLassoConfig,
    /// Record per-method wall time in records.csv (breaks byte-identity).
    pub timings: bool,
}

pub const PRESETS: [&str; 6] = [
    "table1-desk",
    "table1-full",
    "table2-desk",
    "table2-full",
    "table3-desk",
    "table3-full",
];

fn base(name: &str, model: ModelSpec, methods: Vec<BenchMethod>, reps: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        model,
        methods,
        reps,
        seed: 0,
        delta_c: 5.0,
        icis: IcisParams::default(),
        q: 0.1,
        lasso_cv: LassoCvConfig::default(),
        adaptive: AdaptiveLassoConfig::default(),
        timings: false,
    }
}

/// Named experiment configurations. Desk presets are sized for a
/// workstation; full presets use the large dimensions (p up to 10000).
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    use BenchMethod::*;
    let screeners = vec![Cis, Sis, Holp];
    let selectors = vec![Icis, Lasso, AdaptiveLasso, Isis];
    let cfg = match name {
        "table1-desk" => base(name, ModelSpec::new(ModelKind::A, 400, 2000), screeners, 100),
        "table1-full" => base(name, ModelSpec::new(ModelKind::A, 1000, 10_000), screeners, 100),
        "table2-desk" => base(name, ModelSpec::new(ModelKind::D, 400, 1000), selectors, 100),
        "table2-full" => base(name, ModelSpec::new(ModelKind::D, 1000, 10_000), selectors, 100),
        "table3-desk" => base(name, ModelSpec::new(ModelKind::E, 0, 1000), selectors, 50),
        "table3-full" => base(name, ModelSpec::new(ModelKind::E, 0, 5000), selectors, 100),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset '{other}' (available: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.icis.validate()?;
        if self.reps < 1 {
            return Err(Error::InvalidArgument("reps must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidArgument(format!("q must lie in (0, 1), got {}", self.q)));
        }
        Ok(())
    }
}

/// `(|selected \ truth|, |truth \ selected|)`.
pub fn metrics_fp_fn(selected: &ActiveSet, truth: &ActiveSet) -> (usize, usize) {
    (selected.difference_count(truth), truth.difference_count(selected))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub replicate: usize,
    pub seed: u64,
    pub model: ModelKind,
    pub method: BenchMethod,
    pub min_model_size: Option<usize>,
    pub fp: Option<usize>,
    #[serde(rename = "fn")]
    pub fn_: Option<usize>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replicate: usize,
    pub method: Option<BenchMethod>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: BenchMethod,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub n_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
    pub failures: Vec<Failure>,
}

impl ExperimentReport {
    pub fn aggregate(&self, method: BenchMethod, metric: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.metric == metric)
    }
}

enum Outcome {
    ModelSize(usize),
    Selection(ActiveSet),
}

fn run_method(
    method: BenchMethod,
    d: &Dataset,
    truth: &SimTruth,
    cfg: &ExperimentConfig,
    rep_seed: u64,
) -> Result<Outcome> {
    let size = |s: crate::screening::ScreenStats| -> Result<Outcome> {
        Ok(Outcome::ModelSize(s.min_model_size(&truth.support)?))
    };
    match method {
        BenchMethod::Cis => {
            let delta = default_delta(d.n(), d.p(), cfg.delta_c)?;
            let part = partition_dataset(d, delta, default_cap(d.n()))?;
            size(semi_partial_all(d, &part)?)
        }
        BenchMethod::Sis => size(sis_stats(d)?),
        BenchMethod::Holp => size(holp_stats(d)?),
        BenchMethod::Icis => {
            let params = IcisParams {
                seed: rep_seed,
                ..cfg.icis.clone()
            };
            Ok(Outcome::Selection(run_icis(d, &params, cfg.q)?.selection.selected))
        }
        BenchMethod::Lasso => {
            let mut rng = substream(rep_seed, TaskKind::CrossValidation, 0);
            let fit = lasso_cv(d.x(), d.y(), &cfg.lasso_cv, &mut rng)?;
            Ok(Outcome::Selection(fit.fit.support()))
        }
        BenchMethod::AdaptiveLasso => {
            Ok(Outcome::Selection(adaptive_lasso(d.x(), d.y(), &cfg.adaptive)?.selected))
        }
        BenchMethod::Isis => {
            let params = IcisParams {
                screener: Screener::Sis,
                ..cfg.icis.clone()
            };
            Ok(Outcome::Selection(icis_single(d, &params, None)?.selected))
        }
    }
}

fn run_replicate(cfg: &ExperimentConfig, r: usize) -> (Vec<Record>, Vec<Failure>) {
    let rep_seed = derive_seed(cfg.seed, TaskKind::Replicate, r as u64);
    let spec = ModelSpec {
        seed: rep_seed,
        ..cfg.model.clone()
    };
    let (d, truth) = match generate(&spec) {
        Ok(v) => v,
        Err(e) => {
            return (
                Vec::new(),
                vec![Failure {
                    replicate: r,
                    method: None,
                    message: format!("data generation: {e}"),
                }],
            )
        }
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &method in &cfg.methods {
        let start = Instant::now();
        let outcome = run_method(method, &d, &truth, cfg, rep_seed);
        let wall_ms = cfg.timings.then(|| start.elapsed().as_secs_f64() * 1e3);
        let mut rec = Record {
            replicate: r,
            seed: rep_seed,
            model: spec.model,
            method,
            min_model_size: None,
            fp: None,
            fn_: None,
            wall_ms,
        };
        match outcome {
            Ok(Outcome::ModelSize(k)) => {
                rec.min_model_size = Some(k);
                records.push(rec);
            }
            Ok(Outcome::Selection(sel)) => {
                let (fp, fneg) = metrics_fp_fn(&sel, &truth.support);
                rec.fp = Some(fp);
                rec.fn_ = Some(fneg);
                records.push(rec);
            }
            Err(e) => failures.push(Failure {
                replicate: r,
                method: Some(method),
                message: e.to_string(),
            }),
        }
    }
    (records, failures)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Mean and sample standard deviation (n - 1) per method and metric, in
/// the order methods are listed.
pub fn aggregate(methods: &[BenchMethod], records: &[Record]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &m in methods {
        let recs: Vec<&Record> = records.iter().filter(|r| r.method == m).collect();
        if recs.is_empty() {
            continue;
        }
        let metrics: Vec<(&str, Vec<f64>)> = if m.is_screener() {
            vec![(
                "min_model_size",
                recs.iter().filter_map(|r| r.min_model_size.map(|v| v as f64)).collect(),
            )]
        } else {
            vec![
                ("fp", recs.iter().filter_map(|r| r.fp.map(|v| v as f64)).collect()),
                ("fn", recs.iter().filter_map(|r| r.fn_.map(|v| v as f64)).collect()),
                (
                    "fp_plus_fn",
                    recs.iter()
                        .filter_map(|r| Some((r.fp? + r.fn_?) as f64))
                        .collect(),
                ),
            ]
        };
        for (metric, values) in metrics {
            let (mean, sd) = mean_sd(&values);
            out.push(Aggregate {
                method: m,
                metric: metric.to_string(),
                mean,
                sd,
                n_reps: values.len(),
            });
        }
    }
    out
}

/// Runs every replicate (in parallel) and aggregates. Replicate `r` uses
/// data seed `derive_seed(seed, Replicate, r)`, shared by all methods.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let per_rep: Vec<(Vec<Record>, Vec<Failure>)> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| run_replicate(cfg, r))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in per_rep {
        records.extend(r);
        failures.extend(f);
    }
    let aggregates = aggregate(&cfg.methods, &records);
    Ok(ExperimentReport {
        config: cfg.clone(),
        records,
        aggregates,
        failures,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    failures: &'a [Failure],
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
    /// Command line that produced the run, when called from a front end.
    #[serde(skip_serializing_if = "Option::is_none")]
    invocation: Option<&'a serde_json::Value>,
}

/// Writes `records.csv`, `aggregates.csv` and `manifest.json` into
/// `out_dir` (created if missing). Pass `elapsed_ms` only when timings are
/// wanted, since it makes the manifest differ between reruns.
pub fn emit_report(
    report: &ExperimentReport,
    out_dir: impl AsRef<Path>,
    elapsed_ms: Option<f64>,
    invocation: Option<&serde_json::Value>,
) -> Result<()> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("records.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    let header = ["replicate", "seed", "model", "method", "min_model_size", "fp", "fn", "wall_ms"];
    w.write_record(header).map_err(|e| Error::csv(&path, e))?;
    for r in &report.records {
        w.write_record([
            r.replicate.to_string(),
            r.seed.to_string(),
            r.model.to_string(),
            r.method.to_string(),
            opt(r.min_model_size),
            opt(r.fp),
            opt(r.fn_),
            opt(r.wall_ms),
        ])
        .map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("aggregates.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    w.write_record(["method", "metric", "mean", "sd", "n_reps"])
        .map_err(|e| Error::csv(&path, e))?;
    for a in &report.aggregates {
        w.write_record([
            a.method.to_string(),
            a.metric.clone(),
            a.mean.to_string(),
            a.sd.to_string(),
            a.n_reps.to_string(),
        ])
        .map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let manifest = Manifest {
        tool: "covscreen",
        version: env!("CARGO_PKG_VERSION"),
        seed: report.config.seed,
        config: &report.config,
        failures: &report.failures,
        elapsed_ms,
        invocation,
    };
    write_json(&manifest, dir.join("manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn tiny(methods: Vec<BenchMethod>) -> ExperimentConfig {
        let mut cfg = preset("table1-desk").unwrap();
        cfg.model = ModelSpec {
            rho: 0.5,
            ..ModelSpec::new(ModelKind::B, 100, 200)
        };
        cfg.methods = methods;
        cfg.reps = 3;
        cfg.seed = 11;
        cfg.icis.b = 4;
        cfg.icis.n_perm = 2;
        cfg.icis.b_null = Some(2);
        cfg
    }

    #[test]
    fn fp_fn_examples() {
        let t = ActiveSet::new(0..10, 20).unwrap();
        assert_eq!(metrics_fp_fn(&t, &t), (0, 0));
        assert_eq!(metrics_fp_fn(&ActiveSet::empty(), &t), (0, 10));
        let s = ActiveSet::new([1, 2, 3], 5).unwrap();
        let t = ActiveSet::new([3, 4], 5).unwrap();
        assert_eq!(metrics_fp_fn(&s, &t), (2, 1));
    }

    #[test]
    fn presets_and_methods_parse() {
        for name in PRESETS {
            preset(name).unwrap().validate().unwrap();
        }
        let err = preset("table9").unwrap_err().to_string();
        assert!(err.contains("table1-desk") && err.contains("table3-full"));
        assert_eq!("adaptive_lasso".parse::<BenchMethod>().unwrap(), BenchMethod::AdaptiveLasso);
        assert!("tilting".parse::<BenchMethod>().is_err());
    }

    #[test]
    fn experiment_records_and_aggregates() {
        let cfg = tiny(vec![BenchMethod::Cis, BenchMethod::Sis, BenchMethod::Isis]);
        let report = run_experiment(&cfg).unwrap();
        assert!(report.failures.is_empty());
        assert_eq!(report.records.len(), 9);
        let sizes: Vec<f64> = report
            .records
            .iter()
            .filter(|r| r.method == BenchMethod::Cis)
            .map(|r| r.min_model_size.unwrap() as f64)
            .collect();
        let a = report.aggregate(BenchMethod::Cis, "min_model_size").unwrap();
        let (mean, sd) = mean_sd(&sizes);
        assert!((a.mean - mean).abs() < 1e-10 && (a.sd - sd).abs() < 1e-10);
        assert!(report.aggregate(BenchMethod::Isis, "fp_plus_fn").is_some());
        // paired data: all methods of a replicate share its seed
        for r in 0..3 {
            let seeds: Vec<u64> = report
                .records
                .iter()
                .filter(|x| x.replicate == r)
                .map(|x| x.seed)
                .collect();
            assert!(seeds.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = tiny(vec![BenchMethod::Cis, BenchMethod::Icis, BenchMethod::Lasso]);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        emit_report(&run_experiment(&cfg).unwrap(), a.path(), None, None).unwrap();
        emit_report(&run_experiment(&cfg).unwrap(), b.path(), None, None).unwrap();
        for f in ["records.csv", "aggregates.csv", "manifest.json"] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["seed"], 11);
    }

    #[test]
    fn empty_report_writes_headers() {
        let cfg = tiny(vec![BenchMethod::Cis]);
        let report = ExperimentReport {
            config: cfg,
            records: vec![],
            aggregates: vec![],
            failures: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report, dir.path(), None, None).unwrap();
        assert_eq!(
            fs::read_to_string(dir.path().join("records.csv")).unwrap(),
            "replicate,seed,model,method,min_model_size,fp,fn,wall_ms\n"
        );
        assert_eq!(
            fs::read_to_string(dir.path().join("aggregates.csv")).unwrap(),
            "method,metric,mean,sd,n_reps\n"
        );
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        // a tiny threshold links everything; with n = 2 the minimum cap of 2
        // gives blocks as large as n, which the CIS solver rejects
        let mut cfg = tiny(vec![BenchMethod::Cis, BenchMethod::Sis]);
        cfg.model.n = 2;
        cfg.delta_c = 1e-9;
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.records.len() + report.failures.len(), 6);
        assert!(report.records.iter().all(|r| r.method == BenchMethod::Sis));
        assert!(report.failures.iter().all(|f| f.method == Some(BenchMethod::Cis)));
    }
}
