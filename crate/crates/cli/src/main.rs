mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use covscreen::bench::{self, BenchMethod};
use covscreen::cov_block::{default_cap, default_delta, partition_dataset};
use covscreen::data::{load_csv, write_csv};
use covscreen::export::{
    write_fdr, write_frequencies, write_json, write_partition, write_selection, write_stats,
    write_truth,
};
use covscreen::icis::{run_icis, IcisParams, Screener};
use covscreen::screening::{default_screen_size, holp_stats, semi_partial_all, sis_stats};
use covscreen::simgen::{generate, ModelKind, ModelSpec};
use covscreen::SelectionRule;

#[derive(Parser, Debug)]
#[command(name = "covscreen", version, about = "Covariance-insured screening for high-dimensional regression")]
#[command(args_override_self = true)]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_parser = positive)]
    threads: Option<usize>,
    /// TOML file (or a previous manifest.json) whose keys mirror flag names.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Draw a dataset from one of the simulation models.
    Simulate(SimulateArgs),
    /// Rank predictors by a marginal or block-wise screening statistic.
    Screen(ScreenArgs),
    /// Resampled iterative screening with a permutation-calibrated threshold.
    Icis(IcisArgs),
    /// Replicated experiments over a preset configuration.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Number of AR(1) blocks of 100 columns (models A, B, D).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long)]
    beta_mag: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    pi: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Header of the response column in data.csv.
    #[arg(long, default_value = "y")]
    response: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScreenMethod {
    Cis,
    Sis,
    Holp,
}

#[derive(Args, Debug)]
struct InputArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    response: String,
    /// Multiplier c in the correlation threshold c * sqrt(ln p / n).
    #[arg(long, default_value_t = 5.0, value_parser = positive_f64)]
    delta_c: f64,
    /// Explicit correlation threshold (overrides --delta-c).
    #[arg(long, value_parser = positive_f64)]
    delta: Option<f64>,
    /// Maximum block size (default max(2, n/2)).
    #[arg(long, value_parser = positive)]
    cap: Option<usize>,
}

#[derive(Args, Debug)]
struct ScreenArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = ScreenMethod::Cis)]
    method: ScreenMethod,
    /// Keep the k highest-ranked predictors (default ceil(n / ln n)).
    #[arg(long, value_parser = positive, conflicts_with = "threshold")]
    top_k: Option<usize>,
    /// Keep predictors whose |statistic| is at least this value.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct IcisArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Bootstrap resamples.
    #[arg(long = "B", default_value_t = 50, value_parser = positive)]
    b: usize,
    /// Target false discovery rate.
    #[arg(long, default_value_t = 0.1, value_parser = open_unit)]
    q: f64,
    #[arg(long, default_value_t = 5, value_parser = positive)]
    max_iter: usize,
    /// Predictors kept per screening step (default ceil(n / ln n)).
    #[arg(long, value_parser = positive)]
    screen_k: Option<usize>,
    #[arg(long, value_enum, default_value_t = ScreenerArg::Cis)]
    screener: ScreenerArg,
    /// Reuse the partition of the full data in every resample.
    #[arg(long)]
    freeze_partition: bool,
    /// Permutations of the response for the null frequencies.
    #[arg(long, default_value_t = 20, value_parser = positive)]
    n_perm: usize,
    /// Resamples per permutation (default max(10, B/5)).
    #[arg(long, value_parser = positive)]
    b_null: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScreenerArg {
    Cis,
    Sis,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated subset of cis,sis,holp,icis,lasso,adaptive-lasso,isis.
    #[arg(long, value_delimiter = ',', value_parser = parse_bench_method)]
    methods: Vec<BenchMethod>,
    #[arg(long, value_parser = positive)]
    reps: Option<usize>,
    /// Override the number of ICIS resamples.
    #[arg(long = "B", value_parser = positive)]
    b: Option<usize>,
    #[arg(long, value_parser = positive)]
    n_perm: Option<usize>,
    #[arg(long, value_parser = open_unit)]
    q: Option<f64>,
    /// Record wall-clock times (outputs then differ between runs).
    #[arg(long)]
    timings: bool,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be a positive number, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        Ok(v) => Err(format!("must lie strictly between 0 and 1, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: covscreen::Error| e.to_string())
}

fn parse_bench_method(s: &str) -> Result<BenchMethod, String> {
    s.parse().map_err(|e: covscreen::Error| e.to_string())
}

fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, msg).exit()
}

fn required_keys(model: ModelKind) -> &'static [&'static str] {
    match model {
        ModelKind::A | ModelKind::B => &["n", "p", "m", "rho"],
        ModelKind::C => &["n", "p", "rho"],
        ModelKind::D => &["n", "p", "m"],
        ModelKind::E => &["p"],
    }
}

fn model_spec(a: &SimulateArgs, seed: u64) -> ModelSpec {
    let present = |k: &str| match k {
        "n" => a.n.is_some(),
        "p" => a.p.is_some(),
        "m" => a.m.is_some(),
        "rho" => a.rho.is_some(),
        _ => true,
    };
    let required = required_keys(a.model);
    let missing: Vec<String> = required
        .iter()
        .filter(|k| !present(k))
        .map(|k| format!("--{k}"))
        .collect();
    if !missing.is_empty() {
        let all: Vec<String> = required.iter().map(|k| format!("--{k}")).collect();
        usage_error(format!(
            "model {} requires {} (missing {})",
            a.model,
            all.join(", "),
            missing.join(", ")
        ));
    }
    let mut spec = ModelSpec::new(a.model, a.n.unwrap_or(0), a.p.unwrap_or(0));
    if let Some(m) = a.m {
        spec.m = m;
    }
    if let Some(v) = a.rho {
        spec.rho = v;
    }
    if let Some(v) = a.beta_mag {
        spec.beta_mag = v;
    }
    if let Some(v) = a.sigma {
        spec.sigma = v;
    }
    if let Some(v) = a.kappa {
        spec.kappa = v;
    }
    if let Some(v) = a.pi {
        spec.pi = v;
    }
    if let Some(v) = a.theta {
        spec.theta = v;
    }
    spec.seed = seed;
    if let Err(e) = spec.validate() {
        usage_error(e);
    }
    spec
}

struct Ctx {
    seed: u64,
    out_dir: PathBuf,
    invocation: Value,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn manifest(&self, extra: Value) -> Result<()> {
        let mut m = json!({
            "tool": "covscreen",
            "version": env!("CARGO_PKG_VERSION"),
            "invocation": self.invocation,
        });
        if let (Value::Object(m), Value::Object(extra)) = (&mut m, extra) {
            m.extend(extra);
        }
        write_json(&m, self.path("manifest.json"))?;
        Ok(())
    }
}

fn load_input(a: &InputArgs) -> Result<covscreen::Dataset> {
    let Some(input) = &a.input else {
        usage_error("--input is required");
    };
    let d = load_csv(input, &a.response)?;
    Ok(d.standardize()?)
}

fn cmd_simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<bool> {
    let spec = model_spec(a, ctx.seed);
    let (d, truth) = generate(&spec)?;
    write_csv(&d, ctx.path("data.csv"), &a.response)?;
    write_truth(&truth, ctx.path("truth.csv"))?;
    ctx.manifest(json!({
        "model": spec,
        "n": d.n(),
        "p": d.p(),
        "support_1based": truth.support.iter().map(|j| j + 1).collect::<Vec<_>>(),
    }))?;
    eprintln!("wrote {} x {} dataset to {}", d.n(), d.p(), ctx.out_dir.display());
    Ok(true)
}

fn cmd_screen(ctx: &Ctx, a: &ScreenArgs) -> Result<bool> {
    let d = load_input(&a.input)?;
    let stats = match a.method {
        ScreenMethod::Cis => {
            let delta = match a.input.delta {
                Some(v) => v,
                None => default_delta(d.n(), d.p(), a.input.delta_c)?,
            };
            let cap = a.input.cap.unwrap_or_else(|| default_cap(d.n()));
            let part = partition_dataset(&d, delta, cap)?;
            write_partition(&part, d.p(), ctx.path("partition.csv"))?;
            semi_partial_all(&d, &part)?
        }
        ScreenMethod::Sis => sis_stats(&d)?,
        ScreenMethod::Holp => holp_stats(&d)?,
    };
    for w in &stats.warnings {
        eprintln!("warning: {w}");
    }
    let rule = match (a.threshold, a.top_k) {
        (Some(t), _) => SelectionRule::Threshold(t),
        (None, Some(k)) => SelectionRule::TopK(k),
        (None, None) => SelectionRule::TopK(default_screen_size(d.n()).min(d.p())),
    };
    let sel = stats.select(rule)?;
    write_stats(&stats, d.names(), ctx.path("stats.csv"))?;
    write_selection(&sel, d.names(), ctx.path("selection.csv"))?;
    ctx.manifest(json!({
        "n": d.n(),
        "p": d.p(),
        "rule": sel.rule,
        "num_selected": sel.selected.len(),
        "warnings": stats.warnings,
    }))?;
    eprintln!("selected {} of {} predictors", sel.selected.len(), d.p());
    Ok(true)
}

fn cmd_icis(ctx: &Ctx, a: &IcisArgs) -> Result<bool> {
    let d = load_input(&a.input)?;
    let params = IcisParams {
        b: a.b,
        max_iter: a.max_iter,
        screen_k: a.screen_k,
        delta_c: a.input.delta_c,
        delta: a.input.delta,
        cap: a.input.cap,
        seed: ctx.seed,
        screener: match a.screener {
            ScreenerArg::Cis => Screener::Cis,
            ScreenerArg::Sis => Screener::Sis,
        },
        freeze_partition: a.freeze_partition,
        n_perm: a.n_perm,
        b_null: a.b_null,
        ..IcisParams::default()
    };
    let out = run_icis(&d, &params, a.q)?;
    write_frequencies(&out.frequencies, d.names(), ctx.path("frequencies.csv"))?;
    write_fdr(&out.fdr, ctx.path("fdr.csv"))?;
    write_selection(&out.selection, d.names(), ctx.path("selection.csv"))?;
    ctx.manifest(json!({
        "n": d.n(),
        "p": d.p(),
        "chosen_psi": out.fdr.chosen_psi,
        "q": a.q,
        "num_selected": out.selection.selected.len(),
    }))?;
    eprintln!(
        "selected {} predictors at frequency threshold {}",
        out.selection.selected.len(),
        out.fdr.chosen_psi
    );
    Ok(true)
}

fn cmd_bench(ctx: &Ctx, a: &BenchArgs) -> Result<bool> {
    let Some(name) = &a.preset else {
        usage_error(format!("--preset is required (available: {})", bench::PRESETS.join(", ")));
    };
    let mut cfg = bench::preset(name).unwrap_or_else(|e| usage_error(e));
    cfg.seed = ctx.seed;
    if !a.methods.is_empty() {
        cfg.methods = a.methods.clone();
    }
    if let Some(r) = a.reps {
        cfg.reps = r;
    }
    if let Some(b) = a.b {
        cfg.icis.b = b;
    }
    if let Some(k) = a.n_perm {
        cfg.icis.n_perm = k;
    }
    if let Some(q) = a.q {
        cfg.q = q;
    }
    cfg.timings = a.timings;
    let start = Instant::now();
    let report = bench::run_experiment(&cfg)?;
    let elapsed = a.timings.then(|| start.elapsed().as_secs_f64() * 1e3);
    bench::emit_report(&report, &ctx.out_dir, elapsed, Some(&ctx.invocation))?;
    for agg in &report.aggregates {
        println!(
            "{:<15} {:<15} mean {:>9.3}  sd {:>9.3}  ({} reps)",
            agg.method.as_str(),
            agg.metric,
            agg.mean,
            agg.sd,
            agg.n_reps
        );
    }
    for f in &report.failures {
        let method = f.method.map(|m| m.to_string()).unwrap_or_else(|| "data".into());
        eprintln!("replicate {} ({method}) failed: {}", f.replicate, f.message);
    }
    Ok(report.failures.is_empty())
}

fn run(argv: Vec<OsString>) -> Result<bool> {
    let mut root = Cli::command();
    root.build();
    let argv = match config::merge(argv, &root) {
        Ok(a) => a,
        Err(e) => usage_error(format!("{e:#}")),
    };
    let matches = root.clone().get_matches_from(argv);
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let (sub, sub_matches) = matches.subcommand().expect("subcommand is required");

    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("cannot configure thread pool")?;
    }
    std::fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("cannot create {}", cli.out_dir.display()))?;
    let ctx = Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
        invocation: json!({
            "command": sub,
            "args": config::resolved(sub_matches, &root, sub),
        }),
    };
    match &cli.command {
        Cmd::Simulate(a) => cmd_simulate(&ctx, a),
        Cmd::Screen(a) => cmd_screen(&ctx, a),
        Cmd::Icis(a) => cmd_icis(&ctx, a),
        Cmd::Bench(a) => cmd_bench(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
