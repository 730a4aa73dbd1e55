use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mpmd_cli::algorithms::{self, Algorithm};
use mpmd_cli::bench::{run_bench, write_csv, BenchConfig};
use mpmd_cli::{effective_seed, parse_m_range, GenParams};
use mpmd_core::audit::audit_result;
use mpmd_core::orchestrator::MatchingResult;
use mpmd_core::{generate, GeneratorSpec, Instance};

#[derive(Parser)]
#[command(name = "mpmd", version, about = "Online min-cost perfect matching with delays: simulate, benchmark, audit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Run one algorithm on an instance and write the result JSON.
    Run(RunArgs),
    /// Sweep generated instances and write a CSV report.
    Bench(BenchArgs),
    /// Re-audit a saved result against its instance.
    Audit(AuditArgs),
}

#[derive(Args, Clone)]
struct MetricArgs {
    /// euclidean, line, uniform or two-point.
    #[arg(long, default_value = "euclidean")]
    metric: String,
    /// Euclidean dimension.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Euclidean coordinates are integers in [0, side].
    #[arg(long, default_value_t = 10)]
    side: u32,
    /// Number of labels for the uniform metric.
    #[arg(long, default_value_t = 4)]
    points: usize,
    /// Distance between distinct uniform points.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Cluster centers for the line metric.
    #[arg(long, value_delimiter = ',', default_value = "0,20")]
    centers: Vec<f64>,
    /// Integer spread around each line cluster center.
    #[arg(long, default_value_t = 2)]
    spread: u32,
    /// Gap of the two-point adversary.
    #[arg(long, default_value_t = 5.0)]
    distance: f64,
    /// Arrival times are integers in [0, horizon].
    #[arg(long, default_value_t = 10)]
    horizon: u32,
}

impl MetricArgs {
    fn params(&self) -> GenParams {
        GenParams {
            metric: self.metric.clone(),
            dim: self.dim,
            side: self.side,
            points: self.points,
            scale: self.scale,
            centers: self.centers.clone(),
            spread: self.spread,
            distance: self.distance,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    metric: MetricArgs,
    /// Number of requests (even).
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    algo: Algorithm,
    #[arg(long = "in")]
    input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check every invariant and bound; exit 1 on a violation.
    #[arg(long)]
    audit: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    metric: MetricArgs,
    /// Inclusive range of m, e.g. 8..16; odd values are skipped.
    #[arg(long, default_value = "8..16")]
    m_range: String,
    /// Number of seeds per m.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "online,offline-opt")]
    algos: Vec<Algorithm>,
    /// Defaults to standard output.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    audit: bool,
    /// Record wall time per row (makes output run-dependent).
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    result: PathBuf,
}

enum Outcome {
    Ok,
    AuditFailed,
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<Outcome> {
    let kind = args.metric.params().kind()?;
    let seed = effective_seed(args.seed)?;
    let spec = GeneratorSpec { kind, m: args.m, seed, horizon: args.metric.horizon };
    let inst = generate(&spec)?;
    inst.save(&args.out)?;
    Ok(Outcome::Ok)
}

fn cmd_run(args: RunArgs) -> Result<Outcome> {
    let inst = Instance::load(&args.input)?;
    let result = algorithms::run(args.algo, &inst, args.audit)?;
    write_output(args.out.as_ref(), &result.to_json_string())?;
    match &result.audit {
        Some(report) if !report.passed => {
            for f in &report.failures {
                eprintln!("audit failure: {}: {}", f.check, f.context);
            }
            Ok(Outcome::AuditFailed)
        }
        _ => Ok(Outcome::Ok),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<Outcome> {
    let cfg = BenchConfig {
        ms: parse_m_range(&args.m_range)?,
        base_seed: effective_seed(args.seed)?,
        seeds: args.seeds,
        params: args.metric.params(),
        horizon: args.metric.horizon,
        algos: args.algos,
        audit: args.audit,
        timing: args.timing,
        jobs: args.jobs.max(1),
    };
    let rows = run_bench(&cfg)?;
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf)?;
    write_output(args.csv.as_ref(), &String::from_utf8(buf).context("csv is utf-8")?)?;
    if rows.iter().any(|r| r.audit_passed == Some(false)) {
        return Ok(Outcome::AuditFailed);
    }
    Ok(Outcome::Ok)
}

fn cmd_audit(args: AuditArgs) -> Result<Outcome> {
    let inst = Instance::load(&args.instance)?;
    let bytes = std::fs::read(&args.result).with_context(|| format!("reading {}", args.result.display()))?;
    let result =
        MatchingResult::from_json_slice(&bytes).with_context(|| format!("parsing {}", args.result.display()))?;
    let report = audit_result(&result, &inst);
    for (name, c) in &report.checks {
        println!("{name}: {} evaluations, {} failures", c.evaluations, c.failures);
    }
    for n in &report.notices {
        println!("note: {n}");
    }
    if let Some(r) = report.ratios.competitive {
        println!("competitive ratio: {r}");
    }
    if report.passed {
        println!("audit passed");
        Ok(Outcome::Ok)
    } else {
        for f in &report.failures {
            eprintln!("audit failure: {}: {}", f.check, f.context);
        }
        Ok(Outcome::AuditFailed)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Audit(a) => cmd_audit(a),
    };
    match outcome {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::AuditFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
