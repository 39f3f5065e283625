//! Command-line interface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use safedoe_core::campaign::Method;

use crate::compare::compare;
use crate::config::{load, ConfigError, ConfigFile};
use crate::oracle::{self, OracleOptions};
use crate::output::{self, Manifest};
use crate::suite::{self, Outcome};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_ABORTED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "safedoe", version, about = "Safe model-based design of experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run design campaigns and write traces, plot data and summaries.
    Run(RunArgs),
    /// Compare the summaries of two or more run directories.
    Compare(CompareArgs),
    /// Check the library against brute-force reference computations.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Config file, or the name of a built-in case (case1, case2).
    #[arg(long, env = "SAFEDOE_CONFIG", default_value = "case1")]
    pub config: PathBuf,
    /// gp, mc, de or all; defaults to the config's method list.
    #[arg(long, env = "SAFEDOE_METHOD")]
    pub method: Option<String>,
    /// Single seed.
    #[arg(long, env = "SAFEDOE_SEED", conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Seeds as a count `N` (0..N), a range `a..b` or a list `1,4,7`;
    /// defaults to the config's seed list.
    #[arg(long, env = "SAFEDOE_SEEDS")]
    pub seeds: Option<String>,
    /// Output directory.
    #[arg(long, env = "SAFEDOE_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Override the iteration budget of every campaign.
    #[arg(long, env = "SAFEDOE_MAX_ITERS")]
    pub max_iters: Option<usize>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "SAFEDOE_THREADS")]
    pub threads: Option<usize>,
    /// Print the resolved configuration and jobs, then exit without writing.
    #[arg(long)]
    pub dry_run: bool,
    /// No progress lines on stderr.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Run directories; deltas are reported against the first.
    #[arg(required = true, num_args = 1..)]
    pub dirs: Vec<PathBuf>,
    /// Also write compare.md and compare.csv here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// cantelli, gp2pt, gp-derivatives, mc-propagate, fd-sensitivity or all.
    pub name: String,
    /// Sample count of the Monte-Carlo oracles.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self { code: EXIT_FAILURE, message: format!("{e:#}") }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::usage(format!("invalid config: {e}"))
    }
}

pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    let spec = spec.trim();
    let bad = |_| format!("bad seed list `{spec}` (use N, a..b or a,b,c)");
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        if a >= b {
            return Err(format!("empty seed range `{spec}`"));
        }
        return Ok((a..b).collect());
    }
    if spec.contains(',') {
        return spec.split(',').map(|s| s.trim().parse().map_err(bad)).collect();
    }
    let n: u64 = spec.parse().map_err(bad)?;
    if n == 0 {
        return Err("seed count must be positive".into());
    }
    Ok((0..n).collect())
}

pub fn parse_methods(spec: &str) -> Result<Vec<Method>, String> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    spec.split(',').map(|s| s.trim().parse()).collect()
}

/// Config with the command-line overrides applied.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub file: ConfigFile,
    pub source: String,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
}

pub fn resolve(args: &RunArgs) -> Result<Resolved, Failure> {
    let (mut file, source) = load(&args.config)?;
    let methods = match &args.method {
        Some(m) => parse_methods(m).map_err(|e| Failure::usage(format!("--method: {e}")))?,
        None => file.campaign.methods.clone(),
    };
    let seeds = match (args.seed, &args.seeds) {
        (Some(s), _) => vec![s],
        (None, Some(spec)) => parse_seeds(spec).map_err(|e| Failure::usage(format!("--seeds: {e}")))?,
        (None, None) => file.campaign.seeds.clone(),
    };
    if methods.is_empty() || seeds.is_empty() {
        return Err(Failure::usage("nothing to run: the method or seed list is empty"));
    }
    if let Some(m) = args.max_iters {
        file.campaign.max_iterations = m;
    }
    file.campaign.methods = methods.clone();
    file.campaign.seeds = seeds.clone();
    Ok(Resolved { file, source: source.to_string(), methods, seeds })
}

/// Result of `run`.
#[derive(Debug)]
pub struct RunReport {
    pub outcomes: Vec<Outcome>,
    pub checkpoints: Vec<PathBuf>,
    pub aggregates: Vec<output::MethodAggregate>,
}

/// Runs every job of `r` and writes all output below `out`.
pub fn execute(r: &Resolved, out: &Path, threads: usize, quiet: bool) -> anyhow::Result<RunReport> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.toml"), r.file.to_toml())?;
    let mut manifest = Manifest::new(&r.file, &r.source, &r.methods, &r.seeds, out);
    manifest.write(out)?;

    let jobs = suite::jobs(&r.methods, &r.seeds);
    let max_iterations = r.file.campaign.max_iterations;
    let mut checkpoints = Vec::new();
    let mut write_error = None;
    let total = jobs.len();
    let mut done = 0;
    let outcomes = suite::run_suite(&r.file, &jobs, Some(max_iterations), threads, |o| {
        done += 1;
        match output::write_campaign(out, &r.file, o, max_iterations) {
            Ok(Some(cp)) => checkpoints.push(cp),
            Ok(None) => {}
            Err(e) => {
                write_error.get_or_insert(e);
            }
        }
        if !quiet {
            let s = o.state();
            let status = match (o.error(), s.termination) {
                (Some(e), _) => format!("aborted: {e}"),
                (None, Some(t)) => output::termination_str(t).to_string(),
                (None, None) => "unfinished".to_string(),
            };
            eprintln!(
                "[{done}/{total}] {} seed {}: {} designed, {:.1} s, {status}",
                o.job.method,
                o.job.seed,
                s.designed().len(),
                o.total_seconds
            );
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let nc = r.file.constraints.observables.len();
    output::write_summary(&out.join("summary.csv"), &r.file, &outcomes)?;
    let aggregates = output::aggregate(&outcomes, nc);
    output::write_aggregate(&out.join("aggregate.csv"), &r.file, &aggregates)?;
    manifest.complete = true;
    manifest.collect_artifacts(out)?;
    manifest.write(out)?;
    checkpoints.sort();
    Ok(RunReport { outcomes, checkpoints, aggregates })
}

fn print_aggregates(file: &ConfigFile, aggs: &[output::MethodAggregate]) {
    let names: Vec<&str> = file.constraints.observables.iter().map(|o| o.name.as_str()).collect();
    println!("case {}", file.campaign.name);
    for a in aggs {
        let rates: Vec<String> =
            names.iter().enumerate().map(|(i, n)| format!("{n} {}/{} ({:.1}%)", a.violations[i], a.designed, 100.0 * a.violation_rate(i))).collect();
        println!(
            "{:>3}: {} campaigns, median final chi2 {}, violations {}, {:.0} s",
            a.method,
            a.campaigns,
            a.median_final_chi2.map(|c| format!("{c:.2}")).unwrap_or_else(|| "-".into()),
            rates.join(", "),
            a.seconds
        );
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let r = resolve(args)?;
    let threads = args.threads.unwrap_or_else(suite::default_threads).max(1);
    if args.dry_run {
        println!("# source: {}", r.source);
        println!("# sha256: {}", r.file.sha256());
        println!("# jobs: {} ({} methods x {} seeds), {threads} threads", r.methods.len() * r.seeds.len(), r.methods.len(), r.seeds.len());
        println!("# output: {} (not written)", args.out.display());
        print!("{}", r.file.to_toml());
        return Ok(());
    }
    let report = execute(&r, &args.out, threads, args.quiet)?;
    print_aggregates(&r.file, &report.aggregates);
    println!("output: {}", args.out.display());
    if !report.checkpoints.is_empty() {
        let list: Vec<String> = report.checkpoints.iter().map(|p| p.display().to_string()).collect();
        return Err(Failure {
            code: EXIT_ABORTED,
            message: format!("{} campaign(s) aborted; checkpoints:\n  {}", list.len(), list.join("\n  ")),
        });
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Failure> {
    let c = compare(&args.dirs).map_err(|e| Failure { code: if e.is_usage() { EXIT_USAGE } else { EXIT_FAILURE }, message: e.to_string() })?;
    let md = c.markdown();
    print!("{md}");
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(anyhow::Error::from)?;
        fs::write(dir.join("compare.md"), &md).map_err(anyhow::Error::from)?;
        fs::write(dir.join("compare.csv"), c.csv()?).map_err(anyhow::Error::from)?;
    }
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), Failure> {
    let names: Vec<&str> = if args.name == "all" { oracle::NAMES.to_vec() } else { vec![args.name.as_str()] };
    if let Some(bad) = names.iter().find(|n| !oracle::NAMES.contains(n)) {
        return Err(Failure::usage(format!("unknown oracle `{bad}` (known: {}, all)", oracle::NAMES.join(", "))));
    }
    let opts = OracleOptions { samples: args.samples, seed: args.seed };
    let mut failed = 0;
    let mut stdout = std::io::stdout().lock();
    for name in names {
        let _ = writeln!(stdout, "== {name}");
        for c in oracle::run(name, &opts)? {
            failed += usize::from(!c.passes());
            let _ = writeln!(stdout, "{c}");
        }
    }
    if failed > 0 {
        return Err(Failure { code: EXIT_FAILURE, message: format!("{failed} check(s) failed") });
    }
    Ok(())
}

pub fn main_with(cli: Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
