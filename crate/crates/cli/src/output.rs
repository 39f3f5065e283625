//! Files written by `safedoe run`.
//!
//! ```text
//! <out>/
//!   config.toml          resolved configuration
//!   manifest.json        config checksum, jobs and artifact checksums
//!   summary.csv          one row per campaign
//!   aggregate.csv        one row per method
//!   <method>/seed-<n>/
//!     trace.ndjson       header, one line per iteration, end line
//!     timing.csv         wall-clock seconds per iteration
//!     checkpoint.json    full state, only when the campaign aborted
//!     plotdata/{constraints,parameters,trust_region,design}.csv
//! ```
//!
//! Traces contain no timing, so equal (config, seed) pairs give equal bytes.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use safedoe_core::campaign::{CampaignState, IterationRecord, Method, TerminationReason};
use safedoe_core::kinetics::Measurement;
use safedoe_core::safe_opt::TrustRegionParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, ConfigFile};
use crate::suite::Outcome;

pub const TRACE_FORMAT: u32 = 1;
pub const TRACE_FILE: &str = "trace.ndjson";
pub const TIMING_FILE: &str = "timing.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: u32,
    pub case: String,
    pub method: Method,
    pub seed: u64,
    pub config_sha256: String,
    pub max_iterations: usize,
    pub theta_names: Vec<String>,
    pub design_names: Vec<String>,
    pub constraint_names: Vec<String>,
    pub epsilon: f64,
    pub trust_region: TrustRegionParams,
    pub preliminary: Vec<Measurement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEnd {
    pub termination: Option<TerminationReason>,
    pub error: Option<String>,
    pub iterations: usize,
    pub designed: usize,
    /// Designed experiments violating each constraint.
    pub violations: Vec<usize>,
    pub final_theta: Vec<f64>,
    pub final_chi_squared: Option<f64>,
    pub chi_squared_ref: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceLine {
    Header(TraceHeader),
    Iteration(IterationRecord),
    End(TraceEnd),
}

/// A parsed trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<IterationRecord>,
    /// Missing when the run was interrupted.
    pub end: Option<TraceEnd>,
}

impl Trace {
    pub fn violation_rate(&self, i: usize) -> Option<f64> {
        let end = self.end.as_ref()?;
        (end.designed > 0).then(|| end.violations[i] as f64 / end.designed as f64)
    }
}

/// Directory of one campaign below `out`.
pub fn campaign_dir(out: &Path, method: Method, seed: u64) -> PathBuf {
    out.join(method.as_str()).join(format!("seed-{seed}"))
}

pub fn header(file: &ConfigFile, state: &CampaignState, max_iterations: usize) -> TraceHeader {
    TraceHeader {
        format: TRACE_FORMAT,
        case: file.campaign.name.clone(),
        method: state.method,
        seed: state.seed,
        config_sha256: file.campaign_sha256(),
        max_iterations,
        theta_names: file.model.theta_names.clone(),
        design_names: file.plant.design_space.names.clone(),
        constraint_names: file.constraints.observables.iter().map(|o| o.name.clone()).collect(),
        epsilon: file.constraints.epsilon,
        trust_region: file.algorithm.trust_region.clone(),
        preliminary: state.data[..state.n_preliminary].to_vec(),
    }
}

pub fn end_line(out: &Outcome, n_constraints: usize) -> TraceEnd {
    let state = out.state();
    let last = state.final_estimate();
    TraceEnd {
        termination: state.termination,
        error: out.error().map(|e| e.to_string()),
        iterations: state.records.len(),
        designed: state.designed().len(),
        violations: (0..n_constraints).map(|i| state.violations(i)).collect(),
        final_theta: last.map(|e| e.theta.clone()).unwrap_or_else(|| state.theta.clone()),
        final_chi_squared: last.map(|e| e.chi_squared),
        chi_squared_ref: last.and_then(|e| e.report.as_ref()).map(|r| r.chi_squared_ref),
    }
}

fn json_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_trace(path: &Path, header: &TraceHeader, records: &[IterationRecord], end: &TraceEnd) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    json_line(&mut w, &TraceLine::Header(header.clone()))?;
    for r in records {
        json_line(&mut w, &TraceLine::Iteration(r.clone()))?;
    }
    json_line(&mut w, &TraceLine::End(end.clone()))?;
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> anyhow::Result<Trace> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut header = None;
    let mut records = Vec::new();
    let mut end = None;
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: malformed trace line", path.display(), n + 1))?;
        match parsed {
            TraceLine::Header(h) if header.is_none() && n == 0 => header = Some(h),
            TraceLine::Iteration(r) if header.is_some() && end.is_none() => records.push(r),
            TraceLine::End(e) if header.is_some() && end.is_none() => end = Some(e),
            _ => bail!("{}:{}: trace line out of order", path.display(), n + 1),
        }
    }
    let Some(header) = header else { bail!("{}: empty trace", path.display()) };
    if header.format != TRACE_FORMAT {
        bail!("{}: trace format {} (expected {TRACE_FORMAT})", path.display(), header.format);
    }
    Ok(Trace { header, records, end })
}

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_timing(path: &Path, out: &Outcome) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "seconds"])?;
    for (i, s) in out.iteration_seconds.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()])?;
    }
    w.write_record(["total".to_string(), out.total_seconds.to_string()])?;
    w.flush()?;
    Ok(())
}

/// Total campaign seconds from a timing file.
pub fn read_total_seconds(path: &Path) -> anyhow::Result<f64> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    for rec in r.records() {
        let rec = rec?;
        if rec.get(0) == Some("total") {
            return Ok(rec.get(1).unwrap_or("").parse()?);
        }
    }
    bail!("{}: no total row", path.display())
}

/// Plot-ready CSV files of one campaign.
pub fn write_plotdata(dir: &Path, header: &TraceHeader, state: &CampaignState) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let nc = header.constraint_names.len();

    let mut w = csv_writer(&dir.join("constraints.csv"))?;
    w.write_record([
        "experiment", "iteration", "constraint", "measured", "predicted_mean", "band_low", "band_high", "tightened",
        "violated",
    ])?;
    for m in &state.data[..state.n_preliminary] {
        for (i, name) in header.constraint_names.iter().enumerate() {
            let g = m.g[i];
            w.write_record([m.index.to_string(), String::new(), name.clone(), g.to_string(), String::new(), String::new(), String::new(), String::new(), (g > 0.0).to_string()])?;
        }
    }
    for r in &state.records {
        let Some(d) = &r.design else { continue };
        for (i, name) in header.constraint_names.iter().enumerate().take(nc) {
            let mean = d.predicted_mean.get(i).copied();
            let sd = d.predicted_variance.get(i).map(|v| v.max(0.0).sqrt());
            let band = |s: f64| mean.zip(sd).map(|(m, sd)| m + s * 3.0 * sd);
            w.write_record([
                d.measurement.index.to_string(),
                r.iteration.to_string(),
                name.clone(),
                d.measurement.g[i].to_string(),
                opt(mean),
                opt(band(-1.0)),
                opt(band(1.0)),
                opt(d.tightened.get(i).copied()),
                d.violated[i].to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("parameters.csv"))?;
    w.write_record(["iteration", "parameter", "estimate", "ci_low", "ci_high", "t_value", "t_pass"])?;
    for r in &state.records {
        let e = &r.estimate;
        let half = e.report.as_ref().map(|rep| rep.confidence_half_widths(0.05));
        for (j, name) in header.theta_names.iter().enumerate() {
            let h = half.as_ref().map(|h| h[j]);
            w.write_record([
                r.iteration.to_string(),
                name.clone(),
                e.theta[j].to_string(),
                opt(h.map(|h| e.theta[j] - h)),
                opt(h.map(|h| e.theta[j] + h)),
                opt(e.report.as_ref().map(|rep| rep.t_values[j])),
                e.report.as_ref().map(|rep| rep.t_pass[j].to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("trust_region.csv"))?;
    w.write_record(["iteration", "constraint", "radius_before", "rho", "violated", "radius_after", "backtracked"])?;
    for r in &state.records {
        let Some(d) = &r.design else { continue };
        if d.radii_before.is_empty() {
            continue;
        }
        for (i, name) in header.constraint_names.iter().enumerate() {
            w.write_record([
                r.iteration.to_string(),
                name.clone(),
                d.radii_before[i].to_string(),
                d.rho[i].to_string(),
                d.violated[i].to_string(),
                d.radii_after[i].to_string(),
                d.backtracked.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("design.csv"))?;
    let mut cols = vec!["experiment".to_string(), "iteration".to_string()];
    cols.extend(header.design_names.iter().cloned());
    cols.extend(["step".to_string(), "solve_feasible".to_string()]);
    w.write_record(&cols)?;
    for m in &state.data[..state.n_preliminary] {
        let mut row = vec![m.index.to_string(), String::new()];
        row.extend(m.u.iter().map(|v| v.to_string()));
        row.extend([String::new(), String::new()]);
        w.write_record(&row)?;
    }
    for r in &state.records {
        let Some(d) = &r.design else { continue };
        let mut row = vec![d.measurement.index.to_string(), r.iteration.to_string()];
        row.extend(d.measurement.u.iter().map(|v| v.to_string()));
        row.extend([d.step.to_string(), d.solve_feasible.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Checkpoint<'a> {
    error: String,
    state: &'a CampaignState,
}

/// Writes every file of one finished campaign. Returns the checkpoint path
/// when the campaign aborted.
pub fn write_campaign(
    out_dir: &Path,
    file: &ConfigFile,
    outcome: &Outcome,
    max_iterations: usize,
) -> anyhow::Result<Option<PathBuf>> {
    let state = outcome.state();
    let dir = campaign_dir(out_dir, outcome.job.method, outcome.job.seed);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let h = header(file, state, max_iterations);
    let end = end_line(outcome, h.constraint_names.len());
    write_trace(&dir.join(TRACE_FILE), &h, &state.records, &end)?;
    write_timing(&dir.join(TIMING_FILE), outcome)?;
    write_plotdata(&dir.join("plotdata"), &h, state)?;
    let checkpoint = dir.join(CHECKPOINT_FILE);
    match outcome.error() {
        Some(e) => {
            let text = serde_json::to_string_pretty(&Checkpoint { error: e.to_string(), state })?;
            fs::write(&checkpoint, text)?;
            Ok(Some(checkpoint))
        }
        None => {
            if checkpoint.exists() {
                fs::remove_file(&checkpoint)?;
            }
            Ok(None)
        }
    }
}

/// Per-campaign rows of `summary.csv`.
pub fn write_summary(path: &Path, file: &ConfigFile, outcomes: &[Outcome]) -> anyhow::Result<()> {
    let names: Vec<&str> = file.constraints.observables.iter().map(|o| o.name.as_str()).collect();
    let mut w = csv_writer(path)?;
    let mut cols = vec!["case", "method", "seed", "iterations", "designed"];
    let viol: Vec<String> = names.iter().map(|n| format!("violations_{n}")).collect();
    let rate: Vec<String> = names.iter().map(|n| format!("violation_rate_{n}")).collect();
    cols.extend(viol.iter().map(String::as_str));
    cols.extend(rate.iter().map(String::as_str));
    cols.extend(["final_chi2", "chi2_ref", "termination", "error", "seconds"]);
    w.write_record(&cols)?;
    for o in outcomes {
        let s = o.state();
        let last = s.final_estimate();
        let mut row = vec![
            file.campaign.name.clone(),
            o.job.method.to_string(),
            o.job.seed.to_string(),
            s.records.len().to_string(),
            s.designed().len().to_string(),
        ];
        row.extend((0..names.len()).map(|i| s.violations(i).to_string()));
        row.extend((0..names.len()).map(|i| s.violation_rate(i).to_string()));
        row.push(opt(last.map(|e| e.chi_squared)));
        row.push(opt(last.and_then(|e| e.report.as_ref()).map(|r| r.chi_squared_ref)));
        row.push(s.termination.map(termination_str).unwrap_or_default().to_string());
        row.push(o.error().map(|e| e.to_string()).unwrap_or_default());
        row.push(o.total_seconds.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn termination_str(t: TerminationReason) -> &'static str {
    match t {
        TerminationReason::Statistics => "statistics",
        TerminationReason::DesignConverged => "design-converged",
        TerminationReason::MaxIterations => "max-iterations",
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

/// Per-method statistics over a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodAggregate {
    pub method: Method,
    pub campaigns: usize,
    pub aborted: usize,
    pub designed: usize,
    /// Violations of each constraint over all designed experiments.
    pub violations: Vec<usize>,
    pub median_final_chi2: Option<f64>,
    pub median_designed: Option<f64>,
    pub seconds: f64,
}

impl MethodAggregate {
    pub fn violation_rate(&self, i: usize) -> f64 {
        if self.designed == 0 {
            0.0
        } else {
            self.violations[i] as f64 / self.designed as f64
        }
    }
}

pub fn aggregate(outcomes: &[Outcome], n_constraints: usize) -> Vec<MethodAggregate> {
    let mut methods: Vec<Method> = Vec::new();
    for o in outcomes {
        if !methods.contains(&o.job.method) {
            methods.push(o.job.method);
        }
    }
    methods
        .into_iter()
        .map(|method| {
            let mine: Vec<&Outcome> = outcomes.iter().filter(|o| o.job.method == method).collect();
            let mut chi: Vec<f64> = mine.iter().filter_map(|o| o.state().final_estimate().map(|e| e.chi_squared)).collect();
            let mut designed: Vec<f64> = mine.iter().map(|o| o.state().designed().len() as f64).collect();
            MethodAggregate {
                method,
                campaigns: mine.len(),
                aborted: mine.iter().filter(|o| o.error().is_some()).count(),
                designed: mine.iter().map(|o| o.state().designed().len()).sum(),
                violations: (0..n_constraints).map(|i| mine.iter().map(|o| o.state().violations(i)).sum()).collect(),
                median_final_chi2: median(&mut chi),
                median_designed: median(&mut designed),
                seconds: mine.iter().map(|o| o.total_seconds).sum(),
            }
        })
        .collect()
}

pub fn write_aggregate(path: &Path, file: &ConfigFile, aggs: &[MethodAggregate]) -> anyhow::Result<()> {
    let names: Vec<&str> = file.constraints.observables.iter().map(|o| o.name.as_str()).collect();
    let mut w = csv_writer(path)?;
    let mut cols: Vec<String> = ["case", "method", "campaigns", "aborted", "designed"].map(String::from).to_vec();
    cols.extend(names.iter().map(|n| format!("violations_{n}")));
    cols.extend(names.iter().map(|n| format!("violation_rate_{n}")));
    cols.extend(["median_final_chi2", "median_designed", "seconds"].map(String::from));
    w.write_record(&cols)?;
    for a in aggs {
        let mut row = vec![
            file.campaign.name.clone(),
            a.method.to_string(),
            a.campaigns.to_string(),
            a.aborted.to_string(),
            a.designed.to_string(),
        ];
        row.extend(a.violations.iter().map(|v| v.to_string()));
        row.extend((0..names.len()).map(|i| a.violation_rate(i).to_string()));
        row.extend([opt(a.median_final_chi2), opt(a.median_designed), a.seconds.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_source: String,
    pub config_sha256: String,
    pub case: String,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub max_iterations: usize,
    pub out_dir: String,
    pub complete: bool,
    /// Relative path to sha256 of every file written.
    pub artifacts: std::collections::BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(file: &ConfigFile, source: &str, methods: &[Method], seeds: &[u64], out_dir: &Path) -> Self {
        Self {
            tool: "safedoe".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_source: source.into(),
            config_sha256: file.sha256(),
            case: file.campaign.name.clone(),
            methods: methods.to_vec(),
            seeds: seeds.to_vec(),
            max_iterations: file.campaign.max_iterations,
            out_dir: out_dir.display().to_string(),
            complete: false,
            artifacts: Default::default(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> anyhow::Result<()> {
        fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Records the checksum of every file below `out_dir` except the manifest.
    pub fn collect_artifacts(&mut self, out_dir: &Path) -> anyhow::Result<()> {
        self.artifacts.clear();
        let mut stack = vec![out_dir.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir)? {
                let path = entry?.path();
                if path.is_dir() {
                    stack.push(path);
                } else if path.file_name().is_some_and(|n| n != "manifest.json") {
                    let rel = path.strip_prefix(out_dir)?.to_string_lossy().replace('\\', "/");
                    self.artifacts.insert(rel, hex(&Sha256::digest(fs::read(&path)?)));
                }
            }
        }
        Ok(())
    }
}
