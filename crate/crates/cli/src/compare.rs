//! Side-by-side statistics of several run directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use safedoe_core::campaign::Method;
use thiserror::Error;

use crate::output::{median, read_total_seconds, read_trace, Trace, TIMING_FILE, TRACE_FILE};

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("compare needs at least two run directories, got {0}")]
    TooFewSets(usize),
    #[error("{0}: no trace files found")]
    Empty(PathBuf),
    #[error("{set}: {what} is {found}, but the first set has {expected}")]
    Incompatible { set: PathBuf, what: &'static str, expected: String, found: String },
    #[error(transparent)]
    Read(#[from] anyhow::Error),
}

impl CompareError {
    /// Input problems as opposed to IO failures.
    pub fn is_usage(&self) -> bool {
        !matches!(self, CompareError::Read(_))
    }
}

/// Statistics of one method in one run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodStats {
    pub campaigns: usize,
    pub designed: usize,
    pub violations: Vec<usize>,
    pub median_final_chi2: Option<f64>,
    pub median_experiments: Option<f64>,
    pub median_seconds: Option<f64>,
}

impl MethodStats {
    pub fn violation_rate(&self, i: usize) -> Option<f64> {
        (self.designed > 0).then(|| self.violations[i] as f64 / self.designed as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    pub dir: PathBuf,
    pub case: String,
    pub constraint_names: Vec<String>,
    pub methods: BTreeMap<Method, MethodStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub sets: Vec<RunSet>,
}

fn find_traces(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_traces(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == TRACE_FILE) {
            out.push(p);
        }
    }
    Ok(())
}

pub fn load_set(dir: &Path) -> Result<RunSet, CompareError> {
    let mut paths = Vec::new();
    find_traces(dir, &mut paths).map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))?;
    let mut traces: Vec<(Trace, Option<f64>)> = Vec::new();
    for p in &paths {
        let trace = read_trace(p)?;
        let timing = p.with_file_name(TIMING_FILE);
        let secs = if timing.exists() { Some(read_total_seconds(&timing)?) } else { None };
        traces.push((trace, secs));
    }
    let Some((first, _)) = traces.first() else { return Err(CompareError::Empty(dir.to_path_buf())) };
    let case = first.header.case.clone();
    let constraint_names = first.header.constraint_names.clone();
    for (t, _) in &traces {
        if t.header.case != case {
            return Err(CompareError::Incompatible {
                set: dir.to_path_buf(),
                what: "case",
                expected: case,
                found: t.header.case.clone(),
            });
        }
    }
    let mut methods = BTreeMap::new();
    for m in Method::ALL {
        let mine: Vec<&(Trace, Option<f64>)> = traces.iter().filter(|(t, _)| t.header.method == m).collect();
        if mine.is_empty() {
            continue;
        }
        let ends: Vec<_> = mine.iter().filter_map(|(t, _)| t.end.as_ref()).collect();
        let mut chi: Vec<f64> = ends.iter().filter_map(|e| e.final_chi_squared).collect();
        let mut exps: Vec<f64> = ends.iter().map(|e| e.designed as f64).collect();
        let mut secs: Vec<f64> = mine.iter().filter_map(|(_, s)| *s).collect();
        methods.insert(
            m,
            MethodStats {
                campaigns: mine.len(),
                designed: ends.iter().map(|e| e.designed).sum(),
                violations: (0..constraint_names.len()).map(|i| ends.iter().map(|e| e.violations[i]).sum()).collect(),
                median_final_chi2: median(&mut chi),
                median_experiments: median(&mut exps),
                median_seconds: median(&mut secs),
            },
        );
    }
    Ok(RunSet { dir: dir.to_path_buf(), case, constraint_names, methods })
}

pub fn compare(dirs: &[PathBuf]) -> Result<Comparison, CompareError> {
    if dirs.len() < 2 {
        return Err(CompareError::TooFewSets(dirs.len()));
    }
    let sets = dirs.iter().map(|d| load_set(d)).collect::<Result<Vec<_>, _>>()?;
    let base = &sets[0];
    for s in &sets[1..] {
        if s.case != base.case {
            return Err(CompareError::Incompatible {
                set: s.dir.clone(),
                what: "case",
                expected: base.case.clone(),
                found: s.case.clone(),
            });
        }
        if s.constraint_names != base.constraint_names {
            return Err(CompareError::Incompatible {
                set: s.dir.clone(),
                what: "constraint set",
                expected: base.constraint_names.join(","),
                found: s.constraint_names.join(","),
            });
        }
    }
    Ok(Comparison { sets })
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn delta(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

/// One output row: a (set, method) pair with deltas against the first set.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub set: String,
    pub method: Method,
    pub campaigns: usize,
    pub designed: usize,
    pub violations: Vec<usize>,
    pub violation_rates: Vec<Option<f64>>,
    pub median_final_chi2: Option<f64>,
    pub median_experiments: Option<f64>,
    pub median_seconds: Option<f64>,
    pub delta_chi2: Option<f64>,
    pub delta_rates: Vec<Option<f64>>,
    pub delta_experiments: Option<f64>,
    pub delta_seconds: Option<f64>,
}

impl Comparison {
    pub fn rows(&self) -> Vec<Row> {
        let base = &self.sets[0];
        let nc = base.constraint_names.len();
        let mut rows = Vec::new();
        for s in &self.sets {
            for (m, st) in &s.methods {
                let b = base.methods.get(m);
                let rates: Vec<Option<f64>> = (0..nc).map(|i| st.violation_rate(i)).collect();
                rows.push(Row {
                    set: s.dir.display().to_string(),
                    method: *m,
                    campaigns: st.campaigns,
                    designed: st.designed,
                    violations: st.violations.clone(),
                    delta_rates: (0..nc).map(|i| delta(rates[i], b.and_then(|b| b.violation_rate(i)))).collect(),
                    violation_rates: rates,
                    median_final_chi2: st.median_final_chi2,
                    median_experiments: st.median_experiments,
                    median_seconds: st.median_seconds,
                    delta_chi2: delta(st.median_final_chi2, b.and_then(|b| b.median_final_chi2)),
                    delta_experiments: delta(st.median_experiments, b.and_then(|b| b.median_experiments)),
                    delta_seconds: delta(st.median_seconds, b.and_then(|b| b.median_seconds)),
                });
            }
        }
        rows
    }

    fn columns(&self) -> Vec<String> {
        let names = &self.sets[0].constraint_names;
        let mut cols: Vec<String> = ["set", "method", "campaigns", "designed"].map(String::from).to_vec();
        cols.extend(names.iter().map(|n| format!("violations_{n}")));
        cols.extend(names.iter().map(|n| format!("violation_rate_{n}")));
        cols.extend(["median_final_chi2", "median_experiments", "median_seconds", "delta_chi2"].map(String::from));
        cols.extend(names.iter().map(|n| format!("delta_rate_{n}")));
        cols.extend(["delta_experiments", "delta_seconds"].map(String::from));
        cols
    }

    fn cells(row: &Row) -> Vec<String> {
        let mut c = vec![row.set.clone(), row.method.to_string(), row.campaigns.to_string(), row.designed.to_string()];
        c.extend(row.violations.iter().map(|v| v.to_string()));
        c.extend(row.violation_rates.iter().map(|v| num(*v)));
        c.extend([num(row.median_final_chi2), num(row.median_experiments), num(row.median_seconds), num(row.delta_chi2)]);
        c.extend(row.delta_rates.iter().map(|v| num(*v)));
        c.extend([num(row.delta_experiments), num(row.delta_seconds)]);
        c
    }

    pub fn markdown(&self) -> String {
        let cols = self.columns();
        let mut s = String::new();
        let _ = writeln!(s, "Case `{}`; deltas are against `{}`.\n", self.sets[0].case, self.sets[0].dir.display());
        let _ = writeln!(s, "| {} |", cols.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(cols.len()));
        for r in self.rows() {
            let _ = writeln!(s, "| {} |", Self::cells(&r).join(" | "));
        }
        s
    }

    pub fn csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns())?;
        for r in self.rows() {
            w.write_record(Self::cells(&r))?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}
