//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails. The campaign suites dominate the runtime.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use proptest::test_runner::{Config as PtConfig, TestRunner};
use safedoe::app::{execute, resolve, RunArgs, RunReport};
use safedoe::config::ConfigFile;
use safedoe::oracle::{self, Check, OracleOptions};
use safedoe::output::{campaign_dir, read_trace, MethodAggregate, TRACE_FILE};
use safedoe::suite::default_threads;
use safedoe_core::campaign::replay_trust_regions;
use safedoe_core::estimation::distributions::chi_squared_quantile;
use safedoe_core::estimation::{laplace_posterior, mle_fit, statistics, Dataset, MleConfig};
use safedoe_core::rng::{stream_rng, Stream};
use safedoe_core::safe_opt::{cantelli_r, TrustRegion, TrustRegionParams};
use safedoe_core::{Campaign, CaseStudy, Method, TerminationReason};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn checks_pass(checks: &[Check]) -> (bool, String) {
    let worst = checks.iter().filter(|c| !c.passes()).map(|c| c.to_string()).next();
    (worst.is_none(), worst.unwrap_or_else(|| format!("{} checks", checks.len())))
}

fn gp_criterion() -> Verdict {
    let t0 = Instant::now();
    let (a, da) = checks_pass(&oracle::gp_two_point().unwrap());
    let (b, db) = checks_pass(&oracle::gp_derivatives(50, 11).unwrap());
    let secs = t0.elapsed().as_secs_f64();
    Verdict::new(a && b && secs < 10.0, format!("closed form: {da}; derivatives: {db}; {secs:.2} s"))
}

fn cantelli_criterion() -> Verdict {
    let r = cantelli_r(0.01).unwrap();
    let mut runner = TestRunner::new(PtConfig { cases: 1000, ..PtConfig::default() });
    let mono = runner.run(&(1e-6f64..0.999_999, 1e-6f64..0.999_999), |(a, b)| {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if lo < hi && cantelli_r(lo).unwrap() <= cantelli_r(hi).unwrap() {
            return Err(proptest::test_runner::TestCaseError::fail(format!("r({lo}) <= r({hi})")));
        }
        Ok(())
    });
    Verdict::new((r - 9.9499).abs() <= 1e-3 && mono.is_ok(), format!("r(0.01) = {r:.5}; monotone over 1000 draws: {}", mono.is_ok()))
}

fn propagation_criterion() -> Verdict {
    let t0 = Instant::now();
    let checks = oracle::mc_propagate(&OracleOptions { samples: 100_000, seed: 0 }).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let (ok, _) = checks_pass(&checks);
    let detail = checks.iter().map(|c| format!("{} err {:.2e}", c.label, c.error())).collect::<Vec<_>>().join("; ");
    Verdict::new(ok && secs < 30.0, format!("{detail}; {secs:.2} s"))
}

fn trust_region_criterion(suites: &[(&str, &Path)]) -> Verdict {
    let p = TrustRegionParams::default();
    let tr = TrustRegion::new(&p);
    let rules = tr.update(&p, 1e-4).radius == 2.0 * p.initial_radius && tr.update(&p, 0.05).radius == 0.5 * p.initial_radius;
    let mut traces = 0;
    let mut mismatched = Vec::new();
    for (case, out) in suites {
        for seed in 0..20 {
            let path = campaign_dir(out, Method::Gp, seed).join(TRACE_FILE);
            let t = match read_trace(&path) {
                Ok(t) => t,
                Err(e) => {
                    mismatched.push(format!("{case} seed {seed}: {e}"));
                    continue;
                }
            };
            traces += 1;
            if let Err(it) = replay_trust_regions(&t.header.trust_region, t.header.constraint_names.len(), &t.records) {
                mismatched.push(format!("{case} seed {seed} iteration {it}"));
            }
        }
    }
    Verdict::new(
        rules && mismatched.is_empty() && traces == 20 * suites.len(),
        format!("threshold rules: {rules}; {traces} traces replayed; mismatches: {mismatched:?}"),
    )
}

fn chi_squared_criterion() -> Verdict {
    let q = chi_squared_quantile(0.95, 56.0);
    let case = CaseStudy::case2().mismatch_free();
    let mut designs = case.initial_experiments.clone();
    designs.extend([vec![70.0, 0.5, 2.5, 0.5], vec![110.0, 2.8, 0.6, 1.0], vec![90.0, 1.2, 1.2, 0.4]]);
    let data: Vec<_> = designs.iter().enumerate().map(|(i, u)| case.plant.run_experiment(u, 0, i).unwrap()).collect();
    let ds = Dataset { model: &case.model, data: &data, std: &case.measurement_std };
    let cfg = MleConfig { lower: case.theta_lower.clone(), upper: case.theta_upper.clone(), n_starts: 3, max_iterations: 200 };
    let fit = mle_fit(&ds, &case.theta_initial, &cfg, &mut stream_rng(0, Stream::OptimizerStarts, 0)).unwrap();
    let post = laplace_posterior(&ds, &fit.theta).unwrap();
    let rep = statistics(&fit.theta, &post.covariance, fit.chi_squared, ds.n_observations(), 0.05).unwrap();
    let zero = fit.chi_squared < 1e-12 && rep.chi_squared_pass;
    Verdict::new(
        (q - 74.47).abs() <= 0.05 && zero,
        format!("quantile(0.95, 56) = {q:.3}; zero-residual chi2 = {:.1e}, passes: {}", fit.chi_squared, rep.chi_squared_pass),
    )
}

fn run_suite(case: &str, out: &Path) -> (RunReport, f64) {
    let args = RunArgs {
        config: PathBuf::from(case),
        method: Some("all".into()),
        seed: None,
        seeds: Some("20".into()),
        out: out.to_path_buf(),
        max_iters: None,
        threads: None,
        dry_run: false,
        quiet: false,
    };
    let r = resolve(&args).map_err(|f| f.message).unwrap();
    let t0 = Instant::now();
    let report = execute(&r, out, default_threads(), false).unwrap();
    (report, t0.elapsed().as_secs_f64())
}

fn agg(report: &RunReport, m: Method) -> &MethodAggregate {
    report.aggregates.iter().find(|a| a.method == m).unwrap()
}

fn violation_criterion(report: &RunReport, secs: f64, target_minutes: f64) -> Verdict {
    let [gp, mc, de] = [Method::Gp, Method::Mc, Method::De].map(|m| agg(report, m));
    let rate = |a: &MethodAggregate| a.violation_rate(0);
    let aborted: usize = report.aggregates.iter().map(|a| a.aborted).sum();
    let pass = aborted == 0 && rate(gp) <= 0.10 && rate(gp) < rate(mc) && rate(gp) < rate(de);
    let within = if secs <= target_minutes * 60.0 { "within" } else { "over" };
    Verdict::new(
        pass,
        format!(
            "g1 violation rate gp {:.3} ({}/{}), mc {:.3}, de {:.3}; aborted {aborted}; {:.0} s on {} thread(s), {within} the {target_minutes} min target",
            rate(gp),
            gp.violations[0],
            gp.designed,
            rate(mc),
            rate(de),
            secs,
            default_threads()
        ),
    )
}

fn chi_squared_quality_criterion(case1: &RunReport, case2: &RunReport) -> Verdict {
    let med = |r: &RunReport, m| agg(r, m).median_final_chi2.unwrap_or(f64::INFINITY);
    let (g1, m1, d1) = (med(case1, Method::Gp), med(case1, Method::Mc), med(case1, Method::De));
    let (g2, m2, d2) = (med(case2, Method::Gp), med(case2, Method::Mc), med(case2, Method::De));
    let pass = g1 <= 1.5 * m1.min(d1) && g2 <= m2 && g2 <= d2;
    Verdict::new(
        pass,
        format!("median final chi2 case1 gp {g1:.1} mc {m1:.1} de {d1:.1}; case2 gp {g2:.1} mc {m2:.1} de {d2:.1}"),
    )
}

fn mismatch_free_criterion() -> Verdict {
    let file = ConfigFile::builtin("case2").unwrap();
    let case = file.case_study().mismatch_free();
    let mut cfg = file.campaign_config(Method::Gp, 0);
    cfg.max_iterations = 10;
    let state = Campaign::new(case.clone(), cfg).unwrap().run().unwrap();
    let theta = &state.final_estimate().unwrap().theta;
    let worst = theta.iter().zip(&case.plant.theta).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
    let stats = state.termination == Some(TerminationReason::Statistics);
    Verdict::new(
        worst <= 1e-4 && stats && state.designed().len() <= 10,
        format!(
            "case2 exact model: worst relative error {worst:.1e}, {} designed, termination {:?}",
            state.designed().len(),
            state.termination
        ),
    )
}

fn reproducibility_criterion(root: &Path, suites: &[(&str, &Path)]) -> Verdict {
    let mut same = Vec::new();
    for (case, suite_out) in suites {
        for (method, seed) in [(Method::Gp, 3), (Method::De, 7)] {
            let out = root.join(format!("single-{case}-{method}-{seed}"));
            let args = RunArgs {
                config: PathBuf::from(case),
                method: Some(method.to_string()),
                seed: Some(seed),
                seeds: None,
                out: out.clone(),
                max_iters: None,
                threads: Some(1),
                dry_run: false,
                quiet: true,
            };
            execute(&resolve(&args).map_err(|f| f.message).unwrap(), &out, 1, true).unwrap();
            let a = fs::read(campaign_dir(suite_out, method, seed).join(TRACE_FILE)).unwrap();
            let b = fs::read(campaign_dir(&out, method, seed).join(TRACE_FILE)).unwrap();
            same.push((format!("{case} {method} seed {seed}"), a == b));
        }
    }
    let pass = same.iter().all(|(_, s)| *s);
    let detail = same.iter().map(|(k, s)| format!("{k}: {}", if *s { "identical" } else { "differs" })).collect::<Vec<_>>().join("; ");
    Verdict::new(pass, detail)
}

#[test]
fn acceptance() {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    if root.exists() {
        fs::remove_dir_all(&root).unwrap();
    }
    let (out1, out2) = (root.join("case1"), root.join("case2"));
    let (case1, secs1) = run_suite("case1", &out1);
    let (case2, secs2) = run_suite("case2", &out2);
    let suites = [("case1", out1.as_path()), ("case2", out2.as_path())];

    let verdicts = [
        gp_criterion(),
        cantelli_criterion(),
        propagation_criterion(),
        trust_region_criterion(&suites),
        chi_squared_criterion(),
        violation_criterion(&case1, secs1, 15.0),
        violation_criterion(&case2, secs2, 30.0),
        chi_squared_quality_criterion(&case1, &case2),
        mismatch_free_criterion(),
        reproducibility_criterion(&root, &suites),
    ];
    // written past the test harness capture so the lines show up in a normal run
    let mut stdout = std::io::stdout().lock();
    for (i, v) in verdicts.iter().enumerate() {
        writeln!(stdout, "criterion {:>2}: {}  {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail).unwrap();
    }
    drop(stdout);
    let failed: Vec<usize> = verdicts.iter().enumerate().filter(|(_, v)| !v.pass).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
