use safedoe_core::campaign::{check_termination, replay_trust_regions, CampaignError};
use safedoe_core::estimation::FitReport;
use safedoe_core::{Campaign, CampaignConfig, CaseStudy, Method, TerminationReason};

fn config(case: &CaseStudy, method: Method, seed: u64, max_iterations: usize) -> CampaignConfig {
    let mut cfg = CampaignConfig::for_case(case, method, seed);
    cfg.max_iterations = max_iterations;
    cfg
}

#[test]
fn zero_iterations_gives_only_the_preliminary_fit() {
    let case = CaseStudy::case1();
    let state = Campaign::new(case.clone(), config(&case, Method::Gp, 0, 0)).unwrap().run().unwrap();
    assert_eq!(state.data.len(), case.initial_experiments.len());
    assert!(state.designed().is_empty());
    assert_eq!(state.records.len(), 1);
    assert!(state.records[0].estimate.report.is_some());
    assert!(state.records[0].design.is_none());
    assert_eq!(state.termination, Some(TerminationReason::MaxIterations));
}

fn report(chi_pass: bool, t_pass: bool) -> FitReport {
    FitReport {
        theta: vec![1.0],
        v_diagonal: vec![0.1],
        dof: 4,
        chi_squared: 1.0,
        chi_squared_ref: 9.49,
        chi_squared_pass: chi_pass,
        t_values: vec![2.0],
        t_ref: 2.13,
        t_pass: vec![t_pass],
    }
}

#[test]
fn termination_rules() {
    assert_eq!(check_termination(Some(&report(true, true)), None, 1e-3), Some(TerminationReason::Statistics));
    assert_eq!(check_termination(Some(&report(true, false)), None, 1e-3), None);
    assert_eq!(check_termination(Some(&report(false, true)), Some(0.5), 1e-3), None);
    assert_eq!(check_termination(Some(&report(false, true)), Some(1e-4), 1e-3), Some(TerminationReason::DesignConverged));
    assert_eq!(check_termination(None, Some(1e-3), 1e-3), Some(TerminationReason::DesignConverged));
    assert_eq!(check_termination(None, None, 1e-3), None);
}

#[test]
fn too_few_preliminary_experiments_is_a_config_error() {
    let mut case = CaseStudy::case1();
    case.initial_experiments.truncate(2);
    let err = Campaign::new(case.clone(), config(&case, Method::Gp, 0, 3)).unwrap_err();
    assert!(matches!(err, CampaignError::Config(_)), "{err}");
}

#[test]
fn short_gp_campaign_is_reproducible_and_replayable() {
    let case = CaseStudy::case1();
    let cfg = config(&case, Method::Gp, 4, 3);
    let a = Campaign::new(case.clone(), cfg.clone()).unwrap().run().unwrap();
    let b = Campaign::new(case.clone(), cfg.clone()).unwrap().run().unwrap();
    assert_eq!(a, b);

    let space = &case.plant.design_space;
    for m in a.designed() {
        assert!(space.contains(&m.u), "{:?}", m.u);
    }
    let nc = case.plant.constraints.len();
    assert_eq!(replay_trust_regions(&cfg.trust_region, nc, &a.records), Ok(()));

    let mut tampered = a.records.clone();
    let it = tampered.iter().position(|r| r.design.is_some()).unwrap();
    tampered[it].design.as_mut().unwrap().radii_after[0] *= 1.000_001;
    assert_eq!(replay_trust_regions(&cfg.trust_region, nc, &tampered), Err(tampered[it].iteration));
}

#[test]
fn baselines_record_no_trust_regions() {
    let case = CaseStudy::case1();
    for method in [Method::Mc, Method::De] {
        let state = Campaign::new(case.clone(), config(&case, method, 2, 1)).unwrap().run().unwrap();
        let d = state.records[0].design.as_ref().unwrap();
        assert!(d.radii_before.is_empty() && d.ball_radius.is_none(), "{method}");
        assert!(case.plant.design_space.contains(&d.measurement.u));
    }
}

#[test]
fn mismatch_free_case_recovers_the_truth() {
    let exact = CaseStudy::case2().mismatch_free();
    let state = Campaign::new(exact.clone(), config(&exact, Method::Gp, 0, 10)).unwrap().run().unwrap();
    let est = state.final_estimate().unwrap();
    for (a, b) in est.theta.iter().zip(&exact.plant.theta) {
        assert!(((a - b) / b).abs() < 1e-4, "{a} vs {b}");
    }
    assert_eq!(state.termination, Some(TerminationReason::Statistics));
}
