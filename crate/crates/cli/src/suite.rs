//! Running campaigns and suites of campaigns.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use safedoe_core::campaign::{Campaign, CampaignAbort, CampaignError, CampaignState, Method};

use crate::config::ConfigFile;

/// One (method, seed) pair of a suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Job {
    pub method: Method,
    pub seed: u64,
}

/// Finished campaign with its wall-clock profile.
#[derive(Debug)]
pub struct Outcome {
    pub job: Job,
    pub result: Result<CampaignState, CampaignAbort>,
    /// Seconds spent in each iteration, in order.
    pub iteration_seconds: Vec<f64>,
    /// Seconds from construction (preliminary experiments included) to the end.
    pub total_seconds: f64,
}

impl Outcome {
    pub fn state(&self) -> &CampaignState {
        match &self.result {
            Ok(s) => s,
            Err(a) => &a.state,
        }
    }

    pub fn error(&self) -> Option<&CampaignError> {
        self.result.as_ref().err().map(|a| &a.error)
    }
}

/// Jobs in method-major order.
pub fn jobs(methods: &[Method], seeds: &[u64]) -> Vec<Job> {
    methods.iter().flat_map(|&method| seeds.iter().map(move |&seed| Job { method, seed })).collect()
}

/// Runs one campaign. `max_iterations` overrides the config.
pub fn run_one(file: &ConfigFile, job: Job, max_iterations: Option<usize>) -> Outcome {
    let t0 = Instant::now();
    let case = file.case_study();
    let mut cfg = file.campaign_config(job.method, job.seed);
    if let Some(m) = max_iterations {
        cfg.max_iterations = m;
    }
    let mut iteration_seconds = Vec::new();
    let result = match Campaign::new(case, cfg) {
        Ok(c) => {
            let mut last = Instant::now();
            c.run_with(|_| {
                iteration_seconds.push(last.elapsed().as_secs_f64());
                last = Instant::now();
            })
        }
        Err(error) => {
            // nothing ran; report an empty state
            let state = CampaignState {
                case: file.campaign.name.clone(),
                method: job.method,
                seed: job.seed,
                data: Vec::new(),
                n_preliminary: 0,
                records: Vec::new(),
                theta: file.model.theta_initial.clone(),
                covariance: Vec::new(),
                radii: Vec::new(),
                center: Vec::new(),
                termination: None,
            };
            Err(CampaignAbort { error, state: Box::new(state) })
        }
    };
    Outcome { job, result, iteration_seconds, total_seconds: t0.elapsed().as_secs_f64() }
}

/// Runs `jobs` on up to `threads` worker threads. `on_done` sees every outcome
/// as it finishes (in completion order, on the calling thread); the returned
/// vector is in job order.
pub fn run_suite<F: FnMut(&Outcome)>(
    file: &ConfigFile,
    jobs: &[Job],
    max_iterations: Option<usize>,
    threads: usize,
    mut on_done: F,
) -> Vec<Outcome> {
    let threads = threads.clamp(1, jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Outcome)>();
    let mut slots: Vec<Option<Outcome>> = (0..jobs.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        for _ in 0..threads {
            let tx = tx.clone();
            let next = &next;
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let out = run_one(file, jobs[i], max_iterations);
                if tx.send((i, out)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, out) in rx {
            on_done(&out);
            slots[i] = Some(out);
        }
    });
    slots.into_iter().map(|o| o.expect("every job reports")).collect()
}

/// Worker count when none is given: the available parallelism.
pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jobs_are_method_major() {
        let j = jobs(&[Method::Gp, Method::De], &[3, 4]);
        let pairs: Vec<(Method, u64)> = j.iter().map(|j| (j.method, j.seed)).collect();
        assert_eq!(pairs, vec![(Method::Gp, 3), (Method::Gp, 4), (Method::De, 3), (Method::De, 4)]);
    }

    #[test]
    fn zero_iterations_only_estimates() {
        let file = ConfigFile::builtin("case1").unwrap();
        let out = run_one(&file, Job { method: Method::Gp, seed: 1 }, Some(0));
        let state = out.result.unwrap();
        assert_eq!(state.records.len(), 1);
        assert!(state.records[0].design.is_none());
        assert_eq!(state.data.len(), 5);
        assert_eq!(out.iteration_seconds.len(), 1);
    }

    #[test]
    fn suite_results_keep_job_order() {
        let file = ConfigFile::builtin("case1").unwrap();
        let js = jobs(&[Method::Gp, Method::De], &[0, 1]);
        let mut seen = 0;
        let outs = run_suite(&file, &js, Some(0), 2, |_| seen += 1);
        assert_eq!(seen, 4);
        for (o, j) in outs.iter().zip(&js) {
            assert_eq!(o.job, *j);
            assert_eq!(o.state().seed, j.seed);
        }
    }
}
