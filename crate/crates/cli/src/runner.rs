//! Monte-Carlo ensemble orchestration: trials run across a bounded worker
//! pool, each over its own derived seed, and results are keyed by trial
//! index so aggregation never depends on completion order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use netsa_core::engine::{run, EngineError, RunAudit, RunSpec, Trajectory};
use netsa_core::rng::derive_seed;

/// Stream label for per-trial seed derivation (documented in the README).
pub const STREAM_TRIAL: u64 = 0x7472_6961_6C00_0001;

pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    derive_seed(master_seed, STREAM_TRIAL, trial as u64)
}

pub struct Ensemble {
    pub trajectories: Vec<Trajectory>,
    pub audits: Vec<RunAudit>,
}

/// Run `trials` trajectories over at most `workers` threads.
pub fn run_ensemble(
    spec: &RunSpec<'_>,
    master_seed: u64,
    trials: usize,
    workers: usize,
    pi: Option<&[Vec<f64>]>,
) -> Result<Ensemble, (usize, EngineError)> {
    let workers = workers.max(1).min(trials.max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<(Trajectory, RunAudit)>>> =
        Mutex::new((0..trials).map(|_| None).collect());
    let failure: Mutex<Option<(usize, EngineError)>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let trial = next.fetch_add(1, Ordering::Relaxed);
                if trial >= trials {
                    break;
                }
                if failure.lock().unwrap().is_some() {
                    break;
                }
                match run(spec, trial_seed(master_seed, trial), pi) {
                    Ok(out) => {
                        slots.lock().unwrap()[trial] = Some(out);
                    }
                    Err(e) => {
                        let mut f = failure.lock().unwrap();
                        // keep the lowest failing trial for determinism
                        if f.as_ref().is_none_or(|(t, _)| trial < *t) {
                            *f = Some((trial, e));
                        }
                    }
                }
            });
        }
    });

    if let Some(f) = failure.into_inner().unwrap() {
        return Err(f);
    }
    let mut trajectories = Vec::with_capacity(trials);
    let mut audits = Vec::with_capacity(trials);
    for slot in slots.into_inner().unwrap() {
        let (t, a) = slot.expect("every trial completed");
        trajectories.push(t);
        audits.push(a);
    }
    Ok(Ensemble {
        trajectories,
        audits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{build, effective_stride};
    use crate::presets;
    use netsa_core::engine::RunSpec;

    #[test]
    fn ensemble_is_order_independent_across_worker_counts() {
        let cfg = {
            let mut c = presets::preset("doubly_stochastic_baseline").unwrap();
            c.horizon = 500;
            c.trials = 6;
            c
        };
        let built = build(&cfg).unwrap();
        let spec = RunSpec {
            engine: built.engine,
            weights: &built.weights,
            noise: &built.noise,
            steps: &built.steps,
            horizon: cfg.horizon,
            record_stride: effective_stride(&cfg),
            dense_until: 4,
            mu_dense_until: 0,
            init: built.init.clone(),
        };
        let one = run_ensemble(&spec, cfg.master_seed, cfg.trials, 1, None).unwrap();
        let four = run_ensemble(&spec, cfg.master_seed, cfg.trials, 4, None).unwrap();
        for (a, b) in one.trajectories.iter().zip(&four.trajectories) {
            assert_eq!(a.seed, b.seed);
            for (ma, mb) in a.theta.iter().zip(&b.theta) {
                assert_eq!(ma.data(), mb.data());
            }
        }
    }
}
