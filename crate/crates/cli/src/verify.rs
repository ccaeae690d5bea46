//! The property suite behind `netsa verify`: the named invariants of every
//! module, each measured on the configured instance and reported with its
//! residual. Failures are report content, not process errors.

use serde_json::{json, Value};

use netsa_core::engine::{EngineKind, InitSpec, RunSpec, StepSchedule};
use netsa_core::weights::{
    absolute_probability_sequence, aps_recursion_residual, verify_push_identities, WeightSchedule,
};

use crate::config::{BuiltInstance, Config};
use crate::runner::run_ensemble;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    pub note: String,
}

impl CheckResult {
    fn new(name: &str, measured: f64, threshold: f64, note: &str) -> Self {
        CheckResult {
            name: name.to_string(),
            pass: measured <= threshold,
            measured,
            threshold,
            note: note.to_string(),
        }
    }
}

pub fn to_json(results: &[CheckResult]) -> Value {
    json!({
        "schema_version": 1,
        "checks": results.iter().map(|r| json!({
            "name": r.name,
            "pass": r.pass,
            "measured": r.measured,
            "threshold": r.threshold,
            "note": r.note,
        })).collect::<Vec<_>>(),
        "all_pass": results.iter().all(|r| r.pass),
    })
}

/// Run every invariant suite against the instance. `seed` feeds the replay
/// runs; analytical checks are seed-free.
pub fn run_suite(cfg: &Config, built: &BuiltInstance, seed: u64) -> Vec<CheckResult> {
    let mut results = Vec::new();
    let n = built.graphs.n_agents();
    let horizon = cfg.horizon.clamp(64, 2000);

    // absolute probability sequence: recursion residual and limit detection
    let row_weights = match built.weights.orientation() {
        netsa_core::weights::Orientation::Row => built.weights.clone(),
        netsa_core::weights::Orientation::Column => {
            WeightSchedule::equal_neighbor(built.graphs.clone())
        }
    };
    let uniform = vec![1.0 / n as f64; n];
    match absolute_probability_sequence(&row_weights, horizon, 400, &uniform) {
        Ok(aps) => {
            results.push(CheckResult::new(
                "aps_recursion_residual",
                aps_recursion_residual(&row_weights, &aps),
                1e-10,
                "max_t |pi_t - pi_{t+1} W_t|_1 over the reported range",
            ));
            results.push(CheckResult::new(
                "aps_pi_min_positive",
                if aps.pi_min() > 0.0 { 0.0 } else { 1.0 },
                0.0,
                &format!("pi_min = {}", aps.pi_min()),
            ));
            // the limit canary concerns the config's own weighting; the push
            // engine's weighting (y/N) exists regardless
            if built.weights.orientation() == netsa_core::weights::Orientation::Row {
                let detected = aps.pi_infinity().is_some();
                results.push(CheckResult::new(
                    "assumption_6_pi_limit",
                    if detected { 0.0 } else { aps.tail_spread() },
                    netsa_core::weights::APS_LIMIT_TOL,
                    if detected {
                        "limit vector detected"
                    } else {
                        "no limit: Assumption 6 violated"
                    },
                ));
            }
        }
        Err(e) => {
            results.push(CheckResult::new(
                "aps_recursion_residual",
                f64::INFINITY,
                1e-10,
                &format!("APS computation failed: {e}"),
            ));
        }
    }

    // push-sum identities on the same graph schedule
    let push_weights = WeightSchedule::push(built.graphs.clone());
    let ident_horizon = cfg.horizon.clamp(64, 400);
    match verify_push_identities(&push_weights, ident_horizon, 50, seed) {
        Ok(report) => {
            results.push(CheckResult::new(
                "push_product_relation",
                report.product_relation_residual,
                1e-8,
                "(prod tildeW)_ij vs (y_s^j / y_{t+1}^i)(prod hatW)_ij over sampled windows",
            ));
            results.push(CheckResult::new(
                "push_ratio_identity",
                report.ratio_identity_residual,
                1e-8,
                "max |tilde_pi_t^i / y_t^i - 1/N| over a mid-horizon range",
            ));
            results.push(CheckResult::new(
                "push_product_rank_one_limit",
                report.final_product_residual,
                1e-6,
                "Frobenius gap between the final tildeW product and (1/N) 1 1^T",
            ));
        }
        Err(e) => {
            results.push(CheckResult::new(
                "push_product_relation",
                f64::INFINITY,
                1e-8,
                &format!("identity check failed: {e}"),
            ));
        }
    }

    // replay audits: consensus Eq-for-averages and push conservation laws
    let steps = StepSchedule::Harmonic { alpha0: 1.0 };
    let replay_horizon = cfg.horizon.clamp(64, 2000);
    if let Ok(aps) = absolute_probability_sequence(&row_weights, replay_horizon, 400, &uniform) {
        let spec = RunSpec {
            engine: EngineKind::Consensus,
            weights: &row_weights,
            noise: &built.noise,
            steps: &steps,
            horizon: replay_horizon,
            record_stride: 1,
            dense_until: 0,
            mu_dense_until: 0,
            init: InitSpec::Uniform { scale: 1.0 },
        };
        match run_ensemble(&spec, seed, 2, 2, Some(aps.vectors())) {
            Ok(ensemble) => {
                let worst = ensemble
                    .audits
                    .iter()
                    .map(|a| a.weighted_average_residual)
                    .fold(0.0, f64::max);
                results.push(CheckResult::new(
                    "weighted_average_recursion",
                    worst,
                    1e-9,
                    "per-step residual of <th>_{t+1} = <th>_t + a_t A(X_t)<th>_t + a_t B(X_t)^T pi_{t+1}",
                ));
                // consensus error must decay (needs no APS limit)
                let pis = aps.vectors();
                let theta_star = vec![0.0; built.noise.dim()];
                if let Ok(series) = netsa_core::analysis::error_series(
                    &ensemble.trajectories,
                    netsa_core::analysis::SeriesWeighting::Pi(pis),
                    &theta_star,
                ) {
                    let early = series
                        .times
                        .iter()
                        .position(|&t| t >= 10)
                        .map(|i| series.consensus_error[i].mean)
                        .unwrap_or(0.0);
                    let last = series.consensus_error.last().map(|s| s.mean).unwrap_or(0.0);
                    let ratio = if early > 1e-30 { last / early } else { 0.0 };
                    results.push(CheckResult::new(
                        "consensus_error_decay",
                        ratio,
                        0.1,
                        "consensus error at the horizon relative to t = 10",
                    ));
                }
            }
            Err((trial, e)) => results.push(CheckResult::new(
                "weighted_average_recursion",
                f64::INFINITY,
                1e-9,
                &format!("replay run failed on trial {trial}: {e}"),
            )),
        }
    }

    let push_spec = RunSpec {
        engine: EngineKind::Push,
        weights: &push_weights,
        noise: &built.noise,
        steps: &steps,
        horizon: replay_horizon,
        record_stride: 1,
        dense_until: 0,
        mu_dense_until: 0,
        init: InitSpec::Uniform { scale: 1.0 },
    };
    match run_ensemble(&push_spec, seed.wrapping_add(1), 2, 2, None) {
        Ok(ensemble) => {
            let mass = ensemble
                .audits
                .iter()
                .map(|a| a.mass_conservation_residual)
                .fold(0.0, f64::max);
            let avg = ensemble
                .audits
                .iter()
                .map(|a| a.push_average_residual)
                .fold(0.0, f64::max);
            let ratio = ensemble
                .audits
                .iter()
                .map(|a| a.ratio_residual)
                .fold(0.0, f64::max);
            results.push(CheckResult::new(
                "push_mass_conservation",
                mass,
                1e-10,
                "max_t |sum_i y_t^i - N|",
            ));
            results.push(CheckResult::new(
                "push_average_recursion",
                avg,
                1e-9,
                "per-step residual of <tilde_th>_{t+1} = <tilde_th>_t + a_t A(X_t)<th>_t + (a_t/N) sum_i b_i(X_t)",
            ));
            results.push(CheckResult::new(
                "push_ratio_consistency",
                ratio,
                1e-12,
                "max |th_t^i - tilde_th_t^i / y_t^i|",
            ));
        }
        Err((trial, e)) => results.push(CheckResult::new(
            "push_mass_conservation",
            f64::INFINITY,
            1e-10,
            &format!("push replay failed on trial {trial}: {e}"),
        )),
    }

    results
}
