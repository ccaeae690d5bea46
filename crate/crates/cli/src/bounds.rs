//! The experiment pipeline: analytical preparation (absolute probability
//! sequence, Lyapunov, mixing profile), the Monte-Carlo ensemble, error
//! series, and — per step regime — the full bound-constant ledger and
//! right-hand-side series.

use serde_json::{json, Value};

use netsa_core::analysis::{
    self, check_alpha_feasibility, consensus_constants, error_series, push_constants,
    solve_equilibrium, solve_lyapunov, suggest_feasible_alpha, AnalysisError, ConsensusAnchors,
    ConsensusConstants, Equilibrium, ErrorSeries, EtaSeries, FixedBound, InstanceParams,
    LyapunovSolution, PushAnchors, PushBound, PushConstants, SeriesWeighting, TimeVaryingBound,
    Weighting,
};
use netsa_core::engine::{EngineKind, RunSpec};
use netsa_core::linalg::vec_ops;
use netsa_core::noise::MixingProfile;
use netsa_core::weights::{absolute_probability_sequence, epsilon1, AbsoluteProbabilitySequence};

use crate::config::{BoundsCfg, BuiltInstance, Config, StepsCfg, Violation};
use crate::runner::{run_ensemble, Ensemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Fixed,
    TimeVarying,
    Push,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Fixed => "fixed",
            Regime::TimeVarying => "time_varying",
            Regime::Push => "push",
        }
    }
}

/// Bounds regime implied by engine and step schedule; `None` when no bound
/// from the theory applies (the adapt-then-combine variant, step tables).
pub fn infer_regime(cfg: &Config, built: &BuiltInstance) -> Option<Regime> {
    match (built.engine, &cfg.steps) {
        (EngineKind::Consensus, StepsCfg::Fixed { .. }) => Some(Regime::Fixed),
        (EngineKind::Consensus, StepsCfg::Harmonic { .. }) => Some(Regime::TimeVarying),
        (EngineKind::Push, StepsCfg::Harmonic { .. }) => Some(Regime::Push),
        _ => None,
    }
}

#[derive(Debug)]
pub enum Failure {
    /// Named assumption violations; every refusal lists what was measured.
    Refusal(Vec<Violation>),
    Engine {
        trial: usize,
        error: netsa_core::engine::EngineError,
    },
    Internal(String),
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::Internal(e.to_string())
    }
}

fn refusal(assumption: &str, detail: String) -> Failure {
    Failure::Refusal(vec![Violation {
        assumption: assumption.to_string(),
        detail,
    }])
}

/// Analytical context shared by reporting and bounds.
pub struct Prepared {
    pub params: InstanceParams,
    pub lyapunov: LyapunovSolution,
    pub aps: Option<AbsoluteProbabilitySequence>,
    pub eta: Option<EtaSeries>,
    pub theta_star: Option<Equilibrium>,
    pub epsilon1: Option<f64>,
    pub delta_max: usize,
    pub warnings: Vec<String>,
}

/// Bound evaluation results aligned with recorded times.
pub struct BoundsOutcome {
    pub regime: Regime,
    pub ledger: Value,
    /// `(t, rhs)` pairs at the recorded times where the bound applies; for
    /// the push regime the stored `t` is the empirical comparison time and
    /// the value is the bound evaluated one step earlier.
    pub rhs_at: Vec<(u64, f64)>,
    pub anchor_t: u64,
    /// Long-run cap `C₂` (fixed regime only).
    pub c2_limit: Option<f64>,
    /// Decay sanity for the diminishing-step bounds: RHS at `t = 10⁴` and
    /// `t = 10⁶` when both are evaluable (the push case needs the run to
    /// actually reach 10⁶ for the disturbance sum).
    pub rhs_decay: Option<(f64, f64)>,
}

pub struct Artifacts {
    pub ensemble: Ensemble,
    pub series: ErrorSeries,
    pub prepared: Prepared,
    /// `None` when bounds were not requested or no proved bound covers the
    /// engine/step combination (reports then show the columns as n/a).
    pub bounds: Option<BoundsOutcome>,
}

fn uniform_vec(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn prepare(cfg: &Config, built: &BuiltInstance) -> Result<Prepared, Failure> {
    let mut warnings = Vec::new();
    let window = built.graphs.declared_window();
    let delta_max = built
        .graphs
        .delta_max(window, built.connectivity_check_horizon)
        .map_err(|e| refusal("definition_1_connectivity", e.to_string()))?;

    let lyapunov = solve_lyapunov(built.noise.a_limit()).map_err(|e| match e {
        AnalysisError::NotPositiveDefinite { gamma_min } => refusal(
            "assumption_4_hurwitz",
            format!("Lyapunov solution not positive definite (min eigenvalue {gamma_min})"),
        ),
        other => Failure::Internal(other.to_string()),
    })?;

    let burn_in = cfg.bounds.clone().unwrap_or_default().aps_burn_in;
    let (aps, eta, eps1) = match built.engine {
        EngineKind::Consensus | EngineKind::Kushner => {
            let n = built.weights.n_agents();
            let aps = absolute_probability_sequence(
                &built.weights,
                cfg.horizon,
                burn_in,
                &uniform_vec(n),
            )
            .map_err(|e| refusal("aps_terminal_sensitivity", e.to_string()))?;
            let eta = match aps.eta_series() {
                Ok(values) => {
                    let tail = *values.last().expect("nonempty series");
                    Some(EtaSeries::new(values, tail))
                }
                Err(e) => {
                    warnings.push(format!("assumption_6_pi_limit: {e}"));
                    None
                }
            };
            (Some(aps), eta, None)
        }
        EngineKind::Push => {
            let horizon = cfg.horizon.min(50_000).max(window as u64 * 64);
            let eps1 = epsilon1(&built.weights, horizon, Some(window))
                .map_err(|e| Failure::Internal(e.to_string()))?;
            (None, None, Some(eps1))
        }
    };

    let b_list: Vec<Vec<f64>> = built.noise.b_limits().to_vec();
    let theta_star = match built.engine {
        EngineKind::Push => Some(
            solve_equilibrium(built.noise.a_limit(), &b_list, Weighting::Uniform)
                .map_err(|e| Failure::Internal(e.to_string()))?,
        ),
        _ => match aps.as_ref().and_then(|a| a.pi_infinity()) {
            Some(pi_inf) => Some(
                solve_equilibrium(
                    built.noise.a_limit(),
                    &b_list,
                    Weighting::PiInfinity(pi_inf.to_vec()),
                )
                .map_err(|e| Failure::Internal(e.to_string()))?,
            ),
            None => {
                warnings.push(
                    "assumption_6_pi_limit: no equilibrium target; weighted MSE columns omitted"
                        .into(),
                );
                None
            }
        },
    };

    let pi_min = match (&aps, eps1) {
        (Some(a), _) => a.pi_min(),
        (None, Some(e1)) => e1 / built.weights.n_agents() as f64,
        _ => unreachable!(),
    };

    let params = InstanceParams {
        n_agents: built.weights.n_agents(),
        dim: built.noise.dim(),
        a_max: built.noise.a_max(),
        b_max: built.noise.b_max(),
        pi_min,
        beta: built.weights.beta(),
        window,
        delta_max,
        gamma_max: lyapunov.gamma_max,
        gamma_min: lyapunov.gamma_min,
        theta_star_norm: theta_star
            .as_ref()
            .map(|e| vec_ops::norm2(&e.theta_star))
            .unwrap_or(0.0),
    };

    Ok(Prepared {
        params,
        lyapunov,
        aps,
        eta,
        theta_star,
        epsilon1: eps1,
        delta_max,
        warnings,
    })
}

fn consensus_stat_at(series: &ErrorSeries, t: u64) -> Option<analysis::SeriesStat> {
    series
        .times
        .binary_search(&t)
        .ok()
        .map(|i| series.consensus_error[i])
}

const RATE_GRID: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const MIXING_MAX_HORIZON: u64 = 1_000_000;

fn fval(value: f64, formula: &str) -> Value {
    json!({ "value": value, "formula": formula })
}

fn ival(value: u64, formula: &str) -> Value {
    json!({ "value": value, "formula": formula })
}

/// Run the whole pipeline for a config that already passed validation.
pub fn execute(cfg: &Config, built: &BuiltInstance, workers: usize) -> Result<Artifacts, Failure> {
    let mut prepared = prepare(cfg, built)?;
    let bounds_cfg = cfg.bounds.clone().unwrap_or_default();
    let regime = infer_regime(cfg, built);
    let mut bounds_wanted = bounds_cfg.enabled;

    if bounds_wanted && regime.is_none() {
        // the variant engine and step tables sit outside the proved bounds;
        // the run proceeds and the report carries n/a bound columns
        prepared.warnings.push(
            "bound_regime: no finite-time bound covers this engine/step combination; bound columns are n/a"
                .into(),
        );
        bounds_wanted = false;
    }

    // mixing profile and anchor-search inputs are needed before running when
    // the regime anchors dense recording windows
    let mut dense_until = 4u64.min(cfg.horizon);
    let mut mu_dense_until = 0u64;
    let mut profile: Option<MixingProfile> = None;
    let mut rate_c = 0.0f64;
    let mut suggested_alpha = None;
    let mut t2_precomputed = None;

    if bounds_wanted {
        let regime = regime.unwrap();
        let min_alpha = match (&cfg.steps, regime) {
            (StepsCfg::Fixed { alpha }, _) => alpha * 0.5,
            (StepsCfg::Harmonic { alpha0 }, _) => {
                alpha0 / (bounds_cfg.search_cap as f64 + 2.0) * 0.5
            }
            _ => 1e-8,
        };
        let prof = built
            .noise
            .mixing_profile(min_alpha, MIXING_MAX_HORIZON)
            .map_err(|e| refusal("assumption_3_chain_ergodic", e.to_string()))?;
        rate_c = built
            .noise
            .geometric_rate_constant(&RATE_GRID, MIXING_MAX_HORIZON)
            .map_err(|e| refusal("assumption_3_chain_ergodic", e.to_string()))?;
        match regime {
            Regime::Fixed => {
                let alpha = match cfg.steps {
                    StepsCfg::Fixed { alpha } => alpha,
                    _ => unreachable!(),
                };
                let tau = prof.tau(alpha.max(prof.certified_min_alpha()));
                let feas = check_alpha_feasibility(alpha, &prepared.params, tau);
                if !feas.feasible {
                    return Err(refusal(
                        "alpha_feasibility",
                        format!(
                            "alpha = {alpha} not in (0, {}) = min(K1 = {}, log2/(A_max tau) = {}, 0.1/(K2 gamma_max) = {})",
                            feas.alpha_feasible_max, feas.k1, feas.mixing_cap, feas.variance_cap
                        ),
                    ));
                }
                dense_until = dense_until.max(prepared.params.window as u64);
            }
            Regime::TimeVarying => {
                let eta = prepared.eta.as_ref().ok_or_else(|| {
                    refusal(
                        "assumption_6_pi_limit",
                        "no APS limit detected; bounds refused".into(),
                    )
                })?;
                let alpha = suggest_feasible_alpha(&prepared.params, &prof, 0.8)?;
                let alpha0 = match cfg.steps {
                    StepsCfg::Harmonic { alpha0 } => alpha0,
                    _ => unreachable!(),
                };
                let floor = prepared.params.gamma_max / 0.9;
                if alpha0 < floor {
                    return Err(refusal(
                        "alpha0_floor",
                        format!("alpha0 = {alpha0} below gamma_max/0.9 = {floor}"),
                    ));
                }
                let tau = prof.tau(alpha.max(prof.certified_min_alpha()));
                let zetas = analysis::compute_zetas(&prepared.params, alpha, tau, 0.0);
                let t2 = analysis::search_t2(
                    &prepared.params,
                    alpha,
                    alpha0,
                    zetas.z5,
                    &prof,
                    eta,
                    bounds_cfg.search_cap,
                )?;
                let anchor = prepared.params.window as u64 * t2;
                if anchor + prepared.params.window as u64 > cfg.horizon {
                    return Err(refusal(
                        "bound_horizon",
                        format!("anchor time L*T2 = {anchor} beyond horizon {}", cfg.horizon),
                    ));
                }
                dense_until = dense_until.max(anchor + prepared.params.window as u64);
                suggested_alpha = Some(alpha);
                t2_precomputed = Some(t2);
            }
            Regime::Push => {
                let floor = prepared.params.gamma_max / 0.9;
                let alpha0 = match cfg.steps {
                    StepsCfg::Harmonic { alpha0 } => alpha0,
                    _ => unreachable!(),
                };
                if alpha0 < floor {
                    return Err(refusal(
                        "alpha0_floor",
                        format!("alpha0 = {alpha0} below gamma_max/0.9 = {floor}"),
                    ));
                }
                mu_dense_until = (bounds_cfg.search_cap + 2).min(cfg.horizon);
            }
        }
        profile = Some(prof);
    }

    let spec = RunSpec {
        engine: built.engine,
        weights: &built.weights,
        noise: &built.noise,
        steps: &built.steps,
        horizon: cfg.horizon,
        record_stride: crate::config::effective_stride(cfg),
        dense_until,
        mu_dense_until,
        init: built.init.clone(),
    };
    let pi_vectors = prepared.aps.as_ref().map(|a| a.vectors());
    let ensemble = run_ensemble(&spec, cfg.master_seed, cfg.trials, workers, pi_vectors)
        .map_err(|(trial, error)| Failure::Engine { trial, error })?;

    let theta_star_vec = prepared
        .theta_star
        .as_ref()
        .map(|e| e.theta_star.clone())
        .unwrap_or_else(|| vec![0.0; built.noise.dim()]);
    let weighting = match built.engine {
        EngineKind::Push => SeriesWeighting::PushMass,
        _ => SeriesWeighting::Pi(pi_vectors.expect("row engines carry an APS")),
    };
    let series = error_series(&ensemble.trajectories, weighting, &theta_star_vec)
        .map_err(|e| Failure::Internal(e.to_string()))?;

    let bounds = if bounds_wanted {
        Some(assemble_bounds(
            cfg,
            built,
            &prepared,
            &ensemble,
            &series,
            regime.unwrap(),
            profile.as_ref().unwrap(),
            rate_c,
            suggested_alpha,
            t2_precomputed,
            &bounds_cfg,
        )?)
    } else {
        None
    };

    Ok(Artifacts {
        ensemble,
        series,
        prepared,
        bounds,
    })
}

#[allow(clippy::too_many_arguments)]
fn assemble_bounds(
    cfg: &Config,
    built: &BuiltInstance,
    prepared: &Prepared,
    ensemble: &Ensemble,
    series: &ErrorSeries,
    regime: Regime,
    profile: &MixingProfile,
    rate_c: f64,
    suggested_alpha: Option<f64>,
    t2_precomputed: Option<u64>,
    bounds_cfg: &BoundsCfg,
) -> Result<BoundsOutcome, Failure> {
    let p = &prepared.params;
    match regime {
        Regime::Fixed | Regime::TimeVarying => {
            let eta = prepared.eta.as_ref().ok_or_else(|| {
                refusal(
                    "assumption_6_pi_limit",
                    "no APS limit detected; bounds refused".into(),
                )
            })?;
            if eta.tail() > 1e-12 {
                return Err(refusal(
                    "eta_tail",
                    format!("eta tail {} not negligible; bound sums beyond the horizon would be guesses", eta.tail()),
                ));
            }
            let alpha = match (regime, &cfg.steps) {
                (Regime::Fixed, StepsCfg::Fixed { alpha }) => *alpha,
                (Regime::TimeVarying, _) => suggested_alpha.expect("precomputed"),
                _ => unreachable!(),
            };
            let alpha0 = match (&cfg.steps, regime) {
                (StepsCfg::Harmonic { alpha0 }, _) => *alpha0,
                // the fixed regime never evaluates the alpha0-dependent constants;
                // the ledger records them at the floor for completeness
                _ => p.gamma_max / 0.9,
            };
            let pi0 = prepared.aps.as_ref().expect("row engine").pi(0).to_vec();
            let initial_avg_mse = built.init.initial_average_mse(
                &pi0,
                &prepared
                    .theta_star
                    .as_ref()
                    .expect("bounds need a target")
                    .theta_star,
            );
            // time-varying case: empirical anchor at L·T₂ (mean + 2·SE)
            let t2_and_anchor = match regime {
                Regime::TimeVarying => {
                    let t2 = t2_precomputed.expect("T2 precomputed before the run");
                    let anchor_time = p.window as u64 * t2;
                    Some((t2, avg_target_mse_at(ensemble, prepared, anchor_time)?))
                }
                _ => None,
            };
            let anchors = ConsensusAnchors {
                initial_avg_mse,
                t2_and_anchor,
                rate_c,
            };
            let consts = consensus_constants(
                p,
                alpha,
                alpha0,
                profile,
                eta,
                &anchors,
                bounds_cfg.search_cap,
            )?;
            let ledger = consensus_ledger(cfg, p, &consts, prepared, &anchors, regime);
            match regime {
                Regime::Fixed => {
                    let l = p.window;
                    let initial_consensus: Vec<f64> = (0..l as u64)
                        .map(|m| {
                            consensus_stat_at(series, m)
                                .map(|s| s.mean + 2.0 * s.se)
                                .unwrap_or(f64::NAN)
                        })
                        .collect();
                    let bound = FixedBound {
                        consts: &consts,
                        params: p,
                        eta,
                        initial_consensus: &initial_consensus,
                    };
                    let ts: Vec<u64> = series
                        .times
                        .iter()
                        .copied()
                        .filter(|&t| t >= consts.t1)
                        .collect();
                    let rhs = bound.rhs_series(&ts)?;
                    Ok(BoundsOutcome {
                        regime,
                        ledger,
                        rhs_at: ts.into_iter().zip(rhs).collect(),
                        anchor_t: consts.t1,
                        c2_limit: Some(consts.c2),
                        rhs_decay: None,
                    })
                }
                Regime::TimeVarying => {
                    let l = p.window;
                    let anchor_time = p.window as u64 * consts.t2.expect("time-varying");
                    let anchor_consensus: Vec<f64> = (0..l as u64)
                        .map(|m| {
                            consensus_stat_at(series, anchor_time + m)
                                .map(|s| s.mean + 2.0 * s.se)
                                .unwrap_or(f64::NAN)
                        })
                        .collect();
                    let bound = TimeVaryingBound {
                        consts: &consts,
                        params: p,
                        eta,
                        anchor_consensus: &anchor_consensus,
                    };
                    let ts: Vec<u64> = series
                        .times
                        .iter()
                        .copied()
                        .filter(|&t| t >= anchor_time)
                        .collect();
                    let mut rhs_at = Vec::with_capacity(ts.len());
                    for t in ts {
                        rhs_at.push((t, bound.rhs(t)?));
                    }
                    // the eta tail was certified negligible above, so the
                    // decay pair is exact for any future time
                    let rhs_decay = if anchor_time <= 10_000 {
                        Some((bound.rhs(10_000)?, bound.rhs(1_000_000)?))
                    } else {
                        None
                    };
                    Ok(BoundsOutcome {
                        regime,
                        ledger,
                        rhs_at,
                        anchor_t: anchor_time,
                        c2_limit: None,
                        rhs_decay,
                    })
                }
                Regime::Push => unreachable!(),
            }
        }
        Regime::Push => {
            let alpha0 = match cfg.steps {
                StepsCfg::Harmonic { alpha0 } => alpha0,
                _ => unreachable!(),
            };
            let eps1 = prepared.epsilon1.expect("push prepares epsilon1");
            // trial-mean dense disturbance series
            let dense_len = ensemble
                .trajectories
                .iter()
                .map(|t| t.mu_dense.as_ref().map_or(0, |m| m.len()))
                .min()
                .unwrap_or(0);
            if dense_len == 0 {
                return Err(Failure::Internal(
                    "push bounds need a dense mu window".into(),
                ));
            }
            let trials = ensemble.trajectories.len() as f64;
            let mut mu_dense = vec![0.0; dense_len];
            for traj in &ensemble.trajectories {
                for (k, v) in traj.mu_dense.as_ref().unwrap()[..dense_len]
                    .iter()
                    .enumerate()
                {
                    mu_dense[k] += v / trials;
                }
            }
            let theta_sup = ensemble
                .audits
                .iter()
                .map(|a| a.theta_frobenius_sup)
                .fold(0.0, f64::max);
            let theta_star = &prepared
                .theta_star
                .as_ref()
                .expect("push target")
                .theta_star;
            // E‖Σᵢ(θ̃₀ + α₀A(X₀)θ̃₀ + α₀bⁱ(X₀))‖ from the recorded initial states
            let c7_samples: Vec<f64> = ensemble
                .trajectories
                .iter()
                .map(|traj| {
                    let tilde0 = &traj.theta_tilde.as_ref().unwrap()[0];
                    let x0 = traj.noise_path[0];
                    let k = tilde0.cols();
                    let n = tilde0.rows();
                    let mut s = vec![0.0; k];
                    for i in 0..n {
                        for (c, acc) in s.iter_mut().enumerate() {
                            *acc += tilde0.at(i, c);
                        }
                    }
                    let a_s = built.noise.a_of(x0).matvec(&s);
                    let b = built.noise.b_of(x0);
                    let mut v = vec![0.0; k];
                    for c in 0..k {
                        let b_sum: f64 = (0..n).map(|i| b.at(i, c)).sum();
                        v[c] = s[c] + alpha0 * (a_s[c] + b_sum);
                    }
                    vec_ops::norm2(&v)
                })
                .collect();
            let c7_stat = mean_and_se(&c7_samples);
            // T̄ must come out before the anchor can be measured; run the
            // search with provisional constants first
            let c_theta_prov = theta_sup * analysis::C_THETA_SAFETY;
            let mu_max_prov = (p.n_agents as f64 + 1.0) * p.a_max * c_theta_prov;
            let zeta8 = analysis::compute_zetas(p, 0.0, 0, mu_max_prov).z8;
            let t_bar = analysis::search_t_bar(
                p,
                alpha0,
                zeta8,
                profile,
                &mu_dense,
                bounds_cfg.search_cap,
            )?;
            let anchor_samples: Vec<f64> = ensemble
                .trajectories
                .iter()
                .map(|traj| {
                    let avg = &traj.avg_tilde_dense.as_ref().unwrap()[t_bar as usize];
                    let d = vec_ops::dist2(avg, theta_star);
                    d * d
                })
                .collect();
            let anchor_stat = mean_and_se(&anchor_samples);
            let anchors = PushAnchors {
                c7_expectation: c7_stat.0 + 2.0 * c7_stat.1,
                anchor_avg_tilde_mse: anchor_stat.0 + 2.0 * anchor_stat.1,
                theta_sup,
                rate_c,
            };
            let consts = push_constants(
                p,
                alpha0,
                eps1,
                profile,
                &mu_dense,
                &anchors,
                bounds_cfg.search_cap,
            )?;
            debug_assert_eq!(consts.t_bar, t_bar);
            let ledger = push_ledger(cfg, p, &consts, prepared, &anchors);

            // dense prefix sums for Σ_{k=T̄}^{t} μ_k
            let mut dense_prefix = vec![0.0; dense_len + 1];
            for (k, v) in mu_dense.iter().enumerate() {
                dense_prefix[k + 1] = dense_prefix[k] + v;
            }
            let prefix_before_tbar = dense_prefix[consts.t_bar as usize]; // Σ_{k<T̄}
            let bound = PushBound { consts: &consts };
            let mu_mean = series.mu.as_ref().expect("push series carries mu");
            let mu_cum_mean = series
                .mu_cumsum
                .as_ref()
                .expect("push series carries cumsum");
            let mut rhs_at = Vec::new();
            for (idx, &s_time) in series.times.iter().enumerate() {
                if s_time < consts.t_bar + 1 {
                    continue;
                }
                // bound at t = s_time − 1 applies to the error at s_time
                let t = s_time - 1;
                let mu_sum = mu_cum_mean[idx].mean - mu_mean[idx].mean - prefix_before_tbar;
                rhs_at.push((s_time, bound.rhs(t, mu_sum)?));
            }
            // Σ_{k=T̄}^{t} μ_k at an exactly-recorded t
            let mu_sum_to = |t: u64| -> Option<f64> {
                series
                    .times
                    .binary_search(&t)
                    .ok()
                    .map(|idx| mu_cum_mean[idx].mean - prefix_before_tbar)
            };
            let rhs_decay = if consts.t_bar <= 10_000 && cfg.horizon >= 1_000_000 {
                match (mu_sum_to(10_000), mu_sum_to(1_000_000)) {
                    (Some(s4), Some(s6)) => {
                        Some((bound.rhs(10_000, s4)?, bound.rhs(1_000_000, s6)?))
                    }
                    _ => None,
                }
            } else {
                None
            };
            Ok(BoundsOutcome {
                regime,
                ledger,
                rhs_at,
                anchor_t: consts.t_bar + 1,
                c2_limit: None,
                rhs_decay,
            })
        }
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E‖⟨θ⟩_t − θ*‖²` at an exactly-recorded time (mean + 2·SE).
fn avg_target_mse_at(ensemble: &Ensemble, prepared: &Prepared, t: u64) -> Result<f64, Failure> {
    let aps = prepared.aps.as_ref().expect("consensus anchor");
    let pi = aps.pi(t);
    let theta_star = &prepared.theta_star.as_ref().expect("target").theta_star;
    let mut samples = Vec::with_capacity(ensemble.trajectories.len());
    for traj in &ensemble.trajectories {
        let idx = traj
            .snapshot_index(t)
            .ok_or_else(|| Failure::Internal(format!("anchor time {t} not recorded")))?;
        let avg = traj.theta[idx].vecmat(pi);
        let d = vec_ops::dist2(&avg, theta_star);
        samples.push(d * d);
    }
    let (mean, se) = mean_and_se(&samples);
    Ok(mean + 2.0 * se)
}

fn inputs_json(cfg: &Config, p: &InstanceParams, prepared: &Prepared, rate_c: f64) -> Value {
    json!({
        "n_agents": p.n_agents,
        "dim": p.dim,
        "a_max": p.a_max,
        "b_max": p.b_max,
        "pi_min": p.pi_min,
        "beta": p.beta,
        "window": p.window,
        "delta_max": p.delta_max,
        "gamma_max": p.gamma_max,
        "gamma_min": p.gamma_min,
        "theta_star": prepared.theta_star.as_ref().map(|e| e.theta_star.clone()),
        "theta_star_norm": p.theta_star_norm,
        "rate_c": rate_c,
        "horizon": cfg.horizon,
        "trials": cfg.trials,
    })
}

fn zetas_json(z: &analysis::Zetas, push: bool) -> Value {
    let mut v = json!({
        "zeta1": fval(z.z1, "unique alpha with epsilon(alpha) = 1"),
        "zeta2": fval(z.z2, "4 b^2/A^2 ((1+aA)^L - 1)^2 + 2 b ((1+aA)^L - 1)/A (1+aA)^L"),
        "zeta3": fval(z.z3, "(144 + 4A^2 + 912 tau A^2 + 168 tau A b)||th*||^2 + tau A^2 (152(b/A + ||th*||)^2 + 48 b/A (b/A+1)^2 + 87 b^2/A^2 + 12 b/A) + 2 + 2b^2 + 4||th*||^2 + 48 b^2/A^2"),
        "zeta4": fval(z.z4, "sqrt(N) b (2 + 12 b^2/A^2 + 38 ||th*||^2)"),
        "zeta5": fval(z.z5, "144 + 916 A^2 + 168 A b"),
        "zeta6": fval(z.z6, "4 b^2 a L^2 (1+aA)^(2L-2) + 2 b L (1+aA)^(2L-1)"),
        "zeta7": fval(z.z7, "(148 + 916 A^2 + 168 A b)||th*||^2 + 2 + 48 b^2/A^2 + 152(b + A||th*||)^2 + 89 b^2 + 12 A b + 48 A b (b/A+1)^2"),
    });
    if push {
        v["zeta8"] = fval(z.z8, "144 + 916 A^2 + 168 A b + 144 A mu_max");
        v["zeta9"] = fval(z.z9, "2 + (4+zeta8)||th*||^2 + 48(b+mu)^2/A^2 + 152(b+mu+A||th*||)^2 + 12 A b + 48 A (b+mu)((b+mu)/A+1)^2 + 89(b+mu)^2");
    } else {
        v["zeta8"] = Value::Null;
        v["zeta9"] = Value::Null;
    }
    v
}

fn consensus_ledger(
    cfg: &Config,
    p: &InstanceParams,
    c: &ConsensusConstants,
    prepared: &Prepared,
    anchors: &ConsensusAnchors,
    regime: Regime,
) -> Value {
    let rate_c = anchors.rate_c;
    let feas = {
        let k1 = c.k1;
        let mixing_cap = if c.tau_alpha == 0 {
            f64::INFINITY
        } else {
            (2.0f64).ln() / (p.a_max * c.tau_alpha as f64)
        };
        let variance_cap = 0.1 / (c.k2 * p.gamma_max);
        json!({
            "k1": k1,
            "mixing_cap": if mixing_cap.is_finite() { Value::from(mixing_cap) } else { Value::Null },
            "variance_cap": variance_cap,
            "alpha_feasible_max": k1.min(mixing_cap).min(variance_cap),
        })
    };
    json!({
        "regime": regime.as_str(),
        "inputs": inputs_json(cfg, p, prepared, rate_c),
        "anchors": {
            "initial_avg_mse": anchors.initial_avg_mse,
            "anchor_avg_mse_lt2": anchors.t2_and_anchor.map(|(_, a)| a),
        },
        "alpha": c.alpha,
        "alpha0": c.alpha0,
        "tau_alpha": c.tau_alpha,
        "alpha_feasibility": feas,
        "epsilon": fval(c.epsilon, "(1 + 2b/A - pi_min beta^(2L)/(2 delta_max))(1+aA)^(2L) - (2b/A)(1+aA)^L"),
        "contraction": fval(c.contraction, "1 - 0.9 alpha / gamma_max"),
        "zetas": zetas_json(&c.zetas, false),
        "k_constants": {
            "k1": fval(c.k1, "min(zeta1, gamma_max/0.9)"),
            "k2": fval(c.k2, "144 + 4A^2 + 912 tau A^2 + 168 tau A b"),
        },
        "c_constants": {
            "c1": fval(c.c1, "(gmax/gmin)(8 exp(2 a A T1) + 4) E||<th>_0 - th*||^2 + 8 (gmax/gmin) exp(2 a A T1)(||th*|| + b/A)^2"),
            "c2": fval(c.c2, "2 zeta2/(1-eps) + (gmax/gmin) 2 a zeta3 gmax / 0.9"),
            "c3": fval(c.c3, "2 zeta6/(1-eps)"),
            "c4": fval(c.c4, "2 zeta7 alpha0 C gmax/gmin"),
            "c5": fval(c.c5, "2 alpha0 zeta4 gmax/gmin"),
            "c6": c.c6.map_or(Value::Null, |v| fval(v, "2 L T2 (gmax/gmin) E||<th>_{L T2} - th*||^2")),
            "c7": Value::Null, "c8": Value::Null, "c9": Value::Null,
            "c10": Value::Null, "c11": Value::Null, "c12": Value::Null,
        },
        "t_constants": {
            "t1": ival(c.t1, "least T with t >= tau(a) and 36 sqrt(N) b eta_{t+1} gmax + K2 a gmax <= 0.1 for all t >= T"),
            "t2": c.t2.map_or(Value::Null, |v| ival(v, "least T with alpha_t <= a, 2 tau(alpha_t) <= t, tau(alpha_t) alpha_{t-tau} <= min(log2/A, 0.1/(zeta5 gmax)), zeta5 alpha_{t-tau} tau gmax + 36 sqrt(N) b eta_{t+1} gmax <= 0.1 for all t >= L T")),
            "t_bar": Value::Null,
        },
        "push": Value::Null,
        "empirical_flags": ["c6_anchor_mean_plus_2se"],
    })
}

fn push_ledger(
    cfg: &Config,
    p: &InstanceParams,
    c: &PushConstants,
    prepared: &Prepared,
    anchors: &PushAnchors,
) -> Value {
    json!({
        "regime": "push",
        "inputs": inputs_json(cfg, p, prepared, anchors.rate_c),
        "anchors": {
            "c7_expectation": anchors.c7_expectation,
            "anchor_avg_tilde_mse": anchors.anchor_avg_tilde_mse,
            "theta_sup": anchors.theta_sup,
        },
        "alpha": Value::Null,
        "alpha0": c.alpha0,
        "alpha_feasibility": Value::Null,
        "epsilon": Value::Null,
        "contraction": Value::Null,
        "zetas": zetas_json(&analysis::compute_zetas(p, 0.0, 0, c.mu_max), true),
        "k_constants": { "k1": Value::Null, "k2": Value::Null },
        "c_constants": {
            "c1": Value::Null, "c2": Value::Null, "c3": Value::Null,
            "c4": Value::Null, "c5": Value::Null, "c6": Value::Null,
            "c7": fval(c.c7, "16/eps1 E||sum_i (tilde_th_0 + alpha0 A(X0) tilde_th_0 + alpha0 b_i(X0))||"),
            "c8": fval(c.c8, "16/eps1 (A_max C_theta + b_max)/(1 - eps_bar)"),
            "c9": fval(c.c9, "2 A_max C_theta + 2 b_max"),
            "c10": fval(c.c10, "2 N zeta9 alpha0 C gmax/gmin"),
            "c11": fval(c.c11, "2 alpha0 N gmax/gmin"),
            "c12": fval(c.c12, "2 Tbar N (gmax/gmin) E||<tilde_th>_Tbar - th*||^2"),
        },
        "t_constants": {
            "t1": Value::Null,
            "t2": Value::Null,
            "t_bar": ival(c.t_bar, "least T with 2 tau(alpha_t) <= t, mu_t + tau(alpha_t) alpha_{t-tau} zeta8 <= 0.1/gmax, tau(alpha_t) alpha_{t-tau} <= min(log2/A, 0.1/(zeta8 gmax)) for all t >= T"),
        },
        "push": {
            "epsilon1": fval(c.epsilon1, "inf_t min_i (hatW_t ... hatW_0 1)_i, certified >= 1/N^(N L)"),
            "epsilon_bar_upper": fval(c.epsilon_bar, "(1 - 1/N^(N L))^(1/L); RHS evaluated at this upper bound"),
            "c_theta": fval(c.c_theta, "1.1 * empirical sup_t ||Theta_t||_F"),
            "mu_max": fval(c.mu_max, "(N+1) A_max C_theta"),
        },
        "empirical_flags": ["c_theta", "c7_expectation_mean_plus_2se", "c12_anchor_mean_plus_2se"],
        "horizon": cfg.horizon,
    })
}
