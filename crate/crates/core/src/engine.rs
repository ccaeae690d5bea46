//! The three iterations and their trajectories.
//!
//! Consensus-SA mixes first and adapts on the mixed value; the variant
//! adapts on the pre-mix value; push-SA runs the ratio scheme over
//! column-stochastic weights, carrying a mass vector `y` whose total is
//! conserved. A run is strictly sequential in `t` and a pure function of
//! `(spec, seed)`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{vec_ops, Mat};
use crate::math;
use crate::noise::NoiseModel;
use crate::rng::{derive_seed, Rng};
use crate::weights::{Orientation, WeightSchedule, WeightsError};

const STREAM_INIT: u64 = 0x696E_6974;
const STREAM_PATH: u64 = 0x7061_7468;

/// Abort threshold: a state norm beyond this is treated as divergence so
/// infeasible step sizes fail loudly instead of drifting into NaN.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    /// State norm crossed the divergence guard (or went non-finite) at `t`.
    Diverged {
        t: u64,
        norm: f64,
    },
    /// Weight orientation does not match the engine.
    WrongOrientation {
        expected: Orientation,
    },
    Weights(WeightsError),
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Diverged { t, norm } => {
                write!(
                    f,
                    "state diverged at step {t} (norm {norm:e}); step size is infeasible"
                )
            }
            EngineError::WrongOrientation { expected } => {
                write!(f, "engine requires {expected:?}-stochastic weights")
            }
            EngineError::Weights(e) => write!(f, "{e}"),
            EngineError::Dimension {
                what,
                expected,
                got,
            } => {
                write!(f, "{what}: expected {expected}, got {got}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EngineError {}

impl From<WeightsError> for EngineError {
    fn from(e: WeightsError) -> Self {
        EngineError::Weights(e)
    }
}

/// Step-size sequence; positive and non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSchedule {
    Fixed(f64),
    /// `α_t = α₀ / (t + 1)`.
    Harmonic {
        alpha0: f64,
    },
    /// Validated non-increasing table; `Σα = ∞, Σα² < ∞` is not certified
    /// for tables and reports must flag them accordingly.
    Table(Vec<f64>),
}

impl StepSchedule {
    pub fn alpha(&self, t: u64) -> f64 {
        match self {
            StepSchedule::Fixed(a) => *a,
            StepSchedule::Harmonic { alpha0 } => alpha0 / (t as f64 + 1.0),
            StepSchedule::Table(v) => v[(t as usize).min(v.len() - 1)],
        }
    }

    /// Shape check: positive and non-increasing.
    pub fn is_valid_shape(&self) -> bool {
        match self {
            StepSchedule::Fixed(a) => *a > 0.0,
            StepSchedule::Harmonic { alpha0 } => *alpha0 > 0.0,
            StepSchedule::Table(v) => {
                !v.is_empty() && v.iter().all(|&a| a > 0.0) && v.windows(2).all(|w| w[1] <= w[0])
            }
        }
    }

    /// Whether the divergent-sum / summable-squares condition holds by
    /// construction (fixed steps satisfy neither; tables are unverified).
    pub fn assumption5_certified(&self) -> bool {
        matches!(self, StepSchedule::Harmonic { .. })
    }
}

/// `N×K` block of agent states; row `i` is `θ_tⁱᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStates {
    pub theta: Mat,
}

impl AgentStates {
    pub fn n_agents(&self) -> usize {
        self.theta.rows()
    }

    pub fn dim(&self) -> usize {
        self.theta.cols()
    }

    fn max_row_norm(&self) -> f64 {
        (0..self.theta.rows())
            .map(|i| vec_ops::norm2(self.theta.row(i)))
            .fold(0.0, f64::max)
    }
}

/// Push-SA state: the numerator block `θ̃`, the positive mass vector `y`
/// with `Σy = N`, and the ratio block `θ` with row `i` equal to `θ̃ⁱ/yⁱ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PushState {
    pub theta_tilde: Mat,
    pub y: Vec<f64>,
    pub theta: Mat,
}

impl PushState {
    pub fn from_tilde(theta_tilde: Mat) -> Self {
        let n = theta_tilde.rows();
        let y = vec![1.0; n];
        let theta = theta_tilde.clone();
        PushState {
            theta_tilde,
            y,
            theta,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.theta_tilde.rows()
    }

    fn max_row_norm(&self) -> f64 {
        (0..self.theta.rows())
            .map(|i| vec_ops::norm2(self.theta.row(i)))
            .fold(0.0, f64::max)
    }
}

/// One consensus-SA step: `Θ' = W Θ + α W Θ Aᵀ + α B` — each agent mixes
/// in-neighbor states and adapts on the mixture.
pub fn consensus_sa_step(
    states: &AgentStates,
    w: &Mat,
    a: &Mat,
    b: &Mat,
    alpha: f64,
) -> AgentStates {
    let mixed = w.matmul(&states.theta);
    let drift = mixed.matmul(&a.transpose()).add(b).scale(alpha);
    AgentStates {
        theta: mixed.add(&drift),
    }
}

/// The adapt-then-combine variant: `Θ' = W Θ + α Θ Aᵀ + α B` — the drift is
/// evaluated on the pre-mix state.
pub fn kushner_variant_step(
    states: &AgentStates,
    w: &Mat,
    a: &Mat,
    b: &Mat,
    alpha: f64,
) -> AgentStates {
    let mixed = w.matmul(&states.theta);
    let drift = states.theta.matmul(&a.transpose()).add(b).scale(alpha);
    AgentStates {
        theta: mixed.add(&drift),
    }
}

/// One push-SA step over a column-stochastic `ŵ`:
/// `y' = Ŵ y`, `θ̃'ⁱ = Σ_j ŵⁱʲ (θ̃ʲ + α (A θʲ + bʲ))`, `θ'ⁱ = θ̃'ⁱ / y'ⁱ`.
pub fn push_sa_step(state: &PushState, hat_w: &Mat, a: &Mat, b: &Mat, alpha: f64) -> PushState {
    let y = hat_w.matvec(&state.y);
    let payload = state
        .theta_tilde
        .add(&state.theta.matmul(&a.transpose()).add(b).scale(alpha));
    let theta_tilde = hat_w.matmul(&payload);
    let n = theta_tilde.rows();
    let k = theta_tilde.cols();
    let mut theta = Mat::zeros(n, k);
    for i in 0..n {
        debug_assert!(y[i] > 0.0, "self-arc keeps the mass vector positive");
        for c in 0..k {
            theta.set(i, c, theta_tilde.at(i, c) / y[i]);
        }
    }
    PushState {
        theta_tilde,
        y,
        theta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Consensus,
    Kushner,
    Push,
}

impl EngineKind {
    pub fn required_orientation(&self) -> Orientation {
        match self {
            EngineKind::Consensus | EngineKind::Kushner => Orientation::Row,
            EngineKind::Push => Orientation::Column,
        }
    }
}

/// Initial agent states.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// Seeded i.i.d. uniform draw in `[-scale, scale]` per entry.
    Uniform {
        scale: f64,
    },
    Zero,
    Explicit(Mat),
}

impl InitSpec {
    fn materialize(&self, n: usize, k: usize, seed: u64) -> Mat {
        match self {
            InitSpec::Uniform { scale } => {
                let mut rng = Rng::new(seed);
                let mut m = Mat::zeros(n, k);
                for i in 0..n {
                    for j in 0..k {
                        m.set(i, j, rng.uniform_in(-scale, *scale));
                    }
                }
                m
            }
            InitSpec::Zero => Mat::zeros(n, k),
            InitSpec::Explicit(m) => {
                assert_eq!((m.rows(), m.cols()), (n, k), "explicit init shape");
                m.clone()
            }
        }
    }

    /// Exact `E‖⟨θ⟩₀ − target‖²` for π-weighted initial averages:
    /// `‖E⟨θ⟩₀ − target‖² + K·Var_per_entry·Σᵢ πᵢ²`.
    pub fn initial_average_mse(&self, pi: &[f64], target: &[f64]) -> f64 {
        let pi_sq: f64 = pi.iter().map(|p| p * p).sum();
        match self {
            InitSpec::Uniform { scale } => {
                let var = scale * scale / 3.0;
                vec_ops::dot(target, target) + target.len() as f64 * var * pi_sq
            }
            InitSpec::Zero => vec_ops::dot(target, target),
            InitSpec::Explicit(m) => {
                let k = m.cols();
                let mut avg = vec![0.0; k];
                for i in 0..m.rows() {
                    for c in 0..k {
                        avg[c] += pi[i] * m.at(i, c);
                    }
                }
                let d = vec_ops::dist2(&avg, target);
                d * d
            }
        }
    }
}

/// Full run specification; the trajectory it produces is a pure function of
/// `(spec, seed)`.
#[derive(Debug, Clone)]
pub struct RunSpec<'a> {
    pub engine: EngineKind,
    pub weights: &'a WeightSchedule,
    pub noise: &'a NoiseModel,
    pub steps: &'a StepSchedule,
    pub horizon: u64,
    /// Record every `stride`-th step (plus `t = 0` and `t = horizon`).
    pub record_stride: u64,
    /// Record every step while `t < dense_until` (identity audits and bound
    /// anchors need unstrided windows).
    pub dense_until: u64,
    /// Push engine: keep per-step `μ_t` and `⟨θ̃⟩_t` for `t < mu_dense_until`
    /// (the anchor-time search needs them unstrided).
    pub mu_dense_until: u64,
    pub init: InitSpec,
}

/// Recorded snapshots of one trial.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub engine: EngineKind,
    pub seed: u64,
    pub times: Vec<u64>,
    pub theta: Vec<Mat>,
    /// Mass vectors per snapshot (push engine only).
    pub y: Option<Vec<Vec<f64>>>,
    /// Numerator blocks per snapshot (push engine only).
    pub theta_tilde: Option<Vec<Mat>>,
    /// Noise state at each recorded time.
    pub noise_states: Vec<usize>,
    /// Full noise path `X_0 … X_{horizon}`.
    pub noise_path: Vec<usize>,
    /// Push engine: `μ_t = ‖A(X_t)(⟨θ⟩_t − ⟨θ̃⟩_t)‖₂` at each recorded time.
    pub mu_at: Option<Vec<f64>>,
    /// Push engine: `Σ_{k=0}^{t} μ_k` at each recorded time (every step
    /// accumulates, so window sums between recorded times are exact).
    pub mu_cumsum: Option<Vec<f64>>,
    /// Push engine: per-step `μ_t` for `t < mu_dense_until`.
    pub mu_dense: Option<Vec<f64>>,
    /// Push engine: per-step `⟨θ̃⟩_t` for `t < mu_dense_until`.
    pub avg_tilde_dense: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn snapshot_index(&self, t: u64) -> Option<usize> {
        self.times.binary_search(&t).ok()
    }
}

/// Per-step residuals of the exact recursion identities, accumulated while
/// the run advances (stride-independent).
#[derive(Debug, Clone, Default)]
pub struct RunAudit {
    /// `⟨θ⟩_{t+1} = ⟨θ⟩_t + α_t A(X_t)⟨θ⟩_t + α_t B(X_t)ᵀπ_{t+1}` residual
    /// (consensus engine, needs the π series).
    pub weighted_average_residual: f64,
    /// `⟨θ̃⟩_{t+1} = ⟨θ̃⟩_t + α_t A(X_t)⟨θ⟩_t + (α_t/N)Σᵢ bⁱ(X_t)` residual
    /// (push engine).
    pub push_average_residual: f64,
    /// `|Σᵢ y_tⁱ − N|` maximum over the run (push engine).
    pub mass_conservation_residual: f64,
    /// `max_i |θ_tⁱ − θ̃_tⁱ/y_tⁱ|` maximum over the run (push engine).
    pub ratio_residual: f64,
    /// `sup_t ‖Θ_t‖_F` over every step of the run (push engine).
    pub theta_frobenius_sup: f64,
}

/// Run a trajectory. `pi` supplies `π_t` for the weighted-average audit; it
/// may be shorter than the horizon (audit covers the overlap).
pub fn run(
    spec: &RunSpec<'_>,
    seed: u64,
    pi: Option<&[Vec<f64>]>,
) -> Result<(Trajectory, RunAudit), EngineError> {
    let n = spec.weights.n_agents();
    let k = spec.noise.dim();
    if spec.noise.n_agents() != n {
        return Err(EngineError::Dimension {
            what: "noise agents",
            expected: n,
            got: spec.noise.n_agents(),
        });
    }
    let want = spec.engine.required_orientation();
    if spec.weights.orientation() != want {
        return Err(EngineError::WrongOrientation { expected: want });
    }

    let init_seed = derive_seed(seed, STREAM_INIT, 0);
    let path_seed = derive_seed(seed, STREAM_PATH, 0);
    let noise_path = spec.noise.chain().sample_path(spec.horizon, path_seed);
    let theta0 = spec.init.materialize(n, k, init_seed);

    let stride = spec.record_stride.max(1);
    let should_record =
        |t: u64| t == 0 || t == spec.horizon || t < spec.dense_until || t.is_multiple_of(stride);

    let mut traj = Trajectory {
        engine: spec.engine,
        seed,
        times: Vec::new(),
        theta: Vec::new(),
        y: if spec.engine == EngineKind::Push {
            Some(Vec::new())
        } else {
            None
        },
        theta_tilde: if spec.engine == EngineKind::Push {
            Some(Vec::new())
        } else {
            None
        },
        noise_states: Vec::new(),
        noise_path: noise_path.clone(),
        mu_at: if spec.engine == EngineKind::Push {
            Some(Vec::new())
        } else {
            None
        },
        mu_cumsum: if spec.engine == EngineKind::Push {
            Some(Vec::new())
        } else {
            None
        },
        mu_dense: if spec.engine == EngineKind::Push {
            Some(Vec::new())
        } else {
            None
        },
        avg_tilde_dense: if spec.engine == EngineKind::Push {
            Some(Vec::new())
        } else {
            None
        },
    };
    let mut audit = RunAudit::default();

    match spec.engine {
        EngineKind::Consensus | EngineKind::Kushner => {
            let mut state = AgentStates { theta: theta0 };
            for t in 0..=spec.horizon {
                if should_record(t) {
                    traj.times.push(t);
                    traj.theta.push(state.theta.clone());
                    traj.noise_states.push(noise_path[t as usize]);
                }
                if t == spec.horizon {
                    break;
                }
                let x = noise_path[t as usize];
                let w = spec.weights.weight_at(t);
                let a = spec.noise.a_of(x);
                let b = spec.noise.b_of(x);
                let alpha = spec.steps.alpha(t);
                let next = match spec.engine {
                    EngineKind::Consensus => consensus_sa_step(&state, w.mat(), a, b, alpha),
                    _ => kushner_variant_step(&state, w.mat(), a, b, alpha),
                };
                if !next.theta.is_finite() || next.max_row_norm() > DIVERGENCE_GUARD {
                    return Err(EngineError::Diverged {
                        t: t + 1,
                        norm: next.max_row_norm(),
                    });
                }
                if spec.engine == EngineKind::Consensus {
                    if let Some(pis) = pi {
                        if (t + 1) < pis.len() as u64 {
                            let avg_t = state.theta.vecmat(&pis[t as usize]);
                            let avg_next = next.theta.vecmat(&pis[(t + 1) as usize]);
                            let drift = a.matvec(&avg_t);
                            let b_pi = b.transpose().matvec(&pis[(t + 1) as usize]);
                            let mut residual = 0.0f64;
                            for c in 0..k {
                                let predicted = avg_t[c] + alpha * (drift[c] + b_pi[c]);
                                residual = residual.max(math::abs(avg_next[c] - predicted));
                            }
                            audit.weighted_average_residual =
                                audit.weighted_average_residual.max(residual);
                        }
                    }
                }
                state = next;
            }
        }
        EngineKind::Push => {
            let mut state = PushState::from_tilde(theta0);
            let mut mu_running = 0.0f64;
            for t in 0..=spec.horizon {
                let mass_gap = math::abs(vec_ops::sum(&state.y) - n as f64);
                audit.mass_conservation_residual = audit.mass_conservation_residual.max(mass_gap);
                audit.theta_frobenius_sup =
                    audit.theta_frobenius_sup.max(state.theta.frobenius_norm());
                for i in 0..n {
                    for c in 0..k {
                        let gap = math::abs(
                            state.theta.at(i, c) - state.theta_tilde.at(i, c) / state.y[i],
                        );
                        audit.ratio_residual = audit.ratio_residual.max(gap);
                    }
                }
                let inv_n = 1.0 / n as f64;
                let avg_tilde: Vec<f64> = (0..k)
                    .map(|c| (0..n).map(|i| state.theta_tilde.at(i, c)).sum::<f64>() * inv_n)
                    .collect();
                let mu_t = {
                    let mut diff = vec![0.0; k];
                    for c in 0..k {
                        for i in 0..n {
                            diff[c] += state.theta.at(i, c) * inv_n;
                        }
                        diff[c] -= avg_tilde[c];
                    }
                    vec_ops::norm2(&spec.noise.a_of(noise_path[t as usize]).matvec(&diff))
                };
                mu_running += mu_t;
                if t < spec.mu_dense_until {
                    traj.mu_dense.as_mut().unwrap().push(mu_t);
                    traj.avg_tilde_dense
                        .as_mut()
                        .unwrap()
                        .push(avg_tilde.clone());
                }
                if should_record(t) {
                    traj.times.push(t);
                    traj.theta.push(state.theta.clone());
                    traj.y.as_mut().unwrap().push(state.y.clone());
                    traj.theta_tilde
                        .as_mut()
                        .unwrap()
                        .push(state.theta_tilde.clone());
                    traj.noise_states.push(noise_path[t as usize]);
                    traj.mu_at.as_mut().unwrap().push(mu_t);
                    traj.mu_cumsum.as_mut().unwrap().push(mu_running);
                }
                if t == spec.horizon {
                    break;
                }
                let x = noise_path[t as usize];
                let hat_w = spec.weights.weight_at(t);
                let a = spec.noise.a_of(x);
                let b = spec.noise.b_of(x);
                let alpha = spec.steps.alpha(t);
                let next = push_sa_step(&state, hat_w.mat(), a, b, alpha);
                if !next.theta.is_finite() || next.max_row_norm() > DIVERGENCE_GUARD {
                    return Err(EngineError::Diverged {
                        t: t + 1,
                        norm: next.max_row_norm(),
                    });
                }
                // ⟨θ̃⟩ recursion audit
                {
                    let inv_n = 1.0 / n as f64;
                    let mut residual = 0.0f64;
                    for c in 0..k {
                        let avg_tilde_t: f64 =
                            (0..n).map(|i| state.theta_tilde.at(i, c)).sum::<f64>() * inv_n;
                        let avg_tilde_next: f64 =
                            (0..n).map(|i| next.theta_tilde.at(i, c)).sum::<f64>() * inv_n;
                        let avg_theta_t: Vec<f64> = (0..k)
                            .map(|cc| (0..n).map(|i| state.theta.at(i, cc)).sum::<f64>() * inv_n)
                            .collect();
                        let drift = vec_ops::dot(a.row(c), &avg_theta_t);
                        let b_avg: f64 = (0..n).map(|i| b.at(i, c)).sum::<f64>() * inv_n;
                        let predicted = avg_tilde_t + alpha * (drift + b_avg);
                        residual = residual.max(math::abs(avg_tilde_next - predicted));
                    }
                    audit.push_average_residual = audit.push_average_residual.max(residual);
                }
                state = next;
            }
        }
    }
    Ok((traj, audit))
}
