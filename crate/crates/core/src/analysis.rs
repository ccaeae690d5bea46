//! Equilibrium targets, Lyapunov quantities, the finite-time bound constant
//! ledger, bound right-hand sides, and empirical error metrics.
//!
//! The constant ledger follows the displayed formulas exactly; nothing is
//! tightened or simplified. A handful of quantities are inherently
//! empirical — the almost-sure state bound of the push iteration, the
//! weighted average errors anchoring two of the constants — and are flagged
//! as such by the harness rather than silently treated as exact.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::Trajectory;
use crate::linalg::{self, vec_ops, LinalgError, Mat};
use crate::math;
use crate::noise::MixingProfile;

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    Linalg(LinalgError),
    ResidualTooLarge {
        what: &'static str,
        residual: f64,
    },
    NotPositiveDefinite {
        gamma_min: f64,
    },
    /// Step size outside the feasible range of the fixed-step bound.
    AlphaInfeasible {
        alpha: f64,
        cap: f64,
    },
    /// `α₀` below the floor required by the time-varying bounds.
    Alpha0TooSmall {
        alpha0: f64,
        floor: f64,
    },
    /// A `T` search exhausted its cap; names the violated condition.
    ConstantsNotAttainable {
        condition: &'static str,
        cap: u64,
    },
    /// Bound queried before its anchor time.
    DomainTimeTooSmall {
        t: u64,
        needed: u64,
    },
    SeriesMismatch {
        what: &'static str,
    },
    NoTrials,
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::Linalg(e) => write!(f, "linear algebra failure: {e}"),
            AnalysisError::ResidualTooLarge { what, residual } => {
                write!(f, "{what} residual {residual:e} above tolerance")
            }
            AnalysisError::NotPositiveDefinite { gamma_min } => {
                write!(
                    f,
                    "Lyapunov solution not positive definite (min eigenvalue {gamma_min})"
                )
            }
            AnalysisError::AlphaInfeasible { alpha, cap } => {
                write!(f, "step size {alpha} outside feasible range (0, {cap})")
            }
            AnalysisError::Alpha0TooSmall { alpha0, floor } => {
                write!(f, "alpha0 = {alpha0} below required floor {floor}")
            }
            AnalysisError::ConstantsNotAttainable { condition, cap } => {
                write!(
                    f,
                    "constants not attainable on this horizon (cap {cap}): {condition}"
                )
            }
            AnalysisError::DomainTimeTooSmall { t, needed } => {
                write!(f, "bound undefined at t = {t}; needs t >= {needed}")
            }
            AnalysisError::SeriesMismatch { what } => write!(f, "series mismatch: {what}"),
            AnalysisError::NoTrials => write!(f, "no trajectories supplied"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AnalysisError {}

impl From<LinalgError> for AnalysisError {
    fn from(e: LinalgError) -> Self {
        AnalysisError::Linalg(e)
    }
}

// ---------------------------------------------------------------------------
// Lyapunov and equilibrium
// ---------------------------------------------------------------------------

pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-10;

/// Symmetric positive definite `P` with `AᵀP + PA = −I`, and its extreme
/// eigenvalues.
#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub p: Mat,
    pub gamma_max: f64,
    pub gamma_min: f64,
}

/// Solve `AᵀP + PA = −I` through the linear system over the `K(K+1)/2`
/// independent entries of the symmetric `P`.
pub fn solve_lyapunov(a: &Mat) -> Result<LyapunovSolution, AnalysisError> {
    let k = a.rows();
    assert_eq!(k, a.cols());
    let unknowns = k * (k + 1) / 2;
    let idx = |r: usize, s: usize| -> usize {
        let (r, s) = if r <= s { (r, s) } else { (s, r) };
        r * k - r * (r + 1) / 2 + s
    };
    let mut system = Mat::zeros(unknowns, unknowns);
    let mut rhs = vec![0.0; unknowns];
    for r in 0..k {
        for s in r..k {
            let eq = idx(r, s);
            // (AᵀP + PA)[r][s] = Σ_m A[m][r]·P[m][s] + Σ_m P[r][m]·A[m][s]
            for m in 0..k {
                system.add_at(eq, idx(m, s), a.at(m, r));
                system.add_at(eq, idx(r, m), a.at(m, s));
            }
            rhs[eq] = if r == s { -1.0 } else { 0.0 };
        }
    }
    let sol = linalg::solve(&system, &rhs)?;
    let mut p = Mat::zeros(k, k);
    for r in 0..k {
        for s in r..k {
            p.set(r, s, sol[idx(r, s)]);
            p.set(s, r, sol[idx(r, s)]);
        }
    }
    let residual = a
        .transpose()
        .matmul(&p)
        .add(&p.matmul(a))
        .add(&Mat::eye(k))
        .frobenius_norm();
    if residual > LYAPUNOV_RESIDUAL_TOL {
        return Err(AnalysisError::ResidualTooLarge {
            what: "Lyapunov equation",
            residual,
        });
    }
    let eigs = linalg::sym_eigenvalues(&p);
    let gamma_min = eigs[0];
    let gamma_max = eigs[eigs.len() - 1];
    if gamma_min <= 0.0 {
        return Err(AnalysisError::NotPositiveDefinite { gamma_min });
    }
    Ok(LyapunovSolution {
        p,
        gamma_max,
        gamma_min,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    /// Convex combination by the detected APS limit.
    PiInfinity(Vec<f64>),
    /// Straight average (push target).
    Uniform,
}

/// Equilibrium of `θ̇ = Aθ + b` with `b` the weighted combination of the
/// per-agent drifts.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub theta_star: Vec<f64>,
    pub b_effective: Vec<f64>,
    pub weighting: Weighting,
}

pub fn solve_equilibrium(
    a: &Mat,
    b_list: &[Vec<f64>],
    weighting: Weighting,
) -> Result<Equilibrium, AnalysisError> {
    let k = a.rows();
    let n = b_list.len();
    assert!(n > 0);
    let mut b_eff = vec![0.0; k];
    match &weighting {
        Weighting::PiInfinity(pi) => {
            assert_eq!(pi.len(), n);
            for (i, b) in b_list.iter().enumerate() {
                for c in 0..k {
                    b_eff[c] += pi[i] * b[c];
                }
            }
        }
        Weighting::Uniform => {
            for b in b_list {
                for c in 0..k {
                    b_eff[c] += b[c] / n as f64;
                }
            }
        }
    }
    let neg_b: Vec<f64> = b_eff.iter().map(|v| -v).collect();
    let theta_star = linalg::solve(a, &neg_b)?;
    let check = a.matvec(&theta_star);
    let residual = vec_ops::norm2(&vec_ops::sub(&check, &neg_b));
    if residual > EQUILIBRIUM_RESIDUAL_TOL {
        return Err(AnalysisError::ResidualTooLarge {
            what: "equilibrium",
            residual,
        });
    }
    Ok(Equilibrium {
        theta_star,
        b_effective: b_eff,
        weighting,
    })
}

// ---------------------------------------------------------------------------
// Instance parameters and the epsilon/zeta ledger
// ---------------------------------------------------------------------------

/// Scalar inputs every bound constant is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceParams {
    pub n_agents: usize,
    pub dim: usize,
    pub a_max: f64,
    pub b_max: f64,
    pub pi_min: f64,
    pub beta: f64,
    /// Uniform strong connectivity window `L`.
    pub window: usize,
    pub delta_max: usize,
    pub gamma_max: f64,
    pub gamma_min: f64,
    pub theta_star_norm: f64,
}

impl InstanceParams {
    fn gamma_ratio(&self) -> f64 {
        self.gamma_max / self.gamma_min
    }
}

/// The contraction controller of the consensus-error recursion:
/// `ε(α) = (1 + 2b/A − πβ^{2L}/(2δ))(1 + αA)^{2L} − (2b/A)(1 + αA)^{L}`.
/// Monotone increasing in `α` with `ε(0) ∈ (0, 1)`.
pub fn epsilon_of_alpha(alpha: f64, p: &InstanceParams) -> f64 {
    let a = p.a_max;
    let b = p.b_max;
    let l = p.window as i32;
    let shrink = p.pi_min * math::powi(p.beta, 2 * l) / (2.0 * p.delta_max as f64);
    let grow = math::powi(1.0 + alpha * a, l);
    (1.0 + 2.0 * b / a - shrink) * grow * grow - (2.0 * b / a) * grow
}

/// `ζ₁`: the unique `α` with `ε(α) = 1`, found by bisection.
pub fn zeta1(p: &InstanceParams) -> f64 {
    let mut hi = 1e-6;
    while epsilon_of_alpha(hi, p) < 1.0 {
        hi *= 2.0;
        assert!(hi < 1e12, "epsilon never crosses 1");
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let e = epsilon_of_alpha(mid, p);
        if math::abs(e - 1.0) <= 1e-13 {
            return mid;
        }
        if e < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The nine auxiliary constants. `ζ₃` and the mixing-dependent pieces use
/// `τ(α)` at the fixed feasible step; `ζ₈`/`ζ₉` additionally use the push
/// disturbance ceiling `μ_max` (zero for consensus instances).
#[derive(Debug, Clone, PartialEq)]
pub struct Zetas {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    pub z4: f64,
    pub z5: f64,
    pub z6: f64,
    pub z7: f64,
    pub z8: f64,
    pub z9: f64,
}

pub fn compute_zetas(p: &InstanceParams, alpha: f64, tau_alpha: u64, mu_max: f64) -> Zetas {
    let a = p.a_max;
    let b = p.b_max;
    let l = p.window as i32;
    let n = p.n_agents as f64;
    let ts = p.theta_star_norm;
    let tau = tau_alpha as f64;
    let g = 1.0 + alpha * a; // (1 + αA_max)
    let gl = math::powi(g, l);

    let z1 = zeta1(p);
    let z2 = 4.0 * b * b / (a * a) * (gl - 1.0) * (gl - 1.0) + 2.0 * b * (gl - 1.0) / a * gl;
    let z3 = (144.0 + 4.0 * a * a + 912.0 * tau * a * a + 168.0 * tau * a * b) * ts * ts
        + tau
            * a
            * a
            * (152.0 * (b / a + ts) * (b / a + ts)
                + 48.0 * b / a * (b / a + 1.0) * (b / a + 1.0)
                + 87.0 * b * b / (a * a)
                + 12.0 * b / a)
        + 2.0
        + 2.0 * b * b
        + 4.0 * ts * ts
        + 48.0 * b * b / (a * a);
    let z4 = math::sqrt(n) * b * (2.0 + 12.0 * b * b / (a * a) + 38.0 * ts * ts);
    let z5 = 144.0 + 916.0 * a * a + 168.0 * a * b;
    let z6 = 4.0 * b * b * alpha * (l as f64) * (l as f64) * math::powi(g, 2 * l - 2)
        + 2.0 * b * (l as f64) * math::powi(g, 2 * l - 1);
    let z7 = (148.0 + 916.0 * a * a + 168.0 * a * b) * ts * ts
        + 2.0
        + 48.0 * b * b / (a * a)
        + 152.0 * (b + a * ts) * (b + a * ts)
        + 89.0 * b * b
        + 12.0 * a * b
        + 48.0 * a * b * (b / a + 1.0) * (b / a + 1.0);
    let z8 = 144.0 + 916.0 * a * a + 168.0 * a * b + 144.0 * a * mu_max;
    let bm = b + mu_max;
    let z9 = 2.0
        + (4.0 + z8) * ts * ts
        + 48.0 * bm * bm / (a * a)
        + 152.0 * (bm + a * ts) * (bm + a * ts)
        + 12.0 * a * b
        + 48.0 * a * bm * (bm / a + 1.0) * (bm / a + 1.0)
        + 89.0 * bm * bm;

    Zetas {
        z1,
        z2,
        z3,
        z4,
        z5,
        z6,
        z7,
        z8,
        z9,
    }
}

/// `K₂ = 144 + 4A² + 912 τ(α) A² + 168 τ(α) A b`.
pub fn k2_constant(p: &InstanceParams, tau_alpha: u64) -> f64 {
    let a = p.a_max;
    let tau = tau_alpha as f64;
    144.0 + 4.0 * a * a + 912.0 * tau * a * a + 168.0 * tau * a * p.b_max
}

/// The three caps whose minimum bounds the feasible fixed step.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityCheck {
    pub k1: f64,
    pub mixing_cap: f64,
    pub variance_cap: f64,
    pub alpha_feasible_max: f64,
    pub feasible: bool,
}

/// Certify `0 < α < min{K₁, log2/(A·τ(α)), 0.1/(K₂·γ_max)}` with `τ` and
/// `K₂` evaluated at this `α`.
pub fn check_alpha_feasibility(alpha: f64, p: &InstanceParams, tau_alpha: u64) -> FeasibilityCheck {
    let k1 = zeta1(p).min(p.gamma_max / 0.9);
    let tau = tau_alpha as f64;
    let mixing_cap = if tau == 0.0 {
        f64::INFINITY
    } else {
        math::ln(2.0) / (p.a_max * tau)
    };
    let variance_cap = 0.1 / (k2_constant(p, tau_alpha) * p.gamma_max);
    let cap = k1.min(mixing_cap).min(variance_cap);
    FeasibilityCheck {
        k1,
        mixing_cap,
        variance_cap,
        alpha_feasible_max: cap,
        feasible: alpha > 0.0 && alpha < cap,
    }
}

/// A feasible fixed step by damped iteration on the self-referential cap
/// (`τ(α)` grows only logarithmically as `α` shrinks, so this settles fast).
pub fn suggest_feasible_alpha(
    p: &InstanceParams,
    profile: &MixingProfile,
    safety: f64,
) -> Result<f64, AnalysisError> {
    assert!(safety > 0.0 && safety < 1.0);
    let mut alpha = zeta1(p).min(p.gamma_max / 0.9) * safety;
    for _ in 0..200 {
        let floor = profile.certified_min_alpha();
        let tau = profile.tau(alpha.max(floor));
        let check = check_alpha_feasibility(alpha, p, tau);
        let next = check.alpha_feasible_max * safety;
        if math::abs(next - alpha) <= 1e-15 + 1e-9 * alpha {
            let tau_final = profile.tau(next.max(floor));
            let final_check = check_alpha_feasibility(next, p, tau_final);
            if final_check.feasible {
                return Ok(next);
            }
        }
        alpha = next;
    }
    Err(AnalysisError::ConstantsNotAttainable {
        condition: "feasible alpha iteration did not settle",
        cap: 200,
    })
}

// ---------------------------------------------------------------------------
// Eta series with tail extension
// ---------------------------------------------------------------------------

/// `η_t = ‖π_t − π_∞‖₂` with an explicit tail rule for `t` beyond the
/// computed range. The tail value must be certified small by the caller for
/// the extension to be exact (eventually-fixed schedules reach it exactly).
#[derive(Debug, Clone)]
pub struct EtaSeries {
    values: Vec<f64>,
    tail: f64,
    prefix: Vec<f64>,
}

impl EtaSeries {
    pub fn new(values: Vec<f64>, tail: f64) -> Self {
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &v in &values {
            acc += v;
            prefix.push(acc);
        }
        EtaSeries {
            values,
            tail,
            prefix,
        }
    }

    pub fn zero() -> Self {
        EtaSeries::new(vec![0.0], 0.0)
    }

    pub fn get(&self, t: u64) -> f64 {
        if (t as usize) < self.values.len() {
            self.values[t as usize]
        } else {
            self.tail
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// `Σ_{k=lo}^{hi} η_k` inclusive.
    pub fn sum_range(&self, lo: u64, hi: u64) -> f64 {
        assert!(lo <= hi);
        let cum = |t: u64| -> f64 {
            // sum of η_0..η_t inclusive
            let len = self.values.len() as u64;
            if t < len {
                self.prefix[(t + 1) as usize]
            } else {
                self.prefix[self.values.len()] + (t - len + 1) as f64 * self.tail
            }
        };
        if lo == 0 {
            cum(hi)
        } else {
            cum(hi) - cum(lo - 1)
        }
    }
}

// ---------------------------------------------------------------------------
// T searches
// ---------------------------------------------------------------------------

/// Pointwise condition defining `T₁`: `t ≥ τ(α)` and
/// `36√N b_max η_{t+1} γ_max + K₂ α γ_max ≤ 0.1`.
pub fn t1_condition_holds_at(
    p: &InstanceParams,
    alpha: f64,
    tau_alpha: u64,
    eta: &EtaSeries,
    t: u64,
) -> bool {
    if t < tau_alpha {
        return false;
    }
    let k2 = k2_constant(p, tau_alpha);
    36.0 * math::sqrt(p.n_agents as f64) * p.b_max * eta.get(t + 1) * p.gamma_max
        + k2 * alpha * p.gamma_max
        <= 0.1
}

/// Smallest positive `T₁` whose condition holds at every `t ∈ [T₁, cap]`.
pub fn search_t1(
    p: &InstanceParams,
    alpha: f64,
    tau_alpha: u64,
    eta: &EtaSeries,
    cap: u64,
) -> Result<u64, AnalysisError> {
    if k2_constant(p, tau_alpha) * alpha * p.gamma_max >= 0.1 {
        return Err(AnalysisError::ConstantsNotAttainable {
            condition: "K2·α·γ_max ≥ 0.1 (α too large for T1 to exist)",
            cap,
        });
    }
    let mut last_violation: Option<u64> = None;
    for t in 1..=cap {
        if !t1_condition_holds_at(p, alpha, tau_alpha, eta, t) {
            last_violation = Some(t);
        }
    }
    let t1 = last_violation.map_or(1, |v| v + 1);
    if t1 > cap {
        return Err(AnalysisError::ConstantsNotAttainable {
            condition: "eta did not settle below the T1 threshold",
            cap,
        });
    }
    Ok(t1)
}

/// Pointwise condition defining `T₂` (checked at actual times `t ≥ L·T₂`):
/// `α_t ≤ α`, `2τ(α_t) ≤ t`,
/// `τ(α_t)·α_{t−τ(α_t)} ≤ min{log2/A_max, 0.1/(ζ₅ γ_max)}`, and
/// `ζ₅ α_{t−τ(α_t)} τ(α_t) γ_max + 36√N b_max η_{t+1} γ_max ≤ 0.1`.
pub fn t2_condition_holds_at(
    p: &InstanceParams,
    alpha: f64,
    alpha0: f64,
    zeta5: f64,
    profile: &MixingProfile,
    eta: &EtaSeries,
    t: u64,
) -> bool {
    let alpha_t = alpha0 / (t as f64 + 1.0);
    if alpha_t > alpha {
        return false;
    }
    let tau_t = profile.tau(alpha_t.max(profile.certified_min_alpha()));
    if 2 * tau_t > t {
        return false;
    }
    let alpha_lag = alpha0 / ((t - tau_t) as f64 + 1.0);
    let product = tau_t as f64 * alpha_lag;
    let cap = (math::ln(2.0) / p.a_max).min(0.1 / (zeta5 * p.gamma_max));
    if product > cap {
        return false;
    }
    zeta5 * alpha_lag * tau_t as f64 * p.gamma_max
        + 36.0 * math::sqrt(p.n_agents as f64) * p.b_max * eta.get(t + 1) * p.gamma_max
        <= 0.1
}

/// Smallest positive `T₂` whose condition holds at every `t ∈ [L·T₂, cap]`.
pub fn search_t2(
    p: &InstanceParams,
    alpha: f64,
    alpha0: f64,
    zeta5: f64,
    profile: &MixingProfile,
    eta: &EtaSeries,
    cap: u64,
) -> Result<u64, AnalysisError> {
    let l = p.window as u64;
    let mut last_violation: Option<u64> = None;
    for t in 1..=cap {
        if !t2_condition_holds_at(p, alpha, alpha0, zeta5, profile, eta, t) {
            last_violation = Some(t);
        }
    }
    let t2 = last_violation.map_or(1, |v| v / l + 1).max(1);
    if t2 * l > cap {
        return Err(AnalysisError::ConstantsNotAttainable {
            condition: "step/mixing product never settled below the T2 threshold",
            cap,
        });
    }
    Ok(t2)
}

/// Pointwise condition defining `T̄`: `2τ(α_t) ≤ t`,
/// `μ_t + τ(α_t)·α_{t−τ(α_t)}·ζ₈ ≤ 0.1/γ_max`, and
/// `τ(α_t)·α_{t−τ(α_t)} ≤ min{log2/A_max, 0.1/(ζ₈ γ_max)}`.
pub fn t_bar_condition_holds_at(
    p: &InstanceParams,
    alpha0: f64,
    zeta8: f64,
    profile: &MixingProfile,
    mu_dense: &[f64],
    t: u64,
) -> bool {
    let alpha_t = alpha0 / (t as f64 + 1.0);
    let tau_t = profile.tau(alpha_t.max(profile.certified_min_alpha()));
    if 2 * tau_t > t {
        return false;
    }
    let alpha_lag = alpha0 / ((t - tau_t) as f64 + 1.0);
    let product = tau_t as f64 * alpha_lag;
    if product > (math::ln(2.0) / p.a_max).min(0.1 / (zeta8 * p.gamma_max)) {
        return false;
    }
    let mu_t = mu_dense.get(t as usize).copied().unwrap_or(f64::INFINITY);
    mu_t + product * zeta8 <= 0.1 / p.gamma_max
}

/// Smallest positive `T̄` whose condition holds at every `t ∈ [T̄, cap]`.
pub fn search_t_bar(
    p: &InstanceParams,
    alpha0: f64,
    zeta8: f64,
    profile: &MixingProfile,
    mu_dense: &[f64],
    cap: u64,
) -> Result<u64, AnalysisError> {
    let cap = cap.min(mu_dense.len().saturating_sub(1) as u64);
    let mut last_violation: Option<u64> = None;
    for t in 1..=cap {
        if !t_bar_condition_holds_at(p, alpha0, zeta8, profile, mu_dense, t) {
            last_violation = Some(t);
        }
    }
    let t_bar = last_violation.map_or(1, |v| v + 1);
    if t_bar > cap {
        return Err(AnalysisError::ConstantsNotAttainable {
            condition: "mu/step product never settled below the T-bar threshold",
            cap,
        });
    }
    Ok(t_bar)
}

// ---------------------------------------------------------------------------
// Assembled constants
// ---------------------------------------------------------------------------

/// Everything the consensus-regime bounds need, for both step regimes.
#[derive(Debug, Clone)]
pub struct ConsensusConstants {
    pub alpha: f64,
    pub alpha0: f64,
    pub tau_alpha: u64,
    pub epsilon: f64,
    /// `1 − 0.9α/γ_max`.
    pub contraction: f64,
    pub zetas: Zetas,
    pub k1: f64,
    pub k2: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    /// Time-varying case only (anchored at `L·T₂`).
    pub c6: Option<f64>,
    pub t1: u64,
    /// Time-varying case only.
    pub t2: Option<u64>,
}

/// Inputs that come from outside the formula ledger.
#[derive(Debug, Clone)]
pub struct ConsensusAnchors {
    /// `E‖⟨θ⟩₀ − θ*‖²` (exact for the built-in initializers).
    pub initial_avg_mse: f64,
    /// `(T₂, E‖⟨θ⟩_{L·T₂} − θ*‖²)` for the time-varying case (the anchor is
    /// empirical; the harness flags it).
    pub t2_and_anchor: Option<(u64, f64)>,
    /// Geometric mixing-rate constant `C`.
    pub rate_c: f64,
}

pub fn consensus_constants(
    p: &InstanceParams,
    alpha: f64,
    alpha0: f64,
    profile: &MixingProfile,
    eta: &EtaSeries,
    anchors: &ConsensusAnchors,
    search_cap: u64,
) -> Result<ConsensusConstants, AnalysisError> {
    let tau_alpha = profile.tau(alpha.max(profile.certified_min_alpha()));
    let feas = check_alpha_feasibility(alpha, p, tau_alpha);
    if !feas.feasible {
        return Err(AnalysisError::AlphaInfeasible {
            alpha,
            cap: feas.alpha_feasible_max,
        });
    }
    let floor = p.gamma_max / 0.9;
    if alpha0 < floor {
        return Err(AnalysisError::Alpha0TooSmall { alpha0, floor });
    }
    let zetas = compute_zetas(p, alpha, tau_alpha, 0.0);
    let epsilon = epsilon_of_alpha(alpha, p);
    let contraction = 1.0 - 0.9 * alpha / p.gamma_max;
    let k1 = zetas.z1.min(p.gamma_max / 0.9);
    let k2 = k2_constant(p, tau_alpha);
    let t1 = search_t1(p, alpha, tau_alpha, eta, search_cap)?;
    let r = p.gamma_ratio();
    let exp_t1 = math::exp(2.0 * alpha * p.a_max * t1 as f64);
    let offset = p.theta_star_norm + p.b_max / p.a_max;
    let c1 =
        r * (8.0 * exp_t1 + 4.0) * anchors.initial_avg_mse + 8.0 * r * exp_t1 * offset * offset;
    let c2 = 2.0 * zetas.z2 / (1.0 - epsilon) + r * 2.0 * alpha * zetas.z3 * p.gamma_max / 0.9;
    let c3 = 2.0 * zetas.z6 / (1.0 - epsilon);
    let c4 = 2.0 * zetas.z7 * alpha0 * anchors.rate_c * r;
    let c5 = 2.0 * alpha0 * zetas.z4 * r;
    let (t2, c6) = match anchors.t2_and_anchor {
        Some((t2, anchor)) => (
            Some(t2),
            Some(2.0 * (p.window as u64 * t2) as f64 * r * anchor),
        ),
        None => (None, None),
    };
    Ok(ConsensusConstants {
        alpha,
        alpha0,
        tau_alpha,
        epsilon,
        contraction,
        zetas,
        k1,
        k2,
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
        t1,
        t2,
    })
}

/// Constants of the push-regime bound.
#[derive(Debug, Clone)]
pub struct PushConstants {
    pub alpha0: f64,
    pub epsilon1: f64,
    /// The conservative `ε̄` evaluation point `(1 − 1/N^{NL})^{1/L}`.
    pub epsilon_bar: f64,
    /// Empirical sup-norm bound on the push states, safety factor included.
    pub c_theta: f64,
    pub mu_max: f64,
    pub zeta8: f64,
    pub zeta9: f64,
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
    pub c10: f64,
    pub c11: f64,
    pub c12: f64,
    pub t_bar: u64,
}

#[derive(Debug, Clone)]
pub struct PushAnchors {
    /// `E‖Σᵢ (θ̃₀ⁱ + α₀ A(X₀) θ̃₀ⁱ + α₀ bⁱ(X₀))‖₂` (empirical mean).
    pub c7_expectation: f64,
    /// `E‖⟨θ̃⟩_T̄ − θ*‖²` (empirical).
    pub anchor_avg_tilde_mse: f64,
    /// Empirical `sup_t ‖Θ_t‖_F` before the safety factor.
    pub theta_sup: f64,
    pub rate_c: f64,
}

/// Safety factor applied to the empirical push-state bound; the underlying
/// result proves existence of the bound, not a value.
pub const C_THETA_SAFETY: f64 = 1.1;

pub fn push_constants(
    p: &InstanceParams,
    alpha0: f64,
    epsilon1: f64,
    profile: &MixingProfile,
    mu_dense: &[f64],
    anchors: &PushAnchors,
    search_cap: u64,
) -> Result<PushConstants, AnalysisError> {
    let floor = p.gamma_max / 0.9;
    if alpha0 < floor {
        return Err(AnalysisError::Alpha0TooSmall { alpha0, floor });
    }
    let n = p.n_agents as f64;
    let c_theta = anchors.theta_sup * C_THETA_SAFETY;
    let mu_max = (n + 1.0) * p.a_max * c_theta;
    // ζ₈/ζ₉ do not depend on the fixed step; evaluate the ledger at α = 0.
    let zetas = compute_zetas(p, 0.0, 0, mu_max);
    let epsilon_bar = if p.n_agents == 1 {
        0.0
    } else {
        math::powf(
            1.0 - math::powf(n, -((p.n_agents * p.window) as f64)),
            1.0 / p.window as f64,
        )
    };
    let t_bar = search_t_bar(p, alpha0, zetas.z8, profile, mu_dense, search_cap)?;
    let r = p.gamma_ratio();
    let c7 = 16.0 / epsilon1 * anchors.c7_expectation;
    let c8 = 16.0 / epsilon1 * (p.a_max * c_theta + p.b_max) / (1.0 - epsilon_bar);
    let c9 = 2.0 * p.a_max * c_theta + 2.0 * p.b_max;
    let c10 = 2.0 * n * zetas.z9 * alpha0 * anchors.rate_c * r;
    let c11 = 2.0 * alpha0 * n * r;
    let c12 = 2.0 * t_bar as f64 * n * r * anchors.anchor_avg_tilde_mse;
    Ok(PushConstants {
        alpha0,
        epsilon1,
        epsilon_bar,
        c_theta,
        mu_max,
        zeta8: zetas.z8,
        zeta9: zetas.z9,
        c7,
        c8,
        c9,
        c10,
        c11,
        c12,
        t_bar,
    })
}

// ---------------------------------------------------------------------------
// Bound right-hand sides
// ---------------------------------------------------------------------------

/// Fixed-step bound: for `t ≥ T₁`,
/// `2ε^{q_t}·S_{m_t} + C₁(1−0.9α/γ)^{t−T₁} + C₂ +
///  (γ_max/γ_min)·2αζ₄·Σ_{k=0}^{t−T₁} η_{t+1−k}(1−0.9α/γ)^k`,
/// where `S_m` is the weighted consensus error at time `m < L`.
pub struct FixedBound<'a> {
    pub consts: &'a ConsensusConstants,
    pub params: &'a InstanceParams,
    pub eta: &'a EtaSeries,
    /// `S_m = Σᵢ π_mⁱ E‖θ_mⁱ − ⟨θ⟩_m‖²` for `m ∈ [0, L)`.
    pub initial_consensus: &'a [f64],
}

impl FixedBound<'_> {
    pub fn rhs(&self, t: u64) -> Result<f64, AnalysisError> {
        Ok(self.rhs_series(&[t])?[0])
    }

    /// Evaluate at ascending times sharing one walk of the η convolution.
    pub fn rhs_series(&self, ts: &[u64]) -> Result<Vec<f64>, AnalysisError> {
        let c = self.consts;
        let l = self.params.window as u64;
        assert_eq!(self.initial_consensus.len(), l as usize);
        for w in ts.windows(2) {
            assert!(w[0] < w[1], "times must be strictly ascending");
        }
        if let Some(&t0) = ts.first() {
            if t0 < c.t1 {
                return Err(AnalysisError::DomainTimeTooSmall {
                    t: t0,
                    needed: c.t1,
                });
            }
        }
        let rho = c.contraction;
        let r = self.params.gamma_ratio();
        let mut out = Vec::with_capacity(ts.len());
        let mut conv = self.eta.get(c.t1 + 1); // Σ at t = T₁
        let mut t_cur = c.t1;
        for &t in ts {
            while t_cur < t {
                t_cur += 1;
                conv = self.eta.get(t_cur + 1) + rho * conv;
            }
            let q = t / l;
            let m = (t % l) as usize;
            let term1 = 2.0 * math::powf(c.epsilon, q as f64) * self.initial_consensus[m];
            let term2 = c.c1 * math::powf(rho, (t - c.t1) as f64);
            let term4 = r * 2.0 * c.alpha * c.zetas.z4 * conv;
            out.push(term1 + term2 + c.c2 + term4);
        }
        Ok(out)
    }
}

/// Time-varying-step bound: for `t ≥ L·T₂`,
/// `2ε^{q_t−T₂}·S_{L·T₂+m_t} + C₃(α₀ ε^{(q_t−1)/2} + α_{⌈(q_t−1)/2⌉L}) +
///  (1/t)(C₄ log²(t/α₀) + C₅ Σ_{k=LT₂}^{t} η_k + C₆)`.
pub struct TimeVaryingBound<'a> {
    pub consts: &'a ConsensusConstants,
    pub params: &'a InstanceParams,
    pub eta: &'a EtaSeries,
    /// `S_{L·T₂+m}` for `m ∈ [0, L)`.
    pub anchor_consensus: &'a [f64],
}

impl TimeVaryingBound<'_> {
    pub fn rhs(&self, t: u64) -> Result<f64, AnalysisError> {
        let c = self.consts;
        let l = self.params.window as u64;
        assert_eq!(self.anchor_consensus.len(), l as usize);
        let t2 = c.t2.expect("time-varying bound needs T2");
        let c6 = c.c6.expect("time-varying bound needs C6");
        let anchor_t = l * t2;
        if t < anchor_t {
            return Err(AnalysisError::DomainTimeTooSmall {
                t,
                needed: anchor_t,
            });
        }
        let q = t / l;
        let m = (t % l) as usize;
        let term1 = 2.0 * math::powf(c.epsilon, (q - t2) as f64) * self.anchor_consensus[m];
        let half_q = (q - 1) as f64 / 2.0;
        let lag_index = (q - 1).div_ceil(2) * l;
        let alpha_lag = c.alpha0 / (lag_index as f64 + 1.0);
        let term2 = c.c3 * (c.alpha0 * math::powf(c.epsilon, half_q) + alpha_lag);
        let log_term = math::ln(t as f64 / c.alpha0);
        let eta_sum = self.eta.sum_range(anchor_t, t);
        let term3 = (c.c4 * log_term * log_term + c.c5 * eta_sum + c6) / t as f64;
        Ok(term1 + term2 + term3)
    }
}

/// Push bound: for `t ≥ T̄`, applying to the error at time `t + 1`,
/// `C₇ ε̄ᵗ + C₈(α₀ ε̄^{t/2} + α_{⌈t/2⌉}) + C₉ α_t +
///  (1/t)(C₁₀ log²(t/α₀) + C₁₁ Σ_{k=T̄}^{t} μ_k + C₁₂)`, evaluated at the
/// upper bound for `ε̄` (the right side is increasing in `ε̄`, so the bound
/// stays valid).
pub struct PushBound<'a> {
    pub consts: &'a PushConstants,
}

impl PushBound<'_> {
    /// `mu_window_sum` must equal `Σ_{k=T̄}^{t} μ_k` for the trajectory
    /// ensemble under evaluation.
    pub fn rhs(&self, t: u64, mu_window_sum: f64) -> Result<f64, AnalysisError> {
        let c = self.consts;
        if t < c.t_bar {
            return Err(AnalysisError::DomainTimeTooSmall { t, needed: c.t_bar });
        }
        let eps = c.epsilon_bar;
        let term1 = c.c7 * math::powf(eps, t as f64);
        let alpha_half = c.alpha0 / (t.div_ceil(2) as f64 + 1.0);
        let term2 = c.c8 * (c.alpha0 * math::powf(eps, t as f64 / 2.0) + alpha_half);
        let term3 = c.c9 * c.alpha0 / (t as f64 + 1.0);
        let log_term = math::ln(t as f64 / c.alpha0);
        let term4 = (c.c10 * log_term * log_term + c.c11 * mu_window_sum + c.c12) / t as f64;
        Ok(term1 + term2 + term3 + term4)
    }
}

// ---------------------------------------------------------------------------
// Empirical error series
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesStat {
    pub mean: f64,
    pub se: f64,
}

fn stat(xs: &[f64]) -> SeriesStat {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return SeriesStat { mean, se: 0.0 };
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    SeriesStat {
        mean,
        se: math::sqrt(var / n as f64),
    }
}

/// How states are weighted in the error functionals.
pub enum SeriesWeighting<'a> {
    /// `π_t` per time index (consensus engines).
    Pi(&'a [Vec<f64>]),
    /// `π̃_t = y_t/N` read off each trajectory (push engine); the weighted
    /// MSE is the plain per-agent sum in this regime.
    PushMass,
}

/// Monte-Carlo means and standard errors of the error functionals at the
/// recorded times.
#[derive(Debug, Clone)]
pub struct ErrorSeries {
    pub times: Vec<u64>,
    /// `Σᵢ π_tⁱ ‖θ_tⁱ − θ*‖²` (consensus) or `Σᵢ ‖θ_tⁱ − θ*‖²` (push).
    pub weighted_mse: Vec<SeriesStat>,
    /// `Σᵢ π_tⁱ ‖θ_tⁱ − ⟨θ⟩_t‖²` with the regime's weighting.
    pub consensus_error: Vec<SeriesStat>,
    pub mu: Option<Vec<SeriesStat>>,
    pub mu_cumsum: Option<Vec<SeriesStat>>,
    pub trials: usize,
}

pub fn error_series(
    trajectories: &[Trajectory],
    weighting: SeriesWeighting<'_>,
    theta_star: &[f64],
) -> Result<ErrorSeries, AnalysisError> {
    let first = trajectories.first().ok_or(AnalysisError::NoTrials)?;
    let times = first.times.clone();
    for traj in trajectories {
        if traj.times != times {
            return Err(AnalysisError::SeriesMismatch {
                what: "trajectories disagree on recorded times",
            });
        }
    }
    if let SeriesWeighting::Pi(pis) = &weighting {
        let need = *times.last().unwrap_or(&0);
        if (pis.len() as u64) <= need {
            return Err(AnalysisError::SeriesMismatch {
                what: "pi series shorter than trajectory horizon",
            });
        }
    }
    let trials = trajectories.len();
    let n = first.theta[0].rows();
    let k = first.theta[0].cols();
    let mut weighted_mse = Vec::with_capacity(times.len());
    let mut consensus_error = Vec::with_capacity(times.len());
    let has_mu = trajectories.iter().all(|t| t.mu_at.is_some());
    let mut mu_stats = Vec::new();
    let mut mu_cum_stats = Vec::new();

    let mut wmse_buf = vec![0.0; trials];
    let mut cons_buf = vec![0.0; trials];
    let mut mu_buf = vec![0.0; trials];
    let mut mu_cum_buf = vec![0.0; trials];

    for (s, &t) in times.iter().enumerate() {
        for (trial, traj) in trajectories.iter().enumerate() {
            let theta = &traj.theta[s];
            let (weights_vec, avg): (Vec<f64>, Vec<f64>) = match &weighting {
                SeriesWeighting::Pi(pis) => {
                    let w = pis[t as usize].clone();
                    let avg = theta.vecmat(&w);
                    (w, avg)
                }
                SeriesWeighting::PushMass => {
                    let y = &traj.y.as_ref().ok_or(AnalysisError::SeriesMismatch {
                        what: "push weighting requires push trajectories",
                    })?[s];
                    let w: Vec<f64> = y.iter().map(|v| v / n as f64).collect();
                    let tilde = &traj.theta_tilde.as_ref().unwrap()[s];
                    let avg: Vec<f64> = (0..k)
                        .map(|c| (0..n).map(|i| tilde.at(i, c)).sum::<f64>() / n as f64)
                        .collect();
                    (w, avg)
                }
            };
            let mut wmse = 0.0;
            let mut cons = 0.0;
            for i in 0..n {
                let row = theta.row(i);
                let d_star = vec_ops::dist2(row, theta_star);
                let d_avg = vec_ops::dist2(row, &avg);
                let mse_weight = match &weighting {
                    SeriesWeighting::Pi(_) => weights_vec[i],
                    SeriesWeighting::PushMass => 1.0,
                };
                wmse += mse_weight * d_star * d_star;
                cons += weights_vec[i] * d_avg * d_avg;
            }
            wmse_buf[trial] = wmse;
            cons_buf[trial] = cons;
            if has_mu {
                mu_buf[trial] = traj.mu_at.as_ref().unwrap()[s];
                mu_cum_buf[trial] = traj.mu_cumsum.as_ref().unwrap()[s];
            }
        }
        weighted_mse.push(stat(&wmse_buf));
        consensus_error.push(stat(&cons_buf));
        if has_mu {
            mu_stats.push(stat(&mu_buf));
            mu_cum_stats.push(stat(&mu_cum_buf));
        }
    }
    Ok(ErrorSeries {
        times,
        weighted_mse,
        consensus_error,
        mu: if has_mu { Some(mu_stats) } else { None },
        mu_cumsum: if has_mu { Some(mu_cum_stats) } else { None },
        trials,
    })
}
