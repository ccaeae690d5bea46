//! Stochastic weight schedules over graph sequences, matrix-product
//! windows, and absolute probability sequences.
//!
//! The absolute probability sequence (APS) of a row-stochastic schedule
//! `{W_t}` is the sequence of stochastic vectors with `π_tᵀ = π_{t+1}ᵀ W_t`.
//! It generalizes the left Perron vector to time-varying products and is the
//! weighting under which the mean-square error admits a quadratic comparison
//! function. Uniqueness gives no algorithm, so we compute it by backward
//! recursion from a terminal vector after a burn-in and certify the result
//! by perturbing the terminal: under uniform strong connectivity the
//! recursion forgets the terminal geometrically, and the measured
//! sensitivity turns "burn-in long enough" into a checked property.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{DirectedGraph, GraphSequence};
use crate::linalg::{vec_ops, Mat};
use crate::math;
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Clone, PartialEq)]
pub enum WeightsError {
    /// Row/column sums off by more than 1e-12, or a negative entry.
    NotStochastic {
        index: usize,
        sum: f64,
    },
    /// Entry positive where the graph has no arc, or zero diagonal.
    NotCompliant {
        row: usize,
        col: usize,
    },
    /// Operation needs the other orientation.
    WrongOrientation,
    /// Declared lower bound on positive entries is violated.
    BetaViolated {
        entry: f64,
        declared: f64,
    },
    /// Terminal-vector sensitivity of the APS recursion above tolerance.
    BurnInTooShort {
        sensitivity: f64,
        suggested_burn_in: u64,
    },
    /// No limit vector detected in the APS tail (Assumption 6 violated).
    NoLimitDetected {
        tail_spread: f64,
    },
    /// Forward-product minimum fell below its certified lower bound, which
    /// would contradict uniform strong connectivity.
    Epsilon1BelowLowerBound {
        value: f64,
        lower_bound: f64,
    },
    Dimension {
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for WeightsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightsError::NotStochastic { index, sum } => {
                write!(f, "line {index} sums to {sum}, not 1")
            }
            WeightsError::NotCompliant { row, col } => {
                write!(f, "entry ({row}, {col}) positive without a matching arc")
            }
            WeightsError::WrongOrientation => write!(f, "wrong stochastic orientation"),
            WeightsError::BetaViolated { entry, declared } => {
                write!(f, "positive entry {entry} below declared beta {declared}")
            }
            WeightsError::BurnInTooShort {
                sensitivity,
                suggested_burn_in,
            } => {
                write!(f, "burn-in too short: terminal sensitivity {sensitivity}, try H = {suggested_burn_in}")
            }
            WeightsError::NoLimitDetected { tail_spread } => {
                write!(
                    f,
                    "no APS limit detected (tail spread {tail_spread}); Assumption 6 violated"
                )
            }
            WeightsError::Epsilon1BelowLowerBound { value, lower_bound } => {
                write!(
                    f,
                    "epsilon_1 = {value} below certified lower bound {lower_bound}"
                )
            }
            WeightsError::Dimension { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for WeightsError {}

pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Rows sum to one (consensus weights).
    Row,
    /// Columns sum to one (push weights).
    Column,
}

/// Nonnegative square matrix with unit row or column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    mat: Mat,
    orientation: Orientation,
}

impl StochasticMatrix {
    pub fn new(mat: Mat, orientation: Orientation) -> Result<Self, WeightsError> {
        let n = mat.rows();
        if mat.cols() != n {
            return Err(WeightsError::Dimension {
                expected: n,
                got: mat.cols(),
            });
        }
        for idx in 0..n {
            let sum: f64 = match orientation {
                Orientation::Row => mat.row(idx).iter().sum(),
                Orientation::Column => (0..n).map(|i| mat.at(i, idx)).sum(),
            };
            if math::abs(sum - 1.0) > STOCHASTIC_TOL {
                return Err(WeightsError::NotStochastic { index: idx, sum });
            }
        }
        if mat.data().iter().any(|&v| v < 0.0) {
            return Err(WeightsError::NotStochastic {
                index: 0,
                sum: f64::NAN,
            });
        }
        Ok(StochasticMatrix { mat, orientation })
    }

    pub fn row_stochastic(mat: Mat) -> Result<Self, WeightsError> {
        Self::new(mat, Orientation::Row)
    }

    pub fn column_stochastic(mat: Mat) -> Result<Self, WeightsError> {
        Self::new(mat, Orientation::Column)
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn n(&self) -> usize {
        self.mat.rows()
    }

    pub fn min_positive_entry(&self) -> f64 {
        self.mat
            .data()
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Zero-pattern compliance with a graph, plus positive diagonal.
    ///
    /// Row orientation: `w[i][j] > 0` only if `(j, i)` is an arc (agent `i`
    /// mixes in-neighbor states). Column orientation: `ŵ[i][j] > 0` only if
    /// `(j, i)` is an arc (mass moves from `j` to its out-neighbor `i`).
    pub fn check_compliant(&self, g: &DirectedGraph) -> Result<(), WeightsError> {
        let n = self.n();
        if g.n_agents() != n {
            return Err(WeightsError::Dimension {
                expected: n,
                got: g.n_agents(),
            });
        }
        for i in 0..n {
            if self.mat.at(i, i) <= 0.0 {
                return Err(WeightsError::NotCompliant { row: i, col: i });
            }
            for j in 0..n {
                if self.mat.at(i, j) > 0.0 && !g.has_arc(j, i) {
                    return Err(WeightsError::NotCompliant { row: i, col: j });
                }
            }
        }
        Ok(())
    }
}

/// Equal-neighbor rule `w[i][j] = 1/|in-neighbors(i)|`: row-stochastic, every
/// positive entry at least `1/N`.
pub fn equal_neighbor_weights(g: &DirectedGraph) -> StochasticMatrix {
    let n = g.n_agents();
    let mut mat = Mat::zeros(n, n);
    for i in 0..n {
        let nbrs = g.in_neighbors(i);
        let w = 1.0 / nbrs.len() as f64;
        for j in nbrs {
            mat.set(i, j, w);
        }
    }
    StochasticMatrix {
        mat,
        orientation: Orientation::Row,
    }
}

/// Push rule `ŵ[i][j] = 1/|out-neighbors(j)|` for out-neighbors `i` of `j`:
/// column-stochastic, column `j` splits unit mass equally over `j`'s
/// out-neighbors.
pub fn push_weights(g: &DirectedGraph) -> StochasticMatrix {
    let n = g.n_agents();
    let mut mat = Mat::zeros(n, n);
    for j in 0..n {
        let outs = g.out_neighbors(j);
        let w = 1.0 / outs.len() as f64;
        for i in outs {
            mat.set(i, j, w);
        }
    }
    StochasticMatrix {
        mat,
        orientation: Orientation::Column,
    }
}

#[derive(Debug, Clone)]
pub enum WeightRule {
    EqualNeighbor,
    PushOutDegree,
    /// Explicit periodic matrices, validated against the graph schedule.
    /// `beta` is the user-certified lower bound on positive entries.
    Explicit {
        matrices: Vec<StochasticMatrix>,
        beta: f64,
    },
}

/// Time-indexed weight matrices compliant with a graph sequence.
#[derive(Debug, Clone)]
pub struct WeightSchedule {
    graphs: GraphSequence,
    rule: WeightRule,
}

impl WeightSchedule {
    pub fn equal_neighbor(graphs: GraphSequence) -> Self {
        WeightSchedule {
            graphs,
            rule: WeightRule::EqualNeighbor,
        }
    }

    pub fn push(graphs: GraphSequence) -> Self {
        WeightSchedule {
            graphs,
            rule: WeightRule::PushOutDegree,
        }
    }

    /// Explicit matrices cycle with period `matrices.len()`; each one is
    /// checked for compliance against the graph emitted at its phase and for
    /// the declared entry lower bound.
    pub fn explicit(
        graphs: GraphSequence,
        matrices: Vec<StochasticMatrix>,
        beta: f64,
    ) -> Result<Self, WeightsError> {
        if matrices.is_empty() {
            return Err(WeightsError::Dimension {
                expected: 1,
                got: 0,
            });
        }
        for (k, m) in matrices.iter().enumerate() {
            m.check_compliant(&graphs.graph_at(k as u64))?;
            let min_pos = m.min_positive_entry();
            if min_pos + STOCHASTIC_TOL < beta {
                return Err(WeightsError::BetaViolated {
                    entry: min_pos,
                    declared: beta,
                });
            }
        }
        Ok(WeightSchedule {
            graphs,
            rule: WeightRule::Explicit { matrices, beta },
        })
    }

    pub fn graphs(&self) -> &GraphSequence {
        &self.graphs
    }

    pub fn n_agents(&self) -> usize {
        self.graphs.n_agents()
    }

    pub fn orientation(&self) -> Orientation {
        match &self.rule {
            WeightRule::EqualNeighbor => Orientation::Row,
            WeightRule::PushOutDegree => Orientation::Column,
            WeightRule::Explicit { matrices, .. } => matrices[0].orientation(),
        }
    }

    /// Certified lower bound on positive entries (the `β` of the weight
    /// assumption). Equal-neighbor and push rules guarantee `1/N`.
    pub fn beta(&self) -> f64 {
        match &self.rule {
            WeightRule::EqualNeighbor | WeightRule::PushOutDegree => 1.0 / self.n_agents() as f64,
            WeightRule::Explicit { beta, .. } => *beta,
        }
    }

    pub fn weight_at(&self, t: u64) -> StochasticMatrix {
        match &self.rule {
            WeightRule::EqualNeighbor => equal_neighbor_weights(&self.graphs.graph_at(t)),
            WeightRule::PushOutDegree => push_weights(&self.graphs.graph_at(t)),
            WeightRule::Explicit { matrices, .. } => {
                matrices[(t % matrices.len() as u64) as usize].clone()
            }
        }
    }
}

/// `W_{s:t} = W_t W_{t-1} ⋯ W_s`, the composition applied to states evolving
/// as `x_{k+1} = W_k x_k`. Preserves the schedule's orientation.
pub fn product_window(schedule: &WeightSchedule, start: u64, end: u64) -> StochasticMatrix {
    assert!(start <= end);
    let mut prod = schedule.weight_at(start).mat().clone();
    for k in (start + 1)..=end {
        prod = schedule.weight_at(k).mat().matmul(&prod);
    }
    StochasticMatrix {
        mat: prod,
        orientation: schedule.orientation(),
    }
}

/// The reported slice `π_0 … π_T` of an absolute probability sequence, with
/// its certification data.
#[derive(Debug, Clone)]
pub struct AbsoluteProbabilitySequence {
    vectors: Vec<Vec<f64>>,
    pi_min: f64,
    pi_infinity: Option<Vec<f64>>,
    tail_spread: f64,
    terminal_sensitivity: f64,
}

impl AbsoluteProbabilitySequence {
    /// `π_t` for `t ≤ T`.
    pub fn pi(&self, t: u64) -> &[f64] {
        &self.vectors[t as usize]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn horizon(&self) -> u64 {
        (self.vectors.len() - 1) as u64
    }

    /// Minimum entry over the reported range; positive under uniform strong
    /// connectivity (an empirical lower estimate of the true infimum).
    pub fn pi_min(&self) -> f64 {
        self.pi_min
    }

    /// Detected limit vector, when the tail stabilized.
    pub fn pi_infinity(&self) -> Option<&[f64]> {
        self.pi_infinity.as_deref()
    }

    /// Spread of the tail window used for limit detection.
    pub fn tail_spread(&self) -> f64 {
        self.tail_spread
    }

    /// Max 1-norm deviation over the reported range when the terminal vector
    /// is swapped for a simplex vertex.
    pub fn terminal_sensitivity(&self) -> f64 {
        self.terminal_sensitivity
    }

    /// `η_t = ‖π_t − π_∞‖₂` for the reported range. Errors when no limit was
    /// detected (expected for adversarial periodic schedules).
    pub fn eta_series(&self) -> Result<Vec<f64>, WeightsError> {
        let pi_inf = self
            .pi_infinity
            .as_deref()
            .ok_or(WeightsError::NoLimitDetected {
                tail_spread: self.tail_spread,
            })?;
        Ok(self
            .vectors
            .iter()
            .map(|p| vec_ops::dist2(p, pi_inf))
            .collect())
    }
}

pub const APS_SENSITIVITY_TOL: f64 = 1e-9;
pub const APS_LIMIT_TOL: f64 = 1e-8;

fn backward_pass(
    schedule: &WeightSchedule,
    horizon: u64,
    burn_in: u64,
    terminal: &[f64],
) -> Vec<Vec<f64>> {
    let mut pi = terminal.to_vec();
    let mut t = horizon + burn_in;
    while t > horizon {
        t -= 1;
        pi = schedule.weight_at(t).mat().vecmat(&pi);
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(horizon as usize + 1);
    out.push(pi.clone());
    while t > 0 {
        t -= 1;
        pi = schedule.weight_at(t).mat().vecmat(&pi);
        out.push(pi.clone());
    }
    out.reverse();
    out
}

/// Compute `π_0 … π_T` by the backward recursion `π_tᵀ = π_{t+1}ᵀ W_t`
/// started from `π_{T+H} = terminal`.
///
/// The returned sequence satisfies the recursion exactly by construction;
/// what the burn-in buys is independence from the terminal, certified by
/// re-running from a simplex vertex and measuring the worst 1-norm gap over
/// the reported range.
pub fn absolute_probability_sequence(
    schedule: &WeightSchedule,
    horizon: u64,
    burn_in: u64,
    terminal: &[f64],
) -> Result<AbsoluteProbabilitySequence, WeightsError> {
    let n = schedule.n_agents();
    if schedule.orientation() != Orientation::Row {
        return Err(WeightsError::WrongOrientation);
    }
    if terminal.len() != n {
        return Err(WeightsError::Dimension {
            expected: n,
            got: terminal.len(),
        });
    }
    let term_sum: f64 = terminal.iter().sum();
    if math::abs(term_sum - 1.0) > STOCHASTIC_TOL || terminal.iter().any(|&v| v < 0.0) {
        return Err(WeightsError::NotStochastic {
            index: 0,
            sum: term_sum,
        });
    }
    assert!(burn_in >= 1 && horizon >= 1);

    let vectors = backward_pass(schedule, horizon, burn_in, terminal);

    // Certification pass from a vertex of the simplex (a different one when
    // the terminal already is that vertex).
    let vertex = if terminal[0] < 1.0 { 0 } else { 1 % n };
    let mut v_alt = vec![0.0; n];
    v_alt[vertex] = 1.0;
    let alt = backward_pass(schedule, horizon, burn_in, &v_alt);
    let mut sensitivity = 0.0f64;
    for (p, q) in vectors.iter().zip(&alt) {
        sensitivity = sensitivity.max(vec_ops::dist1(p, q));
    }
    if sensitivity > APS_SENSITIVITY_TOL {
        return Err(WeightsError::BurnInTooShort {
            sensitivity,
            suggested_burn_in: burn_in.saturating_mul(4),
        });
    }

    let pi_min = vectors
        .iter()
        .flat_map(|p| p.iter().copied())
        .fold(f64::INFINITY, f64::min);

    // Limit detection: coordinate-wise range over the last quarter bounds
    // every pairwise 1-norm gap in that window.
    let tail_len = (vectors.len()).div_ceil(4).max(1);
    let tail = &vectors[vectors.len() - tail_len..];
    let mut tail_spread = 0.0;
    let mut mean = vec![0.0; n];
    for k in 0..n {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for p in tail {
            lo = lo.min(p[k]);
            hi = hi.max(p[k]);
            acc += p[k];
        }
        tail_spread += hi - lo;
        mean[k] = acc / tail.len() as f64;
    }
    let pi_infinity = if tail_spread < APS_LIMIT_TOL {
        let s: f64 = mean.iter().sum();
        for m in mean.iter_mut() {
            *m /= s;
        }
        Some(mean)
    } else {
        None
    };

    Ok(AbsoluteProbabilitySequence {
        vectors,
        pi_min,
        pi_infinity,
        tail_spread,
        terminal_sensitivity: sensitivity,
    })
}

/// Max over `t < T` of `‖π_tᵀ − π_{t+1}ᵀ W_t‖₁`: zero up to rounding by
/// construction, re-measured as a defense against schedule mismatches.
pub fn aps_recursion_residual(schedule: &WeightSchedule, aps: &AbsoluteProbabilitySequence) -> f64 {
    let mut worst = 0.0f64;
    for t in 0..aps.horizon() {
        let lhs = aps.pi(t);
        let rhs = schedule.weight_at(t).mat().vecmat(aps.pi(t + 1));
        worst = worst.max(vec_ops::dist1(lhs, &rhs));
    }
    worst
}

/// `ε₁ = inf_t min_i (Ŵ_t ⋯ Ŵ_0 1_N)ⁱ` over `t ≤ horizon`.
///
/// The forward products applied to `1_N` are exactly the push-sum mass
/// vector `y_{t+1}`, so this is a running minimum along the deterministic
/// `y` trajectory. When the schedule's uniform strong connectivity has been
/// verified for `window`, the value is checked against the certified lower
/// bound `1/N^{N·window}`; a violation is an internal error (it would
/// contradict the connectivity certificate).
pub fn epsilon1(
    schedule: &WeightSchedule,
    horizon: u64,
    verified_window: Option<usize>,
) -> Result<f64, WeightsError> {
    if schedule.orientation() != Orientation::Column {
        return Err(WeightsError::WrongOrientation);
    }
    let n = schedule.n_agents();
    let mut y = vec![1.0; n];
    let mut eps = f64::INFINITY;
    for t in 0..=horizon {
        y = schedule.weight_at(t).mat().matvec(&y);
        let min_y = y.iter().copied().fold(f64::INFINITY, f64::min);
        eps = eps.min(min_y);
    }
    if let Some(window) = verified_window {
        let lower = math::powf(n as f64, -((n * window) as f64));
        if eps < lower - 1e-12 {
            return Err(WeightsError::Epsilon1BelowLowerBound {
                value: eps,
                lower_bound: lower,
            });
        }
    }
    Ok(eps)
}

/// Row-stochastic ratio matrix `w̃[i][j] = ŵ[i][j]·y[j] / Σ_k ŵ[i][k]·y[k]`.
///
/// Requires `y` entrywise positive; the self-arc keeps every denominator
/// positive. Rows sum to one exactly by constructive normalization.
pub fn tilde_weights(hat: &StochasticMatrix, y: &[f64]) -> Result<StochasticMatrix, WeightsError> {
    if hat.orientation() != Orientation::Column {
        return Err(WeightsError::WrongOrientation);
    }
    let n = hat.n();
    if y.len() != n {
        return Err(WeightsError::Dimension {
            expected: n,
            got: y.len(),
        });
    }
    assert!(
        y.iter().all(|&v| v > 0.0),
        "push mass vector must stay positive"
    );
    let mut mat = Mat::zeros(n, n);
    for i in 0..n {
        let denom: f64 = (0..n).map(|k| hat.mat().at(i, k) * y[k]).sum();
        assert!(denom > 0.0, "self-arc guarantees a positive denominator");
        for j in 0..n {
            mat.set(i, j, hat.mat().at(i, j) * y[j] / denom);
        }
    }
    Ok(StochasticMatrix {
        mat,
        orientation: Orientation::Row,
    })
}

/// Residuals of the push-sum product identities.
#[derive(Debug, Clone)]
pub struct PushIdentityReport {
    /// Max over sampled windows `(s, t)` and entries `(i, j)` of
    /// `|(Π W̃)ⁱʲ − (y_sʲ / y_{t+1}ⁱ)(Π Ŵ)ⁱʲ|`.
    pub product_relation_residual: f64,
    /// Max over a mid-horizon range of `|π̃_tⁱ / y_tⁱ − 1/N|`.
    pub ratio_identity_residual: f64,
    /// `‖Π_{s=0}^{t} W̃_s − (1/N)𝟙𝟙ᵀ‖_F` at the final `t`.
    pub final_product_residual: f64,
}

/// Verify the push-sum identities tying the ratio matrices `W̃_t` to the
/// column-stochastic `Ŵ_t` and their APS `π̃` to the mass vector `y`.
pub fn verify_push_identities(
    schedule: &WeightSchedule,
    horizon: u64,
    window_samples: usize,
    sample_seed: u64,
) -> Result<PushIdentityReport, WeightsError> {
    if schedule.orientation() != Orientation::Column {
        return Err(WeightsError::WrongOrientation);
    }
    let n = schedule.n_agents();
    assert!(horizon >= 8);

    // y trajectory and the ratio matrices along it
    let mut ys: Vec<Vec<f64>> = Vec::with_capacity(horizon as usize + 1);
    ys.push(vec![1.0; n]);
    let mut tildes: Vec<StochasticMatrix> = Vec::with_capacity(horizon as usize);
    for t in 0..horizon {
        let hat = schedule.weight_at(t);
        let y_t = ys[t as usize].clone();
        tildes.push(tilde_weights(&hat, &y_t)?);
        ys.push(hat.mat().matvec(&y_t));
    }

    // (a) product relation on sampled windows
    let mut rng = Rng::new(derive_seed(sample_seed, 0x7075_7368, 0));
    let mut product_relation_residual = 0.0f64;
    for _ in 0..window_samples {
        let s = rng.below(horizon as usize - 1) as u64;
        let t = s + rng.below((horizon - s) as usize) as u64; // in [s, horizon-1]
        let mut tilde_prod = tildes[s as usize].mat().clone();
        let mut hat_prod = schedule.weight_at(s).mat().clone();
        for l in (s + 1)..=t {
            tilde_prod = tildes[l as usize].mat().matmul(&tilde_prod);
            hat_prod = schedule.weight_at(l).mat().matmul(&hat_prod);
        }
        let y_s = &ys[s as usize];
        let y_next = &ys[(t + 1) as usize];
        for i in 0..n {
            for j in 0..n {
                let expect = y_s[j] / y_next[i] * hat_prod.at(i, j);
                let gap = math::abs(tilde_prod.at(i, j) - expect);
                product_relation_residual = product_relation_residual.max(gap);
            }
        }
    }

    // (b) π̃ against y/N over a mid-horizon range. The W̃ schedule exists on
    // [0, horizon), so the recursion runs backward from `horizon` and the
    // upper half serves as burn-in for the mid range.
    let mut pi = vec![1.0 / n as f64; n];
    let mid_lo = horizon / 4;
    let mid_hi = horizon / 2;
    let mut ratio_identity_residual = 0.0f64;
    let mut t = horizon;
    while t > 0 {
        t -= 1;
        pi = tildes[t as usize].mat().vecmat(&pi);
        if t >= mid_lo && t <= mid_hi {
            let y_t = &ys[t as usize];
            for i in 0..n {
                let gap = math::abs(pi[i] / y_t[i] - 1.0 / n as f64);
                ratio_identity_residual = ratio_identity_residual.max(gap);
            }
        }
    }

    // (c) forward W̃ product against the rank-one limit
    let mut prod = tildes[0].mat().clone();
    for l in 1..horizon {
        prod = tildes[l as usize].mat().matmul(&prod);
    }
    let mut final_product_residual = 0.0;
    let unif = 1.0 / n as f64;
    for i in 0..n {
        for j in 0..n {
            let d = prod.at(i, j) - unif;
            final_product_residual += d * d;
        }
    }
    let final_product_residual = math::sqrt(final_product_residual);

    Ok(PushIdentityReport {
        product_relation_residual,
        ratio_identity_residual,
        final_product_residual,
    })
}
