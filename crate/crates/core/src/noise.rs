//! Finite-state Markovian noise: the chain `{X_t}`, the maps `x ↦ A(x)` and
//! `(i, x) ↦ bⁱ(x)`, their exact stationary limits, and mixing times.
//!
//! Because the state space is finite, conditional expectations are computed
//! exactly from transition-matrix powers rather than estimated, which makes
//! the mixing-time `τ(α)` and every bound constant that depends on it
//! reproducible numbers instead of sample statistics.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::DirectedGraph;
use crate::linalg::{self, vec_ops, LinalgError, Mat};
use crate::math;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseError {
    NotStochastic {
        row: usize,
        sum: f64,
    },
    NotIrreducible,
    NotAperiodic {
        period: usize,
    },
    /// Limit matrix has an eigenvalue with real part above `-1e-9`.
    NotHurwitz {
        max_real_part: f64,
    },
    StationaryResidual {
        residual: f64,
    },
    /// Mixing deviation did not settle below the target within the horizon.
    MixingHorizonExceeded {
        alpha: f64,
        horizon: u64,
    },
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    Linalg(LinalgError),
}

impl fmt::Display for NoiseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseError::NotStochastic { row, sum } => write!(f, "row {row} sums to {sum}"),
            NoiseError::NotIrreducible => write!(f, "chain is not irreducible"),
            NoiseError::NotAperiodic { period } => write!(f, "chain has period {period}"),
            NoiseError::NotHurwitz { max_real_part } => {
                write!(
                    f,
                    "limit matrix is not Hurwitz (max eigenvalue real part {max_real_part})"
                )
            }
            NoiseError::StationaryResidual { residual } => {
                write!(f, "stationary distribution residual {residual} above 1e-12")
            }
            NoiseError::MixingHorizonExceeded { alpha, horizon } => {
                write!(
                    f,
                    "mixing deviation did not settle below {alpha} within horizon {horizon}"
                )
            }
            NoiseError::Dimension {
                what,
                expected,
                got,
            } => {
                write!(f, "{what}: expected {expected}, got {got}")
            }
            NoiseError::Linalg(e) => write!(f, "linear algebra failure: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for NoiseError {}

impl From<LinalgError> for NoiseError {
    fn from(e: LinalgError) -> Self {
        NoiseError::Linalg(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Fixed(usize),
    Distribution(Vec<f64>),
}

/// Irreducible aperiodic finite-state chain, verified at construction so a
/// unique stationary distribution exists and mixing is geometric.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    transition: Mat,
    initial: InitialState,
    stationary: Vec<f64>,
}

impl MarkovChain {
    pub fn new(transition: Mat, initial: InitialState) -> Result<Self, NoiseError> {
        let n = transition.rows();
        if transition.cols() != n {
            return Err(NoiseError::Dimension {
                what: "transition matrix",
                expected: n,
                got: transition.cols(),
            });
        }
        for i in 0..n {
            let sum: f64 = transition.row(i).iter().sum();
            if math::abs(sum - 1.0) > 1e-12 || transition.row(i).iter().any(|&p| p < 0.0) {
                return Err(NoiseError::NotStochastic { row: i, sum });
            }
        }
        match &initial {
            InitialState::Fixed(s) if *s >= n => {
                return Err(NoiseError::Dimension {
                    what: "initial state",
                    expected: n,
                    got: *s,
                });
            }
            InitialState::Distribution(d) => {
                let sum: f64 = d.iter().sum();
                if d.len() != n || math::abs(sum - 1.0) > 1e-12 || d.iter().any(|&p| p < 0.0) {
                    return Err(NoiseError::NotStochastic {
                        row: usize::MAX,
                        sum,
                    });
                }
            }
            _ => {}
        }
        let (irreducible, period) = chain_structure(&transition);
        if !irreducible {
            return Err(NoiseError::NotIrreducible);
        }
        if period != 1 {
            return Err(NoiseError::NotAperiodic { period });
        }
        let stationary = solve_stationary(&transition)?;
        Ok(MarkovChain {
            transition,
            initial,
            stationary,
        })
    }

    /// Single absorbing state; trivially irreducible and aperiodic.
    pub fn single_state() -> Self {
        MarkovChain {
            transition: Mat::eye(1),
            initial: InitialState::Fixed(0),
            stationary: vec![1.0],
        }
    }

    /// Identical rows: `X_{t+1}` is drawn i.i.d. from `probs` regardless of
    /// the current state.
    pub fn iid(probs: &[f64], initial: InitialState) -> Result<Self, NoiseError> {
        let n = probs.len();
        let mut p = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                p.set(i, j, probs[j]);
            }
        }
        Self::new(p, initial)
    }

    /// Symmetric two-state chain `[[p, 1-p], [1-p, p]]`; second eigenvalue
    /// is `2p - 1`.
    pub fn lazy_two_state(stay_prob: f64, initial: InitialState) -> Result<Self, NoiseError> {
        let p = stay_prob;
        Self::new(Mat::from_rows(&[&[p, 1.0 - p], &[1.0 - p, p]]), initial)
    }

    /// Random irreducible chain with second eigenvalue exactly `lambda2`:
    /// `P = (1-λ₂)·𝟙 μᵀ + λ₂ I` with a seeded random stationary vector `μ`.
    pub fn prescribed_lambda2(
        n_states: usize,
        lambda2: f64,
        seed: u64,
        initial: InitialState,
    ) -> Result<Self, NoiseError> {
        assert!((0.0..1.0).contains(&lambda2));
        let mut rng = Rng::new(seed);
        let mut mu: Vec<f64> = (0..n_states).map(|_| 0.2 + rng.uniform()).collect();
        let s: f64 = mu.iter().sum();
        for m in mu.iter_mut() {
            *m /= s;
        }
        let mut p = Mat::zeros(n_states, n_states);
        for i in 0..n_states {
            for j in 0..n_states {
                let v = (1.0 - lambda2) * mu[j] + if i == j { lambda2 } else { 0.0 };
                p.set(i, j, v);
            }
        }
        Self::new(p, initial)
    }

    pub fn n_states(&self) -> usize {
        self.transition.rows()
    }

    pub fn transition(&self) -> &Mat {
        &self.transition
    }

    pub fn initial(&self) -> &InitialState {
        &self.initial
    }

    /// Unique `μ` with `μᵀP = μᵀ`, `Σμ = 1`, residual at most 1e-12.
    pub fn stationary_distribution(&self) -> &[f64] {
        &self.stationary
    }

    pub fn initial_distribution(&self) -> Vec<f64> {
        match &self.initial {
            InitialState::Fixed(s) => {
                let mut d = vec![0.0; self.n_states()];
                d[*s] = 1.0;
                d
            }
            InitialState::Distribution(d) => d.clone(),
        }
    }

    /// `X_0 … X_T`, deterministic in `(self, seed)`.
    pub fn sample_path(&self, horizon: u64, seed: u64) -> Vec<usize> {
        let mut rng = Rng::new(seed);
        let mut path = Vec::with_capacity(horizon as usize + 1);
        let mut x = match &self.initial {
            InitialState::Fixed(s) => *s,
            InitialState::Distribution(d) => rng.categorical(d),
        };
        path.push(x);
        for _ in 0..horizon {
            x = rng.categorical(self.transition.row(x));
            path.push(x);
        }
        path
    }
}

/// Irreducibility (strong connectivity of the positive pattern) and period
/// (gcd over arcs of `d(u) + 1 - d(v)` for BFS distances `d`).
fn chain_structure(p: &Mat) -> (bool, usize) {
    let n = p.rows();
    let arcs = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| p.at(i, j) > 0.0 || i == j);
    // self-arcs added only for graph-type validity; period uses true arcs below
    let g = DirectedGraph::with_self_arcs(n, arcs).expect("in-range arcs");
    if !g.is_strongly_connected() {
        return (false, 0);
    }
    let mut dist = vec![usize::MAX; n];
    dist[0] = 0;
    let mut frontier = vec![0usize];
    while let Some(u) = frontier.pop() {
        for v in 0..n {
            if p.at(u, v) > 0.0 && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                frontier.push(v);
            }
        }
    }
    let mut g_val = 0usize;
    for u in 0..n {
        for v in 0..n {
            if p.at(u, v) > 0.0 {
                let d = (dist[u] as i64 + 1 - dist[v] as i64).unsigned_abs() as usize;
                g_val = gcd(g_val, d);
            }
        }
    }
    (true, g_val.max(1))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn solve_stationary(p: &Mat) -> Result<Vec<f64>, NoiseError> {
    let n = p.rows();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // (Pᵀ - I) μ = 0 with the last equation replaced by Σμ = 1
    let mut a = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a.set(i, j, p.at(j, i) - if i == j { 1.0 } else { 0.0 });
        }
    }
    for j in 0..n {
        a.set(n - 1, j, 1.0);
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let mu = linalg::solve(&a, &rhs)?;
    let back = p.vecmat(&mu);
    let residual = vec_ops::dist1(&back, &mu);
    if residual > 1e-12 {
        return Err(NoiseError::StationaryResidual { residual });
    }
    Ok(mu)
}

pub const HURWITZ_MARGIN: f64 = 1e-9;

/// The chain together with the noise maps and their exact limits.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    chain: MarkovChain,
    /// `A(x)`, one `K×K` matrix per state.
    a_of: Vec<Mat>,
    /// `B(x)`, one `N×K` block per state; row `i` is `bⁱ(x)ᵀ`.
    b_of: Vec<Mat>,
    a_limit: Mat,
    b_limits: Vec<Vec<f64>>,
    a_max: f64,
    b_max: f64,
}

impl NoiseModel {
    pub fn new(chain: MarkovChain, a_of: Vec<Mat>, b_of: Vec<Mat>) -> Result<Self, NoiseError> {
        let n_states = chain.n_states();
        if a_of.len() != n_states {
            return Err(NoiseError::Dimension {
                what: "A map",
                expected: n_states,
                got: a_of.len(),
            });
        }
        if b_of.len() != n_states {
            return Err(NoiseError::Dimension {
                what: "b map",
                expected: n_states,
                got: b_of.len(),
            });
        }
        let dim = a_of[0].rows();
        let n_agents = b_of[0].rows();
        for a in &a_of {
            if a.rows() != dim || a.cols() != dim {
                return Err(NoiseError::Dimension {
                    what: "A(x)",
                    expected: dim,
                    got: a.rows(),
                });
            }
        }
        for b in &b_of {
            if b.rows() != n_agents || b.cols() != dim {
                return Err(NoiseError::Dimension {
                    what: "B(x)",
                    expected: n_agents * dim,
                    got: b.rows() * b.cols(),
                });
            }
        }
        let mu = chain.stationary_distribution().to_vec();
        let mut a_limit = Mat::zeros(dim, dim);
        for (x, a) in a_of.iter().enumerate() {
            a_limit = a_limit.add(&a.scale(mu[x]));
        }
        let mut b_limits = vec![vec![0.0; dim]; n_agents];
        for (x, b) in b_of.iter().enumerate() {
            for i in 0..n_agents {
                for k in 0..dim {
                    b_limits[i][k] += mu[x] * b.at(i, k);
                }
            }
        }
        let a_max = a_of.iter().map(linalg::spectral_norm).fold(0.0, f64::max);
        let b_max = b_of
            .iter()
            .flat_map(|b| (0..n_agents).map(move |i| vec_ops::norm2(b.row(i))))
            .fold(0.0, f64::max);
        let max_re = linalg::max_eigenvalue_real_part(&a_limit)?;
        if max_re >= -HURWITZ_MARGIN {
            return Err(NoiseError::NotHurwitz {
                max_real_part: max_re,
            });
        }
        Ok(NoiseModel {
            chain,
            a_of,
            b_of,
            a_limit,
            b_limits,
            a_max,
            b_max,
        })
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn dim(&self) -> usize {
        self.a_limit.rows()
    }

    pub fn n_agents(&self) -> usize {
        self.b_of[0].rows()
    }

    pub fn n_states(&self) -> usize {
        self.chain.n_states()
    }

    pub fn a_of(&self, state: usize) -> &Mat {
        &self.a_of[state]
    }

    /// `B(x)` as an `N×K` block.
    pub fn b_of(&self, state: usize) -> &Mat {
        &self.b_of[state]
    }

    pub fn a_limit(&self) -> &Mat {
        &self.a_limit
    }

    pub fn b_limits(&self) -> &[Vec<f64>] {
        &self.b_limits
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn b_max(&self) -> f64 {
        self.b_max
    }

    /// Exact deviation `D(t)` of conditional expectations from their limits:
    /// the worse of `max_x ‖E[A(X_t)|X_0 = x] − A‖₂` and the same for every
    /// agent's `bⁱ`. Entry `t` of the returned series is `D(t)`.
    pub fn mixing_deviation_series(&self, t_max: u64) -> Vec<f64> {
        let n_states = self.n_states();
        let n_agents = self.n_agents();
        let dim = self.dim();
        let da: Vec<Mat> = self.a_of.iter().map(|a| a.sub(&self.a_limit)).collect();
        let mut db: Vec<Mat> = Vec::with_capacity(n_states);
        for b in &self.b_of {
            let mut d = b.clone();
            for i in 0..n_agents {
                for k in 0..dim {
                    let v = d.at(i, k) - self.b_limits[i][k];
                    d.set(i, k, v);
                }
            }
            db.push(d);
        }
        let mut powers = Mat::eye(n_states);
        let mut out = Vec::with_capacity(t_max as usize + 1);
        for _t in 0..=t_max {
            let mut worst = 0.0f64;
            for x in 0..n_states {
                let mut a_dev = Mat::zeros(dim, dim);
                let mut b_dev = Mat::zeros(n_agents, dim);
                for y in 0..n_states {
                    let w = powers.at(x, y);
                    if w == 0.0 {
                        continue;
                    }
                    a_dev = a_dev.add(&da[y].scale(w));
                    b_dev = b_dev.add(&db[y].scale(w));
                }
                worst = worst.max(linalg::spectral_norm(&a_dev));
                for i in 0..n_agents {
                    worst = worst.max(vec_ops::norm2(b_dev.row(i)));
                }
            }
            out.push(worst);
            powers = powers.matmul(self.chain.transition());
        }
        out
    }

    /// Smallest `t` with `D(t') ≤ alpha` for every start state and every
    /// `t' ≥ t`, computed from the exact deviation series.
    ///
    /// The series is extended until its tail sits three orders of magnitude
    /// below `alpha` over a settle window, which certifies the unseen
    /// remainder under geometric ergodicity; failing that within
    /// `max_horizon` is an error flagging a mis-specified chain.
    pub fn mixing_time(&self, alpha: f64, max_horizon: u64) -> Result<u64, NoiseError> {
        assert!(alpha > 0.0);
        const SETTLE_WINDOW: usize = 20;
        let mut t_max = 64u64;
        loop {
            let ds = self.mixing_deviation_series(t_max);
            let settled = ds
                .iter()
                .rev()
                .take(SETTLE_WINDOW)
                .all(|&d| d <= alpha * 1e-3 || d == 0.0);
            if settled {
                // suffix maxima give the exact "for all later times" reading
                let mut tau = ds.len();
                let mut suffix_max = 0.0f64;
                for (t, &d) in ds.iter().enumerate().rev() {
                    suffix_max = suffix_max.max(d);
                    if suffix_max <= alpha {
                        tau = t;
                    } else {
                        break;
                    }
                }
                if tau < ds.len() {
                    return Ok(tau as u64);
                }
            }
            if t_max >= max_horizon {
                return Err(NoiseError::MixingHorizonExceeded {
                    alpha,
                    horizon: max_horizon,
                });
            }
            t_max = (t_max * 2).min(max_horizon);
        }
    }

    /// Smallest `C` with `τ(α) ≤ −C·log α` across the grid.
    pub fn geometric_rate_constant(
        &self,
        alpha_grid: &[f64],
        max_horizon: u64,
    ) -> Result<f64, NoiseError> {
        let mut c = 0.0f64;
        for &alpha in alpha_grid {
            assert!(alpha > 0.0 && alpha < 1.0);
            let tau = self.mixing_time(alpha, max_horizon)? as f64;
            c = c.max(tau / -math::ln(alpha));
        }
        Ok(c)
    }

    /// Precompute the deviation envelope so `τ(α)` becomes a lookup for any
    /// `α ≥ min_alpha`. The series is extended until its tail sits three
    /// orders below `min_alpha`, mirroring `mixing_time`'s certification.
    pub fn mixing_profile(
        &self,
        min_alpha: f64,
        max_horizon: u64,
    ) -> Result<MixingProfile, NoiseError> {
        assert!(min_alpha > 0.0);
        const SETTLE_WINDOW: usize = 20;
        let mut t_max = 64u64;
        loop {
            let ds = self.mixing_deviation_series(t_max);
            let settled = ds
                .iter()
                .rev()
                .take(SETTLE_WINDOW)
                .all(|&d| d <= min_alpha * 1e-3 || d == 0.0);
            if settled {
                let mut suffix_max = ds;
                for t in (0..suffix_max.len() - 1).rev() {
                    suffix_max[t] = suffix_max[t].max(suffix_max[t + 1]);
                }
                return Ok(MixingProfile {
                    suffix_max,
                    certified_min_alpha: min_alpha,
                });
            }
            if t_max >= max_horizon {
                return Err(NoiseError::MixingHorizonExceeded {
                    alpha: min_alpha,
                    horizon: max_horizon,
                });
            }
            t_max = (t_max * 2).min(max_horizon);
        }
    }
}

/// Non-increasing envelope `t ↦ max_{t' ≥ t} D(t')` of the mixing
/// deviation, certified down to `certified_min_alpha`.
#[derive(Debug, Clone)]
pub struct MixingProfile {
    suffix_max: Vec<f64>,
    certified_min_alpha: f64,
}

impl MixingProfile {
    /// `τ(α)`: first `t` whose envelope is at most `α`.
    pub fn tau(&self, alpha: f64) -> u64 {
        assert!(
            alpha >= self.certified_min_alpha,
            "tau queried below the certified range"
        );
        // envelope is non-increasing: binary search for the first index ≤ α
        let mut lo = 0usize;
        let mut hi = self.suffix_max.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.suffix_max[mid] <= alpha {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo as u64
    }

    pub fn certified_min_alpha(&self) -> f64 {
        self.certified_min_alpha
    }
}

/// Seeded random noise model with an exactly Hurwitz limit: a base matrix is
/// resampled until its spectrum clears the margin, then per-state
/// perturbations with stationary-weighted mean zero are layered on, so the
/// limit equals the base by construction.
pub fn random_hurwitz_noise(
    chain: MarkovChain,
    n_agents: usize,
    dim: usize,
    spread: f64,
    seed: u64,
    max_resamples: usize,
) -> Result<NoiseModel, NoiseError> {
    let mut rng = Rng::new(seed);
    let n_states = chain.n_states();
    let mu = chain.stationary_distribution().to_vec();
    for _attempt in 0..max_resamples {
        let mut base = Mat::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let v = if i == j {
                    -rng.uniform_in(0.5, 1.5)
                } else {
                    rng.uniform_in(-0.3, 0.3)
                };
                base.set(i, j, v);
            }
        }
        if linalg::max_eigenvalue_real_part(&base)? >= -1e-3 {
            continue;
        }
        let mut perturbations: Vec<Mat> = (0..n_states)
            .map(|_| {
                let mut e = Mat::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        e.set(i, j, rng.uniform_in(-spread, spread));
                    }
                }
                e
            })
            .collect();
        let mut weighted_mean = Mat::zeros(dim, dim);
        for (x, e) in perturbations.iter().enumerate() {
            weighted_mean = weighted_mean.add(&e.scale(mu[x]));
        }
        for e in perturbations.iter_mut() {
            *e = e.sub(&weighted_mean);
        }
        let a_of: Vec<Mat> = perturbations.iter().map(|e| base.add(e)).collect();
        let b_of: Vec<Mat> = (0..n_states)
            .map(|_| {
                let mut b = Mat::zeros(n_agents, dim);
                for i in 0..n_agents {
                    for k in 0..dim {
                        b.set(i, k, rng.uniform_in(-1.0, 1.0));
                    }
                }
                b
            })
            .collect();
        match NoiseModel::new(chain.clone(), a_of, b_of) {
            Ok(model) => return Ok(model),
            Err(NoiseError::NotHurwitz { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(NoiseError::NotHurwitz {
        max_real_part: f64::NAN,
    })
}
