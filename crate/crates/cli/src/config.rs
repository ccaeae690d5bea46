//! Experiment configuration: a versioned JSON tree, its validation against
//! the assumptions the theory needs, and the canonical fingerprint embedded
//! in every output.
//!
//! External representations are 1-based (agents, noise states); everything
//! is converted to 0-based indices at this boundary.

use serde::{Deserialize, Serialize};

use netsa_core::engine::{EngineKind, InitSpec, StepSchedule};
use netsa_core::graph::{DirectedGraph, GraphSequence};
use netsa_core::linalg::Mat;
use netsa_core::noise::{InitialState, MarkovChain, NoiseModel};
use netsa_core::weights::{Orientation, StochasticMatrix, WeightSchedule};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub name: String,
    pub instance: InstanceCfg,
    pub engine: EngineCfg,
    pub steps: StepsCfg,
    pub horizon: u64,
    pub trials: usize,
    pub master_seed: u64,
    /// 0 selects the automatic stride `max(1, horizon/2000)`.
    #[serde(default)]
    pub record_stride: u64,
    #[serde(default)]
    pub init: InitCfg,
    #[serde(default)]
    pub bounds: Option<BoundsCfg>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceCfg {
    pub n_agents: usize,
    pub dim: usize,
    pub graph: GraphCfg,
    pub weights: WeightsCfg,
    pub noise: NoiseCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphCfg {
    Complete,
    /// Arcs as 1-based `[from, to]` pairs; self-arcs added implicitly.
    Constant {
        arcs: Vec<[usize; 2]>,
    },
    Periodic {
        graphs: Vec<Vec<[usize; 2]>>,
        declared_window: usize,
    },
    RandomTemplate {
        seed: u64,
        block_len: usize,
        extra_arc_prob: f64,
        #[serde(default)]
        declared_window: Option<usize>,
    },
    /// Seeded arbitrary phase that settles into a fixed graph at
    /// `switch_at` (1-based arcs for the fixed tail).
    UnstableThenFixed {
        seed: u64,
        block_len: usize,
        extra_arc_prob: f64,
        switch_at: u64,
        fixed_arcs: Vec<[usize; 2]>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightsCfg {
    EqualNeighbor,
    Push,
    /// Row-major matrices cycling with their count; `beta` is the declared
    /// uniform lower bound on positive entries.
    Explicit {
        matrices: Vec<Vec<Vec<f64>>>,
        beta: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseCfg {
    pub chain: ChainCfg,
    #[serde(default)]
    pub initial: ChainInitCfg,
    pub maps: MapsCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChainCfg {
    SingleState,
    Iid {
        probs: Vec<f64>,
    },
    LazyTwoState {
        stay_prob: f64,
    },
    PrescribedLambda2 {
        n_states: usize,
        lambda2: f64,
        seed: u64,
    },
    Explicit {
        transition: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChainInitCfg {
    /// 1-based state index.
    Fixed {
        state: usize,
    },
    #[default]
    Stationary,
    Distribution {
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapsCfg {
    /// `a[state][row][col]` and `b[state][agent][k]`.
    Explicit {
        a: Vec<Vec<Vec<f64>>>,
        b: Vec<Vec<Vec<f64>>>,
    },
    /// Seeded per-state perturbations around a resampled Hurwitz base.
    RandomHurwitz { seed: u64, spread: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EngineCfg {
    Consensus,
    Kushner,
    Push,
}

impl From<EngineCfg> for EngineKind {
    fn from(e: EngineCfg) -> Self {
        match e {
            EngineCfg::Consensus => EngineKind::Consensus,
            EngineCfg::Kushner => EngineKind::Kushner,
            EngineCfg::Push => EngineKind::Push,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepsCfg {
    Fixed { alpha: f64 },
    Harmonic { alpha0: f64 },
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitCfg {
    Uniform {
        scale: f64,
    },
    Zero,
    /// `values[agent][k]`.
    Explicit {
        values: Vec<Vec<f64>>,
    },
}

impl Default for InitCfg {
    fn default() -> Self {
        InitCfg::Uniform { scale: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoundsCfg {
    pub enabled: bool,
    /// Search cap for the anchor-time constants.
    #[serde(default = "default_search_cap")]
    pub search_cap: u64,
    /// Backward-recursion burn-in for the absolute probability sequence.
    #[serde(default = "default_burn_in")]
    pub aps_burn_in: u64,
}

fn default_search_cap() -> u64 {
    50_000
}

fn default_burn_in() -> u64 {
    400
}

impl Default for BoundsCfg {
    fn default() -> Self {
        BoundsCfg {
            enabled: false,
            search_cap: default_search_cap(),
            aps_burn_in: default_burn_in(),
        }
    }
}

/// One named validation failure; refusals list every violation found.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Violation {
    pub assumption: String,
    pub detail: String,
}

impl Violation {
    fn new(assumption: &str, detail: String) -> Self {
        Violation {
            assumption: assumption.to_string(),
            detail,
        }
    }
}

/// Core objects materialized from a config.
#[derive(Debug)]
pub struct BuiltInstance {
    pub graphs: GraphSequence,
    pub weights: WeightSchedule,
    pub noise: NoiseModel,
    pub steps: StepSchedule,
    pub init: InitSpec,
    pub engine: EngineKind,
    /// Horizon used for connectivity verification.
    pub connectivity_check_horizon: u64,
    /// Set for explicit step tables, which cannot certify the summability
    /// conditions by construction.
    pub assumption5_unverified: bool,
}

pub fn effective_stride(cfg: &Config) -> u64 {
    if cfg.record_stride > 0 {
        cfg.record_stride
    } else {
        (cfg.horizon / 2000).max(1)
    }
}

fn build_graphs(cfg: &Config, violations: &mut Vec<Violation>) -> Option<GraphSequence> {
    let n = cfg.instance.n_agents;
    let to_zero_based =
        |arcs: &[[usize; 2]], violations: &mut Vec<Violation>| -> Option<Vec<(usize, usize)>> {
            let mut out = Vec::with_capacity(arcs.len());
            for a in arcs {
                if a[0] == 0 || a[1] == 0 || a[0] > n || a[1] > n {
                    violations.push(Violation::new(
                        "graph_arcs_in_range",
                        format!("arc [{}, {}] outside 1..={n}", a[0], a[1]),
                    ));
                    return None;
                }
                out.push((a[0] - 1, a[1] - 1));
            }
            Some(out)
        };
    match &cfg.instance.graph {
        GraphCfg::Complete => Some(GraphSequence::constant(DirectedGraph::complete(n))),
        GraphCfg::Constant { arcs } => {
            let arcs = to_zero_based(arcs, violations)?;
            match DirectedGraph::with_self_arcs(n, arcs) {
                Ok(g) => Some(GraphSequence::constant(g)),
                Err(e) => {
                    violations.push(Violation::new("graph_well_formed", e.to_string()));
                    None
                }
            }
        }
        GraphCfg::Periodic {
            graphs,
            declared_window,
        } => {
            let mut built = Vec::with_capacity(graphs.len());
            for arcs in graphs {
                let arcs = to_zero_based(arcs, violations)?;
                match DirectedGraph::with_self_arcs(n, arcs) {
                    Ok(g) => built.push(g),
                    Err(e) => {
                        violations.push(Violation::new("graph_well_formed", e.to_string()));
                        return None;
                    }
                }
            }
            match GraphSequence::periodic(built, *declared_window) {
                Ok(seq) => Some(seq),
                Err(e) => {
                    violations.push(Violation::new("graph_well_formed", e.to_string()));
                    None
                }
            }
        }
        GraphCfg::RandomTemplate {
            seed,
            block_len,
            extra_arc_prob,
            declared_window,
        } => {
            let seq = GraphSequence::random_template(n, *seed, *block_len, *extra_arc_prob);
            Some(match declared_window {
                Some(w) => seq.with_declared_window(*w),
                None => seq,
            })
        }
        GraphCfg::UnstableThenFixed {
            seed,
            block_len,
            extra_arc_prob,
            switch_at,
            fixed_arcs,
        } => {
            let before = GraphSequence::random_template(n, *seed, *block_len, *extra_arc_prob);
            let arcs = to_zero_based(fixed_arcs, violations)?;
            let fixed = match DirectedGraph::with_self_arcs(n, arcs) {
                Ok(g) => g,
                Err(e) => {
                    violations.push(Violation::new("graph_well_formed", e.to_string()));
                    return None;
                }
            };
            if !fixed.is_strongly_connected() {
                violations.push(Violation::new(
                    "definition_1_connectivity",
                    "fixed tail graph must be strongly connected".into(),
                ));
                return None;
            }
            match GraphSequence::switch_at(before, GraphSequence::constant(fixed), *switch_at) {
                Ok(seq) => Some(seq),
                Err(e) => {
                    violations.push(Violation::new("graph_well_formed", e.to_string()));
                    None
                }
            }
        }
    }
}

fn build_weights(
    cfg: &Config,
    graphs: &GraphSequence,
    violations: &mut Vec<Violation>,
) -> Option<WeightSchedule> {
    match &cfg.instance.weights {
        WeightsCfg::EqualNeighbor => Some(WeightSchedule::equal_neighbor(graphs.clone())),
        WeightsCfg::Push => Some(WeightSchedule::push(graphs.clone())),
        WeightsCfg::Explicit { matrices, beta } => {
            let n = cfg.instance.n_agents;
            let orientation = match cfg.engine {
                EngineCfg::Push => Orientation::Column,
                _ => Orientation::Row,
            };
            let mut built = Vec::with_capacity(matrices.len());
            for rows in matrices {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    violations.push(Violation::new(
                        "weights_shape",
                        format!("matrix must be {n}x{n}"),
                    ));
                    return None;
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                match StochasticMatrix::new(Mat::from_vec(n, n, flat), orientation) {
                    Ok(m) => built.push(m),
                    Err(e) => {
                        violations.push(Violation::new("assumption_1_weights", e.to_string()));
                        return None;
                    }
                }
            }
            match WeightSchedule::explicit(graphs.clone(), built, *beta) {
                Ok(s) => Some(s),
                Err(e) => {
                    violations.push(Violation::new("assumption_1_weights", e.to_string()));
                    None
                }
            }
        }
    }
}

fn build_chain(cfg: &Config, violations: &mut Vec<Violation>) -> Option<MarkovChain> {
    let chain_res = match &cfg.instance.noise.chain {
        ChainCfg::SingleState => Ok(MarkovChain::single_state()),
        ChainCfg::Iid { probs } => MarkovChain::iid(probs, InitialState::Fixed(0)),
        ChainCfg::LazyTwoState { stay_prob } => {
            MarkovChain::lazy_two_state(*stay_prob, InitialState::Fixed(0))
        }
        ChainCfg::PrescribedLambda2 {
            n_states,
            lambda2,
            seed,
        } => MarkovChain::prescribed_lambda2(*n_states, *lambda2, *seed, InitialState::Fixed(0)),
        ChainCfg::Explicit { transition } => {
            let n = transition.len();
            if transition.iter().any(|r| r.len() != n) {
                violations.push(Violation::new(
                    "noise_chain_shape",
                    "transition matrix must be square".into(),
                ));
                return None;
            }
            let flat: Vec<f64> = transition.iter().flatten().copied().collect();
            MarkovChain::new(Mat::from_vec(n, n, flat), InitialState::Fixed(0))
        }
    };
    let chain = match chain_res {
        Ok(c) => c,
        Err(e) => {
            violations.push(Violation::new("assumption_3_chain_ergodic", e.to_string()));
            return None;
        }
    };
    // re-wrap with the requested initial law
    let initial = match &cfg.instance.noise.initial {
        ChainInitCfg::Fixed { state } => {
            if *state == 0 || *state > chain.n_states() {
                violations.push(Violation::new(
                    "noise_initial_state",
                    format!("state {state} outside 1..={}", chain.n_states()),
                ));
                return None;
            }
            InitialState::Fixed(state - 1)
        }
        ChainInitCfg::Stationary => {
            InitialState::Distribution(chain.stationary_distribution().to_vec())
        }
        ChainInitCfg::Distribution { probs } => InitialState::Distribution(probs.clone()),
    };
    match MarkovChain::new(chain.transition().clone(), initial) {
        Ok(c) => Some(c),
        Err(e) => {
            violations.push(Violation::new("noise_initial_state", e.to_string()));
            None
        }
    }
}

fn build_noise(cfg: &Config, violations: &mut Vec<Violation>) -> Option<NoiseModel> {
    let chain = build_chain(cfg, violations)?;
    let n = cfg.instance.n_agents;
    let k = cfg.instance.dim;
    let n_states = chain.n_states();
    match &cfg.instance.noise.maps {
        MapsCfg::Explicit { a, b } => {
            if a.len() != n_states || b.len() != n_states {
                violations.push(Violation::new(
                    "assumption_2_noise_maps",
                    format!("need one A and one B block per state ({n_states})"),
                ));
                return None;
            }
            let mut a_of = Vec::with_capacity(n_states);
            let mut b_of = Vec::with_capacity(n_states);
            for (x, block) in a.iter().enumerate() {
                if block.len() != k || block.iter().any(|r| r.len() != k) {
                    violations.push(Violation::new(
                        "assumption_2_noise_maps",
                        format!("A({}) must be {k}x{k}", x + 1),
                    ));
                    return None;
                }
                a_of.push(Mat::from_vec(
                    k,
                    k,
                    block.iter().flatten().copied().collect(),
                ));
            }
            for (x, block) in b.iter().enumerate() {
                if block.len() != n || block.iter().any(|r| r.len() != k) {
                    violations.push(Violation::new(
                        "assumption_2_noise_maps",
                        format!("B({}) must be {n}x{k}", x + 1),
                    ));
                    return None;
                }
                b_of.push(Mat::from_vec(
                    n,
                    k,
                    block.iter().flatten().copied().collect(),
                ));
            }
            match NoiseModel::new(chain, a_of, b_of) {
                Ok(m) => Some(m),
                Err(e) => {
                    let name = if matches!(e, netsa_core::noise::NoiseError::NotHurwitz { .. }) {
                        "assumption_4_hurwitz"
                    } else {
                        "assumption_2_noise_maps"
                    };
                    violations.push(Violation::new(name, e.to_string()));
                    None
                }
            }
        }
        MapsCfg::RandomHurwitz { seed, spread } => {
            match netsa_core::noise::random_hurwitz_noise(chain, n, k, *spread, *seed, 200) {
                Ok(m) => Some(m),
                Err(e) => {
                    violations.push(Violation::new("assumption_4_hurwitz", e.to_string()));
                    None
                }
            }
        }
    }
}

/// Materialize and validate. Collects every violation it can find; `Err`
/// carries the full list.
pub fn build(cfg: &Config) -> Result<BuiltInstance, Vec<Violation>> {
    let mut violations = Vec::new();
    if cfg.schema_version != SCHEMA_VERSION {
        violations.push(Violation::new(
            "schema_version",
            format!("expected {SCHEMA_VERSION}, got {}", cfg.schema_version),
        ));
    }
    if cfg.trials == 0 {
        violations.push(Violation::new(
            "trials_positive",
            "at least one trial required".into(),
        ));
    }
    if cfg.horizon == 0 {
        violations.push(Violation::new(
            "horizon_positive",
            "horizon must be positive".into(),
        ));
    }

    let engine: EngineKind = cfg.engine.into();
    let graphs = build_graphs(cfg, &mut violations);
    let weights = graphs
        .as_ref()
        .and_then(|g| build_weights(cfg, g, &mut violations));
    let noise = build_noise(cfg, &mut violations);

    // Definition-1 connectivity for the declared window
    let connectivity_check_horizon = if let Some(g) = &graphs {
        let window = g.declared_window();
        let horizon = (window as u64 * 4)
            .max(64)
            .min(cfg.horizon.max(window as u64))
            .max(window as u64);
        if !g.verify_uniform_strong_connectivity(window, horizon) {
            violations.push(Violation::new(
                "definition_1_connectivity",
                format!("no strongly connected union over some window of length {window} within horizon {horizon}"),
            ));
        }
        horizon
    } else {
        0
    };

    // orientation versus engine
    if let Some(w) = &weights {
        let want = engine.required_orientation();
        if w.orientation() != want {
            violations.push(Violation::new(
                "engine_weight_orientation",
                format!("engine needs {want:?}-stochastic weights"),
            ));
        }
        if w.beta() <= 0.0 {
            violations.push(Violation::new(
                "assumption_1_weights",
                "beta must be positive".into(),
            ));
        }
    }

    // noise dimensions versus instance
    if let Some(m) = &noise {
        if m.n_agents() != cfg.instance.n_agents {
            violations.push(Violation::new(
                "assumption_2_noise_maps",
                format!(
                    "noise defines {} agents, instance has {}",
                    m.n_agents(),
                    cfg.instance.n_agents
                ),
            ));
        }
        if m.dim() != cfg.instance.dim {
            violations.push(Violation::new(
                "assumption_2_noise_maps",
                format!(
                    "noise dimension {} vs instance {}",
                    m.dim(),
                    cfg.instance.dim
                ),
            ));
        }
    }

    let steps = match &cfg.steps {
        StepsCfg::Fixed { alpha } => StepSchedule::Fixed(*alpha),
        StepsCfg::Harmonic { alpha0 } => StepSchedule::Harmonic { alpha0: *alpha0 },
        StepsCfg::Table { values } => StepSchedule::Table(values.clone()),
    };
    if !steps.is_valid_shape() {
        violations.push(Violation::new(
            "assumption_5_step_shape",
            "step sequence must be positive and non-increasing".into(),
        ));
    }
    let assumption5_unverified =
        !steps.assumption5_certified() && matches!(cfg.steps, StepsCfg::Table { .. });

    let init = match &cfg.init {
        InitCfg::Uniform { scale } => InitSpec::Uniform { scale: *scale },
        InitCfg::Zero => InitSpec::Zero,
        InitCfg::Explicit { values } => {
            let n = cfg.instance.n_agents;
            let k = cfg.instance.dim;
            if values.len() != n || values.iter().any(|r| r.len() != k) {
                violations.push(Violation::new(
                    "init_shape",
                    format!("explicit init must be {n}x{k}"),
                ));
                InitSpec::Zero
            } else {
                InitSpec::Explicit(Mat::from_vec(
                    n,
                    k,
                    values.iter().flatten().copied().collect(),
                ))
            }
        }
    };

    match (graphs, weights, noise) {
        (Some(graphs), Some(weights), Some(noise)) if violations.is_empty() => Ok(BuiltInstance {
            graphs,
            weights,
            noise,
            steps,
            init,
            engine,
            connectivity_check_horizon,
            assumption5_unverified,
        }),
        _ => Err(violations),
    }
}

/// Content hash of the canonical JSON encoding; changes exactly when the
/// semantic configuration changes.
pub fn fingerprint(cfg: &Config) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let mut h: u64 = 0xcbf29ce484222325;
    for byte in canonical.as_bytes() {
        h ^= *byte as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

pub fn parse(text: &str) -> Result<Config, serde_json::Error> {
    serde_json::from_str(text)
}
