//! Shipped experiment presets. Each returns a complete `Config`; acceptance
//! and exploratory runs tweak copies of these rather than hand-writing JSON.

use netsa_core::linalg::Mat;
use netsa_core::noise::{InitialState, MarkovChain};
use netsa_core::rng::Rng;

use crate::config::{
    BoundsCfg, ChainCfg, ChainInitCfg, Config, EngineCfg, GraphCfg, InitCfg, InstanceCfg, MapsCfg,
    NoiseCfg, StepsCfg, WeightsCfg, SCHEMA_VERSION,
};

pub const PRESET_NAMES: [&str; 7] = [
    "doubly_stochastic_baseline",
    "fixed_left_eigenvector",
    "unstable_then_fixed",
    "push_directed_n4",
    "adversarial_periodic",
    "td_demo",
    "single_agent_fixed",
];

pub fn preset(name: &str) -> Option<Config> {
    match name {
        "doubly_stochastic_baseline" => Some(doubly_stochastic_baseline()),
        "fixed_left_eigenvector" => Some(fixed_left_eigenvector()),
        "unstable_then_fixed" => Some(unstable_then_fixed()),
        "push_directed_n4" => Some(push_directed_n4()),
        "adversarial_periodic" => Some(adversarial_periodic()),
        "td_demo" => Some(td_demo()),
        "single_agent_fixed" => Some(single_agent_fixed()),
        _ => None,
    }
}

/// Complete graph with equal-neighbor weights: doubly stochastic mixing,
/// uniform limit weighting. Sanity baseline for every identity.
fn doubly_stochastic_baseline() -> Config {
    Config {
        schema_version: SCHEMA_VERSION,
        name: "doubly_stochastic_baseline".into(),
        instance: InstanceCfg {
            n_agents: 3,
            dim: 1,
            graph: GraphCfg::Complete,
            weights: WeightsCfg::EqualNeighbor,
            noise: NoiseCfg {
                chain: ChainCfg::LazyTwoState { stay_prob: 0.75 },
                initial: ChainInitCfg::Fixed { state: 1 },
                maps: MapsCfg::Explicit {
                    a: vec![vec![vec![-1.2]], vec![vec![-0.8]]],
                    b: vec![
                        vec![vec![1.1], vec![0.2], vec![-0.7]],
                        vec![vec![0.9], vec![-0.2], vec![-0.5]],
                    ],
                },
            },
        },
        engine: EngineCfg::Consensus,
        steps: StepsCfg::Harmonic { alpha0: 1.0 },
        horizon: 4000,
        trials: 8,
        master_seed: 2024,
        record_stride: 0,
        init: InitCfg::Uniform { scale: 1.0 },
        bounds: None,
        output_dir: None,
    }
}

/// Appendix-B Case 1 flavor: one fixed row-stochastic matrix, hence one
/// left eigenvector `(2/3, 1/3)` shared by every step. Ships with a
/// certified-feasible fixed step and bounds enabled.
fn fixed_left_eigenvector() -> Config {
    Config {
        schema_version: SCHEMA_VERSION,
        name: "fixed_left_eigenvector".into(),
        instance: InstanceCfg {
            n_agents: 2,
            dim: 1,
            graph: GraphCfg::Complete,
            weights: WeightsCfg::Explicit {
                matrices: vec![vec![vec![0.75, 0.25], vec![0.5, 0.5]]],
                beta: 0.25,
            },
            noise: NoiseCfg {
                chain: ChainCfg::LazyTwoState { stay_prob: 0.75 },
                initial: ChainInitCfg::Fixed { state: 1 },
                maps: MapsCfg::Explicit {
                    a: vec![vec![vec![-1.2]], vec![vec![-0.8]]],
                    b: vec![vec![vec![1.2], vec![-0.1]], vec![vec![0.8], vec![0.1]]],
                },
            },
        },
        engine: EngineCfg::Consensus,
        steps: StepsCfg::Fixed { alpha: 4e-6 },
        horizon: 600_000,
        trials: 64,
        master_seed: 11,
        record_stride: 0,
        init: InitCfg::Uniform { scale: 1.0 },
        bounds: Some(BoundsCfg {
            enabled: true,
            search_cap: 2000,
            aps_burn_in: 400,
        }),
        output_dir: None,
    }
}

/// Appendix-B Case 2: seeded arbitrary strongly-connected-by-blocks phase
/// for the first 50 steps, a fixed directed graph afterwards. N = 5, K = 2.
fn unstable_then_fixed() -> Config {
    // fixed tail: directed ring 1→2→3→4→5→1 plus two chords
    let fixed_arcs = vec![[1, 2], [2, 3], [3, 4], [4, 5], [5, 1], [1, 3], [4, 1]];
    Config {
        schema_version: SCHEMA_VERSION,
        name: "unstable_then_fixed".into(),
        instance: InstanceCfg {
            n_agents: 5,
            dim: 2,
            graph: GraphCfg::UnstableThenFixed {
                seed: 404,
                block_len: 2,
                extra_arc_prob: 0.25,
                switch_at: 50,
                fixed_arcs,
            },
            weights: WeightsCfg::EqualNeighbor,
            noise: NoiseCfg {
                chain: ChainCfg::LazyTwoState { stay_prob: 0.7 },
                initial: ChainInitCfg::Stationary,
                maps: MapsCfg::Explicit {
                    a: vec![
                        vec![vec![-0.7, 0.1], vec![0.1, -1.0]],
                        vec![vec![-1.3, 0.3], vec![-0.1, -0.6]],
                    ],
                    b: vec![
                        vec![
                            vec![1.4, -0.2],
                            vec![0.3, 0.8],
                            vec![-0.9, 0.5],
                            vec![0.6, -1.1],
                            vec![-0.4, 0.2],
                        ],
                        vec![
                            vec![1.0, 0.2],
                            vec![0.5, 0.4],
                            vec![-0.7, 0.7],
                            vec![0.4, -0.9],
                            vec![-0.2, 0.0],
                        ],
                    ],
                },
            },
        },
        engine: EngineCfg::Consensus,
        steps: StepsCfg::Harmonic { alpha0: 2.0 },
        horizon: 200_000,
        trials: 32,
        master_seed: 500,
        record_stride: 0,
        init: InitCfg::Uniform { scale: 1.0 },
        bounds: None,
        output_dir: None,
    }
}

/// Directed push-sum instance: N = 4 over a seeded template schedule with
/// window 2, i.i.d. two-state noise, zero init. Bounds enabled (the anchor
/// search needs the dense disturbance window).
fn push_directed_n4() -> Config {
    Config {
        schema_version: SCHEMA_VERSION,
        name: "push_directed_n4".into(),
        instance: InstanceCfg {
            n_agents: 4,
            dim: 1,
            graph: GraphCfg::RandomTemplate {
                seed: 31,
                block_len: 1,
                extra_arc_prob: 0.35,
                declared_window: Some(2),
            },
            weights: WeightsCfg::Push,
            noise: NoiseCfg {
                chain: ChainCfg::Iid {
                    probs: vec![0.5, 0.5],
                },
                initial: ChainInitCfg::Stationary,
                maps: MapsCfg::Explicit {
                    a: vec![vec![vec![-1.1]], vec![vec![-0.9]]],
                    b: vec![
                        vec![vec![0.55], vec![0.15], vec![-0.25], vec![0.25]],
                        vec![vec![0.45], vec![0.05], vec![-0.15], vec![0.15]],
                    ],
                },
            },
        },
        engine: EngineCfg::Push,
        steps: StepsCfg::Harmonic { alpha0: 0.56 },
        horizon: 40_000,
        trials: 32,
        master_seed: 77,
        record_stride: 0,
        init: InitCfg::Zero,
        bounds: Some(BoundsCfg {
            enabled: true,
            search_cap: 14_000,
            aps_burn_in: 400,
        }),
        output_dir: None,
    }
}

/// Alternating matrices with different left eigenvectors: the absolute
/// probability sequence oscillates and has no limit, so limit-dependent
/// quantities must be refused while consensus itself still holds.
fn adversarial_periodic() -> Config {
    Config {
        schema_version: SCHEMA_VERSION,
        name: "adversarial_periodic".into(),
        instance: InstanceCfg {
            n_agents: 2,
            dim: 1,
            graph: GraphCfg::Complete,
            weights: WeightsCfg::Explicit {
                matrices: vec![
                    vec![vec![0.9, 0.1], vec![0.1, 0.9]],
                    vec![vec![0.2, 0.8], vec![0.7, 0.3]],
                ],
                beta: 0.1,
            },
            noise: NoiseCfg {
                chain: ChainCfg::LazyTwoState { stay_prob: 0.8 },
                initial: ChainInitCfg::Fixed { state: 1 },
                maps: MapsCfg::Explicit {
                    a: vec![vec![vec![-1.0]], vec![vec![-1.0]]],
                    b: vec![vec![vec![1.5], vec![-0.5]], vec![vec![0.5], vec![0.5]]],
                },
            },
        },
        engine: EngineCfg::Consensus,
        steps: StepsCfg::Harmonic { alpha0: 1.0 },
        horizon: 20_000,
        trials: 8,
        master_seed: 13,
        record_stride: 0,
        init: InitCfg::Uniform { scale: 1.0 },
        bounds: None,
        output_dir: None,
    }
}

/// Temporal-difference policy evaluation as linear stochastic
/// approximation: the Markov state is the transition pair `(s, s')`, the
/// drift matrix is `φ(s)(γ φ(s') − φ(s))ᵀ`, and each agent sees its own
/// slice of the reward.
fn td_demo() -> Config {
    let (chain_cfg, maps_cfg) = build_td_instance(7, 3, 2, 3);
    Config {
        schema_version: SCHEMA_VERSION,
        name: "td_demo".into(),
        instance: InstanceCfg {
            n_agents: 3,
            dim: 2,
            graph: GraphCfg::Complete,
            weights: WeightsCfg::EqualNeighbor,
            noise: NoiseCfg {
                chain: chain_cfg,
                initial: ChainInitCfg::Stationary,
                maps: maps_cfg,
            },
        },
        engine: EngineCfg::Consensus,
        steps: StepsCfg::Harmonic { alpha0: 1.0 },
        horizon: 100_000,
        trials: 16,
        master_seed: 99,
        record_stride: 0,
        init: InitCfg::Uniform { scale: 0.5 },
        bounds: None,
        output_dir: None,
    }
}

fn single_agent_fixed() -> Config {
    Config {
        schema_version: SCHEMA_VERSION,
        name: "single_agent_fixed".into(),
        instance: InstanceCfg {
            n_agents: 1,
            dim: 1,
            graph: GraphCfg::Complete,
            weights: WeightsCfg::EqualNeighbor,
            noise: NoiseCfg {
                chain: ChainCfg::SingleState,
                initial: ChainInitCfg::Fixed { state: 1 },
                maps: MapsCfg::Explicit {
                    a: vec![vec![vec![-1.0]]],
                    b: vec![vec![vec![1.0]]],
                },
            },
        },
        engine: EngineCfg::Consensus,
        steps: StepsCfg::Fixed { alpha: 0.01 },
        horizon: 3000,
        trials: 4,
        master_seed: 1,
        record_stride: 0,
        init: InitCfg::Zero,
        bounds: None,
        output_dir: None,
    }
}

/// Sample a TD policy-evaluation instance over the pair chain of a random
/// everywhere-positive base transition matrix, resampling features until
/// the drift limit verifies as Hurwitz.
///
/// Returns the explicit chain and map blocks; states are pairs `(s, s')`
/// flattened as `s * n_base + s'`. Rewards are split so the agents' uniform
/// average equals the pooled reward (drawn before the split, so instances
/// with the same seed share it regardless of agent count), keeping the
/// straight-average target equal to the single-agent fixed point of the
/// averaged problem.
pub fn build_td_instance(
    seed: u64,
    n_base_states: usize,
    dim: usize,
    n_agents: usize,
) -> (ChainCfg, MapsCfg) {
    build_td_instance_scaled(seed, n_base_states, dim, n_agents, 1.0)
}

pub fn build_td_instance_scaled(
    seed: u64,
    n_base_states: usize,
    dim: usize,
    n_agents: usize,
    reward_scale: f64,
) -> (ChainCfg, MapsCfg) {
    let discount = 0.9;
    let mut rng = Rng::new(seed);
    // base transition with all entries positive: pair chain is ergodic
    let mut p = Mat::zeros(n_base_states, n_base_states);
    for s in 0..n_base_states {
        let row: Vec<f64> = (0..n_base_states).map(|_| 0.2 + rng.uniform()).collect();
        let total: f64 = row.iter().sum();
        for (s2, v) in row.iter().enumerate() {
            p.set(s, s2, v / total);
        }
    }
    let n_pairs = n_base_states * n_base_states;
    let mut transition = vec![vec![0.0; n_pairs]; n_pairs];
    for s in 0..n_base_states {
        for s1 in 0..n_base_states {
            let from = s * n_base_states + s1;
            for s2 in 0..n_base_states {
                transition[from][s1 * n_base_states + s2] = p.at(s1, s2);
            }
        }
    }

    // resample features until the averaged drift is Hurwitz with margin
    let chain = MarkovChain::new(
        Mat::from_vec(
            n_pairs,
            n_pairs,
            transition.iter().flatten().copied().collect(),
        ),
        InitialState::Fixed(0),
    )
    .expect("pair chain of a positive base matrix is ergodic");
    let mu = chain.stationary_distribution().to_vec();
    let features = loop {
        let phi: Vec<Vec<f64>> = (0..n_base_states)
            .map(|_| (0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            .collect();
        let mut a_limit = Mat::zeros(dim, dim);
        for s in 0..n_base_states {
            for s1 in 0..n_base_states {
                let x = s * n_base_states + s1;
                for r in 0..dim {
                    for c in 0..dim {
                        let v = phi[s][r] * (discount * phi[s1][c] - phi[s][c]);
                        a_limit.add_at(r, c, mu[x] * v);
                    }
                }
            }
        }
        if let Ok(re) = netsa_core::linalg::max_eigenvalue_real_part(&a_limit) {
            if re < -1e-3 {
                break phi;
            }
        }
    };

    // pooled rewards first (agent-count independent), then zero-mean splits
    let pooled: Vec<f64> = (0..n_pairs)
        .map(|_| reward_scale * rng.uniform_in(0.0, 2.0))
        .collect();
    let mut a_blocks = Vec::with_capacity(n_pairs);
    let mut b_blocks = Vec::with_capacity(n_pairs);
    for s in 0..n_base_states {
        for s1 in 0..n_base_states {
            let x = s * n_base_states + s1;
            let mut a = vec![vec![0.0; dim]; dim];
            for (r, a_row) in a.iter_mut().enumerate() {
                for (c, cell) in a_row.iter_mut().enumerate() {
                    *cell = features[s][r] * (discount * features[s1][c] - features[s][c]);
                }
            }
            a_blocks.push(a);
            let mut offsets: Vec<f64> = (0..n_agents)
                .map(|_| reward_scale * rng.uniform_in(-0.5, 0.5))
                .collect();
            let mean_offset: f64 = offsets.iter().sum::<f64>() / n_agents as f64;
            for o in offsets.iter_mut() {
                *o -= mean_offset;
            }
            let b: Vec<Vec<f64>> = offsets
                .iter()
                .map(|o| features[s].iter().map(|f| (pooled[x] + o) * f).collect())
                .collect();
            b_blocks.push(b);
        }
    }
    (
        ChainCfg::Explicit { transition },
        MapsCfg::Explicit {
            a: a_blocks,
            b: b_blocks,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use netsa_core::analysis::{solve_equilibrium, Weighting};
    use netsa_core::noise::NoiseModel;

    fn model_from(chain_cfg: &ChainCfg, maps_cfg: &MapsCfg) -> NoiseModel {
        let ChainCfg::Explicit { transition } = chain_cfg else {
            panic!("explicit chain")
        };
        let MapsCfg::Explicit { a, b } = maps_cfg else {
            panic!("explicit maps")
        };
        let n = transition.len();
        let chain = MarkovChain::new(
            Mat::from_vec(n, n, transition.iter().flatten().copied().collect()),
            InitialState::Fixed(0),
        )
        .unwrap();
        let dim = a[0].len();
        let agents = b[0].len();
        let a_of: Vec<Mat> = a
            .iter()
            .map(|blk| Mat::from_vec(dim, dim, blk.iter().flatten().copied().collect()))
            .collect();
        let b_of: Vec<Mat> = b
            .iter()
            .map(|blk| Mat::from_vec(agents, dim, blk.iter().flatten().copied().collect()))
            .collect();
        NoiseModel::new(chain, a_of, b_of).unwrap()
    }

    fn uniform_target(model: &NoiseModel) -> Vec<f64> {
        solve_equilibrium(model.a_limit(), model.b_limits(), Weighting::Uniform)
            .unwrap()
            .theta_star
    }

    #[test]
    fn td_zero_rewards_fix_point_at_origin() {
        let (chain, maps) = build_td_instance_scaled(7, 3, 2, 2, 0.0);
        let model = model_from(&chain, &maps);
        let target = uniform_target(&model);
        assert!(target.iter().all(|v| v.abs() < 1e-12), "{target:?}");
    }

    /// Single-agent fixed point against an independently assembled oracle:
    /// the drift limit is recomputed through the closed form
    /// `Φᵀ D (γP − I) Φ` from the base quantities.
    #[test]
    fn td_single_agent_matches_closed_form_oracle() {
        let seed = 11;
        let (n_base, dim) = (3usize, 2usize);
        let (chain_cfg, maps_cfg) = build_td_instance(seed, n_base, dim, 1);
        let model = model_from(&chain_cfg, &maps_cfg);
        let target = uniform_target(&model);

        // oracle: recover phi rows and P from the emitted blocks.
        // A((s,s')) = phi(s)(0.9 phi(s') - phi(s))^T and the pair-chain rows
        // encode P directly
        let ChainCfg::Explicit { transition } = &chain_cfg else {
            unreachable!()
        };
        let mut p = Mat::zeros(n_base, n_base);
        for s1 in 0..n_base {
            for s2 in 0..n_base {
                p.set(s1, s2, transition[s1 /* (0, s1) */][s1 * n_base + s2]);
            }
        }
        // stationary of the base chain
        let base_chain = MarkovChain::new(p.clone(), InitialState::Fixed(0)).unwrap();
        let d = base_chain.stationary_distribution().to_vec();
        // pair stationary is mu(s) P(s,s'); re-derive A and b directly
        let MapsCfg::Explicit { a, b } = &maps_cfg else {
            unreachable!()
        };
        let mut a_limit = Mat::zeros(dim, dim);
        let mut b_limit = vec![0.0; dim];
        for (s, &d_s) in d.iter().enumerate() {
            for s1 in 0..n_base {
                let x = s * n_base + s1;
                let w = d_s * p.at(s, s1);
                for (r, b_acc) in b_limit.iter_mut().enumerate() {
                    for (c, v) in a[x][r].iter().enumerate() {
                        a_limit.add_at(r, c, w * v);
                    }
                    *b_acc += w * b[x][0][r];
                }
            }
        }
        let neg_b: Vec<f64> = b_limit.iter().map(|v| -v).collect();
        let oracle = netsa_core::linalg::solve(&a_limit, &neg_b).unwrap();
        for (got, want) in target.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-9, "{target:?} vs {oracle:?}");
        }
    }

    /// The reward split never moves the straight-average target: instances
    /// with 1 and 2 agents built over the same seed share the pooled reward
    /// and therefore the fixed point of the averaged problem.
    #[test]
    fn td_reward_split_preserves_pooled_target() {
        let seed = 23;
        let (c1, m1) = build_td_instance(seed, 3, 2, 1);
        let (c2, m2) = build_td_instance(seed, 3, 2, 2);
        assert_eq!(c1, c2, "same chain for both agent counts");
        let t1 = uniform_target(&model_from(&c1, &m1));
        let t2 = uniform_target(&model_from(&c2, &m2));
        for (a, b) in t1.iter().zip(&t2) {
            assert!((a - b).abs() < 1e-12, "{t1:?} vs {t2:?}");
        }
        // and the two agents' rewards genuinely differ
        let MapsCfg::Explicit { b, .. } = &m2 else {
            unreachable!()
        };
        assert!(b.iter().any(|blk| (blk[0][0] - blk[1][0]).abs() > 1e-6));
    }
}
