//! Independent reference implementations of the raw per-agent recursions,
//! written as plain scalar loops with no shared code path through the
//! engine's matrix kernels, replayed against full engine runs.

#![allow(clippy::needless_range_loop)]

use netsa_core::engine::{run, EngineKind, InitSpec, RunSpec, StepSchedule};
use netsa_core::graph::GraphSequence;
use netsa_core::linalg::Mat;
use netsa_core::noise::{InitialState, MarkovChain, NoiseModel};
use netsa_core::weights::WeightSchedule;

fn test_noise(n_agents: usize, dim: usize) -> NoiseModel {
    let chain = MarkovChain::new(
        Mat::from_rows(&[&[0.7, 0.3], &[0.4, 0.6]]),
        InitialState::Fixed(1),
    )
    .unwrap();
    let mut a0 = Mat::zeros(dim, dim);
    let mut a1 = Mat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let base = if i == j {
                -1.0
            } else {
                0.15 * (i as f64 - j as f64)
            };
            a0.set(i, j, base + 0.2);
            // stationary is (4/7, 3/7); offsets with weighted mean zero
            a1.set(i, j, base - 0.2 * 4.0 / 3.0);
        }
    }
    let mut b0 = Mat::zeros(n_agents, dim);
    let mut b1 = Mat::zeros(n_agents, dim);
    for i in 0..n_agents {
        for k in 0..dim {
            b0.set(i, k, 0.3 * (i as f64 + 1.0) - 0.2 * k as f64);
            b1.set(i, k, -0.1 * (i as f64 + 1.0) + 0.4 * k as f64);
        }
    }
    NoiseModel::new(chain, vec![a0, a1], vec![b0, b1]).unwrap()
}

/// θ'ᵢ = Σⱼ wᵢⱼθⱼ + α(A Σⱼ wᵢⱼθⱼ + bᵢ), agent by agent.
fn naive_consensus_step(
    theta: &[Vec<f64>],
    w: &Mat,
    a: &Mat,
    b: &Mat,
    alpha: f64,
) -> Vec<Vec<f64>> {
    let n = theta.len();
    let k = theta[0].len();
    let mut out = vec![vec![0.0; k]; n];
    for i in 0..n {
        let mut mixed = vec![0.0; k];
        for j in 0..n {
            let wij = w.at(i, j);
            if wij == 0.0 {
                continue;
            }
            for c in 0..k {
                mixed[c] += wij * theta[j][c];
            }
        }
        for c in 0..k {
            let mut drift = 0.0;
            for m in 0..k {
                drift += a.at(c, m) * mixed[m];
            }
            out[i][c] = mixed[c] + alpha * (drift + b.at(i, c));
        }
    }
    out
}

/// y'ᵢ = Σⱼ ŵᵢⱼyⱼ; θ̃'ᵢ = Σⱼ ŵᵢⱼ(θ̃ⱼ + α(Aθⱼ + bⱼ)); θ'ᵢ = θ̃'ᵢ/y'ᵢ.
#[allow(clippy::type_complexity)]
fn naive_push_step(
    tilde: &[Vec<f64>],
    y: &[f64],
    hat_w: &Mat,
    a: &Mat,
    b: &Mat,
    alpha: f64,
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let n = tilde.len();
    let k = tilde[0].len();
    let mut payload = vec![vec![0.0; k]; n];
    for j in 0..n {
        for c in 0..k {
            let mut drift = 0.0;
            for m in 0..k {
                drift += a.at(c, m) * tilde[j][m] / y[j];
            }
            payload[j][c] = tilde[j][c] + alpha * (drift + b.at(j, c));
        }
    }
    let mut y_next = vec![0.0; n];
    let mut tilde_next = vec![vec![0.0; k]; n];
    for i in 0..n {
        for j in 0..n {
            let wij = hat_w.at(i, j);
            if wij == 0.0 {
                continue;
            }
            y_next[i] += wij * y[j];
            for c in 0..k {
                tilde_next[i][c] += wij * payload[j][c];
            }
        }
    }
    let ratio: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..k).map(|c| tilde_next[i][c] / y_next[i]).collect())
        .collect();
    (tilde_next, y_next, ratio)
}

#[test]
fn consensus_engine_matches_naive_reference() {
    let n = 3;
    let k = 2;
    let seq = GraphSequence::random_template(n, 99, 2, 0.3);
    let weights = WeightSchedule::equal_neighbor(seq);
    let noise = test_noise(n, k);
    let steps = StepSchedule::Harmonic { alpha0: 0.8 };
    let horizon = 200;
    let spec = RunSpec {
        engine: EngineKind::Consensus,
        weights: &weights,
        noise: &noise,
        steps: &steps,
        horizon,
        record_stride: 1,
        dense_until: 0,
        mu_dense_until: 0,
        init: InitSpec::Uniform { scale: 1.0 },
    };
    let (traj, _) = run(&spec, 424_242, None).unwrap();

    // replay from the recorded initial state along the same noise path
    let mut theta: Vec<Vec<f64>> = (0..n).map(|i| traj.theta[0].row(i).to_vec()).collect();
    for t in 0..horizon {
        let x = traj.noise_path[t as usize];
        let w = weights.weight_at(t);
        theta = naive_consensus_step(
            &theta,
            w.mat(),
            noise.a_of(x),
            noise.b_of(x),
            steps.alpha(t),
        );
        let snapshot = &traj.theta[(t + 1) as usize];
        for i in 0..n {
            for c in 0..k {
                let gap = (theta[i][c] - snapshot.at(i, c)).abs();
                assert!(gap <= 1e-13, "t = {t}, agent {i}, entry {c}: gap {gap}");
            }
        }
    }
}

#[test]
fn push_engine_matches_naive_reference() {
    let n = 4;
    let k = 1;
    let seq = GraphSequence::random_template(n, 7, 1, 0.35).with_declared_window(2);
    let weights = WeightSchedule::push(seq);
    let noise = test_noise(n, k);
    let steps = StepSchedule::Harmonic { alpha0: 0.6 };
    let horizon = 300;
    let spec = RunSpec {
        engine: EngineKind::Push,
        weights: &weights,
        noise: &noise,
        steps: &steps,
        horizon,
        record_stride: 1,
        dense_until: 0,
        mu_dense_until: 0,
        init: InitSpec::Uniform { scale: 1.0 },
    };
    let (traj, audit) = run(&spec, 31_337, None).unwrap();
    assert!(audit.mass_conservation_residual <= 1e-10);

    let tildes = traj.theta_tilde.as_ref().unwrap();
    let ys = traj.y.as_ref().unwrap();
    let mut tilde: Vec<Vec<f64>> = (0..n).map(|i| tildes[0].row(i).to_vec()).collect();
    let mut y: Vec<f64> = ys[0].clone();
    for t in 0..horizon {
        let x = traj.noise_path[t as usize];
        let hat = weights.weight_at(t);
        let (tilde_next, y_next, ratio) = naive_push_step(
            &tilde,
            &y,
            hat.mat(),
            noise.a_of(x),
            noise.b_of(x),
            steps.alpha(t),
        );
        tilde = tilde_next;
        y = y_next;
        let s = (t + 1) as usize;
        for i in 0..n {
            let y_gap = (y[i] - ys[s][i]).abs();
            assert!(y_gap <= 1e-13, "t = {t}: y gap {y_gap}");
            for c in 0..k {
                let gap = (tilde[i][c] - tildes[s].at(i, c)).abs();
                assert!(gap <= 1e-12, "t = {t}: tilde gap {gap}");
                let r_gap = (ratio[i][c] - traj.theta[s].at(i, c)).abs();
                assert!(r_gap <= 1e-12, "t = {t}: ratio gap {r_gap}");
            }
        }
    }
}
