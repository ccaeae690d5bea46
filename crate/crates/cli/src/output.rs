//! Deterministic file output. All CSVs are written through a single buffered
//! writer with Rust's shortest-round-trip float formatting, so identical
//! data produces identical bytes.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use netsa_core::analysis::ErrorSeries;
use netsa_core::engine::Trajectory;
use netsa_core::weights::AbsoluteProbabilitySequence;

use crate::bounds::BoundsOutcome;

pub fn ensure_dir(dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)
}

/// `t,trial,agent,k,value` long format (1-based trial/agent/k).
pub fn write_trajectories(dir: &Path, trajectories: &[Trajectory]) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(dir.join("trajectory.csv"))?);
    writeln!(w, "t,trial,agent,k,value")?;
    for (trial, traj) in trajectories.iter().enumerate() {
        for (s, &t) in traj.times.iter().enumerate() {
            let theta = &traj.theta[s];
            for agent in 0..theta.rows() {
                for k in 0..theta.cols() {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        t,
                        trial + 1,
                        agent + 1,
                        k + 1,
                        theta.at(agent, k)
                    )?;
                }
            }
        }
    }
    w.flush()
}

/// `t,trial,agent,value` mass vectors (push runs only).
pub fn write_push_mass(dir: &Path, trajectories: &[Trajectory]) -> std::io::Result<()> {
    if trajectories.iter().any(|t| t.y.is_none()) {
        return Ok(());
    }
    let mut w = BufWriter::new(fs::File::create(dir.join("push_y.csv"))?);
    writeln!(w, "t,trial,agent,value")?;
    for (trial, traj) in trajectories.iter().enumerate() {
        let ys = traj.y.as_ref().unwrap();
        for (s, &t) in traj.times.iter().enumerate() {
            for (agent, v) in ys[s].iter().enumerate() {
                writeln!(w, "{},{},{},{}", t, trial + 1, agent + 1, v)?;
            }
        }
    }
    w.flush()
}

/// `t,metric,mean,stderr,trials`; η rows are deterministic (zero stderr)
/// and bound rows use metric `bound_rhs`, so the dominance verdict is
/// recomputable from this file alone.
pub fn write_error_series(
    dir: &Path,
    series: &ErrorSeries,
    eta: Option<&netsa_core::analysis::EtaSeries>,
    bounds: Option<&BoundsOutcome>,
    include_weighted_mse: bool,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(dir.join("errors.csv"))?);
    writeln!(w, "t,metric,mean,stderr,trials")?;
    for (i, &t) in series.times.iter().enumerate() {
        if include_weighted_mse {
            let s = series.weighted_mse[i];
            writeln!(
                w,
                "{},weighted_mse,{},{},{}",
                t, s.mean, s.se, series.trials
            )?;
        }
        let c = series.consensus_error[i];
        writeln!(
            w,
            "{},consensus_error,{},{},{}",
            t, c.mean, c.se, series.trials
        )?;
        if let Some(eta) = eta {
            writeln!(w, "{},eta,{},0,0", t, eta.get(t))?;
        }
        if let Some(mu) = &series.mu {
            writeln!(w, "{},mu,{},{},{}", t, mu[i].mean, mu[i].se, series.trials)?;
        }
        if let Some(cum) = &series.mu_cumsum {
            writeln!(
                w,
                "{},mu_cumsum,{},{},{}",
                t, cum[i].mean, cum[i].se, series.trials
            )?;
        }
    }
    if let Some(b) = bounds {
        for &(t, rhs) in &b.rhs_at {
            writeln!(w, "{t},bound_rhs,{rhs},0,0")?;
        }
    }
    w.flush()
}

/// `t,pi_1..pi_N`.
pub fn write_aps(dir: &Path, aps: &AbsoluteProbabilitySequence) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(dir.join("aps.csv"))?);
    let n = aps.pi(0).len();
    let header: Vec<String> = (1..=n).map(|i| format!("pi_{i}")).collect();
    writeln!(w, "t,{}", header.join(","))?;
    for (t, pi) in aps.vectors().iter().enumerate() {
        let row: Vec<String> = pi.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{},{}", t, row.join(","))?;
    }
    w.flush()
}

/// Sparse `i,j,value` triplets of a matrix (1-based indices).
pub fn write_matrix_triplets(path: &Path, mat: &netsa_core::Mat) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "i,j,value")?;
    for i in 0..mat.rows() {
        for j in 0..mat.cols() {
            let v = mat.at(i, j);
            if v != 0.0 {
                writeln!(w, "{},{},{}", i + 1, j + 1, v)?;
            }
        }
    }
    w.flush()
}

/// Edge list, one `j i` pair per line (1-based).
pub fn write_edge_list(
    path: &Path,
    graph: &netsa_core::graph::DirectedGraph,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (j, i) in graph.arcs() {
        writeln!(w, "{} {}", j + 1, i + 1)?;
    }
    w.flush()
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}
