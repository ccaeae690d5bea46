//! Time-varying directed neighbor graphs with self-arcs.
//!
//! Agents are indexed `0..N`. An arc `(j, i)` means information flows from
//! `j` to `i`, i.e. `j` is an in-neighbor of `i`. Every graph carries a
//! self-arc at every vertex; constructors reject anything else.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::rng::{derive_seed, Rng};

const STREAM_CYCLE: u64 = 0x6772_6170_685F_6331; // block spanning-cycle stream
const STREAM_EXTRA: u64 = 0x6772_6170_685F_6532; // per-step extra-arc stream

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    ArcOutOfRange {
        arc: (usize, usize),
        n_agents: usize,
    },
    MissingSelfArc {
        vertex: usize,
    },
    MismatchedAgentCount {
        expected: usize,
        got: usize,
    },
    EmptyGraphList,
    NotStronglyConnected,
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::ArcOutOfRange { arc, n_agents } => {
                write!(
                    f,
                    "arc ({}, {}) out of range for {} agents",
                    arc.0, arc.1, n_agents
                )
            }
            GraphError::MissingSelfArc { vertex } => write!(f, "vertex {vertex} has no self-arc"),
            GraphError::MismatchedAgentCount { expected, got } => {
                write!(f, "agent count mismatch: expected {expected}, got {got}")
            }
            GraphError::EmptyGraphList => write!(f, "empty graph list"),
            GraphError::NotStronglyConnected => write!(f, "graph is not strongly connected"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GraphError {}

/// Directed graph on `n_agents` vertices with self-arcs at all vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n_agents: usize,
    arcs: BTreeSet<(usize, usize)>,
}

impl DirectedGraph {
    /// Validating constructor: all endpoints in range, self-arc at every
    /// vertex.
    pub fn new(
        n_agents: usize,
        arcs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut set = BTreeSet::new();
        for arc in arcs {
            if arc.0 >= n_agents || arc.1 >= n_agents {
                return Err(GraphError::ArcOutOfRange { arc, n_agents });
            }
            set.insert(arc);
        }
        for v in 0..n_agents {
            if !set.contains(&(v, v)) {
                return Err(GraphError::MissingSelfArc { vertex: v });
            }
        }
        Ok(DirectedGraph {
            n_agents,
            arcs: set,
        })
    }

    /// Self-arcs are inserted automatically; the extra arcs only need to be
    /// in range.
    pub fn with_self_arcs(
        n_agents: usize,
        extra: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let loops = (0..n_agents).map(|v| (v, v));
        Self::new(n_agents, loops.chain(extra))
    }

    pub fn complete(n_agents: usize) -> Self {
        let arcs = (0..n_agents).flat_map(|j| (0..n_agents).map(move |i| (j, i)));
        DirectedGraph {
            n_agents,
            arcs: arcs.collect(),
        }
    }

    pub fn self_arcs_only(n_agents: usize) -> Self {
        DirectedGraph {
            n_agents,
            arcs: (0..n_agents).map(|v| (v, v)).collect(),
        }
    }

    /// Directed ring `0 → 1 → … → n-1 → 0` plus self-arcs.
    pub fn directed_ring(n_agents: usize) -> Self {
        Self::with_self_arcs(n_agents, (0..n_agents).map(|v| (v, (v + 1) % n_agents))).unwrap()
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.arcs.iter().copied()
    }

    pub fn n_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        self.arcs.contains(&(from, to))
    }

    /// `{ j : (j, i) ∈ arcs }` — sources whose state agent `i` receives.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n_agents).filter(|&j| self.has_arc(j, i)).collect()
    }

    /// `{ k : (i, k) ∈ arcs }` — recipients of agent `i`'s messages.
    pub fn out_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n_agents).filter(|&k| self.has_arc(i, k)).collect()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_neighbors(i).len()
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out_neighbors(i).len()
    }

    fn out_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_agents];
        for &(j, i) in &self.arcs {
            if j != i {
                adj[j].push(i);
            }
        }
        adj
    }

    fn in_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_agents];
        for &(j, i) in &self.arcs {
            if j != i {
                adj[i].push(j);
            }
        }
        adj
    }

    fn bfs_reach(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; adj.len()];
        dist[start] = Some(0);
        let mut frontier = vec![start];
        let mut d = 0usize;
        while !frontier.is_empty() {
            d += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in &adj[u] {
                    if dist[v].is_none() {
                        dist[v] = Some(d);
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        dist
    }

    /// Every ordered pair of vertices joined by a directed path.
    pub fn is_strongly_connected(&self) -> bool {
        if self.n_agents <= 1 {
            return true;
        }
        let fwd = Self::bfs_reach(&self.out_adjacency(), 0);
        let bwd = Self::bfs_reach(&self.in_adjacency(), 0);
        fwd.iter().all(|d| d.is_some()) && bwd.iter().all(|d| d.is_some())
    }

    /// Max over ordered pairs of the shortest directed path length.
    /// Undefined (error) when the graph is not strongly connected.
    pub fn diameter(&self) -> Result<usize, GraphError> {
        let adj = self.out_adjacency();
        let mut diam = 0;
        for start in 0..self.n_agents {
            let dist = Self::bfs_reach(&adj, start);
            for d in &dist {
                match d {
                    Some(d) => diam = diam.max(*d),
                    None => return Err(GraphError::NotStronglyConnected),
                }
            }
        }
        Ok(diam.max(if self.n_agents > 1 { 1 } else { 0 }))
    }
}

/// Arc-set union of graphs on the same vertex set.
pub fn union_graph(graphs: &[DirectedGraph]) -> Result<DirectedGraph, GraphError> {
    let first = graphs.first().ok_or(GraphError::EmptyGraphList)?;
    let n = first.n_agents;
    let mut arcs = BTreeSet::new();
    for g in graphs {
        if g.n_agents != n {
            return Err(GraphError::MismatchedAgentCount {
                expected: n,
                got: g.n_agents,
            });
        }
        arcs.extend(g.arcs.iter().copied());
    }
    Ok(DirectedGraph { n_agents: n, arcs })
}

/// How the graph at time `t` is produced.
#[derive(Debug, Clone)]
pub enum Schedule {
    Constant(DirectedGraph),
    /// `graphs[t mod period]`.
    Periodic(Vec<DirectedGraph>),
    /// Seeded random schedule with a guaranteed-connectivity template: time
    /// is split into blocks of `block_len` steps; each block draws a random
    /// spanning cycle whose arcs are spread round-robin over the block's
    /// steps, so the union over any aligned block is strongly connected and
    /// any window of `2·block_len` consecutive steps contains a full block.
    /// Independent extra arcs are sprinkled on top per step.
    RandomTemplate {
        seed: u64,
        block_len: usize,
        extra_arc_prob: f64,
    },
    /// Arbitrary initial phase that settles into another schedule at
    /// `switch_at` (graphs after the switch are indexed by absolute time).
    Switch {
        before: alloc::boxed::Box<GraphSequence>,
        after: alloc::boxed::Box<GraphSequence>,
        switch_at: u64,
    },
}

/// Time-indexed schedule of directed graphs, all on the same agent set.
#[derive(Debug, Clone)]
pub struct GraphSequence {
    n_agents: usize,
    schedule: Schedule,
    declared_window: usize,
}

impl GraphSequence {
    pub fn constant(graph: DirectedGraph) -> Self {
        let n = graph.n_agents();
        GraphSequence {
            n_agents: n,
            schedule: Schedule::Constant(graph),
            declared_window: 1,
        }
    }

    pub fn periodic(
        graphs: Vec<DirectedGraph>,
        declared_window: usize,
    ) -> Result<Self, GraphError> {
        let first = graphs.first().ok_or(GraphError::EmptyGraphList)?;
        let n = first.n_agents();
        for g in &graphs {
            if g.n_agents() != n {
                return Err(GraphError::MismatchedAgentCount {
                    expected: n,
                    got: g.n_agents(),
                });
            }
        }
        Ok(GraphSequence {
            n_agents: n,
            schedule: Schedule::Periodic(graphs),
            declared_window,
        })
    }

    pub fn random_template(
        n_agents: usize,
        seed: u64,
        block_len: usize,
        extra_arc_prob: f64,
    ) -> Self {
        assert!(block_len >= 1);
        GraphSequence {
            n_agents,
            schedule: Schedule::RandomTemplate {
                seed,
                block_len,
                extra_arc_prob,
            },
            // Any 2·block_len window straddles at most one block boundary
            // and therefore contains one complete block.
            declared_window: 2 * block_len,
        }
    }

    /// `before` until `switch_at`, `after` from then on.
    pub fn switch_at(
        before: GraphSequence,
        after: GraphSequence,
        switch_at: u64,
    ) -> Result<Self, GraphError> {
        if before.n_agents() != after.n_agents() {
            return Err(GraphError::MismatchedAgentCount {
                expected: before.n_agents(),
                got: after.n_agents(),
            });
        }
        let n = before.n_agents();
        let declared_window = before.declared_window().max(after.declared_window());
        Ok(GraphSequence {
            n_agents: n,
            schedule: Schedule::Switch {
                before: alloc::boxed::Box::new(before),
                after: alloc::boxed::Box::new(after),
                switch_at,
            },
            declared_window,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// The uniform-strong-connectivity window this schedule claims.
    pub fn declared_window(&self) -> usize {
        self.declared_window
    }

    pub fn with_declared_window(mut self, window: usize) -> Self {
        self.declared_window = window;
        self
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// The graph emitted at time `t`; pure in `(self, t)`.
    pub fn graph_at(&self, t: u64) -> DirectedGraph {
        match &self.schedule {
            Schedule::Constant(g) => g.clone(),
            Schedule::Periodic(gs) => gs[(t % gs.len() as u64) as usize].clone(),
            Schedule::RandomTemplate {
                seed,
                block_len,
                extra_arc_prob,
            } => self.random_graph_at(*seed, *block_len, *extra_arc_prob, t),
            Schedule::Switch {
                before,
                after,
                switch_at,
            } => {
                if t < *switch_at {
                    before.graph_at(t)
                } else {
                    after.graph_at(t)
                }
            }
        }
    }

    fn random_graph_at(
        &self,
        seed: u64,
        block_len: usize,
        extra_arc_prob: f64,
        t: u64,
    ) -> DirectedGraph {
        let n = self.n_agents;
        let block = t / block_len as u64;
        let slot = (t % block_len as u64) as usize;
        let mut cycle_rng = Rng::new(derive_seed(seed, STREAM_CYCLE, block));
        let mut perm: Vec<usize> = (0..n).collect();
        cycle_rng.shuffle(&mut perm);
        let mut arcs: BTreeSet<(usize, usize)> = (0..n).map(|v| (v, v)).collect();
        for k in 0..n {
            if k % block_len == slot {
                arcs.insert((perm[k], perm[(k + 1) % n]));
            }
        }
        let mut extra_rng = Rng::new(derive_seed(seed, STREAM_EXTRA, t));
        for j in 0..n {
            for i in 0..n {
                if j != i && extra_rng.chance(extra_arc_prob) {
                    arcs.insert((j, i));
                }
            }
        }
        DirectedGraph { n_agents: n, arcs }
    }

    /// Union of the graphs emitted on `[start, start + len)`.
    pub fn union_window(&self, start: u64, len: usize) -> DirectedGraph {
        let graphs: Vec<DirectedGraph> =
            (0..len as u64).map(|k| self.graph_at(start + k)).collect();
        union_graph(&graphs).expect("schedule emits graphs on a fixed agent set")
    }

    /// Window starts that must be checked to certify the whole sequence.
    /// Periodic schedules repeat with their period, so one period of window
    /// starts certifies every `t`; random schedules are checked on the given
    /// horizon (their template guarantees the declared window by
    /// construction).
    fn certification_starts(&self, window: usize, horizon: u64) -> u64 {
        let span = match &self.schedule {
            Schedule::Constant(_) => 1,
            Schedule::Periodic(gs) => gs.len() as u64,
            Schedule::RandomTemplate { .. } => horizon.saturating_sub(window as u64 - 1),
            // everything before the switch plus one certification span of
            // the tail schedule
            Schedule::Switch {
                after, switch_at, ..
            } => {
                switch_at
                    + after.certification_starts(
                        window,
                        horizon.saturating_sub(*switch_at).max(window as u64),
                    )
            }
        };
        span.min(horizon.saturating_sub(window as u64 - 1)).max(1)
    }

    /// Definition check: is every length-`window` union on `[0, horizon]`
    /// strongly connected? For constant and periodic schedules a pass
    /// certifies all `t ≥ 0`, not just the horizon.
    pub fn verify_uniform_strong_connectivity(&self, window: usize, horizon: u64) -> bool {
        if window == 0 || horizon < window as u64 {
            return false;
        }
        let starts = self.certification_starts(window, horizon);
        (0..starts).all(|s| self.union_window(s, window).is_strongly_connected())
    }

    /// `max_t diameter(∪_{k=t}^{t+window-1} G_k)` over the certified window
    /// starts. Errors if some window union is not strongly connected.
    pub fn delta_max(&self, window: usize, horizon: u64) -> Result<usize, GraphError> {
        if window == 0 || horizon < window as u64 {
            return Err(GraphError::NotStronglyConnected);
        }
        let starts = self.certification_starts(window, horizon);
        let mut delta = 0;
        for s in 0..starts {
            delta = delta.max(self.union_window(s, window).diameter()?);
        }
        Ok(delta)
    }
}
