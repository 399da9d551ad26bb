//! Exact optimal-transport distances between distributions on a lattice.
//!
//! The ground cost is the lattice L1 distance, which equals the shortest-path
//! length on the 4-neighbour graph. Transport under that cost is therefore a
//! min-cost flow on the lattice graph itself with unit edge costs and
//! unbounded capacities, which needs only `O(|X|)` edges.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::distribution::{Distribution, MFFlow};
use crate::error::{check_at_least, check_len, MfgError, Result};
use crate::space::{Geometry, StateSpace};

/// Lattice L1 distance times a unit: `1 / diameter` when normalized, `1`
/// in raw cell units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundMetric {
    space: StateSpace,
    unit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricScale {
    #[default]
    Normalized,
    Raw,
}

impl GroundMetric {
    pub fn new(space: &StateSpace, scale: MetricScale) -> Self {
        let unit = match scale {
            MetricScale::Raw => 1.0,
            MetricScale::Normalized => 1.0 / space.diameter().max(1) as f64,
        };
        Self {
            space: *space,
            unit,
        }
    }

    pub fn normalized(space: &StateSpace) -> Self {
        Self::new(space, MetricScale::Normalized)
    }

    pub fn raw(space: &StateSpace) -> Self {
        Self::new(space, MetricScale::Raw)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Length of one lattice step.
    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.space.l1(x, y) as f64 * self.unit
    }

    /// Dense `|X| x |X|` distance matrix, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        let n = self.space.size();
        let mut m = Vec::with_capacity(n * n);
        for x in 0..n {
            for y in 0..n {
                m.push(self.distance(x, y));
            }
        }
        m
    }
}

/// Optimal transport cost between `mu` and `nu`: closed form on a line,
/// min-cost flow on a grid.
pub fn wasserstein(mu: &Distribution, nu: &Distribution, g: &GroundMetric) -> Result<f64> {
    check_len("wasserstein operand", mu.len(), nu.len())?;
    check_len("wasserstein ground space", g.space().size(), mu.len())?;
    match g.space().geometry() {
        Geometry::Line { .. } => Ok(wasserstein_closed_form_1d(mu, nu, g.unit())),
        Geometry::Grid { .. } => Ok(wasserstein_min_cost_flow(mu, nu, g)?.cost),
    }
}

/// `unit * sum_i |F_mu(i) - F_nu(i)|` over the cumulative distributions of
/// two distributions on consecutive cells.
pub fn wasserstein_closed_form_1d(mu: &Distribution, nu: &Distribution, unit: f64) -> f64 {
    let mut cdf_gap = 0.0;
    let mut total = 0.0;
    let n = mu.len();
    for i in 0..n.saturating_sub(1) {
        cdf_gap += mu.get(i) - nu.get(i);
        total += cdf_gap.abs();
    }
    total * unit
}

/// Masses are scaled to integers by this factor before solving.
pub const MASS_SCALE: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportSolution {
    pub cost: f64,
    /// Upper bound on `|cost - exact cost|` caused by integer rounding.
    pub error_bound: f64,
}

fn to_units(d: &Distribution) -> (Vec<i64>, f64) {
    let mut units: Vec<i64> = d.probs().iter().map(|p| (p * MASS_SCALE).round() as i64).collect();
    let target = MASS_SCALE as i64;
    let drift = target - units.iter().sum::<i64>();
    let largest = (0..units.len()).max_by_key(|&i| units[i]).unwrap_or(0);
    units[largest] += drift;
    let err = d
        .probs()
        .iter()
        .zip(&units)
        .map(|(p, u)| (p - *u as f64 / MASS_SCALE).abs())
        .sum();
    (units, err)
}

/// Exact transport cost on the lattice graph by successive shortest paths
/// with node potentials. Each phase runs one Dijkstra on reduced costs and
/// then saturates every shortest augmenting path at once with a blocking
/// flow, so the number of phases is at most the lattice diameter plus one.
pub fn wasserstein_min_cost_flow(
    mu: &Distribution,
    nu: &Distribution,
    g: &GroundMetric,
) -> Result<TransportSolution> {
    check_len("wasserstein operand", mu.len(), nu.len())?;
    check_len("wasserstein ground space", g.space().size(), mu.len())?;
    let (a, err_a) = to_units(mu);
    let (b, err_b) = to_units(nu);
    let supply: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let mut graph = FlowGraph::lattice(g.space(), &supply);
    let units = graph.solve()?;
    let diameter = g.space().diameter() as f64;
    Ok(TransportSolution {
        cost: units as f64 / MASS_SCALE * g.unit(),
        error_bound: (err_a + err_b) * diameter * g.unit(),
    })
}

const INF_CAP: i64 = i64::MAX / 4;

struct Edge {
    to: usize,
    cap: i64,
    cost: i64,
}

/// Residual graph with paired edges (`e ^ 1` is the reverse of `e`).
struct FlowGraph {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    source: usize,
    sink: usize,
    demand: i64,
}

impl FlowGraph {
    fn lattice(space: &StateSpace, supply: &[i64]) -> Self {
        let n = space.size();
        let mut graph = Self {
            adj: vec![Vec::new(); n + 2],
            edges: Vec::new(),
            source: n,
            sink: n + 1,
            demand: 0,
        };
        for x in 0..n {
            for y in space.neighbors(x) {
                graph.add_edge(x, y, INF_CAP, 1);
            }
            if supply[x] > 0 {
                graph.add_edge(n, x, supply[x], 0);
                graph.demand += supply[x];
            } else if supply[x] < 0 {
                graph.add_edge(x, n + 1, -supply[x], 0);
            }
        }
        graph
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
        });
    }

    /// Sends all supply to the sink; returns the total cost.
    fn solve(&mut self) -> Result<i64> {
        let nodes = self.adj.len();
        let mut potential = vec![0i64; nodes];
        let mut sent = 0i64;
        let mut cost = 0i128;
        while sent < self.demand {
            let dist = self.dijkstra(&potential);
            if dist[self.sink] == i64::MAX {
                return Err(MfgError::InvalidDistribution(
                    "transport problem is infeasible".into(),
                ));
            }
            for (p, d) in potential.iter_mut().zip(&dist) {
                if *d != i64::MAX {
                    *p += d;
                }
            }
            let pushed = self.blocking_flow(&potential);
            if pushed == 0 {
                return Err(MfgError::InvalidDistribution(
                    "min-cost flow made no progress".into(),
                ));
            }
            let path_cost = potential[self.sink] - potential[self.source];
            sent += pushed;
            cost += pushed as i128 * path_cost as i128;
        }
        i64::try_from(cost).map_err(|_| MfgError::InvalidDistribution("transport cost overflow".into()))
    }

    fn reduced(&self, e: usize, from: usize, potential: &[i64]) -> i64 {
        let edge = &self.edges[e];
        edge.cost + potential[from] - potential[edge.to]
    }

    fn dijkstra(&self, potential: &[i64]) -> Vec<i64> {
        let mut dist = vec![i64::MAX; self.adj.len()];
        let mut heap = BinaryHeap::new();
        dist[self.source] = 0;
        heap.push(Reverse((0i64, self.source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &e in &self.adj[u] {
                if self.edges[e].cap == 0 {
                    continue;
                }
                let v = self.edges[e].to;
                let nd = d + self.reduced(e, u, potential);
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist
    }

    /// Dinic blocking flow restricted to residual edges of zero reduced cost.
    fn blocking_flow(&mut self, potential: &[i64]) -> i64 {
        let nodes = self.adj.len();
        let mut total = 0;
        loop {
            let mut level = vec![usize::MAX; nodes];
            let mut queue = VecDeque::new();
            level[self.source] = 0;
            queue.push_back(self.source);
            while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.edges[e].to;
                    if self.edges[e].cap > 0 && level[v] == usize::MAX && self.reduced(e, u, potential) == 0 {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if level[self.sink] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; nodes];
            loop {
                let f = self.augment(self.source, INF_CAP, &level, &mut next, potential);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
    }

    fn augment(&mut self, u: usize, limit: i64, level: &[usize], next: &mut [usize], potential: &[i64]) -> i64 {
        if u == self.sink {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let v = self.edges[e].to;
            if self.edges[e].cap > 0 && level[v] == level[u] + 1 && self.reduced(e, u, potential) == 0 {
                let f = self.augment(v, limit.min(self.edges[e].cap), level, next, potential);
                if f > 0 {
                    self.edges[e].cap -= f;
                    self.edges[e ^ 1].cap += f;
                    return f;
                }
            }
            next[u] += 1;
        }
        0
    }
}

/// Time-averaged transport distance `(1/(N+1)) sum_{n<=N} W(a_n, b_n)`.
pub fn flow_distance(a: &MFFlow, b: &MFFlow, g: &GroundMetric, horizon: usize) -> Result<f64> {
    check_len("flow lengths", a.len(), b.len())?;
    check_at_least("flow length", horizon + 1, a.len())?;
    let mut total = 0.0;
    for n in 0..=horizon {
        total += wasserstein(a.get(n), b.get(n), g)?;
    }
    Ok(total / (horizon + 1) as f64)
}
