//! Bipartite transportation feasibility.
//!
//! Supplies (edge sign vectors carrying mass) may ship to any compatible
//! demand (orthant label). Feasibility of a demand vector is decided by a
//! Dinic max-flow on `source -> supply -> demand -> sink`, with a Hall-type
//! subset check available as an independent cross-check for small problems.

use std::collections::VecDeque;

const FLOW_EPS: f64 = 1e-15;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: f64,
    rev: usize,
}

/// Dinic max-flow on real capacities.
#[derive(Debug, Clone)]
pub struct MaxFlow {
    graph: Vec<Vec<Arc>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl MaxFlow {
    pub fn new(nodes: usize) -> Self {
        Self {
            graph: vec![Vec::new(); nodes],
            level: vec![-1; nodes],
            iter: vec![0; nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        let rev_from = self.graph[to].len();
        let rev_to = self.graph[from].len();
        self.graph[from].push(Arc {
            to,
            cap,
            rev: rev_from,
        });
        self.graph[to].push(Arc {
            to: from,
            cap: 0.0,
            rev: rev_to,
        });
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut queue = VecDeque::new();
        self.level[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for e in &self.graph[v] {
                if e.cap > FLOW_EPS && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
    }

    fn dfs(&mut self, v: usize, t: usize, f: f64) -> f64 {
        if v == t {
            return f;
        }
        while self.iter[v] < self.graph[v].len() {
            let i = self.iter[v];
            let (to, cap) = (self.graph[v][i].to, self.graph[v][i].cap);
            if cap > FLOW_EPS && self.level[v] < self.level[to] {
                let d = self.dfs(to, t, f.min(cap));
                if d > FLOW_EPS {
                    self.graph[v][i].cap -= d;
                    let rev = self.graph[v][i].rev;
                    self.graph[to][rev].cap += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return flow;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= FLOW_EPS {
                    break;
                }
                flow += f;
            }
        }
    }
}

/// A bipartite supply/demand compatibility structure.
#[derive(Debug, Clone)]
pub struct Transport {
    pub supplies: Vec<f64>,
    /// `neighbors[i]` lists the demand indices supply `i` may ship to.
    pub neighbors: Vec<Vec<usize>>,
    pub demand_count: usize,
}

impl Transport {
    /// Largest total demand that can be met.
    pub fn max_shipment(&self, demands: &[f64]) -> f64 {
        assert_eq!(demands.len(), self.demand_count);
        let ns = self.supplies.len();
        let source = ns + self.demand_count;
        let sink = source + 1;
        let mut g = MaxFlow::new(sink + 1);
        for (i, &s) in self.supplies.iter().enumerate() {
            if s > 0.0 {
                g.add_edge(source, i, s);
                for &k in &self.neighbors[i] {
                    g.add_edge(i, ns + k, s);
                }
            }
        }
        for (k, &dem) in demands.iter().enumerate() {
            if dem > 0.0 {
                g.add_edge(ns + k, sink, dem);
            }
        }
        g.max_flow(source, sink)
    }

    /// Minimum over nonempty demand subsets `S` of
    /// `supply(N(S)) - demand(S)`, where `N(S)` are supplies adjacent to `S`.
    /// Demands are feasible iff this is `>= 0`. Exponential in the number of
    /// demands; intended as a cross-check for small instances.
    pub fn hall_margin(&self, demands: &[f64]) -> f64 {
        assert_eq!(demands.len(), self.demand_count);
        assert!(
            self.demand_count <= 20,
            "Hall check is exponential in demands"
        );
        let reach: Vec<u32> = self
            .neighbors
            .iter()
            .map(|ns| ns.iter().fold(0u32, |acc, &k| acc | 1 << k))
            .collect();
        let mut margin = f64::INFINITY;
        for subset in 1u32..(1 << self.demand_count) {
            let dem: f64 = (0..self.demand_count)
                .filter(|k| subset >> k & 1 == 1)
                .map(|k| demands[k])
                .sum();
            let sup: f64 = reach
                .iter()
                .zip(&self.supplies)
                .filter(|(r, _)| *r & subset != 0)
                .map(|(_, s)| s)
                .sum();
            margin = margin.min(sup - dem);
        }
        margin
    }
}
