//! Small network-flow solvers: Dinic max-flow on real capacities and successive
//! shortest paths for min-cost flow.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Arc<C> {
    to: usize,
    cap: C,
}

/// Max-flow with `f64` capacities (Dinic).
#[derive(Debug, Clone)]
pub struct MaxFlow {
    arcs: Vec<Arc<f64>>,
    adj: Vec<Vec<usize>>,
}

const FLOW_EPS: f64 = 1e-12;

impl MaxFlow {
    pub fn new(nodes: usize) -> Self {
        Self { arcs: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap });
        self.adj[to].push(self.arcs.len());
        self.arcs.push(Arc { to: from, cap: 0.0 });
    }

    pub fn run(&mut self, source: usize, sink: usize) -> f64 {
        let n = self.adj.len();
        let mut total = 0.0;
        loop {
            let mut level = vec![usize::MAX; n];
            level[source] = 0;
            let mut queue = VecDeque::from([source]);
            while let Some(v) = queue.pop_front() {
                for &e in &self.adj[v] {
                    let Arc { to, cap } = self.arcs[e];
                    if cap > FLOW_EPS && level[to] == usize::MAX {
                        level[to] = level[v] + 1;
                        queue.push_back(to);
                    }
                }
            }
            if level[sink] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; n];
            loop {
                let pushed = self.augment(source, sink, f64::INFINITY, &level, &mut next);
                if pushed <= FLOW_EPS {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment(&mut self, v: usize, sink: usize, limit: f64, level: &[usize], next: &mut [usize]) -> f64 {
        if v == sink {
            return limit;
        }
        while next[v] < self.adj[v].len() {
            let e = self.adj[v][next[v]];
            let Arc { to, cap } = self.arcs[e];
            if cap > FLOW_EPS && level[to] == level[v] + 1 {
                let got = self.augment(to, sink, limit.min(cap), level, next);
                if got > FLOW_EPS {
                    self.arcs[e].cap -= got;
                    self.arcs[e ^ 1].cap += got;
                    return got;
                }
            }
            next[v] += 1;
        }
        0.0
    }
}

/// Min-cost flow with integer capacities and real costs.
#[derive(Debug, Clone)]
pub struct MinCostFlow {
    arcs: Vec<Arc<i64>>,
    cost: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

/// Result of [`MinCostFlow::run_while_profitable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOutcome {
    pub flow: i64,
    pub cost: f64,
}

impl MinCostFlow {
    pub fn new(nodes: usize) -> Self {
        Self { arcs: Vec::new(), cost: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) {
        self.adj[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap });
        self.cost.push(cost);
        self.adj[to].push(self.arcs.len());
        self.arcs.push(Arc { to: from, cap: 0 });
        self.cost.push(-cost);
    }

    /// Augments along cheapest paths as long as they have negative cost, giving the
    /// minimum-cost flow of any value.
    pub fn run_while_profitable(&mut self, source: usize, sink: usize) -> FlowOutcome {
        let n = self.adj.len();
        let mut out = FlowOutcome { flow: 0, cost: 0.0 };
        loop {
            // Bellman-Ford with a work queue; residual costs may be negative
            let mut dist = vec![f64::INFINITY; n];
            let mut via = vec![usize::MAX; n];
            let mut queued = vec![false; n];
            dist[source] = 0.0;
            let mut queue = VecDeque::from([source]);
            queued[source] = true;
            while let Some(v) = queue.pop_front() {
                queued[v] = false;
                for &e in &self.adj[v] {
                    let Arc { to, cap } = self.arcs[e];
                    let nd = dist[v] + self.cost[e];
                    if cap > 0 && nd < dist[to] - 1e-12 {
                        dist[to] = nd;
                        via[to] = e;
                        if !queued[to] {
                            queued[to] = true;
                            queue.push_back(to);
                        }
                    }
                }
            }
            if !(dist[sink] < -1e-12) {
                return out;
            }
            let mut push = i64::MAX;
            let mut v = sink;
            while v != source {
                let e = via[v];
                push = push.min(self.arcs[e].cap);
                v = self.arcs[e ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let e = via[v];
                self.arcs[e].cap -= push;
                self.arcs[e ^ 1].cap += push;
                v = self.arcs[e ^ 1].to;
            }
            out.flow += push;
            out.cost += push as f64 * dist[sink];
        }
    }
}
