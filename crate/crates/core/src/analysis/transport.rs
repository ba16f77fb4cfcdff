//! Min-cost flow on bipartite graphs by successive shortest paths.
//!
//! Used for exact discrete optimal transport (integer masses) and for
//! maximum-cardinality minimum-cost matching under a distance gate.

const EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: u64,
    cost: f64,
}

struct Graph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    fn new(n: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: u64, cost: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.adj[from].push(id);
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
        self.adj[to].push(id + 1);
        id
    }

    /// Shortest path from `s` in the residual graph (Bellman-Ford queue
    /// variant; residual costs may be negative). Returns predecessor edges.
    fn shortest(&self, s: usize) -> Vec<Option<usize>> {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![None; n];
        let mut queued = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        let mut relaxations = 0usize;
        dist[s] = 0.0;
        queue.push_back(s);
        queued[s] = true;
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            for &e in &self.adj[u] {
                let edge = &self.edges[e];
                if edge.cap == 0 {
                    continue;
                }
                let nd = dist[u] + edge.cost;
                if nd < dist[edge.to] - EPS {
                    dist[edge.to] = nd;
                    pred[edge.to] = Some(e);
                    if !queued[edge.to] {
                        queued[edge.to] = true;
                        queue.push_back(edge.to);
                    }
                }
            }
            relaxations += 1;
            // rounding can create tiny negative cycles; stop rather than spin
            if relaxations > n * n * 4 + 16 {
                break;
            }
        }
        pred
    }

    fn source_of(&self, e: usize) -> usize {
        self.edges[e ^ 1].to
    }

    /// Pushes flow from `s` to `t` along shortest paths until none remains.
    fn run(&mut self, s: usize, t: usize) {
        loop {
            let pred = self.shortest(s);
            if pred[t].is_none() {
                return;
            }
            let mut push = u64::MAX;
            let mut v = t;
            while v != s {
                let e = pred[v].expect("path to sink");
                push = push.min(self.edges[e].cap);
                v = self.source_of(e);
            }
            let mut v = t;
            while v != s {
                let e = pred[v].expect("path to sink");
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                v = self.source_of(e);
            }
        }
    }
}

/// Exact transport plan between integer supplies and demands with equal
/// totals. `cost[i][j]` is the unit cost from `i` to `j`.
pub fn transport(cost: &[Vec<f64>], supply: &[u64], demand: &[u64]) -> Vec<Vec<u64>> {
    let (n, m) = (supply.len(), demand.len());
    let (s, t) = (n + m, n + m + 1);
    let mut g = Graph::new(n + m + 2);
    for (i, &a) in supply.iter().enumerate() {
        g.add(s, i, a, 0.0);
    }
    for (j, &b) in demand.iter().enumerate() {
        g.add(n + j, t, b, 0.0);
    }
    let mut ids = vec![vec![0usize; m]; n];
    for i in 0..n {
        for j in 0..m {
            ids[i][j] = g.add(i, n + j, u64::MAX / 4, cost[i][j]);
        }
    }
    g.run(s, t);
    ids.iter()
        .map(|row| row.iter().map(|&e| g.edges[e ^ 1].cap).collect())
        .collect()
}

/// Maximum-cardinality matching of minimum total cost over the allowed
/// `(left, right, cost)` edges.
pub fn matching(n_left: usize, n_right: usize, edges: &[(usize, usize, f64)]) -> Vec<(usize, usize)> {
    let (s, t) = (n_left + n_right, n_left + n_right + 1);
    let mut g = Graph::new(n_left + n_right + 2);
    for i in 0..n_left {
        g.add(s, i, 1, 0.0);
    }
    for j in 0..n_right {
        g.add(n_left + j, t, 1, 0.0);
    }
    let ids: Vec<usize> = edges.iter().map(|&(i, j, c)| g.add(i, n_left + j, 1, c)).collect();
    g.run(s, t);
    let mut out: Vec<(usize, usize)> = edges
        .iter()
        .zip(&ids)
        .filter(|(_, &e)| g.edges[e].cap == 0)
        .map(|(&(i, j, _), _)| (i, j))
        .collect();
    out.sort_unstable();
    out
}
