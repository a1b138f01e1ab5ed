//! Exact transportation solver: primal network simplex on the bipartite graph.
//!
//! The basis is a spanning tree over `rows + cols` nodes with `rows + cols − 1`
//! basic cells (some may carry zero flow). Each pivot prices every nonbasic
//! cell with the tree potentials, sends flow around the unique cycle closed by
//! the entering cell, and drops a blocking cell. Pricing uses block search
//! and falls back to Bland's rule after a long run of degenerate pivots, which
//! rules out cycling.

use std::collections::VecDeque;

use super::MeasureError;

pub struct Solution {
    /// Row-major `rows × cols` plan.
    pub plan: Vec<f64>,
    pub cost: f64,
    pub pivots: usize,
}

/// Solves `min Σ c_ji π_ji` over plans with row sums `supply` and column sums
/// `demand`.
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Solution, MeasureError> {
    let m = supply.len();
    let n = demand.len();
    assert_eq!(cost.len(), m * n, "cost matrix has wrong size");
    if m == 0 || n == 0 {
        return Ok(Solution { plan: vec![0.0; m * n], cost: 0.0, pivots: 0 });
    }

    let mut tree = Tree::matrix_minimum(supply, demand, cost);
    let pivots = tree.optimize(cost)?;

    let mut plan = vec![0.0; m * n];
    let mut total = 0.0;
    for (cell, &flow) in tree.cells.iter().zip(&tree.flow) {
        let (r, c) = *cell;
        let f = flow.max(0.0);
        plan[r * n + c] = f;
        total += f * cost[r * n + c];
    }
    Ok(Solution { plan, cost: total, pivots })
}

struct Tree {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    basic: Vec<bool>,
}

fn find(uf: &mut [usize], mut x: usize) -> usize {
    while uf[x] != x {
        uf[x] = uf[uf[x]];
        x = uf[x];
    }
    x
}

impl Tree {
    /// Least-cost start: cells in increasing cost (ties by index) take
    /// `min(supply left, demand left)` while both are positive. Every such
    /// step exhausts a row or a column, so the support is a forest; zero-flow
    /// cells then join the components into a spanning tree.
    fn matrix_minimum(supply: &[f64], demand: &[f64], cost: &[f64]) -> Tree {
        let (m, n) = (supply.len(), demand.len());
        let mut order: Vec<usize> = (0..m * n).collect();
        order.sort_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(a.cmp(&b)));
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut uf: Vec<usize> = (0..m + n).collect();
        let mut cells = Vec::with_capacity(m + n - 1);
        let mut flow = Vec::with_capacity(m + n - 1);
        let mut basic = vec![false; m * n];
        for &idx in &order {
            let (r, c) = (idx / n, idx % n);
            if s[r] <= 0.0 || d[c] <= 0.0 {
                continue;
            }
            let (a, b) = (find(&mut uf, r), find(&mut uf, m + c));
            debug_assert_ne!(a, b, "least-cost support closed a cycle");
            let x = s[r].min(d[c]);
            s[r] -= x;
            d[c] -= x;
            uf[a] = b;
            cells.push((r, c));
            flow.push(x);
            basic[idx] = true;
        }
        for &idx in &order {
            if cells.len() == m + n - 1 {
                break;
            }
            let (r, c) = (idx / n, idx % n);
            let (a, b) = (find(&mut uf, r), find(&mut uf, m + c));
            if a != b {
                uf[a] = b;
                cells.push((r, c));
                flow.push(0.0);
                basic[idx] = true;
            }
        }
        debug_assert_eq!(cells.len(), m + n - 1);
        Tree { m, n, cells, flow, basic }
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<usize, MeasureError> {
        let (m, n) = (self.m, self.n);
        let nodes = m + n;
        let max_cost = cost.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
        let eps = 1e-12 * (1.0 + max_cost);
        let degenerate_limit = 20 * nodes + 100;
        let max_pivots = 50 * m * n + 10 * nodes + 1000;

        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
        let mut parent = vec![usize::MAX; nodes];
        let mut parent_cell = vec![usize::MAX; nodes];
        let mut depth = vec![0usize; nodes];
        let mut potential = vec![0.0; nodes];
        let mut queue = VecDeque::with_capacity(nodes);
        let mut bland = false;
        let mut degenerate_run = 0;
        let block = (m * n / 16).max(1);
        let mut cursor = 0;

        for pivot in 0..max_pivots {
            for a in adj.iter_mut() {
                a.clear();
            }
            for (k, &(r, c)) in self.cells.iter().enumerate() {
                adj[r].push((m + c, k));
                adj[m + c].push((r, k));
            }
            // Potentials with u_r + v_c = cost on basic cells, rooted at row 0.
            parent[0] = usize::MAX;
            depth[0] = 0;
            potential[0] = 0.0;
            let mut seen = vec![false; nodes];
            seen[0] = true;
            queue.clear();
            queue.push_back(0);
            while let Some(u) = queue.pop_front() {
                for &(v, k) in &adj[u] {
                    if seen[v] {
                        continue;
                    }
                    seen[v] = true;
                    parent[v] = u;
                    parent_cell[v] = k;
                    depth[v] = depth[u] + 1;
                    let (r, c) = self.cells[k];
                    potential[v] = cost[r * n + c] - potential[u];
                    queue.push_back(v);
                }
            }
            debug_assert!(seen.iter().all(|&s| s), "basis is not spanning");

            // Block-search pricing: the most negative reduced cost within the
            // first block (scanning cyclically from the last entering cell)
            // that contains any candidate. Bland mode takes the lowest index.
            let mut entering = None;
            let mut best = -eps;
            let total = m * n;
            if bland {
                for idx in 0..total {
                    if self.basic[idx] {
                        continue;
                    }
                    let (r, c) = (idx / n, idx % n);
                    if cost[idx] - potential[r] - potential[m + c] < -eps {
                        entering = Some((r, c));
                        break;
                    }
                }
            } else {
                let mut scanned = 0;
                while scanned < total {
                    let idx = cursor;
                    cursor = if cursor + 1 == total { 0 } else { cursor + 1 };
                    scanned += 1;
                    if !self.basic[idx] {
                        let (r, c) = (idx / n, idx % n);
                        let rc = cost[idx] - potential[r] - potential[m + c];
                        if rc < best {
                            best = rc;
                            entering = Some((r, c));
                        }
                    }
                    if scanned % block == 0 && entering.is_some() {
                        break;
                    }
                }
            }
            let Some((er, ec)) = entering else {
                return Ok(pivot);
            };

            // Tree path from column node back to the row node, alternating
            // signs starting with a decrease next to the column.
            let mut up_c = Vec::new();
            let mut up_r = Vec::new();
            let (mut a, mut b) = (m + ec, er);
            while depth[a] > depth[b] {
                up_c.push(parent_cell[a]);
                a = parent[a];
            }
            while depth[b] > depth[a] {
                up_r.push(parent_cell[b]);
                b = parent[b];
            }
            while a != b {
                up_c.push(parent_cell[a]);
                a = parent[a];
                up_r.push(parent_cell[b]);
                b = parent[b];
            }
            let path: Vec<usize> = up_c.into_iter().chain(up_r.into_iter().rev()).collect();

            let mut theta = f64::INFINITY;
            let mut leaving = usize::MAX;
            for &k in path.iter().step_by(2) {
                let f = self.flow[k];
                let better = f < theta
                    || (f == theta && bland && {
                        let (r, c) = self.cells[k];
                        let (lr, lc) = self.cells[leaving];
                        r * n + c < lr * n + lc
                    });
                if better {
                    theta = f;
                    leaving = k;
                }
            }
            let theta = theta.max(0.0);
            for (step, &k) in path.iter().enumerate() {
                if step % 2 == 0 {
                    self.flow[k] = (self.flow[k] - theta).max(0.0);
                } else {
                    self.flow[k] += theta;
                }
            }
            if theta <= 0.0 {
                degenerate_run += 1;
                if degenerate_run > degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }

            let (lr, lc) = self.cells[leaving];
            self.basic[lr * n + lc] = false;
            self.basic[er * n + ec] = true;
            self.cells[leaving] = (er, ec);
            self.flow[leaving] = theta;
        }
        Err(MeasureError::NotConverged(max_pivots))
    }
}
