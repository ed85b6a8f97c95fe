//! Primal network simplex for the transportation problem.
//!
//! The spanning-tree bookkeeping (parent, thread, successor counts) follows
//! the classical LEMON design: a root node with one artificial arc per
//! node, block-search pricing, and a strongly feasible leaving-arc rule.
//! All real arcs are uncapacitated, so arcs only ever sit in the tree or at
//! their lower bound.

use super::discrete::DiscreteMeasure;
use super::solution::{CostConvention, TransportSolution};
use crate::error::{Error, Result};

/// Default maximum number of atoms per side.
pub const DEFAULT_LP_CAP: usize = 2000;

const NONE: usize = usize::MAX;
const UP: i8 = 1;
const DOWN: i8 = -1;
const TREE: i8 = 0;
const LOWER: i8 = 1;

#[derive(Clone, Copy, Debug)]
pub struct LpOptions {
    pub cap: usize,
    pub convention: CostConvention,
    /// Pivot limit; the solver reports non-convergence past it.
    pub max_pivots: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { cap: DEFAULT_LP_CAP, convention: CostConvention::HalfSquared, max_pivots: 200_000_000 }
    }
}

/// Exact optimal coupling for `½|x − y|²`.
pub fn solve_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportSolution> {
    solve_lp_with(mu, nu, LpOptions::default())
}

pub fn solve_lp_with(mu: &DiscreteMeasure, nu: &DiscreteMeasure, opts: LpOptions) -> Result<TransportSolution> {
    let size = mu.len().max(nu.len());
    if size > opts.cap {
        return Err(Error::LpCapExceeded { size, cap: opts.cap });
    }
    let m = mu.len();
    let n = nu.len();
    let mut cost = Vec::with_capacity(m * n);
    for x in mu.points() {
        for y in nu.points() {
            cost.push(opts.convention.cost(*x, *y));
        }
    }
    let mut supply: Vec<f64> = mu.weights().to_vec();
    supply.extend(nu.weights().iter().map(|w| -w));
    let mut ns = NetworkSimplex::new(m, n, cost, supply);
    let pivots = ns.run(opts.max_pivots)?;

    let mut coupling = Vec::new();
    for u in 0..ns.node_num {
        let e = ns.pred[u];
        if e < ns.arc_num && ns.flow[e] > 0.0 {
            coupling.push((e / n, e % n, ns.flow[e]));
        }
    }
    coupling.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let phi: Vec<f64> = (0..m).map(|i| -ns.pi[i]).collect();
    let psi: Vec<f64> = (0..n).map(|j| ns.pi[m + j]).collect();
    // move the additive constant between the two sides to center φ
    let shift = phi.iter().sum::<f64>() / m as f64;
    let phi = phi.iter().map(|v| v - shift).collect();
    let psi = psi.iter().map(|v| v + shift).collect();
    let artificial: f64 = (ns.arc_num..ns.arc_num + ns.node_num).map(|e| ns.flow[e].abs()).sum();
    let mut sol = TransportSolution {
        source: mu.clone(),
        target: nu.clone(),
        coupling,
        phi,
        psi,
        convention: opts.convention,
        epsilon: 0.0,
        marginal_violation: 0.0,
        dropped_mass: 0.0,
        iterations: pivots,
    };
    sol.marginal_violation = sol.sparse_marginal_violation().max(artificial);
    Ok(sol)
}

struct NetworkSimplex {
    n_sink: usize,
    node_num: usize,
    arc_num: usize,
    cost: Vec<f64>,
    art_source: Vec<usize>,
    art_target: Vec<usize>,
    flow: Vec<f64>,
    state: Vec<i8>,
    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
    next_arc: usize,
    block_size: usize,
    tol: f64,
}

impl NetworkSimplex {
    fn new(m: usize, n: usize, mut cost: Vec<f64>, supply: Vec<f64>) -> Self {
        let node_num = m + n;
        let arc_num = m * n;
        let all = arc_num + node_num;
        let max_cost = cost.iter().cloned().fold(0.0, f64::max);
        let art_cost = (max_cost + 1.0) * node_num as f64;
        let root = node_num;
        let mut s = NetworkSimplex {
            n_sink: n,
            node_num,
            arc_num,
            cost: Vec::new(),
            art_source: vec![0; node_num],
            art_target: vec![0; node_num],
            flow: vec![0.0; all],
            state: vec![LOWER; all],
            pi: vec![0.0; node_num + 1],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            pred_dir: vec![UP; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            dirty_revs: Vec::new(),
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
            next_arc: 0,
            block_size: ((arc_num as f64).sqrt().ceil() as usize).max(10),
            // reduced costs below this are treated as zero
            tol: 1e-14 * (max_cost + 1.0) * node_num as f64,
        };
        cost.resize(all, 0.0);
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        for u in 0..node_num {
            let e = arc_num + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = TREE;
            if supply[u] >= 0.0 {
                s.pred_dir[u] = UP;
                s.pi[u] = 0.0;
                s.art_source[u] = u;
                s.art_target[u] = root;
                s.flow[e] = supply[u];
                cost[e] = 0.0;
            } else {
                s.pred_dir[u] = DOWN;
                s.pi[u] = art_cost;
                s.art_source[u] = root;
                s.art_target[u] = u;
                s.flow[e] = -supply[u];
                cost[e] = art_cost;
            }
        }
        s.cost = cost;
        s
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.n_sink
        } else {
            self.art_source[e - self.arc_num]
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.node_num - self.n_sink + e % self.n_sink
        } else {
            self.art_target[e - self.arc_num]
        }
    }

    fn run(&mut self, max_pivots: usize) -> Result<usize> {
        let mut pivots = 0;
        while self.find_entering_arc() {
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::NotConverged {
                    what: "network simplex",
                    iterations: pivots,
                    residual: f64::NAN,
                    history: Vec::new(),
                });
            }
            self.find_join_node();
            self.find_leaving_arc();
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
        }
        Ok(pivots)
    }

    /// Block search: scan arcs in blocks, take the most negative reduced
    /// cost of the first block that has one.
    fn find_entering_arc(&mut self) -> bool {
        let m_src = self.node_num - self.n_sink;
        let n = self.n_sink;
        let mut min = -self.tol;
        let mut found = NONE;
        let mut cnt = self.block_size;
        let total = self.arc_num;
        let start = self.next_arc;
        let mut e = start;
        for _ in 0..total {
            if self.state[e] == LOWER {
                let i = e / n;
                let j = m_src + e % n;
                let c = self.cost[e] + self.pi[i] - self.pi[j];
                if c < min {
                    min = c;
                    found = e;
                }
            }
            e += 1;
            if e == total {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found != NONE {
                    break;
                }
                cnt = self.block_size;
            }
        }
        if found == NONE {
            return false;
        }
        self.in_arc = found;
        self.next_arc = e;
        true
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) {
        // entering arcs are always at their lower bound
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DOWN { f64::INFINITY } else { self.flow[e] };
            if d < delta {
                delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == UP { f64::INFINITY } else { self.flow[e] };
            if d <= delta {
                delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        debug_assert!(result != 0, "uncapacitated cycle cannot be unbounded");
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0.0 {
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = TREE;
        let out = self.pred[self.u_out];
        self.state[out] = LOWER;
        self.flow[out] = 0.0;
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) { UP } else { DOWN };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue =
                if old_rev_thread == v_in { self.thread[old_last_succ] } else { self.thread[v_in] };
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);
                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;
                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;
                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;
            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }
            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                // succ_num[u] < succ_num[p] can only move forward: wrapping math
                tmp_sc = tmp_sc.wrapping_add(self.succ_num[u]).wrapping_sub(self.succ_num[p]);
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) { UP } else { DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }
        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }
        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in] - self.pred_dir[u_in] as f64 * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }
}
