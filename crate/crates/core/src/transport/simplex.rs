//! Primal network simplex for uncapacitated min-cost flow with integer
//! supplies and floating-point arc costs.
//!
//! The tree bookkeeping (thread / reverse thread / last successor lists and
//! strongly feasible leaving-arc rule) follows the classical LEMON layout.
//! A root node with one artificial arc per node provides the initial basis.

use crate::error::{Error, Result};

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;
const INF: i64 = i64::MAX;

/// Relative tolerance of the final reduced-cost certificate.
pub const CERT_RTOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub supply: Vec<i64>,
    /// `(source, target, cost)`, all uncapacitated.
    pub arcs: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub flows: Vec<i64>,
    /// `sum flow * cost` in flow units.
    pub cost: f64,
    pub potentials: Vec<f64>,
    pub pivots: usize,
}

struct Simplex {
    node_num: usize,
    arc_num: usize,
    root: usize,

    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<i64>,
    state: Vec<i8>,

    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pred_dir: Vec<i8>,
    dirty_revs: Vec<usize>,

    block_size: usize,
    next_arc: usize,
    eps: f64,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,
}

const NONE: usize = usize::MAX;

impl Simplex {
    fn new(problem: &FlowProblem) -> Result<Self> {
        let node_num = problem.supply.len();
        let arc_num = problem.arcs.len();
        let total: i128 = problem.supply.iter().map(|&s| s as i128).sum();
        if total != 0 {
            return Err(Error::domain("flow problem supplies must balance"));
        }
        let all = arc_num + node_num;
        let mut max_cost: f64 = 0.0;
        let mut source = Vec::with_capacity(all);
        let mut target = Vec::with_capacity(all);
        let mut cost = Vec::with_capacity(all);
        for &(s, t, c) in &problem.arcs {
            if s >= node_num || t >= node_num || !c.is_finite() {
                return Err(Error::domain("malformed arc in flow problem"));
            }
            source.push(s);
            target.push(t);
            cost.push(c);
            max_cost = max_cost.max(c.abs());
        }
        let art_cost = (max_cost + 1.0) * (node_num as f64 + 1.0);
        let root = node_num;

        let mut sx = Simplex {
            node_num,
            arc_num,
            root,
            source,
            target,
            cost,
            flow: vec![0; all],
            state: vec![STATE_LOWER; all],
            pi: vec![0.0; node_num + 1],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            pred_dir: vec![0; node_num + 1],
            dirty_revs: Vec::new(),
            block_size: ((all as f64).sqrt().ceil() as usize).max(10),
            next_arc: 0,
            eps: 1e-11 * (1.0 + max_cost),
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0,
        };

        sx.thread[root] = 0;
        sx.rev_thread[0] = root;
        sx.succ_num[root] = node_num + 1;
        sx.last_succ[root] = if node_num == 0 { root } else { root - 1 };
        for u in 0..node_num {
            let e = arc_num + u;
            sx.parent[u] = root;
            sx.pred[u] = e;
            sx.thread[u] = u + 1;
            sx.rev_thread[u + 1] = u;
            sx.succ_num[u] = 1;
            sx.last_succ[u] = u;
            sx.state[e] = STATE_TREE;
            let s = problem.supply[u];
            if s >= 0 {
                sx.pred_dir[u] = DIR_UP;
                sx.pi[u] = 0.0;
                sx.source.push(u);
                sx.target.push(root);
                sx.flow[e] = s;
                sx.cost.push(0.0);
            } else {
                sx.pred_dir[u] = DIR_DOWN;
                sx.pi[u] = art_cost;
                sx.source.push(root);
                sx.target.push(u);
                sx.flow[e] = -s;
                sx.cost.push(art_cost);
            }
        }
        Ok(sx)
    }

    #[inline]
    fn reduced(&self, e: usize) -> f64 {
        self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]]
    }

    /// Block search pricing over all arcs (artificial ones included).
    fn find_entering_arc(&mut self) -> bool {
        let search = self.arc_num + self.node_num;
        let mut min = -self.eps;
        let mut found = false;
        let mut cnt = self.block_size;
        let mut e = self.next_arc;
        for _ in 0..search {
            if self.state[e] == STATE_LOWER {
                let c = self.reduced(e);
                if c < min {
                    min = c;
                    self.in_arc = e;
                    found = true;
                }
            }
            e += 1;
            if e == search {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found {
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if found {
            self.next_arc = e;
        }
        found
    }

    fn find_join_node(&mut self) {
        let mut u = self.source[self.in_arc];
        let mut v = self.target[self.in_arc];
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Returns false when the entering arc itself is the bottleneck.
    fn find_leaving_arc(&mut self) -> bool {
        // The entering arc is at its lower bound, so the cycle runs
        // source -> target along it.
        let first = self.source[self.in_arc];
        let second = self.target[self.in_arc];
        self.delta = INF;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_DOWN {
                INF
            } else {
                self.flow[e]
            };
            if d < self.delta {
                self.delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_UP {
                INF
            } else {
                self.flow[e]
            };
            if d <= self.delta {
                self.delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self, change: bool) {
        if self.delta > 0 {
            let val = self.delta;
            self.flow[self.in_arc] += val;
            let mut u = self.source[self.in_arc];
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
            let mut u = self.target[self.in_arc];
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
        }
        if change {
            self.state[self.in_arc] = STATE_TREE;
            let out = self.pred[self.u_out];
            self.state[out] = STATE_LOWER;
        }
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;

        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source[in_arc] {
                DIR_UP
            } else {
                DIR_DOWN
            };

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
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

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

            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0isize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc += self.succ_num[u] as isize - self.succ_num[p] as isize;
                self.succ_num[u] = tmp_sc as usize;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source[in_arc] {
                DIR_UP
            } else {
                DIR_DOWN
            };
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
        let sigma = self.pi[self.v_in]
            - self.pi[self.u_in]
            - self.pred_dir[self.u_in] as f64 * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Rebuilds every potential from the tree in thread order.
    fn recompute_potentials(&mut self) {
        self.pi[self.root] = 0.0;
        let mut u = self.thread[self.root];
        while u != self.root {
            let e = self.pred[u];
            self.pi[u] = self.pi[self.parent[u]] - self.pred_dir[u] as f64 * self.cost[e];
            u = self.thread[u];
        }
    }

    fn run(&mut self) -> Result<usize> {
        let mut pivots = 0usize;
        loop {
            while self.find_entering_arc() {
                self.find_join_node();
                let change = self.find_leaving_arc();
                if self.delta == INF {
                    return Err(Error::domain("flow problem is unbounded"));
                }
                self.change_flow(change);
                if change {
                    self.update_tree_structure();
                    self.update_potential();
                }
                pivots += 1;
            }
            // Drift from incremental updates could hide an improving arc.
            self.recompute_potentials();
            if !self.find_entering_arc() {
                break;
            }
            self.next_arc = 0;
        }
        if (self.arc_num..self.arc_num + self.node_num).any(|e| self.flow[e] != 0) {
            return Err(Error::domain("flow problem is infeasible"));
        }
        Ok(pivots)
    }
}

pub fn solve(problem: &FlowProblem) -> Result<FlowSolution> {
    let mut sx = Simplex::new(problem)?;
    let pivots = sx.run()?;
    let flows: Vec<i64> = sx.flow[..sx.arc_num].to_vec();
    let cost = flows.iter().zip(&sx.cost).map(|(&f, &c)| f as f64 * c).sum();
    let solution = FlowSolution {
        flows,
        cost,
        potentials: sx.pi[..sx.node_num].to_vec(),
        pivots,
    };
    certify(problem, &solution)?;
    Ok(solution)
}

/// Checks flow conservation exactly and the reduced-cost optimality
/// conditions with relative tolerance [`CERT_RTOL`].
pub fn certify(problem: &FlowProblem, solution: &FlowSolution) -> Result<()> {
    let mut balance: Vec<i128> = problem.supply.iter().map(|&s| s as i128).collect();
    let mut max_cost: f64 = 0.0;
    for (&(s, t, c), &f) in problem.arcs.iter().zip(&solution.flows) {
        if f < 0 {
            return Err(Error::domain("negative flow in solution"));
        }
        balance[s] -= f as i128;
        balance[t] += f as i128;
        max_cost = max_cost.max(c.abs());
    }
    if balance.iter().any(|&b| b != 0) {
        return Err(Error::domain("flow conservation violated"));
    }
    let tol = CERT_RTOL * (1.0 + max_cost);
    let pi = &solution.potentials;
    for (&(s, t, c), &f) in problem.arcs.iter().zip(&solution.flows) {
        let r = c + pi[s] - pi[t];
        if r < -tol || (f > 0 && r.abs() > tol) {
            return Err(Error::domain(format!(
                "optimality certificate failed: reduced cost {r:e} on arc {s}->{t} with flow {f}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transport(supply: &[i64], demand: &[i64], cost: &[&[f64]]) -> FlowSolution {
        let mut s: Vec<i64> = supply.to_vec();
        s.extend(demand.iter().map(|d| -d));
        let mut arcs = Vec::new();
        for (i, row) in cost.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                arcs.push((i, supply.len() + j, c));
            }
        }
        solve(&FlowProblem { supply: s, arcs }).unwrap()
    }

    #[test]
    fn single_arc() {
        let sol = transport(&[5], &[5], &[&[2.0]]);
        assert_eq!(sol.flows, vec![5]);
        assert_eq!(sol.cost, 10.0);
    }

    #[test]
    fn prefers_cheap_diagonal() {
        let sol = transport(&[1, 1], &[1, 1], &[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(sol.flows, vec![1, 0, 0, 1]);
        assert_eq!(sol.cost, 0.0);
    }

    #[test]
    fn classic_three_by_three() {
        // Balanced instance with known optimum 2*1 + 3*... checked by hand:
        // supplies (3,4,5), demands (4,4,4).
        let c: [&[f64]; 3] = [&[4.0, 6.0, 9.0], &[5.0, 3.0, 8.0], &[9.0, 7.0, 2.0]];
        let sol = transport(&[3, 4, 5], &[4, 4, 4], &c);
        // x00=3, x11=4, x22=4, x20=1 -> 12 + 12 + 8 + 9 = 41
        assert_eq!(sol.cost, 41.0);
    }

    #[test]
    fn unbalanced_is_rejected() {
        let p = FlowProblem {
            supply: vec![1, -2],
            arcs: vec![(0, 1, 1.0)],
        };
        assert!(solve(&p).is_err());
    }

    #[test]
    fn infeasible_is_detected() {
        // Node 0 cannot reach node 2.
        let p = FlowProblem {
            supply: vec![1, 0, -1],
            arcs: vec![(0, 1, 1.0), (2, 1, 1.0)],
        };
        assert!(solve(&p).is_err());
    }

    #[test]
    fn transshipment_through_middle_node() {
        let p = FlowProblem {
            supply: vec![2, 0, -2],
            arcs: vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 5.0)],
        };
        let sol = solve(&p).unwrap();
        assert_eq!(sol.flows, vec![2, 2, 0]);
        assert_eq!(sol.cost, 4.0);
    }
}
