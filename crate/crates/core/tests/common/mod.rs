//! Independent reference computations used by the integration tests.
//! None of them call the solvers they are compared against.

#![allow(dead_code)]

use std::sync::Arc;

use wqlab_core::rational::{self, ratio};
use wqlab_core::{DiscreteMeasure, FiniteMetricSpace, Rational};

pub fn line_space(xs: &[f64]) -> Arc<FiniteMetricSpace> {
    Arc::new(FiniteMetricSpace::line(xs).unwrap())
}

/// Points on a small integer grid in the plane, deduplicated, Euclidean.
pub fn plane_space(coords: &[(u8, u8)]) -> Arc<FiniteMetricSpace> {
    let mut pts: Vec<(u8, u8)> = coords.to_vec();
    pts.sort_unstable();
    pts.dedup();
    let dist = pts
        .iter()
        .map(|a| {
            pts.iter()
                .map(|b| ((a.0 as f64 - b.0 as f64).powi(2) + (a.1 as f64 - b.1 as f64).powi(2)).sqrt())
                .collect()
        })
        .collect();
    let labels = (0..pts.len()).map(|i| format!("p{i}")).collect();
    Arc::new(FiniteMetricSpace::new(labels, dist).unwrap())
}

/// A measure with weights proportional to `counts` (at least one positive).
pub fn from_counts(space: &Arc<FiniteMetricSpace>, counts: &[u64]) -> DiscreteMeasure {
    let counts: Vec<u64> = (0..space.len())
        .map(|i| counts.get(i).copied().unwrap_or(0))
        .collect();
    DiscreteMeasure::from_counts(space.clone(), &counts).unwrap()
}

/// Atom multiset of a measure whose weights are multiples of `1/n`.
pub fn atoms(mu: &DiscreteMeasure, n: u64) -> Vec<usize> {
    let mut out = Vec::new();
    for (x, w) in mu.weights().iter().enumerate() {
        let c = w * Rational::from_integer((n as i64).into());
        assert!(c.is_integer(), "weight not a multiple of 1/{n}");
        for _ in 0..rational::floor_i64(&c).unwrap() {
            out.push(x);
        }
    }
    out
}

fn permutations(n: usize, visit: &mut dyn FnMut(&[usize])) {
    fn rec(k: usize, perm: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if k == perm.len() {
            visit(perm);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            rec(k + 1, perm, visit);
            perm.swap(k, i);
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    rec(0, &mut perm, visit);
}

/// `W_p^p` between two uniform atom lists of equal length, by trying every
/// matching. Valid because an optimal plan between such measures can be
/// taken to be a permutation.
pub fn brute_cost_uniform(space: &FiniteMetricSpace, xs: &[usize], ys: &[usize], p: f64) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mut best = f64::INFINITY;
    permutations(n, &mut |perm| {
        let c: f64 = (0..n).map(|i| space.d(xs[i], ys[perm[i]]).powf(p)).sum();
        best = best.min(c);
    });
    best / n as f64
}

/// `W_1` on the line: the integral of `|F - G|`.
pub fn line_w1(xs: &[f64], mu: &[f64], nu: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let (mut f, mut g, mut total) = (0.0, 0.0, 0.0);
    for w in order.windows(2) {
        f += mu[w[0]];
        g += nu[w[0]];
        total += (f - g).abs() * (xs[w[1]] - xs[w[0]]);
    }
    total
}

/// Every `k`-subset of `0..m`.
pub fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for s in start..m {
            cur.push(s);
            rec(s + 1, m, k, cur, out);
            cur.pop();
        }
    }
    rec(0, m, k, &mut cur, &mut out);
    out
}

fn dist_to(space: &FiniteMetricSpace, x: usize, set: &[usize]) -> f64 {
    set.iter().map(|&s| space.d(x, s)).fold(f64::INFINITY, f64::min)
}

/// `e_{n,p}(mu)^p`: every site set of size `min(n, |E|)` in the whole space.
pub fn brute_e_pow(mu: &DiscreteMeasure, n: usize, p: f64) -> f64 {
    let space = mu.space();
    let w = mu.weights_f64();
    subsets(space.len(), n.min(space.len()))
        .iter()
        .map(|s| {
            (0..space.len())
                .map(|x| w[x] * dist_to(space, x, s).powf(p))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// `N(E, eps)` by trying centre sets of increasing size.
pub fn brute_covering(space: &FiniteMetricSpace, eps: f64) -> usize {
    (1..=space.len())
        .find(|&k| {
            subsets(space.len(), k)
                .iter()
                .any(|s| (0..space.len()).all(|x| dist_to(space, x, s) <= eps))
        })
        .unwrap()
}

/// `E[f(mu_n)]` by enumerating every ordered sample, with `f` given the
/// sample counts.
pub fn sequence_expectation(mu: &DiscreteMeasure, n: usize, f: impl Fn(&[u64]) -> f64) -> f64 {
    let w = mu.weights_f64();
    let m = w.len();
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    loop {
        let prob: f64 = idx.iter().map(|&i| w[i]).product();
        if prob > 0.0 {
            let mut counts = vec![0u64; m];
            for &i in &idx {
                counts[i] += 1;
            }
            total += prob * f(&counts);
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return total;
            }
            idx[pos] += 1;
            if idx[pos] < m {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Largest `sum f (mu - nu)` over the vertices of the 1-Lipschitz polytope
/// pinned at `f(0) = 0`. Each vertex is fixed by a spanning tree of tight
/// constraints; the search grows trees in every insertion order.
pub fn brute_kr_dual(space: &FiniteMetricSpace, mu: &[f64], nu: &[f64]) -> f64 {
    let m = space.len();
    let diff: Vec<f64> = (0..m).map(|i| mu[i] - nu[i]).collect();
    let mut best = f64::NEG_INFINITY;
    let mut f = vec![0.0; m];
    let mut placed = vec![false; m];
    placed[0] = true;
    fn rec(
        space: &FiniteMetricSpace,
        diff: &[f64],
        f: &mut [f64],
        placed: &mut [bool],
        count: usize,
        best: &mut f64,
    ) {
        let m = f.len();
        if count == m {
            let lipschitz = (0..m).all(|i| (0..m).all(|j| (f[i] - f[j]).abs() <= space.d(i, j) + 1e-12));
            if lipschitz {
                *best = best.max((0..m).map(|i| f[i] * diff[i]).sum());
            }
            return;
        }
        for x in 0..m {
            if placed[x] {
                continue;
            }
            for parent in 0..m {
                if !placed[parent] {
                    continue;
                }
                for sign in [-1.0, 1.0] {
                    f[x] = f[parent] + sign * space.d(x, parent);
                    placed[x] = true;
                    rec(space, diff, f, placed, count + 1, best);
                    placed[x] = false;
                }
            }
        }
    }
    rec(space, &diff, &mut f, &mut placed, 1, &mut best);
    best
}

pub fn uniform_on(space: &Arc<FiniteMetricSpace>) -> DiscreteMeasure {
    DiscreteMeasure::uniform(space.clone())
}

pub fn two_point() -> DiscreteMeasure {
    uniform_on(&line_space(&[0.0, 1.0]))
}

pub fn skewed_two_point() -> DiscreteMeasure {
    DiscreteMeasure::new(line_space(&[0.0, 1.0]), vec![ratio(3, 4), ratio(1, 4)]).unwrap()
}
