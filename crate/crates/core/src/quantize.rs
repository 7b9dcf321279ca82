//! Optimal quantization error `e_{n,p}`, optimal uniform quantization
//! error `b_{n,p}`, covering numbers and the resolution function `h(m)`.
//!
//! Candidate sites are always points of the ambient finite space. Exact
//! modes are budget guarded; heuristic modes return upper bounds.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{nearest_map, DiscreteMeasure, FiniteMetricSpace};
use crate::rational::{self, Rational};
use crate::rng::philox4x64;
use crate::transport::{check_p, min_cost_bipartite, pow_cost, wasserstein_cost};

/// Default candidate budget for exact enumeration.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Heuristic,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(Mode::Exact),
            "heuristic" => Some(Mode::Heuristic),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Heuristic => "heuristic",
        }
    }
}

/// A quantizer and its error. Heuristic results are upper bounds only.
#[derive(Debug, Clone)]
pub struct QuantizerResult {
    pub error: f64,
    pub p: f64,
    /// The requested number of points `n`.
    pub budget: u64,
    pub mode: Mode,
    pub support: Vec<usize>,
    pub measure: DiscreteMeasure,
}

#[derive(Serialize)]
struct QuantizerJson<'a> {
    error: f64,
    p: f64,
    budget: u64,
    mode: &'a str,
    support_labels: Vec<&'a str>,
    weights: Vec<String>,
}

impl QuantizerResult {
    pub(crate) fn new(
        mu: &DiscreteMeasure,
        cost: f64,
        p: f64,
        n: u64,
        mode: Mode,
        measure: DiscreteMeasure,
    ) -> Self {
        QuantizerResult {
            error: cost.max(0.0).powf(1.0 / p),
            p,
            budget: n,
            mode,
            support: measure.support(),
            measure: {
                debug_assert!(mu.same_space(&measure));
                measure
            },
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let space = self.measure.space();
        serde_json::to_value(QuantizerJson {
            error: self.error,
            p: self.p,
            budget: self.budget,
            mode: self.mode.name(),
            support_labels: self.support.iter().map(|&x| space.label(x)).collect(),
            weights: self
                .support
                .iter()
                .map(|&x| rational::format(self.measure.weight(x)))
                .collect(),
        })
        .expect("quantizer result serializes")
    }
}

/// `C(n, k)` saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("n must be a positive integer"));
    }
    Ok(())
}

struct Weighted {
    points: Vec<usize>,
    weights: Vec<f64>,
}

fn weighted_support(mu: &DiscreteMeasure) -> Weighted {
    let points = mu.support();
    let weights = points.iter().map(|&x| rational::to_f64(mu.weight(x))).collect();
    Weighted { points, weights }
}

/// `sum_x mu(x) d(x, S)^p` over the support.
fn set_cost(space: &FiniteMetricSpace, w: &Weighted, set: &[usize], p: f64) -> f64 {
    w.points
        .iter()
        .zip(&w.weights)
        .map(|(&x, &m)| m * pow_cost(space.dist_to_set(x, set), p))
        .sum()
}

fn set_witness(mu: &DiscreteMeasure, set: &[usize]) -> Result<DiscreteMeasure> {
    mu.pushforward(&nearest_map(mu.space(), set)?)
}

/// Calls `visit` on every `k`-subset of `0..m` in lexicographic order,
/// passing the per-point minimum cost accumulated along the way.
fn for_each_subset(
    m: usize,
    k: usize,
    init: &[f64],
    row: impl Fn(usize, usize) -> f64,
    combine: impl Fn(f64, f64) -> f64,
    mut visit: impl FnMut(&[usize], &[f64]),
) {
    let mut chosen = Vec::with_capacity(k);
    let mut levels: Vec<Vec<f64>> = vec![init.to_vec(); k + 1];
    fn rec(
        start: usize,
        m: usize,
        k: usize,
        chosen: &mut Vec<usize>,
        levels: &mut [Vec<f64>],
        row: &dyn Fn(usize, usize) -> f64,
        combine: &dyn Fn(f64, f64) -> f64,
        visit: &mut dyn FnMut(&[usize], &[f64]),
    ) {
        let depth = chosen.len();
        if depth == k {
            visit(chosen, &levels[depth]);
            return;
        }
        for s in start..=(m - (k - depth)) {
            let (lo, hi) = levels.split_at_mut(depth + 1);
            let prev = &lo[depth];
            let next = &mut hi[0];
            for (i, v) in next.iter_mut().enumerate() {
                *v = combine(prev[i], row(s, i));
            }
            chosen.push(s);
            rec(s + 1, m, k, chosen, levels, row, combine, visit);
            chosen.pop();
        }
    }
    rec(0, m, k, &mut chosen, &mut levels, &row, &combine, &mut visit);
}

/// Exact `min over |S| = k` of `sum mu(x) d(x,S)^p`, by enumeration.
fn exact_subset_cost(mu: &DiscreteMeasure, k: usize, p: f64, budget: u64) -> Result<(f64, Vec<usize>)> {
    let space = mu.space();
    let m = space.len();
    let count = binomial(m as u64, k as u64);
    if count > budget as u128 {
        return Err(Error::budget("exact e_{n,p} subset enumeration", count, budget));
    }
    let w = weighted_support(mu);
    let costs: Vec<Vec<f64>> = (0..m)
        .map(|s| w.points.iter().map(|&x| pow_cost(space.d(x, s), p)).collect())
        .collect();
    let mut best = f64::INFINITY;
    let mut best_set = Vec::new();
    for_each_subset(
        m,
        k,
        &vec![f64::INFINITY; w.points.len()],
        |s, i| costs[s][i],
        f64::min,
        |set, mins| {
            let c: f64 = mins.iter().zip(&w.weights).map(|(d, m)| d * m).sum();
            if c < best {
                best = c;
                best_set = set.to_vec();
            }
        },
    );
    Ok((best, best_set))
}

/// `e_{n,p}(mu)`. The witness is the nearest-point pushforward onto the
/// best site set.
pub fn optimal_quantization_error(
    mu: &DiscreteMeasure,
    n: u64,
    p: f64,
    mode: Mode,
    budget: u64,
) -> Result<QuantizerResult> {
    check_p(p)?;
    check_n(n)?;
    let supp = mu.support();
    if n as usize >= supp.len() {
        return Ok(QuantizerResult::new(mu, 0.0, p, n, mode, mu.clone()));
    }
    let (cost, set) = match mode {
        Mode::Exact => exact_subset_cost(mu, n as usize, p, budget)?,
        Mode::Heuristic => lloyd(mu, n as usize, p, &LloydOptions::default())?,
    };
    let witness = set_witness(mu, &set)?;
    Ok(QuantizerResult::new(mu, cost, p, n, mode, witness))
}

/// `e_{n,inf}(mu) = min over |S| <= n of max over supp(mu) of d(x, S)`.
pub fn optimal_quantization_error_inf(
    mu: &DiscreteMeasure,
    n: u64,
    budget: u64,
) -> Result<(f64, Vec<usize>)> {
    check_n(n)?;
    let supp = mu.support();
    if n as usize >= supp.len() {
        return Ok((0.0, supp));
    }
    let space = mu.space();
    let m = space.len();
    let k = n as usize;
    let count = binomial(m as u64, k as u64);
    if count > budget as u128 {
        return Err(Error::budget("exact e_{n,inf} subset enumeration", count, budget));
    }
    let mut best = f64::INFINITY;
    let mut best_set = Vec::new();
    for_each_subset(
        m,
        k,
        &vec![f64::INFINITY; supp.len()],
        |s, i| space.d(supp[i], s),
        f64::min,
        |set, mins| {
            let c = mins.iter().copied().fold(0.0, f64::max);
            if c < best {
                best = c;
                best_set = set.to_vec();
            }
        },
    );
    Ok((best, best_set))
}

/// Multi-start settings for the Lloyd heuristic.
#[derive(Debug, Clone)]
pub struct LloydOptions {
    pub random_starts: u64,
    pub seed: u64,
    pub max_iterations: usize,
    /// Extra initial site sets supplied by the caller; short sets are
    /// padded farthest-first.
    pub seeds: Vec<Vec<usize>>,
}

impl Default for LloydOptions {
    fn default() -> Self {
        LloydOptions {
            random_starts: 4,
            seed: 0x5eed,
            max_iterations: 100,
            seeds: Vec::new(),
        }
    }
}

fn uniform01(seed: u64, stream: u64, a: u64, b: u64) -> f64 {
    (philox4x64([a, b, 0, 0], [seed, stream])[0] >> 11) as f64 / (1u64 << 53) as f64
}

/// Alternates nearest-site assignment with recentering each cluster on the
/// ambient point of least conditional `p`-cost, from several starts.
pub fn lloyd(mu: &DiscreteMeasure, k: usize, p: f64, opts: &LloydOptions) -> Result<(f64, Vec<usize>)> {
    check_p(p)?;
    let space = mu.space();
    let m = space.len();
    let w = weighted_support(mu);
    let k = k.min(m);
    if k == 0 {
        return Err(Error::domain("need at least one site"));
    }
    let mut starts: Vec<Vec<usize>> = opts.seeds.clone();

    // Heaviest atoms.
    let mut by_mass: Vec<usize> = (0..w.points.len()).collect();
    by_mass.sort_by(|&a, &b| w.weights[b].total_cmp(&w.weights[a]).then(a.cmp(&b)));
    starts.push(by_mass.iter().take(k).map(|&i| w.points[i]).collect());

    // Farthest-first from the heaviest atom.
    let mut ff = vec![w.points[by_mass[0]]];
    let mut dmin: Vec<f64> = (0..m).map(|x| space.d(x, ff[0])).collect();
    while ff.len() < k {
        let (far, _) = dmin
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        ff.push(far);
        for (x, d) in dmin.iter_mut().enumerate() {
            *d = d.min(space.d(x, far));
        }
    }
    starts.push(ff);

    // Greedy additions, when affordable.
    if (k as u128) * (m as u128) * (w.points.len() as u128) <= 20_000_000 {
        let mut mins = vec![f64::INFINITY; w.points.len()];
        let mut set = Vec::new();
        for _ in 0..k {
            let mut best = (f64::INFINITY, 0);
            for s in 0..m {
                if set.contains(&s) {
                    continue;
                }
                let c: f64 = w
                    .points
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| w.weights[i] * mins[i].min(pow_cost(space.d(x, s), p)))
                    .sum();
                if c < best.0 {
                    best = (c, s);
                }
            }
            set.push(best.1);
            for (i, &x) in w.points.iter().enumerate() {
                mins[i] = mins[i].min(pow_cost(space.d(x, best.1), p));
            }
        }
        starts.push(set);
    }

    // D^p-weighted random starts.
    for r in 0..opts.random_starts {
        let mut set = Vec::with_capacity(k);
        let mut mins = vec![f64::INFINITY; w.points.len()];
        for step in 0..k as u64 {
            let scores: Vec<f64> = (0..w.points.len())
                .map(|i| {
                    if mins[i].is_infinite() {
                        w.weights[i]
                    } else {
                        w.weights[i] * mins[i]
                    }
                })
                .collect();
            let total: f64 = scores.iter().sum();
            let pick = if total > 0.0 {
                let u = uniform01(opts.seed, r, step, 0) * total;
                let mut acc = 0.0;
                let mut idx = scores.len() - 1;
                for (i, s) in scores.iter().enumerate() {
                    acc += s;
                    if u < acc {
                        idx = i;
                        break;
                    }
                }
                w.points[idx]
            } else {
                (0..m)
                    .find(|s| !set.contains(s))
                    .expect("k <= m leaves a free site")
            };
            if set.contains(&pick) {
                if let Some(s) = (0..m).find(|s| !set.contains(s)) {
                    set.push(s);
                }
            } else {
                set.push(pick);
            }
            let last = *set.last().unwrap();
            for (i, &x) in w.points.iter().enumerate() {
                mins[i] = mins[i].min(pow_cost(space.d(x, last), p));
            }
        }
        starts.push(set);
    }

    let mut best = (f64::INFINITY, Vec::new());
    for start in starts {
        let mut sites: Vec<usize> = start.into_iter().filter(|&s| s < m).collect();
        sites.sort_unstable();
        sites.dedup();
        sites.truncate(k);
        if sites.is_empty() {
            continue;
        }
        pad_farthest(space, &mut sites, k);
        let (c, s) = lloyd_from(space, &w, sites, p, opts.max_iterations);
        if c < best.0 || (c == best.0 && s < best.1) {
            best = (c, s);
        }
    }
    Ok(best)
}

/// Extends `sites` to `k` points by repeatedly adding the point farthest
/// from the current sites.
fn pad_farthest(space: &FiniteMetricSpace, sites: &mut Vec<usize>, k: usize) {
    if sites.len() >= k {
        return;
    }
    let mut dmin: Vec<f64> = (0..space.len()).map(|x| space.dist_to_set(x, sites)).collect();
    while sites.len() < k {
        let (far, _) = dmin
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        sites.push(far);
        for (x, d) in dmin.iter_mut().enumerate() {
            *d = d.min(space.d(x, far));
        }
    }
    sites.sort_unstable();
}

fn lloyd_from(
    space: &FiniteMetricSpace,
    w: &Weighted,
    mut sites: Vec<usize>,
    p: f64,
    max_iterations: usize,
) -> (f64, Vec<usize>) {
    let m = space.len();
    let mut cost = set_cost(space, w, &sites, p);
    for _ in 0..max_iterations {
        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); sites.len()];
        for (i, &x) in w.points.iter().enumerate() {
            let mut best = 0;
            for (c, &s) in sites.iter().enumerate() {
                if space.d(x, s) < space.d(x, sites[best]) {
                    best = c;
                }
            }
            clusters[best].push(i);
        }
        let mut next = sites.clone();
        let mut taken = vec![false; m];
        for &s in &next {
            taken[s] = true;
        }
        for (c, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let conditional = |s: usize| -> f64 {
                members
                    .iter()
                    .map(|&i| w.weights[i] * pow_cost(space.d(w.points[i], s), p))
                    .sum()
            };
            let mut best = (conditional(next[c]), next[c]);
            for s in 0..m {
                if taken[s] {
                    continue;
                }
                let v = conditional(s);
                if v < best.0 {
                    best = (v, s);
                }
            }
            taken[next[c]] = false;
            taken[best.1] = true;
            next[c] = best.1;
        }
        let new_cost = set_cost(space, w, &next, p);
        if new_cost < cost {
            cost = new_cost;
            sites = next;
        } else {
            break;
        }
    }
    sites.sort_unstable();
    (cost, sites)
}

/// Counts `c` over the ambient points with `sum c = n`, nearest to `n * nu`
/// by largest remainders (ties to the smaller index).
pub fn round_to_counts(nu: &DiscreteMeasure, n: u64) -> Vec<u64> {
    let nn = Rational::from_integer(BigInt::from(n));
    let scaled: Vec<Rational> = nu.weights().iter().map(|w| w * &nn).collect();
    let mut counts: Vec<u64> = scaled
        .iter()
        .map(|s| s.floor().to_integer().to_u64().unwrap())
        .collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = &scaled[a] - scaled[a].floor();
        let fb = &scaled[b] - scaled[b].floor();
        fb.cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take((n - assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

fn counts_measure(space: &Arc<FiniteMetricSpace>, counts: &[u64]) -> Result<DiscreteMeasure> {
    DiscreteMeasure::from_counts(space.clone(), counts)
}

/// `b_{n,p}(mu)`.
pub fn uniform_quantization_error(
    mu: &DiscreteMeasure,
    n: u64,
    p: f64,
    mode: Mode,
    budget: u64,
) -> Result<QuantizerResult> {
    check_p(p)?;
    check_n(n)?;
    let (cost, counts) = match mode {
        Mode::Exact => exact_uniform(mu, n, p, budget)?,
        Mode::Heuristic => heuristic_uniform(mu, n, p, &UniformSearch::default())?,
    };
    let witness = counts_measure(mu.space(), &counts)?;
    Ok(QuantizerResult::new(mu, cost, p, n, mode, witness))
}

/// Local-search settings for the heuristic `b_{n,p}`.
#[derive(Debug, Clone)]
pub struct UniformSearch {
    /// Cap on transport evaluations.
    pub max_evaluations: usize,
    /// Each move sends one unit to one of this many nearest other sites.
    pub neighbours: usize,
}

impl Default for UniformSearch {
    fn default() -> Self {
        UniformSearch {
            max_evaluations: 2000,
            neighbours: 8,
        }
    }
}

/// Starts from the rounded nearest-point pushforward onto a heuristic
/// `e_{n,p}` site set and applies improving single-unit moves.
pub fn heuristic_uniform(
    mu: &DiscreteMeasure,
    n: u64,
    p: f64,
    opts: &UniformSearch,
) -> Result<(f64, Vec<u64>)> {
    let space = mu.space();
    let m = space.len();
    let k = (n as usize).min(mu.support().len());
    let (_, sites) = lloyd(mu, k, p, &LloydOptions::default())?;
    let start = set_witness(mu, &sites)?;
    let mut counts = round_to_counts(&start, n);
    let eval = |c: &[u64]| -> Result<f64> { wasserstein_cost(mu, &counts_measure(space, c)?, p) };
    let mut cost = eval(&counts)?;
    let mut evals = 1usize;
    let mut improved = true;
    while improved && cost > 0.0 {
        improved = false;
        let occupied: Vec<usize> = (0..m).filter(|&y| counts[y] > 0).collect();
        'outer: for &y in &occupied {
            let mut near: Vec<usize> = (0..m).filter(|&z| z != y).collect();
            near.sort_by(|&a, &b| space.d(y, a).total_cmp(&space.d(y, b)).then(a.cmp(&b)));
            for &z in near.iter().take(opts.neighbours) {
                if evals >= opts.max_evaluations {
                    break 'outer;
                }
                counts[y] -= 1;
                counts[z] += 1;
                let c = eval(&counts)?;
                evals += 1;
                if c < cost * (1.0 - 1e-12) {
                    cost = c;
                    improved = true;
                    continue 'outer;
                }
                counts[y] += 1;
                counts[z] -= 1;
            }
        }
    }
    Ok((cost, counts))
}

/// Sites that no other site dominates on the support of `mu`: `y` is
/// dropped if some `z` is at least as close to every support point
/// (strictly closer somewhere, or equal everywhere with a smaller index).
fn undominated_sites(space: &FiniteMetricSpace, supp: &[usize]) -> Vec<usize> {
    let m = space.len();
    (0..m)
        .filter(|&y| {
            !(0..m).any(|z| {
                if z == y {
                    return false;
                }
                let mut all_le = true;
                let mut some_lt = false;
                for &x in supp {
                    let (dz, dy) = (space.d(x, z), space.d(x, y));
                    if dz > dy {
                        all_le = false;
                        break;
                    }
                    if dz < dy {
                        some_lt = true;
                    }
                }
                all_le && (some_lt || z < y)
            })
        })
        .collect()
}

struct UniformBnb<'a> {
    space: &'a FiniteMetricSpace,
    p: f64,
    supp: Vec<usize>,
    supply: Vec<i64>,
    unit: i64,
    sites: Vec<usize>,
    /// `rest_cost[d][i]`: min over `sites[d..]` of `d(supp[i], y)^p`.
    rest_cost: Vec<Vec<f64>>,
    scale: f64,
    evaluations: u64,
    budget: u64,
    best: f64,
    best_counts: Vec<u64>,
}

impl UniformBnb<'_> {
    /// LP value with `counts[..depth]` fixed and `rest` units spread freely
    /// over `sites[depth..]`.
    fn bound(&mut self, counts: &[u64], depth: usize, rest: u64) -> Result<f64> {
        self.evaluations += 1;
        if self.evaluations > self.budget {
            return Err(Error::budget(
                "exact b_{n,p} branch and bound",
                format!("more than {}", self.budget),
                self.budget,
            ));
        }
        let mut demand: Vec<i64> = counts[..depth].iter().map(|&c| c as i64 * self.unit).collect();
        let agg = depth;
        demand.push(rest as i64 * self.unit);
        let space = self.space;
        let (supp, sites, rest_cost, p) = (&self.supp, &self.sites, &self.rest_cost, self.p);
        let cost = min_cost_bipartite(&self.supply, &demand, |i, j| {
            if j == agg {
                rest_cost[depth][i]
            } else {
                pow_cost(space.d(supp[i], sites[j]), p)
            }
        })?;
        Ok(cost / self.scale)
    }

    fn search(&mut self, counts: &mut Vec<u64>, depth: usize, rest: u64) -> Result<()> {
        if self.best <= 0.0 {
            return Ok(());
        }
        let last = depth + 1 == self.sites.len();
        if last {
            counts[depth] = rest;
            let v = self.bound(counts, depth + 1, 0)?;
            self.offer(v, counts);
            counts[depth] = 0;
            return Ok(());
        }
        let mut options = Vec::with_capacity(rest as usize + 1);
        for v in 0..=rest {
            counts[depth] = v;
            let b = self.bound(counts, depth + 1, rest - v)?;
            options.push((b, v));
        }
        options.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        for (b, v) in options {
            if b >= self.best * (1.0 - 1e-12) {
                break;
            }
            counts[depth] = v;
            if v == rest {
                // Nothing left to place: the bound is the value.
                self.offer(b, counts);
            } else {
                self.search(counts, depth + 1, rest - v)?;
            }
        }
        counts[depth] = 0;
        Ok(())
    }

    fn offer(&mut self, v: f64, counts: &[u64]) {
        if v < self.best {
            self.best = v;
            self.best_counts = counts.to_vec();
        }
    }
}

/// Exact `b_{n,p}` by branch and bound over integer site counts. The
/// lower bound at a node keeps the fixed counts and lets the remaining
/// mass spread freely over the remaining sites, which is a transport
/// problem with one aggregate column. `budget` caps the number of
/// transport solves.
pub fn exact_uniform(mu: &DiscreteMeasure, n: u64, p: f64, budget: u64) -> Result<(f64, Vec<u64>)> {
    let space = mu.space();
    let m = space.len();
    let supp = mu.support();
    let nn = BigInt::from(n);
    let scale_big = rational::lcm_of_denominators(mu.weights());
    let scale_big = num_integer::Integer::lcm(&scale_big, &nn);
    let supply_r: Vec<Rational> = supp.iter().map(|&x| mu.weight(x).clone()).collect();
    let supply = rational::to_units(&supply_r, &scale_big)?;
    let scale = scale_big
        .to_i64()
        .ok_or_else(|| Error::Overflow("flow scale exceeds i64".into()))?;
    let unit = scale / n as i64;

    // Order sites by the mass their Voronoi cells attract, heaviest first.
    let mut sites = undominated_sites(space, &supp);
    let near = nearest_map(space, &sites)?;
    let cell = mu.pushforward(&near)?;
    sites.sort_by(|&a, &b| cell.weight(b).cmp(cell.weight(a)).then(a.cmp(&b)));

    let rest_cost: Vec<Vec<f64>> = (0..=sites.len())
        .map(|d| {
            supp.iter()
                .map(|&x| {
                    sites[d..]
                        .iter()
                        .map(|&y| pow_cost(space.d(x, y), p))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect()
        })
        .collect();

    // Incumbent: rounded pushforward on the site list, improved locally.
    let start_counts = round_to_counts(&cell, n);
    let start_cost = wasserstein_cost(mu, &counts_measure(space, &start_counts)?, p)?;
    let (h_cost, h_counts) = heuristic_uniform(
        mu,
        n,
        p,
        &UniformSearch {
            max_evaluations: 200,
            neighbours: 4,
        },
    )?;
    let (best, best_dense) = if h_cost < start_cost {
        (h_cost, h_counts)
    } else {
        (start_cost, start_counts)
    };

    let mut bnb = UniformBnb {
        space,
        p,
        supp,
        supply,
        unit,
        sites: sites.clone(),
        rest_cost,
        scale: scale as f64,
        evaluations: 0,
        budget,
        best,
        best_counts: Vec::new(),
    };
    let mut counts = vec![0u64; sites.len()];
    bnb.search(&mut counts, 0, n)?;
    let dense = if bnb.best_counts.is_empty() {
        best_dense
    } else {
        let mut d = vec![0u64; m];
        for (i, &y) in sites.iter().enumerate() {
            d[y] = bnb.best_counts[i];
        }
        d
    };
    let cost = wasserstein_cost(mu, &counts_measure(space, &dense)?, p)?;
    Ok((cost, dense))
}

/// Reference `b_{n,p}` by enumerating every multiset of `n` ambient points.
pub fn brute_force_uniform(mu: &DiscreteMeasure, n: u64, p: f64, budget: u64) -> Result<(f64, Vec<u64>)> {
    let space = mu.space();
    let m = space.len();
    let count = binomial(n + m as u64 - 1, m as u64 - 1);
    if count > budget as u128 {
        return Err(Error::budget("brute-force multiset enumeration", count, budget));
    }
    let mut best = (f64::INFINITY, Vec::new());
    let mut counts = vec![0u64; m];
    fn rec(
        i: usize,
        rest: u64,
        counts: &mut Vec<u64>,
        f: &mut dyn FnMut(&[u64]) -> Result<()>,
    ) -> Result<()> {
        if i + 1 == counts.len() {
            counts[i] = rest;
            f(counts)?;
            counts[i] = 0;
            return Ok(());
        }
        for v in (0..=rest).rev() {
            counts[i] = v;
            rec(i + 1, rest - v, counts, f)?;
        }
        counts[i] = 0;
        Ok(())
    }
    rec(0, n, &mut counts, &mut |c| {
        let v = wasserstein_cost(mu, &counts_measure(space, c)?, p)?;
        if v < best.0 {
            best = (v, c.to_vec());
        }
        Ok(())
    })?;
    Ok(best)
}

fn ball_masks(space: &FiniteMetricSpace, eps: f64) -> Vec<Vec<u64>> {
    let m = space.len();
    let words = m.div_ceil(64);
    (0..m)
        .map(|c| {
            let mut mask = vec![0u64; words];
            for x in 0..m {
                if space.d(c, x) <= eps {
                    mask[x / 64] |= 1 << (x % 64);
                }
            }
            mask
        })
        .collect()
}

/// `N(E, eps)`: the fewest closed `eps`-balls covering the space.
pub fn covering_number(space: &FiniteMetricSpace, eps: f64, mode: Mode, budget: u64) -> Result<usize> {
    if !(eps >= 0.0) {
        return Err(Error::domain("eps must be nonnegative"));
    }
    let m = space.len();
    if m == 0 {
        return Ok(0);
    }
    let masks = ball_masks(space, eps);
    let words = m.div_ceil(64);
    let mut full = vec![u64::MAX; words];
    if m % 64 != 0 {
        full[words - 1] = (1u64 << (m % 64)) - 1;
    }
    match mode {
        Mode::Heuristic => {
            let mut covered = vec![0u64; words];
            let mut used = 0;
            while covered != full {
                let (best, _) = masks
                    .iter()
                    .enumerate()
                    .map(|(c, mk)| {
                        let gain: u32 = mk.iter().zip(&covered).map(|(a, b)| (a & !b).count_ones()).sum();
                        (c, gain)
                    })
                    .fold((0, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
                for (c, mk) in covered.iter_mut().zip(&masks[best]) {
                    *c |= mk;
                }
                used += 1;
            }
            Ok(used)
        }
        Mode::Exact => {
            let mut spent: u128 = 0;
            for k in 1..=m {
                let count = binomial(m as u64, k as u64);
                spent = spent.saturating_add(count);
                if spent > budget as u128 {
                    return Err(Error::budget(
                        "exact covering number subset search",
                        spent,
                        budget,
                    ));
                }
                let found = covers_with(&masks, &full, k, &vec![0u64; words]);
                if found {
                    return Ok(k);
                }
            }
            Ok(m)
        }
    }
}

/// Whether `k` more balls complete the cover `acc`.
fn covers_with(masks: &[Vec<u64>], full: &[u64], k: usize, acc: &[u64]) -> bool {
    if acc == full {
        return true;
    }
    if k == 0 {
        return false;
    }
    // The lowest uncovered point must be covered by some chosen ball.
    let w = acc.iter().zip(full).position(|(a, f)| a != f).unwrap();
    let x = w * 64 + (full[w] & !acc[w]).trailing_zeros() as usize;
    masks.iter().any(|mask| {
        mask[x / 64] & (1 << (x % 64)) != 0 && {
            let next: Vec<u64> = acc.iter().zip(mask).map(|(a, b)| a | b).collect();
            covers_with(masks, full, k - 1, &next)
        }
    })
}

/// `h(m)`: the smallest distinct distance `eps` with `N(E, eps) <= m`.
pub fn resolution(space: &FiniteMetricSpace, m: usize, mode: Mode, budget: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::domain("m must be a positive integer"));
    }
    if m >= space.len() {
        return Ok(0.0);
    }
    let candidates = space.distinct_distances();
    // N is nonincreasing in eps, so binary search the breakpoints.
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if covering_number(space, candidates[mid], mode, budget)? <= m {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo])
}

/// Subsets of `0..m` with exactly `k` elements, lexicographic.
pub fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > m {
        return out;
    }
    for_each_subset(m, k, &[], |_, _| 0.0, |a, _| a, |s, _| out.push(s.to_vec()));
    out
}

/// Mass of `mu` left uncovered by `set` (zero when `set` covers the support).
pub fn uncovered_mass(mu: &DiscreteMeasure, set: &[usize]) -> Rational {
    mu.support()
        .into_iter()
        .filter(|x| !set.contains(x))
        .fold(Rational::zero(), |acc, x| acc + mu.weight(x))
}
