use std::cell::Cell;
use std::collections::HashMap;
use std::sync::Arc;

use num_traits::{Signed, Zero};
use serde_json::{json, Value};

use super::{params, BoundReport, ClaimKind, Functional, Instance, Side, Verifier};
use crate::decompose::build_uniform_quantizer;
use crate::empirical;
use crate::error::{Error, Result};
use crate::measure::{
    meet_and_residuals, mixture, nearest_map, DiscreteMeasure, FiniteMetricSpace, PointMap, SubMeasure,
};
use crate::rational::{self, Rational};
use crate::rng::{stream_id, uniform_below};
use crate::transport::{
    assignment_exhaustive, kantorovich_potential, lipschitz_constant, trimmed_wasserstein, wasserstein_cost,
    wasserstein_distance, wasserstein_dollar,
};

/// Check families accepted by [`check_bound`]. Most emit several report
/// ids (for example `main1` emits `main1_lower`, `main1_upper` and the
/// ratio reports).
pub const BOUND_IDS: &[&str] = &[
    "remark_compare",
    "w1decayrule",
    "main1",
    "main2",
    "main3",
    "main4",
    "supmu",
    "emptrans",
    "wppermute",
    "basicstability",
    "mutmu",
    "mixlemma",
    "2samples",
    "easybound",
    "measselect",
    "enpalternative",
    "kr_identity",
    "dollar_ineq",
    "dollar_w1",
    "dollar2",
    "transbound1",
    "basicbound",
    "chainingwp",
    "w1lb",
];

const MEAN_W1: Option<&str> = Some("mean_of_W1");
const ROOT_WP: Option<&str> = Some("root_mean_of_Wp_pow");
const MEAN_WP: Option<&str> = Some("mean_of_Wp");
const ROOT_DOLLAR: Option<&str> = Some("root_mean_of_Wp_dollar_pow");

/// Runs one check family on one instance.
pub fn check_bound(v: &Verifier, bound_id: &str, inst: &Instance) -> Result<Vec<BoundReport>> {
    let f: fn(&Verifier, &Instance) -> Result<Vec<BoundReport>> = match bound_id {
        "remark_compare" => remark_compare,
        "w1decayrule" => w1decayrule,
        "main1" => main1,
        "main2" => main2,
        "main3" => main3,
        "main4" => main4,
        "supmu" => supmu,
        "emptrans" => emptrans,
        "wppermute" => wppermute,
        "basicstability" => basicstability,
        "mutmu" => mutmu,
        "mixlemma" => mixlemma,
        "2samples" => two_samples,
        "easybound" => easybound,
        "measselect" => measselect,
        "enpalternative" => enpalternative,
        "kr_identity" => kr_identity,
        "dollar_ineq" => dollar_ineq,
        "dollar_w1" => dollar_w1,
        "dollar2" => dollar2,
        "transbound1" => transbound1,
        "basicbound" => basicbound,
        "chainingwp" => chainingwp,
        "w1lb" => w1lb,
        other => return Err(Error::domain(format!("unknown bound id {other:?}"))),
    };
    f(v, inst)
}

fn pow2(k: u32) -> u64 {
    1u64 << k
}

/// Seeded inputs for the lemma checks, one stream per (check, instance).
struct Draws {
    seed: u64,
    stream: u64,
    next: Cell<u64>,
}

impl Draws {
    fn new(v: &Verifier, check: &str, inst: &Instance) -> Self {
        Draws {
            seed: v.cfg.instance_seed,
            stream: stream_id(&[check, &inst.id]),
            next: Cell::new(0),
        }
    }

    fn below(&self, bound: u64) -> u64 {
        let i = self.next.get();
        self.next.set(i + 1);
        uniform_below(self.seed, self.stream, i, bound)
    }

    /// `den` units dropped uniformly on the points.
    fn measure(&self, space: &Arc<FiniteMetricSpace>, den: u64) -> Result<DiscreteMeasure> {
        let mut counts = vec![0u64; space.len()];
        for _ in 0..den {
            counts[self.below(space.len() as u64) as usize] += 1;
        }
        DiscreteMeasure::from_counts(space.clone(), &counts)
    }

    /// `(1 - s) mu + s rho` for a random `rho`, so the two overlap.
    fn partner(&self, mu: &DiscreteMeasure, s: Rational) -> Result<DiscreteMeasure> {
        let rho = self.measure(mu.space(), 12)?;
        mixture(&[(Rational::from_integer(1.into()) - &s, mu.clone()), (s, rho)])
    }

    fn map(&self, space: &Arc<FiniteMetricSpace>) -> Result<PointMap> {
        let m = space.len() as u64;
        PointMap::new(space.clone(), (0..m).map(|_| self.below(m) as usize).collect())
    }

    fn with_replacement(&self, m: usize, k: usize) -> Vec<usize> {
        (0..k).map(|_| self.below(m as u64) as usize).collect()
    }

    fn distinct(&self, m: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..m).collect();
        for i in 0..k {
            let j = i + self.below((m - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

/// Partner overlap fractions cycled through by the pairwise lemma checks.
fn overlap(t: u64) -> Rational {
    [
        rational::ratio(1, 4),
        rational::ratio(1, 2),
        rational::ratio(1, 1),
    ][(t % 3) as usize]
        .clone()
}

fn np(n: u64, p: f64) -> [(&'static str, Value); 2] {
    [("n", json!(n)), ("p", json!(p))]
}

fn remark_compare(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let mut out = Vec::new();
    for &p in &v.cfg.p {
        for &n in &v.cfg.n {
            let e = v.e(id, mu, n, p)?.0;
            let b = v.b(id, mu, n, p)?;
            let ew = v.law(id, mu, n, Functional::Wp(p))?.mean();
            out.push(BoundReport::new(
                "remark_compare_e_le_b",
                id,
                ClaimKind::Lemma,
                Side::exact(e),
                Side::exact(b),
                None,
                params(np(n, p)),
            ));
            out.push(BoundReport::new(
                "remark_compare_b_le_mean",
                id,
                ClaimKind::Lemma,
                Side::exact(b),
                ew,
                MEAN_WP,
                params(np(n, p)),
            ));
        }
    }
    Ok(out)
}

fn mean_w1(v: &Verifier, inst: &Instance, n: u64) -> Result<Side> {
    Ok(v.law(&inst.id, &inst.mu, n, Functional::Wp(1.0))?.mean())
}

fn w1decayrule(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for &n in &v.cfg.n {
        if !v.cfg.n.contains(&(2 * n)) {
            continue;
        }
        let (en, e2n) = (mean_w1(v, inst, n)?, mean_w1(v, inst, 2 * n)?);
        let ps = params([("n", json!(n))]);
        out.push(BoundReport::new(
            "w1decayrule_lower",
            &inst.id,
            ClaimKind::Lemma,
            en.scale(0.5),
            e2n,
            MEAN_W1,
            ps.clone(),
        ));
        out.push(BoundReport::new(
            "w1decayrule_upper",
            &inst.id,
            ClaimKind::Lemma,
            e2n,
            en,
            MEAN_W1,
            ps,
        ));
    }
    Ok(out)
}

fn main1(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let mut out = Vec::new();
    for &n in &v.cfg.n {
        let kmax = n.ilog2();
        let mut max_term: f64 = 0.0;
        let mut sum = 0.0;
        for k in 0..=kmax {
            let t = (pow2(k) as f64 / n as f64).sqrt() * v.b(id, mu, pow2(k), 1.0)?;
            max_term = max_term.max(t);
            sum += t;
        }
        let log_factor = (2.0 * n as f64).ln().sqrt();
        let lower = max_term / (22.0 * log_factor);
        let upper = 5.0 * sum;
        let e = mean_w1(v, inst, n)?;
        let ps = params([("n", json!(n))]);
        out.push(BoundReport::new(
            "main1_lower",
            id,
            ClaimKind::Theorem,
            Side::exact(lower),
            e,
            MEAN_W1,
            ps.clone(),
        ));
        out.push(BoundReport::new(
            "main1_upper",
            id,
            ClaimKind::Theorem,
            e,
            Side::exact(upper),
            MEAN_W1,
            ps.clone(),
        ));
        if lower > 0.0 {
            let ratio = Side::exact(upper / lower);
            let stated = 110.0 * log_factor * kmax as f64;
            let counted = 110.0 * log_factor * (kmax + 1) as f64;
            out.push(BoundReport::new(
                "main1_ratio",
                id,
                ClaimKind::Remark,
                ratio,
                Side::exact(stated),
                None,
                ps.clone(),
            ));
            out.push(BoundReport::new(
                "main1_ratio_term_count",
                id,
                ClaimKind::Derived,
                ratio,
                Side::exact(counted),
                None,
                ps,
            ));
        }
    }
    Ok(out)
}

fn main2(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let mut out = Vec::new();
    for &p in &v.cfg.p {
        for &n in &v.cfg.n {
            let mut rhs = 0.0;
            for k in 0..=n.ilog2() {
                rhs += (pow2(k) as f64 / n as f64).powf(1.0 / (2.0 * p)) * v.b(id, mu, pow2(k), p)?;
            }
            let lhs = v.law(id, mu, n, Functional::Wp(p))?.norm(p);
            out.push(BoundReport::new(
                "main2",
                id,
                ClaimKind::Theorem,
                lhs,
                Side::exact(5.0 * rhs),
                ROOT_WP,
                params(np(n, p)),
            ));
        }
    }
    Ok(out)
}

/// Multipliers of `p` in the finite part of the `q` grid for `main3`.
pub const MAIN3_Q_GRID: [f64; 7] = [1.0, 1.25, 1.5, 2.0, 3.0, 4.0, 8.0];

fn main3(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    if mu.space().len() > v.cfg.main3_max_points {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for &p in &v.cfg.p {
        for k in 0..=v.cfg.k_max {
            let mut sum = 0.0;
            let mut supports = Vec::new();
            let mut chosen = Vec::new();
            for j in 0..=k {
                let gap = (k - j) as f64;
                let (ei, set) = v.e(id, mu, pow2(j), f64::INFINITY)?;
                let mut best = (0.5f64.powf(gap) * ei.powf(p), json!("inf"), set);
                for c in MAIN3_Q_GRID {
                    let q = c * p;
                    let (e, set) = v.e(id, mu, pow2(j), q)?;
                    let term = 2f64.powf((p / q - 1.0) * gap) * e.powf(p);
                    if term < best.0 {
                        best = (term, json!(q), set);
                    }
                }
                sum += best.0;
                chosen.push(best.1);
                supports.push(best.2);
            }
            let lhs = v.b(id, mu, pow2(k), p)?.powf(p);
            let ps = params([
                ("k", json!(k)),
                ("p", json!(p)),
                ("q_by_level", Value::Array(chosen)),
            ]);
            out.push(BoundReport::new(
                "main3",
                id,
                ClaimKind::Theorem,
                Side::exact(lhs),
                Side::exact(2.0 * sum),
                None,
                ps.clone(),
            ));

            let built = build_uniform_quantizer(mu, &supports, p)?;
            let err = built.result.error;
            let b_next = v.b(id, mu, pow2(k + 1), p)?;
            out.push(BoundReport::new(
                "main3_construct_b",
                id,
                ClaimKind::Lemma,
                Side::exact(b_next),
                Side::exact(err),
                None,
                ps.clone(),
            ));
            out.push(BoundReport::new(
                "main3_construct_proof_bound",
                id,
                ClaimKind::Derived,
                Side::exact(err.powf(p)),
                Side::exact(built.proof_bound),
                None,
                ps.clone(),
            ));
            out.push(BoundReport::new(
                "main3_construct_mu_bound",
                id,
                ClaimKind::Derived,
                Side::exact(err.powf(p)),
                Side::exact(built.mu_bound),
                None,
                ps,
            ));
        }
    }
    Ok(out)
}

/// The weight `a_k` of the `e_{2^k,q}` term, by regime of `q` against `2p`.
pub fn main4_weight(p: f64, q: f64, k: u32, n: u64) -> f64 {
    let ratio = pow2(k) as f64 / n as f64;
    let c = 2.0 / (1.0 / (2.0 * p) - 1.0 / q).abs();
    if q > 2.0 * p {
        c * ratio.powf(1.0 / (2.0 * p))
    } else if q == 2.0 * p {
        (n.ilog2() + 1) as f64 * ratio.powf(1.0 / (2.0 * p))
    } else {
        c * ratio.powf(1.0 / p - 1.0 / q)
    }
}

fn main4(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let mut out = Vec::new();
    for &(p, q) in &v.cfg.pq {
        for &n in &v.cfg.n {
            let mut sum = 0.0;
            for k in 0..=n.ilog2() {
                sum += main4_weight(p, q, k, n) * v.e(id, mu, pow2(k), q)?.0;
            }
            let lhs = v.law(id, mu, n, Functional::Wp(p))?.norm(p);
            let regime = if q > 2.0 * p {
                "q>2p"
            } else if q == 2.0 * p {
                "q=2p"
            } else {
                "q<2p"
            };
            let ps = params([
                ("n", json!(n)),
                ("p", json!(p)),
                ("q", json!(q)),
                ("regime", json!(regime)),
            ]);
            out.push(BoundReport::new(
                "main4",
                id,
                ClaimKind::Theorem,
                lhs,
                Side::exact(10.0 * sum),
                ROOT_WP,
                ps,
            ));
        }
    }
    Ok(out)
}

/// A greedy maximal set with pairwise distances at least `h`, truncated to `size`.
pub fn separated_set(space: &FiniteMetricSpace, h: f64, size: usize) -> Vec<usize> {
    let mut s: Vec<usize> = Vec::new();
    for x in 0..space.len() {
        if s.iter().all(|&y| space.d(x, y) >= h) {
            s.push(x);
        }
    }
    s.truncate(size);
    s
}

fn supmu(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let m = mu.space().len();
    if m > v.cfg.supmu_max_points {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for &p in &v.cfg.p {
        for &n in &v.cfg.n {
            let mut sum = 0.0;
            for k in 0..=n.ilog2() {
                sum += (pow2(k) as f64 / n as f64).powf(1.0 / (2.0 * p)) * v.h(id, mu, pow2(k) as usize)?;
            }
            let lhs = v.law(id, mu, n, Functional::Wp(p))?.norm(p);
            out.push(BoundReport::new(
                "supmu_upper",
                id,
                ClaimKind::Theorem,
                lhs,
                Side::exact(40.0 * p * sum),
                ROOT_WP,
                params(np(n, p)),
            ));
        }
    }

    let mut rs: Vec<usize> = [2, m / 2, m.saturating_sub(1)]
        .into_iter()
        .filter(|&r| r >= 1 && r < m)
        .collect();
    rs.sort_unstable();
    rs.dedup();
    for r in rs {
        let h = v.h(id, mu, r)?;
        if h <= 0.0 {
            continue;
        }
        let size = r.max(2);
        let set = separated_set(mu.space(), h, size);
        if set.len() < size {
            return Err(Error::domain(format!(
                "no {h}-separated set of size {size} in {id}"
            )));
        }
        let nu = DiscreteMeasure::uniform_on(mu.space().clone(), &set)?;
        let nid = format!("{id}/separated_r{r}");
        for &p in &v.cfg.p {
            for &n in v.cfg.n.iter().filter(|&&n| n >= r as u64) {
                let law = v.law(&nid, &nu, n, Functional::Wp(p))?;
                let ratio = r as f64 / n as f64;
                let ps = params([("n", json!(n)), ("p", json!(p)), ("r", json!(r)), ("h", json!(h))]);
                out.push(BoundReport::new(
                    "supmu_lower",
                    id,
                    ClaimKind::Theorem,
                    Side::exact(0.25 * ratio.powf(1.0 / (2.0 * p)) * h),
                    law.norm(p),
                    ROOT_WP,
                    ps.clone(),
                ));
                out.push(BoundReport::new(
                    "supmu_lower_moment",
                    id,
                    ClaimKind::Derived,
                    Side::exact(0.25 * h.powf(p) * ratio.sqrt()),
                    law.moment(p),
                    Some("mean_of_Wp_pow"),
                    ps,
                ));
            }
        }
    }
    Ok(out)
}

fn emptrans(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let draws = Draws::new(v, "emptrans", inst);
    let m = mu.space().len();
    let mut out = Vec::new();
    for t in 0..v.cfg.lemma_repeats {
        let map = draws.map(mu.space())?;
        let pushed = mu.pushforward(&map)?;
        for n in 1..=4u64 {
            if !v.is_exact(mu, n) {
                continue;
            }
            let mut law: HashMap<Vec<u64>, Rational> = HashMap::new();
            for o in empirical::outcomes(mu, n, v.cfg.budget_outcomes)? {
                let mut c = vec![0u64; m];
                for (x, &k) in o.counts.iter().enumerate() {
                    c[map.get(x).expect("total map")] += k;
                }
                *law.entry(c).or_insert_with(Rational::zero) += o.probability;
            }
            for o in empirical::outcomes(&pushed, n, v.cfg.budget_outcomes)? {
                *law.entry(o.counts).or_insert_with(Rational::zero) -= o.probability;
            }
            let tv: Rational = law.values().fold(Rational::zero(), |acc, d| acc + d.abs())
                / Rational::from_integer(2.into());
            out.push(BoundReport::new(
                "emptrans",
                id,
                ClaimKind::Lemma,
                Side::exact(rational::to_f64(&tv)),
                Side::exact(0.0),
                None,
                params([("n", json!(n)), ("map", json!(t))]),
            ));
        }
    }
    Ok(out)
}

fn wppermute(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, space) = (inst.id.as_str(), inst.mu.space());
    let draws = Draws::new(v, "wppermute", inst);
    let mut out = Vec::new();
    for r in [1usize, 2, 3, 5, 7] {
        let y = draws.with_replacement(space.len(), r);
        let z = draws.with_replacement(space.len(), r);
        let a = DiscreteMeasure::uniform_on(space.clone(), &y)?;
        let b = DiscreteMeasure::uniform_on(space.clone(), &z)?;
        for &p in &v.cfg.p {
            let perm = assignment_exhaustive(space, &y, &z, p)?.powf(1.0 / p);
            let flow = wasserstein_distance(&a, &b, p)?;
            out.push(BoundReport::new(
                "wppermute",
                id,
                ClaimKind::Lemma,
                Side::exact((perm - flow).abs()),
                Side::exact(0.0),
                None,
                params([("r", json!(r)), ("p", json!(p))]),
            ));
        }
    }
    Ok(out)
}

fn sample_sizes(v: &Verifier) -> Vec<u64> {
    let mut ms: Vec<u64> = std::iter::once(1).chain(v.cfg.lemma_n.iter().copied()).collect();
    ms.sort_unstable();
    ms.dedup();
    ms
}

fn basicstability(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let id = inst.id.as_str();
    let ms = sample_sizes(v);
    let mut out = Vec::new();
    for (i, &m) in ms.iter().enumerate() {
        let em = mean_w1(v, inst, m)?;
        for &n in &ms[i + 1..] {
            out.push(BoundReport::new(
                "basicstability_monotone",
                id,
                ClaimKind::Lemma,
                em.scale(m as f64 / n as f64),
                mean_w1(v, inst, n)?,
                MEAN_W1,
                params([("m", json!(m)), ("n", json!(n))]),
            ));
        }
        let e2m = mean_w1(v, inst, 2 * m)?;
        let ps = params([("m", json!(m))]);
        out.push(BoundReport::new(
            "basicstability_doubling_lower",
            id,
            ClaimKind::Lemma,
            em.scale(0.5),
            e2m,
            MEAN_W1,
            ps.clone(),
        ));
        out.push(BoundReport::new(
            "basicstability_doubling_upper",
            id,
            ClaimKind::Lemma,
            e2m,
            em,
            MEAN_W1,
            ps,
        ));
    }
    Ok(out)
}

fn mutmu(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let draws = Draws::new(v, "mutmu", inst);
    let mut out = Vec::new();
    for t in 0..v.cfg.lemma_repeats {
        let map = draws.map(mu.space())?;
        let pushed = mu.pushforward(&map)?;
        for &p in &v.cfg.p {
            out.push(BoundReport::new(
                "mutmu",
                id,
                ClaimKind::Lemma,
                Side::exact(wasserstein_distance(mu, &pushed, p)?),
                Side::exact(mu.displacement_cost(&map, p)?.powf(1.0 / p)),
                None,
                params([("p", json!(p)), ("map", json!(t))]),
            ));
        }
    }
    Ok(out)
}

fn mixlemma(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, space) = (inst.id.as_str(), inst.mu.space());
    let draws = Draws::new(v, "mixlemma", inst);
    let mut out = Vec::new();
    for t in 0..v.cfg.lemma_repeats {
        let k = 2 + (t % 2) as usize;
        let mut units = vec![0i64; k];
        for _ in 0..6 {
            units[draws.below(k as u64) as usize] += 1;
        }
        let ts: Vec<Rational> = units.iter().map(|&u| rational::ratio(u, 6)).collect();
        let mus: Vec<DiscreteMeasure> = (0..k).map(|_| draws.measure(space, 12)).collect::<Result<_>>()?;
        let nus: Vec<DiscreteMeasure> = (0..k).map(|_| draws.measure(space, 12)).collect::<Result<_>>()?;
        let mix =
            |ms: &[DiscreteMeasure]| mixture(&ts.iter().cloned().zip(ms.iter().cloned()).collect::<Vec<_>>());
        let (a, b) = (mix(&mus)?, mix(&nus)?);
        for &p in &v.cfg.p {
            let mut rhs = 0.0;
            for j in 0..k {
                rhs += rational::to_f64(&ts[j]) * wasserstein_cost(&mus[j], &nus[j], p)?;
            }
            out.push(BoundReport::new(
                "mixlemma",
                id,
                ClaimKind::Lemma,
                Side::exact(wasserstein_cost(&a, &b, p)?),
                Side::exact(rhs),
                None,
                params([("p", json!(p)), ("k", json!(k)), ("draw", json!(t))]),
            ));
        }
    }
    Ok(out)
}

fn two_samples(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let mut out = Vec::new();
    for p in [1.0, 2.0] {
        for &n in &v.cfg.lemma_n {
            let one = v.law(id, mu, n, Functional::Wp(p))?.norm(p);
            let two = v.two_sample_law(id, mu, n, p)?.norm(p);
            out.push(BoundReport::new(
                "2samples_lower",
                id,
                ClaimKind::Lemma,
                one,
                two,
                ROOT_WP,
                params(np(n, p)),
            ));
            out.push(BoundReport::new(
                "2samples_upper",
                id,
                ClaimKind::Lemma,
                two,
                one.scale(2.0),
                ROOT_WP,
                params(np(n, p)),
            ));
        }
    }
    Ok(out)
}

fn easybound(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let draws = Draws::new(v, "easybound", inst);
    let mut out = Vec::new();
    for t in 0..v.cfg.lemma_repeats {
        let tilde = if t == 0 {
            mu.pushforward(&draws.map(mu.space())?)?
        } else {
            draws.partner(mu, overlap(t))?
        };
        let tid = format!("{id}/easybound_tilde{t}");
        for p in [1.0, 2.0] {
            let w = wasserstein_distance(mu, &tilde, p)?;
            for &n in &v.cfg.lemma_n {
                let a = v.law(id, mu, n, Functional::Wp(p))?.norm(p);
                let b = v.law(&tid, &tilde, n, Functional::Wp(p))?.norm(p);
                out.push(BoundReport::new(
                    "easybound",
                    id,
                    ClaimKind::Lemma,
                    a.minus(b).abs(),
                    Side::exact(2.0 * w),
                    ROOT_WP,
                    params([("n", json!(n)), ("p", json!(p)), ("tilde", json!(t))]),
                ));
            }
        }
    }
    Ok(out)
}

fn measselect(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, space) = (inst.id.as_str(), inst.mu.space());
    let draws = Draws::new(v, "measselect", inst);
    let mut out = Vec::new();
    for t in 0..v.cfg.lemma_repeats {
        let size = 1 + draws.below(space.len().min(3) as u64) as usize;
        let set = draws.distinct(space.len(), size);
        let map = nearest_map(space, &set)?;
        let mut worst: f64 = 0.0;
        for x in 0..space.len() {
            worst = match map.get(x) {
                Some(y) if set.contains(&y) => worst.max((space.d(x, y) - space.dist_to_set(x, &set)).abs()),
                _ => f64::INFINITY,
            };
        }
        out.push(BoundReport::new(
            "measselect",
            id,
            ClaimKind::Lemma,
            Side::exact(worst),
            Side::exact(0.0),
            None,
            params([("set_size", json!(size)), ("draw", json!(t))]),
        ));
    }
    Ok(out)
}

fn enpalternative(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let space = mu.space();
    let draws = Draws::new(v, "enpalternative", inst);
    let mut out = Vec::new();
    for n in 1..=3u64.min(space.len() as u64) {
        for &p in &v.cfg.p {
            let (e, set) = v.e(id, mu, n, p)?;
            let witness = mu.pushforward(&nearest_map(space, &set)?)?;
            out.push(BoundReport::new(
                "enpalternative_witness",
                id,
                ClaimKind::Lemma,
                Side::exact((wasserstein_distance(mu, &witness, p)? - e).abs()),
                Side::exact(0.0),
                None,
                params(np(n, p)),
            ));
            for t in 0..v.cfg.lemma_repeats {
                let pts = draws.distinct(space.len(), n as usize);
                let mut counts = vec![0u64; space.len()];
                for &x in &pts {
                    counts[x] = 1 + draws.below(4);
                }
                let nu = DiscreteMeasure::from_counts(space.clone(), &counts)?;
                out.push(BoundReport::new(
                    "enpalternative_lower",
                    id,
                    ClaimKind::Lemma,
                    Side::exact(e),
                    Side::exact(wasserstein_distance(mu, &nu, p)?),
                    None,
                    params([("n", json!(n)), ("p", json!(p)), ("draw", json!(t))]),
                ));
            }
        }
    }
    Ok(out)
}

fn kr_identity(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let draws = Draws::new(v, "kr_identity", inst);
    let mut out = Vec::new();
    for t in 0..v.cfg.lemma_repeats {
        let nu = draws.partner(mu, overlap(t))?;
        let (dual, f) = kantorovich_potential(mu, &nu)?;
        let primal = wasserstein_distance(mu, &nu, 1.0)?;
        let ps = params([("draw", json!(t))]);
        out.push(BoundReport::new(
            "kr_identity",
            id,
            ClaimKind::Lemma,
            Side::exact((dual - primal).abs()),
            Side::exact(0.0),
            None,
            ps.clone(),
        ));
        out.push(BoundReport::new(
            "kr_identity_lipschitz",
            id,
            ClaimKind::Lemma,
            Side::exact(lipschitz_constant(mu.space(), &f)),
            Side::exact(1.0),
            None,
            ps,
        ));
    }
    Ok(out)
}

fn dollar_ineq(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let draws = Draws::new(v, "dollar_ineq", inst);
    let mut out = Vec::new();
    for t in 0..v.cfg.lemma_repeats {
        let nu = draws.partner(mu, overlap(t))?;
        for &p in &v.cfg.p {
            out.push(BoundReport::new(
                "dollar_ineq",
                id,
                ClaimKind::Lemma,
                Side::exact(wasserstein_distance(mu, &nu, p)?),
                Side::exact(wasserstein_dollar(mu, &nu, p)?),
                None,
                params([("p", json!(p)), ("draw", json!(t))]),
            ));
        }
    }
    Ok(out)
}

fn dollar_w1(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let draws = Draws::new(v, "dollar_w1", inst);
    let mut out = Vec::new();
    for t in 0..v.cfg.lemma_repeats {
        let nu = draws.partner(mu, overlap(t))?;
        let gap = (wasserstein_dollar(mu, &nu, 1.0)? - wasserstein_distance(mu, &nu, 1.0)?).abs();
        out.push(BoundReport::new(
            "dollar_w1",
            id,
            ClaimKind::Lemma,
            Side::exact(gap),
            Side::exact(0.0),
            None,
            params([("draw", json!(t))]),
        ));
    }
    Ok(out)
}

/// Scales each atom of `m` by a random factor in `{0, 1/3, 2/3, 1}`.
fn thin(draws: &Draws, m: &SubMeasure) -> Result<SubMeasure> {
    let weights = m
        .weights()
        .iter()
        .map(|w| w * rational::ratio(draws.below(4) as i64, 3))
        .collect();
    SubMeasure::new(m.space().clone(), weights)
}

fn dollar2(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let draws = Draws::new(v, "dollar2", inst);
    let mut out = Vec::new();
    for t in 0..v.cfg.lemma_repeats {
        let nu = draws.partner(mu, overlap(t + 1))?;
        let meet = meet_and_residuals(mu, &nu)?.meet;
        let eta = thin(&draws, &meet)?;
        let zeta = thin(&draws, &eta)?;
        for &p in &v.cfg.p {
            out.push(BoundReport::new(
                "dollar2",
                id,
                ClaimKind::Lemma,
                Side::exact(trimmed_wasserstein(mu, &nu, &zeta, p)?),
                Side::exact(trimmed_wasserstein(mu, &nu, &eta, p)?),
                None,
                params([("p", json!(p)), ("draw", json!(t))]),
            ));
        }
    }
    Ok(out)
}

fn transbound1(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let draws = Draws::new(v, "transbound1", inst);
    let mut out = Vec::new();
    for t in 0..v.cfg.lemma_repeats {
        let nu = draws.partner(mu, overlap(t))?;
        let map = draws.map(mu.space())?;
        let (tm, tn) = (mu.pushforward(&map)?, nu.pushforward(&map)?);
        for &p in &v.cfg.p {
            let rhs = wasserstein_distance(&tm, &tn, p)?
                + mu.displacement_cost(&map, p)?.powf(1.0 / p)
                + nu.displacement_cost(&map, p)?.powf(1.0 / p);
            out.push(BoundReport::new(
                "transbound1",
                id,
                ClaimKind::Lemma,
                Side::exact(wasserstein_distance(mu, &nu, p)?),
                Side::exact(rhs),
                None,
                params([("p", json!(p)), ("draw", json!(t))]),
            ));
        }
    }
    Ok(out)
}

fn basicbound(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, mu) = (inst.id.as_str(), &inst.mu);
    let space = mu.space();
    let draws = Draws::new(v, "basicbound", inst);
    let mut out = Vec::new();
    for t in 0..v.cfg.lemma_repeats {
        let nu = draws.partner(mu, overlap(t))?;
        let map = draws.map(space)?;
        let (tm, tn) = (mu.pushforward(&map)?, nu.pushforward(&map)?);
        for &p in &v.cfg.p {
            let moved: f64 = (0..space.len())
                .map(|x| {
                    let diff = rational::to_f64(&(mu.weight(x) - nu.weight(x)).abs());
                    space.d(x, map.get(x).expect("total map")).powf(p) * diff
                })
                .sum();
            let rhs = wasserstein_dollar(&tm, &tn, p)? + 2f64.powf(1.0 - 1.0 / p) * moved.powf(1.0 / p);
            out.push(BoundReport::new(
                "basicbound",
                id,
                ClaimKind::Lemma,
                Side::exact(wasserstein_dollar(mu, &nu, p)?),
                Side::exact(rhs),
                None,
                params([("p", json!(p)), ("draw", json!(t))]),
            ));
        }
    }
    Ok(out)
}

fn chainingwp(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let (id, space) = (inst.id.as_str(), inst.mu.space());
    let m = space.len();
    if m < 2 {
        return Ok(Vec::new());
    }
    let draws = Draws::new(v, "chainingwp", inst);
    let mut rs = vec![1, m / 2];
    rs.dedup();
    let mut out = Vec::new();
    for r in rs {
        let y = draws.distinct(m, 2 * r);
        let z = draws.with_replacement(m, r);
        let fine = DiscreteMeasure::uniform_on(space.clone(), &y)?;
        let coarse = DiscreteMeasure::uniform_on(space.clone(), &z)?;
        let (yid, zid) = (format!("{id}/chain_r{r}_y"), format!("{id}/chain_r{r}_z"));
        for p in [1.0, 2.0] {
            let w = wasserstein_distance(&fine, &coarse, p)?;
            for &n in &v.cfg.lemma_n {
                let lhs = v.law(&yid, &fine, n, Functional::Dollar(p))?.norm(p);
                let base = v.law(&zid, &coarse, n, Functional::Dollar(p))?.norm(p);
                let extra = 2f64.powf(1.0 - 1.0 / p) * (2.0 * r as f64 / n as f64).powf(1.0 / (2.0 * p)) * w;
                out.push(BoundReport::new(
                    "chainingwp",
                    id,
                    ClaimKind::Lemma,
                    lhs,
                    base.plus(Side::exact(extra)),
                    ROOT_DOLLAR,
                    params([("n", json!(n)), ("p", json!(p)), ("r", json!(r))]),
                ));
            }
        }
    }
    Ok(out)
}

/// `(m, n)` pairs for the `w1lb` check.
pub const W1LB_PAIRS: [(u64, u64); 5] = [(2, 1), (2, 2), (2, 4), (3, 3), (4, 2)];

fn w1lb(v: &Verifier, inst: &Instance) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for (m, n) in W1LB_PAIRS {
        let factor = 1.0 / (11.0 * (m as f64 * (2.0 * (m * n) as f64).ln()).sqrt());
        out.push(BoundReport::new(
            "w1lb",
            &inst.id,
            ClaimKind::Lemma,
            mean_w1(v, inst, n)?.scale(factor),
            mean_w1(v, inst, m * n)?,
            MEAN_W1,
            params([("m", json!(m)), ("n", json!(n))]),
        ));
    }
    Ok(out)
}
