//! Dyadic decompositions and the uniform quantizer built from them.
//!
//! A measure is split as `mu = lambda/2 + zeta/2` where the pushforward of
//! `lambda` under a map with at most `r` range points has weights in
//! `(1/r) Z`; repeating on `zeta` with `r = 2^k, 2^{k-1}, ..., 2` gives
//! `mu = 2^{-k} lambda_0 + sum_{j>=1} 2^{-(k-j+1)} lambda_j`. Mixing the
//! pushforwards with the same weights yields a measure with weights in
//! `2^{-(k+1)} Z`, i.e. a uniform quantizer on `2^{k+1}` points.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{mixture, nearest_map, DiscreteMeasure, FiniteMetricSpace, PointMap};
use crate::quantize::{Mode, QuantizerResult};
use crate::rational::{self, Rational};
use crate::transport::{check_p, wasserstein_cost};

/// Decrements the largest entry (smallest index on ties) until the sum is `r`.
pub fn reduce_counts(f: &[u64], r: u64) -> Result<Vec<u64>> {
    let total: u64 = f.iter().sum();
    if total < r {
        return Err(Error::domain(format!("counts sum to {total}, below r = {r}")));
    }
    let mut g = f.to_vec();
    for _ in r..total {
        let (i, _) = g
            .iter()
            .enumerate()
            .fold((0, 0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        g[i] -= 1;
    }
    Ok(g)
}

/// `mu = lambda/2 + zeta/2` with `T_# lambda` uniform on `r` points.
pub fn split_half(mu: &DiscreteMeasure, t: &PointMap, r: u64) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    if r == 0 {
        return Err(Error::domain("r must be positive"));
    }
    let space = mu.space();
    let supp = mu.support();
    let mut fiber = vec![Rational::zero(); space.len()];
    for &x in &supp {
        let y = t
            .get(x)
            .ok_or_else(|| Error::domain(format!("map undefined at support point {}", space.label(x))))?;
        fiber[y] += mu.weight(x);
    }
    let s: Vec<usize> = (0..space.len()).filter(|&y| !fiber[y].is_zero()).collect();
    if s.len() as u64 > r {
        return Err(Error::domain(format!(
            "map sends mass to {} points, more than r = {r}",
            s.len()
        )));
    }
    let two_r = rational::int(2 * r as i64);
    let f: Vec<u64> = s
        .iter()
        .map(|&y| (&fiber[y] * &two_r).floor().to_integer().to_u64().unwrap())
        .collect();
    let g_list = reduce_counts(&f, r)?;
    let mut g = vec![0u64; space.len()];
    for (&y, &v) in s.iter().zip(&g_list) {
        g[y] = v;
    }
    let rr = rational::int(r as i64);
    let mut lambda = vec![Rational::zero(); space.len()];
    let mut zeta = vec![Rational::zero(); space.len()];
    for &x in &supp {
        let y = t.get(x).unwrap();
        let share = mu.weight(x) / &fiber[y];
        let gy = rational::int(g[y] as i64);
        lambda[x] = &gy / &rr * &share;
        zeta[x] = (&fiber[y] * &two_r - &gy) / &rr * &share;
    }
    Ok((
        DiscreteMeasure::new(space.clone(), lambda)?,
        DiscreteMeasure::new(space.clone(), zeta)?,
    ))
}

#[derive(Debug, Clone)]
pub struct DyadicDecomposition {
    pub k: usize,
    /// `lambdas[j]` pairs with `maps[j]` and `supports[j]`.
    pub lambdas: Vec<DiscreteMeasure>,
    pub maps: Vec<PointMap>,
    pub supports: Vec<Vec<usize>>,
}

#[derive(Serialize)]
struct LevelJson<'a> {
    j: usize,
    weight: String,
    support_labels: Vec<&'a str>,
    lambda: Vec<String>,
    pushforward: Vec<String>,
}

impl DyadicDecomposition {
    /// Mixture weight of level `j`: `2^{-k}` for `j = 0`, else `2^{-(k-j+1)}`.
    pub fn weight(&self, j: usize) -> Rational {
        if j == 0 {
            rational::dyadic(self.k as u32)
        } else {
            rational::dyadic((self.k - j + 1) as u32)
        }
    }

    pub fn pushforwards(&self) -> Result<Vec<DiscreteMeasure>> {
        self.lambdas
            .iter()
            .zip(&self.maps)
            .map(|(l, t)| l.pushforward(t))
            .collect()
    }

    /// Recombines the levels; equals the decomposed measure exactly.
    pub fn reconstruct(&self) -> Result<DiscreteMeasure> {
        let parts: Vec<(Rational, DiscreteMeasure)> = self
            .lambdas
            .iter()
            .enumerate()
            .map(|(j, l)| (self.weight(j), l.clone()))
            .collect();
        mixture(&parts)
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        let pushed = self.pushforwards()?;
        let space = self.lambdas[0].space();
        let levels: Vec<LevelJson> = (0..=self.k)
            .map(|j| LevelJson {
                j,
                weight: rational::format(&self.weight(j)),
                support_labels: self.supports[j].iter().map(|&x| space.label(x)).collect(),
                lambda: self.lambdas[j].weights().iter().map(rational::format).collect(),
                pushforward: pushed[j].weights().iter().map(rational::format).collect(),
            })
            .collect();
        Ok(serde_json::json!({
            "k": self.k,
            "labels": space.labels(),
            "levels": levels,
        }))
    }
}

fn check_supports(space: &FiniteMetricSpace, supports: &[Vec<usize>]) -> Result<()> {
    if supports.is_empty() {
        return Err(Error::domain("need at least the level-0 support"));
    }
    if supports.len() > 63 {
        return Err(Error::domain("at most 63 levels are supported"));
    }
    for (j, s) in supports.iter().enumerate() {
        let mut set = s.clone();
        set.sort_unstable();
        set.dedup();
        if set.is_empty() {
            return Err(Error::domain(format!("support S_{j} is empty")));
        }
        if set.len() as u64 > 1u64 << j {
            return Err(Error::domain(format!(
                "support S_{j} has {} points, more than 2^{j}",
                set.len()
            )));
        }
        if set.iter().any(|&x| x >= space.len()) {
            return Err(Error::domain(format!("support S_{j} has a point out of range")));
        }
    }
    Ok(())
}

/// Peels levels `k, k-1, ..., 1` with `T_j = nearest_map(S_j)`; what is
/// left becomes level 0.
pub fn dyadic_decompose(mu: &DiscreteMeasure, supports: &[Vec<usize>]) -> Result<DyadicDecomposition> {
    let space = mu.space();
    check_supports(space, supports)?;
    let k = supports.len() - 1;
    let maps: Vec<PointMap> = supports
        .iter()
        .map(|s| nearest_map(space, s))
        .collect::<Result<_>>()?;
    let mut lambdas = vec![None; k + 1];
    let mut rest = mu.clone();
    for j in (1..=k).rev() {
        let (lambda, zeta) = split_half(&rest, &maps[j], 1 << j)?;
        lambdas[j] = Some(lambda);
        rest = zeta;
    }
    lambdas[0] = Some(rest);
    Ok(DyadicDecomposition {
        k,
        lambdas: lambdas.into_iter().map(Option::unwrap).collect(),
        maps,
        supports: supports.to_vec(),
    })
}

/// The quantizer of a dyadic decomposition together with the bounds the
/// construction certifies for `error^p`.
#[derive(Debug, Clone)]
pub struct UniformQuantizer {
    pub result: QuantizerResult,
    pub decomposition: DyadicDecomposition,
    /// `sum_j w_j integral d(x, S_j)^p dlambda_j`, from the mixture inequality.
    pub mixture_bound: f64,
    /// Twice the mixture bound with `j = 0` reweighted as the other levels.
    pub proof_bound: f64,
    /// `2 sum_j integral d(x, S_j)^p dmu`, which uses `w_j lambda_j <= mu`.
    pub mu_bound: f64,
}

impl UniformQuantizer {
    pub fn to_json(&self) -> Result<serde_json::Value> {
        let mut v = self.result.to_json();
        v["error_pow"] = self.result.error.powf(self.result.p).into();
        v["mixture_bound"] = self.mixture_bound.into();
        v["proof_bound"] = self.proof_bound.into();
        v["mu_bound"] = self.mu_bound.into();
        v["decomposition"] = self.decomposition.to_json()?;
        Ok(v)
    }
}

pub fn build_uniform_quantizer(
    mu: &DiscreteMeasure,
    supports: &[Vec<usize>],
    p: f64,
) -> Result<UniformQuantizer> {
    check_p(p)?;
    let dec = dyadic_decompose(mu, supports)?;
    let pushed = dec.pushforwards()?;
    let parts: Vec<(Rational, DiscreteMeasure)> = pushed
        .iter()
        .enumerate()
        .map(|(j, m)| (dec.weight(j), m.clone()))
        .collect();
    let quantizer = mixture(&parts)?;
    let cost = wasserstein_cost(mu, &quantizer, p)?;
    let k = dec.k;
    let mut mixture_bound = 0.0;
    let mut proof_bound = 0.0;
    let mut mu_bound = 0.0;
    for j in 0..=k {
        let level = dec.lambdas[j].distance_moment(&dec.supports[j], p);
        mixture_bound += rational::to_f64(&dec.weight(j)) * level;
        proof_bound += 2.0 * level / 2f64.powi((k - j + 1) as i32);
        mu_bound += 2.0 * mu.distance_moment(&dec.supports[j], p);
    }
    let n = 1u64 << (k + 1);
    let result = QuantizerResult::new(mu, cost, p, n, Mode::Exact, quantizer);
    Ok(UniformQuantizer {
        result,
        decomposition: dec,
        mixture_bound,
        proof_bound,
        mu_bound,
    })
}

/// True when every weight of `m` is an integer multiple of `1/n`.
pub fn is_uniform_type(m: &DiscreteMeasure, n: u64) -> bool {
    let nn = Rational::from_integer(BigInt::from(n));
    m.weights().iter().all(|w| (w * &nn).is_integer())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::{brute_force_uniform, DEFAULT_BUDGET};
    use crate::rational::ratio;
    use std::sync::Arc;

    fn arc(space: FiniteMetricSpace) -> Arc<FiniteMetricSpace> {
        Arc::new(space)
    }

    fn four_point() -> DiscreteMeasure {
        DiscreteMeasure::uniform(arc(FiniteMetricSpace::line(&[0.0, 1.0, 5.0, 6.0]).unwrap()))
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(reduce_counts(&[3, 2], 5).unwrap(), vec![3, 2]);
        assert_eq!(reduce_counts(&[3, 2], 4).unwrap(), vec![2, 2]);
        assert_eq!(reduce_counts(&[5, 0], 2).unwrap(), vec![2, 0]);
        assert_eq!(reduce_counts(&[2, 2, 2], 3).unwrap(), vec![1, 1, 1]);
        assert!(reduce_counts(&[1, 0], 2).is_err());
    }

    #[test]
    fn split_examples() {
        let mu = four_point();
        let t = PointMap::new(mu.space().clone(), vec![0, 0, 2, 2]).unwrap();
        let (l, z) = split_half(&mu, &t, 2).unwrap();
        assert_eq!(l, mu);
        assert_eq!(z, mu);
        let pushed = l.pushforward(&t).unwrap();
        assert_eq!(
            pushed.weights(),
            &[ratio(1, 2), ratio(0, 1), ratio(1, 2), ratio(0, 1)]
        );

        let s = arc(FiniteMetricSpace::line(&[0.0, 1.0]).unwrap());
        let mu = DiscreteMeasure::new(s.clone(), vec![ratio(3, 4), ratio(1, 4)]).unwrap();
        let (l, z) = split_half(&mu, &PointMap::identity(s.clone()), 2).unwrap();
        assert_eq!(l.weights(), &[ratio(1, 2), ratio(1, 2)]);
        assert_eq!(z.weights(), &[ratio(1, 1), ratio(0, 1)]);

        let single = DiscreteMeasure::dirac(s.clone(), 1).unwrap();
        let (l, z) = split_half(&single, &PointMap::constant(s.clone(), 0).unwrap(), 1).unwrap();
        assert_eq!(l, single);
        assert_eq!(z, single);

        assert!(split_half(&mu, &PointMap::identity(s), 1).is_err());
    }

    #[test]
    fn decomposition_reconstructs() {
        let mu = four_point();
        let dec = dyadic_decompose(&mu, &[vec![0], vec![0, 2]]).unwrap();
        assert_eq!(dec.reconstruct().unwrap(), mu);
        let dec0 = dyadic_decompose(&mu, &[vec![3]]).unwrap();
        assert_eq!(dec0.lambdas, vec![mu.clone()]);
        assert!(dyadic_decompose(&mu, &[vec![0, 1]]).is_err());
    }

    #[test]
    fn dyadic_weights_sum_to_one() {
        for k in 0..=10usize {
            let dec = DyadicDecomposition {
                k,
                lambdas: vec![],
                maps: vec![],
                supports: vec![],
            };
            let total = rational::sum(&(0..=k).map(|j| dec.weight(j)).collect::<Vec<_>>());
            assert_eq!(total, rational::int(1));
        }
    }

    #[test]
    fn quantizer_examples() {
        let mu = four_point();
        let q = build_uniform_quantizer(&mu, &[vec![0], vec![0, 2]], 1.0).unwrap();
        assert!(is_uniform_type(&q.result.measure, 4));
        let (b, _) = brute_force_uniform(&mu, 4, 1.0, DEFAULT_BUDGET).unwrap();
        assert!(q.result.error + 1e-12 >= b);
        assert!(q.result.error <= q.mixture_bound + 1e-12);
        assert!(q.mixture_bound <= q.proof_bound + 1e-12);
        assert!(q.proof_bound <= q.mu_bound + 1e-12);

        let single = build_uniform_quantizer(&mu, &[vec![1]], 2.0).unwrap();
        let direct = mu.distance_moment(&[1], 2.0).sqrt();
        assert!((single.result.error - direct).abs() < 1e-12);
        assert_eq!(single.result.support, vec![1]);
    }

    #[test]
    fn level_weighted_mu_bound_can_fail() {
        // mu = (3/4, 1/4), k = 1, S_1 = {a, b}, S_0 = {b}: the quantizer is
        // (1/4, 3/4) with error 1/2, above 2 sum_j 2^{-(k-j+1)} int d(x,S_j) dmu = 3/8.
        let s = arc(FiniteMetricSpace::line(&[0.0, 1.0]).unwrap());
        let mu = DiscreteMeasure::new(s, vec![ratio(3, 4), ratio(1, 4)]).unwrap();
        let q = build_uniform_quantizer(&mu, &[vec![1], vec![0, 1]], 1.0).unwrap();
        assert_eq!(q.result.measure.weights(), &[ratio(1, 4), ratio(3, 4)]);
        assert!((q.result.error - 0.5).abs() < 1e-12);
        assert!((q.proof_bound - 0.5).abs() < 1e-12);
        let level_weighted =
            2.0 * (0.25 * mu.distance_moment(&[1], 1.0) + 0.5 * mu.distance_moment(&[0, 1], 1.0));
        assert!((level_weighted - 0.375).abs() < 1e-12);
    }
}
