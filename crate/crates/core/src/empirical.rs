//! Empirical measures `mu_n = (1/n) sum delta_{X_i}`: seeded sampling,
//! Monte Carlo estimates of their expected distance to `mu`, and an exact
//! oracle that enumerates every multinomial outcome.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::One;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::quantize::binomial;
use crate::rational::{self, Rational};
use crate::rng::Categorical;
use crate::transport::{check_p, wasserstein_cost};

/// Default cap on the number of multinomial outcomes the oracle visits.
pub const DEFAULT_OUTCOME_BUDGET: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Estimator {
    /// `E[W_1(mu_n, mu)]`; always uses `p = 1`.
    #[serde(rename = "mean_of_W1")]
    MeanOfW1,
    /// `(E[W_p(mu_n, mu)^p])^{1/p}`.
    #[serde(rename = "root_mean_of_Wp_pow")]
    RootMeanOfWpPow,
}

impl Estimator {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean_of_W1" | "mean_of_w1" | "w1" => Some(Estimator::MeanOfW1),
            "root_mean_of_Wp_pow" | "root_mean_of_wp_pow" | "wp" => Some(Estimator::RootMeanOfWpPow),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Estimator::MeanOfW1 => "mean_of_W1",
            Estimator::RootMeanOfWpPow => "root_mean_of_Wp_pow",
        }
    }

    /// The exponent the per-outcome cost is raised to before averaging.
    pub fn power(self, p: f64) -> f64 {
        match self {
            Estimator::MeanOfW1 => 1.0,
            Estimator::RootMeanOfWpPow => p,
        }
    }

    /// Maps a per-outcome `W` value to the quantity that is averaged.
    fn moment(self, w: f64, p: f64) -> f64 {
        match self {
            Estimator::MeanOfW1 => w,
            Estimator::RootMeanOfWpPow => w.powf(p),
        }
    }

    fn finish(self, mean: f64, p: f64) -> f64 {
        match self {
            Estimator::MeanOfW1 => mean,
            Estimator::RootMeanOfWpPow => mean.max(0.0).powf(1.0 / p),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EmpiricalConfig {
    pub n: u64,
    pub trials: u64,
    pub seed: u64,
    pub p: f64,
    pub estimator: Estimator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub std_error: f64,
    pub trials: u64,
    pub n: u64,
    pub p: f64,
    pub estimator_kind: Estimator,
    pub seed: u64,
    pub exact: bool,
}

impl EstimateReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("estimate report serializes")
    }
}

/// Draws `mu_n` for trial 0 of stream 0.
pub fn sample_empirical(mu: &DiscreteMeasure, n: u64, seed: u64) -> Result<DiscreteMeasure> {
    let sampler = Categorical::new(mu)?;
    sample_with(&sampler, mu, n, seed, 0, 0)
}

/// Draws `mu_n` for an explicit `(stream, trial)`.
pub fn sample_with(
    sampler: &Categorical,
    mu: &DiscreteMeasure,
    n: u64,
    seed: u64,
    stream: u64,
    trial: u64,
) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let local = sampler.sample_counts(n, seed, stream, trial);
    DiscreteMeasure::from_counts(
        mu.space().clone(),
        &sampler.dense_counts(mu.space().len(), &local),
    )
}

/// One multinomial outcome: dense counts and their probability.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub counts: Vec<u64>,
    pub probability: Rational,
}

/// Every outcome of `n` draws from `mu`, with exact probabilities
/// `n! / prod k_i! * prod mu_i^{k_i}`.
pub fn outcomes(mu: &DiscreteMeasure, n: u64, budget: u64) -> Result<Vec<Outcome>> {
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let supp = mu.support();
    let s = supp.len() as u64;
    let count = binomial(n + s - 1, s - 1);
    if count > budget as u128 {
        return Err(Error::budget(
            "exact multinomial outcome enumeration",
            count,
            budget,
        ));
    }
    let weights: Vec<Rational> = supp.iter().map(|&x| mu.weight(x).clone()).collect();
    let mut fact = vec![BigInt::one()];
    for i in 1..=n {
        let next = &fact[(i - 1) as usize] * BigInt::from(i);
        fact.push(next);
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut local = vec![0u64; supp.len()];
    fn rec(i: usize, rest: u64, local: &mut Vec<u64>, visit: &mut dyn FnMut(&[u64])) {
        if i + 1 == local.len() {
            local[i] = rest;
            visit(local);
            return;
        }
        for v in (0..=rest).rev() {
            local[i] = v;
            rec(i + 1, rest - v, local, visit);
        }
        local[i] = 0;
    }
    let space_len = mu.space().len();
    rec(0, n, &mut local, &mut |k| {
        let mut prob = Rational::from_integer(fact[n as usize].clone());
        let mut dense = vec![0u64; space_len];
        for (i, &ki) in k.iter().enumerate() {
            prob /= Rational::from_integer(fact[ki as usize].clone());
            prob *= num_traits::pow(weights[i].clone(), ki as usize);
            dense[supp[i]] = ki;
        }
        out.push(Outcome {
            counts: dense,
            probability: prob,
        });
    });
    Ok(out)
}

/// `E[f(counts)]` over the exact multinomial law of `n` draws.
pub fn exact_expectation(
    mu: &DiscreteMeasure,
    n: u64,
    budget: u64,
    mut f: impl FnMut(&[u64]) -> Result<f64>,
) -> Result<f64> {
    let mut acc = 0.0;
    for o in outcomes(mu, n, budget)? {
        acc += rational::to_f64(&o.probability) * f(&o.counts)?;
    }
    Ok(acc)
}

/// `W_p(mu_n, mu)` for the empirical measure with the given counts.
pub fn empirical_distance(mu: &DiscreteMeasure, counts: &[u64], p: f64) -> Result<f64> {
    let nu = DiscreteMeasure::from_counts(mu.space().clone(), counts)?;
    Ok(wasserstein_cost(&nu, mu, p)?.max(0.0).powf(1.0 / p))
}

/// The exact value of the chosen estimator's target.
pub fn exact_expected_error(
    mu: &DiscreteMeasure,
    n: u64,
    p: f64,
    estimator: Estimator,
    budget: u64,
) -> Result<EstimateReport> {
    check_p(p)?;
    let q = estimator.power(p);
    let mean = exact_expectation(mu, n, budget, |c| {
        Ok(estimator.moment(empirical_distance(mu, c, q)?, q))
    })?;
    Ok(EstimateReport {
        estimate: estimator.finish(mean, q),
        std_error: 0.0,
        trials: 0,
        n,
        p: q,
        estimator_kind: estimator,
        seed: 0,
        exact: true,
    })
}

/// Mean and standard error of `f` over `trials` seeded replicates.
#[derive(Debug, Clone, Copy)]
pub struct Sampled {
    pub mean: f64,
    pub std_error: f64,
}

/// Averages `f(counts)` over independent empirical draws.
pub fn monte_carlo(
    mu: &DiscreteMeasure,
    n: u64,
    trials: u64,
    seed: u64,
    stream: u64,
    f: impl FnMut(&[u64]) -> Result<f64>,
) -> Result<Sampled> {
    Ok(summarize(&sample_values(mu, n, trials, seed, stream, f)?))
}

/// `f(counts)` for each of `trials` independent empirical draws. Trial `t`
/// uses counter-based stream `stream` and trial index `t`, so values do
/// not depend on evaluation order. Values are memoized by outcome.
pub fn sample_values(
    mu: &DiscreteMeasure,
    n: u64,
    trials: u64,
    seed: u64,
    stream: u64,
    mut f: impl FnMut(&[u64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::domain("trials must be positive"));
    }
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let sampler = Categorical::new(mu)?;
    let len = mu.space().len();
    let mut memo: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut values = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        let local = sampler.sample_counts(n, seed, stream, t);
        let v = match memo.get(&local) {
            Some(&v) => v,
            None => {
                let v = f(&sampler.dense_counts(len, &local))?;
                if memo.len() < 200_000 {
                    memo.insert(local, v);
                }
                v
            }
        };
        values.push(v);
    }
    Ok(values)
}

/// Sample mean and its standard error (Bessel-corrected).
pub fn summarize(values: &[f64]) -> Sampled {
    let t = values.len() as f64;
    let mean = values.iter().sum::<f64>() / t;
    if values.len() < 2 {
        return Sampled { mean, std_error: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
    Sampled {
        mean,
        std_error: (var / t).sqrt(),
    }
}

/// Converts a Monte Carlo mean of `W^q` into the estimator's scale, using
/// the delta method for the root.
pub fn finish_estimate(estimator: Estimator, q: f64, s: Sampled) -> (f64, f64) {
    match estimator {
        Estimator::MeanOfW1 => (s.mean, s.std_error),
        Estimator::RootMeanOfWpPow => {
            let m = s.mean.max(0.0);
            if m == 0.0 {
                (0.0, 0.0)
            } else {
                (m.powf(1.0 / q), m.powf(1.0 / q - 1.0) * s.std_error / q)
            }
        }
    }
}

/// Monte Carlo estimate of the configured target.
pub fn estimate_expected_error(mu: &DiscreteMeasure, cfg: &EmpiricalConfig) -> Result<EstimateReport> {
    check_p(cfg.p)?;
    let q = cfg.estimator.power(cfg.p);
    let s = monte_carlo(mu, cfg.n, cfg.trials, cfg.seed, 0, |c| {
        Ok(cfg.estimator.moment(empirical_distance(mu, c, q)?, q))
    })?;
    let (estimate, std_error) = finish_estimate(cfg.estimator, q, s);
    Ok(EstimateReport {
        estimate,
        std_error,
        trials: cfg.trials,
        n: cfg.n,
        p: q,
        estimator_kind: cfg.estimator,
        seed: cfg.seed,
        exact: false,
    })
}

/// The exact oracle when its outcome count fits `budget`, Monte Carlo otherwise.
pub fn expected_error(mu: &DiscreteMeasure, cfg: &EmpiricalConfig, budget: u64) -> Result<EstimateReport> {
    match exact_expected_error(mu, cfg.n, cfg.p, cfg.estimator, budget) {
        Err(e) if e.is_budget() => estimate_expected_error(mu, cfg),
        other => other,
    }
}

/// Number of multinomial outcomes of `n` draws from `mu`.
pub fn outcome_count(mu: &DiscreteMeasure, n: u64) -> u128 {
    let s = mu.support().len() as u64;
    binomial(n + s - 1, s - 1)
}

/// Exact probability of the given dense counts under `n` draws from `mu`.
pub fn outcome_probability(mu: &DiscreteMeasure, counts: &[u64]) -> Rational {
    let n: u64 = counts.iter().sum();
    let mut prob = Rational::one();
    let mut remaining = n;
    for (x, &k) in counts.iter().enumerate() {
        prob *= Rational::from_integer(BigInt::from(binomial(remaining, k)));
        prob *= num_traits::pow(mu.weight(x).clone(), k as usize);
        remaining -= k;
    }
    prob
}
