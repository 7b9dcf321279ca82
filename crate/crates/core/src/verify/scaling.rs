use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::instances::grid_mixture;
use crate::empirical::{self, empirical_distance, summarize};
use crate::error::{Error, Result};
use crate::measure::{nearest_map, DiscreteMeasure, EmbeddedSpace, FiniteMetricSpace, Metric};
use crate::quantize::{self, lloyd, round_to_counts, LloydOptions, Mode};
use crate::rational::{self, Rational};
use crate::rng::{stream_id, Categorical};
use crate::transport::graph::GraphMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingFamily {
    /// Uniform measure on two points at distance 1.
    TwoPoint,
    /// Uniform measure on a `g x g` grid of cell centres in the unit square (Euclidean).
    UnitSquare,
    /// Mass `alpha` uniform on a `g^3` grid in the unit cube, the rest at `(0, 0, 4)`.
    MixtureExample,
}

impl ScalingFamily {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "two_point" => Some(ScalingFamily::TwoPoint),
            "unit_square" => Some(ScalingFamily::UnitSquare),
            "mixture_example" => Some(ScalingFamily::MixtureExample),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalingFamily::TwoPoint => "two_point",
            ScalingFamily::UnitSquare => "unit_square",
            ScalingFamily::MixtureExample => "mixture_example",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingParams {
    pub n: Vec<u64>,
    pub seed: u64,
    pub trials: u64,
    /// Grid resolution per axis (ignored for `two_point`).
    pub grid: usize,
    #[serde(serialize_with = "ser_rational")]
    pub alpha: Rational,
    pub budget_outcomes: u64,
    pub budget_enum: u64,
    /// Also compute the `e_{n,1}` and `b_{n,1}` series.
    pub quantizers: bool,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rational::format(r))
}

impl ScalingParams {
    /// Defaults for each family.
    pub fn defaults(family: ScalingFamily) -> Self {
        let powers = |lo: u32, hi: u32| (lo..=hi).map(|k| 1u64 << k).collect::<Vec<_>>();
        let base = ScalingParams {
            n: Vec::new(),
            seed: 7,
            trials: 400,
            grid: 10,
            alpha: rational::ratio(1, 10),
            budget_outcomes: empirical::DEFAULT_OUTCOME_BUDGET,
            budget_enum: quantize::DEFAULT_BUDGET,
            quantizers: true,
        };
        match family {
            ScalingFamily::TwoPoint => ScalingParams {
                n: powers(1, 6),
                ..base
            },
            ScalingFamily::UnitSquare => ScalingParams {
                n: powers(2, 9),
                grid: 12,
                ..base
            },
            ScalingFamily::MixtureExample => ScalingParams {
                n: powers(6, 12),
                ..base
            },
        }
    }
}

/// One plotted point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: u64,
    pub value: f64,
    pub std_error: f64,
    pub series: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingResult {
    pub family: ScalingFamily,
    pub params: ScalingParams,
    /// Least-squares slope of `ln value` against `ln n` per series, over
    /// rows with a positive value.
    pub slopes: BTreeMap<String, f64>,
    pub rows: Vec<ScalingRow>,
}

impl ScalingResult {
    /// The plot data: columns `n, value, std_error, series`.
    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn slope(&self, series: &str) -> Option<f64> {
        self.slopes.get(series).copied()
    }
}

/// Ordinary least squares slope of `y` on `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn slopes(rows: &[ScalingRow]) -> BTreeMap<String, f64> {
    let mut by_series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.value > 0.0) {
        by_series
            .entry(r.series.clone())
            .or_default()
            .push(((r.n as f64).ln(), r.value.ln()));
    }
    by_series
        .into_iter()
        .filter_map(|(s, pts)| fit_slope(&pts).map(|m| (s, m)))
        .collect()
}

fn row(n: u64, value: f64, std_error: f64, series: &str) -> ScalingRow {
    ScalingRow {
        n,
        value,
        std_error,
        series: series.to_string(),
    }
}

/// Sweeps `n` for one family and fits the decay exponents.
pub fn scaling_study(family: ScalingFamily, params: &ScalingParams) -> Result<ScalingResult> {
    if params.n.is_empty() || params.n.contains(&0) {
        return Err(Error::domain("scaling study needs positive sample sizes"));
    }
    if params.trials == 0 || params.grid == 0 {
        return Err(Error::domain("trials and grid must be positive"));
    }
    let rows = match family {
        ScalingFamily::TwoPoint => two_point(params)?,
        ScalingFamily::UnitSquare => unit_square(params)?,
        ScalingFamily::MixtureExample => mixture_example(params)?,
    };
    Ok(ScalingResult {
        family,
        params: params.clone(),
        slopes: slopes(&rows),
        rows,
    })
}

fn two_point(params: &ScalingParams) -> Result<Vec<ScalingRow>> {
    let mu = DiscreteMeasure::uniform(Arc::new(FiniteMetricSpace::line(&[0.0, 1.0])?));
    let mut rows = Vec::new();
    for &n in &params.n {
        let e = empirical::exact_expectation(&mu, n, params.budget_outcomes, |c| {
            empirical_distance(&mu, c, 1.0)
        })?;
        rows.push(row(n, e, 0.0, "expected_w1"));
        if params.quantizers {
            let q = quantize::optimal_quantization_error(&mu, n, 1.0, Mode::Exact, params.budget_enum)?;
            rows.push(row(n, q.error, 0.0, "e_n1_exact"));
            let (b, _) = quantize::exact_uniform(&mu, n, 1.0, params.budget_enum)?;
            rows.push(row(n, b, 0.0, "b_n1_exact"));
        }
    }
    Ok(rows)
}

/// Monte Carlo `E[W_1(mu_n, mu)]` with `W_1` computed by `w1`.
fn sampled_w1(
    mu: &DiscreteMeasure,
    n: u64,
    params: &ScalingParams,
    tag: &str,
    mut w1: impl FnMut(&[Rational]) -> Result<f64>,
) -> Result<(f64, f64)> {
    let sampler = Categorical::new(mu)?;
    let stream = stream_id(&[tag, &n.to_string()]);
    let len = mu.space().len();
    let nn = n as i64;
    let mut values = Vec::with_capacity(params.trials as usize);
    for t in 0..params.trials {
        let counts = sampler.dense_counts(len, &sampler.sample_counts(n, params.seed, stream, t));
        let weights: Vec<Rational> = counts.iter().map(|&c| rational::ratio(c as i64, nn)).collect();
        values.push(w1(&weights)?);
    }
    let s = summarize(&values);
    Ok((s.mean, s.std_error))
}

/// Heuristic `e_{n,1}` sites (Lloyd, optionally seeded) and the rounded
/// uniform quantizer built from them.
fn heuristic_quantizers(
    mu: &DiscreteMeasure,
    n: u64,
    seeds: Vec<Vec<usize>>,
    mut w1: impl FnMut(&[Rational]) -> Result<f64>,
) -> Result<(f64, f64)> {
    if n as usize >= mu.support().len() {
        return Ok((0.0, w1(&round_counts_weights(mu, n))?));
    }
    let opts = LloydOptions {
        seeds,
        random_starts: 2,
        max_iterations: 50,
        ..LloydOptions::default()
    };
    let (cost, sites) = lloyd(mu, n as usize, 1.0, &opts)?;
    let pushed = mu.pushforward(&nearest_map(mu.space(), &sites)?)?;
    Ok((cost, w1(&round_counts_weights(&pushed, n))?))
}

fn round_counts_weights(nu: &DiscreteMeasure, n: u64) -> Vec<Rational> {
    round_to_counts(nu, n)
        .into_iter()
        .map(|c| rational::ratio(c as i64, n as i64))
        .collect()
}

fn unit_square(params: &ScalingParams) -> Result<Vec<ScalingRow>> {
    let g = params.grid;
    let points: Vec<Vec<f64>> = (0..g * g)
        .map(|i| {
            vec![
                ((i / g) as f64 + 0.5) / g as f64,
                ((i % g) as f64 + 0.5) / g as f64,
            ]
        })
        .collect();
    let space = Arc::new(EmbeddedSpace::new(points, Metric::L2)?.materialize()?);
    let mu = DiscreteMeasure::uniform(space.clone());
    let w1 = |w: &[Rational]| -> Result<f64> {
        let nu = DiscreteMeasure::new(space.clone(), w.to_vec())?;
        crate::transport::wasserstein_distance(&nu, &mu, 1.0)
    };
    let mut rows = Vec::new();
    for &n in &params.n {
        let (mean, se) = sampled_w1(&mu, n, params, "unit_square", w1)?;
        rows.push(row(n, mean, se, "expected_w1"));
        if params.quantizers {
            let (e, b) = heuristic_quantizers(&mu, n, Vec::new(), w1)?;
            rows.push(row(n, e, 0.0, "e_n1_heuristic"));
            rows.push(row(n, b, 0.0, "b_n1_rounding_upper"));
        }
    }
    Ok(rows)
}

/// A cubic lattice of `m^3` points snapped to the grid, plus the far atom.
fn lattice_seed(g: usize, n: u64) -> Vec<usize> {
    let mut m = 1usize;
    while ((m + 1).pow(3) as u64) < n {
        m += 1;
    }
    let snap = |i: usize| (((i as f64 + 0.5) / m as f64 * g as f64) as usize).min(g - 1);
    let mut set = Vec::new();
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                set.push((snap(a) * g + snap(b)) * g + snap(c));
            }
        }
    }
    set.push(g * g * g);
    set.sort_unstable();
    set.dedup();
    set
}

fn mixture_example(params: &ScalingParams) -> Result<Vec<ScalingRow>> {
    let (mu, graph): (DiscreteMeasure, GraphMetric) = grid_mixture(params.grid, params.alpha.clone())?;
    let target = mu.weights().to_vec();
    let mut w1 = |w: &[Rational]| graph.w1(w, &target);
    let mut rows = Vec::new();
    for &n in &params.n {
        let (mean, se) = sampled_w1(&mu, n, params, "mixture_example", &mut w1)?;
        rows.push(row(n, mean, se, "expected_w1"));
        if params.quantizers {
            let (e, b) = heuristic_quantizers(&mu, n, vec![lattice_seed(params.grid, n)], &mut w1)?;
            rows.push(row(n, e, 0.0, "e_n1_heuristic"));
            rows.push(row(n, b, 0.0, "b_n1_rounding_upper"));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..6)
            .map(|k| ((k as f64).ln(), -0.5 * (k as f64).ln() + 3.0))
            .collect();
        assert!((fit_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_point_small() {
        let mut p = ScalingParams::defaults(ScalingFamily::TwoPoint);
        p.n = vec![2, 4];
        let r = scaling_study(ScalingFamily::TwoPoint, &p).unwrap();
        // E|Bin(2,1/2)/2 - 1/2| = 1/4 and E|Bin(4,1/2)/4 - 1/2| = 3/16.
        let e: Vec<f64> = r
            .rows
            .iter()
            .filter(|r| r.series == "expected_w1")
            .map(|r| r.value)
            .collect();
        assert!((e[0] - 0.25).abs() < 1e-15 && (e[1] - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn lattice_seed_fits_budget() {
        for n in [64u64, 128, 512] {
            assert!(lattice_seed(10, n).len() as u64 <= n);
        }
    }
}
