use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Instance, VerifyConfig};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, EmbeddedSpace, FiniteMetricSpace, Metric};
use crate::rational::{self, Rational};
use crate::rng::{stream_id, uniform_below};
use crate::transport::graph::GraphMetric;

/// An entry of the suite's `instances` list: a built-in name (`"default"`
/// expands to the whole default suite), an inline measure document, or a
/// measure file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    Named(String),
    Inline { id: String, measure: Value },
    File { id: String, path: String },
}

pub const DEFAULT_NAMES: &[&str] = &[
    "two_point",
    "skewed_two_point",
    "equidistant_4",
    "equidistant_8",
    "random6_0",
    "random6_1",
    "random6_2",
    "line_8",
    "line_5_triangular",
    "mixture_g2",
];

/// The built-in suite.
pub fn default_instances(instance_seed: u64) -> Result<Vec<Instance>> {
    DEFAULT_NAMES
        .iter()
        .map(|name| named(name, instance_seed))
        .collect()
}

fn arc(space: FiniteMetricSpace) -> Arc<FiniteMetricSpace> {
    Arc::new(space)
}

fn named(name: &str, seed: u64) -> Result<Instance> {
    let mu = match name {
        "two_point" => DiscreteMeasure::uniform(arc(FiniteMetricSpace::line(&[0.0, 1.0])?)),
        "skewed_two_point" => DiscreteMeasure::new(
            arc(FiniteMetricSpace::line(&[0.0, 1.0])?),
            vec![rational::ratio(3, 4), rational::ratio(1, 4)],
        )?,
        "equidistant_4" => DiscreteMeasure::uniform(arc(FiniteMetricSpace::equidistant(4, 1.0)?)),
        "equidistant_8" => DiscreteMeasure::uniform(arc(FiniteMetricSpace::equidistant(8, 1.0)?)),
        "line_8" => {
            let xs: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
            DiscreteMeasure::uniform(arc(FiniteMetricSpace::line(&xs)?))
        }
        "line_5_triangular" => DiscreteMeasure::new(
            arc(FiniteMetricSpace::line(&[0.0, 0.25, 0.5, 0.75, 1.0])?),
            [1, 2, 3, 2, 1].iter().map(|&c| rational::ratio(c, 9)).collect(),
        )?,
        "mixture_g2" => grid_mixture(2, rational::ratio(1, 10))?.0,
        other => match other.strip_prefix("random6_").and_then(|i| i.parse::<u64>().ok()) {
            Some(i) => random_measure(6, 12, seed, i)?,
            None => return Err(Error::domain(format!("unknown instance {other:?}"))),
        },
    };
    Ok(Instance::new(name, mu))
}

/// `atoms` points in the unit square (Euclidean, coordinates on a 1/1000
/// lattice) with weights `c_i / den`, `c_i >= 1`, drawn from `seed` and `index`.
pub fn random_measure(atoms: usize, den: u64, seed: u64, index: u64) -> Result<DiscreteMeasure> {
    if den < atoms as u64 {
        return Err(Error::domain("denominator must be at least the number of atoms"));
    }
    for attempt in 0.. {
        let stream = stream_id(&[
            "random_measure",
            &atoms.to_string(),
            &index.to_string(),
            &attempt.to_string(),
        ]);
        let points: Vec<Vec<f64>> = (0..atoms as u64)
            .map(|i| {
                (0..2)
                    .map(|c| uniform_below(seed, stream, 2 * i + c, 1000) as f64 / 1000.0)
                    .collect()
            })
            .collect();
        let space = match EmbeddedSpace::new(points, Metric::L2)?.materialize() {
            Ok(s) => s,
            Err(_) => continue,
        };
        let mut counts = vec![1u64; atoms];
        for u in 0..den - atoms as u64 {
            counts[uniform_below(seed, stream, 1_000_000 + u, atoms as u64) as usize] += 1;
        }
        let weights = counts
            .iter()
            .map(|&c| rational::ratio(c as i64, den as i64))
            .collect();
        return DiscreteMeasure::new(arc(space), weights);
    }
    unreachable!()
}

/// The cube `[0,1]^3` as a `g x g x g` grid of cell centres under the
/// sup norm, with total mass `alpha` spread evenly, plus an atom of mass
/// `1 - alpha` at `(0, 0, 4)` (the last point). Also returns the
/// 26-neighbour graph whose shortest paths reproduce the sup-norm metric,
/// which makes `W_1` a sparse transshipment problem.
pub fn grid_mixture(g: usize, alpha: Rational) -> Result<(DiscreteMeasure, GraphMetric)> {
    if g == 0 {
        return Err(Error::domain("grid size must be positive"));
    }
    if !(rational::is_nonnegative(&alpha) && alpha <= Rational::from_integer(1.into())) {
        return Err(Error::domain("alpha must lie in [0, 1]"));
    }
    let h = 1.0 / g as f64;
    let idx = |i: usize, j: usize, k: usize| (i * g + j) * g + k;
    let mut points = Vec::with_capacity(g * g * g + 1);
    for i in 0..g {
        for j in 0..g {
            for k in 0..g {
                points.push(vec![
                    (i as f64 + 0.5) * h,
                    (j as f64 + 0.5) * h,
                    (k as f64 + 0.5) * h,
                ]);
            }
        }
    }
    points.push(vec![0.0, 0.0, 4.0]);
    let far = g * g * g;
    let space = EmbeddedSpace::new(points.clone(), Metric::LInf)?.materialize()?;
    let cells = Rational::from_integer(((g * g * g) as i64).into());
    let mut weights = vec![&alpha / &cells; g * g * g];
    weights.push(Rational::from_integer(1.into()) - &alpha);
    let mu = DiscreteMeasure::new(arc(space), weights)?;

    let mut edges = Vec::new();
    for i in 0..g {
        for j in 0..g {
            for k in 0..g {
                let a = idx(i, j, k);
                for (di, dj, dk) in neighbour_offsets() {
                    let (ni, nj, nk) = (i as isize + di, j as isize + dj, k as isize + dk);
                    if ni < 0 || nj < 0 || nk < 0 || ni >= g as isize || nj >= g as isize || nk >= g as isize
                    {
                        continue;
                    }
                    edges.push((a, idx(ni as usize, nj as usize, nk as usize), h));
                }
                if k == g - 1 {
                    edges.push((a, far, Metric::LInf.eval(&points[a], &points[far])));
                }
            }
        }
    }
    Ok((mu, GraphMetric::new(g * g * g + 1, edges)?))
}

/// Offsets to the 13 "forward" king-move neighbours, so each undirected
/// edge is listed once.
fn neighbour_offsets() -> impl Iterator<Item = (isize, isize, isize)> {
    (-1..=1isize)
        .flat_map(|a| (-1..=1isize).flat_map(move |b| (-1..=1isize).map(move |c| (a, b, c))))
        .filter(|&o| o > (0, 0, 0))
}

/// Expands the configured instance list.
pub(super) fn resolve(cfg: &VerifyConfig) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for spec in &cfg.instances {
        match spec {
            InstanceSpec::Named(name) if name == "default" => {
                out.extend(default_instances(cfg.instance_seed)?)
            }
            InstanceSpec::Named(name) => out.push(named(name, cfg.instance_seed)?),
            InstanceSpec::Inline { id, measure } => out.push(Instance::new(
                id.clone(),
                crate::io::measure_from_json(measure, None)?,
            )),
            InstanceSpec::File { id, path } => {
                out.push(Instance::new(id.clone(), crate::io::load_measure(path)?))
            }
        }
    }
    let mut ids: Vec<&str> = out.iter().map(|i| i.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::domain(format!("duplicate instance id {:?}", w[0])));
    }
    Ok(out)
}
