//! Finite metric spaces and exact-weight measures on them.

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Relative slack allowed when validating the triangle inequality, so that
/// norms evaluated in floating point are not rejected over one ulp.
const TRIANGLE_RTOL: f64 = 1e-12;

/// A finite set of labelled points with a full distance matrix.
#[derive(Clone, PartialEq)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    dist: Vec<f64>,
}

impl fmt::Debug for FiniteMetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteMetricSpace")
            .field("points", &self.labels.len())
            .finish()
    }
}

impl FiniteMetricSpace {
    /// Builds and validates a metric space, including the O(|E|^3)
    /// triangle-inequality check.
    pub fn new(labels: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(labels, dist, true)
    }

    /// Like [`FiniteMetricSpace::new`] but skips the triangle-inequality pass.
    /// Symmetry, zero diagonal and positivity are still checked.
    pub fn new_unchecked_triangle(labels: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(labels, dist, false)
    }

    fn build(labels: Vec<String>, dist: Vec<Vec<f64>>, check_triangle: bool) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::domain("metric space must have at least one point"));
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::domain(format!(
                "distance matrix must be {n}x{n} to match the labels"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::domain(format!("duplicate label {l:?}")));
            }
        }
        let flat: Vec<f64> = dist.into_iter().flatten().collect();
        let space = FiniteMetricSpace { labels, dist: flat };
        for i in 0..n {
            if space.d(i, i) != 0.0 {
                return Err(Error::domain(format!("dist[{i}][{i}] must be 0")));
            }
            for j in 0..n {
                let d = space.d(i, j);
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::domain(format!(
                        "dist[{i}][{j}] = {d} is not a finite nonnegative number"
                    )));
                }
                if d != space.d(j, i) {
                    return Err(Error::domain(format!("dist[{i}][{j}] != dist[{j}][{i}]")));
                }
                if i != j && d == 0.0 {
                    return Err(Error::domain(format!(
                        "distinct points {i} and {j} are at distance 0"
                    )));
                }
            }
        }
        if check_triangle {
            space.check_triangle()?;
        }
        Ok(space)
    }

    fn check_triangle(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                let dij = self.d(i, j);
                for k in 0..n {
                    let via = dij + self.d(j, k);
                    if self.d(i, k) > via + TRIANGLE_RTOL * via {
                        return Err(Error::domain(format!(
                            "triangle inequality fails: d({i},{k}) > d({i},{j}) + d({j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Points on the real line with `|x - y|` distances, labelled by position.
    pub fn line(coords: &[f64]) -> Result<Self> {
        EmbeddedSpace::new(coords.iter().map(|&x| vec![x]).collect(), Metric::L2)?.materialize()
    }

    /// `k` points at mutual distance `scale`, labelled `e0..e{k-1}`.
    pub fn equidistant(k: usize, scale: f64) -> Result<Self> {
        let labels = (0..k).map(|i| format!("e{i}")).collect();
        let dist = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 0.0 } else { scale }).collect())
            .collect();
        Self::new(labels, dist)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.labels.len() + j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.dist[i * n..(i + 1) * n]
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Sorted distinct values of the distance matrix, starting with 0.
    pub fn distinct_distances(&self) -> Vec<f64> {
        let mut v = self.dist.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v
    }

    /// `d(x, S)` for a nonempty subset `S`.
    pub fn dist_to_set(&self, x: usize, set: &[usize]) -> f64 {
        set.iter().map(|&s| self.d(x, s)).fold(f64::INFINITY, f64::min)
    }
}

/// Norm used to materialize an [`EmbeddedSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    L2,
    LInf,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::L2 => "l2",
            Metric::LInf => "linf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "l2" => Some(Metric::L2),
            "linf" => Some(Metric::LInf),
            _ => None,
        }
    }

    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::LInf => a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        }
    }
}

/// Points in R^d under the Euclidean or sup norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSpace {
    points: Vec<Vec<f64>>,
    metric: Metric,
}

impl EmbeddedSpace {
    pub fn new(points: Vec<Vec<f64>>, metric: Metric) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.is_empty() || dim == 0 {
            return Err(Error::domain("embedded space needs points of dimension >= 1"));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::domain("all embedded points must share one dimension"));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::domain("embedded coordinates must be finite"));
        }
        Ok(EmbeddedSpace { points, metric })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    fn default_labels(&self) -> Vec<String> {
        self.points
            .iter()
            .map(|p| {
                let coords: Vec<String> = p.iter().map(|c| format!("{c}")).collect();
                format!("({})", coords.join(","))
            })
            .collect()
    }

    /// Evaluates the norm on every pair. Norms satisfy the triangle
    /// inequality, so the cubic check is skipped.
    pub fn materialize(&self) -> Result<FiniteMetricSpace> {
        let dist = self
            .points
            .iter()
            .map(|a| self.points.iter().map(|b| self.metric.eval(a, b)).collect())
            .collect();
        FiniteMetricSpace::new_unchecked_triangle(self.default_labels(), dist)
    }
}

fn same_space(a: &Arc<FiniteMetricSpace>, b: &Arc<FiniteMetricSpace>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// A probability measure with exact rational weights, stored densely over
/// every point of its space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    space: Arc<FiniteMetricSpace>,
    weights: Vec<Rational>,
}

/// A measure of total mass at most one. Used for meets, residuals and
/// the pieces of dyadic decompositions.
#[derive(Debug, Clone, PartialEq)]
pub struct SubMeasure {
    space: Arc<FiniteMetricSpace>,
    weights: Vec<Rational>,
}

fn check_weights(space: &FiniteMetricSpace, weights: &[Rational]) -> Result<Rational> {
    if weights.len() != space.len() {
        return Err(Error::domain(format!(
            "expected {} weights, got {}",
            space.len(),
            weights.len()
        )));
    }
    if let Some(i) = weights.iter().position(|w| !rational::is_nonnegative(w)) {
        return Err(Error::domain(format!("weight {i} is negative")));
    }
    Ok(rational::sum(weights))
}

impl DiscreteMeasure {
    pub fn new(space: Arc<FiniteMetricSpace>, weights: Vec<Rational>) -> Result<Self> {
        let total = check_weights(&space, &weights)?;
        if !total.is_one() {
            return Err(Error::domain(format!(
                "weights must sum to 1 (got {})",
                rational::format(&total)
            )));
        }
        Ok(DiscreteMeasure { space, weights })
    }

    /// The point mass at `x`.
    pub fn dirac(space: Arc<FiniteMetricSpace>, x: usize) -> Result<Self> {
        if x >= space.len() {
            return Err(Error::domain(format!("point {x} out of range")));
        }
        let mut weights = vec![Rational::zero(); space.len()];
        weights[x] = Rational::one();
        Ok(DiscreteMeasure { space, weights })
    }

    /// Uniform over the listed points, counting repeats: `(1/r) sum delta_{x_i}`.
    pub fn uniform_on(space: Arc<FiniteMetricSpace>, points: &[usize]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("uniform measure needs at least one point"));
        }
        let counts = counts_of(space.len(), points)?;
        Self::from_counts(space, &counts)
    }

    /// Uniform over the whole space.
    pub fn uniform(space: Arc<FiniteMetricSpace>) -> Self {
        let n = space.len() as i64;
        let weights = vec![rational::ratio(1, n); space.len()];
        DiscreteMeasure { space, weights }
    }

    /// Weights `counts[i] / sum(counts)`.
    pub fn from_counts(space: Arc<FiniteMetricSpace>, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 || counts.len() != space.len() {
            return Err(Error::domain("counts must be nonzero and match the space"));
        }
        let weights = counts
            .iter()
            .map(|&c| rational::ratio(c as i64, total as i64))
            .collect();
        Ok(DiscreteMeasure { space, weights })
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn weight(&self, x: usize) -> &Rational {
        &self.weights[x]
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(rational::to_f64).collect()
    }

    /// Indices of the atoms with positive mass.
    pub fn support(&self) -> Vec<usize> {
        support_of(&self.weights)
    }

    pub fn as_sub(&self) -> SubMeasure {
        SubMeasure {
            space: self.space.clone(),
            weights: self.weights.clone(),
        }
    }

    pub fn pushforward(&self, map: &PointMap) -> Result<Self> {
        let weights = push_weights(&self.space, &self.weights, map)?;
        Ok(DiscreteMeasure {
            space: map.target.clone(),
            weights,
        })
    }

    /// `sum_x d(x, T(x))^p * weight(x)`.
    pub fn displacement_cost(&self, map: &PointMap, p: f64) -> Result<f64> {
        displacement(&self.space, &self.weights, map, p)
    }

    /// `integral d(x, S)^p dmu(x)` for a nonempty subset `S`.
    pub fn distance_moment(&self, set: &[usize], p: f64) -> f64 {
        self.support()
            .into_iter()
            .map(|x| rational::to_f64(&self.weights[x]) * self.space.dist_to_set(x, set).powf(p))
            .sum()
    }

    pub fn same_space(&self, other: &DiscreteMeasure) -> bool {
        same_space(&self.space, &other.space)
    }
}

impl SubMeasure {
    pub fn new(space: Arc<FiniteMetricSpace>, weights: Vec<Rational>) -> Result<Self> {
        let total = check_weights(&space, &weights)?;
        if total > Rational::one() {
            return Err(Error::domain(format!(
                "sub-probability mass {} exceeds 1",
                rational::format(&total)
            )));
        }
        Ok(SubMeasure { space, weights })
    }

    pub fn zero(space: Arc<FiniteMetricSpace>) -> Self {
        let weights = vec![Rational::zero(); space.len()];
        SubMeasure { space, weights }
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn mass(&self) -> Rational {
        rational::sum(&self.weights)
    }

    pub fn support(&self) -> Vec<usize> {
        support_of(&self.weights)
    }

    /// `self <= other` atomwise (equivalently on every set).
    pub fn le(&self, other: &SubMeasure) -> bool {
        same_space(&self.space, &other.space) && self.weights.iter().zip(&other.weights).all(|(a, b)| a <= b)
    }

    /// `self - other`, requiring `other <= self`.
    pub fn minus(&self, other: &SubMeasure) -> Result<SubMeasure> {
        if !other.le(self) {
            return Err(Error::domain("subtrahend is not below the measure"));
        }
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| a - b)
            .collect();
        Ok(SubMeasure {
            space: self.space.clone(),
            weights,
        })
    }

    pub fn scaled(&self, factor: &Rational) -> Result<SubMeasure> {
        let weights = self.weights.iter().map(|w| w * factor).collect();
        SubMeasure::new(self.space.clone(), weights)
    }

    /// Divides by the total mass, which must be positive.
    pub fn normalized(&self) -> Result<DiscreteMeasure> {
        let mass = self.mass();
        if mass.is_zero() {
            return Err(Error::domain("cannot normalize a zero measure"));
        }
        let weights = self.weights.iter().map(|w| w / &mass).collect();
        Ok(DiscreteMeasure {
            space: self.space.clone(),
            weights,
        })
    }

    pub fn pushforward(&self, map: &PointMap) -> Result<Self> {
        let weights = push_weights(&self.space, &self.weights, map)?;
        Ok(SubMeasure {
            space: map.target.clone(),
            weights,
        })
    }

    pub fn displacement_cost(&self, map: &PointMap, p: f64) -> Result<f64> {
        displacement(&self.space, &self.weights, map, p)
    }
}

fn support_of(weights: &[Rational]) -> Vec<usize> {
    weights
        .iter()
        .enumerate()
        .filter(|(_, w)| !w.is_zero())
        .map(|(i, _)| i)
        .collect()
}

fn counts_of(n: usize, points: &[usize]) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; n];
    for &x in points {
        if x >= n {
            return Err(Error::domain(format!("point {x} out of range")));
        }
        counts[x] += 1;
    }
    Ok(counts)
}

fn push_weights(
    space: &Arc<FiniteMetricSpace>,
    weights: &[Rational],
    map: &PointMap,
) -> Result<Vec<Rational>> {
    if !same_space(space, &map.source) {
        return Err(Error::domain("map source differs from the measure's space"));
    }
    let mut out = vec![Rational::zero(); map.target.len()];
    for (x, w) in weights.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        let y = map.assignment[x]
            .ok_or_else(|| Error::domain(format!("map is undefined on support point {x}")))?;
        out[y] += w;
    }
    Ok(out)
}

fn displacement(space: &Arc<FiniteMetricSpace>, weights: &[Rational], map: &PointMap, p: f64) -> Result<f64> {
    if !same_space(space, &map.source) || !same_space(&map.source, &map.target) {
        return Err(Error::domain(
            "displacement needs a self-map of the measure's space",
        ));
    }
    let mut total = 0.0;
    for (x, w) in weights.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        let y = map.assignment[x]
            .ok_or_else(|| Error::domain(format!("map is undefined on support point {x}")))?;
        total += rational::to_f64(w) * space.d(x, y).powf(p);
    }
    Ok(total)
}

/// A map between point indices. Entries may be undefined; pushing a
/// measure forward fails if its support meets an undefined entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    source: Arc<FiniteMetricSpace>,
    target: Arc<FiniteMetricSpace>,
    assignment: Vec<Option<usize>>,
}

impl PointMap {
    /// A total self-map of `space`.
    pub fn new(space: Arc<FiniteMetricSpace>, assignment: Vec<usize>) -> Result<Self> {
        Self::partial(space, assignment.into_iter().map(Some).collect())
    }

    pub fn partial(space: Arc<FiniteMetricSpace>, assignment: Vec<Option<usize>>) -> Result<Self> {
        if assignment.len() != space.len() {
            return Err(Error::domain("map must list one entry per source point"));
        }
        if let Some(bad) = assignment.iter().flatten().find(|&&y| y >= space.len()) {
            return Err(Error::domain(format!("map target {bad} out of range")));
        }
        Ok(PointMap {
            source: space.clone(),
            target: space,
            assignment,
        })
    }

    pub fn identity(space: Arc<FiniteMetricSpace>) -> Self {
        let assignment = (0..space.len()).map(Some).collect();
        PointMap {
            source: space.clone(),
            target: space,
            assignment,
        }
    }

    pub fn constant(space: Arc<FiniteMetricSpace>, y: usize) -> Result<Self> {
        Self::new(space.clone(), vec![y; space.len()])
    }

    pub fn get(&self, x: usize) -> Option<usize> {
        self.assignment[x]
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.source
    }

    /// Distinct defined targets, ascending.
    pub fn range(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.assignment.iter().flatten().copied().collect();
        r.sort_unstable();
        r.dedup();
        r
    }
}

/// The common part `mu ∧ nu` and the normalized leftovers.
#[derive(Debug, Clone)]
pub struct Meet {
    pub meet: SubMeasure,
    pub mass: Rational,
    /// `((mu - meet)/(1 - mass), (nu - meet)/(1 - mass))`, absent when `mass == 1`.
    pub residuals: Option<(DiscreteMeasure, DiscreteMeasure)>,
}

pub fn meet_and_residuals(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Meet> {
    if !mu.same_space(nu) {
        return Err(Error::domain("measures live on different spaces"));
    }
    let weights: Vec<Rational> = mu
        .weights
        .iter()
        .zip(&nu.weights)
        .map(|(a, b)| a.min(b).clone())
        .collect();
    let meet = SubMeasure {
        space: mu.space.clone(),
        weights,
    };
    let mass = meet.mass();
    let residuals = if mass.is_one() {
        None
    } else {
        let rest = Rational::one() - &mass;
        let res = |m: &DiscreteMeasure| DiscreteMeasure {
            space: m.space.clone(),
            weights: m
                .weights
                .iter()
                .zip(&meet.weights)
                .map(|(a, c)| (a - c) / &rest)
                .collect(),
        };
        Some((res(mu), res(nu)))
    };
    Ok(Meet {
        meet,
        mass,
        residuals,
    })
}

/// `sum_j t_j mu_j` for weights summing to exactly one.
pub fn mixture(components: &[(Rational, DiscreteMeasure)]) -> Result<DiscreteMeasure> {
    let (_, first) = components
        .first()
        .ok_or_else(|| Error::domain("mixture needs at least one component"))?;
    let total = rational::sum(components.iter().map(|(t, _)| t));
    if !total.is_one() {
        return Err(Error::domain(format!(
            "mixture weights must sum to 1 (got {})",
            rational::format(&total)
        )));
    }
    let mut weights = vec![Rational::zero(); first.space.len()];
    for (t, m) in components {
        if !rational::is_nonnegative(t) {
            return Err(Error::domain("mixture weights must be nonnegative"));
        }
        if !first.same_space(m) {
            return Err(Error::domain("mixture components live on different spaces"));
        }
        for (acc, w) in weights.iter_mut().zip(&m.weights) {
            *acc += t * w;
        }
    }
    Ok(DiscreteMeasure {
        space: first.space.clone(),
        weights,
    })
}

/// A nearest-point map onto `set`, ties going to the smallest index.
pub fn nearest_map(space: &Arc<FiniteMetricSpace>, set: &[usize]) -> Result<PointMap> {
    if set.is_empty() {
        return Err(Error::domain("nearest map needs a nonempty target set"));
    }
    if let Some(&bad) = set.iter().find(|&&s| s >= space.len()) {
        return Err(Error::domain(format!("set point {bad} out of range")));
    }
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let assignment = (0..space.len())
        .map(|x| {
            let mut best = sorted[0];
            let mut best_d = space.d(x, best);
            for &s in &sorted[1..] {
                let d = space.d(x, s);
                if d < best_d {
                    best = s;
                    best_d = d;
                }
            }
            Some(best)
        })
        .collect();
    Ok(PointMap {
        source: space.clone(),
        target: space.clone(),
        assignment,
    })
}
