//! Exact p-Wasserstein distances between discrete measures.
//!
//! Rational weights are scaled to integer flow units by the LCM of their
//! denominators, so marginals are met exactly; only the costs `d^p` are
//! floating point.

pub mod graph;
pub mod simplex;

use std::io::Write;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::measure::{meet_and_residuals, DiscreteMeasure, FiniteMetricSpace};
use crate::rational::{self, Rational};
use simplex::{FlowProblem, FlowSolution};

/// An optimal coupling, stored sparsely.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    space: Arc<FiniteMetricSpace>,
    /// `(source atom, target atom, mass)` with positive mass.
    pub entries: Vec<(usize, usize, Rational)>,
    pub p: f64,
    /// `sum mass * d^p`.
    pub cost: f64,
}

impl TransportPlan {
    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    /// Row sums indexed by point.
    pub fn source_marginal(&self) -> Vec<Rational> {
        let mut m = vec![rational::int(0); self.space.len()];
        for (i, _, w) in &self.entries {
            m[*i] += w;
        }
        m
    }

    pub fn target_marginal(&self) -> Vec<Rational> {
        let mut m = vec![rational::int(0); self.space.len()];
        for (_, j, w) in &self.entries {
            m[*j] += w;
        }
        m
    }

    /// Cost recomputed from the entries.
    pub fn recompute_cost(&self) -> f64 {
        self.entries
            .iter()
            .map(|(i, j, w)| rational::to_f64(w) * self.space.d(*i, *j).powf(self.p))
            .sum()
    }

    /// CSV with header `source,target,mass`, masses as `num/den`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "target", "mass"])?;
        for (i, j, m) in &self.entries {
            w.write_record([self.space.label(*i), self.space.label(*j), &rational::format(m)])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Wasserstein {
    pub distance: f64,
    /// The optimal `p`-th power cost.
    pub cost: f64,
    pub plan: TransportPlan,
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("p must be a finite real >= 1 (got {p})")));
    }
    Ok(())
}

#[inline]
pub(crate) fn pow_cost(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d
    } else {
        d.powf(p)
    }
}

fn units_for(a: &[Rational], b: &[Rational]) -> Result<(BigInt, Vec<i64>, Vec<i64>)> {
    let scale = rational::lcm_of_denominators(a.iter().chain(b));
    let ua = rational::to_units(a, &scale)?;
    let ub = rational::to_units(b, &scale)?;
    Ok((scale, ua, ub))
}

/// Solves the bipartite transport problem between integer supply vectors
/// `a` and `b` (equal totals) over `space`. Returns the flow entries.
fn solve_units(space: &FiniteMetricSpace, a: &[i64], b: &[i64], p: f64) -> Result<Vec<(usize, usize, i64)>> {
    let src: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0).collect();
    let dst: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0).collect();
    if src.len() == 1 {
        return Ok(dst.iter().map(|&j| (src[0], j, b[j])).collect());
    }
    if dst.len() == 1 {
        return Ok(src.iter().map(|&i| (i, dst[0], a[i])).collect());
    }
    let mut supply: Vec<i64> = src.iter().map(|&i| a[i]).collect();
    supply.extend(dst.iter().map(|&j| -b[j]));
    let mut arcs = Vec::with_capacity(src.len() * dst.len());
    for (si, &i) in src.iter().enumerate() {
        for (ti, &j) in dst.iter().enumerate() {
            arcs.push((si, src.len() + ti, pow_cost(space.d(i, j), p)));
        }
    }
    let FlowSolution { flows, .. } = simplex::solve(&FlowProblem { supply, arcs })?;
    let mut out = Vec::new();
    for (k, &f) in flows.iter().enumerate() {
        if f > 0 {
            out.push((src[k / dst.len()], dst[k % dst.len()], f));
        }
    }
    Ok(out)
}

/// `solve_units` with the pair put in a fixed order first, so that
/// swapping the measures transposes the plan and leaves the summed cost
/// bit-for-bit unchanged.
fn solve_symmetric(
    space: &FiniteMetricSpace,
    a: &[i64],
    b: &[i64],
    p: f64,
) -> Result<Vec<(usize, usize, i64)>> {
    if a <= b {
        solve_units(space, a, b, p)
    } else {
        Ok(solve_units(space, b, a, p)?
            .into_iter()
            .map(|(i, j, f)| (j, i, f))
            .collect())
    }
}

/// Optimal cost (in flow units) of shipping integer supplies `a` to
/// demands `b` with an arbitrary cost function. Zero entries are skipped.
pub(crate) fn min_cost_bipartite(a: &[i64], b: &[i64], cost: impl Fn(usize, usize) -> f64) -> Result<f64> {
    let src: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0).collect();
    let dst: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0).collect();
    if src.len() == 1 || dst.len() == 1 {
        let mut total = 0.0;
        for &i in &src {
            for &j in &dst {
                let f = if src.len() == 1 { b[j] } else { a[i] };
                total += f as f64 * cost(i, j);
            }
        }
        return Ok(total);
    }
    let mut supply: Vec<i64> = src.iter().map(|&i| a[i]).collect();
    supply.extend(dst.iter().map(|&j| -b[j]));
    let mut arcs = Vec::with_capacity(src.len() * dst.len());
    for (si, &i) in src.iter().enumerate() {
        for (ti, &j) in dst.iter().enumerate() {
            arcs.push((si, src.len() + ti, cost(i, j)));
        }
    }
    Ok(simplex::solve(&FlowProblem { supply, arcs })?.cost)
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<()> {
    check_p(p)?;
    if !mu.same_space(nu) {
        return Err(Error::domain("measures live on different spaces"));
    }
    Ok(())
}

/// `W_p(mu, nu)` together with an optimal plan.
pub fn wasserstein(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<Wasserstein> {
    check_pair(mu, nu, p)?;
    let space = mu.space();
    let (scale, a, b) = units_for(mu.weights(), nu.weights())?;
    let flows = solve_symmetric(space, &a, &b, p)?;
    let scale_r = Rational::from_integer(scale.clone());
    let scale_f = scale.to_f64().unwrap_or(f64::INFINITY);
    let mut cost = 0.0;
    let mut entries = Vec::with_capacity(flows.len());
    for (i, j, f) in flows {
        cost += f as f64 * pow_cost(space.d(i, j), p);
        entries.push((i, j, Rational::from_integer(BigInt::from(f)) / &scale_r));
    }
    let cost = (cost / scale_f).max(0.0);
    Ok(Wasserstein {
        distance: cost.powf(1.0 / p),
        cost,
        plan: TransportPlan {
            space: space.clone(),
            entries,
            p,
            cost,
        },
    })
}

/// Optimal `p`-th power cost only, skipping plan construction.
pub fn wasserstein_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_pair(mu, nu, p)?;
    let space = mu.space();
    let (scale, a, b) = units_for(mu.weights(), nu.weights())?;
    let flows = solve_symmetric(space, &a, &b, p)?;
    let total: f64 = flows
        .iter()
        .map(|&(i, j, f)| f as f64 * pow_cost(space.d(i, j), p))
        .sum();
    Ok((total / scale.to_f64().unwrap_or(f64::INFINITY)).max(0.0))
}

pub fn wasserstein_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    Ok(wasserstein_cost(mu, nu, p)?.powf(1.0 / p))
}

/// An optimal Kantorovich potential for `W_1(mu, nu)`: a function `f`
/// on the space with `sum f (mu - nu) = W_1(mu, nu)`, read off the
/// simplex potentials on the complete graph. Returns `(dual value, f)`;
/// `f` is 1-Lipschitz up to the certificate tolerance.
pub fn kantorovich_potential(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, Vec<f64>)> {
    check_pair(mu, nu, 1.0)?;
    let space = mu.space();
    let m = space.len();
    let (scale, a, b) = units_for(mu.weights(), nu.weights())?;
    let supply: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let mut arcs = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                arcs.push((i, j, space.d(i, j)));
            }
        }
    }
    let sol = simplex::solve(&FlowProblem { supply, arcs })?;
    let scale_f = scale.to_f64().unwrap_or(f64::INFINITY);
    let mut f = sol.potentials;
    let mut value: f64 = f
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(fx, (x, y))| fx * (x - y) as f64)
        .sum();
    if value < 0.0 {
        f.iter_mut().for_each(|v| *v = -*v);
        value = -value;
    }
    Ok((value / scale_f, f))
}

/// `max (f(x) - f(y)) / d(x, y)` over distinct points.
pub fn lipschitz_constant(space: &FiniteMetricSpace, f: &[f64]) -> f64 {
    let mut lip: f64 = 0.0;
    for i in 0..space.len() {
        for j in 0..space.len() {
            if i != j {
                lip = lip.max((f[i] - f[j]) / space.d(i, j));
            }
        }
    }
    lip
}

/// Largest list length solved by permutation enumeration.
pub const ASSIGNMENT_EXHAUSTIVE_MAX: usize = 8;

/// `min over sigma of ((1/r) sum d(y_i, z_sigma(i))^p)^(1/p)`.
///
/// Lists of length at most [`ASSIGNMENT_EXHAUSTIVE_MAX`] are solved by
/// enumerating permutations; longer lists go through the flow solver on
/// the two uniform measures.
pub fn assignment_wasserstein(
    space: &Arc<FiniteMetricSpace>,
    y: &[usize],
    z: &[usize],
    p: f64,
) -> Result<f64> {
    check_p(p)?;
    if y.len() != z.len() {
        return Err(Error::domain(format!(
            "assignment lists differ in length ({} vs {})",
            y.len(),
            z.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::domain("assignment lists must be nonempty"));
    }
    if y.len() <= ASSIGNMENT_EXHAUSTIVE_MAX {
        Ok(assignment_exhaustive(space, y, z, p)?.powf(1.0 / p))
    } else {
        let mu = DiscreteMeasure::uniform_on(space.clone(), y)?;
        let nu = DiscreteMeasure::uniform_on(space.clone(), z)?;
        wasserstein_distance(&mu, &nu, p)
    }
}

/// Averaged `p`-th power cost of the best permutation (Heap's algorithm).
pub fn assignment_exhaustive(space: &FiniteMetricSpace, y: &[usize], z: &[usize], p: f64) -> Result<f64> {
    let r = y.len();
    if let Some(&bad) = y.iter().chain(z).find(|&&x| x >= space.len()) {
        return Err(Error::domain(format!("point {bad} out of range")));
    }
    let cost = |perm: &[usize]| -> f64 {
        (0..r)
            .map(|i| pow_cost(space.d(y[i], z[perm[i]]), p))
            .sum::<f64>()
    };
    let mut perm: Vec<usize> = (0..r).collect();
    let mut best = cost(&perm);
    let mut c = vec![0usize; r];
    let mut i = 1;
    while i < r {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best / r as f64)
}

/// `W_p^$`: transport only the mass outside `mu ∧ nu`, renormalized, then
/// rescale by `(1 - common mass)^(1/p)`. Zero when the measures agree.
pub fn wasserstein_dollar(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_pair(mu, nu, p)?;
    let meet = meet_and_residuals(mu, nu)?;
    match meet.residuals {
        None => Ok(0.0),
        Some((rm, rn)) => {
            let rest = rational::to_f64(&(Rational::from_integer(1.into()) - &meet.mass));
            Ok(rest.powf(1.0 / p) * wasserstein_distance(&rm, &rn, p)?)
        }
    }
}

/// `(1 - zeta(E))^(1/p) W_p((mu - zeta)/(1 - zeta(E)), (nu - zeta)/(1 - zeta(E)))`
/// for a sub-measure `zeta <= mu ∧ nu`; zero when `zeta` has full mass.
pub fn trimmed_wasserstein(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    zeta: &crate::measure::SubMeasure,
    p: f64,
) -> Result<f64> {
    check_pair(mu, nu, p)?;
    let a = mu.as_sub().minus(zeta)?;
    let b = nu.as_sub().minus(zeta)?;
    let rest = a.mass();
    if num_traits::Zero::is_zero(&rest) {
        return Ok(0.0);
    }
    let w = wasserstein_distance(&a.normalized()?, &b.normalized()?, p)?;
    Ok(rational::to_f64(&rest).powf(1.0 / p) * w)
}
