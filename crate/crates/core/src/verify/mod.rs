//! Numerical checks of the inequalities relating `E[W_p(mu_n, mu)]` to
//! optimal and uniform quantization errors, plus the supporting lemmas.
//!
//! Each check evaluates both sides on one instance and emits a
//! [`BoundReport`]. Expectations over the empirical measure are exact
//! (multinomial enumeration) when the outcome count fits the budget, and
//! Monte Carlo otherwise. Quantization errors are always exact.

mod checks;
mod instances;
mod scaling;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::rc::Rc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::empirical::{self, outcome_count, summarize};
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::quantize::{self, Mode};
use crate::rational;
use crate::rng::{stream_id, Categorical};
use crate::transport::{wasserstein_cost, wasserstein_dollar};

pub use checks::{check_bound, BOUND_IDS};
pub use instances::{default_instances, grid_mixture, random_measure, InstanceSpec};
pub use scaling::{scaling_study, ScalingFamily, ScalingParams, ScalingResult, ScalingRow};

/// One side of an inequality with its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Side {
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
    pub trials: u64,
}

impl Side {
    pub fn exact(value: f64) -> Self {
        Side {
            value,
            std_error: 0.0,
            exact: true,
            trials: 0,
        }
    }

    pub fn sampled(value: f64, std_error: f64, trials: u64) -> Self {
        Side {
            value,
            std_error,
            exact: false,
            trials,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Side {
            value: self.value * c,
            std_error: self.std_error * c.abs(),
            ..self
        }
    }

    pub fn plus(self, other: Side) -> Self {
        Side {
            value: self.value + other.value,
            std_error: self.std_error.hypot(other.std_error),
            exact: self.exact && other.exact,
            trials: self.trials.max(other.trials),
        }
    }

    pub fn minus(self, other: Side) -> Self {
        self.plus(other.scale(-1.0))
    }

    pub fn abs(self) -> Self {
        Side {
            value: self.value.abs(),
            ..self
        }
    }

    /// `value^(1/q)` with a delta-method standard error.
    pub fn root(self, q: f64) -> Self {
        let m = self.value.max(0.0);
        let se = if m > 0.0 {
            m.powf(1.0 / q - 1.0) * self.std_error / q
        } else {
            0.0
        };
        Side {
            value: m.powf(1.0 / q),
            std_error: se,
            ..self
        }
    }

    fn provenance(self) -> Provenance {
        if self.exact {
            Provenance::Exact
        } else {
            Provenance::MonteCarlo {
                std_error: self.std_error,
                trials: self.trials,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    MonteCarlo { std_error: f64, trials: u64 },
}

/// What kind of claim a report checks. Claims with a proof are
/// `Theorem` or `Lemma`; a `Remark` is a stated consequence without one,
/// and `Derived` marks a corrected or intermediate form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Theorem,
    Lemma,
    Remark,
    Derived,
}

/// Relative allowance for floating-point noise on exact sides.
pub const EXACT_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub bound_id: String,
    pub instance_id: String,
    pub kind: ClaimKind,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_provenance: Provenance,
    pub rhs_provenance: Provenance,
    /// `rhs - lhs`.
    pub slack: f64,
    /// `4 * sqrt(se_lhs^2 + se_rhs^2)`.
    pub statistical_slack: f64,
    pub pass: bool,
    /// Passed, but only because of the statistical allowance beyond 2 sigma.
    pub marginal: bool,
    pub estimator: Option<String>,
    pub parameters: BTreeMap<String, Value>,
}

impl BoundReport {
    /// Builds the report for `lhs <= rhs`.
    pub fn new(
        bound_id: &str,
        instance_id: &str,
        kind: ClaimKind,
        lhs: Side,
        rhs: Side,
        estimator: Option<&str>,
        parameters: BTreeMap<String, Value>,
    ) -> Self {
        let sigma = lhs.std_error.hypot(rhs.std_error);
        let float_tol = EXACT_RTOL * 1f64.max(lhs.value.abs()).max(rhs.value.abs());
        let excess = lhs.value - rhs.value - float_tol;
        let pass = excess <= 4.0 * sigma && lhs.value.is_finite() && !rhs.value.is_nan();
        BoundReport {
            bound_id: bound_id.to_string(),
            instance_id: instance_id.to_string(),
            kind,
            lhs: lhs.value,
            rhs: rhs.value,
            lhs_provenance: lhs.provenance(),
            rhs_provenance: rhs.provenance(),
            slack: rhs.value - lhs.value,
            statistical_slack: 4.0 * sigma,
            pass,
            marginal: pass && excess > 2.0 * sigma,
            estimator: estimator.map(str::to_string),
            parameters,
        }
    }

    pub fn both_exact(&self) -> bool {
        self.lhs_provenance == Provenance::Exact && self.rhs_provenance == Provenance::Exact
    }

    /// An exact-side failure of a proved claim: always a bug.
    pub fn hard_failure(&self) -> bool {
        !self.pass
            && self.both_exact()
            && matches!(
                self.kind,
                ClaimKind::Theorem | ClaimKind::Lemma | ClaimKind::Derived
            )
    }
}

/// Builds a parameter map from `(name, value)` pairs.
pub fn params<const N: usize>(pairs: [(&str, Value); N]) -> BTreeMap<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Suite configuration. Every field has a default, so `{}` is the
/// default suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Seed for Monte Carlo draws.
    pub seed: u64,
    /// Seed for randomly generated instances and lemma inputs.
    pub instance_seed: u64,
    pub trials: u64,
    /// Cap on subset enumerations and branch-and-bound solves.
    pub budget_enum: u64,
    /// Cap on multinomial outcomes for the exact expectation oracle.
    pub budget_outcomes: u64,
    pub n: Vec<u64>,
    pub p: Vec<f64>,
    /// `(p, q)` pairs for the `main4` check.
    pub pq: Vec<(f64, f64)>,
    /// Largest dyadic level `k` in the `main3` check.
    pub k_max: u32,
    /// Largest space size for `main3`.
    pub main3_max_points: usize,
    /// Largest space size for `supmu`.
    pub supmu_max_points: usize,
    /// Sample sizes for the lemma checks.
    pub lemma_n: Vec<u64>,
    /// Random inputs drawn per instance for exact lemma checks.
    pub lemma_repeats: u64,
    pub bound_ids: Vec<String>,
    pub instances: Vec<InstanceSpec>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 7,
            instance_seed: 20_240_601,
            trials: 2000,
            budget_enum: quantize::DEFAULT_BUDGET,
            budget_outcomes: empirical::DEFAULT_OUTCOME_BUDGET,
            n: vec![2, 4, 8, 16, 32],
            p: vec![1.0, 2.0, 3.0],
            pq: vec![(1.0, 4.0), (1.0, 2.0), (2.0, 3.0)],
            k_max: 3,
            main3_max_points: 10,
            supmu_max_points: 12,
            lemma_n: vec![2, 4, 8],
            lemma_repeats: 3,
            bound_ids: BOUND_IDS.iter().map(|s| s.to_string()).collect(),
            instances: vec![InstanceSpec::Named("default".into())],
        }
    }
}

impl VerifyConfig {
    pub fn from_json(v: &Value) -> Result<Self> {
        serde_json::from_value(v.clone()).map_err(|e| Error::schema("", e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?)
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.budget_enum == 0 || self.budget_outcomes == 0 {
            return Err(Error::domain("trials and budgets must be positive"));
        }
        if self.n.contains(&0) || self.lemma_n.contains(&0) {
            return Err(Error::domain("sample sizes must be positive"));
        }
        for &p in self.p.iter().chain(self.pq.iter().flat_map(|(p, q)| [p, q])) {
            crate::transport::check_p(p)?;
        }
        if let Some(&(p, q)) = self.pq.iter().find(|(p, q)| q < p) {
            return Err(Error::domain(format!("main4 needs q >= p (got p={p}, q={q})")));
        }
        Ok(())
    }
}

/// A named measure in the suite.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: String,
    pub mu: DiscreteMeasure,
}

impl Instance {
    pub fn new(id: impl Into<String>, mu: DiscreteMeasure) -> Self {
        Instance { id: id.into(), mu }
    }
}

/// A per-outcome functional of an empirical measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    /// `W_p(mu_n, mu)`.
    Wp(f64),
    /// `W_p^$(mu_n, mu)`.
    Dollar(f64),
}

impl Functional {
    fn key(self) -> String {
        match self {
            Functional::Wp(p) => format!("W{p}"),
            Functional::Dollar(p) => format!("D{p}"),
        }
    }

    fn eval(self, mu: &DiscreteMeasure, counts: &[u64]) -> Result<f64> {
        let nu = DiscreteMeasure::from_counts(mu.space().clone(), counts)?;
        match self {
            Functional::Wp(p) => Ok(wasserstein_cost(&nu, mu, p)?.powf(1.0 / p)),
            Functional::Dollar(p) => wasserstein_dollar(&nu, mu, p),
        }
    }
}

/// The law of a functional: exact `(probability, value)` pairs or Monte
/// Carlo draws.
#[derive(Debug, Clone)]
pub enum Law {
    Exact(Vec<(f64, f64)>),
    Sampled(Vec<f64>),
}

impl Law {
    /// `E[X^q]`.
    pub fn moment(&self, q: f64) -> Side {
        match self {
            Law::Exact(pairs) => Side::exact(pairs.iter().map(|(pr, v)| pr * v.powf(q)).sum()),
            Law::Sampled(values) => {
                let pw: Vec<f64> = values.iter().map(|v| v.powf(q)).collect();
                let s = summarize(&pw);
                Side::sampled(s.mean, s.std_error, values.len() as u64)
            }
        }
    }

    /// `E[X^q]^(1/q)`.
    pub fn norm(&self, q: f64) -> Side {
        self.moment(q).root(q)
    }

    pub fn mean(&self) -> Side {
        self.moment(1.0)
    }
}

type Outcomes = Rc<Vec<(f64, Vec<u64>)>>;

/// Evaluation context: configuration plus caches shared across checks.
pub struct Verifier {
    cfg: VerifyConfig,
    outcomes: RefCell<HashMap<String, Outcomes>>,
    laws: RefCell<HashMap<String, Rc<Law>>>,
    e_cache: RefCell<HashMap<String, (f64, Vec<usize>)>>,
    b_cache: RefCell<HashMap<String, f64>>,
    h_cache: RefCell<HashMap<String, f64>>,
}

impl Verifier {
    pub fn new(cfg: VerifyConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Verifier {
            cfg,
            outcomes: RefCell::default(),
            laws: RefCell::default(),
            e_cache: RefCell::default(),
            b_cache: RefCell::default(),
            h_cache: RefCell::default(),
        })
    }

    pub fn config(&self) -> &VerifyConfig {
        &self.cfg
    }

    /// Whether `n`-sample expectations for `mu` use the exact oracle.
    pub fn is_exact(&self, mu: &DiscreteMeasure, n: u64) -> bool {
        outcome_count(mu, n) <= self.cfg.budget_outcomes as u128
    }

    fn outcome_list(&self, id: &str, mu: &DiscreteMeasure, n: u64) -> Result<Outcomes> {
        let key = format!("{id}|{n}");
        if let Some(o) = self.outcomes.borrow().get(&key) {
            return Ok(o.clone());
        }
        let list: Vec<(f64, Vec<u64>)> = empirical::outcomes(mu, n, self.cfg.budget_outcomes)?
            .into_iter()
            .map(|o| (rational::to_f64(&o.probability), o.counts))
            .collect();
        let list = Rc::new(list);
        self.outcomes.borrow_mut().insert(key, list.clone());
        Ok(list)
    }

    /// The law of `f(mu_n)` for the instance `id`.
    pub fn law(&self, id: &str, mu: &DiscreteMeasure, n: u64, f: Functional) -> Result<Rc<Law>> {
        let key = format!("{id}|{n}|{}", f.key());
        if let Some(l) = self.laws.borrow().get(&key) {
            return Ok(l.clone());
        }
        let law = if self.is_exact(mu, n) {
            let list = self.outcome_list(id, mu, n)?;
            Law::Exact(
                list.iter()
                    .map(|(pr, c)| Ok((*pr, f.eval(mu, c)?)))
                    .collect::<Result<_>>()?,
            )
        } else {
            let stream = stream_id(&[id, &n.to_string()]);
            Law::Sampled(empirical::sample_values(
                mu,
                n,
                self.cfg.trials,
                self.cfg.seed,
                stream,
                |c| f.eval(mu, c),
            )?)
        };
        let law = Rc::new(law);
        self.laws.borrow_mut().insert(key, law.clone());
        Ok(law)
    }

    /// The law of `W_p(mu_n, mu_n')` for two independent samples.
    pub fn two_sample_law(&self, id: &str, mu: &DiscreteMeasure, n: u64, p: f64) -> Result<Rc<Law>> {
        let key = format!("{id}|{n}|pair{p}");
        if let Some(l) = self.laws.borrow().get(&key) {
            return Ok(l.clone());
        }
        let space = mu.space();
        let dist = |a: &[u64], b: &[u64]| -> Result<f64> {
            let x = DiscreteMeasure::from_counts(space.clone(), a)?;
            let y = DiscreteMeasure::from_counts(space.clone(), b)?;
            Ok(wasserstein_cost(&x, &y, p)?.powf(1.0 / p))
        };
        let count = outcome_count(mu, n);
        let law = if count.saturating_mul(count) <= self.cfg.budget_outcomes as u128 {
            let list = self.outcome_list(id, mu, n)?;
            let mut pairs = Vec::with_capacity(list.len() * list.len());
            for (pa, a) in list.iter() {
                for (pb, b) in list.iter() {
                    pairs.push((pa * pb, dist(a, b)?));
                }
            }
            Law::Exact(pairs)
        } else {
            let sampler = Categorical::new(mu)?;
            let s1 = stream_id(&[id, &n.to_string()]);
            let s2 = stream_id(&[id, &n.to_string(), "independent copy"]);
            let mut values = Vec::with_capacity(self.cfg.trials as usize);
            for t in 0..self.cfg.trials {
                let a = sampler.dense_counts(space.len(), &sampler.sample_counts(n, self.cfg.seed, s1, t));
                let b = sampler.dense_counts(space.len(), &sampler.sample_counts(n, self.cfg.seed, s2, t));
                values.push(dist(&a, &b)?);
            }
            Law::Sampled(values)
        };
        let law = Rc::new(law);
        self.laws.borrow_mut().insert(key, law.clone());
        Ok(law)
    }

    /// Exact `e_{n,q}` and an optimal site set; `q = inf` is the covering radius form.
    pub fn e(&self, id: &str, mu: &DiscreteMeasure, n: u64, q: f64) -> Result<(f64, Vec<usize>)> {
        let key = format!("{id}|{n}|{q}");
        if let Some(v) = self.e_cache.borrow().get(&key) {
            return Ok(v.clone());
        }
        let v = if q.is_infinite() {
            quantize::optimal_quantization_error_inf(mu, n, self.cfg.budget_enum)?
        } else {
            let r = quantize::optimal_quantization_error(mu, n, q, Mode::Exact, self.cfg.budget_enum)?;
            (r.error, r.support)
        };
        self.e_cache.borrow_mut().insert(key, v.clone());
        Ok(v)
    }

    /// Exact `b_{n,p}`.
    pub fn b(&self, id: &str, mu: &DiscreteMeasure, n: u64, p: f64) -> Result<f64> {
        let key = format!("{id}|{n}|{p}");
        if let Some(&v) = self.b_cache.borrow().get(&key) {
            return Ok(v);
        }
        let (cost, _) = quantize::exact_uniform(mu, n, p, self.cfg.budget_enum)?;
        let v = cost.max(0.0).powf(1.0 / p);
        self.b_cache.borrow_mut().insert(key, v);
        Ok(v)
    }

    /// Exact `h(m)` of the instance's space.
    pub fn h(&self, id: &str, mu: &DiscreteMeasure, m: usize) -> Result<f64> {
        let key = format!("{id}|{m}");
        if let Some(&v) = self.h_cache.borrow().get(&key) {
            return Ok(v);
        }
        let v = quantize::resolution(mu.space(), m, Mode::Exact, self.cfg.budget_enum)?;
        self.h_cache.borrow_mut().insert(key, v);
        Ok(v)
    }

    /// Every configured check on every configured instance, sorted by
    /// `(bound_id, instance_id)` with parameter order kept inside a group.
    pub fn run(&self) -> Result<Vec<BoundReport>> {
        self.run_with(|_, _, _| {})
    }

    /// As [`Verifier::run`], calling `progress(bound_id, reports, elapsed)`
    /// after each check family.
    pub fn run_with(&self, mut progress: impl FnMut(&str, usize, Duration)) -> Result<Vec<BoundReport>> {
        let instances = instances::resolve(&self.cfg)?;
        let mut reports = Vec::new();
        for id in &self.cfg.bound_ids {
            let start = Instant::now();
            let before = reports.len();
            for inst in &instances {
                reports.extend(check_bound(self, id, inst)?);
            }
            progress(id, reports.len() - before, start.elapsed());
        }
        reports.sort_by(|a, b| {
            a.bound_id
                .cmp(&b.bound_id)
                .then_with(|| a.instance_id.cmp(&b.instance_id))
        });
        Ok(reports)
    }
}

/// Runs the suite described by `cfg`.
pub fn run_suite(cfg: &VerifyConfig) -> Result<Vec<BoundReport>> {
    Verifier::new(cfg.clone())?.run()
}

/// The `reports.json` document.
pub fn reports_json(reports: &[BoundReport], cfg: &VerifyConfig, timestamp: u64) -> Value {
    json!({
        "meta": { "timestamp": timestamp, "seed": cfg.seed, "config": cfg },
        "reports": reports,
    })
}

fn provenance_cells(p: &Provenance) -> (&'static str, String) {
    match p {
        Provenance::Exact => ("exact", String::new()),
        Provenance::MonteCarlo { std_error, .. } => ("monte_carlo", std_error.to_string()),
    }
}

/// Flat CSV with one row per report; parameters as a JSON cell.
pub fn write_reports_csv(reports: &[BoundReport], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "bound_id",
        "instance_id",
        "kind",
        "lhs",
        "rhs",
        "lhs_provenance",
        "lhs_std_error",
        "rhs_provenance",
        "rhs_std_error",
        "slack",
        "pass",
        "marginal",
        "estimator",
        "parameters",
    ])?;
    for r in reports {
        let (lp, ls) = provenance_cells(&r.lhs_provenance);
        let (rp, rs) = provenance_cells(&r.rhs_provenance);
        w.write_record([
            r.bound_id.clone(),
            r.instance_id.clone(),
            serde_json::to_value(r.kind)?
                .as_str()
                .unwrap_or_default()
                .to_string(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            lp.to_string(),
            ls,
            rp.to_string(),
            rs,
            r.slack.to_string(),
            r.pass.to_string(),
            r.marginal.to_string(),
            r.estimator.clone().unwrap_or_default(),
            serde_json::to_string(&r.parameters)?,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `reports.json` and `reports.csv` into `dir`.
pub fn write_reports(
    dir: impl AsRef<Path>,
    reports: &[BoundReport],
    cfg: &VerifyConfig,
    timestamp: u64,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    crate::io::write_json(dir.join("reports.json"), &reports_json(reports, cfg, timestamp))?;
    write_reports_csv(reports, std::fs::File::create(dir.join("reports.csv"))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_policy() {
        let r = BoundReport::new(
            "x",
            "i",
            ClaimKind::Lemma,
            Side::exact(1.0),
            Side::exact(1.0 - 1e-12),
            None,
            params([]),
        );
        assert!(r.pass && !r.marginal);
        let r = BoundReport::new(
            "x",
            "i",
            ClaimKind::Lemma,
            Side::exact(1.1),
            Side::exact(1.0),
            None,
            params([]),
        );
        assert!(!r.pass && r.hard_failure());
        let r = BoundReport::new(
            "x",
            "i",
            ClaimKind::Lemma,
            Side::sampled(1.3, 0.1, 10),
            Side::exact(1.0),
            None,
            params([]),
        );
        assert!(r.pass && r.marginal && !r.hard_failure());
        let r = BoundReport::new(
            "x",
            "i",
            ClaimKind::Lemma,
            Side::sampled(1.5, 0.1, 10),
            Side::exact(1.0),
            None,
            params([]),
        );
        assert!(!r.pass && !r.hard_failure());
    }

    #[test]
    fn root_delta_method() {
        let s = Side::sampled(4.0, 0.4, 100).root(2.0);
        assert!((s.value - 2.0).abs() < 1e-15);
        assert!((s.std_error - 0.1).abs() < 1e-15);
    }
}
