//! `wqlab`: command-line front end to the quantization lab.
//!
//! Exit status: 0 success, 1 domain or schema error, 2 budget exceeded,
//! 3 an exact-side failure in `verify`, 64 usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use wqlab_core::decompose::{build_uniform_quantizer, dyadic_decompose};
use wqlab_core::empirical::{self, EmpiricalConfig, Estimator};
use wqlab_core::io::{load_measure, load_space};
use wqlab_core::quantize::{self, Mode};
use wqlab_core::rational;
use wqlab_core::verify::{self, InstanceSpec, ScalingFamily, ScalingParams, Verifier, VerifyConfig};
use wqlab_core::{DiscreteMeasure, Error, FiniteMetricSpace};

const EXIT_DOMAIN: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_BOUND_FAILURE: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "wqlab",
    version,
    about = "Exact quantization of probability measures on finite metric spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// Seed for Monte Carlo draws.
    #[arg(long, env = "WQLAB_SEED", default_value_t = 7)]
    seed: u64,
    /// Monte Carlo replicates (default depends on the subcommand).
    #[arg(long)]
    trials: Option<u64>,
    /// Cap on subset enumerations and branch-and-bound solves.
    #[arg(long, default_value_t = quantize::DEFAULT_BUDGET)]
    budget_enum: u64,
    /// Cap on multinomial outcomes visited by the exact oracle.
    #[arg(long, default_value_t = empirical::DEFAULT_OUTCOME_BUDGET)]
    budget_outcomes: u64,
    /// Output file (or directory for `verify` and `scaling`). Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    /// Comma-separated exponents.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Comma-separated secondary exponents.
    #[arg(long, value_delimiter = ',')]
    q: Vec<f64>,
    /// Comma-separated sample sizes or quantizer sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Exact,
    Heuristic,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Heuristic => Mode::Heuristic,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Oracle {
    /// Exact when the outcome count fits the budget.
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Subcommand)]
enum Command {
    /// W_p between two measures on the same space.
    Wasserstein {
        mu: PathBuf,
        nu: PathBuf,
        /// Also write the optimal plan as CSV.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// W_p^$ between two measures.
    Dollar {
        mu: PathBuf,
        nu: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Optimal quantization error e_{n,p}.
    QuantizeE {
        mu: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Optimal uniform quantization error b_{n,p}.
    QuantizeB {
        mu: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Covering number N(E, eps).
    Covering {
        space: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Resolution h(m) = smallest eps with N(E, eps) <= m.
    Resolution {
        space: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Dyadic decomposition of a measure along supports S_0..S_k.
    Decompose {
        mu: PathBuf,
        /// JSON list of label lists (level 0 first), inline or a file path.
        #[arg(long)]
        supports: String,
        #[command(flatten)]
        common: Common,
    },
    /// Uniform quantizer with 2^{k+1} atoms built from a dyadic decomposition.
    BuildQuantizer {
        mu: PathBuf,
        #[arg(long)]
        k: u32,
        /// Supports as for `decompose`; defaults to exact e_{2^j,q} witnesses.
        #[arg(long)]
        supports: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Expected error of the empirical measure.
    Empirical {
        mu: PathBuf,
        #[arg(long, default_value = "root_mean_of_Wp_pow")]
        estimator: String,
        #[arg(long, value_enum, default_value = "auto")]
        oracle: Oracle,
        #[command(flatten)]
        common: Common,
    },
    /// Run the bound-verification suite.
    Verify {
        /// `default` or a suite config JSON file.
        #[arg(long, default_value = "default")]
        suite: String,
        #[command(flatten)]
        common: Common,
    },
    /// Decay-rate study for one family of measures.
    Scaling {
        #[arg(long)]
        family: String,
        /// Grid resolution per axis.
        #[arg(long)]
        grid: Option<usize>,
        /// Mass on the cube for mixture_example, as "num/den".
        #[arg(long)]
        alpha: Option<String>,
        /// Skip the e_{n,1} and b_{n,1} series.
        #[arg(long)]
        no_quantizers: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => {
                    if matches!(
                        e.kind(),
                        ErrorKind::InvalidSubcommand | ErrorKind::UnknownArgument
                    ) {
                        let mut cmd = <Cli as clap::CommandFactory>::command();
                        let _ = writeln!(std::io::stderr(), "\n{}", cmd.render_usage());
                    }
                    ExitCode::from(EXIT_USAGE)
                }
            };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_budget() { EXIT_BUDGET } else { EXIT_DOMAIN })
        }
    }
}

type Result<T> = std::result::Result<T, Error>;

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn emit(out: Option<&Path>, v: &Value) -> Result<()> {
    match out {
        Some(path) => wqlab_core::io::write_json(path, v),
        None => {
            println!("{}", serde_json::to_string_pretty(v)?);
            Ok(())
        }
    }
}

fn ps(common: &Common) -> Vec<f64> {
    if common.p.is_empty() {
        vec![1.0]
    } else {
        common.p.clone()
    }
}

fn ns(common: &Common) -> Result<Vec<u64>> {
    if common.n.is_empty() {
        Err(domain("--n is required"))
    } else {
        Ok(common.n.clone())
    }
}

/// Loads both measures onto one shared space.
fn load_pair(mu: &Path, nu: &Path) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let a = load_measure(mu)?;
    let b = wqlab_core::io::load_measure_on(nu, a.space())?;
    if !a.same_space(&b) {
        return Err(domain("the two measures live on different spaces"));
    }
    Ok((a, b))
}

fn parse_supports(arg: &str, space: &FiniteMetricSpace) -> Result<Vec<Vec<usize>>> {
    let text = if Path::new(arg).is_file() {
        fs::read_to_string(arg)?
    } else {
        arg.to_string()
    };
    let v: Value = serde_json::from_str(&text)?;
    let levels = v
        .as_array()
        .ok_or_else(|| domain("supports must be a JSON list of label lists"))?;
    levels
        .iter()
        .enumerate()
        .map(|(j, level)| {
            level
                .as_array()
                .ok_or_else(|| domain(format!("supports[{j}] must be a list of labels")))?
                .iter()
                .map(|l| {
                    let label = match l {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    space
                        .index_of(&label)
                        .ok_or_else(|| domain(format!("supports[{j}]: unknown label {label:?}")))
                })
                .collect()
        })
        .collect()
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Wasserstein { mu, nu, plan, common } => {
            let (a, b) = load_pair(&mu, &nu)?;
            let mut results = Vec::new();
            for p in ps(&common) {
                let w = wqlab_core::wasserstein(&a, &b, p)?;
                if let Some(path) = &plan {
                    w.plan.write_csv(fs::File::create(path)?)?;
                }
                results.push(json!({ "p": p, "distance": w.distance, "cost": w.cost }));
            }
            emit(common.out.as_deref(), &Value::Array(results))?;
        }
        Command::Dollar { mu, nu, common } => {
            let (a, b) = load_pair(&mu, &nu)?;
            let results: Vec<Value> = ps(&common)
                .into_iter()
                .map(|p| Ok(json!({ "p": p, "dollar": wqlab_core::wasserstein_dollar(&a, &b, p)? })))
                .collect::<Result<_>>()?;
            emit(common.out.as_deref(), &Value::Array(results))?;
        }
        Command::QuantizeE { mu, common } => {
            let mu = load_measure(mu)?;
            let mut results = Vec::new();
            for p in ps(&common) {
                for n in ns(&common)? {
                    let r = quantize::optimal_quantization_error(
                        &mu,
                        n,
                        p,
                        common.mode.into(),
                        common.budget_enum,
                    )?;
                    results.push(r.to_json());
                }
            }
            emit(common.out.as_deref(), &Value::Array(results))?;
        }
        Command::QuantizeB { mu, common } => {
            let mu = load_measure(mu)?;
            let mut results = Vec::new();
            for p in ps(&common) {
                for n in ns(&common)? {
                    let r = quantize::uniform_quantization_error(
                        &mu,
                        n,
                        p,
                        common.mode.into(),
                        common.budget_enum,
                    )?;
                    results.push(r.to_json());
                }
            }
            emit(common.out.as_deref(), &Value::Array(results))?;
        }
        Command::Covering { space, eps, common } => {
            let space = load_space(space)?;
            let results: Vec<Value> = eps
                .iter()
                .map(|&e| {
                    let c = quantize::covering_number(&space, e, common.mode.into(), common.budget_enum)?;
                    Ok(json!({ "eps": e, "covering_number": c, "mode": Mode::from(common.mode).name() }))
                })
                .collect::<Result<_>>()?;
            emit(common.out.as_deref(), &Value::Array(results))?;
        }
        Command::Resolution { space, m, common } => {
            let space = load_space(space)?;
            let results: Vec<Value> = m
                .iter()
                .map(|&m| {
                    let h = quantize::resolution(&space, m, common.mode.into(), common.budget_enum)?;
                    Ok(json!({ "m": m, "h": h, "mode": Mode::from(common.mode).name() }))
                })
                .collect::<Result<_>>()?;
            emit(common.out.as_deref(), &Value::Array(results))?;
        }
        Command::Decompose { mu, supports, common } => {
            let mu = load_measure(mu)?;
            let supports = parse_supports(&supports, mu.space())?;
            emit(
                common.out.as_deref(),
                &dyadic_decompose(&mu, &supports)?.to_json()?,
            )?;
        }
        Command::BuildQuantizer {
            mu,
            k,
            supports,
            common,
        } => {
            let mu = load_measure(mu)?;
            let p = *ps(&common).first().expect("nonempty");
            let supports = match supports {
                Some(s) => parse_supports(&s, mu.space())?,
                None => {
                    let q = common.q.first().copied().unwrap_or(p);
                    (0..=k)
                        .map(|j| {
                            let r = quantize::optimal_quantization_error(
                                &mu,
                                1 << j,
                                q,
                                Mode::Exact,
                                common.budget_enum,
                            )?;
                            Ok(r.support)
                        })
                        .collect::<Result<_>>()?
                }
            };
            if supports.len() != k as usize + 1 {
                return Err(domain(format!(
                    "expected {} support levels, got {}",
                    k + 1,
                    supports.len()
                )));
            }
            emit(
                common.out.as_deref(),
                &build_uniform_quantizer(&mu, &supports, p)?.to_json()?,
            )?;
        }
        Command::Empirical {
            mu,
            estimator,
            oracle,
            common,
        } => {
            let mu = load_measure(mu)?;
            let estimator = Estimator::parse(&estimator)
                .ok_or_else(|| domain(format!("unknown estimator {estimator:?}")))?;
            let mut results = Vec::new();
            for p in ps(&common) {
                for n in ns(&common)? {
                    let cfg = EmpiricalConfig {
                        n,
                        trials: common.trials.unwrap_or(10_000),
                        seed: common.seed,
                        p,
                        estimator,
                    };
                    let r = match oracle {
                        Oracle::Auto => empirical::expected_error(&mu, &cfg, common.budget_outcomes)?,
                        Oracle::Exact => {
                            empirical::exact_expected_error(&mu, n, p, estimator, common.budget_outcomes)?
                        }
                        Oracle::MonteCarlo => empirical::estimate_expected_error(&mu, &cfg)?,
                    };
                    results.push(r.to_json());
                }
            }
            emit(common.out.as_deref(), &Value::Array(results))?;
        }
        Command::Verify { suite, common } => return verify_cmd(&suite, &common),
        Command::Scaling {
            family,
            grid,
            alpha,
            no_quantizers,
            common,
        } => {
            let family = ScalingFamily::parse(&family).ok_or_else(|| {
                domain(format!(
                    "unknown family {family:?} (expected two_point, unit_square or mixture_example)"
                ))
            })?;
            let mut params = ScalingParams::defaults(family);
            params.seed = common.seed;
            params.budget_enum = common.budget_enum;
            params.budget_outcomes = common.budget_outcomes;
            params.quantizers = !no_quantizers;
            if let Some(t) = common.trials {
                params.trials = t;
            }
            if !common.n.is_empty() {
                params.n = common.n.clone();
            }
            if let Some(g) = grid {
                params.grid = g;
            }
            if let Some(a) = alpha {
                params.alpha =
                    rational::parse(&a).ok_or_else(|| domain(format!("alpha {a:?} is not \"num/den\"")))?;
            }
            let result = verify::scaling_study(family, &params)?;
            let dir = common.out.unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir)?;
            result.write_csv(fs::File::create(dir.join(format!("{}.csv", family.name())))?)?;
            wqlab_core::io::write_json(
                dir.join(format!("{}.json", family.name())),
                &serde_json::to_value(&result)?,
            )?;
            for (series, slope) in &result.slopes {
                eprintln!("{:<22} slope {slope:+.4}", series);
            }
        }
    }
    Ok(0)
}

fn verify_cmd(suite: &str, common: &Common) -> Result<u8> {
    let mut cfg = if suite == "default" {
        VerifyConfig::default()
    } else {
        VerifyConfig::load(suite)?
    };
    if suite == "default" {
        cfg.instances = vec![InstanceSpec::Named("default".into())];
    }
    cfg.seed = common.seed;
    cfg.budget_enum = common.budget_enum;
    cfg.budget_outcomes = common.budget_outcomes;
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if !common.n.is_empty() {
        cfg.n = common.n.clone();
    }
    if !common.p.is_empty() {
        cfg.p = common.p.clone();
    }
    let verifier = Verifier::new(cfg.clone())?;
    let reports = verifier.run_with(|id, count, elapsed| {
        eprintln!("{id:<16} {count:>5} reports  {:>8.2}s", elapsed.as_secs_f64());
    })?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("reports"));
    verify::write_reports(&dir, &reports, &cfg, unix_time())?;

    let failed: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
    let hard = reports.iter().filter(|r| r.hard_failure()).count();
    let marginal = reports.iter().filter(|r| r.marginal).count();
    eprintln!(
        "{} reports, {} failed ({} exact-side), {} marginal; written to {}",
        reports.len(),
        failed.len(),
        hard,
        marginal,
        dir.display()
    );
    for r in failed.iter().take(20) {
        eprintln!(
            "  FAIL {} on {}: lhs {} > rhs {} {}",
            r.bound_id,
            r.instance_id,
            r.lhs,
            r.rhs,
            serde_json::to_string(&r.parameters)?
        );
    }
    Ok(if hard > 0 { EXIT_BOUND_FAILURE } else { 0 })
}
