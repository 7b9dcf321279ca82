//! Exact quantization of probability measures on finite metric spaces.
//!
//! Wasserstein distances by network simplex, optimal and uniform
//! quantization errors, covering numbers, the dyadic uniform quantizer,
//! empirical-measure estimates with an exact enumeration oracle, and a
//! harness that checks inequalities between these quantities.

pub mod decompose;
pub mod empirical;
pub mod error;
pub mod io;
pub mod measure;
pub mod quantize;
pub mod rational;
pub mod rng;
pub mod transport;
pub mod verify;

pub use decompose::{build_uniform_quantizer, dyadic_decompose, DyadicDecomposition, UniformQuantizer};
pub use empirical::{
    estimate_expected_error, exact_expected_error, EmpiricalConfig, EstimateReport, Estimator,
};
pub use error::{Error, Result};
pub use measure::{
    meet_and_residuals, mixture, nearest_map, DiscreteMeasure, EmbeddedSpace, FiniteMetricSpace, Meet,
    Metric, PointMap, SubMeasure,
};
pub use quantize::{
    covering_number, optimal_quantization_error, resolution, uniform_quantization_error, Mode,
    QuantizerResult,
};
pub use rational::Rational;
pub use transport::{
    assignment_wasserstein, wasserstein, wasserstein_cost, wasserstein_distance, wasserstein_dollar,
    TransportPlan, Wasserstein,
};
pub use verify::{
    check_bound, run_suite, scaling_study, BoundReport, ClaimKind, Provenance, ScalingFamily, ScalingParams,
    ScalingResult, Verifier, VerifyConfig,
};
