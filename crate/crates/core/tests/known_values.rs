//! Closed-form values for small measures.

mod common;

use std::sync::Arc;

use common::*;
use wqlab_core::empirical::{self, Estimator};
use wqlab_core::quantize::{self, Mode};
use wqlab_core::{DiscreteMeasure, FiniteMetricSpace};

const BUDGET: u64 = 1_000_000;

fn equidistant(m: usize) -> DiscreteMeasure {
    uniform_on(&Arc::new(FiniteMetricSpace::equidistant(m, 1.0).unwrap()))
}

#[test]
fn uniform_on_2n_equidistant_points() {
    for n in [1u64, 2, 3, 4] {
        let mu = equidistant(2 * n as usize);
        let b_n = quantize::uniform_quantization_error(&mu, n, 1.0, Mode::Exact, BUDGET).unwrap();
        let b_2n = quantize::uniform_quantization_error(&mu, 2 * n, 1.0, Mode::Exact, BUDGET).unwrap();
        assert_eq!(b_n.error, 0.5, "n={n}");
        assert_eq!(b_2n.error, 0.0, "n={n}");
    }
}

#[test]
fn steady_decay_forces_empirical_error_up() {
    // E W1(mu_2n, mu) >= E W1(mu_n, mu)/2 >= b_{n,1}/2 = 1/4.
    for n in [1u64, 2, 3] {
        let mu = equidistant(2 * n as usize);
        let e2n = empirical::exact_expected_error(&mu, 2 * n, 1.0, Estimator::MeanOfW1, u64::MAX).unwrap();
        let en = empirical::exact_expected_error(&mu, n, 1.0, Estimator::MeanOfW1, u64::MAX).unwrap();
        assert!(e2n.estimate >= 0.5 * en.estimate - 1e-12);
        assert!(en.estimate >= 0.5 - 1e-12);
        assert!(e2n.estimate >= 0.25 - 1e-12);
    }
}

#[test]
fn two_point_empirical_errors() {
    let mu = two_point();
    let at = |n| {
        empirical::exact_expected_error(&mu, n, 1.0, Estimator::MeanOfW1, u64::MAX)
            .unwrap()
            .estimate
    };
    assert!((at(1) - 0.5).abs() < 1e-15);
    assert!((at(2) - 0.25).abs() < 1e-15);
    assert!((at(4) - 3.0 / 16.0).abs() < 1e-15);
}

#[test]
fn uniform_grid_on_interval_has_b_at_most_one_over_n() {
    // A fine grid stands in for the uniform law on [0, 1].
    let xs: Vec<f64> = (0..12).map(|i| (i as f64 + 0.5) / 12.0).collect();
    let mu = uniform_on(&line_space(&xs));
    for n in [1u64, 2, 3, 4, 6] {
        for p in [1.0, 2.0] {
            let b = quantize::uniform_quantization_error(&mu, n, p, Mode::Exact, BUDGET).unwrap();
            assert!(b.error <= 1.0 / n as f64 + 1e-12, "n={n} p={p}: {}", b.error);
        }
    }
}

#[test]
fn dollar_of_equal_measures_is_zero_and_dominates_wp() {
    let mu = skewed_two_point();
    assert_eq!(wqlab_core::wasserstein_dollar(&mu, &mu, 2.0).unwrap(), 0.0);
    let nu = two_point();
    for p in [1.0, 2.0, 3.0] {
        let w = wqlab_core::wasserstein_distance(&mu, &nu, p).unwrap();
        let d = wqlab_core::wasserstein_dollar(&mu, &nu, p).unwrap();
        assert!(w <= d + 1e-12);
    }
}
