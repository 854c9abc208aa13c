//! Determinism contract: identical configuration and seed give byte-identical
//! canonical reports, in both quadrature modes.

use finsler_forms::fiberint::{self, QuadratureSpec};
use finsler_forms::finsler::MetricModel;
use finsler_forms::scenarios::{self, Scenario, ScenarioConfig};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn scenario_reports_are_byte_identical() {
    for scenario in [Scenario::GaussBonnet, Scenario::Flatness] {
        let config = ScenarioConfig::default_for(scenario);
        let first = scenarios::run(&config).unwrap().canonical_json().unwrap();
        let second = scenarios::run(&config).unwrap().canonical_json().unwrap();
        assert_eq!(first, second, "{} report drifted", scenario.name());
    }
}

#[test]
fn monte_carlo_is_seed_deterministic() {
    let model = MetricModel::finsler_perturbed(1, vec![vec![1], vec![1]], 0.1).unwrap();
    let z = [c(0.2, -0.4)];
    let spec = QuadratureSpec::monte_carlo(20_000, 42);
    let a = fiberint::fiber_normalization(&model, &z, &spec).unwrap();
    let b = fiberint::fiber_normalization(&model, &z, &spec).unwrap();
    assert_eq!(a.form.scalar_part(), b.form.scalar_part());
    assert_eq!(a.mc_three_sigma, b.mc_three_sigma);
    let other = fiberint::fiber_normalization(&model, &z, &spec.with_seed(43)).unwrap();
    assert_ne!(a.form.scalar_part(), other.form.scalar_part());
}

#[test]
fn tensor_integrals_are_bit_stable() {
    let model = MetricModel::finsler_perturbed(1, vec![vec![1], vec![2]], 0.1).unwrap();
    let z = [c(0.3, 0.6)];
    let spec = QuadratureSpec::tensor(32, 12);
    let a = fiberint::segre_direct(&model, &z, 1, &spec).unwrap();
    let b = fiberint::segre_direct(&model, &z, 1, &spec).unwrap();
    assert_eq!(
        a.form.coeff_matrix_11()[(0, 0)],
        b.form.coeff_matrix_11()[(0, 0)]
    );
}
