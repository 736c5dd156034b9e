//! End-to-end library flow: simulate characterization data, fit a model,
//! estimate SOC and capacity through it, and validate the propagated
//! statistics empirically.

use ocvu_core::model::OcvModel as GenericModel;
use ocvu_core::{
    coulomb_count, estimate_capacity, fit, lookup_soc, pseudo_ocv, simulate_gitt,
    simulate_low_rate_cycle, validate_budget, validate_soc_lemma, CellSimConfig, ErrorBudget,
    ModelForm, OcvModel, OcvObservation, SocFraction,
};

fn true_model() -> OcvModel {
    GenericModel::nernst([3.65, 0.12, -0.08]).unwrap()
}

fn bench_cell() -> CellSimConfig {
    CellSimConfig::new(true_model(), 5.0, 0.05, 0.01, 7).unwrap()
}

#[test]
fn cycle_data_round_trips_into_the_generating_model() {
    let cfg = bench_cell();
    let cycle = simulate_low_rate_cycle(&cfg, 25.0, 60.0).unwrap();
    let pseudo = pseudo_ocv(&cycle.discharge, &cycle.charge).unwrap();
    let report = fit(&pseudo, ModelForm::Nernst, 20).unwrap();

    // Averaging the branches cancels the IR and hysteresis offsets exactly,
    // so the fit sees noiseless true-model voltages.
    for (fitted, expected) in report.model.coefficients().iter().zip(true_model().coefficients()) {
        assert!((fitted - expected).abs() < 1e-9, "coefficient {fitted} vs {expected}");
    }
    assert!(report.rmse < 1e-10);

    let s = SocFraction::new(0.37).unwrap();
    let obs = OcvObservation::exact(report.model.evaluate(s));
    let estimate = lookup_soc(&report.model, &obs).unwrap();
    assert!((estimate.soc.value() - 0.37).abs() < 1e-8);
}

#[test]
fn gitt_data_supports_capacity_estimation() {
    let cfg = bench_cell();
    let gitt = simulate_gitt(&cfg, 5, 0.5).unwrap();
    let report = fit(&gitt, ModelForm::Nernst, 10).unwrap();
    let model = &report.model;

    // A 0.9 -> 0.4 discharge on the 5 Ah bench cell moves 2.5 Ah.
    let truth = true_model();
    let obs_start =
        OcvObservation::new(truth.evaluate(SocFraction::new(0.9).unwrap()), 0.005).unwrap();
    let obs_end =
        OcvObservation::new(truth.evaluate(SocFraction::new(0.4).unwrap()), 0.005).unwrap();
    let estimate = estimate_capacity(model, &obs_start, &obs_end, 2.5).unwrap();

    assert!((estimate.q_ah - 5.0).abs() < 1e-6, "capacity {} Ah", estimate.q_ah);
    assert!((estimate.soc_delta + 0.5).abs() < 1e-6, "delta {}", estimate.soc_delta);
    assert!(estimate.variance > 0.0);
    assert!(!estimate.saturated);
}

#[test]
fn coulomb_tracking_agrees_with_ocv_lookup() {
    let cfg = bench_cell();
    let model = cfg.true_model();
    let mut soc = SocFraction::new(0.8).unwrap();
    // Discharge at C/2 for 36 minutes: delta = -2.5 * 60 / 3600 / 5 per step.
    for _ in 0..36 {
        let update = coulomb_count(soc, -2.5, 60.0, cfg.capacity_ah()).unwrap();
        assert!(!update.saturated);
        soc = update.soc;
    }
    assert!((soc.value() - 0.5).abs() < 1e-12);

    let obs = OcvObservation::exact(model.evaluate(soc));
    let looked_up = lookup_soc(model, &obs).unwrap();
    assert!((looked_up.soc.value() - soc.value()).abs() < 1e-8);
}

#[test]
fn serialized_budget_drives_a_passing_validation() {
    let text = r#"{
        "sources": [
            {
                "kind": "temperature",
                "soc_knots": [0.0, 0.5, 1.0],
                "mean_v": [0.001, 0.0, -0.001],
                "sd_v": [0.004, 0.002, 0.004]
            },
            {"kind": "meas", "soc_knots": [0.0, 1.0], "mean_v": [0.0, 0.0], "sd_v": [0.003, 0.003]}
        ]
    }"#;
    let budget: ErrorBudget = serde_json::from_str(text).unwrap();
    // Temperature sd interpolates to 0.003 at s = 0.25, matching meas.
    let s = SocFraction::new(0.25).unwrap();
    assert!((budget.combined_variance(s) - 2.0 * 0.003f64 * 0.003).abs() < 1e-12);

    let report = validate_budget(&budget, s, 100_000, 0xFEED).unwrap();
    assert!(report.passed, "{report:?}");
    assert!(report.reliable);
    assert!(report.enforced);
}

#[test]
fn lemma_validation_holds_for_a_fitted_model() {
    let cfg = bench_cell();
    let cycle = simulate_low_rate_cycle(&cfg, 25.0, 60.0).unwrap();
    let pseudo = pseudo_ocv(&cycle.discharge, &cycle.charge).unwrap();
    let fitted = fit(&pseudo, ModelForm::Nernst, 20).unwrap().model;

    let (mean, variance) =
        validate_soc_lemma(&fitted, SocFraction::new(0.6).unwrap(), 0.005, 50_000, 0xCAFE).unwrap();
    assert!(mean.passed, "{mean:?}");
    assert!(variance.passed, "{variance:?}");
    assert!(variance.reliable);
}
