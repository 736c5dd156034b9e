//! Synthetic characterization protocols for a ground-truth cell, plus
//! Coulomb counting.
//!
//! Two idealized lab protocols are simulated from a known OCV curve:
//!
//! * Low-rate cycling: constant-current discharge then charge while
//!   sampling terminal voltage. The terminal voltage sits below (discharge)
//!   or above (charge) the open-circuit curve by the ohmic drop `i*R` plus a
//!   symmetric hysteresis half-width.
//! * GITT: stepwise discharge with a full rest at every step, idealized as
//!   exact relaxation, so each recorded voltage equals the true curve.
//!
//! Averaging the two cycling branches cancels the symmetric offsets and
//! recovers a pseudo-OCV curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{OcvModel, SocFraction};
use crate::real::{real, Real};
use crate::table::{Direction, OcvSocTable};

/// Ground truth for the synthetic cell the generators sample from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "CellSimConfigRepr<T>",
    into = "CellSimConfigRepr<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct CellSimConfig<T: Real> {
    true_model: OcvModel<T>,
    capacity_ah: T,
    resistance_ohm: T,
    hysteresis_v: T,
    seed: u64,
}

impl<T: Real> CellSimConfig<T> {
    /// Validates the cell parameters: positive capacity, non-negative
    /// resistance and hysteresis half-width.
    pub fn new(
        true_model: OcvModel<T>,
        capacity_ah: T,
        resistance_ohm: T,
        hysteresis_v: T,
        seed: u64,
    ) -> Result<Self> {
        if !capacity_ah.is_finite() || capacity_ah <= T::zero() {
            return Err(Error::InvalidArgument(format!(
                "capacity {capacity_ah} Ah must be finite and positive"
            )));
        }
        if !resistance_ohm.is_finite() || resistance_ohm < T::zero() {
            return Err(Error::InvalidArgument(format!(
                "resistance {resistance_ohm} ohm must be finite and non-negative"
            )));
        }
        if !hysteresis_v.is_finite() || hysteresis_v < T::zero() {
            return Err(Error::InvalidArgument(format!(
                "hysteresis half-width {hysteresis_v} V must be finite and non-negative"
            )));
        }
        Ok(Self { true_model, capacity_ah, resistance_ohm, hysteresis_v, seed })
    }

    pub fn true_model(&self) -> &OcvModel<T> {
        &self.true_model
    }

    pub fn capacity_ah(&self) -> T {
        self.capacity_ah
    }

    pub fn resistance_ohm(&self) -> T {
        self.resistance_ohm
    }

    /// Half the zero-current voltage gap between the charge and discharge
    /// branches.
    pub fn hysteresis_v(&self) -> T {
        self.hysteresis_v
    }

    /// Carried so a config fully identifies a dataset; the idealized
    /// generators themselves are deterministic and draw no randomness.
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
struct CellSimConfigRepr<T: Real> {
    true_model: OcvModel<T>,
    capacity_ah: T,
    resistance_ohm: T,
    hysteresis_v: T,
    seed: u64,
}

impl<T: Real> TryFrom<CellSimConfigRepr<T>> for CellSimConfig<T> {
    type Error = Error;

    fn try_from(repr: CellSimConfigRepr<T>) -> Result<Self> {
        CellSimConfig::new(
            repr.true_model,
            repr.capacity_ah,
            repr.resistance_ohm,
            repr.hysteresis_v,
            repr.seed,
        )
    }
}

impl<T: Real> From<CellSimConfig<T>> for CellSimConfigRepr<T> {
    fn from(cfg: CellSimConfig<T>) -> Self {
        CellSimConfigRepr {
            true_model: cfg.true_model,
            capacity_ah: cfg.capacity_ah,
            resistance_ohm: cfg.resistance_ohm,
            hysteresis_v: cfg.hysteresis_v,
            seed: cfg.seed,
        }
    }
}

/// Discharge and charge branches produced by one low-rate cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTables<T> {
    pub discharge: OcvSocTable<T>,
    pub charge: OcvSocTable<T>,
}

/// Simulates one constant-current discharge/charge cycle at `C/c_rate_divisor`.
///
/// The cell is cycled across the full SOC range; terminal voltage is sampled
/// every `sample_period_s` seconds plus once exactly at each end, so both
/// tables span `[0, 1]`. Rows are stored in increasing SOC order for both
/// branches. Discharge rows read `f(s) - (i*R + hysteresis)`, charge rows
/// `f(s) + (i*R + hysteresis)`, with `i = capacity / c_rate_divisor`.
pub fn simulate_low_rate_cycle<T: Real>(
    cfg: &CellSimConfig<T>,
    c_rate_divisor: T,
    sample_period_s: T,
) -> Result<CycleTables<T>> {
    if !c_rate_divisor.is_finite() || c_rate_divisor < T::one() {
        return Err(Error::InvalidArgument(format!(
            "C-rate divisor {c_rate_divisor} must be finite and >= 1"
        )));
    }
    if !sample_period_s.is_finite() || sample_period_s <= T::zero() {
        return Err(Error::InvalidArgument(format!(
            "sample period {sample_period_s} s must be finite and positive"
        )));
    }

    let current_a = cfg.capacity_ah / c_rate_divisor;
    let offset_v = current_a * cfg.resistance_ohm + cfg.hysteresis_v;
    let full_sweep_s = real::<T>(3600.0) * c_rate_divisor;

    // Exact integration of the constant current: SOC after the k-th sample
    // is (k*dt)/T_sweep, recomputed from k each time so there is no
    // accumulated summation error. The final row lands exactly on 1.
    let mut socs = Vec::new();
    let mut k = 0u64;
    loop {
        let s = real::<T>(k as f64) * sample_period_s / full_sweep_s;
        if s >= T::one() {
            break;
        }
        socs.push(s);
        k += 1;
    }
    socs.push(T::one());

    let mut discharge = Vec::with_capacity(socs.len());
    let mut charge = Vec::with_capacity(socs.len());
    for &s in &socs {
        let ocv = cfg.true_model.evaluate(SocFraction::new(s)?).volts();
        discharge.push((s, ocv - offset_v));
        charge.push((s, ocv + offset_v));
    }
    Ok(CycleTables {
        discharge: OcvSocTable::new(discharge, Direction::Discharge)?,
        charge: OcvSocTable::new(charge, Direction::Charge)?,
    })
}

/// Simulates a GITT run: discharge in `step_percent` SOC steps with a full
/// rest at each one.
///
/// Relaxation is idealized as exact, so every recorded voltage equals the
/// true curve at that SOC and the pulse amplitude only moves the cell
/// between rests. Returns `100/step_percent + 1` rows at SOC
/// `{0, step, ..., 100}` percent.
pub fn simulate_gitt<T: Real>(
    cfg: &CellSimConfig<T>,
    step_percent: u32,
    pulse_current_a: T,
) -> Result<OcvSocTable<T>> {
    if step_percent == 0 || 100 % step_percent != 0 {
        return Err(Error::InvalidArgument(format!(
            "step of {step_percent}% must evenly divide 100%"
        )));
    }
    if !pulse_current_a.is_finite() || pulse_current_a <= T::zero() {
        return Err(Error::InvalidArgument(format!(
            "pulse current {pulse_current_a} A must be finite and positive"
        )));
    }
    let steps = 100 / step_percent;
    let mut rows = Vec::with_capacity(steps as usize + 1);
    for j in 0..=steps {
        let s = real::<T>(f64::from(j * step_percent) / 100.0);
        let soc = SocFraction::new(s)?;
        rows.push((s, cfg.true_model.evaluate(soc).volts()));
    }
    OcvSocTable::new(rows, Direction::Discharge)
}

/// Averages a discharge/charge pair into a pseudo-OCV table.
///
/// The output lives on the union of both SOC grids restricted to the
/// overlapping span, with each voltage the mean of the two branches
/// (linearly interpolated where one grid lacks a knot). Symmetric offsets
/// around the true curve cancel.
pub fn pseudo_ocv<T: Real>(
    discharge: &OcvSocTable<T>,
    charge: &OcvSocTable<T>,
) -> Result<OcvSocTable<T>> {
    let (d_lo, d_hi) = discharge.soc_span();
    let (c_lo, c_hi) = charge.soc_span();
    let lo = d_lo.max(c_lo);
    let hi = d_hi.min(c_hi);
    if lo >= hi {
        return Err(Error::IncompatibleTables(format!(
            "SOC spans [{d_lo}, {d_hi}] and [{c_lo}, {c_hi}] do not overlap"
        )));
    }

    let mut grid: Vec<T> = discharge
        .socs()
        .iter()
        .chain(charge.socs().iter())
        .copied()
        .filter(|&s| s >= lo && s <= hi)
        .collect();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("table SOC values are finite"));
    grid.dedup();

    let half = real::<T>(0.5);
    let rows =
        grid.into_iter().map(|s| (s, (discharge.voltage_at(s) + charge.voltage_at(s)) * half));
    OcvSocTable::new(rows, Direction::Averaged)
}

/// One SOC update from Coulomb counting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocUpdate<T> {
    pub soc: SocFraction<T>,
    /// Whether the raw update left `[0, 1]` and was clamped.
    pub saturated: bool,
}

/// Advances SOC by integrating a constant current over one step:
/// `s_prev + (current*dt/3600)/q`, clamped to `[0, 1]`.
///
/// Positive current charges the cell. The rectangular rule is exact for
/// constant current, so repeated steps accumulate no integration error
/// beyond floating-point rounding.
pub fn coulomb_count<T: Real>(
    s_prev: SocFraction<T>,
    current_a: T,
    dt_s: T,
    capacity_ah: T,
) -> Result<SocUpdate<T>> {
    if !current_a.is_finite() {
        return Err(Error::InvalidArgument(format!("current {current_a} A must be finite")));
    }
    if !dt_s.is_finite() || dt_s <= T::zero() {
        return Err(Error::InvalidArgument(format!("dt {dt_s} s must be finite and positive")));
    }
    if !capacity_ah.is_finite() || capacity_ah <= T::zero() {
        return Err(Error::InvalidArgument(format!(
            "capacity {capacity_ah} Ah must be finite and positive"
        )));
    }
    let delta = current_a * dt_s / real::<T>(3600.0) / capacity_ah;
    let (soc, saturated) = SocFraction::saturating(s_prev.value() + delta);
    Ok(SocUpdate { soc, saturated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::soc_grid;

    fn standard_model() -> OcvModel<f64> {
        OcvModel::nernst([3.7, 0.1, -0.1]).unwrap()
    }

    fn config(resistance_ohm: f64, hysteresis_v: f64) -> CellSimConfig<f64> {
        CellSimConfig::new(standard_model(), 5.0, resistance_ohm, hysteresis_v, 99).unwrap()
    }

    fn soc(s: f64) -> SocFraction<f64> {
        SocFraction::new(s).unwrap()
    }

    #[test]
    fn config_validates_cell_parameters() {
        let model = standard_model();
        assert!(CellSimConfig::new(model.clone(), 0.0, 0.0, 0.0, 1).is_err());
        assert!(CellSimConfig::new(model.clone(), 5.0, -0.1, 0.0, 1).is_err());
        assert!(CellSimConfig::new(model.clone(), 5.0, 0.0, -0.1, 1).is_err());
        assert!(CellSimConfig::new(model, 5.0, 0.0, 0.0, 1).is_ok());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = config(0.05, 0.002);
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"capacity_ah\":5.0"), "got {text}");
        let back: CellSimConfig<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_json_rejects_invalid_cells() {
        let text = r#"{"true_model":{"form":"nernst","coefficients":[3.7,0.1,-0.1]},
                       "capacity_ah":-5.0,"resistance_ohm":0.0,"hysteresis_v":0.0,"seed":1}"#;
        let parsed: std::result::Result<CellSimConfig<f64>, _> = serde_json::from_str(text);
        assert!(parsed.is_err());
    }

    #[test]
    fn zero_drop_cycle_reproduces_the_true_curve() {
        let cfg = config(0.0, 0.0);
        let cycle = simulate_low_rate_cycle(&cfg, 25.0, 600.0).unwrap();
        assert_eq!(cycle.discharge.socs(), cycle.charge.socs());
        for table in [&cycle.discharge, &cycle.charge] {
            for (s, v) in table.rows() {
                assert_eq!(v, cfg.true_model().evaluate(soc(s)).volts());
            }
        }
    }

    #[test]
    fn cycle_spans_the_full_soc_range_with_increasing_rows() {
        let cfg = config(0.05, 0.002);
        let cycle = simulate_low_rate_cycle(&cfg, 25.0, 60.0).unwrap();
        for table in [&cycle.discharge, &cycle.charge] {
            assert!(table.is_complete());
            assert!(table.socs().windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(cycle.discharge.len(), 1501, "25 h at 60 s plus the exact end point");
    }

    #[test]
    fn branch_gap_is_twice_the_drop_plus_hysteresis() {
        let cfg = config(0.05, 0.002);
        let cycle = simulate_low_rate_cycle(&cfg, 25.0, 600.0).unwrap();
        let current = cfg.capacity_ah() / 25.0;
        let expected_gap = 2.0 * (current * cfg.resistance_ohm() + cfg.hysteresis_v());
        for (d, c) in cycle.discharge.rows().zip(cycle.charge.rows()) {
            assert_eq!(d.0, c.0, "branches share the SOC grid");
            assert!((c.1 - d.1 - expected_gap).abs() < 1e-15);
        }
    }

    #[test]
    fn branch_gap_scales_with_current() {
        let cfg = config(0.05, 0.0);
        let slow = simulate_low_rate_cycle(&cfg, 25.0, 600.0).unwrap();
        let fast = simulate_low_rate_cycle(&cfg, 5.0, 600.0).unwrap();
        let gap =
            |cycle: &CycleTables<f64>| cycle.charge.voltages()[0] - cycle.discharge.voltages()[0];
        let ratio = gap(&fast) / gap(&slow);
        assert!((ratio - 5.0).abs() < 1e-12, "gap ratio {ratio} should equal the rate ratio");
    }

    #[test]
    fn cycle_rejects_bad_arguments() {
        let cfg = config(0.0, 0.0);
        assert!(simulate_low_rate_cycle(&cfg, 0.5, 60.0).is_err());
        assert!(simulate_low_rate_cycle(&cfg, 25.0, 0.0).is_err());
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = config(0.05, 0.002);
        let first = simulate_low_rate_cycle(&cfg, 25.0, 60.0).unwrap();
        let second = simulate_low_rate_cycle(&cfg, 25.0, 60.0).unwrap();
        assert_eq!(first, second);
        let g1 = simulate_gitt(&cfg, 10, 1.0).unwrap();
        let g2 = simulate_gitt(&cfg, 10, 1.0).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn gitt_step_counts_and_values() {
        let cfg = config(0.05, 0.002);
        let ten = simulate_gitt(&cfg, 10, 1.0).unwrap();
        assert_eq!(ten.len(), 11);
        assert_eq!(ten.soc_span(), (0.0, 1.0));
        for (i, (s, v)) in ten.rows().enumerate() {
            assert_eq!(s, i as f64 / 10.0);
            assert_eq!(v, cfg.true_model().evaluate(soc(s)).volts());
        }
        let five = simulate_gitt(&cfg, 5, 1.0).unwrap();
        assert_eq!(five.len(), 21);
        assert!(simulate_gitt(&cfg, 3, 1.0).is_err(), "3 does not divide 100");
        assert!(simulate_gitt(&cfg, 10, 0.0).is_err());
    }

    #[test]
    fn pseudo_ocv_cancels_symmetric_offsets_exactly() {
        let model = standard_model();
        let grid = soc_grid::<f64>(21);
        let delta = 0.015;
        let make = |sign: f64, direction| {
            OcvSocTable::new(
                grid.iter().map(|s| (s.value(), model.evaluate(*s).volts() + sign * delta)),
                direction,
            )
            .unwrap()
        };
        let averaged =
            pseudo_ocv(&make(-1.0, Direction::Discharge), &make(1.0, Direction::Charge)).unwrap();
        assert_eq!(averaged.direction(), Direction::Averaged);
        for (s, v) in averaged.rows() {
            let truth = model.evaluate(soc(s)).volts();
            assert!((v - truth).abs() < 1e-15, "s={s}: {v} vs {truth}");
        }
    }

    #[test]
    fn pseudo_ocv_of_identical_tables_is_identity() {
        let cfg = config(0.0, 0.0);
        let gitt = simulate_gitt(&cfg, 10, 1.0).unwrap();
        let averaged = pseudo_ocv(&gitt, &gitt).unwrap();
        assert_eq!(averaged.socs(), gitt.socs());
        for (a, b) in averaged.voltages().iter().zip(gitt.voltages()) {
            assert_eq!(a, b, "averaging a table with itself must be exact");
        }
    }

    #[test]
    fn pseudo_ocv_merges_disjoint_grids() {
        let d = OcvSocTable::new(vec![(0.0, 3.0), (0.5, 3.5), (1.0, 4.0)], Direction::Discharge)
            .unwrap();
        let c = OcvSocTable::new(vec![(0.0, 3.2), (0.25, 3.45), (1.0, 4.2)], Direction::Charge)
            .unwrap();
        let averaged = pseudo_ocv(&d, &c).unwrap();
        assert_eq!(averaged.socs(), &[0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn pseudo_ocv_rejects_non_overlapping_spans() {
        let low = OcvSocTable::new(vec![(0.0, 3.0), (0.4, 3.5)], Direction::Discharge).unwrap();
        let high = OcvSocTable::new(vec![(0.6, 3.7), (1.0, 4.0)], Direction::Charge).unwrap();
        assert!(matches!(pseudo_ocv(&low, &high), Err(Error::IncompatibleTables(_))));
    }

    #[test]
    fn end_to_end_pseudo_ocv_matches_the_true_model() {
        let cfg = config(0.05, 0.002);
        let cycle = simulate_low_rate_cycle(&cfg, 25.0, 60.0).unwrap();
        let averaged = pseudo_ocv(&cycle.discharge, &cycle.charge).unwrap();
        for (s, v) in averaged.rows() {
            let truth = cfg.true_model().evaluate(soc(s)).volts();
            assert!((v - truth).abs() < 1e-12, "s={s}: |{v} - {truth}| >= 1e-12");
        }
    }

    #[test]
    fn coulomb_count_arithmetic() {
        let half = coulomb_count(soc(0.5), 0.0, 3600.0, 2.0).unwrap();
        assert_eq!(half.soc.value(), 0.5);
        assert!(!half.saturated);
        let step = coulomb_count(soc(0.0), 1.0, 3600.0, 2.0).unwrap();
        assert_eq!(step.soc.value(), 0.5);
        let drained = coulomb_count(soc(0.25), -2.0, 3600.0, 2.0).unwrap();
        assert_eq!(drained.soc.value(), 0.0);
        assert!(drained.saturated);
    }

    #[test]
    fn coulomb_count_full_charge_in_25_hourly_steps_is_exact() {
        for capacity in [1.0, 2.0, 3.0, 5.0] {
            let current = capacity / 25.0;
            let mut state = soc(0.0);
            for _ in 0..25 {
                state = coulomb_count(state, current, 3600.0, capacity).unwrap().soc;
            }
            assert_eq!(state.value(), 1.0, "capacity {capacity} Ah must land exactly on full");
        }
    }

    #[test]
    fn coulomb_count_rejects_bad_arguments() {
        assert!(coulomb_count(soc(0.5), f64::NAN, 1.0, 2.0).is_err());
        assert!(coulomb_count(soc(0.5), 1.0, 0.0, 2.0).is_err());
        assert!(coulomb_count(soc(0.5), 1.0, 1.0, 0.0).is_err());
    }
}
