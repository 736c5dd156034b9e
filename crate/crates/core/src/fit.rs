//! Ordinary least-squares fitting of OCV models to characterization tables,
//! with residual statistics binned over SOC.
//!
//! The Nernst form is linear in its coefficients on the regressors
//! `[1, ln(s), ln(1 - s)]`; polynomials use the Vandermonde regressors
//! `[1, s, ..., s^d]`. SOC values are clamped to the default model domain
//! before taking logarithms or powers, so tables that include the exact
//! endpoints fit cleanly and the fitted model reproduces its own regressors.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::model::{default_epsilon, ModelForm, OcvModel, SocFraction};
use crate::real::{real, Real};
use crate::stats::Welford;
use crate::table::OcvSocTable;

/// A fitted model plus goodness-of-fit diagnostics.
///
/// The binned residual mean and standard deviation form an empirical
/// per-SOC profile of the curve-fit error, directly usable as the
/// curve-fit channel of an error budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct FitReport<T: Real> {
    pub model: OcvModel<T>,
    /// Standard error of each fitted coefficient.
    pub coefficient_sd: Vec<T>,
    /// `bins + 1` uniform edges covering `[0, 1]`.
    pub bin_edges: Vec<T>,
    /// Mean residual (data minus fit) per bin; 0 for empty bins.
    pub residual_mean_by_bin: Vec<T>,
    /// Residual standard deviation per bin; 0 for bins with fewer than two
    /// rows, which the matching count exposes.
    pub residual_sd_by_bin: Vec<T>,
    /// Rows that landed in each bin.
    pub bin_counts: Vec<usize>,
    /// Root-mean-square residual over the whole table.
    pub rmse: T,
}

/// Fits `form` to a table by ordinary least squares.
///
/// Requires at least as many rows as coefficients and `bins >= 1`. Fails
/// with `DegenerateFit` when the regressors are numerically rank deficient
/// (for example when clamping collapses distinct SOC values onto the same
/// regressor row and too few distinct rows remain).
pub fn fit<T: Real>(table: &OcvSocTable<T>, form: ModelForm, bins: usize) -> Result<FitReport<T>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("need at least one residual bin".into()));
    }
    let p = form.coefficient_count();
    let n = table.len();
    if n < p {
        return Err(Error::InsufficientData { needed: p, got: n });
    }

    let eps = default_epsilon::<T>();
    let hi = T::one() - eps;
    let rows: Vec<Vec<T>> = table
        .socs()
        .iter()
        .map(|&s| {
            let sc = s.max(eps).min(hi);
            regressor_row(form, sc)
        })
        .collect();
    let solution = lstsq(&rows, table.voltages())?;
    let model = OcvModel::new(form, solution.coefficients)?;

    let mut rss = T::zero();
    let mut bin_stats = vec![Welford::<T>::default(); bins];
    let bins_t = real::<T>(bins as f64);
    for (s, v) in table.rows() {
        let fitted = model.evaluate(SocFraction::new(s)?).volts();
        let residual = v - fitted;
        rss += residual * residual;
        let idx = (s * bins_t)
            .floor()
            .to_usize()
            .expect("bin index is a small non-negative integer")
            .min(bins - 1);
        bin_stats[idx].push(residual);
    }
    let rmse = (rss / real(n as f64)).sqrt();
    let residual_variance = if n > p { rss / real((n - p) as f64) } else { T::zero() };
    let coefficient_sd = solution
        .covariance_unscaled
        .iter()
        .enumerate()
        .map(|(j, row)| (residual_variance * row[j]).max(T::zero()).sqrt())
        .collect();

    let bin_edges = (0..=bins).map(|j| real::<T>(j as f64 / bins as f64)).collect();
    Ok(FitReport {
        model,
        coefficient_sd,
        bin_edges,
        residual_mean_by_bin: bin_stats.iter().map(Welford::mean).collect(),
        residual_sd_by_bin: bin_stats.iter().map(Welford::sd).collect(),
        bin_counts: bin_stats.iter().map(|w| w.count).collect(),
        rmse,
    })
}

fn regressor_row<T: Real>(form: ModelForm, sc: T) -> Vec<T> {
    match form {
        ModelForm::Nernst => vec![T::one(), sc.ln(), (T::one() - sc).ln()],
        ModelForm::Polynomial(degree) => {
            let mut row = Vec::with_capacity(degree + 1);
            let mut power = T::one();
            for _ in 0..=degree {
                row.push(power);
                power *= sc;
            }
            row
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::soc_grid;
    use crate::table::Direction;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn standard_model() -> OcvModel<f64> {
        OcvModel::nernst([3.7, 0.1, -0.1]).unwrap()
    }

    fn evaluation_table(model: &OcvModel<f64>, n: usize) -> OcvSocTable<f64> {
        OcvSocTable::new(
            soc_grid::<f64>(n).into_iter().map(|s| (s.value(), model.evaluate(s).volts())),
            Direction::Averaged,
        )
        .unwrap()
    }

    #[test]
    fn noiseless_nernst_recovery_is_machine_precision() {
        let truth = standard_model();
        let table = evaluation_table(&truth, 1000);
        let report = fit(&table, ModelForm::Nernst, 20).unwrap();
        for (fitted, expected) in report.model.coefficients().iter().zip(truth.coefficients()) {
            assert!((fitted - expected).abs() < 1e-9, "coefficient {fitted} vs {expected}");
        }
        assert!(report.rmse < 1e-10, "rmse {} should be numerical noise", report.rmse);
    }

    #[test]
    fn noisy_nernst_recovery_within_three_standard_errors() {
        let truth = standard_model();
        let mut rng = ChaCha12Rng::seed_from_u64(0xA11CE);
        let grid = soc_grid::<f64>(1000);
        let sigma = 0.005;
        let table = OcvSocTable::new(
            grid.iter().map(|s| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (s.value(), truth.evaluate(*s).volts() + sigma * z)
            }),
            Direction::Averaged,
        )
        .unwrap();
        let report = fit(&table, ModelForm::Nernst, 20).unwrap();
        for ((fitted, expected), sd) in
            report.model.coefficients().iter().zip(truth.coefficients()).zip(&report.coefficient_sd)
        {
            let error = (fitted - expected).abs();
            assert!(
                error <= 3.0 * sd,
                "coefficient error {error} exceeds 3 standard errors ({sd})"
            );
        }
        assert!((report.rmse - sigma).abs() / sigma < 0.1, "rmse should approach sigma");
    }

    #[test]
    fn polynomial_rmse_shrinks_as_degree_grows() {
        // Unequal log weights keep the curve asymmetric about s = 0.5, so
        // even-powered regressors contribute and every degree must improve.
        let truth = OcvModel::nernst([3.7, 0.08, -0.13]).unwrap();
        let table = evaluation_table(&truth, 500);
        let mut previous = f64::INFINITY;
        for degree in 1..=5 {
            let report = fit(&table, ModelForm::Polynomial(degree), 20).unwrap();
            assert!(
                report.rmse < previous,
                "degree {degree}: rmse {} did not improve on {previous}",
                report.rmse
            );
            previous = report.rmse;
        }
    }

    #[test]
    fn fitting_a_fitted_model_is_idempotent() {
        let source = evaluation_table(&standard_model(), 400);
        let first = fit(&source, ModelForm::Polynomial(3), 10).unwrap();
        let refit_table = OcvSocTable::new(
            source
                .socs()
                .iter()
                .map(|&s| (s, first.model.evaluate(SocFraction::new(s).unwrap()).volts())),
            Direction::Averaged,
        )
        .unwrap();
        let second = fit(&refit_table, ModelForm::Polynomial(3), 10).unwrap();
        for (a, b) in first.model.coefficients().iter().zip(second.model.coefficients()) {
            assert!((a - b).abs() < 1e-9, "refit moved a coefficient: {a} vs {b}");
        }
    }

    #[test]
    fn report_bins_cover_the_unit_interval() {
        let table = evaluation_table(&standard_model(), 100);
        let report = fit(&table, ModelForm::Nernst, 20).unwrap();
        assert_eq!(report.bin_edges.len(), 21);
        assert_eq!(report.bin_edges[0], 0.0);
        assert_eq!(report.bin_edges[20], 1.0);
        assert_eq!(report.residual_mean_by_bin.len(), 20);
        assert_eq!(report.residual_sd_by_bin.len(), 20);
        assert_eq!(report.bin_counts.iter().sum::<usize>(), table.len());
        assert!(report.residual_sd_by_bin.iter().all(|sd| *sd >= 0.0));
    }

    #[test]
    fn sparse_tables_leave_empty_bins_flagged() {
        // Two tight clusters leave most of the 10 bins empty.
        let model = standard_model();
        let rows: Vec<(f64, f64)> = [0.10, 0.101, 0.102, 0.9, 0.901, 0.902]
            .iter()
            .map(|&s| (s, model.evaluate(SocFraction::new(s).unwrap()).volts()))
            .collect();
        let table = OcvSocTable::new(rows, Direction::Averaged).unwrap();
        let report = fit(&table, ModelForm::Nernst, 10).unwrap();
        let empty = report.bin_counts.iter().filter(|&&c| c == 0).count();
        assert_eq!(empty, 8);
        for (count, sd) in report.bin_counts.iter().zip(&report.residual_sd_by_bin) {
            if *count == 0 {
                assert_eq!(*sd, 0.0, "empty bins report zero spread");
            }
        }
    }

    #[test]
    fn rejects_short_tables_and_bad_bin_counts() {
        let model = standard_model();
        let table = OcvSocTable::new(
            vec![(0.2, model.evaluate(SocFraction::new(0.2).unwrap()).volts()), (0.8, 3.8)],
            Direction::Averaged,
        )
        .unwrap();
        assert!(matches!(
            fit(&table, ModelForm::Nernst, 20),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        ));
        let longer = evaluation_table(&model, 10);
        assert!(fit(&longer, ModelForm::Nernst, 0).is_err());
    }

    #[test]
    fn clamp_collapsed_rows_can_degenerate_the_fit() {
        // Three rows, but the two below epsilon collapse onto identical
        // regressors, leaving rank 2 for three Nernst coefficients.
        let rows = vec![(0.0, 3.0), (1e-9, 3.0), (0.5, 3.7)];
        let table = OcvSocTable::new(rows, Direction::Averaged).unwrap();
        assert!(matches!(fit(&table, ModelForm::Nernst, 5), Err(Error::DegenerateFit(_))));
    }
}
