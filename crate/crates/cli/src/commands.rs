use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ocvu_core::{
    derive_seed, estimate_capacity, fit, lookup_soc, nlc_curve, pseudo_ocv, simulate_gitt,
    simulate_low_rate_cycle, soc_grid, validate_budget, validate_capacity, validate_soc_lemma,
    validate_soc_with_budget, write_csv_summary, write_jsonl, CellSimConfig, Direction, Error,
    ErrorBudget, ErrorCategory, ErrorSource, McReport, ModelForm, OcvModel, OcvObservation,
    OcvSocTable, SocFraction, SourceKind, Voltage,
};

/// Master seed when neither `--seed` nor `OCVU_SEED` is given.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "ocvu", version, about = "OCV-SOC estimation with propagated uncertainty")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic characterization tables from a cell config.
    Simulate {
        /// Cell config JSON (true model, capacity, resistance, hysteresis, seed).
        #[arg(long)]
        config: PathBuf,
        /// Cycle at C divided by this factor.
        #[arg(long, default_value_t = 25.0)]
        c_rate_divisor: f64,
        /// Sampling period of the cycle in seconds.
        #[arg(long, default_value_t = 60.0)]
        sample_period_s: f64,
        /// Also emit a GITT table with this SOC step in percent.
        #[arg(long)]
        gitt_step: Option<u32>,
        /// GITT pulse current in amps.
        #[arg(long, default_value_t = 0.5)]
        pulse_current_a: f64,
        /// Directory for discharge.csv, charge.csv, pseudo.csv (and gitt.csv).
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an OCV model to a soc,ocv_volts CSV table.
    Fit {
        /// Input table.
        #[arg(long)]
        input: PathBuf,
        /// Model family.
        #[arg(long, value_enum)]
        form: FormArg,
        /// Polynomial degree (poly form only).
        #[arg(long, default_value_t = 5)]
        degree: usize,
        /// Residual histogram bins over [0, 1].
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Output model JSON.
        #[arg(long)]
        out: PathBuf,
        /// Optional full fit report JSON (residual bins, coefficient sds).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Look up SOC from one OCV reading, with propagated variance.
    Soc {
        /// Model JSON.
        #[arg(long)]
        model: PathBuf,
        /// Observed OCV in volts.
        #[arg(long)]
        ocv: f64,
        /// OCV noise standard deviation in millivolts.
        #[arg(long, default_value_t = 0.0)]
        sigma_e_mv: f64,
        /// Optional CSV out (header s_hat,variance,nlc).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate capacity from OCV readings before and after a transfer.
    Capacity {
        /// Model JSON.
        #[arg(long)]
        model: PathBuf,
        /// OCV before the transfer, in volts.
        #[arg(long)]
        ocv_start: f64,
        /// OCV after the transfer, in volts.
        #[arg(long)]
        ocv_end: f64,
        /// Magnitude of the net charge moved, in amp-hours.
        #[arg(long)]
        coulombs_ah: f64,
        /// OCV noise standard deviation in millivolts.
        #[arg(long, default_value_t = 0.0)]
        sigma_e_mv: f64,
        /// Optional CSV out (header q_hat_ah,q_inv,variance_q).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the noise-amplification coefficient (1/f'(s))^2.
    Nlc {
        /// Model JSON.
        #[arg(long)]
        model: PathBuf,
        /// Number of evenly spaced grid points.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Output CSV (header soc,nlc).
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate an error budget's combined sd and bias over SOC.
    Budget {
        /// Budget JSON ({"sources": [...]}).
        #[arg(long)]
        budget: PathBuf,
        /// Number of evenly spaced grid points.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Output CSV (header soc,combined_sd,combined_bias).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Monte-Carlo suite validating the closed-form statistics.
    Validate {
        /// Which checks to run.
        #[arg(long, value_enum, default_value_t = SuiteArg::Full)]
        suite: SuiteArg,
        /// Master seed; falls back to OCVU_SEED, then 42.
        #[arg(long)]
        seed: Option<u64>,
        /// Override every check's sample count (mainly for smoke runs).
        #[arg(long)]
        n_samples: Option<u64>,
        /// JSONL report path; a .csv summary lands next to it.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Nernst,
    Poly,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Quick,
    Full,
}

impl SuiteArg {
    fn name(self) -> &'static str {
        match self {
            SuiteArg::Quick => "quick",
            SuiteArg::Full => "full",
        }
    }
}

pub fn run(cli: Cli) -> ExitCode {
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err.category() {
                ErrorCategory::Parse => ExitCode::from(2),
                ErrorCategory::Domain => ExitCode::from(3),
                ErrorCategory::Io => ExitCode::from(4),
            }
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Simulate {
            config,
            c_rate_divisor,
            sample_period_s,
            gitt_step,
            pulse_current_a,
            out,
        } => simulate(&config, c_rate_divisor, sample_period_s, gitt_step, pulse_current_a, &out),
        Command::Fit { input, form, degree, bins, out, report } => {
            run_fit(&input, form, degree, bins, &out, report.as_deref())
        }
        Command::Soc { model, ocv, sigma_e_mv, out } => {
            run_soc(&model, ocv, sigma_e_mv, out.as_deref())
        }
        Command::Capacity { model, ocv_start, ocv_end, coulombs_ah, sigma_e_mv, out } => {
            run_capacity(&model, ocv_start, ocv_end, coulombs_ah, sigma_e_mv, out.as_deref())
        }
        Command::Nlc { model, grid, out } => run_nlc(&model, grid, &out),
        Command::Budget { budget, grid, out } => run_budget(&budget, grid, &out),
        Command::Validate { suite, seed, n_samples, out } => validate(suite, seed, n_samples, &out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), Error> {
    let mut writer = create(path)?;
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

fn simulate(
    config: &Path,
    c_rate_divisor: f64,
    sample_period_s: f64,
    gitt_step: Option<u32>,
    pulse_current_a: f64,
    out: &Path,
) -> Result<ExitCode, Error> {
    let cfg: CellSimConfig = read_json(config)?;
    let cycle = simulate_low_rate_cycle(&cfg, c_rate_divisor, sample_period_s)?;
    let pseudo = pseudo_ocv(&cycle.discharge, &cycle.charge)?;
    fs::create_dir_all(out)?;

    for (name, table) in [
        ("discharge.csv", &cycle.discharge),
        ("charge.csv", &cycle.charge),
        ("pseudo.csv", &pseudo),
    ] {
        let mut writer = create(&out.join(name))?;
        table.write_csv(&mut writer)?;
        writer.flush()?;
    }
    let mut gitt_rows = 0;
    if let Some(step) = gitt_step {
        let gitt = simulate_gitt(&cfg, step, pulse_current_a)?;
        gitt_rows = gitt.len();
        let mut writer = create(&out.join("gitt.csv"))?;
        gitt.write_csv(&mut writer)?;
        writer.flush()?;
    }
    println!(
        "discharge_rows={} charge_rows={} pseudo_rows={} gitt_rows={} out={}",
        cycle.discharge.len(),
        cycle.charge.len(),
        pseudo.len(),
        gitt_rows,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run_fit(
    input: &Path,
    form: FormArg,
    degree: usize,
    bins: usize,
    out: &Path,
    report_path: Option<&Path>,
) -> Result<ExitCode, Error> {
    let form = match form {
        FormArg::Nernst => ModelForm::Nernst,
        FormArg::Poly => {
            if !(1..=12).contains(&degree) {
                return Err(Error::InvalidArgument(format!(
                    "polynomial degree {degree} must lie in 1..=12"
                )));
            }
            ModelForm::Polynomial(degree)
        }
    };
    let table = OcvSocTable::read_csv(BufReader::new(File::open(input)?), Direction::Averaged)?;
    let report = fit(&table, form, bins)?;
    write_json(&report.model, out)?;
    if let Some(path) = report_path {
        write_json(&report, path)?;
    }
    println!("rows={} rmse={} out={}", table.len(), report.rmse, out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_soc(
    model_path: &Path,
    ocv: f64,
    sigma_e_mv: f64,
    out: Option<&Path>,
) -> Result<ExitCode, Error> {
    let model: OcvModel = read_json(model_path)?;
    let obs = OcvObservation::new(Voltage::new(ocv)?, sigma_e_mv / 1000.0)?;
    let estimate = lookup_soc(&model, &obs)?;
    if let Some(path) = out {
        let mut writer = create(path)?;
        writeln!(writer, "s_hat,variance,nlc")?;
        writeln!(writer, "{},{},{}", estimate.soc.value(), estimate.variance, estimate.nlc)?;
        writer.flush()?;
    }
    println!(
        "s_hat={} sd={} nlc={} saturated={}",
        estimate.soc.value(),
        estimate.variance.sqrt(),
        estimate.nlc,
        estimate.saturated
    );
    Ok(ExitCode::SUCCESS)
}

fn run_capacity(
    model_path: &Path,
    ocv_start: f64,
    ocv_end: f64,
    coulombs_ah: f64,
    sigma_e_mv: f64,
    out: Option<&Path>,
) -> Result<ExitCode, Error> {
    let model: OcvModel = read_json(model_path)?;
    let sigma_v = sigma_e_mv / 1000.0;
    let obs_start = OcvObservation::new(Voltage::new(ocv_start)?, sigma_v)?;
    let obs_end = OcvObservation::new(Voltage::new(ocv_end)?, sigma_v)?;
    let estimate = estimate_capacity(&model, &obs_start, &obs_end, coulombs_ah)?;
    if let Some(path) = out {
        let mut writer = create(path)?;
        writeln!(writer, "q_hat_ah,q_inv,variance_q")?;
        writeln!(writer, "{},{},{}", estimate.q_ah, estimate.q_inv, estimate.variance)?;
        writer.flush()?;
    }
    println!(
        "q_hat_ah={} q_inv={} sd_ah={} saturated={}",
        estimate.q_ah,
        estimate.q_inv,
        estimate.variance.sqrt(),
        estimate.saturated
    );
    Ok(ExitCode::SUCCESS)
}

fn run_nlc(model_path: &Path, grid: usize, out: &Path) -> Result<ExitCode, Error> {
    if grid < 2 {
        return Err(Error::InvalidArgument(format!("grid {grid} must be at least 2")));
    }
    let model: OcvModel = read_json(model_path)?;
    let curve = nlc_curve(&model, &soc_grid(grid));
    let mut writer = create(out)?;
    writeln!(writer, "soc,nlc")?;
    for (s, nlc) in &curve {
        writeln!(writer, "{s},{nlc}")?;
    }
    writer.flush()?;
    println!("rows={} out={}", curve.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_budget(budget_path: &Path, grid: usize, out: &Path) -> Result<ExitCode, Error> {
    if grid < 2 {
        return Err(Error::InvalidArgument(format!("grid {grid} must be at least 2")));
    }
    let budget: ErrorBudget = read_json(budget_path)?;
    let grid = soc_grid::<f64>(grid);
    let mut writer = create(out)?;
    writeln!(writer, "soc,combined_sd,combined_bias")?;
    for s in &grid {
        writeln!(writer, "{},{},{}", s.value(), budget.combined_sd(*s), budget.combined_bias(*s))?;
    }
    writer.flush()?;
    println!("sources={} rows={} out={}", budget.sources().len(), grid.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, Error> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("OCVU_SEED") {
        Ok(text) => text.trim().parse().map_err(|_| {
            Error::Parse(format!("OCVU_SEED must be a 64-bit unsigned integer, got {text:?}"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_SEED),
        Err(std::env::VarError::NotUnicode(_)) => {
            Err(Error::Parse("OCVU_SEED is not valid UTF-8".into()))
        }
    }
}

/// Bench Nernst curve the self-validation suite runs against.
fn reference_model() -> OcvModel {
    OcvModel::nernst([3.7, 0.1, -0.1]).expect("reference coefficients are valid")
}

/// Six-channel budget with plausible magnitudes for a bench cell.
fn reference_budget() -> ErrorBudget {
    ErrorBudget::new(vec![
        ErrorSource::constant(SourceKind::CellToCell, 0.0, 0.005).expect("valid source"),
        ErrorSource::new(
            SourceKind::Temperature,
            vec![0.0, 0.5, 1.0],
            vec![0.002, 0.0, -0.002],
            vec![0.003, 0.002, 0.003],
        )
        .expect("valid source"),
        ErrorSource::new(
            SourceKind::Aging,
            vec![0.0, 1.0],
            vec![-0.003, -0.001],
            vec![0.004, 0.004],
        )
        .expect("valid source"),
        ErrorSource::constant(SourceKind::CycleRate, 0.001, 0.002).expect("valid source"),
        ErrorSource::constant(SourceKind::CurveFit, 0.0, 0.001).expect("valid source"),
        ErrorSource::constant(SourceKind::MeasEst, 0.0, 0.002).expect("valid source"),
    ])
    .expect("reference budget is valid")
}

fn validate(
    suite: SuiteArg,
    seed: Option<u64>,
    n_samples: Option<u64>,
    out: &Path,
) -> Result<ExitCode, Error> {
    let master = resolve_seed(seed)?;
    let reports = match suite {
        SuiteArg::Quick => quick_suite(master, n_samples)?,
        SuiteArg::Full => full_suite(master, n_samples)?,
    };

    let jsonl_path = out;
    let csv_path = jsonl_path.with_extension("csv");
    let mut writer = create(jsonl_path)?;
    write_jsonl(&reports, &mut writer)?;
    writer.flush()?;
    let mut writer = create(&csv_path)?;
    write_csv_summary(&reports, &mut writer)?;
    writer.flush()?;

    let enforced = reports.iter().filter(|r| r.enforced);
    let passed = enforced.clone().filter(|r| r.passed && r.reliable).count();
    let failed = enforced.clone().filter(|r| !r.passed).count();
    let unreliable = enforced.filter(|r| !r.reliable).count();
    let gate_ok = failed == 0 && unreliable == 0;
    println!(
        "suite={} seed={master} checks={} passed={passed} failed={failed} unreliable={unreliable} gate={} out={} summary={}",
        suite.name(),
        reports.len(),
        if gate_ok { "pass" } else { "fail" },
        jsonl_path.display(),
        csv_path.display()
    );
    Ok(if gate_ok { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn quick_suite(master: u64, n_override: Option<u64>) -> Result<Vec<McReport>, Error> {
    let model = reference_model();
    let n = |default: u64| n_override.unwrap_or(default);
    let mut reports = Vec::new();

    let (mean, variance) = validate_soc_lemma(
        &model,
        SocFraction::new(0.5)?,
        0.005,
        n(100_000),
        derive_seed(master, 0),
    )?;
    reports.extend([mean, variance]);
    let (mean, variance) = validate_capacity(
        &model,
        SocFraction::new(0.9)?,
        SocFraction::new(0.4)?,
        5.0,
        0.005,
        n(20_000),
        derive_seed(master, 1),
    )?;
    reports.extend([mean, variance]);
    let budget = ErrorBudget::new(vec![
        ErrorSource::constant(SourceKind::CellToCell, 0.0, 0.003).expect("valid source"),
        ErrorSource::constant(SourceKind::MeasEst, 0.0, 0.004).expect("valid source"),
    ])
    .expect("two-channel budget is valid");
    reports.push(validate_budget(
        &budget,
        SocFraction::new(0.5)?,
        n(100_000),
        derive_seed(master, 2),
    )?);
    Ok(reports)
}

fn full_suite(master: u64, n_override: Option<u64>) -> Result<Vec<McReport>, Error> {
    let model = reference_model();
    let n = |default: u64| n_override.unwrap_or(default);
    let mut reports = Vec::new();
    let mut stream = 0u64;
    let mut next_seed = || {
        let seed = derive_seed(master, stream);
        stream += 1;
        seed
    };

    // First-order SOC statistics across the usable SOC range.
    for s in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let (mean, variance) =
            validate_soc_lemma(&model, SocFraction::new(s)?, 0.005, n(1_000_000), next_seed())?;
        reports.extend([mean, variance]);
    }

    // Degenerate noise level: the estimate must collapse onto the truth.
    let (mean, variance) =
        validate_soc_lemma(&model, SocFraction::new(0.5)?, 0.0, n(10_000), next_seed())?;
    reports.extend([mean, variance]);

    // Two-point capacity statistics on a 0.5-wide window.
    let (mean, variance) = validate_capacity(
        &model,
        SocFraction::new(0.9)?,
        SocFraction::new(0.4)?,
        5.0,
        0.005,
        n(100_000),
        next_seed(),
    )?;
    reports.extend([mean, variance]);

    // Budget combination: quadrature of independent channels.
    let pythagorean = ErrorBudget::new(vec![
        ErrorSource::constant(SourceKind::CellToCell, 0.0, 0.003).expect("valid source"),
        ErrorSource::constant(SourceKind::MeasEst, 0.0, 0.004).expect("valid source"),
    ])
    .expect("two-channel budget is valid");
    reports.push(validate_budget(&pythagorean, SocFraction::new(0.5)?, n(1_000_000), next_seed())?);
    let budget = reference_budget();
    for s in [0.2, 0.8] {
        reports.push(validate_budget(&budget, SocFraction::new(s)?, n(1_000_000), next_seed())?);
    }
    reports.push(validate_budget(
        &ErrorBudget::empty(),
        SocFraction::new(0.5)?,
        n(10_000),
        next_seed(),
    )?);

    // Full pipeline: budget-driven OCV error pushed through the inverse
    // lookup. The mean check documents the first-order bias propagation
    // and stays informational.
    let (mean, variance) =
        validate_soc_with_budget(&model, SocFraction::new(0.5)?, &budget, n(200_000), next_seed())?;
    reports.extend([mean.with_enforced(false), variance]);

    // Far outside the small-noise regime; reported for context only.
    for s in [0.5, 0.9] {
        let (mean, variance) =
            validate_soc_lemma(&model, SocFraction::new(s)?, 0.05, n(100_000), next_seed())?;
        reports.extend([mean.with_enforced(false), variance.with_enforced(false)]);
    }

    Ok(reports)
}
