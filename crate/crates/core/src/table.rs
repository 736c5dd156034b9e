//! Ordered `(SOC, OCV)` characterization tables with CSV import/export.

use std::io;

use crate::error::{Error, Result};
use crate::interp::lerp_sorted;
use crate::real::{real, Real};

/// Which protocol leg produced a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Charge,
    Discharge,
    /// Charge/discharge average, i.e. a pseudo-OCV curve.
    Averaged,
}

/// A characterization table: strictly increasing SOC fractions with the
/// open-circuit (or rest) voltage recorded at each one.
#[derive(Debug, Clone, PartialEq)]
pub struct OcvSocTable<T> {
    socs: Vec<T>,
    voltages: Vec<T>,
    direction: Direction,
}

/// Column header every table CSV starts with.
pub const CSV_HEADER: [&str; 2] = ["soc", "ocv_volts"];

impl<T: Real> OcvSocTable<T> {
    /// Builds a table from `(soc, voltage)` rows.
    ///
    /// Requires at least two rows, SOC strictly increasing within `[0, 1]`,
    /// and finite voltages. Partial-span tables (not reaching 0 or 1) are
    /// allowed; use [`OcvSocTable::is_complete`] to check coverage.
    pub fn new(rows: impl IntoIterator<Item = (T, T)>, direction: Direction) -> Result<Self> {
        let mut socs = Vec::new();
        let mut voltages = Vec::new();
        for (s, v) in rows {
            if !s.is_finite() || s < T::zero() || s > T::one() {
                return Err(Error::InvalidTable(format!("SOC {s} outside [0, 1]")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidTable(format!("non-finite voltage at SOC {s}")));
            }
            if let Some(&prev) = socs.last() {
                if s <= prev {
                    return Err(Error::InvalidTable(format!(
                        "SOC must be strictly increasing, got {prev} then {s}"
                    )));
                }
            }
            socs.push(s);
            voltages.push(v);
        }
        if socs.len() < 2 {
            return Err(Error::InvalidTable(format!("need at least two rows, got {}", socs.len())));
        }
        Ok(Self { socs, voltages, direction })
    }

    pub fn len(&self) -> usize {
        self.socs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.socs.is_empty()
    }

    pub fn socs(&self) -> &[T] {
        &self.socs
    }

    pub fn voltages(&self) -> &[T] {
        &self.voltages
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Iterates rows as `(soc, voltage)` pairs.
    pub fn rows(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.socs.iter().copied().zip(self.voltages.iter().copied())
    }

    /// First and last SOC in the table.
    pub fn soc_span(&self) -> (T, T) {
        (self.socs[0], *self.socs.last().expect("tables hold >= 2 rows"))
    }

    /// Whether the table spans the full SOC range `[0, 1]`.
    pub fn is_complete(&self) -> bool {
        let (lo, hi) = self.soc_span();
        lo == T::zero() && hi == T::one()
    }

    /// Piecewise-linear voltage at `s`, clamped to the table's SOC span.
    /// Queries at stored SOC values return the stored voltage bit for bit.
    pub fn voltage_at(&self, s: T) -> T {
        lerp_sorted(&self.socs, &self.voltages, s)
    }

    /// Writes the table as CSV with header `soc,ocv_volts`.
    ///
    /// Values are printed as shortest round-trip decimals, so writing and
    /// re-reading reproduces the table exactly (for `f64` tables).
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(CSV_HEADER)?;
        for (s, v) in self.rows() {
            out.write_record([format_scalar(s), format_scalar(v)])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a table written by [`OcvSocTable::write_csv`].
    pub fn read_csv<R: io::Read>(reader: R, direction: Direction) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let headers = input.headers()?;
        if headers.len() != 2 || &headers[0] != CSV_HEADER[0] || &headers[1] != CSV_HEADER[1] {
            return Err(Error::Parse(format!(
                "expected CSV header \"soc,ocv_volts\", got \"{}\"",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for record in input.records() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::Parse(format!("expected 2 columns, got {}", record.len())));
            }
            rows.push((parse_scalar::<T>(&record[0])?, parse_scalar::<T>(&record[1])?));
        }
        Self::new(rows, direction)
    }
}

fn format_scalar<T: Real>(value: T) -> String {
    format!("{value}")
}

fn parse_scalar<T: Real>(text: &str) -> Result<T> {
    let value: f64 =
        text.trim().parse().map_err(|_| Error::Parse(format!("\"{text}\" is not a number")))?;
    Ok(real(value))
}
