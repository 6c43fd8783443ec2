//! Energy-trace CSV: one header row, then one row per state (row 0 is the
//! initial state).

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{check_trace, EnergyViolation};
use crate::error::HarnessError;
use crate::schemes::{SchemeKind, StepReport};
use crate::zero_factor::Branch;

pub const TRACE_COLUMNS: [&str; 12] = [
    "step",
    "t",
    "E_orig",
    "E_mod",
    "R",
    "F_int",
    "p_value",
    "s_value",
    "lambda0",
    "kappa",
    "dissipation",
    "branch",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    #[serde(rename = "E_orig")]
    pub e_orig: f64,
    #[serde(rename = "E_mod")]
    pub e_mod: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "F_int")]
    pub f_int: f64,
    pub p_value: f64,
    pub s_value: f64,
    pub lambda0: f64,
    pub kappa: f64,
    pub dissipation: f64,
    pub branch: String,
}

impl From<&StepReport> for TraceRow {
    fn from(r: &StepReport) -> Self {
        Self {
            step: r.step,
            t: r.t,
            e_orig: r.e_orig,
            e_mod: r.e_mod,
            r: r.r,
            f_int: r.f_int,
            p_value: r.p_value,
            s_value: r.s_value,
            lambda0: r.lambda0,
            kappa: r.kappa,
            dissipation: r.dissipation,
            branch: r.branch.to_string(),
        }
    }
}

impl TraceRow {
    /// Rebuilds the fields of a report that the energy checks use. The first
    /// step of an `rzf_bdf2` trace is its Crank-Nicolson bootstrap.
    pub fn to_report(&self, kind: SchemeKind) -> Result<StepReport, HarnessError> {
        let branch: Branch = self.branch.parse().map_err(HarnessError::Config)?;
        Ok(StepReport {
            step: self.step,
            t: self.t,
            e_orig: self.e_orig,
            e_mod: self.e_mod,
            r: self.r,
            f_int: self.f_int,
            p_value: self.p_value,
            s_value: self.s_value,
            lambda0: self.lambda0,
            kappa: self.kappa,
            dissipation: self.dissipation,
            branch,
            r_tilde: f64::NAN,
            residual: f64::NAN,
            bootstrap: kind == SchemeKind::RzfBdf2 && self.step == 1,
        })
    }
}

pub struct TraceWriter {
    inner: csv::Writer<File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        let file = File::create(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self {
            inner: csv::Writer::from_writer(file),
        })
    }

    pub fn write(&mut self, report: &StepReport) -> Result<(), HarnessError> {
        self.inner.serialize(TraceRow::from(report))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), HarnessError> {
        self.inner.flush().map_err(|source| HarnessError::Io {
            path: "trace".into(),
            source,
        })
    }
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, HarnessError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(TRACE_COLUMNS.iter().copied()) {
        return Err(HarnessError::Config(format!(
            "{}: columns {:?} differ from {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>(),
            TRACE_COLUMNS
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(HarnessError::from))
        .collect()
}

/// Re-checks every step's energy law from logged quantities alone.
pub fn replay_trace(
    kind: SchemeKind,
    rows: &[TraceRow],
    rtol: f64,
) -> Result<Result<(), EnergyViolation>, HarnessError> {
    let reports = rows
        .iter()
        .map(|r| r.to_report(kind))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(check_trace(kind, &reports, rtol))
}
