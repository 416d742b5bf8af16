//! The full bound panel for one model.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hcrb::{self, HcrbOptions};
use crate::info::{self, Povm};
use crate::linalg::RMatrix;
use crate::model::QuantumModel;

/// Column order of sweep CSV output.
pub const CSV_HEADER: &str =
    "param_name,param_value,C_H,C_S,C_R,C_classical,D_fro,reldiff_SLD,reldiff_classical,gap,status,iterations,wall_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub model: serde_json::Value,
    pub theta: Vec<f64>,
    pub dim: usize,
    pub n_params: usize,
    #[serde(rename = "C_H")]
    pub c_h: f64,
    #[serde(rename = "C_S")]
    pub c_s: f64,
    /// Absent when the right logarithmic derivatives do not exist.
    #[serde(rename = "C_R")]
    pub c_r: Option<f64>,
    /// Present only when a POVM was supplied.
    #[serde(rename = "C_classical")]
    pub c_classical: Option<f64>,
    #[serde(rename = "D_frobenius")]
    pub d_frobenius: f64,
    /// `1 - C_S / C_H`.
    pub reldiff_sld: f64,
    /// `1 - C_H / C_classical`.
    pub reldiff_classical: Option<f64>,
    pub gap: f64,
    pub status: String,
    pub iterations: usize,
    pub wall_ms: f64,
}

impl BoundsReport {
    /// Broken panel invariants; empty when `C_H >= max(C_S, C_R) - 1e-6` and `C_classical >= C_H - 1e-6`.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let lower = self.c_s.max(self.c_r.unwrap_or(0.0));
        if self.c_h < lower - 1e-6 * lower.abs().max(1.0) {
            out.push(format!("C_H = {} below max(C_S, C_R) = {}", self.c_h, lower));
        }
        if let Some(cc) = self.c_classical {
            if cc < self.c_h - 1e-6 * self.c_h.abs().max(1.0) {
                out.push(format!("C_classical = {cc} below C_H = {}", self.c_h));
            }
        }
        out
    }

    /// One sweep CSV row.
    pub fn csv_row(&self, param_name: &str, param_value: f64) -> String {
        use crate::json::csv_f64;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            param_name,
            csv_f64(Some(param_value)),
            csv_f64(Some(self.c_h)),
            csv_f64(Some(self.c_s)),
            csv_f64(self.c_r),
            csv_f64(self.c_classical),
            csv_f64(Some(self.d_frobenius)),
            csv_f64(Some(self.reldiff_sld)),
            csv_f64(self.reldiff_classical),
            csv_f64(Some(self.gap)),
            self.status,
            self.iterations,
            format!("{:.3}", self.wall_ms)
        )
    }
}

/// CSV row for a grid point whose evaluation failed.
pub fn failed_csv_row(param_name: &str, param_value: f64, err: &Error) -> String {
    format!(
        "{},{},,,,,,,,,{},0,",
        param_name,
        crate::json::csv_f64(Some(param_value)),
        error_status(err)
    )
}

/// Short machine-readable name of an error.
pub fn error_status(err: &Error) -> &'static str {
    match err {
        Error::NotHermitian { .. } => "not_hermitian",
        Error::EigSolverFailure => "eig_solver_failure",
        Error::Parse(_) => "parse_error",
        Error::InvariantViolation(_) => "invariant_violation",
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::BlockMismatch { .. } => "block_mismatch",
        Error::NotPsd { .. } => "not_psd",
        Error::DerivativeOutsideModel { .. } => "derivative_outside_model",
        Error::SingularModel(_) => "singular_model",
        Error::RldUnsupported => "rld_unsupported",
        Error::IllConditionedOutcome { .. } => "ill_conditioned_outcome",
        Error::SolverFailure(_) => "solver_failure",
        Error::GapTooLarge { .. } => "gap_too_large",
        Error::OddPhotonNumber(_) => "odd_photon_number",
        Error::BoundaryTransmissivity(_) => "boundary_transmissivity",
        Error::AllRestartsFailed => "all_restarts_failed",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::Io(_) => "io_error",
    }
}

/// Evaluate `C_H`, `C_S`, `C_R`, the weak-commutativity norm and optionally the classical
/// bound of `povm`, all with weight `model.weight`.
pub fn compute_report(
    model: &QuantumModel,
    descriptor: serde_json::Value,
    povm: Option<&Povm>,
    options: &HcrbOptions,
) -> Result<BoundsReport> {
    let start = Instant::now();
    let prepared = hcrb::prepare(model, options)?;
    let weight: &RMatrix = &model.weight;
    let c_s = info::sld_bound(&prepared.slds, weight)?;
    let rlds = info::compute_rlds(model, &prepared.spectral);
    let c_r = match info::rld_bound(&rlds, weight) {
        Ok(v) => Some(v),
        Err(Error::RldUnsupported) | Err(Error::SingularModel(_)) => None,
        Err(e) => return Err(e),
    };
    let (_, d_frobenius) = info::weak_commutativity(&prepared.slds);
    let c_classical = match povm {
        Some(p) => {
            let fim = info::classical_fim(model, p, info::DEFAULT_P_FLOOR)?;
            Some(info::classical_bound(&fim, weight)?)
        }
        None => None,
    };
    let result = hcrb::solve_prepared(model, &prepared, weight, options)?;
    let c_h = result.value;
    let report = BoundsReport {
        model: descriptor,
        theta: model.theta.clone(),
        dim: model.dim(),
        n_params: model.n_params(),
        c_h,
        c_s,
        c_r,
        c_classical,
        d_frobenius,
        reldiff_sld: 1.0 - c_s / c_h,
        reldiff_classical: c_classical.map(|cc| 1.0 - c_h / cc),
        gap: result.gap,
        status: result.status.as_str().to_string(),
        iterations: result.iterations,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    let v = report.violations();
    if v.is_empty() {
        Ok(report)
    } else {
        Err(Error::InvariantViolation(v))
    }
}
