//! Central finite-difference verification of analytic gradients.

use super::params::{Gradients, ParameterStore};
use crate::error::{Error, Result};

/// Denominator floor of the relative error, so that gradients that are
/// numerically zero are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(tensor, element)` where `max_rel_error` occurred.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `analytic` against `(L(θ + h) - L(θ - h)) / 2h` for every scalar
/// parameter.
pub fn check_gradients<F>(params: &ParameterStore, analytic: &Gradients, h: f64, loss: F) -> Result<GradCheckReport>
where
    F: Fn(&ParameterStore) -> Result<f64>,
{
    if analytic.tensors.len() != params.tensors.len() {
        return Err(Error::shape(
            "gradient tensors",
            params.tensors.len(),
            analytic.tensors.len(),
        ));
    }
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for ti in 0..params.tensors.len() {
        for ei in 0..params.tensors[ti].len() {
            let original = params.tensors[ti].as_slice().expect("standard layout")[ei];
            probe.tensors[ti].as_slice_mut().expect("standard layout")[ei] = original + h;
            let plus = loss(&probe)?;
            probe.tensors[ti].as_slice_mut().expect("standard layout")[ei] = original - h;
            let minus = loss(&probe)?;
            probe.tensors[ti].as_slice_mut().expect("standard layout")[ei] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.tensors[ti].as_slice().expect("standard layout")[ei];
            let err = relative_error(a, numeric);
            if !err.is_finite() {
                return Err(Error::NonFinite(format!("gradient check at tensor {ti} element {ei}")));
            }
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (ti, ei);
                report.analytic = a;
                report.numeric = numeric;
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
