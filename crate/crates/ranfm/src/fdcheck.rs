//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor};

/// Compare an analytic gradient against the central difference
/// (f(x+h) − f(x−h)) / 2h, coordinate by coordinate, and return the maximum
/// relative error |analytic − numeric| / max(1, |numeric|).
///
/// Requires 64-bit tensors; the truncation/roundoff analysis behind the
/// default `h` assumes f64 arithmetic.
pub fn finite_difference_check<F>(mut f: F, x: &Tensor, analytic: &Tensor, h: f64) -> Result<f64>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(Error::InvalidDimension {
            op: "finite_difference_check",
            detail: format!("step h must be positive, got {h}"),
        });
    }
    if x.dtype() != DType::F64 {
        return Err(Error::InvalidDimension {
            op: "finite_difference_check",
            detail: "requires 64-bit tensors".into(),
        });
    }
    if analytic.shape() != x.shape() {
        return Err(Error::ShapeMismatch {
            op: "finite_difference_check",
            lhs: x.shape().to_vec(),
            rhs: analytic.shape().to_vec(),
        });
    }
    let mut max_rel = 0.0f64;
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.set(i, x.get(i) + h);
        let mut minus = x.clone();
        minus.set(i, x.get(i) - h);
        let numeric = (f(&plus)? - f(&minus)?) / (2.0 * h);
        let rel = (analytic.get(i) - numeric).abs() / numeric.abs().max(1.0);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}
