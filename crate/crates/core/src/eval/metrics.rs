//! Recovery error and signal-level metrics, all in dB with entrywise ℓ₂
//! norms.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Value reported for an exact recovery.
pub const NRE_FLOOR_DB: f64 = -300.0;

/// 20 log₁₀(‖s - ŝ‖/‖s‖), floored at -300 dB.
pub fn nre_db(s_true: &DVector<f64>, s_hat: &DVector<f64>) -> Result<f64> {
    if s_true.len() != s_hat.len() {
        return Err(Error::mismatch(format!("{}", s_true.len()), format!("{}", s_hat.len())));
    }
    let denom = s_true.norm();
    if denom == 0.0 {
        return Err(Error::ZeroNorm("true echo"));
    }
    let err = (s_true - s_hat).norm();
    if !err.is_finite() {
        return Err(Error::NonFinite("recovered echo"));
    }
    Ok((20.0 * (err / denom).log10()).max(NRE_FLOOR_DB))
}

fn ratio_db(num: f64, den: f64, what: &'static str) -> Result<f64> {
    if den == 0.0 {
        return Err(Error::ZeroNorm(what));
    }
    Ok(20.0 * (num / den).log10())
}

/// 20 log₁₀(‖S‖/‖F + E‖); with `noise = None`, 20 log₁₀(‖S‖/‖F‖).
pub fn sinr_db(echo: &DMatrix<f64>, rfi: &DMatrix<f64>, noise: Option<&DMatrix<f64>>) -> Result<f64> {
    if echo.shape() != rfi.shape() {
        return Err(Error::mismatch(format!("{:?}", echo.shape()), format!("{:?}", rfi.shape())));
    }
    let den = match noise {
        Some(e) => {
            if e.shape() != rfi.shape() {
                return Err(Error::mismatch(format!("{:?}", rfi.shape()), format!("{:?}", e.shape())));
            }
            (rfi + e).norm()
        }
        None => rfi.norm(),
    };
    ratio_db(echo.norm(), den, "interference plus noise")
}

/// 20 log₁₀(‖F‖/‖E‖).
pub fn inr_db(rfi: &DMatrix<f64>, noise: &DMatrix<f64>) -> Result<f64> {
    if noise.shape() != rfi.shape() {
        return Err(Error::mismatch(format!("{:?}", rfi.shape()), format!("{:?}", noise.shape())));
    }
    ratio_db(rfi.norm(), noise.norm(), "noise")
}
