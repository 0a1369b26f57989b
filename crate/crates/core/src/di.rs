//! Digital-integration (DI) baseline: counts, per fast-time sample, how many
//! thresholds the received signal cleared and maps the count back to a level.
//!
//! Noise-free, with a constant value c in [-h_max, h_max), DI returns the
//! largest threshold not exceeding c, so its error lies in [0, Δh).

use nalgebra::DVector;

use crate::model::{SignedCpi, ThresholdSchedule};
use crate::{Error, Result};

/// ŝ_n = Δh·Σ_m (z_nm + 1)/2 - h_max - Δh.
pub fn di_recover(z: &SignedCpi, schedule: &ThresholdSchedule) -> Result<DVector<f64>> {
    if z.m_slow() != schedule.len() {
        return Err(Error::mismatch(
            format!("{} PRIs", schedule.len()),
            format!("{} columns", z.m_slow()),
        ));
    }
    let dh = schedule.delta_h();
    let offset = schedule.h_max() + dh;
    let zm = z.z();
    Ok(DVector::from_fn(z.n_fast(), |n, _| {
        let count: f64 = zm.row(n).iter().map(|&v| 0.5 * (v + 1.0)).sum();
        dh * count - offset
    }))
}
