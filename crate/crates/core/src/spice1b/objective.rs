//! Penalised negative log-likelihood tracked by the solver, and the
//! quadratic majorizer used by each MM step.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::normal::{inverse_mills, log_normal_cdf};
use super::{SolverState, DEFAULT_PRI_BLOCK};
use crate::model::{SignedCpi, ThresholdSchedule};
use crate::{Error, Result};

fn blocked_sum(
    z: &SignedCpi,
    schedule: &ThresholdSchedule,
    mean: &DMatrix<f64>,
    eta: f64,
    pri_block: usize,
    f: impl Fn(f64, usize, usize) -> f64 + Sync,
) -> Result<f64> {
    if mean.shape() != z.z().shape() || z.m_slow() != schedule.len() {
        return Err(Error::mismatch(
            format!("{:?}", z.z().shape()),
            format!("{:?}", mean.shape()),
        ));
    }
    let n = z.n_fast();
    let block = pri_block.max(1);
    let levels = schedule.levels();
    let partial: Vec<f64> = z
        .z()
        .as_slice()
        .par_chunks(n * block)
        .zip(mean.as_slice().par_chunks(n * block))
        .enumerate()
        .map(|(b, (zc, mc))| {
            let m0 = b * block;
            zc.iter()
                .zip(mc)
                .enumerate()
                .map(|(idx, (&zv, &mv))| {
                    let m = m0 + idx / n;
                    f(zv * (mv - eta * levels[m]), idx % n, m)
                })
                .sum::<f64>()
        })
        .collect();
    Ok(partial.iter().sum())
}

/// -Σ log Φ(z ⊙ (mean - η h)).
pub fn negative_log_likelihood(
    z: &SignedCpi,
    schedule: &ThresholdSchedule,
    mean: &DMatrix<f64>,
    eta: f64,
    pri_block: usize,
) -> Result<f64> {
    blocked_sum(z, schedule, mean, eta, pri_block, |x, _, _| -log_normal_cdf(x))
}

/// Quadratic majorizer of the NLL anchored at (`anchor_mean`, `anchor_eta`),
/// evaluated at (`mean`, `eta`):
/// NLL₀ + Σ [f′(γ₀)(u - γ₀) + ½(u - γ₀)²] with u = z ⊙ (mean - η h).
pub fn surrogate_bound(
    z: &SignedCpi,
    schedule: &ThresholdSchedule,
    anchor_mean: &DMatrix<f64>,
    anchor_eta: f64,
    mean: &DMatrix<f64>,
    eta: f64,
) -> Result<f64> {
    let nll0 = negative_log_likelihood(z, schedule, anchor_mean, anchor_eta, DEFAULT_PRI_BLOCK)?;
    if mean.shape() != anchor_mean.shape() {
        return Err(Error::mismatch(
            format!("{:?}", anchor_mean.shape()),
            format!("{:?}", mean.shape()),
        ));
    }
    let zm = z.z();
    let mut q = 0.0;
    for m in 0..z.m_slow() {
        let h = schedule.level(m);
        for n in 0..z.n_fast() {
            let zv = zm[(n, m)];
            let g0 = zv * (anchor_mean[(n, m)] - anchor_eta * h);
            let u = zv * (mean[(n, m)] - eta * h);
            let d = u - g0;
            q += -inverse_mills(g0) * d + 0.5 * d * d;
        }
    }
    Ok(nll0 + q)
}

/// Full objective: NLL + Σ rpₖ/p₁ₖ + M Σ x̃₂ₖ²/p₂ₖ + ξ Σ w₁ₖp₁ₖ + Σ w₂ₖp₂ₖ,
/// with 0/0 = 0 in the quotient terms.
pub fn objective(
    z: &SignedCpi,
    schedule: &ThresholdSchedule,
    state: &SolverState,
    xi: f64,
    pri_block: usize,
) -> Result<f64> {
    let nll = negative_log_likelihood(z, schedule, &state.fitted_mean, state.eta, pri_block)?;
    let k1 = state.row_power.len();
    let m = z.m_slow() as f64;
    let quot = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    let mut pen = 0.0;
    for k in 0..k1 {
        pen += quot(state.row_power[k], state.p[k]) + xi * state.w[k] * state.p[k];
    }
    for (k, x) in state.x2_scaled.iter().enumerate() {
        let j = k1 + k;
        pen += quot(m * x * x, state.p[j]) + state.w[j] * state.p[j];
    }
    Ok(nll + pen)
}
