//! One-bit weighted SPICE: joint RFI/echo recovery from sign data by
//! majorization-minimization.
//!
//! Each iteration replaces the probit likelihood by a quadratic majorizer,
//! which turns the sign data into high-precision surrogate data
//! dₘ = η hₘ 1 + gₘ observed in white noise of variance 2. A weighted SPICE
//! step on that surrogate gives new scaled coefficients and powers; η (the
//! inverse noise standard deviation) is updated in closed form.

pub mod covariance;
pub mod normal;
pub mod objective;
pub mod updates;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::model::{DictionaryPair, SignedCpi, ThresholdSchedule};
use crate::{Error, Result, WeightKind};

pub use covariance::{build_covariance, update_weights, CovarianceHandle, SURROGATE_NOISE};
pub use normal::{log_normal_cdf, normal_cdf, stable_normal_ratio};
pub use objective::{negative_log_likelihood, objective, surrogate_bound};
pub use updates::{
    compute_surrogate, pri_coefficients, update_coefficients, update_eta, update_powers,
    CoefficientUpdate, PriCoefficients,
};

pub const DEFAULT_PRI_BLOCK: usize = 64;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;
/// ξ as a multiple of M.
pub const DEFAULT_XI_FACTOR: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub kind: WeightKind,
    /// Fourier penalty multiplier ξ.
    pub xi: f64,
    pub max_iter: usize,
    /// Stop once ‖p⁽ⁱ⁺¹⁾ - p⁽ⁱ⁾‖/‖p⁽ⁱ⁾‖ falls below this.
    pub tol: f64,
    /// PRIs per parallel work unit.
    pub pri_block: usize,
    /// Starting η; `None` means 1/h_max.
    pub eta_init: Option<f64>,
}

impl SolverOptions {
    pub fn new(kind: WeightKind, m_slow: usize) -> Self {
        Self {
            kind,
            xi: DEFAULT_XI_FACTOR * m_slow as f64,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            pri_block: DEFAULT_PRI_BLOCK,
            eta_init: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(Error::InvalidConfig(format!("xi must be positive, got {}", self.xi)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol must be non-negative, got {}", self.tol)));
        }
        if self.pri_block == 0 {
            return Err(Error::InvalidConfig("pri_block must be positive".into()));
        }
        if let Some(e) = self.eta_init {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidConfig(format!("eta_init must be positive, got {e}")));
            }
        }
        Ok(())
    }
}

/// Solver state between iterations.
///
/// The Fourier coefficients themselves are not stored; their per-atom
/// energies (`row_power`) and their contribution to `fitted_mean` are all
/// the iteration needs.
#[derive(Clone, Debug)]
pub struct SolverState {
    /// Concatenated powers [p₁; p₂].
    pub p: Vec<f64>,
    /// Weights used to produce `p`.
    pub w: Vec<f64>,
    pub eta: f64,
    pub x2_scaled: DVector<f64>,
    pub row_power: Vec<f64>,
    pub fitted_mean: DMatrix<f64>,
    pub iteration: usize,
}

fn spice_weights(dicts: &DictionaryPair) -> Vec<f64> {
    let mut w = vec![dicts.n_fast() as f64; dicts.k1()];
    w.extend_from_slice(dicts.pulse.energy());
    w
}

fn check_inputs(z: &SignedCpi, schedule: &ThresholdSchedule, dicts: &DictionaryPair, opts: &SolverOptions) -> Result<()> {
    opts.validate()?;
    if z.m_slow() != schedule.len() {
        return Err(Error::mismatch(format!("{} PRIs", schedule.len()), format!("{}", z.m_slow())));
    }
    if z.n_fast() != dicts.n_fast() {
        return Err(Error::mismatch(
            format!("{} fast-time samples", dicts.n_fast()),
            format!("{}", z.n_fast()),
        ));
    }
    Ok(())
}

/// Starting point: Fourier coefficients 1 ± j (conjugate pairs), pulse
/// coefficients 1, η = 1/h_max, and powers that solve the first power
/// update for those coefficients under SPICE weights.
pub fn init_state(
    z: &SignedCpi,
    schedule: &ThresholdSchedule,
    dicts: &DictionaryPair,
    opts: &SolverOptions,
) -> Result<SolverState> {
    check_inputs(z, schedule, dicts, opts)?;
    let (n, m) = (dicts.n_fast(), z.m_slow());
    let (k1, k2) = (dicts.k1(), dicts.k2());
    let mf = m as f64;
    let w = spice_weights(dicts);
    let mut p = vec![(2.0 * mf / (opts.xi * n as f64)).sqrt(); k1];
    p.extend(dicts.pulse.energy().iter().map(|e| (mf / e).sqrt()));

    let x2 = DVector::from_element(k2, 1.0);
    let cs = dicts.fourier.half_re_im();
    let half = k1 / 2;
    let echo = dicts.pulse.synthesize(&x2);
    let base = DVector::from_fn(n, |i, _| {
        let f: f64 = (0..half).map(|k| cs[(i, k)] - cs[(i, half + k)]).sum();
        2.0 * f + echo[i]
    });
    let fitted_mean = DMatrix::from_fn(n, m, |i, _| base[i]);
    Ok(SolverState {
        p,
        w,
        eta: opts.eta_init.unwrap_or(1.0 / schedule.h_max()),
        x2_scaled: x2,
        row_power: vec![2.0 * mf; k1],
        fitted_mean,
        iteration: 0,
    })
}

/// Per-iteration diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// Relative power change that produced this iterate.
    pub p_change: f64,
    pub eta: f64,
}

/// Runs one MM iteration in place and returns the relative power change.
pub fn step(
    z: &SignedCpi,
    schedule: &ThresholdSchedule,
    dicts: &DictionaryPair,
    opts: &SolverOptions,
    state: &mut SolverState,
) -> Result<f64> {
    let cov = build_covariance(dicts, &state.p)?;
    let w = match opts.kind {
        WeightKind::Spice => spice_weights(dicts),
        kind => update_weights(kind, dicts, &cov, &state.p)?,
    };
    let g = compute_surrogate(z, schedule, &state.fitted_mean, state.eta, opts.pri_block)?;
    let eta = update_eta(schedule, &g, &cov)?;
    let upd = update_coefficients(g, schedule, &cov, dicts, &state.p, eta, opts.pri_block)?;
    let p_new = update_powers(&upd.row_power, &upd.x2_scaled, &w, z.m_slow(), opts.xi)?;

    let diff: f64 = p_new.iter().zip(&state.p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = state.p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let change = if norm > 0.0 {
        diff / norm
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };

    state.p = p_new;
    state.w = w;
    state.eta = eta;
    state.x2_scaled = upd.x2_scaled;
    state.row_power = upd.row_power;
    state.fitted_mean = upd.fitted_mean;
    state.iteration += 1;
    Ok(change)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecoveryStatus {
    Recovered,
    /// η collapsed to zero; the echo scale is unidentifiable and ŝ is zero.
    EtaZero,
}

#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub s_hat: DVector<f64>,
    /// Unscaled pulse amplitudes x̃₂/η.
    pub x2_hat: DVector<f64>,
    pub eta_hat: f64,
    /// Final concatenated powers [p₁; p₂].
    pub powers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub status: RecoveryStatus,
    /// Objective of the starting point followed by one record per iteration.
    pub initial_objective: f64,
    pub trace: Vec<IterationRecord>,
}

/// Iterates until the relative power change drops below `tol` or `max_iter`
/// iterations have run.
pub fn recover(
    z: &SignedCpi,
    schedule: &ThresholdSchedule,
    dicts: &DictionaryPair,
    opts: &SolverOptions,
) -> Result<RecoveryResult> {
    let mut state = init_state(z, schedule, dicts, opts)?;
    let initial_objective = objective(z, schedule, &state, opts.xi, opts.pri_block)?;
    let mut trace = Vec::with_capacity(opts.max_iter);
    let mut converged = false;
    while state.iteration < opts.max_iter {
        let change = step(z, schedule, dicts, opts, &mut state)?;
        trace.push(IterationRecord {
            iteration: state.iteration,
            objective: objective(z, schedule, &state, opts.xi, opts.pri_block)?,
            p_change: change,
            eta: state.eta,
        });
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let (x2_hat, status) = if state.eta > 0.0 {
        (&state.x2_scaled / state.eta, RecoveryStatus::Recovered)
    } else {
        (DVector::zeros(dicts.k2()), RecoveryStatus::EtaZero)
    };
    let s_hat = dicts.pulse.synthesize(&x2_hat);
    Ok(RecoveryResult {
        s_hat,
        x2_hat,
        eta_hat: state.eta,
        powers: state.p,
        iterations: state.iteration,
        converged,
        status,
        initial_objective,
        trace,
    })
}
