//! One MM iteration split into its parts: surrogate data, η, coefficients
//! and powers.
//!
//! PRIs are processed in blocks of `pri_block` columns on the rayon pool;
//! per-block partial sums are reduced in block order so results do not
//! depend on the number of threads.

use nalgebra::{Complex, DMatrix, DMatrixViewMut, DVector};
use rayon::prelude::*;

use super::covariance::{check_powers, CovarianceHandle};
use super::normal::inverse_mills;
use crate::model::{DictionaryPair, SignedCpi, ThresholdSchedule};
use crate::{Error, Result};

fn check_shapes(z: &SignedCpi, schedule: &ThresholdSchedule, mean: &DMatrix<f64>) -> Result<()> {
    if z.m_slow() != schedule.len() {
        return Err(Error::mismatch(
            format!("{} PRIs", schedule.len()),
            format!("{}", z.m_slow()),
        ));
    }
    if mean.shape() != z.z().shape() {
        return Err(Error::mismatch(
            format!("{:?}", z.z().shape()),
            format!("{:?}", mean.shape()),
        ));
    }
    Ok(())
}

/// Surrogate data g = z ⊙ (γ - f′(γ)) with γ = z ⊙ (mean - η h).
pub fn compute_surrogate(
    z: &SignedCpi,
    schedule: &ThresholdSchedule,
    fitted_mean: &DMatrix<f64>,
    eta: f64,
    pri_block: usize,
) -> Result<DMatrix<f64>> {
    check_shapes(z, schedule, fitted_mean)?;
    let n = z.n_fast();
    let chunk = n * pri_block.max(1);
    let levels = schedule.levels();
    let mut g = DMatrix::zeros(n, z.m_slow());
    g.as_mut_slice()
        .par_chunks_mut(chunk)
        .zip(z.z().as_slice().par_chunks(chunk))
        .zip(fitted_mean.as_slice().par_chunks(chunk))
        .enumerate()
        .for_each(|(b, ((gc, zc), mc))| {
            let m0 = b * pri_block.max(1);
            for (idx, ((gv, &zv), &mv)) in gc.iter_mut().zip(zc).zip(mc).enumerate() {
                let gamma = zv * (mv - eta * levels[m0 + idx / n]);
                *gv = zv * (gamma + inverse_mills(gamma));
            }
        });
    Ok(g)
}

/// Closed-form η update, clamped at zero:
/// η = max(0, -Σₘ hₘ uᵀgₘ / (Σₘ hₘ² · 1ᵀu)) with u = R⁻¹1.
pub fn update_eta(schedule: &ThresholdSchedule, g: &DMatrix<f64>, cov: &CovarianceHandle) -> Result<f64> {
    if g.ncols() != schedule.len() || g.nrows() != cov.n_fast() {
        return Err(Error::mismatch(
            format!("{}x{}", cov.n_fast(), schedule.len()),
            format!("{}x{}", g.nrows(), g.ncols()),
        ));
    }
    let levels = schedule.levels();
    let hh: f64 = levels.iter().map(|h| h * h).sum();
    if hh == 0.0 {
        return Err(Error::ZeroThreshold);
    }
    let u = cov.solve(&DVector::from_element(cov.n_fast(), 1.0));
    let glev = g * DVector::from_column_slice(levels);
    let num = u.dot(&glev);
    let den = hh * u.sum();
    let eta = -num / den;
    if !eta.is_finite() {
        return Err(Error::NonFinite("eta update"));
    }
    Ok(eta.max(0.0))
}

/// Aggregated result of the coefficient update.
#[derive(Clone, Debug)]
pub struct CoefficientUpdate {
    /// Scaled pulse coefficients x̃₂ (shared by every PRI).
    pub x2_scaled: DVector<f64>,
    /// Σₘ |x̃₁ₖₘ|² for every Fourier atom.
    pub row_power: Vec<f64>,
    /// Fitted mean Re(A₁X̃₁) + A₂x̃₂1ᵀ.
    pub fitted_mean: DMatrix<f64>,
}

/// LMMSE coefficient update on the surrogate data dₘ = η hₘ 1 + gₘ.
///
/// Per PRI, x̃₁ₘ = P₁A₁ᴴvₘ with vₘ = R⁻¹dₘ, and x̃₂ = P₂A₂ᵀ mean(vₘ). The
/// Fourier coefficients are never formed: only their row powers
/// p₁ₖ² aₖᴴ(Σₘ vₘvₘᵀ)aₖ and the fitted mean A₁P₁A₁ᴴvₘ are kept. `g` is
/// consumed as the work buffer.
pub fn update_coefficients(
    mut g: DMatrix<f64>,
    schedule: &ThresholdSchedule,
    cov: &CovarianceHandle,
    dicts: &DictionaryPair,
    p: &[f64],
    eta: f64,
    pri_block: usize,
) -> Result<CoefficientUpdate> {
    check_powers(dicts, p)?;
    let (n, m) = (g.nrows(), g.ncols());
    if n != dicts.n_fast() || m != schedule.len() {
        return Err(Error::mismatch(
            format!("{}x{}", dicts.n_fast(), schedule.len()),
            format!("{n}x{m}"),
        ));
    }
    let block = pri_block.max(1);
    let chunk = n * block;
    let levels = schedule.levels();
    let toeplitz = cov.toeplitz();
    let mut mean = DMatrix::zeros(n, m);

    let partials: Vec<(DMatrix<f64>, DVector<f64>)> = g
        .as_mut_slice()
        .par_chunks_mut(chunk)
        .zip(mean.as_mut_slice().par_chunks_mut(chunk))
        .enumerate()
        .map(|(b, (wc, mc))| {
            let cols = wc.len() / n;
            let m0 = b * block;
            let mut v = DMatrixViewMut::from_slice(wc, n, cols);
            for j in 0..cols {
                let shift = eta * levels[m0 + j];
                v.column_mut(j).add_scalar_mut(shift);
            }
            cov.solve_mut(&mut v);
            let mut mv = DMatrixViewMut::from_slice(mc, n, cols);
            mv.gemm(1.0, toeplitz, &v, 0.0);
            let c = &v * v.transpose();
            let vsum = v.column_sum();
            (c, vsum)
        })
        .collect();

    let mut c = DMatrix::zeros(n, n);
    let mut vsum = DVector::zeros(n);
    for (cb, vb) in &partials {
        c += cb;
        vsum += vb;
    }

    let k1 = dicts.k1();
    let row_power = fourier_row_power(dicts, &c, &p[..k1]);

    let vbar = vsum / m as f64;
    let a2 = dicts.pulse.atoms();
    let mut x2 = a2.tr_mul(&vbar);
    for (k, x) in x2.iter_mut().enumerate() {
        *x *= p[k1 + k];
    }
    let echo = a2 * &x2;
    mean.as_mut_slice()
        .par_chunks_mut(n)
        .for_each(|col| {
            for (v, e) in col.iter_mut().zip(echo.iter()) {
                *v += e;
            }
        });

    Ok(CoefficientUpdate {
        x2_scaled: x2,
        row_power,
        fitted_mean: mean,
    })
}

/// p₁ₖ² aₖᴴCaₖ for symmetric C, using aᴴCa = Σ_d s_d cos(dω) with
/// s₀ = tr C and s_d = 2 Σᵢ C[i+d, i].
fn fourier_row_power(dicts: &DictionaryPair, c: &DMatrix<f64>, p1: &[f64]) -> Vec<f64> {
    let n = c.nrows();
    let k1 = p1.len();
    let half = k1 / 2;
    let s: Vec<f64> = (0..n)
        .map(|d| {
            let diag: f64 = (0..n - d).map(|i| c[(i + d, i)]).sum();
            if d == 0 {
                diag
            } else {
                2.0 * diag
            }
        })
        .collect();
    let cos = dicts.fourier.half_re_im();
    let mut rp = vec![0.0; k1];
    for k in 0..half {
        let q: f64 = (0..n).map(|d| s[d] * cos[(d, k)]).sum();
        let v = p1[k] * p1[k] * q.max(0.0);
        rp[k] = v;
        rp[k1 - 1 - k] = v;
    }
    rp
}

/// Power update p₁ₖ = √(rpₖ/(ξ w₁ₖ)), p₂ₖ = √(M x̃₂ₖ²/w₂ₖ), with 0/0 = 0.
pub fn update_powers(
    row_power: &[f64],
    x2_scaled: &DVector<f64>,
    w: &[f64],
    m_slow: usize,
    xi: f64,
) -> Result<Vec<f64>> {
    let k1 = row_power.len();
    let k2 = x2_scaled.len();
    if w.len() != k1 + k2 {
        return Err(Error::mismatch(format!("{} weights", k1 + k2), format!("{}", w.len())));
    }
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::InvalidConfig(format!("xi must be positive, got {xi}")));
    }
    let ratio = |index: usize, num: f64, den: f64| -> Result<f64> {
        if num == 0.0 {
            Ok(0.0)
        } else if den > 0.0 {
            // Separate roots keep subnormal numerators from flushing to zero.
            Ok(num.sqrt() / den.sqrt())
        } else {
            Err(Error::IllPosedPower { index })
        }
    };
    let mut p = vec![0.0; k1 + k2];
    for k in 0..k1 / 2 {
        let v = ratio(k, row_power[k], xi * w[k])?;
        p[k] = v;
        p[k1 - 1 - k] = v;
    }
    for k in 0..k2 {
        let x = x2_scaled[k];
        p[k1 + k] = ratio(k1 + k, m_slow as f64 * x * x, w[k1 + k])?;
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("power update"));
    }
    Ok(p)
}

/// Explicit coefficients of one PRI for surrogate data `d`.
#[derive(Clone, Debug)]
pub struct PriCoefficients {
    pub fourier: DVector<Complex<f64>>,
    pub pulse: DVector<f64>,
}

/// x̃ = P Aᴴ R⁻¹ d for a single PRI, Fourier part mirrored into conjugate pairs.
pub fn pri_coefficients(
    cov: &CovarianceHandle,
    dicts: &DictionaryPair,
    p: &[f64],
    d: &DVector<f64>,
) -> Result<PriCoefficients> {
    check_powers(dicts, p)?;
    if d.len() != dicts.n_fast() {
        return Err(Error::mismatch(format!("{}", dicts.n_fast()), format!("{}", d.len())));
    }
    let k1 = dicts.k1();
    let half = k1 / 2;
    let v = cov.solve(d);
    let proj = dicts.fourier.half_re_im().tr_mul(&v);
    let mut fourier = DVector::zeros(k1);
    for k in 0..half {
        let x = Complex::new(proj[k], -proj[half + k]) * p[k];
        fourier[k] = x;
        fourier[k1 - 1 - k] = x.conj();
    }
    let mut pulse = dicts.pulse.atoms().tr_mul(&v);
    for (k, x) in pulse.iter_mut().enumerate() {
        *x *= p[k1 + k];
    }
    Ok(PriCoefficients { fourier, pulse })
}
