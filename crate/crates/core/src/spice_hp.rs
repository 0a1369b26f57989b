//! Weighted SPICE on high-precision complex snapshots.
//!
//! For a regressor matrix B (N×K) the augmented model is [B, I] with powers
//! p = [p_x; p_e] and covariance R = B diag(p_x) Bᴴ + diag(p_e). One step
//! computes the LMMSE coefficients x̆ = P Aᴴ R⁻¹ y and the powers
//! p_k = |x̆_k| / √w_k.

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Dyn};

use crate::{Error, Result, WeightKind};

type C64 = Complex<f64>;

/// Relative floor applied to powers after each update.
pub const POWER_FLOOR: f64 = 1e-12;

/// Cholesky-factored covariance of the augmented model.
pub struct HpCovariance {
    r: DMatrix<C64>,
    chol: Cholesky<C64, Dyn>,
}

impl HpCovariance {
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.r
    }

    pub fn solve(&self, v: &DVector<C64>) -> DVector<C64> {
        self.chol.solve(v)
    }

    /// L⁻¹X where R = LLᴴ.
    fn whiten(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = x.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut out);
        out
    }
}

fn check_dims(b: &DMatrix<C64>, p: &[f64]) -> Result<()> {
    let expected = b.ncols() + b.nrows();
    if p.len() != expected {
        return Err(Error::mismatch(
            format!("{expected} powers"),
            format!("{}", p.len()),
        ));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidConfig("powers must be finite and non-negative".into()));
    }
    Ok(())
}

/// R = B diag(p[..K]) Bᴴ + diag(p[K..]).
pub fn hp_covariance(b: &DMatrix<C64>, p: &[f64]) -> Result<HpCovariance> {
    check_dims(b, p)?;
    let k = b.ncols();
    let mut bp = b.clone();
    for (j, mut col) in bp.column_iter_mut().enumerate() {
        col *= C64::from(p[j]);
    }
    let mut r = bp * b.adjoint();
    for i in 0..b.nrows() {
        r[(i, i)] += C64::from(p[k + i]);
    }
    let chol = Cholesky::new(r.clone()).ok_or(Error::NotPositiveDefinite)?;
    Ok(HpCovariance { r, chol })
}

/// Weights for every column of [B, I].
pub fn hp_weights(kind: WeightKind, b: &DMatrix<C64>, cov: &HpCovariance, p: &[f64]) -> Result<Vec<f64>> {
    check_dims(b, p)?;
    let n = b.nrows();
    let mut w = match kind {
        WeightKind::Spice => {
            let mut w: Vec<f64> = b.column_iter().map(|c| c.norm_squared()).collect();
            w.extend(std::iter::repeat_n(1.0, n));
            w
        }
        WeightKind::Likes | WeightKind::Iaa => {
            let mut w: Vec<f64> = cov.whiten(b).column_iter().map(|c| c.norm_squared()).collect();
            let li = cov.whiten(&DMatrix::identity(n, n));
            w.extend(li.column_iter().map(|c| c.norm_squared()));
            w
        }
    };
    if kind == WeightKind::Iaa {
        for (wk, pk) in w.iter_mut().zip(p) {
            *wk = pk * *wk * *wk;
        }
    }
    Ok(w)
}

/// Output of one weighted SPICE step.
#[derive(Clone, Debug)]
pub struct HpStep {
    /// LMMSE coefficients for [B, I].
    pub x: DVector<C64>,
    /// Updated (floored) powers.
    pub p: Vec<f64>,
}

/// LMMSE coefficients x̆ = P Aᴴ R⁻¹ y for the augmented model.
pub fn hp_coefficients(y: &DVector<C64>, b: &DMatrix<C64>, cov: &HpCovariance, p: &[f64]) -> Result<DVector<C64>> {
    check_dims(b, p)?;
    if y.len() != b.nrows() {
        return Err(Error::mismatch(format!("{} samples", b.nrows()), format!("{}", y.len())));
    }
    let k = b.ncols();
    let v = cov.solve(y);
    let bx = b.adjoint() * &v;
    Ok(DVector::from_fn(k + b.nrows(), |i, _| {
        if i < k {
            bx[i] * p[i]
        } else {
            v[i - k] * p[i]
        }
    }))
}

/// One step: coefficients, then p_k = |x̆_k|/√w_k, then the relative floor.
pub fn hp_step(y: &DVector<C64>, b: &DMatrix<C64>, p: &[f64], w: &[f64]) -> Result<HpStep> {
    check_dims(b, p)?;
    if w.len() != p.len() {
        return Err(Error::mismatch(format!("{} weights", p.len()), format!("{}", w.len())));
    }
    if p.iter().all(|&v| v == 0.0) {
        return Err(Error::AllZeroPower);
    }
    let cov = hp_covariance(b, p)?;
    let x = hp_coefficients(y, b, &cov, p)?;
    let mut p_new = Vec::with_capacity(p.len());
    for (index, (xk, &wk)) in x.iter().zip(w).enumerate() {
        let mag = xk.norm();
        if mag == 0.0 {
            p_new.push(0.0);
        } else if wk > 0.0 {
            p_new.push(mag / wk.sqrt());
        } else {
            return Err(Error::IllPosedPower { index });
        }
    }
    apply_floor(&mut p_new);
    Ok(HpStep { x, p: p_new })
}

fn apply_floor(p: &mut [f64]) {
    let max = p.iter().cloned().fold(0.0, f64::max);
    let floor = POWER_FLOOR * max;
    for v in p.iter_mut() {
        *v = v.max(floor);
    }
}

/// SPICE criterion yᴴR⁻¹y + Σ w_k p_k for fixed weights.
pub fn hp_objective(y: &DVector<C64>, b: &DMatrix<C64>, p: &[f64], w: &[f64]) -> Result<f64> {
    let cov = hp_covariance(b, p)?;
    let v = cov.solve(y);
    let fit = y.dotc(&v).re;
    Ok(fit + w.iter().zip(p).map(|(a, b)| a * b).sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HpOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for HpOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HpRun {
    pub p: Vec<f64>,
    pub x: DVector<C64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates weighted SPICE from a periodogram start until the relative
/// power change drops below `tol`.
pub fn hp_run(y: &DVector<C64>, b: &DMatrix<C64>, kind: WeightKind, opts: HpOptions) -> Result<HpRun> {
    let (n, k) = (b.nrows(), b.ncols());
    if y.len() != n {
        return Err(Error::mismatch(format!("{n} samples"), format!("{}", y.len())));
    }
    if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("snapshot"));
    }
    if y.iter().all(|v| *v == C64::from(0.0)) {
        return Ok(HpRun {
            p: vec![0.0; k + n],
            x: DVector::zeros(k + n),
            iterations: 0,
            converged: true,
        });
    }
    let by = b.adjoint() * y;
    let mut p: Vec<f64> = b
        .column_iter()
        .zip(by.iter())
        .map(|(c, v)| {
            let e = c.norm_squared();
            if e > 0.0 {
                v.norm_sqr() / (e * e)
            } else {
                0.0
            }
        })
        .chain(y.iter().map(|v| v.norm_sqr()))
        .collect();
    apply_floor(&mut p);

    let mut x = DVector::zeros(k + n);
    for iter in 1..=opts.max_iter {
        let cov = hp_covariance(b, &p)?;
        let w = hp_weights(kind, b, &cov, &p)?;
        let step = hp_step(y, b, &p, &w)?;
        let diff: f64 = step.p.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        p = step.p;
        x = step.x;
        if diff <= opts.tol * norm {
            return Ok(HpRun {
                p,
                x,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(HpRun {
        p,
        x,
        iterations: opts.max_iter,
        converged: false,
    })
}
