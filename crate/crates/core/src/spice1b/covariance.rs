//! Covariance R = A₁P₁A₁ᴴ + A₂P₂A₂ᵀ + 2I and the weight rules built on it.
//!
//! Because the Fourier powers are conjugate-pair symmetric, A₁P₁A₁ᴴ is the
//! real symmetric Toeplitz matrix with first column
//! t_d = 2 Σ_{k<K₁/2} p₁ₖ cos(dωₖ), so R is real.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix, StorageMut};

use crate::model::DictionaryPair;
use crate::{Error, Result, WeightKind};

/// Variance of the surrogate noise in every majorized subproblem.
pub const SURROGATE_NOISE: f64 = 2.0;

/// Factored covariance for one MM iteration.
pub struct CovarianceHandle {
    toeplitz: DMatrix<f64>,
    r: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl CovarianceHandle {
    /// Full covariance R.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Fourier part A₁P₁A₁ᴴ.
    pub fn toeplitz(&self) -> &DMatrix<f64> {
        &self.toeplitz
    }

    pub fn n_fast(&self) -> usize {
        self.r.nrows()
    }

    /// Overwrites `b` with R⁻¹b.
    pub fn solve_mut<C: nalgebra::Dim, S: StorageMut<f64, Dyn, C>>(&self, b: &mut Matrix<f64, Dyn, C, S>) {
        self.chol.solve_mut(b);
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// L⁻¹X where R = LLᵀ.
    pub fn whiten(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut out);
        out
    }
}

pub(crate) fn check_powers(dicts: &DictionaryPair, p: &[f64]) -> Result<()> {
    let (k1, k2) = (dicts.k1(), dicts.k2());
    if p.len() != k1 + k2 {
        return Err(Error::mismatch(format!("{} powers", k1 + k2), format!("{}", p.len())));
    }
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidConfig("powers must be finite and non-negative".into()));
    }
    if (0..k1 / 2).any(|k| p[k] != p[k1 - 1 - k]) {
        return Err(Error::InvalidConfig(
            "Fourier powers must be conjugate-pair symmetric".into(),
        ));
    }
    Ok(())
}

/// Builds and factors R for the concatenated powers p = [p₁; p₂].
pub fn build_covariance(dicts: &DictionaryPair, p: &[f64]) -> Result<CovarianceHandle> {
    check_powers(dicts, p)?;
    let n = dicts.n_fast();
    let k1 = dicts.k1();
    let half = k1 / 2;
    let cos = dicts.fourier.half_re_im();
    let t: Vec<f64> = (0..n)
        .map(|d| 2.0 * (0..half).map(|k| p[k] * cos[(d, k)]).sum::<f64>())
        .collect();
    let toeplitz = DMatrix::from_fn(n, n, |i, j| t[i.abs_diff(j)]);

    let a2 = dicts.pulse.atoms();
    let mut scaled = a2.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= p[k1 + k];
    }
    let mut r = &scaled * a2.transpose();
    // Symmetrise the pulse part so R is exactly symmetric.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (r[(i, j)] + r[(j, i)]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r += &toeplitz;
    for i in 0..n {
        r[(i, i)] += SURROGATE_NOISE;
    }
    let chol = Cholesky::new(r.clone()).ok_or(Error::NotPositiveDefinite)?;
    Ok(CovarianceHandle { toeplitz, r, chol })
}

/// Concatenated weights [w₁; w₂] for the given rule.
///
/// SPICE uses ‖a‖², LIKES uses aᴴR⁻¹a and IAA uses p·(aᴴR⁻¹a)².
pub fn update_weights(kind: WeightKind, dicts: &DictionaryPair, cov: &CovarianceHandle, p: &[f64]) -> Result<Vec<f64>> {
    check_powers(dicts, p)?;
    let k1 = dicts.k1();
    let half = k1 / 2;
    let mut w = vec![0.0; k1 + dicts.k2()];
    match kind {
        WeightKind::Spice => {
            let n = dicts.n_fast() as f64;
            w[..k1].fill(n);
            w[k1..].copy_from_slice(dicts.pulse.energy());
        }
        WeightKind::Likes | WeightKind::Iaa => {
            let wf = cov.whiten(dicts.fourier.half_re_im());
            for k in 0..half {
                let q = wf.column(k).norm_squared() + wf.column(half + k).norm_squared();
                w[k] = q;
                w[k1 - 1 - k] = q;
            }
            let wp = cov.whiten(dicts.pulse.atoms());
            for (k, col) in wp.column_iter().enumerate() {
                w[k1 + k] = col.norm_squared();
            }
            if kind == WeightKind::Iaa {
                for (wk, pk) in w.iter_mut().zip(p) {
                    *wk = pk * *wk * *wk;
                }
            }
        }
    }
    Ok(w)
}
