//! Fast-time spectrum of every PRI.

use nalgebra::{Complex, DMatrix};
use rustfft::FftPlanner;

/// FFT length as a multiple of N.
pub const ZERO_PAD_FACTOR: usize = 8;

/// Magnitude of the zero-padded DFT of each column, keeping the 4N
/// one-sided bins. Bin k sits at k·fs/(8N) Hz.
pub fn spectrum_map(y: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = y.shape();
    let len = ZERO_PAD_FACTOR * n;
    let bins = len / 2;
    let mut out = DMatrix::zeros(bins, m);
    if n == 0 {
        return out;
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for (col, mut dst) in y.column_iter().zip(out.column_iter_mut()) {
        for (b, v) in buf.iter_mut().zip(col.iter().copied().chain(std::iter::repeat(0.0))) {
            *b = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        for (d, b) in dst.iter_mut().zip(&buf[..bins]) {
            *d = b.norm();
        }
    }
    out
}

/// Centre frequency of bin `k` for an N-sample PRI.
pub fn bin_frequency(k: usize, n_fast: usize, fs_hz: f64) -> f64 {
    k as f64 * fs_hz / (ZERO_PAD_FACTOR * n_fast) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_in_zero_out() {
        let s = spectrum_map(&DMatrix::zeros(8, 3));
        assert_eq!(s.shape(), (32, 3));
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn on_bin_tone_has_single_peak() {
        let n = 16;
        let bin = 24;
        let w = 2.0 * PI * bin as f64 / (ZERO_PAD_FACTOR * n) as f64;
        let y = DMatrix::from_fn(n, 4, |i, j| (w * i as f64 + j as f64).cos());
        let s = spectrum_map(&y);
        for col in s.column_iter() {
            let (imax, vmax) = col.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            assert_eq!(imax, bin);
            assert!((vmax - n as f64 / 2.0).abs() < 0.2 * n as f64);
        }
    }

    #[test]
    fn matches_direct_dft() {
        let y = DMatrix::from_fn(5, 2, |i, j| (i * i + j) as f64 * 0.3 - 1.0);
        let s = spectrum_map(&y);
        let len = 40;
        for m in 0..2 {
            for k in 0..20 {
                let mut acc = Complex::new(0.0, 0.0);
                for n in 0..5 {
                    let ph = -2.0 * PI * (k * n) as f64 / len as f64;
                    acc += Complex::from_polar(y[(n, m)], ph);
                }
                assert!((acc.norm() - s[(k, m)]).abs() < 1e-12);
            }
        }
    }
}
