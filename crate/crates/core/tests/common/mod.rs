//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};
use onebit_core::model::{quantize_ctbv, CpiConfig, DictionaryPair, SignedCpi, ThresholdSchedule};
use onebit_core::scene::{generate_scene, reference_tones, scale_to_levels, PulseWaveform, SceneSpec, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on Pₙ.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// ∫₀^∞ exp(a s - s²/2) ds for a ≤ 0 by composite Gauss-Legendre on panels
/// narrower than the integrand's decay scale.
fn tail_integral(a: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    assert!(a <= 0.0);
    let upper = a + (a * a + 100.0).sqrt();
    let width = 0.25 / a.abs().max(1.0);
    let panels = (upper / width).ceil() as usize;
    let width = upper / panels as f64;
    let (xs, ws) = rule;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = p as f64 * width;
        let mut acc = 0.0;
        for (x, w) in xs.iter().zip(ws) {
            let s = lo + 0.5 * width * (x + 1.0);
            acc += w * (a * s - 0.5 * s * s).exp();
        }
        total += 0.5 * width * acc;
    }
    total
}

/// -φ(x)/Φ(x) by quadrature.
///
/// For x ≤ 0, Φ(x)/φ(x) = ∫₀^∞ exp(xs - s²/2) ds. For x > 0,
/// Φ(x) = 1 - φ(x)·∫₀^∞ exp(-xs - s²/2) ds.
pub fn normal_ratio_oracle(x: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    if x <= 0.0 {
        -1.0 / tail_integral(x, rule)
    } else {
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        -pdf / (1.0 - pdf * tail_integral(-x, rule))
    }
}

/// log Φ(x) by the same quadrature.
pub fn log_cdf_oracle(x: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let ln_sqrt_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    if x <= 0.0 {
        -0.5 * x * x - ln_sqrt_2pi + tail_integral(x, rule).ln()
    } else {
        let pdf = (-0.5 * x * x - ln_sqrt_2pi).exp();
        (-pdf * tail_integral(-x, rule)).ln_1p()
    }
}

/// Relative error of a vector/matrix against a reference.
pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = want.iter().map(|b| b * b).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn desk_pulse() -> PulseWaveform {
    PulseWaveform::from_band(300e6, 1100e6, -3.0, 1.0).unwrap().0
}

/// Six-target, five-tone scene at the given size, quantised.
pub fn standard_cell(n: usize, m: usize, seed: u64, sinr_db: f64, inr_db: f64) -> (DVector<f64>, SignedCpi, ThresholdSchedule) {
    let cfg = CpiConfig::new(n, m, 8e9, 400.0).unwrap();
    let scale = n as f64 / 128.0;
    let targets = [(15.3, 300.0), (30.0, -220.0), (47.6, 180.0), (66.2, -150.0), (85.0, 250.0), (104.7, 120.0)]
        .iter()
        .map(|&(d, a)| Target {
            delay_samples: d * scale,
            amplitude: a,
        })
        .collect();
    let spec = SceneSpec {
        cpi: cfg,
        pulse: desk_pulse(),
        targets,
        tones: reference_tones(),
        rfi_amplitude: 1.0,
        noise_sigma: 1.0,
        seed,
    };
    let mut scene = generate_scene(&spec).unwrap();
    scale_to_levels(&mut scene, sinr_db, Some(inr_db)).unwrap();
    let schedule = cfg.threshold_schedule().unwrap();
    let z = quantize_ctbv(&scene.received(), &schedule).unwrap();
    (scene.s, z, schedule)
}

pub fn dictionaries(n: usize, m: usize, k1: usize, k2: usize) -> DictionaryPair {
    let cfg = CpiConfig::new(n, m, 8e9, 400.0).unwrap();
    DictionaryPair::new(&cfg, &desk_pulse(), k1, k2).unwrap()
}

/// A random iterate: paired positive powers, a fitted mean and η.
pub struct RandomIterate {
    pub p: Vec<f64>,
    pub mean: DMatrix<f64>,
    pub eta: f64,
}

pub fn random_iterate(d: &DictionaryPair, m: usize, seed: u64) -> RandomIterate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k1, k2, n) = (d.k1(), d.k2(), d.n_fast());
    let mut p: Vec<f64> = (0..k1 + k2).map(|_| 10f64.powf(rng.random_range(-3.0..1.0))).collect();
    for k in 0..k1 / 2 {
        p[k1 - 1 - k] = p[k];
    }
    let mean = DMatrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0));
    let eta = 10f64.powf(rng.random_range(-3.5..-1.5));
    RandomIterate { p, mean, eta }
}

/// [A₁, A₂] as one complex regressor matrix.
pub fn stacked_regressors(d: &DictionaryPair) -> DMatrix<Complex<f64>> {
    let (n, k1, k2) = (d.n_fast(), d.k1(), d.k2());
    DMatrix::from_fn(n, k1 + k2, |i, j| {
        if j < k1 {
            d.fourier.atoms()[(i, j)]
        } else {
            Complex::from(d.pulse.atoms()[(i, j - k1)])
        }
    })
}
