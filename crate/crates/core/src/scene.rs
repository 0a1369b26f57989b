//! Synthetic scenes: target echoes, sinusoidal RFI with random per-PRI
//! phases, additive Gaussian noise, and scaling to prescribed SINR/INR.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::CpiConfig;
use crate::{Error, Result};

/// Largest tolerated relative mismatch between the fitted pulse band and
/// the requested band edges.
pub const BAND_FIT_TOLERANCE: f64 = 0.20;

/// Five-tone RFI reference set: (frequency in Hz, amplitude ratio).
pub const REFERENCE_TONES: [(f64, f64); 5] = [
    (500e6, 1.0),
    (350e6, 0.95),
    (700e6, 0.8),
    (900e6, 0.87),
    (1050e6, 0.9),
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseKind {
    /// First derivative of a Gaussian with standard deviation `sigma_s` seconds.
    GaussianDerivative { sigma_s: f64 },
    /// Unit sample at zero offset.
    Impulse,
}

/// Transmitted pulse shape, normalised so its peak magnitude equals `amplitude`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseWaveform {
    pub kind: PulseKind,
    pub amplitude: f64,
}

/// Result of fitting a Gaussian-derivative pulse to a frequency band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandFit {
    pub f0_hz: f64,
    pub sigma_s: f64,
    pub u_low: f64,
    pub u_high: f64,
    /// Relative errors of the fitted band edges against the requested ones.
    pub low_error: f64,
    pub high_error: f64,
}

impl PulseWaveform {
    pub fn gaussian_derivative(sigma_s: f64, amplitude: f64) -> Result<Self> {
        if !(sigma_s.is_finite() && sigma_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "pulse sigma must be positive, got {sigma_s}"
            )));
        }
        Ok(Self {
            kind: PulseKind::GaussianDerivative { sigma_s },
            amplitude,
        })
    }

    pub fn impulse(amplitude: f64) -> Self {
        Self {
            kind: PulseKind::Impulse,
            amplitude,
        }
    }

    /// Fits a Gaussian-derivative pulse whose spectrum stays within
    /// `level_db` (negative, amplitude dB) of its peak across `[f_low, f_high]`.
    pub fn from_band(f_low: f64, f_high: f64, level_db: f64, amplitude: f64) -> Result<(Self, BandFit)> {
        let fit = fit_band(f_low, f_high, level_db)?;
        Ok((Self::gaussian_derivative(fit.sigma_s, amplitude)?, fit))
    }

    /// Pulse value `offset` samples after its reference time.
    pub fn value(&self, offset: f64, fs_hz: f64) -> f64 {
        match self.kind {
            PulseKind::Impulse => {
                if offset == 0.0 {
                    self.amplitude
                } else {
                    0.0
                }
            }
            PulseKind::GaussianDerivative { sigma_s } => {
                let u = offset / (fs_hz * sigma_s);
                self.amplitude * (-u) * (0.5 - 0.5 * u * u).exp()
            }
        }
    }
}

/// Normalised magnitude spectrum of the Gaussian derivative, peak 1 at u = 1.
fn band_shape(u: f64) -> f64 {
    u * (0.5 * (1.0 - u * u)).exp()
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn fit_band(f_low: f64, f_high: f64, level_db: f64) -> Result<BandFit> {
    if !(f_low > 0.0 && f_high > f_low && f_high.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "band must satisfy 0 < f_low < f_high, got [{f_low}, {f_high}]"
        )));
    }
    if !(level_db < 0.0 && level_db.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "band level must be negative dB, got {level_db}"
        )));
    }
    let level = 10f64.powf(level_db / 20.0);
    let g = |u: f64| band_shape(u) - level;
    let u_low = bisect(0.0, 1.0, g);
    let u_high = bisect(1.0, 40.0, g);
    let f0_hz = 2.0 / (u_low / f_low + u_high / f_high);
    let low_error = (f0_hz * u_low - f_low) / f_low;
    let high_error = (f0_hz * u_high - f_high) / f_high;
    let worst_error = low_error.abs().max(high_error.abs());
    if worst_error > BAND_FIT_TOLERANCE {
        return Err(Error::InfeasibleBand {
            f_low,
            f_high,
            worst_error,
        });
    }
    Ok(BandFit {
        f0_hz,
        sigma_s: 1.0 / (2.0 * PI * f0_hz),
        u_low,
        u_high,
        low_error,
        high_error,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// Delay in fast-time samples.
    pub delay_samples: f64,
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfiTone {
    pub freq_hz: f64,
    /// Amplitude relative to the first tone.
    pub amplitude_ratio: f64,
}

pub fn reference_tones() -> Vec<RfiTone> {
    REFERENCE_TONES
        .iter()
        .map(|&(freq_hz, amplitude_ratio)| RfiTone {
            freq_hz,
            amplitude_ratio,
        })
        .collect()
}

/// Everything needed to synthesise one CPI deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub cpi: CpiConfig,
    pub pulse: PulseWaveform,
    pub targets: Vec<Target>,
    pub tones: Vec<RfiTone>,
    /// Amplitude of the first tone before SINR scaling.
    pub rfi_amplitude: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.cpi.validate()?;
        if let Some(first) = self.tones.first() {
            if first.amplitude_ratio != 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "first RFI tone must have amplitude ratio 1, got {}",
                    first.amplitude_ratio
                )));
            }
        }
        if self.tones.iter().any(|t| !(t.freq_hz.is_finite() && t.amplitude_ratio.is_finite())) {
            return Err(Error::NonFinite("RFI tone table"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        if !self.rfi_amplitude.is_finite() {
            return Err(Error::NonFinite("RFI amplitude"));
        }
        Ok(())
    }
}

/// Echo, RFI and noise components of one CPI.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    /// Per-PRI echo s (identical in every PRI).
    pub s: DVector<f64>,
    pub f: DMatrix<f64>,
    pub e: DMatrix<f64>,
}

impl Scene {
    pub fn echo_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.f.nrows(), self.f.ncols(), |n, _| self.s[n])
    }

    /// Received signal Y = s1ᵀ + F + E.
    pub fn received(&self) -> DMatrix<f64> {
        let mut y = &self.f + &self.e;
        for mut col in y.column_iter_mut() {
            col += &self.s;
        }
        y
    }
}

/// Sum of delayed, scaled pulses.
pub fn echo_signal(n_fast: usize, fs_hz: f64, pulse: &PulseWaveform, targets: &[Target]) -> DVector<f64> {
    DVector::from_fn(n_fast, |n, _| {
        targets
            .iter()
            .map(|t| t.amplitude * pulse.value(n as f64 - t.delay_samples, fs_hz))
            .sum()
    })
}

/// RFI matrix f[n, m] = Σ_q a_q sin(2π f_q n / fs + φ[q, m]) for given phases.
pub fn rfi_from_phases(
    n_fast: usize,
    fs_hz: f64,
    tones: &[RfiTone],
    rfi_amplitude: f64,
    phases: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if phases.nrows() != tones.len() {
        return Err(Error::mismatch(
            format!("{} phase rows", tones.len()),
            format!("{}", phases.nrows()),
        ));
    }
    Ok(DMatrix::from_fn(n_fast, phases.ncols(), |n, m| {
        tones
            .iter()
            .enumerate()
            .map(|(q, t)| {
                let w = 2.0 * PI * t.freq_hz / fs_hz;
                rfi_amplitude * t.amplitude_ratio * (w * n as f64 + phases[(q, m)]).sin()
            })
            .sum()
    }))
}

/// Generates the scene for `spec`. The same seed always yields the same scene.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let CpiConfig {
        n_fast,
        m_slow,
        fs_hz,
        ..
    } = spec.cpi;
    let mut phase_rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut noise_rng = ChaCha20Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(1);

    let mut phases = DMatrix::zeros(spec.tones.len(), m_slow);
    for m in 0..m_slow {
        for q in 0..spec.tones.len() {
            phases[(q, m)] = phase_rng.random_range(0.0..2.0 * PI);
        }
    }
    let f = rfi_from_phases(n_fast, fs_hz, &spec.tones, spec.rfi_amplitude, &phases)?;
    let e = DMatrix::from_fn(n_fast, m_slow, |_, _| {
        let v: f64 = StandardNormal.sample(&mut noise_rng);
        spec.noise_sigma * v
    });
    let s = echo_signal(n_fast, fs_hz, &spec.pulse, &spec.targets);
    Ok(Scene { s, f, e })
}

/// Scale factors applied by [`scale_to_levels`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleFactors {
    /// Factor applied to the noise before the SINR step.
    pub noise: f64,
    /// Joint factor applied to RFI and noise.
    pub interference: f64,
}

/// Rescales the noise to reach `inr_db` (if given), then rescales RFI and
/// noise jointly so that 20 log10(‖S‖/‖F+E‖) equals `sinr_db`.
pub fn scale_to_levels(scene: &mut Scene, sinr_db: f64, inr_db: Option<f64>) -> Result<ScaleFactors> {
    if !sinr_db.is_finite() || inr_db.is_some_and(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target level"));
    }
    let m = scene.f.ncols() as f64;
    let echo_norm = scene.s.norm() * m.sqrt();
    if echo_norm == 0.0 {
        return Err(Error::ZeroNorm("echo"));
    }
    let mut noise = 1.0;
    if let Some(inr) = inr_db {
        let f_norm = scene.f.norm();
        let e_norm = scene.e.norm();
        if e_norm == 0.0 {
            return Err(Error::ZeroNorm("noise"));
        }
        if f_norm == 0.0 {
            return Err(Error::ZeroNorm("RFI"));
        }
        noise = f_norm / e_norm * 10f64.powf(-inr / 20.0);
        scene.e *= noise;
    }
    let ie_norm = (&scene.f + &scene.e).norm();
    if ie_norm == 0.0 {
        return Err(Error::ZeroNorm("interference plus noise"));
    }
    let interference = echo_norm / (ie_norm * 10f64.powf(sinr_db / 20.0));
    scene.f *= interference;
    scene.e *= interference;
    Ok(ScaleFactors {
        noise,
        interference,
    })
}
