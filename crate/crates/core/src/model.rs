//! CPI configuration, the CTBV threshold schedule, one-bit quantisation and
//! the Fourier/pulse dictionaries shared by every recovery method.
//!
//! All N×M matrices are stored column-major with fast time as the row index,
//! so each column is one pulse repetition interval (PRI).

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::scene::PulseWaveform;
use crate::{Error, Result};

/// Relative energy below which a pulse atom is treated as degenerate.
const ATOM_ENERGY_FLOOR: f64 = 1e-12;

/// Dimensions and scale of one coherent processing interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpiConfig {
    /// Fast-time samples per PRI (N).
    pub n_fast: usize,
    /// Number of PRIs (M).
    pub m_slow: usize,
    /// Fast-time sampling rate in Hz.
    pub fs_hz: f64,
    /// Largest threshold magnitude.
    pub h_max: f64,
}

impl CpiConfig {
    pub fn new(n_fast: usize, m_slow: usize, fs_hz: f64, h_max: f64) -> Result<Self> {
        let cfg = Self {
            n_fast,
            m_slow,
            fs_hz,
            h_max,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fast == 0 {
            return Err(Error::InvalidConfig("n_fast must be positive".into()));
        }
        if self.m_slow < 2 {
            return Err(Error::InvalidConfig(format!(
                "m_slow must be at least 2, got {}",
                self.m_slow
            )));
        }
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "fs_hz must be positive and finite, got {}",
                self.fs_hz
            )));
        }
        if !(self.h_max.is_finite() && self.h_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "h_max must be positive and finite, got {}",
                self.h_max
            )));
        }
        Ok(())
    }

    pub fn sample_interval(&self) -> f64 {
        1.0 / self.fs_hz
    }

    pub fn threshold_schedule(&self) -> Result<ThresholdSchedule> {
        ThresholdSchedule::new(self.m_slow, self.h_max)
    }
}

/// Threshold levels h_1..h_M, one per PRI, uniformly spaced on [-h_max, h_max].
///
/// The N×M threshold matrix is rank one (every row equals the level
/// sequence), so only the length-M sequence is stored.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSchedule {
    h_max: f64,
    levels: Vec<f64>,
}

impl ThresholdSchedule {
    pub fn new(m_slow: usize, h_max: f64) -> Result<Self> {
        if m_slow < 2 {
            return Err(Error::InvalidConfig(format!(
                "threshold schedule needs at least 2 levels, got {m_slow}"
            )));
        }
        if !(h_max.is_finite() && h_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "h_max must be positive and finite, got {h_max}"
            )));
        }
        let span = (m_slow - 1) as f64;
        let mut levels = vec![0.0; m_slow];
        // Fill the lower half and mirror so the sequence is exactly antisymmetric.
        for m in 0..m_slow.div_ceil(2) {
            let h = -h_max + 2.0 * h_max * (m as f64) / span;
            levels[m] = h;
            levels[m_slow - 1 - m] = -h;
        }
        if m_slow % 2 == 1 {
            levels[m_slow / 2] = 0.0;
        }
        Ok(Self { h_max, levels })
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Spacing between consecutive levels.
    pub fn delta_h(&self) -> f64 {
        2.0 * self.h_max / (self.levels.len() - 1) as f64
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, m: usize) -> f64 {
        self.levels[m]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Explicit N×M threshold matrix.
    pub fn to_matrix(&self, n_fast: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n_fast, self.levels.len(), |_, m| self.levels[m])
    }
}

/// Sign matrix Z with entries in {-1, +1}.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedCpi {
    z: DMatrix<f64>,
}

impl SignedCpi {
    /// Wraps an existing matrix after checking every entry is exactly ±1.
    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        if let Some((index, &value)) = z
            .iter()
            .enumerate()
            .find(|(_, &v)| v != 1.0 && v != -1.0)
        {
            return Err(Error::NotASign { index, value });
        }
        Ok(Self { z })
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn n_fast(&self) -> usize {
        self.z.nrows()
    }

    pub fn m_slow(&self) -> usize {
        self.z.ncols()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.z
    }
}

/// One-bit CTBV quantisation Z = sign(Y - H) with sign(0) = +1.
pub fn quantize_ctbv(y: &DMatrix<f64>, schedule: &ThresholdSchedule) -> Result<SignedCpi> {
    if y.ncols() != schedule.len() {
        return Err(Error::mismatch(
            format!("{} PRIs", schedule.len()),
            format!("{} columns", y.ncols()),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("received signal"));
    }
    let z = DMatrix::from_fn(y.nrows(), y.ncols(), |n, m| {
        if y[(n, m)] - schedule.level(m) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    });
    Ok(SignedCpi { z })
}

/// Overcomplete Fourier dictionary with atoms e^{j n ω_k}.
///
/// The grid ω_k = -π + π(2k+1)/K (0-based k) is symmetric, so atom k and
/// atom K-1-k are exact complex conjugates.
#[derive(Clone, Debug)]
pub struct FourierDictionary {
    omega: Vec<f64>,
    atoms: DMatrix<Complex<f64>>,
    /// `[Re a_0 .. Re a_{K/2-1} | Im a_0 .. Im a_{K/2-1}]`, N×K.
    half_re_im: DMatrix<f64>,
}

impl FourierDictionary {
    pub fn new(n_fast: usize, k: usize) -> Result<Self> {
        if k == 0 || k % 2 == 1 {
            return Err(Error::OddFourierGrid(k));
        }
        if n_fast == 0 {
            return Err(Error::InvalidConfig("n_fast must be positive".into()));
        }
        let half = k / 2;
        let mut omega = vec![0.0; k];
        for i in 0..half {
            let w = -std::f64::consts::PI
                + std::f64::consts::PI * (2 * i + 1) as f64 / k as f64;
            omega[i] = w;
            omega[k - 1 - i] = -w;
        }
        let mut atoms = DMatrix::zeros(n_fast, k);
        let mut half_re_im = DMatrix::zeros(n_fast, k);
        for i in 0..half {
            for n in 0..n_fast {
                let (s, c) = (n as f64 * omega[i]).sin_cos();
                atoms[(n, i)] = Complex::new(c, s);
                atoms[(n, k - 1 - i)] = Complex::new(c, -s);
                half_re_im[(n, i)] = c;
                half_re_im[(n, half + i)] = s;
            }
        }
        Ok(Self {
            omega,
            atoms,
            half_re_im,
        })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn atoms(&self) -> &DMatrix<Complex<f64>> {
        &self.atoms
    }

    pub fn n_fast(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn k(&self) -> usize {
        self.omega.len()
    }

    /// Index of the conjugate partner of atom `k`.
    pub fn conjugate_partner(&self, k: usize) -> usize {
        self.k() - 1 - k
    }

    /// Real and imaginary parts of the first K/2 atoms packed side by side.
    pub fn half_re_im(&self) -> &DMatrix<f64> {
        &self.half_re_im
    }
}

/// Real pulse dictionary: column k is the pulse delayed by k·N/K samples.
#[derive(Clone, Debug)]
pub struct PulseDictionary {
    delays: Vec<f64>,
    atoms: DMatrix<f64>,
    energy: Vec<f64>,
    pulse: PulseWaveform,
}

impl PulseDictionary {
    pub fn new(n_fast: usize, k: usize, pulse: &PulseWaveform, fs_hz: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("pulse dictionary size must be positive".into()));
        }
        if n_fast == 0 {
            return Err(Error::InvalidConfig("n_fast must be positive".into()));
        }
        let delays: Vec<f64> = (0..k).map(|i| i as f64 * n_fast as f64 / k as f64).collect();
        let atoms = DMatrix::from_fn(n_fast, k, |n, i| pulse.value(n as f64 - delays[i], fs_hz));
        let energy: Vec<f64> = atoms.column_iter().map(|c| c.norm_squared()).collect();
        let max_energy = energy.iter().cloned().fold(0.0, f64::max);
        if let Some(index) = energy
            .iter()
            .position(|&e| !(e > ATOM_ENERGY_FLOOR * max_energy) || e == 0.0)
        {
            return Err(Error::DegenerateAtom { index });
        }
        Ok(Self {
            delays,
            atoms,
            energy,
            pulse: *pulse,
        })
    }

    /// Atom delays in samples.
    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    /// Squared norm of each atom.
    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    pub fn pulse(&self) -> &PulseWaveform {
        &self.pulse
    }

    pub fn k(&self) -> usize {
        self.delays.len()
    }

    /// Echo A₂x for a coefficient vector x.
    pub fn synthesize(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.atoms * x
    }
}

/// The pair (A₁, A₂) used by every sparse solver.
#[derive(Clone, Debug)]
pub struct DictionaryPair {
    pub fourier: FourierDictionary,
    pub pulse: PulseDictionary,
}

impl DictionaryPair {
    pub fn new(cfg: &CpiConfig, pulse: &PulseWaveform, k1: usize, k2: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            fourier: FourierDictionary::new(cfg.n_fast, k1)?,
            pulse: PulseDictionary::new(cfg.n_fast, k2, pulse, cfg.fs_hz)?,
        })
    }

    pub fn n_fast(&self) -> usize {
        self.fourier.n_fast()
    }

    pub fn k1(&self) -> usize {
        self.fourier.k()
    }

    pub fn k2(&self) -> usize {
        self.pulse.k()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schedule_four_levels() {
        let s = ThresholdSchedule::new(4, 3.0).unwrap();
        assert_eq!(s.levels(), &[-3.0, -1.0, 1.0, 3.0]);
        assert_eq!(s.delta_h(), 2.0);
    }

    #[test]
    fn schedule_rejects_bad_inputs() {
        assert!(ThresholdSchedule::new(1, 3.0).is_err());
        assert!(ThresholdSchedule::new(4, 0.0).is_err());
        assert!(ThresholdSchedule::new(4, -1.0).is_err());
    }

    #[test]
    fn rank_one_threshold_matrix() {
        let s = ThresholdSchedule::new(7, 2.5).unwrap();
        let h = s.to_matrix(5);
        for n in 0..5 {
            for m in 0..7 {
                assert_eq!(h[(n, m)], s.level(m));
            }
        }
    }

    #[test]
    fn quantize_zero_maps_to_plus_one() {
        let s = ThresholdSchedule::new(2, 1.0).unwrap();
        let y = DMatrix::from_row_slice(1, 2, &[-1.0, 0.5]);
        let z = quantize_ctbv(&y, &s).unwrap();
        assert_eq!(z.z()[(0, 0)], 1.0);
        assert_eq!(z.z()[(0, 1)], -1.0);
    }

    #[test]
    fn quantize_rejects_shape_and_nan() {
        let s = ThresholdSchedule::new(3, 1.0).unwrap();
        assert!(quantize_ctbv(&DMatrix::zeros(2, 2), &s).is_err());
        let mut y = DMatrix::zeros(2, 3);
        y[(1, 1)] = f64::NAN;
        assert!(quantize_ctbv(&y, &s).is_err());
    }

    #[test]
    fn signed_cpi_rejects_non_signs() {
        assert!(SignedCpi::new(DMatrix::from_element(2, 2, 0.0)).is_err());
        assert!(SignedCpi::new(DMatrix::from_element(2, 2, -1.0)).is_ok());
    }

    #[test]
    fn fourier_grid_small() {
        let d = FourierDictionary::new(3, 4).unwrap();
        let pi = std::f64::consts::PI;
        let expect = [-3.0 * pi / 4.0, -pi / 4.0, pi / 4.0, 3.0 * pi / 4.0];
        for (w, e) in d.omega().iter().zip(expect) {
            assert!((w - e).abs() < 1e-15);
        }
        assert!(matches!(FourierDictionary::new(3, 5), Err(Error::OddFourierGrid(5))));
    }

    #[test]
    fn impulse_dictionary_is_identity() {
        let pulse = PulseWaveform::impulse(1.0);
        let d = PulseDictionary::new(4, 4, &pulse, 1.0).unwrap();
        assert_eq!(d.atoms(), &DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn impulse_off_grid_is_degenerate() {
        let pulse = PulseWaveform::impulse(1.0);
        assert!(matches!(
            PulseDictionary::new(4, 8, &pulse, 1.0),
            Err(Error::DegenerateAtom { index: 1 })
        ));
    }

    proptest! {
        #[test]
        fn schedule_invariants(m in 2usize..300, h in 0.01f64..1e4) {
            let s = ThresholdSchedule::new(m, h).unwrap();
            let lv = s.levels();
            prop_assert_eq!(lv[0], -h);
            prop_assert_eq!(lv[m - 1], h);
            for i in 0..m {
                prop_assert_eq!(lv[i], -lv[m - 1 - i]);
                if i > 0 {
                    prop_assert!((lv[i] - lv[i - 1] - s.delta_h()).abs() <= 1e-9 * h);
                }
            }
        }

        #[test]
        fn quantize_matches_sign_rule(
            vals in proptest::collection::vec(-5.0f64..5.0, 12),
        ) {
            let s = ThresholdSchedule::new(4, 2.0).unwrap();
            let y = DMatrix::from_vec(3, 4, vals);
            let z = quantize_ctbv(&y, &s).unwrap();
            for n in 0..3 {
                for m in 0..4 {
                    let expect = if y[(n, m)] >= s.level(m) { 1.0 } else { -1.0 };
                    prop_assert_eq!(z.z()[(n, m)], expect);
                }
            }
        }

        #[test]
        fn fourier_conjugate_pairs(n in 1usize..20, half in 1usize..20) {
            let k = 2 * half;
            let d = FourierDictionary::new(n, k).unwrap();
            for i in 0..k {
                let j = d.conjugate_partner(i);
                prop_assert_eq!(d.omega()[j], -d.omega()[i]);
                for r in 0..n {
                    prop_assert_eq!(d.atoms()[(r, j)], d.atoms()[(r, i)].conj());
                }
            }
        }

        #[test]
        fn fourier_atom_norm(n in 1usize..40, half in 1usize..16) {
            let d = FourierDictionary::new(n, 2 * half).unwrap();
            for c in d.atoms().column_iter() {
                let e: f64 = c.iter().map(|v| v.norm_sqr()).sum();
                prop_assert!((e - n as f64).abs() < 1e-9 * n as f64);
            }
        }
    }
}
