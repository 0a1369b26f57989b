//! Experiment configuration and the NRE-versus-SINR sweep.
//!
//! For every (SINR, seed) cell one scene is synthesised, scaled, quantised
//! and handed to each configured method. Records come back ordered by
//! (method, SINR, seed) whether or not cells run in parallel.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ingest::ingest_measured_rfi;
use super::metrics::nre_db;
use crate::di::di_recover;
use crate::model::{quantize_ctbv, CpiConfig, DictionaryPair, SignedCpi, ThresholdSchedule};
use crate::scene::{generate_scene, reference_tones, scale_to_levels, PulseWaveform, RfiTone, Scene, SceneSpec, Target};
use crate::spice1b::{self, SolverOptions};
use crate::{Error, Result, WeightKind};

pub const CSV_HEADER: [&str; 8] = [
    "method",
    "sinr_db",
    "inr_db",
    "seed",
    "nre_db",
    "iterations",
    "converged",
    "runtime_ms",
];

/// Target delays (in samples for N = 128) and amplitudes of the default scene.
pub const DEFAULT_TARGETS: [(f64, f64); 6] = [
    (15.3, 300.0),
    (30.0, -220.0),
    (47.6, 180.0),
    (66.2, -150.0),
    (85.0, 250.0),
    (104.7, 120.0),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "DI")]
    Di,
    #[serde(rename = "1bSPICE")]
    Spice1b,
    #[serde(rename = "1bLIKES")]
    Likes1b,
    #[serde(rename = "1bIAA")]
    Iaa1b,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Di, Method::Spice1b, Method::Likes1b, Method::Iaa1b];

    pub fn name(self) -> &'static str {
        match self {
            Method::Di => "DI",
            Method::Spice1b => "1bSPICE",
            Method::Likes1b => "1bLIKES",
            Method::Iaa1b => "1bIAA",
        }
    }

    pub fn weight_kind(self) -> Option<WeightKind> {
        match self {
            Method::Di => None,
            Method::Spice1b => Some(WeightKind::Spice),
            Method::Likes1b => Some(WeightKind::Likes),
            Method::Iaa1b => Some(WeightKind::Iaa),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseConfig {
    /// Gaussian derivative fitted to a band at `level_db` below the peak.
    Band { f_low_hz: f64, f_high_hz: f64, level_db: f64 },
    GaussianDerivative { sigma_s: f64 },
    Impulse,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig::Band {
            f_low_hz: 300e6,
            f_high_hz: 1100e6,
            level_db: -3.0,
        }
    }
}

impl PulseConfig {
    /// Unit-amplitude waveform.
    pub fn waveform(&self) -> Result<PulseWaveform> {
        match *self {
            PulseConfig::Band {
                f_low_hz,
                f_high_hz,
                level_db,
            } => Ok(PulseWaveform::from_band(f_low_hz, f_high_hz, level_db, 1.0)?.0),
            PulseConfig::GaussianDerivative { sigma_s } => PulseWaveform::gaussian_derivative(sigma_s, 1.0),
            PulseConfig::Impulse => Ok(PulseWaveform::impulse(1.0)),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    #[serde(default)]
    pub pulse: PulseConfig,
    pub targets: Vec<Target>,
    #[serde(default = "reference_tones")]
    pub tones: Vec<RfiTone>,
    #[serde(default = "one")]
    pub rfi_amplitude: f64,
    #[serde(default = "one")]
    pub noise_sigma: f64,
}

/// Dictionary sizes as multiples of N.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DictionaryConfig {
    pub k1_factor: usize,
    pub k2_factor: usize,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self {
            k1_factor: 4,
            k2_factor: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// ξ = xi_factor · M.
    pub xi_factor: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub pri_block: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_init: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            xi_factor: spice1b::DEFAULT_XI_FACTOR,
            max_iter: spice1b::DEFAULT_MAX_ITER,
            tol: spice1b::DEFAULT_TOL,
            pri_block: spice1b::DEFAULT_PRI_BLOCK,
            eta_init: None,
        }
    }
}

impl SolverConfig {
    pub fn options(&self, kind: WeightKind, m_slow: usize) -> SolverOptions {
        SolverOptions {
            kind,
            xi: self.xi_factor * m_slow as f64,
            max_iter: self.max_iter,
            tol: self.tol,
            pri_block: self.pri_block,
            eta_init: self.eta_init,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfiSource {
    #[default]
    Simulated,
    /// Measured RFI replaces the synthetic tones and noise.
    Ingested { path: PathBuf },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub sinr_grid_db: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inr_db: Option<f64>,
    pub seeds: Vec<u64>,
    /// Run sweep cells on the rayon pool.
    #[serde(default = "yes")]
    pub parallel: bool,
    /// Write measured runtimes; when false the column holds `NA` so the
    /// CSV is byte-reproducible.
    #[serde(default = "yes")]
    pub emit_runtime: bool,
    #[serde(default)]
    pub rfi_source: RfiSource,
    pub cpi: CpiConfig,
    pub scene: SceneConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub dictionary: DictionaryConfig,
}

impl ExperimentConfig {
    /// Desk-scale defaults: N = 128, M = 1024, six targets, five tones,
    /// INR 10 dB, SINR -30 dB, seeds 0..5.
    pub fn desk_default() -> Self {
        Self::scaled(128, 1024)
    }

    /// Full-scale dimensions N = 512, M = 8192.
    pub fn full_scale() -> Self {
        Self::scaled(512, 8192)
    }

    /// Default scene with target delays scaled to N fast-time samples.
    pub fn scaled(n_fast: usize, m_slow: usize) -> Self {
        let scale = n_fast as f64 / 128.0;
        Self {
            methods: Method::ALL.to_vec(),
            sinr_grid_db: vec![-30.0],
            inr_db: Some(10.0),
            seeds: (0..5).collect(),
            parallel: true,
            emit_runtime: true,
            rfi_source: RfiSource::Simulated,
            cpi: CpiConfig {
                n_fast,
                m_slow,
                fs_hz: 8e9,
                h_max: 400.0,
            },
            scene: SceneConfig {
                pulse: PulseConfig::default(),
                targets: DEFAULT_TARGETS
                    .iter()
                    .map(|&(d, a)| Target {
                        delay_samples: d * scale,
                        amplitude: a,
                    })
                    .collect(),
                tones: reference_tones(),
                rfi_amplitude: 1.0,
                noise_sigma: 1.0,
            },
            solver: SolverConfig::default(),
            dictionary: DictionaryConfig::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("cannot serialise config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.cpi.validate()?;
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("methods must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must not be empty".into()));
        }
        if self.sinr_grid_db.is_empty() {
            return Err(Error::InvalidConfig("sinr_grid_db must not be empty".into()));
        }
        if self.sinr_grid_db.iter().any(|v| !v.is_finite()) || self.inr_db.is_some_and(|v| !v.is_finite()) {
            return Err(Error::NonFinite("SINR/INR grid"));
        }
        if self.dictionary.k1_factor == 0 || self.dictionary.k2_factor == 0 {
            return Err(Error::InvalidConfig("dictionary factors must be positive".into()));
        }
        self.solver.options(WeightKind::Spice, self.cpi.m_slow).validate()?;
        self.scene_spec(0)?.validate()
    }

    pub fn k1(&self) -> usize {
        self.dictionary.k1_factor * self.cpi.n_fast
    }

    pub fn k2(&self) -> usize {
        self.dictionary.k2_factor * self.cpi.n_fast
    }

    pub fn dictionaries(&self) -> Result<DictionaryPair> {
        DictionaryPair::new(&self.cpi, &self.scene.pulse.waveform()?, self.k1(), self.k2())
    }

    pub fn scene_spec(&self, seed: u64) -> Result<SceneSpec> {
        Ok(SceneSpec {
            cpi: self.cpi,
            pulse: self.scene.pulse.waveform()?,
            targets: self.scene.targets.clone(),
            tones: self.scene.tones.clone(),
            rfi_amplitude: self.scene.rfi_amplitude,
            noise_sigma: self.scene.noise_sigma,
            seed,
        })
    }

    /// Measured RFI matrix, if the config asks for one.
    pub fn load_rfi(&self) -> Result<Option<DMatrix<f64>>> {
        match &self.rfi_source {
            RfiSource::Simulated => Ok(None),
            RfiSource::Ingested { path } => {
                let rfi = ingest_measured_rfi(path)?;
                if rfi.data.shape() != (self.cpi.n_fast, self.cpi.m_slow) {
                    return Err(Error::mismatch(
                        format!("{}x{}", self.cpi.n_fast, self.cpi.m_slow),
                        format!("{}x{}", rfi.data.nrows(), rfi.data.ncols()),
                    ));
                }
                Ok(Some(rfi.data))
            }
        }
    }
}

/// A quantised CPI together with its ground truth.
#[derive(Clone, Debug)]
pub struct Cell {
    pub scene: Scene,
    pub y: DMatrix<f64>,
    pub z: SignedCpi,
    pub schedule: ThresholdSchedule,
}

/// Synthesises, scales and quantises one (SINR, seed) cell. With measured
/// RFI the noise term is dropped and INR is not applied.
pub fn prepare_cell(cfg: &ExperimentConfig, measured: Option<&DMatrix<f64>>, sinr_db: f64, seed: u64) -> Result<Cell> {
    let mut spec = cfg.scene_spec(seed)?;
    let inr = match measured {
        Some(_) => {
            spec.tones.clear();
            spec.noise_sigma = 0.0;
            None
        }
        None => cfg.inr_db,
    };
    let mut scene = generate_scene(&spec)?;
    if let Some(f) = measured {
        scene.f = f.clone();
    }
    scale_to_levels(&mut scene, sinr_db, inr)?;
    let schedule = cfg.cpi.threshold_schedule()?;
    let y = scene.received();
    let z = quantize_ctbv(&y, &schedule)?;
    Ok(Cell { scene, y, z, schedule })
}

#[derive(Clone, Debug)]
pub struct MethodOutput {
    pub s_hat: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn run_method(
    method: Method,
    z: &SignedCpi,
    schedule: &ThresholdSchedule,
    dicts: &DictionaryPair,
    solver: &SolverConfig,
) -> Result<MethodOutput> {
    match method.weight_kind() {
        None => Ok(MethodOutput {
            s_hat: di_recover(z, schedule)?,
            iterations: 0,
            converged: true,
        }),
        Some(kind) => {
            let opts = solver.options(kind, z.m_slow());
            let r = spice1b::recover(z, schedule, dicts, &opts)?;
            Ok(MethodOutput {
                s_hat: r.s_hat,
                iterations: r.iterations,
                converged: r.converged,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub sinr_db: f64,
    pub inr_db: Option<f64>,
    pub seed: u64,
    pub nre_db: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunFailure {
    pub method: Method,
    pub sinr_db: f64,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutcome {
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

impl SweepOutcome {
    /// Median NRE of `method` at `sinr_db` across seeds.
    pub fn median_nre(&self, method: Method, sinr_db: f64) -> Option<f64> {
        let mut v: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.method == method && r.sinr_db == sinr_db)
            .map(|r| r.nre_db)
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let mid = v.len() / 2;
        Some(if v.len() % 2 == 1 {
            v[mid]
        } else {
            0.5 * (v[mid - 1] + v[mid])
        })
    }
}

type CellResults = Vec<std::result::Result<RunRecord, RunFailure>>;

fn run_cell(
    cfg: &ExperimentConfig,
    dicts: &DictionaryPair,
    measured: Option<&DMatrix<f64>>,
    sinr_db: f64,
    seed: u64,
) -> CellResults {
    let inr_db = if measured.is_some() { None } else { cfg.inr_db };
    let fail = |method: Method, e: &Error| RunFailure {
        method,
        sinr_db,
        seed,
        message: e.to_string(),
    };
    let cell = match prepare_cell(cfg, measured, sinr_db, seed) {
        Ok(c) => c,
        Err(e) => return cfg.methods.iter().map(|&m| Err(fail(m, &e))).collect(),
    };
    cfg.methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let out = run_method(method, &cell.z, &cell.schedule, dicts, &cfg.solver).map_err(|e| fail(method, &e))?;
            let runtime_ms = (start.elapsed().as_secs_f64() * 1e3).max(1e-6);
            let nre = nre_db(&cell.scene.s, &out.s_hat).map_err(|e| fail(method, &e))?;
            Ok(RunRecord {
                method,
                sinr_db,
                inr_db,
                seed,
                nre_db: nre,
                iterations: out.iterations,
                converged: out.converged,
                runtime_ms,
            })
        })
        .collect()
}

/// Runs every (method, SINR, seed) combination.
///
/// Configuration problems are returned as errors; failures of individual
/// runs are collected in [`SweepOutcome::failures`] and the sweep goes on.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let dicts = cfg.dictionaries()?;
    let measured = cfg.load_rfi()?;
    let cells: Vec<(usize, usize)> = (0..cfg.sinr_grid_db.len())
        .flat_map(|s| (0..cfg.seeds.len()).map(move |k| (s, k)))
        .collect();
    let work = |&(s, k): &(usize, usize)| run_cell(cfg, &dicts, measured.as_ref(), cfg.sinr_grid_db[s], cfg.seeds[k]);
    let results: Vec<CellResults> = if cfg.parallel {
        cells.par_iter().map(work).collect()
    } else {
        cells.iter().map(work).collect()
    };

    let mut outcome = SweepOutcome::default();
    for mi in 0..cfg.methods.len() {
        for cell in &results {
            match &cell[mi] {
                Ok(r) => outcome.records.push(r.clone()),
                Err(f) => outcome.failures.push(f.clone()),
            }
        }
    }
    Ok(outcome)
}

/// Writes records under the fixed header. Runtimes become `NA` when
/// `emit_runtime` is false; a missing INR is written as `NA`.
pub fn write_csv<W: Write>(records: &[RunRecord], out: W, emit_runtime: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.method.name().to_string(),
            r.sinr_db.to_string(),
            r.inr_db.map_or_else(|| "NA".to_string(), |v| v.to_string()),
            r.seed.to_string(),
            r.nre_db.to_string(),
            r.iterations.to_string(),
            r.converged.to_string(),
            if emit_runtime {
                format!("{:.3}", r.runtime_ms)
            } else {
                "NA".to_string()
            },
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::scaled(32, 64);
        cfg.seeds = vec![3, 1];
        cfg.sinr_grid_db = vec![-20.0, -10.0];
        cfg.solver.max_iter = 5;
        cfg.emit_runtime = false;
        cfg
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("RELAX".parse::<Method>().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::desk_default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn minimal_toml_uses_defaults() {
        let text = r#"
            methods = ["DI", "1bLIKES"]
            sinr_grid_db = [-30.0]
            seeds = [0]

            [cpi]
            n_fast = 16
            m_slow = 32
            fs_hz = 8e9
            h_max = 400.0

            [scene]
            targets = [{ delay_samples = 4.0, amplitude = 100.0 }]
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.scene.tones.len(), 5);
        assert_eq!(cfg.rfi_source, RfiSource::Simulated);
        assert!(cfg.parallel && cfg.emit_runtime);
    }

    #[test]
    fn empty_axes_rejected() {
        let mut cfg = tiny();
        cfg.methods.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = tiny();
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = tiny();
        cfg.sinr_grid_db.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_di_cell_gives_one_record() {
        let mut cfg = tiny();
        cfg.methods = vec![Method::Di];
        cfg.seeds = vec![0];
        cfg.sinr_grid_db = vec![-30.0];
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        assert!(out.failures.is_empty());
        assert!(out.records[0].nre_db.is_finite());
    }

    #[test]
    fn records_ordered_by_method_sinr_seed() {
        let out = run_experiment(&tiny()).unwrap();
        assert_eq!(out.records.len(), 4 * 2 * 2);
        let key: Vec<(Method, f64, u64)> = out.records.iter().map(|r| (r.method, r.sinr_db, r.seed)).collect();
        let mut expect = Vec::new();
        for m in Method::ALL {
            for s in [-20.0, -10.0] {
                for seed in [3, 1] {
                    expect.push((m, s, seed));
                }
            }
        }
        assert_eq!(key, expect);
    }

    #[test]
    fn csv_header_and_na_runtime() {
        let out = run_experiment(&tiny()).unwrap();
        let mut buf = Vec::new();
        write_csv(&out.records, &mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert!(lines.all(|l| l.ends_with(",NA")));
    }

    #[test]
    fn failures_do_not_stop_the_sweep() {
        let mut cfg = tiny();
        cfg.methods = vec![Method::Di];
        // A silent scene cannot be scaled to a SINR.
        cfg.scene.targets.clear();
        let out = run_experiment(&cfg).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.failures.len(), 4);
        assert!(out.failures[0].message.contains("echo"));
    }

    #[test]
    fn median_of_even_count() {
        let mk = |seed, nre| RunRecord {
            method: Method::Di,
            sinr_db: 0.0,
            inr_db: None,
            seed,
            nre_db: nre,
            iterations: 0,
            converged: true,
            runtime_ms: 1.0,
        };
        let out = SweepOutcome {
            records: vec![mk(0, -1.0), mk(1, -5.0), mk(2, -2.0), mk(3, -9.0)],
            failures: vec![],
        };
        assert_eq!(out.median_nre(Method::Di, 0.0), Some(-3.5));
        assert_eq!(out.median_nre(Method::Likes1b, 0.0), None);
    }
}
