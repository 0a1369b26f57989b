//! Command-line front end: simulate CPIs, run one recovery, sweep a full
//! experiment, check measured-RFI files and export spectrum maps.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use onebit_core::eval::experiment::{prepare_cell, run_method, ExperimentConfig, Method};
use onebit_core::eval::ingest::ingest_measured_rfi;
use onebit_core::eval::{nre_db, read_matrix_csv, run_experiment, spectrum_map, write_csv, write_matrix_csv};
use onebit_core::model::SignedCpi;
use onebit_core::{DMatrix, DVector};

#[derive(Parser)]
#[command(name = "onebit", version, about = "One-bit weighted SPICE echo recovery for CTBV radar")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a default experiment config as TOML.
    Config {
        /// Use N = 512, M = 8192 instead of the desk-scale defaults.
        #[arg(long)]
        full_scale: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesise one CPI and write Y, Z and the ground truth as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        sinr_db: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Recover the echo from a sign matrix with one method.
    Recover {
        #[arg(long)]
        config: PathBuf,
        /// Sign matrix CSV (N rows, M columns, entries ±1).
        #[arg(long)]
        z: PathBuf,
        #[arg(long, default_value = "1bLIKES")]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth echo CSV (one column) for scoring.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run every (method, SINR, seed) combination and write the CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run cells one after another.
        #[arg(long)]
        serial: bool,
        /// Write NA instead of runtimes for byte-reproducible output.
        #[arg(long)]
        no_runtime: bool,
    },
    /// Validate a measured-RFI file and its sidecar.
    IngestCheck { path: PathBuf },
    /// Write the fast-time spectrum map of a CSV matrix or a measured-RFI file.
    Spectrum {
        #[arg(long, conflicts_with = "rfi", required_unless_present = "rfi")]
        input: Option<PathBuf>,
        #[arg(long)]
        rfi: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_csv(path: &Path) -> Result<DMatrix<f64>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_matrix_csv(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn write_csv_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_matrix_csv(BufWriter::new(f), m)?;
    Ok(())
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Config { full_scale, out } => {
            let cfg = if full_scale {
                ExperimentConfig::full_scale()
            } else {
                ExperimentConfig::desk_default()
            };
            let text = cfg.to_toml_string()?;
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => io::stdout().write_all(text.as_bytes())?,
            }
        }
        Command::Simulate {
            config,
            sinr_db,
            seed,
            out_dir,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let measured = cfg.load_rfi()?;
            let cell = prepare_cell(&cfg, measured.as_ref(), sinr_db, seed)?;
            fs::create_dir_all(&out_dir)?;
            write_csv_matrix(&out_dir.join("y.csv"), &cell.y)?;
            write_csv_matrix(&out_dir.join("z.csv"), cell.z.z())?;
            write_csv_matrix(&out_dir.join("s_true.csv"), &column(&cell.scene.s))?;
            write_csv_matrix(&out_dir.join("rfi.csv"), &cell.scene.f)?;
            write_csv_matrix(&out_dir.join("noise.csv"), &cell.scene.e)?;
            eprintln!(
                "wrote {}x{} CPI (SINR {sinr_db} dB, seed {seed}) to {}",
                cell.y.nrows(),
                cell.y.ncols(),
                out_dir.display()
            );
        }
        Command::Recover {
            config,
            z,
            method,
            out,
            truth,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let z = SignedCpi::new(read_csv(&z)?)?;
            if (z.n_fast(), z.m_slow()) != (cfg.cpi.n_fast, cfg.cpi.m_slow) {
                bail!(
                    "sign matrix is {}x{}, config expects {}x{}",
                    z.n_fast(),
                    z.m_slow(),
                    cfg.cpi.n_fast,
                    cfg.cpi.m_slow
                );
            }
            let schedule = cfg.cpi.threshold_schedule()?;
            let dicts = cfg.dictionaries()?;
            let res = run_method(method, &z, &schedule, &dicts, &cfg.solver)?;
            write_csv_matrix(&out, &column(&res.s_hat))?;
            eprintln!("{method}: {} iterations, converged = {}", res.iterations, res.converged);
            if let Some(t) = truth {
                let s = read_csv(&t)?;
                let s = DVector::from_column_slice(s.as_slice());
                println!("nre_db = {}", nre_db(&s, &res.s_hat)?);
            }
        }
        Command::Sweep {
            config,
            out,
            serial,
            no_runtime,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if serial {
                cfg.parallel = false;
            }
            if no_runtime {
                cfg.emit_runtime = false;
            }
            let outcome = run_experiment(&cfg)?;
            let f = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_csv(&outcome.records, BufWriter::new(f), cfg.emit_runtime)?;
            for fail in &outcome.failures {
                eprintln!(
                    "failed: {} at {} dB, seed {}: {}",
                    fail.method, fail.sinr_db, fail.seed, fail.message
                );
            }
            for &m in &cfg.methods {
                for &s in &cfg.sinr_grid_db {
                    if let Some(med) = outcome.median_nre(m, s) {
                        eprintln!("{m:>8} SINR {s:>6} dB  median NRE {med:8.2} dB");
                    }
                }
            }
        }
        Command::IngestCheck { path } => {
            let rfi = ingest_measured_rfi(&path)?;
            let d = &rfi.data;
            let rms = d.norm() / ((d.len().max(1)) as f64).sqrt();
            println!(
                "ok: {} x {} samples at {} Hz, min {}, max {}, rms {}",
                rfi.metadata.n_fast,
                rfi.metadata.m_slow,
                rfi.metadata.fs_hz,
                d.min(),
                d.max(),
                rms
            );
        }
        Command::Spectrum { input, rfi, out } => {
            let y = match (input, rfi) {
                (Some(p), _) => read_csv(&p)?,
                (None, Some(p)) => ingest_measured_rfi(&p)?.data,
                (None, None) => bail!("either --input or --rfi is required"),
            };
            write_csv_matrix(&out, &spectrum_map(&y))?;
        }
    }
    Ok(())
}
