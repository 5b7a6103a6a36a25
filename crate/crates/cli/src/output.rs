//! Deterministic file writers.
//!
//! Every artifact embeds the SHA-256 of the raw configuration document
//! and the seed, so a result file can always be traced back to the exact
//! inputs that produced it. Floats are written with Rust's shortest
//! round-trip formatting; identical runs therefore produce byte-identical
//! files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use efk_core::{Error, Result, SpectralField};

/// Provenance fields stamped into every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Stamp {
    pub config_sha256: String,
    pub seed: u64,
}

impl Stamp {
    pub fn new(raw_config: &[u8], seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(raw_config);
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        Stamp {
            config_sha256: hex,
            seed,
        }
    }

    /// Comment line placed above CSV headers.
    fn csv_line(&self) -> String {
        format!(
            "# config_sha256={} seed={}\n",
            self.config_sha256, self.seed
        )
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_sha256: &'a str,
    seed: u64,
    #[serde(flatten)]
    payload: &'a T,
}

fn io_err(path: &Path, err: std::io::Error) -> Error {
    Error::Config(format!("cannot write {}: {err}", path.display()))
}

/// Pretty JSON document with the stamp fields first.
pub fn write_json<T: Serialize>(path: &Path, stamp: &Stamp, payload: &T) -> Result<()> {
    let doc = Stamped {
        config_sha256: &stamp.config_sha256,
        seed: stamp.seed,
        payload,
    };
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// One knot of a trajectory-like CSV.
pub struct TrajectoryRow<'a> {
    pub t: f64,
    pub field: &'a SpectralField,
    /// Extra trailing column (the residual check), when requested.
    pub residual: Option<f64>,
}

/// `t,norm_l2,a_1..a_N[,residual]` under the stamp comment.
pub fn write_trajectory_csv(
    path: &Path,
    stamp: &Stamp,
    n_modes: usize,
    rows: &[TrajectoryRow<'_>],
    with_residual: bool,
) -> Result<()> {
    let mut text = stamp.csv_line();
    text.push('t');
    text.push_str(",norm_l2");
    for k in 1..=n_modes {
        let _ = write!(text, ",a_{k}");
    }
    if with_residual {
        text.push_str(",residual");
    }
    text.push('\n');
    for row in rows {
        let _ = write!(text, "{},{}", row.t, row.field.norm_l2());
        for &c in row.field.coeffs() {
            let _ = write!(text, ",{c}");
        }
        if with_residual {
            let _ = write!(text, ",{}", row.residual.unwrap_or(f64::NAN));
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Newline-delimited JSON: a stamp object, then one record per knot.
pub fn write_trajectory_jsonl(
    path: &Path,
    stamp: &Stamp,
    rows: &[TrajectoryRow<'_>],
) -> Result<()> {
    let mut text = serde_json::to_string(stamp)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    text.push('\n');
    for row in rows {
        #[derive(Serialize)]
        struct Record<'a> {
            t: f64,
            norm_l2: f64,
            coeffs: &'a [f64],
            #[serde(skip_serializing_if = "Option::is_none")]
            residual: Option<f64>,
        }
        let record = Record {
            t: row.t,
            norm_l2: row.field.norm_l2(),
            coeffs: row.field.coeffs(),
            residual: row.residual,
        };
        text.push_str(
            &serde_json::to_string(&record)
                .map_err(|e| Error::Config(format!("serialization failed: {e}")))?,
        );
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Decay samples as `t,distance,log_distance,bound_rhs`.
pub fn write_decay_csv(
    path: &Path,
    stamp: &Stamp,
    times: &[f64],
    distances: &[f64],
    bound_rhs: impl Fn(f64) -> f64,
) -> Result<()> {
    let mut text = stamp.csv_line();
    text.push_str("t,distance,log_distance,bound_rhs\n");
    for (&t, &d) in times.iter().zip(distances) {
        let _ = writeln!(text, "{t},{d},{},{}", d.ln(), bound_rhs(t));
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}
