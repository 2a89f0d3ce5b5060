//! File formats, dataset IO, metrics and result export around the core
//! estimation library.
//!
//! * [`pfm`] — lossless float images (`PF`/`Pf`, little-endian)
//! * [`png`] — 8-bit RGB / mask and 16-bit depth ingestion
//! * [`manifest`] — the plain-text dataset manifest and [`manifest::load_dataset`]
//! * [`scene`] — scene/trajectory configuration files and in-memory dataset
//!   generation on top of the core renderer
//! * [`metrics`] — MAE on normals and RMSE on depth
//! * [`results`] — result directories, ground-truth export and the OBJ mesh

use std::path::PathBuf;

pub mod manifest;
pub mod metrics;
pub mod pfm;
pub mod png;
pub mod results;
pub mod scene;

/// IO-layer failures; every variant names the offending file where one
/// exists.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {what}")]
    Format { path: PathBuf, what: String },
    #[error("size mismatch: {what}")]
    SizeMismatch { what: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] mvpsr_core::Error),
}

/// Serializes a float with 17 significant digits, enough to round-trip f64.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::fmt_full;

    #[test]
    fn full_precision_round_trips() {
        for &v in &[0.0, 1.0 / 3.0, -2.718281828459045e-7, 1e17, 0.04] {
            let s = fmt_full(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
