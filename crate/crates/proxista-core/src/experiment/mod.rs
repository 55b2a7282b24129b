//! Reproducible experiment harness: declarative specs, seeded instance
//! construction, solver comparison runs, and CSV/SVG artifact emission with a
//! full run manifest.
//!
//! Runs are deterministic: identical spec and seeds produce byte-identical
//! CSV and SVG artifacts on one platform (the manifest additionally records
//! wall-clock timing, which is informational and excluded from that
//! guarantee).

mod gallery;
mod integer_blocks;
mod manifest;
mod runner;
mod sparse_deconv;
mod spec;
pub mod svg;
mod verify;

pub use gallery::{plot_penalty_gallery, GallerySpec};
pub use integer_blocks::run_integer_blocks;
pub use manifest::{ReferenceInfo, RunManifest};
pub use sparse_deconv::{build_sparse_deconv_instance, run_sparse_deconv, SparseDeconvInstance};
pub use spec::{
    ExperimentSpec, IntegerBlocksSpec, NoiseConfig, RhoRule, SolverChoice, SolverKind,
    SparseDeconvSpec, SparseSignalConfig, TauRule,
};
pub use verify::{verify_claims, VerifyBundle, VerifySpec};

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::linop::LinopError;
use crate::penalty::PenaltyError;
use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// The spec is invalid or inconsistent with the instance it describes.
    #[error("spec: {0}")]
    Spec(String),
    /// A solver's cost blew up; the error carries the offending solver name.
    #[error("solver {name} diverged: {source}")]
    Divergence { name: String, source: SolverError },
    #[error(transparent)]
    Solver(SolverError),
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<SolverError> for ExperimentError {
    fn from(e: SolverError) -> Self {
        // A step violating alpha*rho < 1 is a spec problem: reject with the
        // bound spelled out rather than surfacing a solver failure.
        if let SolverError::Penalty(PenaltyError::StepTooLarge { alpha, rho, product }) = &e {
            return ExperimentError::Spec(format!(
                "resolved step alpha={alpha} violates alpha*rho < 1 (rho={rho}, product={product}); \
                 choose a smaller step or a weaker penalty"
            ));
        }
        ExperimentError::Solver(e)
    }
}

/// Which artifact families a run emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Svg,
    Both,
}

impl OutputFormat {
    pub fn csv(&self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn svg(&self) -> bool {
        matches!(self, OutputFormat::Svg | OutputFormat::Both)
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "svg" => Ok(OutputFormat::Svg),
            "both" => Ok(OutputFormat::Both),
            other => Err(format!("unknown format {other:?} (expected csv|svg|both)")),
        }
    }
}

/// One named in-memory output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Artifact {
            name: name.into(),
            contents: contents.into(),
        }
    }
}

/// Everything a run produced: deterministic artifacts plus the manifest.
#[derive(Debug)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub artifacts: Vec<Artifact>,
}

impl RunOutput {
    /// Writes all artifacts and `manifest.json` into `dir`, creating it if
    /// needed. Writes are serialized per output directory.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            let mut f = std::fs::File::create(dir.join(&a.name))?;
            f.write_all(a.contents.as_bytes())?;
        }
        let mut f = std::fs::File::create(dir.join("manifest.json"))?;
        f.write_all(self.manifest.to_json().as_bytes())?;
        Ok(())
    }
}

/// Artifact-safe file stem from a solver name.
pub(crate) fn sanitize_name(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '-'
            }
        })
        .collect()
}
