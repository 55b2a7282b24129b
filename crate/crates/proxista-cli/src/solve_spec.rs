//! Spec for the `solve` subcommand: a single custom instance (operator +
//! data + penalty + one solver), with CSV fixture loading for dense
//! operators and data vectors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use proxista_core::experiment::{ExperimentError, SolverChoice};
use proxista_core::linop::{
    compose, dense_from_csv, make_block_synthesis, make_convolution, vector_from_csv, LinearMap,
};
use proxista_core::penalty::ScalarPenalty;
use proxista_core::solver::StopRule;

pub const SOLVE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorConfig {
    /// Row-major headerless CSV file holding the matrix.
    DenseCsv { path: String },
    Convolution { filter: Vec<f64>, signal_len: usize },
    BlockSynthesis { block_len: usize, num_coeffs: usize },
    /// Blur composed with block synthesis: `H = F·G`.
    BlurredBlocks {
        blur: Vec<f64>,
        block_len: usize,
        num_coeffs: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSource {
    Inline(Vec<f64>),
    Csv { csv: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSpec {
    pub schema_version: u32,
    pub operator: OperatorConfig,
    pub y: VectorSource,
    pub penalty: ScalarPenalty,
    pub solver: SolverChoice,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "StopRule::default")]
    pub stop: StopRule,
}

impl SolveSpec {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let spec: SolveSpec =
            serde_json::from_str(text).map_err(|e| ExperimentError::Spec(e.to_string()))?;
        if spec.schema_version != SOLVE_SCHEMA_VERSION {
            return Err(ExperimentError::Spec(format!(
                "unsupported schema_version {}",
                spec.schema_version
            )));
        }
        Ok(spec)
    }

    /// Materializes the operator; relative CSV paths resolve against
    /// `base_dir` (the spec file's directory).
    pub fn build_operator(&self, base_dir: &Path) -> Result<LinearMap, ExperimentError> {
        let map = match &self.operator {
            OperatorConfig::DenseCsv { path } => {
                let full = base_dir.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    ExperimentError::Spec(format!("reading {}: {e}", full.display()))
                })?;
                dense_from_csv(&text)?
            }
            OperatorConfig::Convolution { filter, signal_len } => {
                make_convolution(filter.clone(), *signal_len)?
            }
            OperatorConfig::BlockSynthesis {
                block_len,
                num_coeffs,
            } => make_block_synthesis(*block_len, *num_coeffs)?,
            OperatorConfig::BlurredBlocks {
                blur,
                block_len,
                num_coeffs,
            } => {
                let g = make_block_synthesis(*block_len, *num_coeffs)?;
                let f = make_convolution(blur.clone(), g.out_dim())?;
                compose(f, g)?
            }
        };
        Ok(map)
    }

    pub fn load_y(&self, base_dir: &Path) -> Result<Vec<f64>, ExperimentError> {
        match &self.y {
            VectorSource::Inline(v) => Ok(v.clone()),
            VectorSource::Csv { csv } => {
                let full = base_dir.join(csv);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    ExperimentError::Spec(format!("reading {}: {e}", full.display()))
                })?;
                Ok(vector_from_csv(&text)?)
            }
        }
    }
}
