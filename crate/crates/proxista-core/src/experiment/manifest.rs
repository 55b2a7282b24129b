//! The run manifest: every resolved quantity an output chart depends on,
//! recomputable from spec + seeds.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::linop::SpectralMethod;
use crate::solver::{StopRule, TwistParams};

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    /// Iterations actually run for the reference minimizer.
    pub iters_run: usize,
    /// Fixed-point residual of the reference at the certification step.
    pub fixed_point_residual: f64,
    /// Residual below the 1e-8 certification threshold.
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub experiment: String,
    pub software_version: String,
    pub rng_algorithm: String,
    /// Certified Gram spectral bounds of the (composite) operator.
    pub sigma_m: f64,
    pub sigma_max: f64,
    pub spectral_method: SpectralMethod,
    /// Penalty weak-convexity parameter actually in effect.
    pub rho: f64,
    /// Penalty knee/weight parameter actually in effect.
    pub tau: f64,
    /// Resolved step per solver (TwIST reports its prox step).
    pub alpha_by_solver: BTreeMap<String, f64>,
    /// `α₁/α₀ = 2σ_max/(σ_max + ρ)` from the certified eigenvalues.
    pub alpha_ratio_fb_over_mm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twist_params: Option<TwistParams>,
    pub seeds: BTreeMap<String, u64>,
    pub noise_std: f64,
    pub stop: StopRule,
    pub reference: ReferenceInfo,
    /// Total wall time of the run in seconds (informational; not covered by
    /// the byte-determinism guarantee).
    pub timing_s: f64,
    /// The exact spec this run resolved, echoed for reproducibility.
    pub spec: serde_json::Value,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
