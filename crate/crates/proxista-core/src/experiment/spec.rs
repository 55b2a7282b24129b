//! Declarative experiment descriptions. Specs are versioned JSON documents;
//! every random quantity carries an explicit seed.

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::solver::{StepPolicy, StopRule};

pub const SPEC_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    SparseDeconv(SparseDeconvSpec),
    IntegerBlocks(IntegerBlocksSpec),
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Spec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        match self {
            ExperimentSpec::SparseDeconv(s) => s.validate(),
            ExperimentSpec::IntegerBlocks(s) => s.validate(),
        }
    }

    /// Replaces all seeds with values derived from `seed` (noise = seed,
    /// signal = seed + 1), for `--seed` overrides.
    pub fn override_seed(&mut self, seed: u64) {
        match self {
            ExperimentSpec::SparseDeconv(s) => {
                s.noise.seed = seed;
                s.true_signal.seed = seed.wrapping_add(1);
            }
            ExperimentSpec::IntegerBlocks(s) => {
                s.noise.seed = seed;
                s.signal_seed = seed.wrapping_add(1);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Standard deviation of the white Gaussian noise added to the clean
    /// observation.
    pub std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseSignalConfig {
    /// Number of nonzero spikes.
    pub support: usize,
    /// Spike magnitudes are uniform on `[amp_min, amp_max]` with random sign.
    pub amp_min: f64,
    pub amp_max: f64,
    pub seed: u64,
}

/// How the penalty's weak-convexity parameter is chosen for the sparse
/// deconvolution run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum RhoRule {
    /// `ρ = σ_m`, the largest value keeping the cost convex.
    SigmaMin,
    Fixed { value: f64 },
}

/// How the integer-blocks penalty weight `τ` is chosen; the scaled penalty's
/// effective weak-convexity parameter is `2τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum TauRule {
    /// `τ = σ_m/2`, so the effective `ρ` is `σ_m` (maximal convex choice).
    HalfSigmaMin,
    Fixed { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Ista,
    Fista,
    Twist,
}

/// One solver to run, with an optional step override. ISTA requires a step
/// policy; FISTA defaults to the surrogate-descent step `1/σ_max`; TwIST
/// derives its parameters from the certified Gram bounds and ignores `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverChoice {
    pub name: String,
    pub solver: SolverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<StepPolicy>,
}

impl SolverChoice {
    pub fn ista(name: &str, step: StepPolicy) -> Self {
        SolverChoice {
            name: name.into(),
            solver: SolverKind::Ista,
            step: Some(step),
        }
    }
}

fn default_solver_set() -> Vec<SolverChoice> {
    vec![
        SolverChoice::ista("ista-alpha0", StepPolicy::Mm),
        SolverChoice::ista("ista-alpha1", StepPolicy::fb()),
        SolverChoice {
            name: "fista-alpha0".into(),
            solver: SolverKind::Fista,
            step: Some(StepPolicy::Mm),
        },
        SolverChoice {
            name: "twist".into(),
            solver: SolverKind::Twist,
            step: None,
        },
    ]
}

fn validate_solvers(solvers: &[SolverChoice]) -> Result<(), ExperimentError> {
    if solvers.is_empty() {
        return Err(ExperimentError::Spec("solver list is empty".into()));
    }
    let mut names: Vec<&str> = solvers.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    if names.len() != solvers.len() {
        return Err(ExperimentError::Spec("solver names must be unique".into()));
    }
    for s in solvers {
        if s.name.trim().is_empty() {
            return Err(ExperimentError::Spec("solver name must be non-empty".into()));
        }
        if s.solver == SolverKind::Ista && s.step.is_none() {
            return Err(ExperimentError::Spec(format!(
                "solver {:?} is ista but has no step policy",
                s.name
            )));
        }
    }
    Ok(())
}

fn validate_stop(stop: &StopRule) -> Result<(), ExperimentError> {
    let tol_ok = stop.fp_tol >= 0.0 && stop.stall_rel_tol >= 0.0;
    if stop.max_iters == 0 || !tol_ok {
        return Err(ExperimentError::Spec(format!("bad stop rule: {stop:?}")));
    }
    Ok(())
}

/// Sparse deconvolution: a length-`signal_len` spike train observed through a
/// full convolution with `filter` plus white Gaussian noise, recovered with a
/// firm penalty whose `ρ` follows `rho_rule` and whose knee is
/// `τ = tau_noise_multiplier · ρ · noise.std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseDeconvSpec {
    pub schema_version: u32,
    pub filter: Vec<f64>,
    pub signal_len: usize,
    pub true_signal: SparseSignalConfig,
    pub noise: NoiseConfig,
    pub tau_noise_multiplier: f64,
    pub rho_rule: RhoRule,
    pub solvers: Vec<SolverChoice>,
    pub stop: StopRule,
    /// Iteration budget of the reference run that estimates the minimizer.
    pub reference_iters: usize,
}

/// The committed default instance: a fixed length-11 minimum-phase filter
/// (all zeros strictly inside the unit disk, so the 60×50 Gram is
/// invertible), 10 random spikes on 50 samples, noise std 0.5, `ρ = σ_m`,
/// `τ = 3ρ·std`.
impl Default for SparseDeconvSpec {
    fn default() -> Self {
        SparseDeconvSpec {
            schema_version: SPEC_SCHEMA_VERSION,
            filter: vec![
                1.0, 0.6188, 0.0755, 0.0228, -0.0023, -0.0004, 0.0026, -0.0036, -0.0028, 0.0102,
                0.0061,
            ],
            signal_len: 50,
            true_signal: SparseSignalConfig {
                support: 10,
                amp_min: 1.0,
                amp_max: 3.0,
                seed: 7,
            },
            noise: NoiseConfig { std: 0.5, seed: 1001 },
            tau_noise_multiplier: 3.0,
            rho_rule: RhoRule::SigmaMin,
            solvers: default_solver_set(),
            stop: StopRule::default(),
            reference_iters: 10_000,
        }
    }
}

impl SparseDeconvSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.schema_version != SPEC_SCHEMA_VERSION {
            return Err(ExperimentError::Spec(format!(
                "unsupported schema_version {} (expected {SPEC_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.filter.is_empty() {
            return Err(ExperimentError::Spec("filter must be non-empty".into()));
        }
        if self.signal_len == 0 {
            return Err(ExperimentError::Spec("signal_len must be >= 1".into()));
        }
        if self.true_signal.support > self.signal_len {
            return Err(ExperimentError::Spec(format!(
                "support {} exceeds signal length {}",
                self.true_signal.support, self.signal_len
            )));
        }
        let amp_ok = self.true_signal.amp_min > 0.0
            && self.true_signal.amp_min <= self.true_signal.amp_max;
        if !amp_ok {
            return Err(ExperimentError::Spec(
                "need 0 < amp_min <= amp_max for spike amplitudes".into(),
            ));
        }
        if self.noise.std.is_nan() || self.noise.std < 0.0 {
            return Err(ExperimentError::Spec("noise std must be >= 0".into()));
        }
        if self.tau_noise_multiplier.is_nan() || self.tau_noise_multiplier <= 0.0 {
            return Err(ExperimentError::Spec("tau multiplier must be > 0".into()));
        }
        if let RhoRule::Fixed { value } = self.rho_rule {
            if value.is_nan() || value < 0.0 {
                return Err(ExperimentError::Spec("fixed rho must be >= 0".into()));
            }
        }
        if self.reference_iters == 0 {
            return Err(ExperimentError::Spec("reference_iters must be >= 1".into()));
        }
        validate_solvers(&self.solvers)?;
        validate_stop(&self.stop)
    }
}

/// Piecewise-constant blocks of `block_len` samples with integer levels in
/// `[0, lattice_max]`, observed through a blur and recovered with the scaled
/// integer-lattice penalty (`H = F·G`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerBlocksSpec {
    pub schema_version: u32,
    pub blur: Vec<f64>,
    pub block_len: usize,
    pub num_coeffs: usize,
    pub lattice_max: u32,
    pub signal_seed: u64,
    pub noise: NoiseConfig,
    pub tau_rule: TauRule,
    pub solvers: Vec<SolverChoice>,
    pub stop: StopRule,
    pub reference_iters: usize,
}

impl Default for IntegerBlocksSpec {
    fn default() -> Self {
        IntegerBlocksSpec {
            schema_version: SPEC_SCHEMA_VERSION,
            blur: vec![0.3, 0.4, 0.2, 0.1],
            block_len: 3,
            num_coeffs: 15,
            lattice_max: 4,
            signal_seed: 11,
            noise: NoiseConfig { std: 0.35, seed: 2002 },
            tau_rule: TauRule::HalfSigmaMin,
            solvers: default_solver_set(),
            stop: StopRule::default(),
            reference_iters: 10_000,
        }
    }
}

impl IntegerBlocksSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.schema_version != SPEC_SCHEMA_VERSION {
            return Err(ExperimentError::Spec(format!(
                "unsupported schema_version {} (expected {SPEC_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.blur.is_empty() {
            return Err(ExperimentError::Spec("blur filter must be non-empty".into()));
        }
        if self.block_len == 0 || self.num_coeffs == 0 {
            return Err(ExperimentError::Spec(
                "block_len and num_coeffs must be >= 1".into(),
            ));
        }
        if self.lattice_max < 1 {
            return Err(ExperimentError::Spec("lattice_max must be >= 1".into()));
        }
        if self.noise.std.is_nan() || self.noise.std < 0.0 {
            return Err(ExperimentError::Spec("noise std must be >= 0".into()));
        }
        if let TauRule::Fixed { value } = self.tau_rule {
            if value.is_nan() || value <= 0.0 {
                return Err(ExperimentError::Spec("fixed tau must be > 0".into()));
            }
        }
        if self.reference_iters == 0 {
            return Err(ExperimentError::Spec("reference_iters must be >= 1".into()));
        }
        validate_solvers(&self.solvers)?;
        validate_stop(&self.stop)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SparseDeconvSpec::default().validate().unwrap();
        IntegerBlocksSpec::default().validate().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let spec = ExperimentSpec::SparseDeconv(SparseDeconvSpec::default());
        let text = spec.to_json();
        let back = ExperimentSpec::from_json(&text).unwrap();
        assert_eq!(spec, back);

        let spec = ExperimentSpec::IntegerBlocks(IntegerBlocksSpec::default());
        assert_eq!(spec, ExperimentSpec::from_json(&spec.to_json()).unwrap());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = SparseDeconvSpec::default();
        s.filter.clear();
        assert!(s.validate().is_err());

        let mut s = SparseDeconvSpec::default();
        s.true_signal.support = 999;
        assert!(s.validate().is_err());

        let mut s = SparseDeconvSpec::default();
        s.solvers[0].name = s.solvers[1].name.clone();
        assert!(s.validate().is_err());

        let s = IntegerBlocksSpec {
            tau_rule: TauRule::Fixed { value: 0.0 },
            ..IntegerBlocksSpec::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn seed_override_touches_all_seeds() {
        let mut spec = ExperimentSpec::SparseDeconv(SparseDeconvSpec::default());
        spec.override_seed(99);
        match spec {
            ExperimentSpec::SparseDeconv(s) => {
                assert_eq!(s.noise.seed, 99);
                assert_eq!(s.true_signal.seed, 100);
            }
            _ => unreachable!(),
        }
    }
}
