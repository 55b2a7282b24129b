//! Black-box certification of operator properties: empirical Lipschitz
//! ratios, β-averagedness, eigenvalue tests for symmetric affine maps,
//! fixed-point/minimizer certification, and linear-rate estimation.
//!
//! Sampled checks can only falsify, never prove; every report carries its
//! trial count and seed so failures replay exactly, and the stored witness
//! pair reproduces the reported worst value on re-evaluation.

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use crate::penalty::{Penalty, ScalarPenalty};
use crate::rng::seeded_rng;
use crate::solver::{fixed_point_residual, QuadraticTerm, SmoothTerm, SolverError};
use crate::vecmath::dist;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("matrix is not symmetric: max |m_ij - m_ji| = {max_dev}")]
    Asymmetric { max_dev: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Default absolute tolerance on Lipschitz-style ratios.
pub const RATIO_TOL: f64 = 1e-9;

/// Default sampling radius: componentwise uniform on `[-R, R]` covers every
/// threshold breakpoint of the default penalties.
pub const DEFAULT_RADIUS: f64 = 10.0;

type ProbeFn<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + Sync + 'a>;

/// An opaque deterministic map together with a seeded point sampler.
pub struct OperatorProbe<'a> {
    dim: usize,
    map: ProbeFn<'a>,
    radius: f64,
}

impl<'a> OperatorProbe<'a> {
    pub fn new<F>(dim: usize, map: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync + 'a,
    {
        OperatorProbe {
            dim,
            map: Box::new(map),
            radius: DEFAULT_RADIUS,
        }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.map)(x)
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        (0..self.dim).map(|_| rng.gen_range(-self.radius..self.radius)).collect()
    }
}

/// Outcome of one sampled property check.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub trials: usize,
    pub seed: u64,
    pub worst: f64,
    pub witness_a: Vec<f64>,
    pub witness_b: Vec<f64>,
    pub verdict: bool,
    pub tolerance: f64,
}

impl PropertyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Max over sampled pairs of `‖S(x) − S(z)‖ / ‖x − z‖` (pairs closer than
/// 1e-12 are skipped). The verdict reports non-expansiveness:
/// `worst ≤ 1 + RATIO_TOL`.
pub fn empirical_lipschitz(probe: &OperatorProbe, trials: usize, seed: u64) -> PropertyReport {
    lipschitz_report("lipschitz-ratio", probe, trials, seed, RATIO_TOL)
}

fn lipschitz_report(
    property: &str,
    probe: &OperatorProbe,
    trials: usize,
    seed: u64,
    tol: f64,
) -> PropertyReport {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    let mut witness_a = vec![0.0; probe.dim];
    let mut witness_b = vec![0.0; probe.dim];
    for _ in 0..trials {
        let x = probe.sample(&mut rng);
        let z = probe.sample(&mut rng);
        let denom = dist(&x, &z);
        if denom < 1e-12 {
            continue;
        }
        let ratio = dist(&probe.eval(&x), &probe.eval(&z)) / denom;
        if ratio > worst {
            worst = ratio;
            witness_a = x;
            witness_b = z;
        }
    }
    PropertyReport {
        property: property.to_string(),
        trials,
        seed,
        worst,
        witness_a,
        witness_b,
        verdict: worst <= 1.0 + tol,
        tolerance: tol,
    }
}

/// `S` is β-averaged iff `(S − (1−β)I)/β` is non-expansive; this checks the
/// transformed map's empirical Lipschitz ratio against `1 + tol`.
pub fn check_averaged(
    probe: &OperatorProbe,
    beta: f64,
    trials: usize,
    seed: u64,
    tol: f64,
) -> PropertyReport {
    assert!(beta > 0.0 && beta < 1.0, "beta must lie in (0,1)");
    let inner = OperatorProbe {
        dim: probe.dim,
        radius: probe.radius,
        map: Box::new(move |x: &[f64]| {
            let sx = probe.eval(x);
            sx.iter()
                .zip(x)
                .map(|(s, xi)| (s - (1.0 - beta) * xi) / beta)
                .collect()
        }),
    };
    let mut report = lipschitz_report(
        &format!("averaged(beta={beta})"),
        &inner,
        trials,
        seed,
        tol,
    );
    report.tolerance = tol;
    report
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AveragedInterval {
    pub eig_min: f64,
    pub eig_max: f64,
    pub averaged: bool,
}

/// Slack on the closed end of the `(-1, 1]` eigenvalue test, absorbing
/// eigensolver round-off; the open end at `-1` stays strict.
const AFFINE_EIG_SLACK: f64 = 1e-12;

/// For an affine map `S(x) = Mx + u` with symmetric `M`, `S` is averaged for
/// some β iff the eigenvalues of `M` lie in `(-1, 1]`. Takes `M` row-major.
pub fn affine_averaged_interval(
    n: usize,
    entries: &[f64],
) -> Result<AveragedInterval, AnalysisError> {
    if entries.len() != n * n {
        return Err(AnalysisError::Dimension(format!(
            "expected {n}x{n} = {} entries, got {}",
            n * n,
            entries.len()
        )));
    }
    let mut max_dev = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_dev = max_dev.max((entries[i * n + j] - entries[j * n + i]).abs());
        }
    }
    if max_dev > 1e-12 {
        return Err(AnalysisError::Asymmetric { max_dev });
    }
    let m = DMatrix::from_row_slice(n, n, entries);
    let m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigenvalues();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &e in eig.iter() {
        lo = lo.min(e);
        hi = hi.max(e);
    }
    Ok(AveragedInterval {
        eig_min: lo,
        eig_max: hi,
        averaged: lo > -1.0 && hi <= 1.0 + AFFINE_EIG_SLACK,
    })
}

/// Row-major matrix of `V_α = (I − α·Gram)/(1 − αρ)`, the scaled affine part
/// of the gradient sweep.
pub fn v_alpha_matrix(gram: &[f64], n: usize, alpha: f64, rho: f64) -> Vec<f64> {
    assert_eq!(gram.len(), n * n);
    let scale = 1.0 / (1.0 - alpha * rho);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            out[i * n + j] = scale * (id - alpha * gram[i * n + j]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MinimizerCertificate {
    pub pass: bool,
    pub residual: f64,
    pub tolerance: f64,
}

/// Fixed point of the forward-backward sweep ⇔ minimizer of `f + P` (for
/// `α·ρ < 1`); certifies by the fixed-point residual at `alpha_cert`.
pub fn certify_minimizer(
    f: &dyn SmoothTerm,
    p: &Penalty,
    x: &[f64],
    alpha_cert: f64,
    tol: f64,
) -> Result<MinimizerCertificate, SolverError> {
    let residual = fixed_point_residual(f, p, alpha_cert, x)?;
    Ok(MinimizerCertificate {
        pass: residual <= tol,
        residual,
        tolerance: tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateEstimate {
    Rate { rate: f64, window: (usize, usize) },
    /// Too few entries above machine noise to fit a slope.
    ConvergedFlat,
}

impl RateEstimate {
    pub fn rate(&self) -> Option<f64> {
        match self {
            RateEstimate::Rate { rate, .. } => Some(*rate),
            RateEstimate::ConvergedFlat => None,
        }
    }
}

const RATE_FLOOR: f64 = 1e-13;
const RATE_MIN_POINTS: usize = 10;

/// Least-squares slope of `log(distance)` over the trailing `tail_fraction`
/// of the entries still above `1e-13`, exponentiated into a per-iteration
/// rate.
pub fn estimate_linear_rate(distances: &[f64], tail_fraction: f64) -> RateEstimate {
    let pts: Vec<(usize, f64)> = distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > RATE_FLOOR)
        .map(|(k, &d)| (k, d.ln()))
        .collect();
    let take = ((pts.len() as f64) * tail_fraction).ceil() as usize;
    let window = &pts[pts.len().saturating_sub(take)..];
    if window.len() < RATE_MIN_POINTS {
        return RateEstimate::ConvergedFlat;
    }
    let n = window.len() as f64;
    let mean_k = window.iter().map(|(k, _)| *k as f64).sum::<f64>() / n;
    let mean_l = window.iter().map(|(_, l)| *l).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, l) in window {
        let dk = *k as f64 - mean_k;
        num += dk * (l - mean_l);
        den += dk * dk;
    }
    if den == 0.0 {
        return RateEstimate::ConvergedFlat;
    }
    RateEstimate::Rate {
        rate: (num / den).exp(),
        window: (window[0].0, window[window.len() - 1].0),
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CompositionAveraged {
    /// Smallest grid β for which the composite passed, if any.
    pub best_beta: Option<f64>,
    /// Report at `best_beta`, or at the least-violating β when all fail.
    pub report: PropertyReport,
}

/// Searches β over `{0.05, 0.10, …, 0.95}` for which the composite
/// `probe1 ∘ probe2` passes `check_averaged`.
pub fn composition_averaged_check(
    probe1: &OperatorProbe,
    probe2: &OperatorProbe,
    trials: usize,
    seed: u64,
) -> Result<CompositionAveraged, AnalysisError> {
    if probe1.dim != probe2.dim {
        return Err(AnalysisError::Dimension(format!(
            "composition of dim {} with dim {}",
            probe1.dim, probe2.dim
        )));
    }
    let composite = OperatorProbe {
        dim: probe2.dim,
        radius: probe2.radius,
        map: Box::new(|x: &[f64]| probe1.eval(&probe2.eval(x))),
    };
    let mut fallback: Option<PropertyReport> = None;
    for i in 1..=19usize {
        let beta = i as f64 * 0.05;
        let report = check_averaged(&composite, beta, trials, seed, RATIO_TOL);
        if report.verdict {
            return Ok(CompositionAveraged {
                best_beta: Some(beta),
                report,
            });
        }
        let better = fallback.as_ref().is_none_or(|f| report.worst < f.worst);
        if better {
            fallback = Some(report);
        }
    }
    Ok(CompositionAveraged {
        best_beta: None,
        report: fallback.expect("grid is non-empty"),
    })
}

/// Probe for the componentwise threshold `T_α`.
pub fn t_alpha_probe<'a>(p: &'a Penalty, alpha: f64) -> OperatorProbe<'a> {
    OperatorProbe::new(p.dimension(), move |x: &[f64]| {
        p.prox(x, alpha).expect("alpha*rho < 1 checked by caller")
    })
}

/// Probe for the scaled threshold `S_α(x) = T_α((1−αρ)x)`, the 1/2-averaged
/// factor of the sweep.
pub fn s_alpha_probe<'a>(p: &'a ScalarPenalty, alpha: f64) -> OperatorProbe<'a> {
    let shrink = 1.0 - alpha * p.rho();
    OperatorProbe::new(1, move |x: &[f64]| {
        vec![p.prox(shrink * x[0], alpha).expect("alpha*rho < 1 checked by caller")]
    })
}

/// Probe for the gradient sweep `U_α(x) = x − α∇f(x)`; for a quadratic term
/// this is the affine map `αHᵀy + (I − αHᵀH)x`.
pub fn u_alpha_probe<'a>(f: &'a dyn SmoothTerm, alpha: f64) -> OperatorProbe<'a> {
    OperatorProbe::new(f.dim(), move |x: &[f64]| {
        let g = f.grad(x);
        x.iter().zip(&g).map(|(xi, gi)| xi - alpha * gi).collect()
    })
}

/// Probe for `V_α = U_α/(1−αρ)`.
pub fn v_alpha_probe<'a>(f: &'a dyn SmoothTerm, alpha: f64, rho: f64) -> OperatorProbe<'a> {
    let scale = 1.0 / (1.0 - alpha * rho);
    OperatorProbe::new(f.dim(), move |x: &[f64]| {
        let g = f.grad(x);
        x.iter().zip(&g).map(|(xi, gi)| scale * (xi - alpha * gi)).collect()
    })
}

/// Probe for the full sweep `T_α ∘ U_α`.
pub fn ista_sweep_probe<'a>(
    f: &'a dyn SmoothTerm,
    p: &'a Penalty,
    alpha: f64,
) -> OperatorProbe<'a> {
    OperatorProbe::new(f.dim(), move |x: &[f64]| {
        crate::solver::ista_step(f, p, x, alpha).expect("alpha*rho < 1 checked by caller")
    })
}

/// Gram matrix of a quadratic term, row-major (convenience for the affine
/// eigenvalue tests).
pub fn gram_of(f: &QuadraticTerm) -> Vec<f64> {
    f.h.assemble_gram()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::{make_firm, separable_lift};
    use crate::testutil::assert_close;

    #[test]
    fn lipschitz_of_identity_and_scaling() {
        let id = OperatorProbe::new(3, |x: &[f64]| x.to_vec());
        let r = empirical_lipschitz(&id, 500, 1);
        assert_close(r.worst, 1.0, 1e-12);
        assert!(r.verdict);

        let twice = OperatorProbe::new(1, |x: &[f64]| vec![2.0 * x[0]]);
        let r = empirical_lipschitz(&twice, 500, 2);
        assert_close(r.worst, 2.0, 1e-12);
        assert!(!r.verdict);
    }

    #[test]
    fn lipschitz_witness_reproduces_worst() {
        let firm = make_firm(1.0, 0.5).unwrap();
        let p = separable_lift(firm, 1);
        let probe = t_alpha_probe(&p, 1.0);
        let r = empirical_lipschitz(&probe, 10_000, 3);
        let re = dist(&probe.eval(&r.witness_a), &probe.eval(&r.witness_b))
            / dist(&r.witness_a, &r.witness_b);
        assert_close(re, r.worst, 1e-12);
        // ramp slope 1/(1-alpha rho) = 2 is approached on in-ramp pairs
        assert!(r.worst > 1.9 && r.worst <= 2.0 + 1e-9, "worst = {}", r.worst);
    }

    #[test]
    fn averaged_checks() {
        // the 1/2-average of the reflection is the zero map: passes at 1/2
        // with ratio exactly 1, fails at 1/4
        let zero = OperatorProbe::new(2, |_: &[f64]| vec![0.0, 0.0]);
        let r = check_averaged(&zero, 0.5, 1000, 4, RATIO_TOL);
        assert!(r.verdict);
        assert_close(r.worst, 1.0, 1e-12);
        assert!(!check_averaged(&zero, 0.25, 1000, 5, RATIO_TOL).verdict);

        // the reflection itself is non-expansive but not averaged
        let refl = OperatorProbe::new(2, |x: &[f64]| vec![-x[0], -x[1]]);
        assert!(empirical_lipschitz(&refl, 1000, 6).verdict);
        for beta in [0.25, 0.5, 0.75] {
            assert!(!check_averaged(&refl, beta, 1000, 7, RATIO_TOL).verdict);
        }

        // identity passes at any beta
        let id = OperatorProbe::new(2, |x: &[f64]| x.to_vec());
        for beta in [0.05, 0.5, 0.95] {
            assert!(check_averaged(&id, beta, 500, 8, RATIO_TOL).verdict);
        }
    }

    #[test]
    fn scaled_prox_is_half_averaged() {
        let firm = make_firm(1.0, 0.5).unwrap();
        for alpha in [0.4, 1.0, 1.9] {
            let probe = s_alpha_probe(&firm, alpha);
            let r = check_averaged(&probe, 0.5, 10_000, 9, RATIO_TOL);
            assert!(r.verdict, "alpha={alpha}: worst {}", r.worst);
        }
    }

    #[test]
    fn affine_interval_examples() {
        let id = affine_averaged_interval(2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(id.averaged);
        assert_close(id.eig_min, 1.0, 1e-12);
        assert_close(id.eig_max, 1.0, 1e-12);

        let neg = affine_averaged_interval(2, &[-1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(!neg.averaged);
        assert_close(neg.eig_min, -1.0, 1e-12);

        assert!(matches!(
            affine_averaged_interval(2, &[0.0, 1.0, 0.5, 0.0]),
            Err(AnalysisError::Asymmetric { .. })
        ));
    }

    #[test]
    fn rate_estimation() {
        let geo: Vec<f64> = (0..40).map(|k| 0.5f64.powi(k)).collect();
        match estimate_linear_rate(&geo, 0.5) {
            RateEstimate::Rate { rate, .. } => assert_close(rate, 0.5, 1e-6),
            RateEstimate::ConvergedFlat => panic!("expected a rate"),
        }

        let flat = vec![0.25; 30];
        match estimate_linear_rate(&flat, 0.5) {
            RateEstimate::Rate { rate, .. } => assert_close(rate, 1.0, 1e-12),
            RateEstimate::ConvergedFlat => panic!("expected a rate"),
        }

        let tiny = vec![1e-16; 30];
        assert_eq!(estimate_linear_rate(&tiny, 0.5), RateEstimate::ConvergedFlat);
    }

    #[test]
    fn averaged_implies_nonexpansive() {
        let firm = make_firm(1.0, 0.5).unwrap();
        for alpha in [0.4, 1.0, 1.9] {
            let probe = s_alpha_probe(&firm, alpha);
            let averaged = check_averaged(&probe, 0.5, 5_000, 31, RATIO_TOL);
            assert!(averaged.verdict);
            let lip = empirical_lipschitz(&probe, 5_000, 31);
            assert!(lip.verdict, "averaged map with ratio {} > 1", lip.worst);
        }
    }

    #[test]
    fn affine_verdict_agrees_with_empirical_check() {
        // diagonal test suite: spectra inside (-1, 1], at the open boundary,
        // and outside on both ends
        let cases: [(&[f64], bool); 5] = [
            (&[0.2, -0.5, 1.0], true),
            (&[-0.999, 0.3], true),
            (&[-1.0, 0.0], false),
            (&[1.2, 0.0], false),
            (&[-1.5, 0.9], false),
        ];
        for (diag, expect_averaged) in cases {
            let n = diag.len();
            let mut m = vec![0.0; n * n];
            for (i, v) in diag.iter().enumerate() {
                m[i * n + i] = *v;
            }
            let verdict = affine_averaged_interval(n, &m).unwrap().averaged;
            assert_eq!(verdict, expect_averaged, "diag {diag:?}");

            // empirical search over the construction's beta region
            let eig_min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
            let affine = OperatorProbe::new(n, move |x: &[f64]| {
                x.iter().zip(diag).map(|(xi, d)| d * xi + 0.25).collect()
            });
            let mut any_beta_passes = false;
            // beta must satisfy 1 - 2*beta <= eig_min, i.e.
            // beta >= (1 - eig_min)/2; scan from that threshold upward
            let beta_lo = ((1.0 - eig_min) / 2.0).clamp(0.05, 0.9999);
            for i in 0..=20 {
                let beta = (beta_lo + (0.9999 - beta_lo) * i as f64 / 20.0).min(0.9999);
                if check_averaged(&affine, beta, 2_000, 33, RATIO_TOL).verdict {
                    any_beta_passes = true;
                    break;
                }
            }
            assert_eq!(
                any_beta_passes, expect_averaged,
                "empirical disagreement for diag {diag:?}"
            );
        }
    }

    #[test]
    fn composition_of_identities_passes_smallest_beta() {
        let id1 = OperatorProbe::new(2, |x: &[f64]| x.to_vec());
        let id2 = OperatorProbe::new(2, |x: &[f64]| x.to_vec());
        let r = composition_averaged_check(&id1, &id2, 500, 10).unwrap();
        assert_eq!(r.best_beta, Some(0.05));
    }

    #[test]
    fn composition_dimension_mismatch() {
        let a = OperatorProbe::new(2, |x: &[f64]| x.to_vec());
        let b = OperatorProbe::new(3, |x: &[f64]| x.to_vec());
        assert!(composition_averaged_check(&a, &b, 10, 0).is_err());
    }

    #[test]
    fn report_json_schema() {
        let id = OperatorProbe::new(1, |x: &[f64]| x.to_vec());
        let r = empirical_lipschitz(&id, 10, 11);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in [
            "property", "trials", "seed", "worst", "witness_a", "witness_b", "verdict",
            "tolerance",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }
}
