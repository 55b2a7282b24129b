//! ISTA for smooth-plus-weakly-convex costs, step-size policies, and the
//! FISTA / TwIST comparison solvers, all with full iteration tracing.
//!
//! The iteration is `x^{k+1} = T_α(x^k − α∇f(x^k))`: a gradient step on the
//! smooth term followed by the penalty's prox. For a quadratic data term this
//! is the classical `x^{k+1} = T_α(x^k + αHᵀ(y − Hx^k))`.

use thiserror::Error;

use crate::linop::{gram_spectral_bounds, LinearMap, LinopError, SpectralBounds};
use crate::penalty::{Penalty, PenaltyError};
use crate::vecmath::{dist, dot, sub};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("divergence after {iterations} iterations: cost reached {cost}")]
    Divergence {
        iterations: usize,
        cost: f64,
        /// Trace of the finite-cost prefix of the run.
        trace: SolveTrace,
    },
}

/// A differentiable data term `f` with known gradient Lipschitz constant `σ`
/// and strong-convexity parameter `μ`.
pub trait SmoothTerm: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    /// `σ`: for all x, z, `‖∇f(x) − ∇f(z)‖ ≤ σ‖x − z‖`.
    fn lipschitz(&self) -> f64;
    /// `μ`: `f − (μ/2)‖·‖²` is convex.
    fn strong_convexity(&self) -> f64;
    fn quadratic(&self) -> Option<&QuadraticTerm> {
        None
    }
}

/// `f(x) = ½‖y − Hx‖²` with certified spectral bounds of `HᵀH`, so
/// `σ = σ_max` and `μ = σ_m`.
#[derive(Debug, Clone)]
pub struct QuadraticTerm {
    pub h: LinearMap,
    pub y: Vec<f64>,
    pub bounds: SpectralBounds,
}

impl QuadraticTerm {
    pub fn new(h: LinearMap, y: Vec<f64>, bounds: SpectralBounds) -> Result<Self, SolverError> {
        if y.len() != h.out_dim() {
            return Err(SolverError::Dimension(format!(
                "data vector has length {}, operator output is {}",
                y.len(),
                h.out_dim()
            )));
        }
        Ok(QuadraticTerm { h, y, bounds })
    }

    /// Builds the term and certifies the Gram bounds on the spot.
    pub fn with_certified_bounds(h: LinearMap, y: Vec<f64>) -> Result<Self, SolverError> {
        let bounds = gram_spectral_bounds(&h, 1e-12)?;
        QuadraticTerm::new(h, y, bounds)
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        sub(&self.h.apply(x), &self.y)
    }
}

impl SmoothTerm for QuadraticTerm {
    fn dim(&self) -> usize {
        self.h.in_dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        0.5 * dot(&r, &r)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.h.adjoint(&self.residual(x))
    }

    fn lipschitz(&self) -> f64 {
        self.bounds.sigma_max
    }

    fn strong_convexity(&self) -> f64 {
        self.bounds.sigma_m
    }

    fn quadratic(&self) -> Option<&QuadraticTerm> {
        Some(self)
    }
}

/// A smooth term given by closures, for custom data terms and test fixtures.
pub struct FnSmooth<E, G>
where
    E: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub dim: usize,
    pub sigma: f64,
    pub mu: f64,
    pub eval_fn: E,
    pub grad_fn: G,
}

impl<E, G> SmoothTerm for FnSmooth<E, G>
where
    E: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.eval_fn)(x)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        (self.grad_fn)(x)
    }

    fn lipschitz(&self) -> f64 {
        self.sigma
    }

    fn strong_convexity(&self) -> f64 {
        self.mu
    }
}

/// Greatest step with guaranteed monotone cost descent under the surrogate
/// (majorization) construction: `α₀ = 1/σ_max`.
pub fn max_step_mm(bounds: &SpectralBounds) -> Result<f64, SolverError> {
    if bounds.sigma_max <= 0.0 {
        return Err(SolverError::InvalidArgument(
            "sigma_max must be positive".into(),
        ));
    }
    Ok(1.0 / bounds.sigma_max)
}

/// Greatest step for which forward-backward convergence is guaranteed:
/// `α₁ = 2/(σ + ρ)`. The theory's bound is open; callers wanting a strict
/// margin apply a safety factor below 1.
pub fn max_step_fb(sigma: f64, rho: f64) -> Result<f64, SolverError> {
    if sigma + rho <= 0.0 {
        return Err(SolverError::InvalidArgument(
            "sigma + rho must be positive".into(),
        ));
    }
    if sigma <= 0.0 || rho < 0.0 {
        return Err(SolverError::InvalidArgument(format!(
            "need sigma > 0 and rho >= 0, got sigma={sigma}, rho={rho}"
        )));
    }
    Ok(2.0 / (sigma + rho))
}

/// Lipschitz bound of one ISTA sweep: `max(|1−ασ_max|, |1−ασ_m|)/(1−αρ)`.
/// Strictly below 1 exactly when `ρ < σ_m` and `α < 2/(σ_max+ρ)`.
pub fn contraction_rate(
    bounds: &SpectralBounds,
    rho: f64,
    alpha: f64,
) -> Result<f64, SolverError> {
    if alpha * rho >= 1.0 {
        return Err(PenaltyError::StepTooLarge {
            alpha,
            rho,
            product: alpha * rho,
        }
        .into());
    }
    let num = (1.0 - alpha * bounds.sigma_max)
        .abs()
        .max((1.0 - alpha * bounds.sigma_m).abs());
    Ok(num / (1.0 - alpha * rho))
}

/// How the step size is chosen for a run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum StepPolicy {
    /// `α = 1/σ_max` (the surrogate-descent boundary).
    Mm,
    /// `α = safety · 2/(σ + ρ)`; `safety = 1` reproduces the boundary step.
    Fb { safety: f64 },
    /// `α = 2/(σ_max + σ_m)`, the minimizer of the contraction rate.
    Contraction,
    Explicit { alpha: f64 },
}

impl StepPolicy {
    pub fn fb() -> Self {
        StepPolicy::Fb { safety: 1.0 }
    }

    /// Resolves the step for a given smooth term and penalty parameter; the
    /// resolved step must satisfy `α·ρ < 1`.
    pub fn resolve(&self, f: &dyn SmoothTerm, rho: f64) -> Result<f64, SolverError> {
        let alpha = match *self {
            StepPolicy::Mm => {
                if f.lipschitz() <= 0.0 {
                    return Err(SolverError::InvalidArgument("sigma_max must be positive".into()));
                }
                1.0 / f.lipschitz()
            }
            StepPolicy::Fb { safety } => {
                let safety_ok = safety > 0.0 && safety <= 1.0;
                if !safety_ok {
                    return Err(SolverError::InvalidArgument(format!(
                        "fb safety must lie in (0, 1], got {safety}"
                    )));
                }
                safety * max_step_fb(f.lipschitz(), rho)?
            }
            StepPolicy::Contraction => {
                let s = f.lipschitz() + f.strong_convexity();
                if s <= 0.0 {
                    return Err(SolverError::InvalidArgument(
                        "sigma_max + sigma_m must be positive".into(),
                    ));
                }
                2.0 / s
            }
            StepPolicy::Explicit { alpha } => alpha,
        };
        if alpha <= 0.0 {
            return Err(SolverError::InvalidArgument(format!(
                "resolved step must be positive, got {alpha}"
            )));
        }
        if alpha * rho >= 1.0 {
            return Err(PenaltyError::StepTooLarge {
                alpha,
                rho,
                product: alpha * rho,
            }
            .into());
        }
        Ok(alpha)
    }
}

/// Stopping configuration. Defaults: 10 000 iterations, fixed-point residual
/// 1e-10, stall when the relative cost change stays below 1e-14 for 50
/// consecutive iterations.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StopRule {
    pub max_iters: usize,
    pub fp_tol: f64,
    pub stall_rel_tol: f64,
    pub stall_window: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            max_iters: 10_000,
            fp_tol: 1e-10,
            stall_rel_tol: 1e-14,
            stall_window: 50,
        }
    }
}

impl StopRule {
    pub fn max_iters(n: usize) -> Self {
        StopRule {
            max_iters: n,
            ..StopRule::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIters,
    FpResidual,
    CostStall,
    /// Only appears in the trace attached to a divergence error.
    Diverged,
}

/// One row per iterate: cost, fixed-point residual
/// `‖x^k − T_α(x^k − α∇f(x^k))‖`, optional distance to a reference point, and
/// elapsed wall time.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub fp_residual: f64,
    pub dist_to_ref: Option<f64>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub final_point: Vec<f64>,
    pub stop_reason: StopReason,
}

impl SolveTrace {
    pub fn costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.cost)
    }

    pub fn distances(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.dist_to_ref).collect()
    }

    pub fn final_cost(&self) -> f64 {
        self.records.last().map(|r| r.cost).unwrap_or(f64::NAN)
    }

    /// First iteration whose distance to the reference drops to `tol` or
    /// below.
    pub fn iters_to_distance(&self, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.dist_to_ref.is_some_and(|d| d <= tol))
            .map(|r| r.iter)
    }

    /// CSV with header `iter,cost,fp_residual,dist_to_ref,elapsed_s`.
    /// `dist_to_ref` is empty when no reference was supplied; passing
    /// `include_elapsed = false` leaves the timing column empty, which keeps
    /// experiment artifacts byte-identical across runs.
    pub fn to_csv(&self, include_elapsed: bool) -> String {
        let mut out = String::from("iter,cost,fp_residual,dist_to_ref,elapsed_s\n");
        for r in &self.records {
            let dist = r.dist_to_ref.map(|d| format!("{d:?}")).unwrap_or_default();
            let elapsed = if include_elapsed {
                format!("{:?}", r.elapsed_s)
            } else {
                String::new()
            };
            out.push_str(&format!(
                "{},{:?},{:?},{},{}\n",
                r.iter, r.cost, r.fp_residual, dist, elapsed
            ));
        }
        out
    }
}

/// `D(x) = f(x) + P(x)`; `+∞` propagates from the penalty.
///
/// Panics on dimension mismatch between `x` and the penalty.
pub fn cost(f: &dyn SmoothTerm, p: &Penalty, x: &[f64]) -> f64 {
    f.eval(x) + p.eval(x).expect("cost: dimension mismatch")
}

/// One forward-backward sweep: `T_α(x − α∇f(x))`.
pub fn ista_step(
    f: &dyn SmoothTerm,
    p: &Penalty,
    x: &[f64],
    alpha: f64,
) -> Result<Vec<f64>, SolverError> {
    let g = f.grad(x);
    let shifted: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - alpha * gi).collect();
    Ok(p.prox(&shifted, alpha)?)
}

/// `‖x − T_α(x − α∇f(x))‖₂`; zero exactly at minimizers when `αρ < 1`.
pub fn fixed_point_residual(
    f: &dyn SmoothTerm,
    p: &Penalty,
    alpha: f64,
    x: &[f64],
) -> Result<f64, SolverError> {
    Ok(dist(x, &ista_step(f, p, x, alpha)?))
}

/// Surrogate pieces at anchor `xk`:
/// `g(x,xk) = ½⟨x−xk, (α⁻¹I − HᵀH)(x−xk)⟩` and `M(x,xk) = D(x) + g(x,xk)`.
/// `M` majorizes the cost exactly when `α ≤ 1/σ_max`; the value is computable
/// for any `α`.
pub fn mm_surrogate(
    f: &QuadraticTerm,
    p: &Penalty,
    alpha: f64,
    x: &[f64],
    xk: &[f64],
) -> (f64, f64) {
    let d = sub(x, xk);
    let hd = f.h.apply(&d);
    let g = 0.5 * (dot(&d, &d) / alpha - dot(&hd, &hd));
    (cost(f, p, x) + g, g)
}

fn check_dims(f: &dyn SmoothTerm, p: &Penalty, x0: &[f64]) -> Result<(), SolverError> {
    if x0.len() != f.dim() {
        return Err(SolverError::Dimension(format!(
            "x0 has length {}, smooth term expects {}",
            x0.len(),
            f.dim()
        )));
    }
    if p.dimension() != f.dim() {
        return Err(SolverError::Dimension(format!(
            "penalty dimension {} != smooth term dimension {}",
            p.dimension(),
            f.dim()
        )));
    }
    Ok(())
}

#[cfg(not(target_arch = "wasm32"))]
fn clock() -> Option<std::time::Instant> {
    Some(std::time::Instant::now())
}

#[cfg(target_arch = "wasm32")]
fn clock() -> Option<std::time::Instant> {
    None
}

fn elapsed_s(start: &Option<std::time::Instant>) -> f64 {
    start.map(|t| t.elapsed().as_secs_f64()).unwrap_or(0.0)
}

struct TraceBuilder<'a> {
    records: Vec<IterationRecord>,
    reference: Option<&'a [f64]>,
    start: Option<std::time::Instant>,
    stall_run: usize,
    stall_rel_tol: f64,
}

impl<'a> TraceBuilder<'a> {
    fn new(reference: Option<&'a [f64]>, stall_rel_tol: f64) -> Self {
        TraceBuilder {
            records: Vec::new(),
            reference,
            start: clock(),
            stall_run: 0,
            stall_rel_tol,
        }
    }

    fn push(&mut self, iter: usize, cost: f64, fp_residual: f64, x: &[f64]) {
        if let Some(prev) = self.records.last() {
            let rel = (prev.cost - cost).abs() / prev.cost.abs().max(f64::MIN_POSITIVE);
            if rel < self.stall_rel_tol {
                self.stall_run += 1;
            } else {
                self.stall_run = 0;
            }
        }
        self.records.push(IterationRecord {
            iter,
            cost,
            fp_residual,
            dist_to_ref: self.reference.map(|r| dist(x, r)),
            elapsed_s: elapsed_s(&self.start),
        });
    }

    fn stalled(&self, window: usize) -> bool {
        self.stall_run >= window
    }

    fn finish(self, final_point: Vec<f64>, stop_reason: StopReason) -> SolveTrace {
        SolveTrace {
            records: self.records,
            final_point,
            stop_reason,
        }
    }

    fn diverge(self, iterations: usize, cost: f64, last: Vec<f64>) -> SolverError {
        SolverError::Divergence {
            iterations,
            cost,
            trace: self.finish(last, StopReason::Diverged),
        }
    }
}

/// Iterates `x^{k+1} = T_α(x^k − α∇f(x^k))` from `x0` until a stop condition
/// fires, recording cost, fixed-point residual, and (optionally) distance to
/// `reference` at every iterate.
pub fn solve_ista(
    f: &dyn SmoothTerm,
    p: &Penalty,
    x0: &[f64],
    policy: &StepPolicy,
    stop: &StopRule,
    reference: Option<&[f64]>,
) -> Result<SolveTrace, SolverError> {
    check_dims(f, p, x0)?;
    let alpha = policy.resolve(f, p.rho())?;
    let mut tb = TraceBuilder::new(reference, stop.stall_rel_tol);
    let mut x = x0.to_vec();
    for k in 0..=stop.max_iters {
        let c = cost(f, p, &x);
        if !c.is_finite() {
            return Err(tb.diverge(k, c, x));
        }
        let x_next = ista_step(f, p, &x, alpha)?;
        let res = dist(&x, &x_next);
        tb.push(k, c, res, &x);
        if res <= stop.fp_tol {
            return Ok(tb.finish(x, StopReason::FpResidual));
        }
        if tb.stalled(stop.stall_window) {
            return Ok(tb.finish(x, StopReason::CostStall));
        }
        if k == stop.max_iters {
            return Ok(tb.finish(x, StopReason::MaxIters));
        }
        x = x_next;
    }
    unreachable!("loop exits via a stop condition")
}

const DIVERGENCE_COST_FACTOR: f64 = 1e12;

/// Constant-step accelerated iteration: prox step at `α` from the
/// extrapolated point, with the `t`-sequence `t₁ = 1`,
/// `t_{k+1} = (1+√(1+4t_k²))/2`. Convergence is not guaranteed for weakly
/// convex penalties; a cost exceeding `1e12 ×` the initial cost (or leaving
/// the finite range) aborts with a divergence error carrying the trace so far.
pub fn solve_fista(
    f: &dyn SmoothTerm,
    p: &Penalty,
    x0: &[f64],
    alpha: f64,
    stop: &StopRule,
    reference: Option<&[f64]>,
) -> Result<SolveTrace, SolverError> {
    check_dims(f, p, x0)?;
    StepPolicy::Explicit { alpha }.resolve(f, p.rho())?;
    let mut tb = TraceBuilder::new(reference, stop.stall_rel_tol);
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut t = 1.0f64;
    let c0 = cost(f, p, &x);
    if !c0.is_finite() {
        return Err(tb.diverge(0, c0, x));
    }
    let cap = DIVERGENCE_COST_FACTOR * c0.max(f64::MIN_POSITIVE);
    for k in 0..=stop.max_iters {
        let c = cost(f, p, &x);
        if !c.is_finite() || c > cap {
            return Err(tb.diverge(k, c, x));
        }
        let res = fixed_point_residual(f, p, alpha, &x)?;
        tb.push(k, c, res, &x);
        if res <= stop.fp_tol {
            return Ok(tb.finish(x, StopReason::FpResidual));
        }
        if tb.stalled(stop.stall_window) {
            return Ok(tb.finish(x, StopReason::CostStall));
        }
        if k == stop.max_iters {
            return Ok(tb.finish(x, StopReason::MaxIters));
        }
        let x_next = ista_step(f, p, &y, alpha)?;
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        y = x_next
            .iter()
            .zip(&x)
            .map(|(xn, xo)| xn + beta * (xn - xo))
            .collect();
        x = x_next;
        t = t_next;
    }
    unreachable!("loop exits via a stop condition")
}

/// Two-step (TwIST-style) parameters. With `κ = σ_m/σ_max` and
/// `ρ̄ = (1−√κ)/(1+√κ)`, the reference's suggestions are `a = 1 + ρ̄²` and
/// `b = 2a/(1+κ)`; the thresholded gradient step inside the recursion uses
/// `prox_step = 1/σ_max`, which plays the role of the unit step after the
/// conventional rescaling of the spectrum into `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TwistParams {
    pub a: f64,
    pub b: f64,
    pub prox_step: f64,
}

impl TwistParams {
    pub fn from_gram_bounds(bounds: &SpectralBounds) -> Result<Self, SolverError> {
        if bounds.sigma_max <= 0.0 {
            return Err(SolverError::InvalidArgument(
                "sigma_max must be positive".into(),
            ));
        }
        let kappa = (bounds.sigma_m / bounds.sigma_max).clamp(0.0, 1.0);
        let rbar = (1.0 - kappa.sqrt()) / (1.0 + kappa.sqrt());
        let a = 1.0 + rbar * rbar;
        let b = 2.0 * a / (1.0 + kappa);
        Ok(TwistParams {
            a,
            b,
            prox_step: 1.0 / bounds.sigma_max,
        })
    }
}

/// Two-step iteration
/// `x^{k+1} = (1−a)x^{k−1} + (a−b)x^k + b·Γ(x^k)` with
/// `Γ(x) = T_s(x − s∇f(x))` at `s = prox_step`; the first iteration (no
/// history) is a plain ISTA step. A combination step that lands outside the
/// penalty's domain (infinite cost) falls back to the plain ISTA step from
/// the current iterate.
pub fn solve_twist(
    f: &QuadraticTerm,
    p: &Penalty,
    x0: &[f64],
    params: &TwistParams,
    stop: &StopRule,
    reference: Option<&[f64]>,
) -> Result<SolveTrace, SolverError> {
    check_dims(f, p, x0)?;
    let s = params.prox_step;
    StepPolicy::Explicit { alpha: s }.resolve(f, p.rho())?;
    let mut tb = TraceBuilder::new(reference, stop.stall_rel_tol);
    let c0 = cost(f, p, x0);
    if !c0.is_finite() {
        return Err(tb.diverge(0, c0, x0.to_vec()));
    }
    let cap = DIVERGENCE_COST_FACTOR * c0.max(f64::MIN_POSITIVE);
    let mut x_prev = x0.to_vec();
    let mut x = x0.to_vec();
    for k in 0..=stop.max_iters {
        let c = cost(f, p, &x);
        if !c.is_finite() || c > cap {
            return Err(tb.diverge(k, c, x));
        }
        let step = ista_step(f, p, &x, s)?;
        let res = dist(&x, &step);
        tb.push(k, c, res, &x);
        if res <= stop.fp_tol {
            return Ok(tb.finish(x, StopReason::FpResidual));
        }
        if tb.stalled(stop.stall_window) {
            return Ok(tb.finish(x, StopReason::CostStall));
        }
        if k == stop.max_iters {
            return Ok(tb.finish(x, StopReason::MaxIters));
        }
        let x_next = if k == 0 {
            step
        } else {
            let combined: Vec<f64> = x_prev
                .iter()
                .zip(&x)
                .zip(&step)
                .map(|((xp, xc), g)| (1.0 - params.a) * xp + (params.a - params.b) * xc + params.b * g)
                .collect();
            if cost(f, p, &combined).is_finite() {
                combined
            } else {
                step
            }
        };
        x_prev = std::mem::replace(&mut x, x_next);
    }
    unreachable!("loop exits via a stop condition")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{make_convolution, make_dense};
    use crate::penalty::{make_firm, make_l1, separable_lift, Penalty, ScalarPenalty};
    use crate::testutil::assert_close;
    use rand::Rng;

    fn diag(values: &[f64]) -> LinearMap {
        let n = values.len();
        let mut entries = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            entries[i * n + i] = *v;
        }
        make_dense(entries, n, n).unwrap()
    }

    fn zero_penalty(n: usize) -> Penalty {
        separable_lift(ScalarPenalty::Zero, n)
    }

    #[test]
    fn ista_step_is_gradient_step_for_zero_penalty() {
        let f = QuadraticTerm::with_certified_bounds(diag(&[1.0, 2.0]), vec![1.0, 1.0]).unwrap();
        let p = zero_penalty(2);
        // grad at 0 is Hᵀ(H·0 − y) = (−1, −2); step 0.1 gives (0.1, 0.2)
        let out = ista_step(&f, &p, &[0.0, 0.0], 0.1).unwrap();
        assert_close(out[0], 0.1, 1e-15);
        assert_close(out[1], 0.2, 1e-15);
    }

    #[test]
    fn one_ista_step_solves_identity_l1() {
        // H = I: one step from 0 at alpha = 1 returns soft(y, lambda), the
        // exact minimizer of ½‖y−x‖² + λ‖x‖₁
        let y = vec![3.0, -0.4, 1.2];
        let f = QuadraticTerm::with_certified_bounds(diag(&[1.0, 1.0, 1.0]), y).unwrap();
        let p = separable_lift(make_l1(1.0).unwrap(), 3);
        let out = ista_step(&f, &p, &[0.0, 0.0, 0.0], 1.0).unwrap();
        assert_close(out[0], 2.0, 1e-12);
        assert_close(out[1], 0.0, 1e-12);
        assert_close(out[2], 0.2, 1e-12);
        // and it is a fixed point
        assert!(fixed_point_residual(&f, &p, 1.0, &out).unwrap() <= 1e-12);
    }

    #[test]
    fn step_arithmetic() {
        let bounds = SpectralBounds {
            sigma_m: 1.0,
            sigma_max: 9.0,
            method: crate::linop::SpectralMethod::ExactEig,
            tol: 0.0,
        };
        assert_close(max_step_mm(&bounds).unwrap(), 1.0 / 9.0, 0.0);
        assert_close(max_step_fb(9.0, 1.0).unwrap(), 0.2, 0.0);
        assert_close(max_step_fb(9.0, 0.0).unwrap(), 2.0 / 9.0, 0.0);
        let one = SpectralBounds { sigma_max: 1.0, ..bounds.clone() };
        assert_close(max_step_mm(&one).unwrap(), 1.0, 0.0);
        // ratio alpha1/alpha0 for sigma=9, rho=1 is 1.8
        assert_close(
            max_step_fb(9.0, 1.0).unwrap() / max_step_mm(&bounds).unwrap(),
            1.8,
            1e-15,
        );
    }

    #[test]
    fn contraction_rate_examples() {
        let b = SpectralBounds {
            sigma_m: 1.0,
            sigma_max: 9.0,
            method: crate::linop::SpectralMethod::ExactEig,
            tol: 0.0,
        };
        let r = contraction_rate(&b, 0.5, 0.2).unwrap();
        assert_close(r, 0.8 / 0.9, 1e-12);

        let perfect = SpectralBounds { sigma_m: 4.0, sigma_max: 4.0, ..b.clone() };
        assert_close(contraction_rate(&perfect, 0.0, 0.25).unwrap(), 0.0, 1e-15);

        // rho = sigma_m: the bound may reach 1; the value is still returned
        let r = contraction_rate(&b, 1.0, 1.0 / 9.0).unwrap();
        assert!(r >= 1.0 - 1e-12);
        assert!(contraction_rate(&b, 2.0, 0.5).is_err());
    }

    #[test]
    fn ista_converges_on_strongly_convex_quadratic() {
        let f = QuadraticTerm::with_certified_bounds(
            diag(&[1.0, 1.5, 3.0]),
            vec![3.0, -1.5, 6.0],
        )
        .unwrap();
        let p = zero_penalty(3);
        let trace = solve_ista(
            &f,
            &p,
            &[0.0; 3],
            &StepPolicy::Mm,
            &StopRule::default(),
            None,
        )
        .unwrap();
        assert_eq!(trace.stop_reason, StopReason::FpResidual);
        // least-squares solution is y ./ diag
        assert_close(trace.final_point[0], 3.0, 1e-8);
        assert_close(trace.final_point[1], -1.0, 1e-8);
        assert_close(trace.final_point[2], 2.0, 1e-8);
        assert!(fixed_point_residual(&f, &p, 0.1, &trace.final_point).unwrap() <= 1e-9);
    }

    #[test]
    fn ista_descent_within_fb_bound_and_counterexample_above() {
        let h = make_convolution(vec![1.0, 0.8, 0.2], 12).unwrap();
        let mut rng = crate::rng::seeded_rng(4);
        let y: Vec<f64> = (0..14).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let f = QuadraticTerm::with_certified_bounds(h, y).unwrap();
        let rho = f.bounds.sigma_m;
        let p = separable_lift(make_firm(0.5, rho).unwrap(), 12);

        let safe = solve_ista(
            &f,
            &p,
            &[0.0; 12],
            &StepPolicy::Fb { safety: 0.999 },
            &StopRule::max_iters(400),
            None,
        )
        .unwrap();
        let costs: Vec<f64> = safe.costs().collect();
        for w in costs.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10), "descent violated: {} -> {}", w[0], w[1]);
        }

        // far above the bound the cost is allowed to increase, and the trace
        // records it rather than erroring (as long as it stays finite)
        let alpha_big = 1.5 * max_step_fb(f.bounds.sigma_max, rho).unwrap();
        if alpha_big * rho < 1.0 {
            let wild = solve_ista(
                &f,
                &p,
                &[0.0; 12],
                &StepPolicy::Explicit { alpha: alpha_big },
                &StopRule::max_iters(300),
                None,
            )
            .unwrap();
            let costs: Vec<f64> = wild.costs().collect();
            assert!(
                costs.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)),
                "expected a cost increase above the fb bound"
            );
        }
    }

    #[test]
    fn ista_step_policy_rejects_too_large_steps() {
        let f = QuadraticTerm::with_certified_bounds(diag(&[1.0]), vec![1.0]).unwrap();
        let p = separable_lift(make_firm(1.0, 0.5).unwrap(), 1);
        let err = solve_ista(
            &f,
            &p,
            &[0.0],
            &StepPolicy::Explicit { alpha: 2.5 },
            &StopRule::default(),
            None,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            SolverError::Penalty(PenaltyError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn mm_surrogate_touches_and_majorizes() {
        let h = make_convolution(vec![1.0, 0.5], 6).unwrap();
        let y: Vec<f64> = vec![1.0, -0.5, 0.25, 0.0, 2.0, -1.0, 0.5];
        let f = QuadraticTerm::with_certified_bounds(h, y).unwrap();
        let p = separable_lift(make_firm(1.0, 0.4).unwrap(), 6);
        let alpha = 0.999 / f.bounds.sigma_max;
        let mut rng = crate::rng::seeded_rng(6);
        let xk: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();

        let (m_at_anchor, g_at_anchor) = mm_surrogate(&f, &p, alpha, &xk, &xk);
        assert_close(g_at_anchor, 0.0, 1e-15);
        assert_close(m_at_anchor, cost(&f, &p, &xk), 1e-12);

        for _ in 0..200 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (m, _) = mm_surrogate(&f, &p, alpha, &x, &xk);
            assert!(m >= cost(&f, &p, &x) - 1e-12);
        }

        // above 1/sigma_max the quadratic form is indefinite: push along the
        // top eigenvector direction to witness g < 0
        let alpha_big = 1.5 / f.bounds.sigma_max;
        let n = 6;
        let gram = f.h.assemble_gram();
        let m = nalgebra::DMatrix::from_row_slice(n, n, &gram);
        let eig = nalgebra::SymmetricEigen::new(m);
        let top = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let v: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
        let x: Vec<f64> = xk.iter().zip(&v).map(|(a, b)| a + b).collect();
        let (_, g) = mm_surrogate(&f, &p, alpha_big, &x, &xk);
        assert!(g < 0.0);
    }

    #[test]
    fn fista_beats_ista_on_ill_conditioned_quadratic() {
        // double zero at -0.6 makes the Gram poorly conditioned; that is the
        // regime where momentum pays off
        let h = make_convolution(vec![1.0, 1.2, 0.36], 30).unwrap();
        let mut rng = crate::rng::seeded_rng(8);
        let y: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = QuadraticTerm::with_certified_bounds(h, y).unwrap();
        let p = zero_penalty(30);
        let alpha = 1.0 / f.bounds.sigma_max;
        // stall disabled: compare pure fp-residual stopping
        let stop = StopRule {
            fp_tol: 1e-8,
            max_iters: 100_000,
            stall_rel_tol: 0.0,
            ..StopRule::default()
        };
        let ista = solve_ista(&f, &p, &vec![0.0; 30], &StepPolicy::Explicit { alpha }, &stop, None)
            .unwrap();
        let fista = solve_fista(&f, &p, &vec![0.0; 30], alpha, &stop, None).unwrap();
        assert_eq!(fista.stop_reason, StopReason::FpResidual);
        assert!(
            fista.records.len() < ista.records.len(),
            "fista {} vs ista {}",
            fista.records.len(),
            ista.records.len()
        );
    }

    #[test]
    fn fista_momentum_sequence_invariant() {
        // t1 = 1, t2 = (1+sqrt(5))/2, golden-ratio growth
        let mut t = 1.0f64;
        let mut expected = vec![t];
        for _ in 0..5 {
            t = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            expected.push(t);
        }
        assert_close(expected[1], (1.0 + 5.0f64.sqrt()) / 2.0, 1e-15);
        assert!(expected.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn twist_first_step_is_plain_ista() {
        let f = QuadraticTerm::with_certified_bounds(diag(&[1.0, 2.0]), vec![1.0, 2.0]).unwrap();
        let p = separable_lift(make_firm(0.5, 0.3).unwrap(), 2);
        let params = TwistParams::from_gram_bounds(&f.bounds).unwrap();
        let stop = StopRule::max_iters(1);
        let trace = solve_twist(&f, &p, &[0.0, 0.0], &params, &stop, None).unwrap();
        let manual = ista_step(&f, &p, &[0.0, 0.0], params.prox_step).unwrap();
        assert_eq!(trace.final_point, manual);
    }

    #[test]
    fn twist_converges_on_smooth_quadratic() {
        let h = make_convolution(vec![1.0, 0.7], 15).unwrap();
        let mut rng = crate::rng::seeded_rng(10);
        let y: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = QuadraticTerm::with_certified_bounds(h, y).unwrap();
        let p = zero_penalty(15);
        let params = TwistParams::from_gram_bounds(&f.bounds).unwrap();
        let trace = solve_twist(&f, &p, &[0.0; 15], &params, &StopRule::default(), None).unwrap();
        assert_eq!(trace.stop_reason, StopReason::FpResidual);
        assert!(
            fixed_point_residual(&f, &p, params.prox_step, &trace.final_point).unwrap() <= 1e-9
        );
    }

    #[test]
    fn trace_csv_schema() {
        let trace = SolveTrace {
            records: vec![IterationRecord {
                iter: 0,
                cost: 1.5,
                fp_residual: 0.25,
                dist_to_ref: None,
                elapsed_s: 0.125,
            }],
            final_point: vec![0.0],
            stop_reason: StopReason::MaxIters,
        };
        assert_eq!(
            trace.to_csv(true),
            "iter,cost,fp_residual,dist_to_ref,elapsed_s\n0,1.5,0.25,,0.125\n"
        );
        assert_eq!(
            trace.to_csv(false),
            "iter,cost,fp_residual,dist_to_ref,elapsed_s\n0,1.5,0.25,,\n"
        );
    }

    #[test]
    fn cost_propagates_infinity() {
        let f = QuadraticTerm::with_certified_bounds(diag(&[1.0, 1.0]), vec![0.0, 0.0]).unwrap();
        let p = separable_lift(crate::penalty::make_integer_lattice(4).unwrap(), 2);
        assert!(cost(&f, &p, &[1.0, 5.0]).is_infinite());
        assert!(cost(&f, &p, &[1.0, 3.0]).is_finite());
    }
}
