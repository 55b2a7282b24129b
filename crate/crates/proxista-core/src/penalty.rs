//! Weakly convex penalties and their proximity operators.
//!
//! A penalty `P` is `ρ`-weakly convex when `P(x) + (ρ/2)‖x‖²` is convex. Its
//! proximity operator at step `α`,
//!
//! ```text
//! T_α(z) = argmin_x  (1/(2α))·(x − z)² + P(x),
//! ```
//!
//! has a unique solution whenever `α·ρ < 1`; calling `prox` outside that range
//! is a hard error, never a silent clamp.
//!
//! Note on the firm penalty: some write-ups print the minimax-concave penalty
//! as `τ|s| − s²/(2ρ)`, which fails to be continuous at `|s| = τ/ρ` and is not
//! `ρ`-weakly convex. The form implemented here, `τ|s| − ρs²/2` capped at
//! `τ²/(2ρ)`, is the one consistent with the firm-threshold prox and with
//! `ρ`-weak convexity.

use rand::Rng;
use thiserror::Error;

use crate::rng::seeded_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PenaltyError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("step too large: alpha*rho = {product} >= 1 (alpha={alpha}, rho={rho}); the prox problem loses unique solvability")]
    StepTooLarge { alpha: f64, rho: f64, product: f64 },
    #[error("dimension mismatch: penalty expects {expected}, point has {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty grid for prox oracle")]
    EmptyGrid,
}

/// A scalar penalty `P: R → [0, +∞]` with known weak-convexity parameter and a
/// closed-form prox.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ScalarPenalty {
    /// `P ≡ 0`; prox is the identity.
    Zero,
    /// `λ|s|`; prox is the soft threshold at `αλ`.
    L1 { weight: f64 },
    /// Minimax-concave (firm) penalty: `τ|s| − ρs²/2` for `|s| < τ/ρ`, constant
    /// `τ²/(2ρ)` beyond. Prox is the firm threshold.
    Firm { tau: f64, rho: f64 },
    /// `(s−⌊s⌋)(⌈s⌉−s)` on `[0, K]`, `+∞` outside; favors the integers
    /// `0..=K`. 2-weakly convex.
    IntegerLattice { k: u32 },
    /// `t·P` for an inner penalty `P`; `prox(t·P, α) = prox(P, t·α)`.
    Scaled {
        factor: f64,
        inner: Box<ScalarPenalty>,
    },
}

impl ScalarPenalty {
    /// Penalty value; `+∞` encodes hard constraints.
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            ScalarPenalty::Zero => 0.0,
            ScalarPenalty::L1 { weight } => weight * s.abs(),
            ScalarPenalty::Firm { tau, rho } => {
                let a = s.abs();
                if a < tau / rho {
                    tau * a - rho * s * s / 2.0
                } else {
                    tau * tau / (2.0 * rho)
                }
            }
            ScalarPenalty::IntegerLattice { k } => {
                if s < 0.0 || s > *k as f64 {
                    f64::INFINITY
                } else {
                    (s - s.floor()) * (s.ceil() - s)
                }
            }
            ScalarPenalty::Scaled { factor, inner } => factor * inner.eval(s),
        }
    }

    /// Weak-convexity parameter `ρ ≥ 0`.
    pub fn rho(&self) -> f64 {
        match self {
            ScalarPenalty::Zero | ScalarPenalty::L1 { .. } => 0.0,
            ScalarPenalty::Firm { rho, .. } => *rho,
            ScalarPenalty::IntegerLattice { .. } => 2.0,
            ScalarPenalty::Scaled { factor, inner } => factor * inner.rho(),
        }
    }

    pub fn has_closed_form_prox(&self) -> bool {
        match self {
            ScalarPenalty::Scaled { inner, .. } => inner.has_closed_form_prox(),
            _ => true,
        }
    }

    /// `T_α(z)`, defined for `α·ρ < 1`. Ties at plateau edges resolve to the
    /// flat piece, matching the non-strict inequalities of the closed forms.
    pub fn prox(&self, z: f64, alpha: f64) -> Result<f64, PenaltyError> {
        check_step(alpha, self.rho())?;
        Ok(self.prox_unchecked(z, alpha))
    }

    fn prox_unchecked(&self, z: f64, alpha: f64) -> f64 {
        match self {
            ScalarPenalty::Zero => z,
            ScalarPenalty::L1 { weight } => soft_threshold(z, alpha * weight),
            ScalarPenalty::Firm { tau, rho } => {
                let a = z.abs();
                if a < alpha * tau {
                    0.0
                } else if a < tau / rho {
                    z.signum() * (a - alpha * tau) / (1.0 - alpha * rho)
                } else {
                    z
                }
            }
            ScalarPenalty::IntegerLattice { k } => {
                let s = z.clamp(0.0, *k as f64);
                let fl = s.floor();
                let ce = s.ceil();
                if s <= fl + alpha {
                    fl
                } else if s >= ce - alpha {
                    ce
                } else {
                    fl + (s - fl - alpha) / (1.0 - 2.0 * alpha)
                }
            }
            ScalarPenalty::Scaled { factor, inner } => inner.prox_unchecked(z, factor * alpha),
        }
    }

    /// Points where the prox/penalty switch pieces, used by the grid oracle
    /// and the gallery plots.
    pub fn breakpoints(&self, alpha: f64) -> Vec<f64> {
        match self {
            ScalarPenalty::Zero => vec![],
            ScalarPenalty::L1 { weight } => vec![-alpha * weight, 0.0, alpha * weight],
            ScalarPenalty::Firm { tau, rho } => {
                let edge = tau / rho;
                vec![-edge, -alpha * tau, 0.0, alpha * tau, edge]
            }
            ScalarPenalty::IntegerLattice { k } => {
                let mut pts = Vec::new();
                for m in 0..=*k {
                    let m = m as f64;
                    pts.extend([m - alpha, m, m + alpha]);
                }
                pts
            }
            ScalarPenalty::Scaled { factor, inner } => inner.breakpoints(factor * alpha),
        }
    }

    /// Range guaranteed to contain the prox minimizer for input `z`
    /// (the default oracle bracket).
    pub fn oracle_bracket(&self, z: f64) -> (f64, f64) {
        let (dom_lo, dom_hi) = match self {
            ScalarPenalty::Firm { tau, rho } => (-tau / rho, tau / rho),
            ScalarPenalty::IntegerLattice { k } => (0.0, *k as f64),
            ScalarPenalty::Scaled { inner, .. } => {
                let (l, h) = inner.oracle_bracket(z);
                return (l, h);
            }
            _ => (0.0, 0.0),
        };
        (z.min(dom_lo) - 1.0, z.max(dom_hi) + 1.0)
    }
}

fn check_step(alpha: f64, rho: f64) -> Result<(), PenaltyError> {
    if alpha <= 0.0 {
        return Err(PenaltyError::InvalidArgument(format!(
            "step alpha must be positive, got {alpha}"
        )));
    }
    if alpha * rho >= 1.0 {
        return Err(PenaltyError::StepTooLarge {
            alpha,
            rho,
            product: alpha * rho,
        });
    }
    Ok(())
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z.abs() <= t {
        0.0
    } else {
        z.signum() * (z.abs() - t)
    }
}

/// `λ|s|` with `λ ≥ 0`.
pub fn make_l1(weight: f64) -> Result<ScalarPenalty, PenaltyError> {
    if weight < 0.0 {
        return Err(PenaltyError::InvalidArgument(format!(
            "l1 weight must be >= 0, got {weight}"
        )));
    }
    Ok(ScalarPenalty::L1 { weight })
}

/// Firm/MCP penalty with knee `τ/ρ` and curvature `−ρ` on the ramp.
pub fn make_firm(tau: f64, rho: f64) -> Result<ScalarPenalty, PenaltyError> {
    if tau <= 0.0 || rho <= 0.0 {
        return Err(PenaltyError::InvalidArgument(format!(
            "firm penalty needs tau > 0 and rho > 0, got tau={tau}, rho={rho}"
        )));
    }
    Ok(ScalarPenalty::Firm { tau, rho })
}

/// Integer-promoting penalty on `[0, K]`.
pub fn make_integer_lattice(k: u32) -> Result<ScalarPenalty, PenaltyError> {
    if k < 1 {
        return Err(PenaltyError::InvalidArgument("K must be >= 1".into()));
    }
    Ok(ScalarPenalty::IntegerLattice { k })
}

/// `t·P` for `t > 0`; scales `ρ` linearly and shifts the prox step.
pub fn scale_penalty(p: ScalarPenalty, t: f64) -> Result<ScalarPenalty, PenaltyError> {
    if t <= 0.0 {
        return Err(PenaltyError::InvalidArgument(format!(
            "scale factor must be > 0, got {t}"
        )));
    }
    Ok(ScalarPenalty::Scaled {
        factor: t,
        inner: Box::new(p),
    })
}

/// A penalty together with its dimension: a bare scalar or a separable lift
/// `P(x) = Σᵢ p(xᵢ)` applied componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    pub scalar: ScalarPenalty,
    dim: Option<usize>,
}

impl Penalty {
    pub fn scalar(p: ScalarPenalty) -> Self {
        Penalty { scalar: p, dim: None }
    }

    pub fn is_scalar(&self) -> bool {
        self.dim.is_none()
    }

    pub fn dimension(&self) -> usize {
        self.dim.unwrap_or(1)
    }

    pub fn rho(&self) -> f64 {
        self.scalar.rho()
    }

    fn check_dim(&self, len: usize) -> Result<(), PenaltyError> {
        let expected = self.dimension();
        if len != expected {
            return Err(PenaltyError::Dimension { expected, got: len });
        }
        Ok(())
    }

    /// `Σᵢ p(xᵢ)`; `+∞` propagates.
    pub fn eval(&self, x: &[f64]) -> Result<f64, PenaltyError> {
        self.check_dim(x.len())?;
        Ok(x.iter().map(|&s| self.scalar.eval(s)).sum())
    }

    /// Componentwise prox.
    pub fn prox(&self, z: &[f64], alpha: f64) -> Result<Vec<f64>, PenaltyError> {
        self.check_dim(z.len())?;
        check_step(alpha, self.rho())?;
        Ok(z.iter().map(|&s| self.scalar.prox_unchecked(s, alpha)).collect())
    }
}

/// Lifts a scalar penalty to `n` dimensions, applied componentwise.
pub fn separable_lift(p: ScalarPenalty, n: usize) -> Penalty {
    Penalty {
        scalar: p,
        dim: Some(n),
    }
}

/// Result of the brute-force prox oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarProxResult {
    pub minimizer: f64,
    pub objective_value: f64,
}

/// Exhaustively minimizes `(1/(2α))(x−z)² + P(x)` over the grid
/// `lo, lo+step, …, hi` augmented with the penalty's breakpoints. Independent
/// of the closed-form prox path; used to certify it.
pub fn prox_oracle_grid(
    p: &ScalarPenalty,
    z: f64,
    alpha: f64,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<ScalarProxResult, PenaltyError> {
    check_step(alpha, p.rho())?;
    let grid_ok = lo < hi && step > 0.0;
    if !grid_ok {
        return Err(PenaltyError::InvalidArgument(format!(
            "bad grid: lo={lo}, hi={hi}, step={step}"
        )));
    }
    let objective = |x: f64| (x - z) * (x - z) / (2.0 * alpha) + p.eval(x);
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |x: f64| {
        let v = objective(x);
        if v.is_finite() {
            match best {
                Some((_, bv)) if bv <= v => {}
                _ => best = Some((x, v)),
            }
        }
    };
    let count = ((hi - lo) / step).floor() as usize;
    for i in 0..=count {
        consider(lo + i as f64 * step);
    }
    consider(hi);
    for b in p.breakpoints(alpha) {
        if b >= lo && b <= hi {
            consider(b);
        }
    }
    consider(z.clamp(lo, hi));
    let (minimizer, objective_value) = best.ok_or(PenaltyError::EmptyGrid)?;
    Ok(ScalarProxResult {
        minimizer,
        objective_value,
    })
}

/// Convenience wrapper using the penalty's default bracket and a step of 1e-4.
pub fn prox_oracle(p: &ScalarPenalty, z: f64, alpha: f64) -> Result<ScalarProxResult, PenaltyError> {
    let (lo, hi) = p.oracle_bracket(z);
    prox_oracle_grid(p, z, alpha, lo, hi, 1e-4)
}

/// Outcome of a sampled convexity check for `P + (ρ_claim/2)(·)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityCertificate {
    pub pass: bool,
    pub worst_violation: f64,
}

const CONVEXITY_TOL: f64 = 1e-9;

/// Samples random triples `(a, b, θ)` in the effective domain and checks the
/// chord inequality for `h = P + (ρ_claim/2)(·)²`. Sampling can only falsify.
pub fn weak_convexity_certificate(
    p: &ScalarPenalty,
    rho_claim: f64,
    samples: usize,
    seed: u64,
) -> ConvexityCertificate {
    let (lo, hi) = domain_sample_range(p);
    let mut rng = seeded_rng(seed);
    let h = |s: f64| p.eval(s) + rho_claim / 2.0 * s * s;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let a = rng.gen_range(lo..hi);
        let b = rng.gen_range(lo..hi);
        let theta: f64 = rng.gen_range(0.0..1.0);
        let mid = theta * a + (1.0 - theta) * b;
        let violation = h(mid) - theta * h(a) - (1.0 - theta) * h(b);
        if violation > worst {
            worst = violation;
        }
    }
    ConvexityCertificate {
        pass: worst <= CONVEXITY_TOL,
        worst_violation: worst,
    }
}

fn domain_sample_range(p: &ScalarPenalty) -> (f64, f64) {
    match p {
        ScalarPenalty::IntegerLattice { k } => (0.0, *k as f64),
        ScalarPenalty::Scaled { inner, .. } => domain_sample_range(inner),
        _ => (-10.0, 10.0),
    }
}

/// With `x̂ = T_α(z)`, returns
/// `P(x) − P(x̂) + (ρ/2)‖x − x̂‖² + (1/α)⟨x̂ − z, x − x̂⟩`,
/// which the prox optimality conditions force to be `≥ 0` up to round-off.
pub fn subgradient_inequality_check(
    p: &ScalarPenalty,
    z: f64,
    alpha: f64,
    x: f64,
) -> Result<f64, PenaltyError> {
    let xhat = p.prox(z, alpha)?;
    let d = x - xhat;
    Ok(p.eval(x) - p.eval(xhat) + p.rho() / 2.0 * d * d + (xhat - z) * d / alpha)
}
