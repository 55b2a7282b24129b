//! Forward-backward splitting (ISTA) for costs `f(x) + P(x)` where `f` is
//! smooth and `P` is a weakly convex penalty, together with the machinery the
//! setting calls for: linear operators with certified Gram spectral bounds,
//! closed-form proximity operators and a brute-force prox oracle, step-size
//! policies, comparison solvers (FISTA, TwIST), black-box operator-property
//! certification, and a reproducible experiment harness.

pub mod analysis;
pub mod experiment;
pub mod linop;
pub mod penalty;
pub mod rng;
pub mod solver;
mod testutil;
mod vecmath;

pub use linop::{
    adjoint_consistency_check, compose, gram_spectral_bounds, make_block_synthesis,
    make_convolution, make_dense, LinearMap, LinopError, SpectralBounds, SpectralMethod,
};
pub use penalty::{
    make_firm, make_integer_lattice, make_l1, prox_oracle_grid, scale_penalty, separable_lift,
    Penalty, PenaltyError, ScalarPenalty,
};
pub use solver::{
    contraction_rate, cost, fixed_point_residual, ista_step, max_step_fb, max_step_mm,
    mm_surrogate, solve_fista, solve_ista, solve_twist, QuadraticTerm, SmoothTerm, SolveTrace,
    SolverError, StepPolicy, StopReason, StopRule, TwistParams,
};
