//! Shared solver-set execution and chart assembly for the experiment runs.

use std::collections::BTreeMap;

use super::spec::{SolverChoice, SolverKind};
use super::svg::{line_chart, ChartSpec, Series};
use super::{sanitize_name, Artifact, ExperimentError};
use crate::penalty::Penalty;
use crate::solver::{
    solve_fista, solve_ista, solve_twist, QuadraticTerm, SolveTrace, StepPolicy, StopRule,
    TwistParams,
};

pub(crate) struct SolverRun {
    pub name: String,
    pub trace: SolveTrace,
}

/// Resolves every solver's step up front (spec validation) and returns the
/// per-solver steps plus TwIST parameters when TwIST is requested.
pub(crate) fn resolve_steps(
    choices: &[SolverChoice],
    f: &QuadraticTerm,
    rho: f64,
) -> Result<(BTreeMap<String, f64>, Option<TwistParams>), ExperimentError> {
    let mut alphas = BTreeMap::new();
    let mut twist = None;
    for c in choices {
        let alpha = match c.solver {
            SolverKind::Ista => c
                .step
                .as_ref()
                .expect("validated: ista has a step")
                .resolve(f, rho)?,
            SolverKind::Fista => c.step.unwrap_or(StepPolicy::Mm).resolve(f, rho)?,
            SolverKind::Twist => {
                let params = TwistParams::from_gram_bounds(&f.bounds)?;
                StepPolicy::Explicit {
                    alpha: params.prox_step,
                }
                .resolve(f, rho)?;
                let s = params.prox_step;
                twist = Some(params);
                s
            }
        };
        alphas.insert(c.name.clone(), alpha);
    }
    Ok((alphas, twist))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run_solver_set(
    choices: &[SolverChoice],
    f: &QuadraticTerm,
    p: &Penalty,
    x0: &[f64],
    stop: &StopRule,
    reference: &[f64],
    alphas: &BTreeMap<String, f64>,
    twist: Option<&TwistParams>,
) -> Result<Vec<SolverRun>, ExperimentError> {
    let mut runs = Vec::with_capacity(choices.len());
    for c in choices {
        let alpha = alphas[&c.name];
        let result = match c.solver {
            SolverKind::Ista => solve_ista(
                f,
                p,
                x0,
                &StepPolicy::Explicit { alpha },
                stop,
                Some(reference),
            ),
            SolverKind::Fista => solve_fista(f, p, x0, alpha, stop, Some(reference)),
            SolverKind::Twist => solve_twist(
                f,
                p,
                x0,
                twist.expect("twist params resolved"),
                stop,
                Some(reference),
            ),
        };
        let trace = result.map_err(|source| ExperimentError::Divergence {
            name: c.name.clone(),
            source,
        })?;
        runs.push(SolverRun {
            name: c.name.clone(),
            trace,
        });
    }
    Ok(runs)
}

pub(crate) fn trace_artifacts(runs: &[SolverRun]) -> Vec<Artifact> {
    runs.iter()
        .map(|r| {
            Artifact::new(
                format!("trace_{}.csv", sanitize_name(&r.name)),
                r.trace.to_csv(false),
            )
        })
        .collect()
}

pub(crate) fn cost_chart(runs: &[SolverRun], title: &str) -> Artifact {
    let series = runs
        .iter()
        .map(|r| {
            Series::new(
                r.name.clone(),
                r.trace
                    .records
                    .iter()
                    .map(|rec| (rec.iter as f64, rec.cost))
                    .collect(),
            )
        })
        .collect();
    Artifact::new(
        "cost.svg",
        line_chart(&ChartSpec {
            title: title.into(),
            x_label: "iteration".into(),
            y_label: "cost (log)".into(),
            log_y: true,
            series,
            vlines: vec![],
        }),
    )
}

pub(crate) fn dist_chart(runs: &[SolverRun], title: &str) -> Artifact {
    let series = runs
        .iter()
        .map(|r| {
            Series::new(
                r.name.clone(),
                r.trace
                    .records
                    .iter()
                    .filter_map(|rec| rec.dist_to_ref.map(|d| (rec.iter as f64, d)))
                    .collect(),
            )
        })
        .collect();
    Artifact::new(
        "dist.svg",
        line_chart(&ChartSpec {
            title: title.into(),
            x_label: "iteration".into(),
            y_label: "distance to reference (log)".into(),
            log_y: true,
            series,
            vlines: vec![],
        }),
    )
}

#[cfg(not(target_arch = "wasm32"))]
pub(crate) fn wall_clock_start() -> Option<std::time::Instant> {
    Some(std::time::Instant::now())
}

#[cfg(target_arch = "wasm32")]
pub(crate) fn wall_clock_start() -> Option<std::time::Instant> {
    None
}

pub(crate) fn wall_clock_elapsed(start: &Option<std::time::Instant>) -> f64 {
    start.map(|t| t.elapsed().as_secs_f64()).unwrap_or(0.0)
}
