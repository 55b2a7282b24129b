//! `proxista` command line: penalty/threshold galleries, single-instance
//! solves, experiment reproductions, and operator-property verification.
//!
//! Exit codes: 0 success, 1 spec error, 2 divergence, 3 verification failure.

mod solve_spec;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use proxista_core::experiment::{
    plot_penalty_gallery, run_integer_blocks, run_sparse_deconv, verify_claims, Artifact,
    ExperimentError, ExperimentSpec, GallerySpec, IntegerBlocksSpec, OutputFormat,
    SparseDeconvSpec, VerifySpec,
};
use proxista_core::experiment::svg;
use proxista_core::solver::{
    solve_fista, solve_ista, solve_twist, QuadraticTerm, SmoothTerm, StepPolicy, TwistParams,
};
use solve_spec::SolveSpec;

#[derive(Parser)]
#[command(name = "proxista", version, about = "ISTA with weakly convex penalties: solvers, galleries, experiments, property verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit (s, P(s)) and (s, T_alpha(s)) tables and charts.
    Gallery {
        /// Gallery spec JSON; defaults to the firm-penalty gallery.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Built-in gallery when no spec is given: firm | integer.
        #[arg(long, default_value = "firm")]
        builtin: String,
        #[arg(long)]
        out: PathBuf,
        /// csv | svg | both
        #[arg(long, default_value = "both")]
        format: String,
    },
    /// Run one solver on a custom instance described by a spec file.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Reproduce an experiment (sparse-deconv or integer-blocks).
    Experiment {
        /// Experiment spec JSON; defaults to the committed sparse-deconv
        /// instance.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Built-in experiment when no spec is given:
        /// sparse-deconv | integer-blocks.
        #[arg(long, default_value = "sparse-deconv")]
        builtin: String,
        #[arg(long)]
        out: PathBuf,
        /// Overrides every seed in the spec (noise = seed, signal = seed+1).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "both")]
        format: String,
    },
    /// Run the operator-property verification bundle.
    Verify {
        /// Verify spec JSON; defaults to the committed instance.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the instance seeds.
        #[arg(long)]
        seed: Option<u64>,
    },
}

const EXIT_SPEC: u8 = 1;
const EXIT_DIVERGENCE: u8 = 2;
const EXIT_VERIFY: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                ExperimentError::Divergence { .. } => EXIT_DIVERGENCE,
                _ => EXIT_SPEC,
            };
            ExitCode::from(code)
        }
    }
}

fn parse_format(s: &str) -> Result<OutputFormat, ExperimentError> {
    s.parse().map_err(ExperimentError::Spec)
}

fn read_spec_file(path: &Path) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path)
        .map_err(|e| ExperimentError::Spec(format!("reading {}: {e}", path.display())))
}

fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        std::fs::write(dir.join(&a.name), a.contents.as_bytes())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, ExperimentError> {
    match cli.command {
        Command::Gallery {
            spec,
            builtin,
            out,
            format,
        } => {
            let format = parse_format(&format)?;
            let gspec = match spec {
                Some(path) => GallerySpec::from_json(&read_spec_file(&path)?)?,
                None => match builtin.as_str() {
                    "firm" => GallerySpec::firm_default(),
                    "integer" => GallerySpec::integer_default(),
                    other => {
                        return Err(ExperimentError::Spec(format!(
                            "unknown builtin gallery {other:?} (expected firm|integer)"
                        )))
                    }
                },
            };
            let artifacts = plot_penalty_gallery(&gspec, format)?;
            write_artifacts(&out, &artifacts)?;
            std::fs::write(out.join("gallery_spec.json"), gspec.to_json())?;
            println!("gallery: wrote {} artifacts to {}", artifacts.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { spec, out, format } => {
            let format = parse_format(&format)?;
            let text = read_spec_file(&spec)?;
            let sspec = SolveSpec::from_json(&text)?;
            let base = spec.parent().unwrap_or(Path::new("."));
            run_solve(&sspec, base, &out, format)
        }
        Command::Experiment {
            spec,
            builtin,
            out,
            seed,
            format,
        } => {
            let format = parse_format(&format)?;
            let mut espec = match spec {
                Some(path) => ExperimentSpec::from_json(&read_spec_file(&path)?)?,
                None => match builtin.as_str() {
                    "sparse-deconv" => ExperimentSpec::SparseDeconv(SparseDeconvSpec::default()),
                    "integer-blocks" => ExperimentSpec::IntegerBlocks(IntegerBlocksSpec::default()),
                    other => {
                        return Err(ExperimentError::Spec(format!(
                            "unknown builtin experiment {other:?} (expected sparse-deconv|integer-blocks)"
                        )))
                    }
                },
            };
            if let Some(s) = seed {
                espec.override_seed(s);
            }
            espec.validate()?;
            let output = match &espec {
                ExperimentSpec::SparseDeconv(s) => run_sparse_deconv(s, format)?,
                ExperimentSpec::IntegerBlocks(s) => run_integer_blocks(s, format)?,
            };
            output.write_to_dir(&out)?;
            println!(
                "experiment {}: sigma_m={:.6e} sigma_max={:.6e} rho={:.6e} tau={:.6e} alpha1/alpha0={:.4}",
                output.manifest.experiment,
                output.manifest.sigma_m,
                output.manifest.sigma_max,
                output.manifest.rho,
                output.manifest.tau,
                output.manifest.alpha_ratio_fb_over_mm,
            );
            println!(
                "wrote {} artifacts + manifest.json to {}",
                output.artifacts.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { spec, out, seed } => {
            let mut vspec = match spec {
                Some(path) => VerifySpec::from_json(&read_spec_file(&path)?)?,
                None => VerifySpec::default(),
            };
            if let Some(s) = seed {
                vspec.instance.noise.seed = s;
                vspec.instance.true_signal.seed = s.wrapping_add(1);
                vspec.seed = s.wrapping_add(2);
            }
            let bundle = verify_claims(&vspec)?;
            std::fs::create_dir_all(&out)?;
            let artifact = bundle.artifact();
            std::fs::write(out.join(&artifact.name), artifact.contents.as_bytes())?;
            for r in &bundle.reports {
                println!(
                    "{}: {} (worst {:.3e}, trials {}, seed {})",
                    r.property,
                    if r.verdict { "PASS" } else { "FAIL" },
                    r.worst,
                    r.trials,
                    r.seed
                );
            }
            if bundle.all_pass {
                println!("all properties verified");
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("verification failed; report written to {}", out.display());
                Ok(ExitCode::from(EXIT_VERIFY))
            }
        }
    }
}

fn run_solve(
    spec: &SolveSpec,
    base: &Path,
    out: &Path,
    format: OutputFormat,
) -> Result<ExitCode, ExperimentError> {
    let h = spec.build_operator(base)?;
    let y = spec.load_y(base)?;
    if y.len() != h.out_dim() {
        return Err(ExperimentError::Spec(format!(
            "y has length {}, operator output is {}",
            y.len(),
            h.out_dim()
        )));
    }
    let f = QuadraticTerm::with_certified_bounds(h, y)?;
    let n = f.dim();
    let p = proxista_core::penalty::separable_lift(spec.penalty.clone(), n);
    let x0 = match &spec.x0 {
        Some(v) => {
            if v.len() != n {
                return Err(ExperimentError::Spec(format!(
                    "x0 has length {}, expected {n}",
                    v.len()
                )));
            }
            v.clone()
        }
        None => vec![0.0; n],
    };

    use proxista_core::experiment::SolverKind;
    let choice = &spec.solver;
    let rho = p.rho();
    let (alpha, trace) = match choice.solver {
        SolverKind::Ista => {
            let policy = choice.step.ok_or_else(|| {
                ExperimentError::Spec("ista requires a step policy".into())
            })?;
            let alpha = policy.resolve(&f, rho)?;
            let trace = solve_ista(&f, &p, &x0, &policy, &spec.stop, None)
                .map_err(|source| ExperimentError::Divergence {
                    name: choice.name.clone(),
                    source,
                })?;
            (alpha, trace)
        }
        SolverKind::Fista => {
            let alpha = choice.step.unwrap_or(StepPolicy::Mm).resolve(&f, rho)?;
            let trace = solve_fista(&f, &p, &x0, alpha, &spec.stop, None).map_err(|source| {
                ExperimentError::Divergence {
                    name: choice.name.clone(),
                    source,
                }
            })?;
            (alpha, trace)
        }
        SolverKind::Twist => {
            let params = TwistParams::from_gram_bounds(&f.bounds)?;
            let alpha = params.prox_step;
            let trace = solve_twist(&f, &p, &x0, &params, &spec.stop, None).map_err(|source| {
                ExperimentError::Divergence {
                    name: choice.name.clone(),
                    source,
                }
            })?;
            (alpha, trace)
        }
    };

    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("trace.csv"), trace.to_csv(true))?;
    if format.svg() {
        let chart = svg::line_chart(&svg::ChartSpec {
            title: format!("{} cost", choice.name),
            x_label: "iteration".into(),
            y_label: "cost (log)".into(),
            log_y: true,
            series: vec![svg::Series::new(
                choice.name.clone(),
                trace
                    .records
                    .iter()
                    .map(|r| (r.iter as f64, r.cost))
                    .collect(),
            )],
            vlines: vec![],
        });
        std::fs::write(out.join("cost.svg"), chart)?;
    }
    let mut estimate = String::from("index,estimate\n");
    for (i, v) in trace.final_point.iter().enumerate() {
        estimate.push_str(&format!("{i},{v:?}\n"));
    }
    std::fs::write(out.join("estimate.csv"), estimate)?;

    let summary = serde_json::json!({
        "solver": choice.name,
        "alpha": alpha,
        "sigma_m": f.bounds.sigma_m,
        "sigma_max": f.bounds.sigma_max,
        "rho": rho,
        "iterations": trace.records.last().map(|r| r.iter),
        "stop_reason": trace.stop_reason,
        "final_cost": trace.final_cost(),
        "alphas_by_solver": BTreeMap::from([(choice.name.clone(), alpha)]),
    });
    std::fs::write(
        out.join("solve_summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    println!(
        "solve {}: {} iterations, final cost {:.6e}, wrote {}",
        choice.name,
        trace.records.len() - 1,
        trace.final_cost(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}
