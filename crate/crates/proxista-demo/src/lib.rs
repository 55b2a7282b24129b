//! WebAssembly bindings for the browser demo. Three operations are exposed:
//!
//! - `gallery_charts`: penalty and threshold curves for adjustable
//!   `(τ, ρ, α)` or the integer lattice;
//! - `solver_race`: the sparse-deconvolution comparison (cost and distance
//!   charts plus the signal overlay) for an adjustable seed and noise level;
//! - `verify_properties`: the operator-property bundle at an adjustable step
//!   scale.
//!
//! Every export returns a JSON string; charts are embedded as SVG markup the
//! page injects directly.

use wasm_bindgen::prelude::wasm_bindgen;

use proxista_core::experiment::{
    plot_penalty_gallery, run_sparse_deconv, verify_claims, GallerySpec, OutputFormat,
    SparseDeconvSpec, VerifySpec,
};
use proxista_core::penalty::{make_firm, make_integer_lattice, ScalarPenalty};

fn err_json(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

fn artifact_map(artifacts: &[proxista_core::experiment::Artifact]) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for a in artifacts {
        map.insert(a.name.clone(), serde_json::Value::String(a.contents.clone()));
    }
    serde_json::Value::Object(map)
}

/// Penalty and threshold charts. `family` is "firm" or "integer".
/// For the firm family `tau`, `rho` apply; for the lattice `k` applies.
#[wasm_bindgen]
pub fn gallery_charts(family: &str, tau: f64, rho: f64, k: u32, alpha: f64) -> String {
    let penalty: ScalarPenalty = match family {
        "firm" => match make_firm(tau, rho) {
            Ok(p) => p,
            Err(e) => return err_json(e),
        },
        "integer" => match make_integer_lattice(k) {
            Ok(p) => p,
            Err(e) => return err_json(e),
        },
        other => return err_json(format!("unknown family {other:?}")),
    };
    let range = match family {
        "firm" => {
            let edge = (tau / rho).max(alpha * tau) * 2.0;
            (-edge, edge)
        }
        _ => (-1.0, k as f64 + 1.0),
    };
    let spec = GallerySpec {
        schema_version: 1,
        penalty,
        alphas: vec![alpha],
        range,
        samples: 801,
    };
    match plot_penalty_gallery(&spec, OutputFormat::Svg) {
        Ok(artifacts) => artifact_map(&artifacts).to_string(),
        Err(e) => err_json(e),
    }
}

/// Runs the committed sparse-deconvolution instance with an adjustable seed,
/// noise level, and iteration budget; returns charts plus manifest highlights.
#[wasm_bindgen]
pub fn solver_race(seed: u64, noise_std: f64, max_iters: usize) -> String {
    let mut spec = SparseDeconvSpec::default();
    spec.noise.std = noise_std;
    spec.noise.seed = seed;
    spec.true_signal.seed = seed.wrapping_add(1);
    spec.stop.max_iters = max_iters.clamp(10, 20_000);
    spec.reference_iters = spec.stop.max_iters.max(2_000);
    match run_sparse_deconv(&spec, OutputFormat::Svg) {
        Ok(out) => {
            let mut v = artifact_map(&out.artifacts);
            let m = &out.manifest;
            v["summary"] = serde_json::json!({
                "sigma_m": m.sigma_m,
                "sigma_max": m.sigma_max,
                "rho": m.rho,
                "tau": m.tau,
                "alpha_by_solver": m.alpha_by_solver,
                "alpha_ratio_fb_over_mm": m.alpha_ratio_fb_over_mm,
                "reference_certified": m.reference.certified,
            });
            v.to_string()
        }
        Err(e) => err_json(e),
    }
}

/// Property bundle at `alpha_scale` times the forward-backward bound on a
/// trimmed instance (sized for interactive latency).
#[wasm_bindgen]
pub fn verify_properties(alpha_scale: f64, trials: usize, seed: u64) -> String {
    let mut instance = SparseDeconvSpec {
        signal_len: 24,
        reference_iters: 2_000,
        ..SparseDeconvSpec::default()
    };
    instance.true_signal.support = 5;
    instance.stop.max_iters = 2_000;
    let spec = VerifySpec {
        schema_version: 1,
        instance,
        alpha_scale,
        trials: trials.clamp(100, 20_000),
        seed,
    };
    match verify_claims(&spec) {
        Ok(bundle) => bundle.to_json(),
        Err(e) => err_json(e),
    }
}
