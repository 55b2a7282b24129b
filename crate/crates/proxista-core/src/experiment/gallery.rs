//! Penalty/threshold galleries: `(s, P(s))` and `(s, T_α(s))` sample tables
//! and charts with breakpoint markers.

use super::svg::{line_chart, ChartSpec, Series};
use super::{Artifact, ExperimentError, OutputFormat};
use crate::penalty::ScalarPenalty;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GallerySpec {
    pub schema_version: u32,
    pub penalty: ScalarPenalty,
    /// Steps at which to plot the threshold; each must satisfy `α·ρ < 1`.
    pub alphas: Vec<f64>,
    pub range: (f64, f64),
    pub samples: usize,
}

impl GallerySpec {
    /// Firm penalty at `τ = 1`, `ρ = 0.5` over `[-4, 4]`.
    pub fn firm_default() -> Self {
        GallerySpec {
            schema_version: super::spec::SPEC_SCHEMA_VERSION,
            penalty: crate::penalty::make_firm(1.0, 0.5).expect("valid"),
            alphas: vec![0.5, 1.0],
            range: (-4.0, 4.0),
            samples: 801,
        }
    }

    /// Integer-lattice penalty on `[0, 4]` plotted over `[-1, 5]`.
    pub fn integer_default() -> Self {
        GallerySpec {
            schema_version: super::spec::SPEC_SCHEMA_VERSION,
            penalty: crate::penalty::make_integer_lattice(4).expect("valid"),
            alphas: vec![0.25],
            range: (-1.0, 5.0),
            samples: 801,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Spec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.schema_version != super::spec::SPEC_SCHEMA_VERSION {
            return Err(ExperimentError::Spec(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        let range_ok = self.range.0 < self.range.1;
        if !range_ok {
            return Err(ExperimentError::Spec(format!(
                "empty range [{}, {}]",
                self.range.0, self.range.1
            )));
        }
        if self.samples < 2 {
            return Err(ExperimentError::Spec("need at least 2 samples".into()));
        }
        if self.alphas.is_empty() {
            return Err(ExperimentError::Spec("need at least one alpha".into()));
        }
        let rho = self.penalty.rho();
        for &a in &self.alphas {
            if a.is_nan() || a <= 0.0 {
                return Err(ExperimentError::Spec(format!("alpha must be positive, got {a}")));
            }
            if a * rho >= 1.0 {
                return Err(ExperimentError::Spec(format!(
                    "alpha = {a} violates alpha*rho < 1 (rho = {rho}; the threshold requires alpha < {})",
                    1.0 / rho
                )));
            }
        }
        Ok(())
    }
}

/// Sample grid: uniform over the range, augmented with all breakpoints so
/// plateau corners render exactly.
fn sample_grid(spec: &GallerySpec) -> Vec<f64> {
    let (lo, hi) = spec.range;
    let mut grid: Vec<f64> = (0..spec.samples)
        .map(|i| lo + (hi - lo) * i as f64 / (spec.samples - 1) as f64)
        .collect();
    for &a in &spec.alphas {
        for b in spec.penalty.breakpoints(a) {
            if b >= lo && b <= hi {
                grid.push(b);
            }
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

pub fn plot_penalty_gallery(
    spec: &GallerySpec,
    format: OutputFormat,
) -> Result<Vec<Artifact>, ExperimentError> {
    spec.validate()?;
    let grid = sample_grid(spec);
    let p = &spec.penalty;

    let penalty_pts: Vec<(f64, f64)> = grid
        .iter()
        .map(|&s| (s, p.eval(s)))
        .filter(|(_, v)| v.is_finite())
        .collect();
    let threshold_series: Vec<(f64, Vec<(f64, f64)>)> = spec
        .alphas
        .iter()
        .map(|&a| {
            let pts = grid
                .iter()
                .map(|&s| (s, p.prox(s, a).expect("alpha validated")))
                .collect();
            (a, pts)
        })
        .collect();

    let mut artifacts = Vec::new();
    if format.csv() {
        let mut ptab = String::from("s,penalty\n");
        for (s, v) in &penalty_pts {
            ptab.push_str(&format!("{s:?},{v:?}\n"));
        }
        artifacts.push(Artifact::new("penalty.csv", ptab));

        let mut header = String::from("s");
        for (a, _) in &threshold_series {
            header.push_str(&format!(",threshold_alpha_{a:?}"));
        }
        header.push('\n');
        let mut ttab = header;
        for (i, s) in grid.iter().enumerate() {
            ttab.push_str(&format!("{s:?}"));
            for (_, pts) in &threshold_series {
                ttab.push_str(&format!(",{:?}", pts[i].1));
            }
            ttab.push('\n');
        }
        artifacts.push(Artifact::new("threshold.csv", ttab));
    }
    if format.svg() {
        let mut marks: Vec<f64> = spec
            .alphas
            .iter()
            .flat_map(|&a| p.breakpoints(a))
            .filter(|b| *b >= spec.range.0 && *b <= spec.range.1)
            .collect();
        marks.sort_by(f64::total_cmp);
        marks.dedup();

        artifacts.push(Artifact::new(
            "penalty.svg",
            line_chart(&ChartSpec {
                title: "penalty".into(),
                x_label: "s".into(),
                y_label: "P(s)".into(),
                log_y: false,
                series: vec![Series::new("P", penalty_pts)],
                vlines: marks.clone(),
            }),
        ));
        let mut series: Vec<Series> = threshold_series
            .into_iter()
            .map(|(a, pts)| Series::new(format!("alpha = {a}"), pts))
            .collect();
        series.push(Series::new(
            "identity",
            vec![(spec.range.0, spec.range.0), (spec.range.1, spec.range.1)],
        ));
        artifacts.push(Artifact::new(
            "threshold.svg",
            line_chart(&ChartSpec {
                title: "threshold".into(),
                x_label: "s".into(),
                y_label: "T_alpha(s)".into(),
                log_y: false,
                series,
                vlines: marks,
            }),
        ));
    }
    Ok(artifacts)
}
