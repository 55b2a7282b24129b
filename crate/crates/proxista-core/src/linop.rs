//! Linear operators (dense, 1-D convolution, block synthesis, composition),
//! their adjoints, and certified spectral bounds of the Gram matrix `HᵀH`.
//!
//! Operators are immutable after construction; `apply`/`adjoint` are pure and
//! safe to call from multiple threads.

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use crate::rng::seeded_rng;

#[derive(Debug, Error)]
pub enum LinopError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("spectral iteration did not converge within {max_iters} iterations (best estimate [{}, {}])", best.sigma_m, best.sigma_max)]
    NonConvergence {
        max_iters: usize,
        best: SpectralBounds,
    },
    #[error("csv: {0}")]
    Csv(String),
}

/// A linear map with an explicit adjoint. Values are immutable; `apply` and
/// `adjoint` panic on input of the wrong length (callers validate shapes at
/// construction / solver entry).
#[derive(Debug, Clone, PartialEq)]
pub enum LinearMap {
    /// Row-major dense matrix.
    Dense {
        rows: usize,
        cols: usize,
        entries: Vec<f64>,
    },
    /// Full (non-circular) linear convolution of a length-`signal_len` input
    /// with `filter`; output length `signal_len + filter.len() - 1`.
    Convolution { filter: Vec<f64>, signal_len: usize },
    /// Each of `num_coeffs` coefficients is replicated `block_len` times.
    BlockSynthesis { block_len: usize, num_coeffs: usize },
    /// `outer ∘ inner`; the adjoint composes in reverse.
    Composition {
        outer: Box<LinearMap>,
        inner: Box<LinearMap>,
    },
}

/// Kind tag, mirroring the `LinearMap` variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Dense,
    Convolution,
    BlockSynthesis,
    Composition,
}

impl LinearMap {
    pub fn in_dim(&self) -> usize {
        match self {
            LinearMap::Dense { cols, .. } => *cols,
            LinearMap::Convolution { signal_len, .. } => *signal_len,
            LinearMap::BlockSynthesis { num_coeffs, .. } => *num_coeffs,
            LinearMap::Composition { inner, .. } => inner.in_dim(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            LinearMap::Dense { rows, .. } => *rows,
            LinearMap::Convolution { filter, signal_len } => signal_len + filter.len() - 1,
            LinearMap::BlockSynthesis {
                block_len,
                num_coeffs,
            } => block_len * num_coeffs,
            LinearMap::Composition { outer, .. } => outer.out_dim(),
        }
    }

    pub fn kind(&self) -> MapKind {
        match self {
            LinearMap::Dense { .. } => MapKind::Dense,
            LinearMap::Convolution { .. } => MapKind::Convolution,
            LinearMap::BlockSynthesis { .. } => MapKind::BlockSynthesis,
            LinearMap::Composition { .. } => MapKind::Composition,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_dim(), "apply: input length mismatch");
        match self {
            LinearMap::Dense { rows, cols, entries } => {
                let mut out = vec![0.0; *rows];
                for (i, out_i) in out.iter_mut().enumerate() {
                    let row = &entries[i * cols..(i + 1) * cols];
                    *out_i = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
                out
            }
            LinearMap::Convolution { filter, signal_len } => {
                let mut out = vec![0.0; signal_len + filter.len() - 1];
                for (j, &xj) in x.iter().enumerate() {
                    for (l, &hl) in filter.iter().enumerate() {
                        out[j + l] += hl * xj;
                    }
                }
                out
            }
            LinearMap::BlockSynthesis { block_len, .. } => {
                let mut out = vec![0.0; block_len * x.len()];
                for (k, &c) in x.iter().enumerate() {
                    out[block_len * k..block_len * (k + 1)].fill(c);
                }
                out
            }
            LinearMap::Composition { outer, inner } => outer.apply(&inner.apply(x)),
        }
    }

    pub fn adjoint(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.out_dim(), "adjoint: input length mismatch");
        match self {
            LinearMap::Dense { rows, cols, entries } => {
                let mut out = vec![0.0; *cols];
                for i in 0..*rows {
                    let row = &entries[i * cols..(i + 1) * cols];
                    for (j, &a) in row.iter().enumerate() {
                        out[j] += a * r[i];
                    }
                }
                out
            }
            // The adjoint of full convolution is correlation with the filter.
            LinearMap::Convolution { filter, signal_len } => {
                let mut out = vec![0.0; *signal_len];
                for (j, out_j) in out.iter_mut().enumerate() {
                    *out_j = filter.iter().enumerate().map(|(l, &hl)| hl * r[j + l]).sum();
                }
                out
            }
            LinearMap::BlockSynthesis {
                block_len,
                num_coeffs,
            } => {
                let mut out = vec![0.0; *num_coeffs];
                for (k, out_k) in out.iter_mut().enumerate() {
                    *out_k = r[block_len * k..block_len * (k + 1)].iter().sum();
                }
                out
            }
            LinearMap::Composition { outer, inner } => inner.adjoint(&outer.adjoint(r)),
        }
    }

    /// `HᵀH` assembled column by column, row-major, `in_dim × in_dim`.
    pub fn assemble_gram(&self) -> Vec<f64> {
        let n = self.in_dim();
        let mut gram = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.adjoint(&self.apply(&e));
            for i in 0..n {
                gram[i * n + j] = col[i];
            }
            e[j] = 0.0;
        }
        gram
    }
}

pub fn make_dense(entries: Vec<f64>, rows: usize, cols: usize) -> Result<LinearMap, LinopError> {
    if entries.len() != rows * cols {
        return Err(LinopError::Shape(format!(
            "dense map needs {rows}*{cols}={} entries, got {}",
            rows * cols,
            entries.len()
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(LinopError::InvalidArgument("dense map must be non-empty".into()));
    }
    Ok(LinearMap::Dense { rows, cols, entries })
}

pub fn make_convolution(filter: Vec<f64>, signal_len: usize) -> Result<LinearMap, LinopError> {
    if filter.is_empty() {
        return Err(LinopError::InvalidArgument("empty filter".into()));
    }
    if signal_len == 0 {
        return Err(LinopError::InvalidArgument("signal length must be >= 1".into()));
    }
    Ok(LinearMap::Convolution { filter, signal_len })
}

pub fn make_block_synthesis(block_len: usize, num_coeffs: usize) -> Result<LinearMap, LinopError> {
    if block_len == 0 || num_coeffs == 0 {
        return Err(LinopError::InvalidArgument(
            "block length and coefficient count must be >= 1".into(),
        ));
    }
    Ok(LinearMap::BlockSynthesis {
        block_len,
        num_coeffs,
    })
}

pub fn compose(outer: LinearMap, inner: LinearMap) -> Result<LinearMap, LinopError> {
    if inner.out_dim() != outer.in_dim() {
        return Err(LinopError::Shape(format!(
            "compose: inner out_dim {} != outer in_dim {}",
            inner.out_dim(),
            outer.in_dim()
        )));
    }
    Ok(LinearMap::Composition {
        outer: Box::new(outer),
        inner: Box::new(inner),
    })
}

/// Certified enclosure `[sigma_m, sigma_max]` of the spectrum of `HᵀH`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectralBounds {
    pub sigma_m: f64,
    pub sigma_max: f64,
    pub method: SpectralMethod,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMethod {
    ExactEig,
    PowerIteration,
}

/// Relative outward rounding applied to computed extreme eigenvalues so the
/// reported interval certifiably encloses the spectrum despite eigensolver
/// noise. `sigma_m` is additionally floored at 0.
const SPECTRAL_SLACK: f64 = 1e-12;

const POWER_MAX_ITERS: usize = 50_000;

fn enclose(sigma_m: f64, sigma_max: f64, method: SpectralMethod, tol: f64) -> SpectralBounds {
    SpectralBounds {
        sigma_m: (sigma_m * (1.0 - SPECTRAL_SLACK)).max(0.0),
        sigma_max: sigma_max * (1.0 + SPECTRAL_SLACK),
        method,
        tol,
    }
}

/// Spectral bounds of `HᵀH`: dense symmetric eigendecomposition up to
/// `in_dim` ~ 2000, power iteration beyond.
pub fn gram_spectral_bounds(map: &LinearMap, tol: f64) -> Result<SpectralBounds, LinopError> {
    if map.in_dim() <= 2000 {
        gram_spectral_bounds_with(map, tol, SpectralMethod::ExactEig)
    } else {
        gram_spectral_bounds_with(map, tol, SpectralMethod::PowerIteration)
    }
}

pub fn gram_spectral_bounds_with(
    map: &LinearMap,
    tol: f64,
    method: SpectralMethod,
) -> Result<SpectralBounds, LinopError> {
    match method {
        SpectralMethod::ExactEig => {
            let n = map.in_dim();
            let gram = map.assemble_gram();
            let m = DMatrix::from_row_slice(n, n, &gram);
            // symmetrize to shield the eigensolver from apply/adjoint round-off
            let sym = (&m + m.transpose()) * 0.5;
            let eig = sym.symmetric_eigenvalues();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &e in eig.iter() {
                lo = lo.min(e);
                hi = hi.max(e);
            }
            Ok(enclose(lo, hi, SpectralMethod::ExactEig, tol))
        }
        SpectralMethod::PowerIteration => {
            let n = map.in_dim();
            let gram_apply = |v: &[f64]| map.adjoint(&map.apply(v));
            let sigma_max = power_iteration(n, &gram_apply, tol, 17)?;
            // shifted iteration: largest eigenvalue of sigma_max·I − HᵀH is
            // sigma_max − sigma_m
            let shifted = |v: &[f64]| {
                let gv = gram_apply(v);
                v.iter().zip(gv).map(|(vi, gvi)| sigma_max * vi - gvi).collect::<Vec<_>>()
            };
            let gap = power_iteration(n, &shifted, tol, 18)?;
            Ok(enclose(
                sigma_max - gap,
                sigma_max,
                SpectralMethod::PowerIteration,
                tol,
            ))
        }
    }
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration with a
/// seeded random start; converged when the Rayleigh quotient's relative change
/// drops below `tol`.
fn power_iteration(
    n: usize,
    op: &dyn Fn(&[f64]) -> Vec<f64>,
    tol: f64,
    seed: u64,
) -> Result<f64, LinopError> {
    let mut rng = seeded_rng(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = norm(&v);
    for x in v.iter_mut() {
        *x /= nv;
    }
    let mut lambda = 0.0f64;
    for _ in 0..POWER_MAX_ITERS {
        let w = op(&v);
        let next = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        v = w.iter().map(|a| a / nw).collect();
        if (next - lambda).abs() <= tol * next.abs().max(1.0) {
            return Ok(next);
        }
        lambda = next;
    }
    Err(LinopError::NonConvergence {
        max_iters: POWER_MAX_ITERS,
        best: SpectralBounds {
            sigma_m: 0.0,
            sigma_max: lambda,
            method: SpectralMethod::PowerIteration,
            tol,
        },
    })
}

/// Max over `trials` random pairs of `|⟨Hx,r⟩ − ⟨x,Hᵀr⟩| / (1 + |⟨Hx,r⟩|)`.
pub fn adjoint_consistency_check(map: &LinearMap, trials: usize, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x: Vec<f64> = (0..map.in_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r: Vec<f64> = (0..map.out_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let hx = map.apply(&x);
        let htr = map.adjoint(&r);
        let lhs: f64 = hx.iter().zip(&r).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&htr).map(|(a, b)| a * b).sum();
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    worst
}

/// Parses a headerless row-major comma-separated matrix. All rows must have
/// equal length.
pub fn dense_from_csv(text: &str) -> Result<LinearMap, LinopError> {
    let mut entries = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row_len = 0;
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| LinopError::Csv(format!("line {}: {e}", lineno + 1)))?;
            entries.push(v);
            row_len += 1;
        }
        match cols {
            None => cols = Some(row_len),
            Some(c) if c != row_len => {
                return Err(LinopError::Csv(format!(
                    "line {}: expected {c} fields, got {row_len}",
                    lineno + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| LinopError::Csv("empty matrix".into()))?;
    make_dense(entries, rows, cols)
}

/// Parses a headerless CSV of numbers (any mix of commas and newlines).
pub fn vector_from_csv(text: &str) -> Result<Vec<f64>, LinopError> {
    let mut out = Vec::new();
    for field in text.split([',', '\n', '\r']).map(str::trim).filter(|s| !s.is_empty()) {
        out.push(
            field
                .parse()
                .map_err(|e| LinopError::Csv(format!("bad number {field:?}: {e}")))?,
        );
    }
    if out.is_empty() {
        return Err(LinopError::Csv("empty vector".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::assert_close;

    #[test]
    fn dense_identity_and_diagonal() {
        let id = make_dense(
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            3,
            3,
        )
        .unwrap();
        assert_eq!(id.apply(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);

        let d = make_dense(vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0], 3, 3).unwrap();
        assert_eq!(d.apply(&[1.0, 1.0, 1.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn dense_adjoint_is_hand_transpose() {
        // rows (1,0,1),(0,1,0); adjoint of (1,1) is (1,1,1)
        let m = make_dense(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0], 2, 3).unwrap();
        assert_eq!(m.adjoint(&[1.0, 1.0]), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn dense_shape_error() {
        assert!(matches!(
            make_dense(vec![1.0; 5], 2, 3),
            Err(LinopError::Shape(_))
        ));
    }

    #[test]
    fn convolution_by_hand() {
        let c = make_convolution(vec![1.0], 4).unwrap();
        assert_eq!(c.out_dim(), 4);
        assert_eq!(c.apply(&[4.0, 3.0, 2.0, 1.0]), vec![4.0, 3.0, 2.0, 1.0]);

        let c = make_convolution(vec![1.0, 1.0], 3).unwrap();
        assert_eq!(c.apply(&[1.0, 0.0, 0.0]), vec![1.0, 1.0, 0.0, 0.0]);

        let c = make_convolution(vec![1.0, -1.0], 2).unwrap();
        assert_eq!(c.apply(&[1.0, 1.0]), vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn convolution_empty_filter_rejected() {
        assert!(matches!(
            make_convolution(vec![], 4),
            Err(LinopError::InvalidArgument(_))
        ));
    }

    #[test]
    fn block_synthesis_replicates() {
        let g = make_block_synthesis(3, 1).unwrap();
        assert_eq!(g.apply(&[2.0]), vec![2.0, 2.0, 2.0]);

        let g = make_block_synthesis(1, 4).unwrap();
        assert_eq!(g.apply(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 2.0, 3.0, 4.0]);

        let g = make_block_synthesis(2, 2).unwrap();
        assert_eq!(g.apply(&[1.0, 3.0]), vec![1.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn composition_by_hand() {
        // F = conv(1,1), G = block(B=2): c=(1) -> (1,2,1)
        let g = make_block_synthesis(2, 1).unwrap();
        let f = make_convolution(vec![1.0, 1.0], 2).unwrap();
        let h = compose(f, g).unwrap();
        assert_eq!(h.apply(&[1.0]), vec![1.0, 2.0, 1.0]);
        assert_eq!(h.in_dim(), 1);
        assert_eq!(h.out_dim(), 3);

        let d2 = make_dense(vec![2.0], 1, 1).unwrap();
        let d3 = make_dense(vec![3.0], 1, 1).unwrap();
        let p = compose(d2, d3).unwrap();
        assert_eq!(p.apply(&[1.0]), vec![6.0]);
    }

    #[test]
    fn composition_identity_behaves_as_inner() {
        let a = make_dense(vec![1.0, 2.0, 3.0, 4.0], 2, 2).unwrap();
        let id = make_dense(vec![1.0, 0.0, 0.0, 1.0], 2, 2).unwrap();
        let c = compose(id, a.clone()).unwrap();
        let mut rng = seeded_rng(5);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            assert_eq!(c.apply(&x), a.apply(&x));
        }
    }

    #[test]
    fn composition_shape_error() {
        let a = make_dense(vec![1.0; 6], 2, 3).unwrap();
        let b = make_dense(vec![1.0; 6], 3, 2).unwrap();
        assert!(compose(a.clone(), a.clone()).is_err());
        assert!(compose(b, a).is_ok());
    }

    #[test]
    fn adjoint_consistency_all_kinds() {
        let maps = [
            make_dense(vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0], 2, 3).unwrap(),
            make_convolution(vec![0.4, -1.0, 0.25], 17).unwrap(),
            compose(
                make_convolution(vec![1.0, 1.0], 8).unwrap(),
                make_block_synthesis(2, 4).unwrap(),
            )
            .unwrap(),
        ];
        for m in &maps {
            assert!(adjoint_consistency_check(m, 100, 42) < 1e-12);
        }
    }

    #[test]
    fn linearity_on_random_probes() {
        let m = make_convolution(vec![0.3, 1.0, -0.5], 9).unwrap();
        let mut rng = seeded_rng(11);
        for _ in 0..50 {
            let x: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let z: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a: f64 = rng.gen_range(-2.0..2.0);
            let lhs = m.apply(&x.iter().zip(&z).map(|(xi, zi)| a * xi + zi).collect::<Vec<_>>());
            let rhs: Vec<f64> = m
                .apply(&x)
                .iter()
                .zip(m.apply(&z))
                .map(|(hx, hz)| a * hx + hz)
                .collect();
            for (l, r) in lhs.iter().zip(&rhs) {
                assert_close(*l, *r, 1e-12);
            }
        }
    }

    #[test]
    fn spectral_bounds_diagonal() {
        let d = make_dense(vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0], 3, 3).unwrap();
        let b = gram_spectral_bounds(&d, 1e-12).unwrap();
        assert_close(b.sigma_m, 1.0, 1e-9);
        assert_close(b.sigma_max, 9.0, 1e-9);
        assert!(b.sigma_m <= b.sigma_max && b.sigma_m >= 0.0);
    }

    #[test]
    fn spectral_bounds_identity() {
        let id = make_dense(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], 3, 3).unwrap();
        let b = gram_spectral_bounds(&id, 1e-12).unwrap();
        assert_close(b.sigma_m, 1.0, 1e-9);
        assert_close(b.sigma_max, 1.0, 1e-9);
    }

    #[test]
    fn spectral_bounds_conv_against_closed_form() {
        // Gram of conv-by-(1,1) on n=4 is tridiag(1,2,1) whose eigenvalues
        // are 2 + 2cos(k·pi/5), k = 1..4.
        let c = make_convolution(vec![1.0, 1.0], 4).unwrap();
        let b = gram_spectral_bounds(&c, 1e-12).unwrap();
        let hi = 2.0 + 2.0 * (std::f64::consts::PI / 5.0).cos();
        let lo = 2.0 + 2.0 * (4.0 * std::f64::consts::PI / 5.0).cos();
        assert_close(b.sigma_max, hi, 1e-10);
        assert_close(b.sigma_m, lo, 1e-10);
    }

    #[test]
    fn power_iteration_certified_against_dense() {
        let c = make_convolution(vec![1.0, 0.5, -0.25], 40).unwrap();
        let dense = gram_spectral_bounds_with(&c, 1e-12, SpectralMethod::ExactEig).unwrap();
        let power = gram_spectral_bounds_with(&c, 1e-13, SpectralMethod::PowerIteration).unwrap();
        assert_close(power.sigma_max, dense.sigma_max, 1e-6 * dense.sigma_max);
        assert_close(power.sigma_m, dense.sigma_m, 1e-5 * dense.sigma_max);
    }

    #[test]
    fn rayleigh_quotients_inside_bounds() {
        let c = make_convolution(vec![1.0, 0.7, 0.1], 25).unwrap();
        let b = gram_spectral_bounds(&c, 1e-12).unwrap();
        let mut rng = seeded_rng(3);
        for _ in 0..1000 {
            let mut x: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            for v in x.iter_mut() {
                *v /= n;
            }
            let hx = c.apply(&x);
            let q: f64 = hx.iter().map(|a| a * a).sum();
            assert!(q >= b.sigma_m - 1e-9 && q <= b.sigma_max + 1e-9, "q={q} out of bounds");
        }
    }

    #[test]
    fn composed_spectral_bound_submultiplicative() {
        let f = make_convolution(vec![1.0, 0.5], 10).unwrap();
        let g = make_block_synthesis(2, 5).unwrap();
        let fg = compose(f.clone(), g.clone()).unwrap();
        let bf = gram_spectral_bounds(&f, 1e-12).unwrap();
        let bg = gram_spectral_bounds(&g, 1e-12).unwrap();
        let bfg = gram_spectral_bounds(&fg, 1e-12).unwrap();
        assert!(bfg.sigma_max <= bf.sigma_max * bg.sigma_max + 1e-9);
    }

    #[test]
    fn maps_are_shareable_across_threads() {
        let m = compose(
            make_convolution(vec![1.0, 0.5], 6).unwrap(),
            make_block_synthesis(2, 3).unwrap(),
        )
        .unwrap();
        let expected = m.apply(&[1.0, -2.0, 0.5]);
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    for _ in 0..100 {
                        assert_eq!(m.apply(&[1.0, -2.0, 0.5]), expected);
                    }
                });
            }
        });
    }

    #[test]
    fn csv_round_trip() {
        let m = dense_from_csv("1, 0, 2\n-1,4,0.5\n").unwrap();
        assert_eq!(m.in_dim(), 3);
        assert_eq!(m.out_dim(), 2);
        assert_eq!(m.apply(&[1.0, 1.0, 1.0]), vec![3.0, 3.5]);
        assert!(dense_from_csv("1,2\n3\n").is_err());
        assert_eq!(vector_from_csv("1.5, 2\n-3\n").unwrap(), vec![1.5, 2.0, -3.0]);
    }
}
