//! Synthetic embedding generators, their concentration and contrast tables, and
//! retrieval scoring kernels (cosine, sparse dot, hybrid, reciprocal rank
//! fusion, `l^p` of a Hadamard product).

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{band_fraction, CurveNormalization};
use crate::error::{input, Result};
use crate::matrix::Matrix;
use crate::monte_carlo::{median, relative_contrast_from_logs};
use crate::rng::{chunk_count, chunk_range, chunk_rng};

pub const RRF_K: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    /// 384 coordinates `N(0, 0.0225)`, then scaled to unit `l^2` norm.
    Dense,
    /// 5000 coordinates, zero with probability 0.998, otherwise `Exp(1.5)`.
    Sparse,
    /// 384 coordinates `max(0, N(0, 0.09))`.
    Relu,
    /// 500 coordinates `Bernoulli(0.1)`.
    Binary,
}

impl EmbeddingKind {
    pub const ALL: [EmbeddingKind; 4] = [EmbeddingKind::Dense, EmbeddingKind::Sparse, EmbeddingKind::Relu, EmbeddingKind::Binary];

    pub fn dim(self) -> usize {
        match self {
            EmbeddingKind::Dense | EmbeddingKind::Relu => 384,
            EmbeddingKind::Sparse => 5000,
            EmbeddingKind::Binary => 500,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EmbeddingKind::Dense => "dense",
            EmbeddingKind::Sparse => "sparse",
            EmbeddingKind::Relu => "relu",
            EmbeddingKind::Binary => "binary",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dense" => Ok(EmbeddingKind::Dense),
            "sparse" => Ok(EmbeddingKind::Sparse),
            "relu" => Ok(EmbeddingKind::Relu),
            "binary" => Ok(EmbeddingKind::Binary),
            other => input(format!("unknown embedding kind '{other}'")),
        }
    }

    fn key(self) -> u64 {
        0xE3B0_0000 + self as u64
    }

    fn fill_row<R: Rng>(self, rng: &mut R, row: &mut [f64]) {
        match self {
            EmbeddingKind::Dense => {
                let normal = Normal::new(0.0, 0.15).unwrap();
                row.iter_mut().for_each(|v| *v = normal.sample(rng));
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                row.iter_mut().for_each(|v| *v /= norm);
            }
            EmbeddingKind::Sparse => {
                let exp = Exp::new(1.5).unwrap();
                for v in row.iter_mut() {
                    *v = if rng.random::<f64>() < 0.998 { 0.0 } else { exp.sample(rng) };
                }
            }
            EmbeddingKind::Relu => {
                let normal = Normal::new(0.0, 0.3).unwrap();
                row.iter_mut().for_each(|v| *v = f64::max(normal.sample(rng), 0.0));
            }
            EmbeddingKind::Binary => {
                row.iter_mut().for_each(|v| *v = if rng.random::<f64>() < 0.1 { 1.0 } else { 0.0 });
            }
        }
    }
}

/// `m` deterministic embeddings of the given kind, one per row.
pub fn generate(kind: EmbeddingKind, m: usize, seed: u64) -> Result<Matrix> {
    if m == 0 {
        return input("M must be at least 1");
    }
    let dim = kind.dim();
    let blocks: Vec<Vec<f64>> = (0..chunk_count(m))
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, kind.key(), c as u64);
            let range = chunk_range(c, m);
            let mut block = vec![0.0; range.len() * dim];
            for row in block.chunks_exact_mut(dim) {
                kind.fill_row(&mut rng, row);
            }
            block
        })
        .collect();
    Ok(Matrix { rows: m, cols: dim, data: blocks.concat() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableCell {
    pub kind: EmbeddingKind,
    pub p: f64,
    pub value: f64,
}

/// `ln ‖row‖_p` for every row, `-inf` for zero rows.
fn row_ln_norms(data: &Matrix, p: f64) -> Vec<f64> {
    data.rows_iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|row| {
            let top = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if top == 0.0 {
                return f64::NEG_INFINITY;
            }
            let s: f64 = row.iter().filter(|v| **v != 0.0).map(|v| (v.abs() / top).powf(p)).sum();
            top.ln() + s.ln() / p
        })
        .collect()
}

/// Concentration frequency per `(kind, p)` under the pooled `μ̂_p`, each kind
/// generated once.
pub fn concentration_table(kinds: &[EmbeddingKind], p_grid: &[f64], delta: f64, m: usize, seed: u64) -> Result<Vec<TableCell>> {
    let mut cells = Vec::new();
    for &kind in kinds {
        let data = generate(kind, m, seed)?;
        for &p in p_grid {
            let value = band_fraction(&data, p, delta, CurveNormalization::Pooled)
                .ok_or_else(|| crate::Error::Input(format!("pooled mean of |x|^p is not representable at p={p}")))?;
            cells.push(TableCell { kind, p, value });
        }
    }
    Ok(cells)
}

/// Median relative contrast per `(kind, p)` over `pairs` disjoint row pairs.
/// Pairs whose first vector is zero are skipped.
pub fn contrast_table(kinds: &[EmbeddingKind], p_grid: &[f64], pairs: usize, seed: u64) -> Result<Vec<TableCell>> {
    let mut cells = Vec::new();
    for &kind in kinds {
        let data = generate(kind, 2 * pairs, seed)?;
        for &p in p_grid {
            let ln_norms = row_ln_norms(&data, p);
            let mut rc: Vec<f64> = ln_norms.chunks_exact(2).filter_map(|w| relative_contrast_from_logs(w[0], w[1])).collect();
            cells.push(TableCell { kind, p, value: median(&mut rc) });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScorePair {
    pub dense_score: f64,
    /// Set when either vector is zero, in which case the cosine is reported as 0.
    pub dense_zero_vector: bool,
    pub sparse_score: f64,
    pub hybrid_score: f64,
    pub rrf_score: f64,
}

/// Cosine similarity and a flag for the zero-vector convention.
pub fn cosine(q: &[f64], d: &[f64]) -> (f64, bool) {
    let nq = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nd = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nq == 0.0 || nd == 0.0 {
        return (0.0, true);
    }
    let dot: f64 = q.iter().zip(d).map(|(a, b)| a * b).sum();
    (dot / (nq * nd), false)
}

/// `Σ w_q(j) w_d(j)`.
pub fn sparse_dot(wq: &[f64], wd: &[f64]) -> f64 {
    wq.iter().zip(wd).map(|(a, b)| a * b).sum()
}

/// `α ŝ_dense + (1-α) ŝ_sparse` on already normalized scores.
pub fn hybrid(alpha: f64, dense_hat: f64, sparse_hat: f64) -> f64 {
    alpha * dense_hat + (1.0 - alpha) * sparse_hat
}

/// `Σ_i 1/(k + r_i)` with 1-based ranks and `k = 60`.
pub fn rrf(ranks: &[usize]) -> Result<f64> {
    if ranks.contains(&0) {
        return input("ranks are 1-based");
    }
    Ok(ranks.iter().map(|&r| 1.0 / (RRF_K + r as f64)).sum())
}

/// Min-max scaling to `[0, 1]`; a constant list maps to zeros.
pub fn min_max_normalize(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    scores.iter().map(|&s| if span > 0.0 { (s - lo) / span } else { 0.0 }).collect()
}

/// All four scores for one query/document pair. `normalized` supplies the
/// `(ŝ_dense, ŝ_sparse)` pair for the hybrid score; without it the raw scores
/// are combined. `ranks` holds the document's rank in each fused list.
pub fn scores(query: &[f64], doc: &[f64], alpha: f64, normalized: Option<(f64, f64)>, ranks: &[usize]) -> Result<ScorePair> {
    if query.len() != doc.len() {
        return input(format!("dimension mismatch: {} vs {}", query.len(), doc.len()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return input(format!("alpha={alpha} must lie in [0, 1]"));
    }
    if query.iter().chain(doc).any(|v| *v < 0.0) {
        return input("sparse weights must be non-negative");
    }
    let (dense, zero) = cosine(query, doc);
    let sparse = sparse_dot(query, doc);
    let (dh, sh) = normalized.unwrap_or((dense, sparse));
    Ok(ScorePair {
        dense_score: dense,
        dense_zero_vector: zero,
        sparse_score: sparse,
        hybrid_score: hybrid(alpha, dh, sh),
        rrf_score: rrf(ranks)?,
    })
}

/// `(Σ_j z_j^p, |{j : z_j > 0}|)` for `z = wq ⊙ wd`.
pub fn hadamard_lp(wq: &[f64], wd: &[f64], p: f64) -> Result<(f64, usize)> {
    if wq.len() != wd.len() {
        return input(format!("dimension mismatch: {} vs {}", wq.len(), wd.len()));
    }
    if !(p > 0.0) {
        return input(format!("p={p} must be positive"));
    }
    if wq.iter().chain(wd).any(|v| *v < 0.0) {
        return input("weights must be non-negative");
    }
    let mut sum = 0.0;
    let mut overlap = 0;
    for (a, b) in wq.iter().zip(wd) {
        let z = a * b;
        if z > 0.0 {
            overlap += 1;
            sum += if p == 1.0 { z } else { z.powf(p) };
        }
    }
    Ok((sum, overlap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dense_rows_are_unit() {
        let d = generate(EmbeddingKind::Dense, 50, 1).unwrap();
        for row in d.rows_iter() {
            assert_relative_eq!(row.iter().map(|v| v * v).sum::<f64>().sqrt(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mean_nonzero_counts() {
        let nz = |k: EmbeddingKind| {
            let d = generate(k, 5000, 2).unwrap();
            d.data.iter().filter(|v| **v != 0.0).count() as f64 / 5000.0
        };
        assert!((nz(EmbeddingKind::Sparse) - 10.0).abs() < 0.5);
        assert!((nz(EmbeddingKind::Binary) - 50.0).abs() < 2.0);
    }

    #[test]
    fn scoring_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), (0.0, false));
        assert_eq!(cosine(&[0.0, 0.0], &[0.0, 1.0]), (0.0, true));
        assert_relative_eq!(rrf(&[1, 1]).unwrap(), 2.0 / 61.0, epsilon = 1e-15);
        assert!(rrf(&[0]).is_err());
        assert_eq!(sparse_dot(&[1.0, 0.0], &[0.0, 2.0]), 0.0);
        assert_eq!(hadamard_lp(&[1.0, 0.0, 2.0], &[3.0, 0.0, 0.0], 1.0).unwrap(), (3.0, 1));
        assert_eq!(hadamard_lp(&[0.0, 1.0], &[0.0, 1.0], 0.37).unwrap(), (1.0, 1));
        let s = scores(&[1.0, 2.0, 0.0], &[3.0, 0.5, 1.0], 0.3, Some((0.2, 0.9)), &[2, 5]).unwrap();
        assert_relative_eq!(s.hybrid_score, 0.3 * 0.2 + 0.7 * 0.9, epsilon = 1e-15);
        assert_eq!(s.sparse_score, 4.0);
        assert_eq!(min_max_normalize(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);
    }

    #[test]
    fn hadamard_small_p_counts_overlap() {
        let wq = [0.3, 0.0, 2.0, 5.0];
        let wd = [1.5, 4.0, 0.7, 0.0];
        let (s, k) = hadamard_lp(&wq, &wd, 1e-9).unwrap();
        assert_eq!(k, 2);
        assert_relative_eq!(s, 2.0, epsilon = 1e-8);
        assert_eq!(hadamard_lp(&wq, &wd, 1.0).unwrap().0, sparse_dot(&wq, &wd));
    }
}
