//! Real-data pipeline: CSV ingestion, standardization, zero-imputation and
//! mode-shift perturbations, two-sample KS tests, 1-D Wasserstein distances
//! and empirical concentration curves.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, input, Error, Result};
use crate::matrix::Matrix;
use crate::rng::{chunk_count, chunk_range, chunk_rng};
use crate::special::ln_sum_exp;

const ZERO_IMPUTE_KEY: u64 = 0x7a65_726f;
const CUBE_KEY: u64 = 0x6375_6265;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// Drop every row containing a missing cell.
    #[default]
    Reject,
    /// Replace missing cells with their column mean. This plants atoms in the
    /// data once it is centred.
    MeanImpute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub missing_markers: Vec<String>,
    pub policy: MissingPolicy,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { missing_markers: ["", "NA", "NaN", "nan", "?"].map(String::from).to_vec(), policy: MissingPolicy::Reject }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub names: Vec<String>,
    pub values: Matrix,
    pub unique_counts: Vec<usize>,
    pub constant_columns: Vec<usize>,
    pub rows_dropped: usize,
    pub cells_imputed: usize,
    pub warnings: Vec<String>,
}

fn distinct_count(col: &mut [f64]) -> usize {
    col.sort_unstable_by(f64::total_cmp);
    // -0.0 and 0.0 count as one value.
    let mut count = 0;
    let mut prev: Option<f64> = None;
    for &v in col.iter() {
        if prev != Some(v) {
            count += 1;
        }
        prev = Some(v);
    }
    count
}

impl Dataset {
    pub fn new(names: Vec<String>, values: Matrix) -> Result<Self> {
        if names.len() != values.cols {
            return input(format!("{} column names for {} columns", names.len(), values.cols));
        }
        if values.data.iter().any(|v| !v.is_finite()) {
            return input("dataset contains non-finite values");
        }
        let unique_counts: Vec<usize> = (0..values.cols).into_par_iter().map(|j| distinct_count(&mut values.column(j))).collect();
        let constant_columns = unique_counts.iter().enumerate().filter(|(_, &u)| u <= 1).map(|(j, _)| j).collect();
        Ok(Dataset { names, values, unique_counts, constant_columns, rows_dropped: 0, cells_imputed: 0, warnings: Vec::new() })
    }

    pub fn rows(&self) -> usize {
        self.values.rows
    }

    pub fn cols(&self) -> usize {
        self.values.cols
    }

    fn with_values(&self, values: Matrix) -> Self {
        let mut d = Dataset::new(self.names.clone(), values).expect("finite values keep the dataset valid");
        d.rows_dropped = self.rows_dropped;
        d.cells_imputed = self.cells_imputed;
        d.warnings = self.warnings.clone();
        d
    }

    pub fn column_by_name(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Reads a numeric CSV file with a header row.
pub fn load_csv(path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let names: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if names.is_empty() || (names.len() == 1 && names[0].is_empty()) {
        return input(format!("{}: empty file or missing header", path.display()));
    }
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let mut row = Vec::with_capacity(names.len());
        for (j, cell) in rec.iter().enumerate() {
            if opts.missing_markers.iter().any(|m| m == cell) {
                row.push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(Some(v)),
                _ => return input(format!("{}: line {line}, column '{}': cannot parse '{cell}' as a finite number", path.display(), names[j])),
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return input(format!("{}: no data rows", path.display()));
    }
    let n = names.len();
    let mut warnings = Vec::new();
    let missing: usize = rows.iter().map(|r| r.iter().filter(|c| c.is_none()).count()).sum();
    let (data, dropped, imputed) = match opts.policy {
        MissingPolicy::Reject => {
            let kept: Vec<Vec<f64>> = rows.iter().filter_map(|r| r.iter().copied().collect::<Option<Vec<f64>>>()).collect();
            let dropped = rows.len() - kept.len();
            if kept.is_empty() {
                return input(format!("{}: every row has a missing cell", path.display()));
            }
            if dropped > 0 {
                warnings.push(format!("dropped {dropped} rows with missing cells"));
            }
            (kept.concat(), dropped, 0)
        }
        MissingPolicy::MeanImpute => {
            let mut means = vec![0.0; n];
            for (j, mean) in means.iter_mut().enumerate() {
                let present: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
                if present.is_empty() {
                    return input(format!("{}: column '{}' has no values", path.display(), names[j]));
                }
                *mean = present.iter().sum::<f64>() / present.len() as f64;
            }
            if missing > 0 {
                warnings.push(format!(
                    "mean-imputed {missing} cells; after centring these become exact zeros, an atom that breaks small-p concentration"
                ));
            }
            let data = rows.iter().flat_map(|r| r.iter().enumerate().map(|(j, c)| c.unwrap_or(means[j]))).collect();
            (data, 0, missing)
        }
    };
    let m = data.len() / n;
    let mut ds = Dataset::new(names, Matrix { rows: m, cols: n, data })?;
    ds.rows_dropped = dropped;
    ds.cells_imputed = imputed;
    ds.warnings = warnings;
    Ok(ds)
}

/// One column of a CSV file, chosen by header name or zero-based index.
pub fn read_column(path: &Path, col: &str) -> Result<Vec<f64>> {
    let ds = load_csv(path, &LoadOptions::default())?;
    let j = match ds.column_by_name(col) {
        Some(j) => j,
        None => match col.parse::<usize>() {
            Ok(j) if j < ds.cols() => j,
            _ => return input(format!("{}: no column '{col}'", path.display())),
        },
    };
    Ok(ds.values.column(j))
}

/// Keeps the listed columns in order.
fn select_columns(data: &Dataset, keep: &[usize]) -> Dataset {
    let values = Matrix {
        rows: data.rows(),
        cols: keep.len(),
        data: data.values.rows_iter().flat_map(|r| keep.iter().map(move |&j| r[j])).collect(),
    };
    let names = keep.iter().map(|&j| data.names[j].clone()).collect();
    let mut d = Dataset::new(names, values).expect("subset of a valid dataset");
    d.rows_dropped = data.rows_dropped;
    d.cells_imputed = data.cells_imputed;
    d.warnings = data.warnings.clone();
    d
}

pub fn drop_constant_columns(data: &Dataset) -> Dataset {
    let keep: Vec<usize> = (0..data.cols()).filter(|j| !data.constant_columns.contains(j)).collect();
    select_columns(data, &keep)
}

/// Centres every column and scales it to unit sample variance (denominator `M-1`).
pub fn standardize(data: &Dataset) -> Result<Dataset> {
    if let Some(&j) = data.constant_columns.first() {
        return domain(format!("column '{}' is constant; drop constant columns first", data.names[j]));
    }
    let m = data.rows();
    if m < 2 {
        return domain("standardization needs at least two rows");
    }
    let stats: Vec<(f64, f64)> = (0..data.cols())
        .into_par_iter()
        .map(|j| {
            let col = data.values.column(j);
            let mean = col.iter().sum::<f64>() / m as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
            (mean, var.sqrt())
        })
        .collect();
    let mut values = data.values.clone();
    for row in values.data.chunks_mut(data.cols()) {
        for (v, (mean, sd)) in row.iter_mut().zip(&stats) {
            *v = (*v - mean) / sd;
        }
    }
    Ok(data.with_values(values))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputeResult {
    pub data: Dataset,
    pub replaced: usize,
    pub realized_fraction: f64,
}

/// Replaces each entry by an exact zero with probability `gap_prob`.
pub fn zero_impute(data: &Dataset, gap_prob: f64, seed: u64) -> Result<ImputeResult> {
    if !(0.0..=1.0).contains(&gap_prob) {
        return domain(format!("gap probability {gap_prob} outside [0, 1]"));
    }
    let mut values = data.values.clone();
    let cols = data.cols();
    let mut replaced = 0;
    for c in 0..chunk_count(data.rows()) {
        let mut rng = chunk_rng(seed, ZERO_IMPUTE_KEY, c as u64);
        for i in chunk_range(c, data.rows()) {
            for v in values.row_mut(i) {
                if rng.random::<f64>() < gap_prob {
                    *v = 0.0;
                    replaced += 1;
                }
            }
        }
    }
    let total = data.rows() * cols;
    Ok(ImputeResult { data: data.with_values(values), replaced, realized_fraction: replaced as f64 / total.max(1) as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeShiftResult {
    pub data: Dataset,
    /// Columns whose mode was nonzero and got subtracted.
    pub affected_columns: usize,
    /// Entries that were nonzero and became zero.
    pub zeros_introduced: usize,
}

/// Most frequent value, ties broken by the smallest value.
pub fn mode(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let (mut best, mut best_len) = (v[0], 0);
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        if j - i > best_len {
            best = v[i];
            best_len = j - i;
        }
        i = j;
    }
    best
}

/// Re-centres every column with fewer than `max_unique` distinct values so
/// its mode becomes exactly zero.
pub fn mode_shift(data: &Dataset, max_unique: usize) -> Result<ModeShiftResult> {
    if max_unique < 2 {
        return domain(format!("max_unique={max_unique} must be at least 2"));
    }
    let mut values = data.values.clone();
    let mut affected = 0;
    let mut zeros = 0;
    for j in 0..data.cols() {
        if data.unique_counts[j] >= max_unique || data.rows() == 0 {
            continue;
        }
        let col = data.values.column(j);
        let m = mode(&col);
        if m == 0.0 {
            continue;
        }
        affected += 1;
        for (i, &v) in col.iter().enumerate() {
            if v == m {
                zeros += 1;
                values.set(i, j, 0.0);
            } else {
                values.set(i, j, v - m);
            }
        }
    }
    Ok(ModeShiftResult { data: data.with_values(values), affected_columns: affected, zeros_introduced: zeros })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub pvalue: f64,
}

/// `P(K > λ)` for the Kolmogorov distribution, each series cut at 100 terms.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Dual theta series, accurate where the alternating one is not.
        let c = -std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=100).map(|k| ((2 * k - 1) as f64).powi(2) * c).map(f64::exp).sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Two-sample KS statistic with the asymptotic p-value at `λ = √(mn/(m+n)) D`.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<KsResult> {
    if x.len() < 10 || y.len() < 10 {
        return input(format!("KS test needs at least 10 points per sample, got {} and {}", x.len(), y.len()));
    }
    let (xs, ys) = (sorted(x), sorted(y));
    let (m, n) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / m - j as f64 / n).abs());
    }
    let en = (m * n / (m + n)).sqrt();
    Ok(KsResult { statistic: d, pvalue: kolmogorov_survival(en * d) })
}

/// `∫ |F_x - F_y|` between the two empirical distributions.
pub fn wasserstein_1d(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return input("Wasserstein distance needs nonempty samples");
    }
    let (xs, ys) = (sorted(x), sorted(y));
    let (m, n) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut area = 0.0;
    let mut prev = xs[0].min(ys[0]);
    while i < xs.len() || j < ys.len() {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        area += (i as f64 / m - j as f64 / n).abs() * (v - prev);
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        prev = v;
    }
    Ok(area)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CurveNormalization {
    /// `n μ̂_p` with `μ̂_p` the mean of `|x_ij|^p` over all entries.
    #[default]
    Pooled,
    /// Each coordinate divided by its own column mean of `|x_ij|^p`.
    PerColumn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub p: f64,
    /// Fraction of rows inside the band; `None` when `μ̂_p` is not representable.
    pub fraction: Option<f64>,
}

/// `ln Σ_j w_j |x_j|^p` per row, factoring out the largest term.
fn row_ln_power_sums(data: &Matrix, p: f64, ln_weights: Option<&[f64]>) -> Vec<f64> {
    data.rows_iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|row| {
            let terms = row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| p * v.abs().ln() + ln_weights.map_or(0.0, |w| w[j]));
            ln_sum_exp(terms)
        })
        .collect()
}

/// Fraction of rows with `1-δ ≤ ‖x‖_p / (n μ̂_p)^{1/p} ≤ 1+δ`.
pub fn band_fraction(data: &Matrix, p: f64, delta: f64, norm: CurveNormalization) -> Option<f64> {
    if data.rows == 0 {
        return None;
    }
    let m = data.rows as f64;
    let (sums, ln_target) = match norm {
        CurveNormalization::Pooled => {
            let sums = row_ln_power_sums(data, p, None);
            let total = ln_sum_exp(sums.iter().copied());
            (sums, total - m.ln())
        }
        CurveNormalization::PerColumn => {
            let ln_mu: Vec<f64> = (0..data.cols)
                .into_par_iter()
                .map(|j| {
                    let logs: Vec<f64> = data.rows_iter().map(|r| r[j]).filter(|v| *v != 0.0).map(|v| p * v.abs().ln()).collect();
                    ln_sum_exp(logs) - m.ln()
                })
                .collect();
            if ln_mu.iter().any(|l| !l.is_finite()) {
                return None;
            }
            let neg: Vec<f64> = ln_mu.iter().map(|l| -l).collect();
            (row_ln_power_sums(data, p, Some(&neg)), (data.cols as f64).ln())
        }
    };
    if !ln_target.is_finite() {
        return None;
    }
    // Compare in the p-th power: ln S - ln target ∈ [p ln(1-δ), p ln(1+δ)].
    let lo = if delta >= 1.0 { f64::NEG_INFINITY } else { p * (-delta).ln_1p() };
    let hi = p * delta.ln_1p();
    let inside = sums
        .iter()
        .filter(|&&s| {
            if s == f64::NEG_INFINITY {
                return delta >= 1.0;
            }
            let r = s - ln_target;
            r >= lo && r <= hi
        })
        .count();
    Some(inside as f64 / m)
}

pub fn concentration_curve(data: &Dataset, p_grid: &[f64], delta: f64, norm: CurveNormalization) -> Result<Vec<CurvePoint>> {
    if let Some(&p) = p_grid.iter().find(|p| !(**p > 0.0)) {
        return domain(format!("p={p} must be positive"));
    }
    if !(delta > 0.0) {
        return domain(format!("delta={delta} must be positive"));
    }
    Ok(p_grid.iter().map(|&p| CurvePoint { p, fraction: band_fraction(&data.values, p, delta, norm) }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveComparison {
    pub p: f64,
    pub frac_original: Option<f64>,
    pub frac_perturbed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbReport {
    pub gap_prob: f64,
    pub realized_fraction: f64,
    /// Sum over columns of the 1-D `W_1` between original and perturbed marginals.
    pub wasserstein_total: f64,
    pub ks_min_pvalue: f64,
    pub ks_statistic_max: f64,
    pub seed: u64,
    pub curves: Vec<CurveComparison>,
}

/// Column-wise KS and Wasserstein comparison of two datasets of equal width.
pub fn compare_columns(a: &Dataset, b: &Dataset) -> Result<(f64, f64, f64)> {
    if a.cols() != b.cols() {
        return input(format!("column counts differ: {} vs {}", a.cols(), b.cols()));
    }
    let per: Vec<Result<(f64, KsResult)>> = (0..a.cols())
        .into_par_iter()
        .map(|j| {
            let (x, y) = (a.values.column(j), b.values.column(j));
            Ok((wasserstein_1d(&x, &y)?, ks_two_sample(&x, &y)?))
        })
        .collect();
    let mut w = 0.0;
    let mut pmin = 1.0f64;
    let mut dmax = 0.0f64;
    for r in per {
        let (wj, ks) = r?;
        w += wj;
        pmin = pmin.min(ks.pvalue);
        dmax = dmax.max(ks.statistic);
    }
    Ok((w, pmin, dmax))
}

/// Zero-imputes `data` and compares it with the original.
pub fn perturb(data: &Dataset, gap_prob: f64, seed: u64, p_grid: &[f64], delta: f64, norm: CurveNormalization) -> Result<PerturbReport> {
    let imp = zero_impute(data, gap_prob, seed)?;
    let (w, pmin, dmax) = compare_columns(data, &imp.data)?;
    let orig = concentration_curve(data, p_grid, delta, norm)?;
    let pert = concentration_curve(&imp.data, p_grid, delta, norm)?;
    let curves = orig
        .iter()
        .zip(&pert)
        .map(|(o, q)| CurveComparison { p: o.p, frac_original: o.fraction, frac_perturbed: q.fraction })
        .collect();
    Ok(PerturbReport {
        gap_prob,
        realized_fraction: imp.realized_fraction,
        wasserstein_total: w,
        ks_min_pvalue: pmin,
        ks_statistic_max: dmax,
        seed,
        curves,
    })
}

/// `m × n` matrix of i.i.d. uniform `[0, 1]` entries.
pub fn synthetic_cube(m: usize, n: usize, seed: u64) -> Dataset {
    let mut values = Matrix::zeros(m, n);
    for c in 0..chunk_count(m) {
        let mut rng = chunk_rng(seed, CUBE_KEY, c as u64);
        for i in chunk_range(c, m) {
            values.row_mut(i).iter_mut().for_each(|v| *v = rng.random::<f64>());
        }
    }
    let names = (0..n).map(|j| format!("x{j}")).collect();
    Dataset::new(names, values).expect("uniform draws are finite")
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reject" => Ok(MissingPolicy::Reject),
            "mean-impute" => Ok(MissingPolicy::MeanImpute),
            other => input(format!("unknown missing-value policy '{other}'")),
        }
    }
}
