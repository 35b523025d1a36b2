//! Seeded parallel Monte Carlo estimates of norm concentration and relative
//! contrast.
//!
//! Replicate `m` of a run with dimension `n` always comes from the same chunk
//! stream, so a cell of a sweep reproduces the single-cell estimate and the
//! result does not depend on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::DistributionSpec;
use crate::error::{domain, input, Result};
use crate::rng::{chunk_count, chunk_range, chunk_rng, mix64};
use crate::special::ln_sum_exp;

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
const CONTRAST_TAG: u64 = 0x636f_6e74_7261_7374;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `μ_p` of the component law.
    #[default]
    AnalyticMu,
    /// Pooled mean of `|x_ij|^p` over every sampled entry.
    EmpiricalMu,
}

impl Normalization {
    /// Analytic for closed families, empirical for sample-defined laws.
    pub fn default_for(dist: &DistributionSpec) -> Self {
        match dist {
            DistributionSpec::Empirical { .. } => Normalization::EmpiricalMu,
            _ => Normalization::AnalyticMu,
        }
    }
}

/// Wilson score interval for `k` successes out of `m`: `(low, high)`.
pub fn wilson_interval(k: usize, m: usize, z: f64) -> (f64, f64) {
    let m = m as f64;
    let phat = k as f64 / m;
    let z2 = z * z;
    let denom = 1.0 + z2 / m;
    let centre = (phat + z2 / (2.0 * m)) / denom;
    let half = z * (phat * (1.0 - phat) / m + z2 / (4.0 * m * m)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == m { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyEstimate {
    pub freq: f64,
    pub count: usize,
    pub samples: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Half-width of the Wilson 95% interval.
    pub ci_halfwidth: f64,
}

impl FrequencyEstimate {
    pub fn from_count(count: usize, samples: usize) -> Self {
        let (lo, hi) = wilson_interval(count, samples, Z95);
        FrequencyEstimate {
            freq: count as f64 / samples as f64,
            count,
            samples,
            ci_low: lo,
            ci_high: hi,
            ci_halfwidth: 0.5 * (hi - lo),
        }
    }

    /// Standard error implied by the Wilson interval.
    pub fn std_error(&self) -> f64 {
        self.ci_halfwidth / Z95
    }
}

/// `ln|x_i|` for one sampled vector, `-inf` at zeros.
fn draw_logs<R: rand::Rng>(dist: &DistributionSpec, n: usize, rng: &mut R, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend((0..n).map(|_| dist.draw(rng).abs().ln()));
}

/// `ln ‖x‖_p` from `ln|x_i|`, factoring out the largest entry.
fn ln_norm_from_logs(logs: &[f64], top: f64, p: f64) -> f64 {
    if top == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = logs.iter().map(|&l| (p * (l - top)).exp()).sum();
    top + s.ln() / p
}

/// `ln ‖x‖_p` for `m` vectors of dimension `n` and every `p` in `p_grid`,
/// laid out as `[p][replicate]`.
pub fn sample_ln_norms(dist: &DistributionSpec, n: usize, p_grid: &[f64], m: usize, seed: u64, key: u64) -> Vec<Vec<f64>> {
    let chunks: Vec<Vec<Vec<f64>>> = (0..chunk_count(m))
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, key, c as u64);
            let range = chunk_range(c, m);
            let mut out = vec![Vec::with_capacity(range.len()); p_grid.len()];
            let mut logs = Vec::with_capacity(n);
            for _ in range {
                draw_logs(dist, n, &mut rng, &mut logs);
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (j, &p) in p_grid.iter().enumerate() {
                    out[j].push(ln_norm_from_logs(&logs, top, p));
                }
            }
            out
        })
        .collect();
    let mut res = vec![Vec::with_capacity(m); p_grid.len()];
    for chunk in chunks {
        for (j, v) in chunk.into_iter().enumerate() {
            res[j].extend(v);
        }
    }
    res
}

/// `ln(n μ_p)` under the requested normalization.
fn ln_scale(dist: &DistributionSpec, n: usize, p: f64, norm: Normalization, ln_norms: &[f64]) -> Result<f64> {
    let ln_n = (n as f64).ln();
    match norm {
        Normalization::AnalyticMu => Ok(ln_n + dist.ln_mu_p(p)?),
        Normalization::EmpiricalMu => {
            // Σ_m ‖x_m‖_p^p / (M n) · n
            let total = ln_sum_exp(ln_norms.iter().map(|&l| p * l));
            if total == f64::NEG_INFINITY {
                return domain(format!("empirical mu_p underflows at p={p}"));
            }
            Ok(total - (ln_norms.len() as f64).ln())
        }
    }
}

/// Counts `ln‖x‖ - ln s ∈ [ln(1-δ), ln(1+δ)]` where `s = (nμ_p)^{1/p}`.
fn count_in_band(ln_norms: &[f64], ln_s: f64, delta: f64) -> usize {
    let lo = if delta >= 1.0 { f64::NEG_INFINITY } else { (-delta).ln_1p() };
    let hi = delta.ln_1p();
    ln_norms
        .iter()
        .filter(|&&l| {
            let r = l - ln_s;
            if l == f64::NEG_INFINITY {
                // The zero vector satisfies the lower inequality only when 1-δ ≤ 0.
                return delta >= 1.0;
            }
            r >= lo && r <= hi
        })
        .count()
}

fn check_common(p: f64, delta: f64, m: usize) -> Result<()> {
    if !(p > 0.0) {
        return domain(format!("p={p} must be positive"));
    }
    if !(delta > 0.0) {
        return domain(format!("delta={delta} must be positive"));
    }
    if m < 100 {
        return input(format!("M={m} must be at least 100"));
    }
    Ok(())
}

/// Frequency of `1-δ ≤ ‖x‖_p/(nμ_p)^{1/p} ≤ 1+δ` over `m` sampled vectors.
pub fn concentration_frequency(
    dist: &DistributionSpec,
    n: usize,
    p: f64,
    delta: f64,
    m: usize,
    seed: u64,
    norm: Normalization,
) -> Result<FrequencyEstimate> {
    check_common(p, delta, m)?;
    if n == 0 {
        return input("dimension n must be at least 1");
    }
    dist.validate()?;
    let ln_norms = sample_ln_norms(dist, n, &[p], m, seed, n as u64).pop().unwrap();
    band_estimate(dist, n, p, delta, norm, &ln_norms)
}

fn band_estimate(dist: &DistributionSpec, n: usize, p: f64, delta: f64, norm: Normalization, ln_norms: &[f64]) -> Result<FrequencyEstimate> {
    let ln_s = ln_scale(dist, n, p, norm, ln_norms)? / p;
    Ok(FrequencyEstimate::from_count(count_in_band(ln_norms, ln_s, delta), ln_norms.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationGrid {
    pub p_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    /// `freq[i][j]` for `p_grid[i]`, `n_grid[j]`; `None` marks a failed cell.
    pub freq: Vec<Vec<Option<f64>>>,
    pub ci_halfwidth: Vec<Vec<Option<f64>>>,
    pub sample_count: usize,
    pub seed: u64,
    pub delta: f64,
    pub normalization: Normalization,
    /// `(i, j, message)` for each failed cell.
    pub failures: Vec<(usize, usize, String)>,
}

/// Default p grid: 30 log-spaced points on `[1e-3, 10]`.
pub fn default_p_grid() -> Vec<f64> {
    log_spaced(1e-3, 10.0, 30)
}

pub const DEFAULT_N_GRID: [usize; 6] = [10, 30, 100, 300, 1000, 3000];

pub fn log_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp()).collect()
}

/// Concentration frequencies over a `p × n` grid. Each `n` column reuses the
/// same sampled vectors for every `p`.
pub fn curve_sweep(
    dist: &DistributionSpec,
    p_grid: &[f64],
    n_grid: &[usize],
    delta: f64,
    m: usize,
    seed: u64,
    norm: Normalization,
) -> Result<ConcentrationGrid> {
    if p_grid.is_empty() || n_grid.is_empty() {
        return input("p and n grids must be nonempty");
    }
    if let Some(&bad) = p_grid.iter().find(|p| !(**p > 0.0)) {
        return domain(format!("p={bad} must be positive"));
    }
    if let Some(&bad) = n_grid.iter().find(|n| **n == 0) {
        return input(format!("n={bad} must be at least 1"));
    }
    check_common(p_grid[0], delta, m)?;
    dist.validate()?;
    let mut freq = vec![vec![None; n_grid.len()]; p_grid.len()];
    let mut ci = vec![vec![None; n_grid.len()]; p_grid.len()];
    let mut failures = Vec::new();
    for (j, &n) in n_grid.iter().enumerate() {
        let norms = sample_ln_norms(dist, n, p_grid, m, seed, n as u64);
        for (i, (&p, ln_norms)) in p_grid.iter().zip(&norms).enumerate() {
            match band_estimate(dist, n, p, delta, norm, ln_norms) {
                Ok(est) => {
                    freq[i][j] = Some(est.freq);
                    ci[i][j] = Some(est.ci_halfwidth);
                }
                Err(e) => failures.push((i, j, e.to_string())),
            }
        }
    }
    Ok(ConcentrationGrid {
        p_grid: p_grid.to_vec(),
        n_grid: n_grid.to_vec(),
        freq,
        ci_halfwidth: ci,
        sample_count: m,
        seed,
        delta,
        normalization: norm,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastSummary {
    pub p: f64,
    pub n: usize,
    pub delta: f64,
    pub pairs: usize,
    /// Median of `|‖x₁‖_p - ‖x₂‖_p| / ‖x₁‖_p` over pairs with `x₁ ≠ 0`.
    pub median_rc: f64,
    /// Frequency of `|‖x₁‖_p - ‖x₂‖_p| / (nμ_p)^{1/p} < δ` over all pairs.
    pub freq_below_delta: f64,
    pub ci_halfwidth: f64,
    /// Frequency of the `δ/2` concentration band over all `2M` sampled vectors.
    pub half_band_freq: f64,
    pub skipped: usize,
    pub skip_rate: f64,
}

/// Median with the two middle values averaged for even lengths; `NaN` if empty.
pub fn median(values: &mut [f64]) -> f64 {
    let k = values.len();
    if k == 0 {
        return f64::NAN;
    }
    values.sort_unstable_by(f64::total_cmp);
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// `|‖x₁‖ - ‖x₂‖| / ‖x₁‖` from log norms; `None` when `x₁ = 0`.
pub fn relative_contrast_from_logs(l1: f64, l2: f64) -> Option<f64> {
    if l1 == f64::NEG_INFINITY {
        return None;
    }
    Some((l2 - l1).exp_m1().abs())
}

/// Relative contrast statistics over `m` independent pairs (`2m` draws).
pub fn relative_contrast(
    dist: &DistributionSpec,
    n: usize,
    p: f64,
    m: usize,
    seed: u64,
    delta: f64,
    norm: Normalization,
) -> Result<ContrastSummary> {
    check_common(p, delta, m)?;
    if n == 0 {
        return input("dimension n must be at least 1");
    }
    dist.validate()?;
    let ln_norms = sample_ln_norms(dist, n, &[p], 2 * m, seed, mix64(CONTRAST_TAG ^ n as u64)).pop().unwrap();
    let ln_s = ln_scale(dist, n, p, norm, &ln_norms)? / p;
    let mut rcs = Vec::with_capacity(m);
    let mut below = 0;
    for pair in ln_norms.chunks_exact(2) {
        let (l1, l2) = (pair[0], pair[1]);
        let diff = ((l1 - ln_s).exp() - (l2 - ln_s).exp()).abs();
        if diff < delta {
            below += 1;
        }
        if let Some(rc) = relative_contrast_from_logs(l1, l2) {
            rcs.push(rc);
        }
    }
    let skipped = m - rcs.len();
    let est = FrequencyEstimate::from_count(below, m);
    let half = count_in_band(&ln_norms, ln_s, 0.5 * delta) as f64 / (2 * m) as f64;
    Ok(ContrastSummary {
        p,
        n,
        delta,
        pairs: m,
        median_rc: median(&mut rcs),
        freq_below_delta: est.freq,
        ci_halfwidth: est.ci_halfwidth,
        half_band_freq: half,
        skipped,
        skip_rate: skipped as f64 / m as f64,
    })
}
