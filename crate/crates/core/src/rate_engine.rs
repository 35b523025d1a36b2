//! Chernoff rate functions `Λ±(p, δ)` of `|x|^p`, their small-p and large-p
//! limits, the small-δ coefficient `φ(p)` and the uniform-in-p rates.

use rayon::prelude::*;
use serde::Serialize;

use crate::closed_forms::{self, Family};
use crate::distributions::{DistributionSpec, Sign};
use crate::error::{domain, Result};
use crate::optimize::{maximize_concave, MaxOptions};
use crate::special::ln_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    InteriorOptimum,
    LimitPTo0,
    LimitPToInfinity,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateResult {
    pub value: f64,
    pub argmax_t: Option<f64>,
    pub regime: Regime,
    pub iterations: usize,
    pub tolerance_met: bool,
}

impl RateResult {
    fn infinite() -> Self {
        RateResult { value: f64::INFINITY, argmax_t: None, regime: Regime::Divergent, iterations: 0, tolerance_met: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundResult {
    pub upper_tail_bound: f64,
    pub lower_tail_bound: f64,
    pub two_sided_lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LargePLimits {
    pub plus: f64,
    /// `-ln F((1-δ)B)` with `F` the CDF of `|x|`.
    pub minus: f64,
    /// `-ln F((1-δ)B-)`; differs from `minus` only at an atom of `|x|`.
    pub minus_left: f64,
    /// Set when `|x|` has atoms, so the limit is only known to lie in
    /// `[minus, minus_left]`.
    pub bracketed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateSource {
    Grid,
    SmallPLimit,
    LargePLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformRate {
    pub value: f64,
    pub argmin_p: Option<f64>,
    pub source: RateSource,
    pub grid: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContrastBounds {
    pub norm_diff_lower: f64,
    pub relative_contrast_lower: f64,
}

fn check_args(p: f64, delta: f64) -> Result<()> {
    if !(p > 0.0) {
        return domain(format!("p={p} must be positive"));
    }
    if !(delta > 0.0) {
        return domain(format!("delta={delta} must be positive"));
    }
    Ok(())
}

/// `ln(1 ± δ)`.
fn ln_shift(delta: f64, sign: Sign) -> f64 {
    (sign.factor() * delta).ln_1p()
}

/// `λ±(t) = ±t(1±δ)^p μ_p - ln E[e^{±t|x|^p}]`; `-inf` when the MGF diverges.
pub fn lambda(dist: &DistributionSpec, t: f64, p: f64, delta: f64, sign: Sign) -> Result<f64> {
    check_args(p, delta)?;
    if !(t >= 0.0) {
        return domain(format!("t={t} must be non-negative"));
    }
    let ln_mu = dist.ln_mu_p(p)?;
    Ok(lambda_centered(dist, t, p, delta, sign, ln_mu))
}

fn lambda_centered(dist: &DistributionSpec, t: f64, p: f64, delta: f64, sign: Sign, ln_mu: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    // Centering at the level itself keeps λ = -ln E[e^{c(|x|^p - level)}]
    // free of cancellation even when t is huge.
    let c = sign.factor() * t;
    let ln_level = ln_mu + p * ln_shift(delta, sign);
    let cgf = dist.ln_mgf_centered(c, p, ln_level);
    if cgf == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    -cgf
}

/// `(1+x) ln(1+x) - x`, accurate near zero.
fn entropy_excess(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x2 * (0.5 - x / 6.0 + x2 / 12.0 - x2 * x / 20.0)
    } else if x == -1.0 {
        1.0
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

/// `KL(Ber(s + d) || Ber(s))` without cancellation for small `d`.
fn bernoulli_kl_shift(s: f64, d: f64) -> f64 {
    s * entropy_excess(d / s) + (1.0 - s) * entropy_excess(-d / (1.0 - s))
}

fn two_point_rate(dist: &DistributionSpec, a: f64, r: f64, p: f64, delta: f64, sign: Sign) -> RateResult {
    let s = 1.0 - a;
    let shift = (p * ln_shift(delta, sign)).exp_m1();
    let q = s * (1.0 + shift);
    if q > 1.0 {
        return RateResult::infinite();
    }
    if q == 1.0 {
        return RateResult { value: -s.ln(), argmax_t: None, regime: Regime::InteriorOptimum, iterations: 0, tolerance_met: true };
    }
    let value = bernoulli_kl_shift(s, s * shift);
    let ratio = (q * a) / (s * (1.0 - q));
    let t = sign.factor() * ratio.ln() / r.powf(p);
    let t = t.max(0.0);
    // Cross-check the analytic maximizer against the generic objective.
    let ln_mu = p * r.ln() + s.ln();
    let direct = lambda_centered(dist, t, p, delta, sign, ln_mu);
    let ok = (direct - value).abs() <= 1e-9 * value.max(1e-300) + 1e-15;
    RateResult { value, argmax_t: Some(t), regime: Regime::InteriorOptimum, iterations: 0, tolerance_met: ok }
}

/// Supremum over `t ≥ 0` of `λ±(t, p, δ)`.
pub fn rate(dist: &DistributionSpec, p: f64, delta: f64, sign: Sign) -> Result<RateResult> {
    check_args(p, delta)?;
    if p > dist.p0() {
        return domain(format!("p={p} exceeds p0={} for {dist}", dist.p0()));
    }
    if sign == Sign::Minus && delta >= 1.0 {
        return Ok(RateResult::infinite());
    }
    let ln_mu = dist.ln_mu_p(p)?;
    match dist {
        DistributionSpec::TwoPoint { a, r } | DistributionSpec::ThreePointSymmetric { a, r } => {
            return Ok(two_point_rate(dist, *a, *r, p, delta, sign));
        }
        _ => {}
    }
    // Levels outside the support of |x|^p give an infinite rate.
    let ln_level = ln_mu + p * ln_shift(delta, sign);
    let edge = match sign {
        Sign::Plus => dist.ess_sup(),
        Sign::Minus => dist.ess_inf(),
    };
    if edge.is_finite() && edge > 0.0 {
        let ln_edge = p * edge.ln();
        let gap = sign.factor() * (ln_level - ln_edge);
        let tiny = 1e-13 * ln_edge.abs().max(1.0);
        if gap > tiny {
            return Ok(RateResult::infinite());
        }
        if gap.abs() <= tiny {
            let mass = dist.atom_mass_abs(edge);
            if mass == 0.0 {
                return Ok(RateResult::infinite());
            }
            return Ok(RateResult { value: -mass.ln(), argmax_t: None, regime: Regime::InteriorOptimum, iterations: 0, tolerance_met: true });
        }
    }
    // Work in the dimensionless variable u = t μ_p (times p for small p).
    let scale = if p < 0.05 { 1.0 / (p * ln_mu.exp()) } else { 1.0 / ln_mu.exp() };
    let upper = match dist {
        DistributionSpec::StandardNormal if sign == Sign::Plus && p == 2.0 => 0.5 / scale,
        _ => f64::INFINITY,
    };
    let obj = |u: f64| lambda_centered(dist, u * scale, p, delta, sign, ln_mu);
    let res = maximize_concave(obj, upper, MaxOptions::default());
    Ok(RateResult {
        value: res.value.max(0.0),
        argmax_t: Some(res.argmax * scale),
        regime: Regime::InteriorOptimum,
        iterations: res.iterations,
        tolerance_met: res.converged,
    })
}

/// `p → 0` rate `f±(δ) = sup_y [±y(ln(1±δ) + E ln|x|) - ln E|x|^{±y}]`.
///
/// Closed forms are used for the uniform and difference-of-uniforms laws.
pub fn small_p_rate(dist: &DistributionSpec, delta: f64, sign: Sign) -> Result<f64> {
    small_p_precheck(dist, delta)?;
    if sign == Sign::Minus && delta >= 1.0 {
        return Ok(f64::INFINITY);
    }
    match dist {
        DistributionSpec::UniformSymmetric { .. } | DistributionSpec::UniformUnit => Ok(closed_forms::uniform_f(delta, sign)),
        DistributionSpec::DiffUniform => Ok(closed_forms::diff_uniform_f(delta, sign)),
        _ => small_p_rate_numeric(dist, delta, sign).map(|r| r.value),
    }
}

fn small_p_precheck(dist: &DistributionSpec, delta: f64) -> Result<()> {
    if !(delta > 0.0) {
        return domain(format!("delta={delta} must be positive"));
    }
    if dist.atom_at_zero() > 0.0 {
        return domain("small-p rate needs a law without an atom at zero; use the anti-concentration tools");
    }
    dist.validate()
}

/// Direct numerical maximization for `f±(δ)`; `argmax_t` holds the maximizing `y`.
pub fn small_p_rate_numeric(dist: &DistributionSpec, delta: f64, sign: Sign) -> Result<RateResult> {
    small_p_precheck(dist, delta)?;
    if sign == Sign::Minus && delta >= 1.0 {
        return Ok(RateResult::infinite());
    }
    let (m, _) = dist.log_moments()?;
    let l = ln_shift(delta, sign);
    let s = sign.factor();
    let edge = match sign {
        Sign::Plus => dist.ess_sup(),
        Sign::Minus => dist.ess_inf(),
    };
    if edge.is_finite() && edge > 0.0 {
        let gap = s * (l + m - edge.ln());
        if gap > 1e-13 {
            return Ok(RateResult::infinite());
        }
    }
    // ln E exp(q (ln|x| - m)), the centered log-moment.
    let centered = |q: f64| -> f64 {
        match dist {
            DistributionSpec::Empirical { samples } => {
                let n = samples.len() as f64;
                ln_sum_exp(samples.iter().map(|v| q * (v.abs().ln() - m))) - n.ln()
            }
            _ => dist.ln_abs_moment(q) - q * m,
        }
    };
    let obj = |y: f64| {
        let c = centered(s * y);
        if c == f64::INFINITY || c.is_nan() {
            f64::NEG_INFINITY
        } else {
            s * y * l - c
        }
    };
    let res = maximize_concave(obj, f64::INFINITY, MaxOptions::default());
    Ok(RateResult {
        value: res.value.max(0.0),
        argmax_t: Some(res.argmax),
        regime: Regime::LimitPTo0,
        iterations: res.iterations,
        tolerance_met: res.converged,
    })
}

/// `p → ∞` limits for bounded laws: `Λ⁺ → ∞`, `Λ⁻ → -ln F((1-δ)B)`.
pub fn large_p_limits(dist: &DistributionSpec, delta: f64) -> Result<LargePLimits> {
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta={delta} must lie in (0, 1)"));
    }
    dist.validate()?;
    let b = dist.ess_sup();
    if !b.is_finite() {
        return domain(format!("{dist} has unbounded support"));
    }
    let c = (1.0 - delta) * b;
    Ok(LargePLimits {
        plus: f64::INFINITY,
        minus: -dist.cdf_abs(c).ln(),
        minus_left: -dist.cdf_abs_left(c).ln(),
        bracketed: dist.has_atoms(),
    })
}

fn closed_family(dist: &DistributionSpec) -> Option<Family> {
    match dist {
        DistributionSpec::UniformSymmetric { .. } | DistributionSpec::UniformUnit => Some(Family::UniformCube),
        DistributionSpec::DiffUniform => Some(Family::DiffUniform),
        DistributionSpec::StandardNormal => Some(Family::StandardNormal),
        _ => None,
    }
}

/// `φ(p) = (p²/2) μ_p² / Var|x|^p`.
pub fn phi(dist: &DistributionSpec, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return domain(format!("p={p} must be positive"));
    }
    if let Some(f) = closed_family(dist) {
        return Ok(closed_forms::phi_closed(f, p));
    }
    phi_generic(dist, p)
}

/// `φ(p)` from moments only, without the closed-form shortcuts.
pub fn phi_generic(dist: &DistributionSpec, p: f64) -> Result<f64> {
    let rel_var = (dist.ln_mu_p(2.0 * p)? - 2.0 * dist.ln_mu_p(p)?).exp_m1();
    if !(rel_var > 0.0) {
        return domain(format!("|x|^p is degenerate for {dist}"));
    }
    Ok(0.5 * p * p / rel_var)
}

/// `p → 0` limit of `φ`: `1 / (2 Var ln|x|)` without an atom, `0` with one.
pub fn phi_small_p_limit(dist: &DistributionSpec) -> Result<f64> {
    if dist.atom_at_zero() > 0.0 {
        return Ok(0.0);
    }
    let (_, v) = dist.log_moments()?;
    if !(v > 0.0) {
        return domain(format!("ln|x| is degenerate for {dist}"));
    }
    Ok(0.5 / v)
}

fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp()).collect()
}

/// `C* = inf φ(p)` over `p ∈ (0, min(p0, 100)]` from a log grid refined near
/// the minimizer, together with the `p → 0` limit.
///
/// The range stops at `p0` because the rates themselves are only defined
/// there; for the normal law `φ(p) → 0` as `p → ∞`.
pub fn c_star(dist: &DistributionSpec) -> Result<f64> {
    match closed_family(dist) {
        Some(Family::UniformCube) => return Ok(0.5),
        Some(Family::DiffUniform) => return Ok(0.4),
        _ => {}
    }
    let grid = log_grid(1e-3, dist.p0().min(100.0), 200);
    let vals: Vec<f64> = grid.iter().map(|&p| phi(dist, p)).collect::<Result<_>>()?;
    let (i, _) = vals.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
    let lo = grid[i.saturating_sub(1)].ln();
    let hi = grid[(i + 1).min(grid.len() - 1)].ln();
    let (_, neg) = crate::quadrature::golden_max(&|lp: f64| -phi(dist, lp.exp()).unwrap_or(f64::INFINITY), lo, hi, 100);
    let limit = phi_small_p_limit(dist)?;
    Ok(vals[i].min(-neg).min(limit))
}

/// `f*±(δ) = inf_{p ∈ (0, p0]} Λ±(p, δ)` over a 60-point log grid on
/// `[1e-3, min(p0, 100)]` refined around the minimum, plus both p-limits.
pub fn uniform_rate(dist: &DistributionSpec, delta: f64, sign: Sign) -> Result<UniformRate> {
    if dist.atom_at_zero() > 0.0 {
        return domain("uniform-in-p rate needs a law without an atom at zero");
    }
    if !(delta > 0.0) {
        return domain(format!("delta={delta} must be positive"));
    }
    if sign == Sign::Minus && delta >= 1.0 {
        return Ok(UniformRate { value: f64::INFINITY, argmin_p: None, source: RateSource::Grid, grid: vec![] });
    }
    let p_max = dist.p0().min(100.0);
    let eval = |p: f64| rate(dist, p, delta, sign).map(|r| r.value);
    let grid_p = log_grid(1e-3, p_max, 60);
    let vals: Vec<f64> = grid_p.par_iter().map(|&p| eval(p)).collect::<Result<_>>()?;
    let mut grid: Vec<(f64, f64)> = grid_p.into_iter().zip(vals).collect();
    let best_of = |g: &[(f64, f64)]| g.iter().copied().fold((f64::NAN, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    let (mut best_p, mut best_v) = best_of(&grid);
    if best_p.is_finite() {
        let mut step = (p_max / 1e-3).ln() / 59.0;
        for _ in 0..3 {
            step *= 0.5;
            for cand in [best_p * (-step).exp(), best_p * step.exp()] {
                if cand > 0.0 && cand <= p_max {
                    let v = eval(cand)?;
                    grid.push((cand, v));
                    if v < best_v {
                        best_p = cand;
                        best_v = v;
                    }
                }
            }
        }
    }
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = UniformRate { value: best_v, argmin_p: Some(best_p).filter(|p| p.is_finite()), source: RateSource::Grid, grid };
    let f0 = small_p_rate(dist, delta, sign)?;
    if f0 < out.value {
        out.value = f0;
        out.argmin_p = None;
        out.source = RateSource::SmallPLimit;
    }
    if dist.is_bounded() && sign == Sign::Minus && delta < 1.0 {
        let lim = large_p_limits(dist, delta)?.minus;
        if lim < out.value {
            out.value = lim;
            out.argmin_p = None;
            out.source = RateSource::LargePLimit;
        }
    }
    Ok(out)
}

/// `f*(δ) = min(f*⁺(δ), f*⁻(δ))`.
pub fn uniform_rate_two_sided(dist: &DistributionSpec, delta: f64) -> Result<f64> {
    Ok(uniform_rate(dist, delta, Sign::Plus)?.value.min(uniform_rate(dist, delta, Sign::Minus)?.value))
}

/// Tail bounds `exp(-n Λ⁺)`, `exp(-n Λ⁻)` and the two-sided lower bound.
pub fn chernoff_bounds(rate_plus: f64, rate_minus: f64, n: u64) -> BoundResult {
    let n = n as f64;
    let up = (-n * rate_plus).exp().min(1.0);
    let lo = (-n * rate_minus).exp().min(1.0);
    BoundResult { upper_tail_bound: up, lower_tail_bound: lo, two_sided_lower: (1.0 - up - lo).clamp(0.0, 1.0) }
}

/// `1 - 4 exp(-n f*(δ/2))` and `1 - 4 exp(-n f*(δ/(2+δ)))` from the two
/// precomputed uniform rates.
pub fn contrast_bounds(f_star_half: f64, f_star_rel: f64, n: u64) -> ContrastBounds {
    let n = n as f64;
    ContrastBounds {
        norm_diff_lower: (1.0 - 4.0 * (-n * f_star_half).exp()).clamp(0.0, 1.0),
        relative_contrast_lower: (1.0 - 4.0 * (-n * f_star_rel).exp()).clamp(0.0, 1.0),
    }
}

/// [`contrast_bounds`] with the uniform rates computed for `dist`.
pub fn contrast_bounds_for(dist: &DistributionSpec, delta: f64, n: u64) -> Result<ContrastBounds> {
    let half = uniform_rate_two_sided(dist, 0.5 * delta)?;
    let rel = uniform_rate_two_sided(dist, delta / (2.0 + delta))?;
    Ok(contrast_bounds(half, rel, n))
}

/// `(φ(p) - ε) δ²`: the small-δ lower estimate of `Λ±`, valid only for δ
/// below an uncertified threshold.
pub fn small_delta_rate_estimate(dist: &DistributionSpec, p: f64, delta: f64, eps: f64) -> Result<f64> {
    Ok(((phi(dist, p)? - eps) * delta * delta).max(0.0))
}
