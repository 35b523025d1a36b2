//! Numerically careful `l^p` quasi-norm evaluation.

/// Above this exponent the sum of powers is evaluated after factoring out the
/// largest magnitude.
pub const MAX_FACTOR_P: f64 = 50.0;

/// `ln ‖x‖_p` for `p > 0`; `-inf` for the zero vector.
pub fn ln_lp_norm(x: &[f64], p: f64) -> f64 {
    if p > MAX_FACTOR_P {
        return ln_lp_norm_factored(x, p);
    }
    let s: f64 = x.iter().map(|v| v.abs().powf(p)).sum();
    if s.is_finite() && s > 0.0 && s >= f64::MIN_POSITIVE {
        s.ln() / p
    } else {
        ln_lp_norm_factored(x, p)
    }
}

/// Max-factored evaluation: `ln m + ln(Σ (|x_i|/m)^p) / p`.
pub fn ln_lp_norm_factored(x: &[f64], p: f64) -> f64 {
    let m = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if m == 0.0 {
        return f64::NEG_INFINITY;
    }
    let s: f64 = x.iter().map(|v| (v.abs() / m).powf(p)).sum();
    m.ln() + s.ln() / p
}

/// `‖x‖_p`, possibly `inf` or `0` when the true value is out of range.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    ln_lp_norm(x, p).exp()
}

/// `Σ |x_i|^p` given precomputed `ln|x_i|` values (`-inf` for zeros).
pub fn power_sum_from_logs(logs: &[f64], p: f64) -> f64 {
    logs.iter().map(|&l| (p * l).exp()).sum()
}
