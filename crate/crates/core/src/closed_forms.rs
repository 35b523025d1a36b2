//! Closed-form rates and coefficients for the uniform cube, the difference of
//! two uniforms and the standard normal law.

use serde::Serialize;

use crate::distributions::Sign;
use crate::special::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    UniformCube,
    DiffUniform,
    StandardNormal,
}

/// Small-p rate of the uniform cube: `-ln[(1±δ)(1 - ln(1±δ))]`.
pub fn uniform_f(delta: f64, sign: Sign) -> f64 {
    let l = (sign.factor() * delta).ln_1p();
    -(l + (-l).ln_1p())
}

fn diff_h(l: f64) -> f64 {
    25.0 - 12.0 * l + 4.0 * l * l
}

/// Small-p rate of `|y - z|`, `y, z` uniform on `[-1, 1]`, as printed:
/// `5/4 - (3/2) ln(1±δ) - √h/4 - ln(-4 + √h)`.
pub fn diff_uniform_f(delta: f64, sign: Sign) -> f64 {
    let l = (sign.factor() * delta).ln_1p();
    let sh = diff_h(l).sqrt();
    1.25 - 1.5 * l - 0.25 * sh - (sh - 4.0).ln()
}

/// Maximizer `y*` of the small-p objective for the difference law.
pub fn diff_uniform_argmax(delta: f64, sign: Sign) -> f64 {
    let s = sign.factor();
    let l = (s * delta).ln_1p();
    (-5.0 + 6.0 * l + diff_h(l).sqrt()) / (s * 6.0 - s * 4.0 * l)
}

/// Small-p objective for the difference law evaluated at `y`:
/// `±y(-3/2 + ln(1±δ)) - ln 2 + ln(2 ± 3y + y²)`.
pub fn diff_uniform_objective(y: f64, delta: f64, sign: Sign) -> f64 {
    let s = sign.factor();
    let l = (s * delta).ln_1p();
    s * y * (-1.5 + l) - std::f64::consts::LN_2 + (2.0 + s * 3.0 * y + y * y).ln()
}

/// Small-δ coefficient `φ(p) = (p²/2) μ_p² / Var|x|^p`.
pub fn phi_closed(family: Family, p: f64) -> f64 {
    match family {
        Family::UniformCube => 0.5 + p,
        Family::DiffUniform => (2.0 + 4.0 * p) / (5.0 + p),
        Family::StandardNormal => {
            // √π Γ(1/2 + p) / Γ((1+p)/2)², in logs.
            let ln_ratio = 0.5 * std::f64::consts::PI.ln() + ln_gamma(0.5 + p) - 2.0 * ln_gamma(0.5 * (1.0 + p));
            0.5 * p * p / ln_ratio.exp_m1()
        }
    }
}

/// `p → 0` limit of `φ`, equal to `1 / (2 Var[ln|x|])`.
pub fn phi_small_p_limit(family: Family) -> f64 {
    match family {
        Family::UniformCube => 0.5,
        Family::DiffUniform => 0.4,
        Family::StandardNormal => 4.0 / (std::f64::consts::PI * std::f64::consts::PI),
    }
}

/// `[(1+δ)(1 - ln(1+δ))]^n`.
pub fn cube_upper_bound(delta: f64, n: u64) -> f64 {
    (-(n as f64) * uniform_f(delta, Sign::Plus)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_examples() {
        assert_relative_eq!((-uniform_f(0.2, Sign::Plus)).exp(), 1.2 * (1.0 - 1.2f64.ln()), max_relative = 1e-15);
        assert_relative_eq!(uniform_f(0.2, Sign::Plus), 0.018963, epsilon = 2e-6);
        assert_relative_eq!(uniform_f(0.5, Sign::Minus), -(0.5 * (1.0 - 0.5f64.ln())).ln(), max_relative = 1e-14);
        assert_relative_eq!(uniform_f(0.5, Sign::Minus), 0.166558, epsilon = 1e-6);
    }

    #[test]
    fn small_delta_scaling() {
        let d = 1e-4;
        for s in [Sign::Plus, Sign::Minus] {
            assert_relative_eq!(uniform_f(d, s) / (d * d), 0.5, max_relative = 1e-3);
            assert_relative_eq!(diff_uniform_f(d, s) / (d * d), 0.4, max_relative = 1e-3);
        }
        assert!(diff_uniform_f(1e-12, Sign::Plus).abs() < 1e-12);
    }

    #[test]
    fn printed_form_equals_objective_at_printed_maximizer() {
        for i in 1..=18 {
            let d = 0.05 * i as f64;
            for s in [Sign::Plus, Sign::Minus] {
                let y = diff_uniform_argmax(d, s);
                assert!(y > 0.0);
                let at_max = diff_uniform_objective(y, d, s);
                assert_relative_eq!(diff_uniform_f(d, s), at_max, max_relative = 1e-12);
                for eps in [-1e-3, 1e-3] {
                    assert!(diff_uniform_objective(y + eps, d, s) <= at_max + 1e-15);
                }
            }
        }
    }

    #[test]
    fn increasing_in_delta() {
        let grid: Vec<f64> = (1..=90).map(|i| 0.01 * i as f64).collect();
        for s in [Sign::Plus, Sign::Minus] {
            for w in grid.windows(2) {
                assert!(uniform_f(w[1], s) > uniform_f(w[0], s));
                assert!(diff_uniform_f(w[1], s) > diff_uniform_f(w[0], s));
            }
        }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi_closed(Family::UniformCube, 2.0), 2.5);
        for &p in &[0.1, 1.0, 7.0] {
            assert_eq!(phi_closed(Family::UniformCube, p) - p, 0.5);
        }
        assert_relative_eq!(phi_closed(Family::DiffUniform, 1.0), 1.0);
        assert_relative_eq!(phi_closed(Family::DiffUniform, 1e-12), 0.4, max_relative = 1e-10);
        assert_relative_eq!(phi_closed(Family::StandardNormal, 2.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(phi_closed(Family::StandardNormal, 1e-4), 4.0 / (std::f64::consts::PI.powi(2)), max_relative = 1e-3);
        assert!(phi_closed(Family::StandardNormal, 250.0).is_finite());
    }

    #[test]
    fn cube_bound_examples() {
        assert_relative_eq!(cube_upper_bound(0.2, 1), 0.98122, epsilon = 1e-5);
        let b200 = cube_upper_bound(0.2, 200);
        assert!((0.022..=0.023).contains(&b200));
        let b1000 = cube_upper_bound(0.2, 1000);
        assert!((5.2e-9..=6.4e-9).contains(&b1000));
    }
}
