//! Small numerical helpers not covered by `statrs`.

use statrs::function::erf::erfc;
pub use statrs::function::gamma::ln_gamma;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln(1 - e^u)` for `u < 0`, accurate at both ends.
pub fn ln_1m_exp(u: f64) -> f64 {
    if u >= 0.0 {
        f64::NEG_INFINITY
    } else if u > -std::f64::consts::LN_2 {
        (-u.exp_m1()).ln()
    } else {
        (-u.exp()).ln_1p()
    }
}

/// `ln(e^a + e^b)` tolerating infinities.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ w_i e^{x_i}` given `ln w_i` folded into `x_i`.
pub fn ln_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    let s: f64 = xs.into_iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// Log binomial coefficient via log-Gamma.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Bernoulli Kullback-Leibler divergence `KL(Ber(q) || Ber(s))`.
pub fn bernoulli_kl(q: f64, s: f64) -> f64 {
    let term = |u: f64, v: f64| if u == 0.0 { 0.0 } else { u * (u / v).ln() };
    term(q, s) + term(1.0 - q, 1.0 - s)
}
