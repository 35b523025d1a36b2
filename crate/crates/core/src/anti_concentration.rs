//! Anti-concentration for laws with an atom at zero: an exact binomial oracle
//! for two-point laws, Berry-Esseen lower bounds on the tails and the search
//! for a `p*` below which the concentration probability stays under a target.

use serde::Serialize;

use crate::distributions::DistributionSpec;
use crate::error::{domain, input, Result};
use crate::monte_carlo::{self, Normalization};
use crate::rng::mix64;
use crate::special::{ln_choose, norm_cdf, CompensatedSum};

/// Largest dimension accepted by the exact oracle.
pub const MAX_EXACT_N: u64 = 1_000_000;
pub const BERRY_ESSEEN_C_MIN: f64 = 0.4097;
pub const BERRY_ESSEEN_C_MAX: f64 = 0.56;
pub const P_SEARCH_LO: f64 = 1e-6;
pub const P_SEARCH_HI: f64 = 2.0;
const BISECTION_STEPS: usize = 40;
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactBinomial,
    MonteCarlo,
}

/// Binomial(n, q) probabilities on the window of `k` carrying non-negligible mass.
#[derive(Debug, Clone)]
pub struct Binomial {
    n: u64,
    lo: u64,
    probs: Vec<f64>,
}

impl Binomial {
    pub fn new(n: u64, q: f64) -> Self {
        if q <= 0.0 || q >= 1.0 || n == 0 {
            let k = if q >= 1.0 { n } else { 0 };
            return Binomial { n, lo: k, probs: vec![1.0] };
        }
        // Log-weights relative to the mode, built with the pmf ratio recurrence
        // and normalized at the end.
        let mode = (((n + 1) as f64) * q).floor().min(n as f64) as u64;
        let odds = (q / (1.0 - q)).ln();
        const FLOOR: f64 = -750.0;
        let mut up = Vec::new();
        let mut w = 0.0;
        let mut k = mode;
        while k < n {
            w += ((n - k) as f64 / (k + 1) as f64).ln() + odds;
            if w < FLOOR {
                break;
            }
            up.push(w);
            k += 1;
        }
        let mut down = Vec::new();
        let mut w = 0.0;
        let mut k = mode;
        while k > 0 {
            w += (k as f64 / (n - k + 1) as f64).ln() - odds;
            if w < FLOOR {
                break;
            }
            down.push(w);
            k -= 1;
        }
        let lo = mode - down.len() as u64;
        let logs: Vec<f64> = down.into_iter().rev().chain(std::iter::once(0.0)).chain(up).collect();
        let mut total = CompensatedSum::default();
        for &l in &logs {
            total.add(l.exp());
        }
        let z = total.value();
        let probs = logs.into_iter().map(|l| l.exp() / z).collect();
        Binomial { n, lo, probs }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        if k < self.lo || k > self.n {
            return 0.0;
        }
        self.probs.get((k - self.lo) as usize).copied().unwrap_or(0.0)
    }

    /// `P(lo ≤ k ≤ hi)`, empty when `lo > hi`.
    pub fn range(&self, lo: u64, hi: u64) -> f64 {
        if lo > hi {
            return 0.0;
        }
        let a = lo.max(self.lo);
        let b = hi.min(self.lo + self.probs.len() as u64 - 1);
        let mut s = CompensatedSum::default();
        if a <= b {
            for &p in &self.probs[(a - self.lo) as usize..=(b - self.lo) as usize] {
                s.add(p);
            }
        }
        s.value()
    }
}

/// Exact probabilities for the two-point law, in terms of the nonzero count `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPointProbabilities {
    /// `P((1-δ)^p C_n ≤ k ≤ (1+δ)^p C_n)` with `C_n = n(1-a)`.
    pub inside: f64,
    /// `P(k > (1+δ)^p C_n)`.
    pub above: f64,
    /// `P(k < (1-δ)^p C_n)`.
    pub below: f64,
    /// `P(k ≥ (1+δ)^p C_n)`: the event `‖x‖_p ≥ (1+δ)(nμ_p)^{1/p}`.
    pub upper_tail: f64,
    /// `P(k ≤ (1-δ)^p C_n)`.
    pub lower_tail: f64,
}

fn check_two_point(a: f64, p: f64, delta: f64, n: u64) -> Result<()> {
    if !(a > 0.0 && a < 1.0) {
        return domain(format!("a={a} must lie in (0, 1)"));
    }
    if !(p > 0.0) {
        return domain(format!("p={p} must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta={delta} must lie in (0, 1)"));
    }
    if n == 0 || n > MAX_EXACT_N {
        return domain(format!("n={n} must lie in [1, {MAX_EXACT_N}]"));
    }
    Ok(())
}

/// Interval endpoints for `k`, i.e. `(1∓δ)^p n(1-a)`. `r` cancels exactly.
fn k_bounds(a: f64, p: f64, delta: f64, n: u64) -> (f64, f64) {
    let c = n as f64 * (1.0 - a);
    (c * (p * (-delta).ln_1p()).exp(), c * (p * delta.ln_1p()).exp())
}

pub fn two_point_probabilities(a: f64, p: f64, delta: f64, n: u64) -> Result<TwoPointProbabilities> {
    check_two_point(a, p, delta, n)?;
    let bin = Binomial::new(n, 1.0 - a);
    let (lo, hi) = k_bounds(a, p, delta, n);
    let k_lo = lo.ceil() as u64;
    let k_hi = (hi.floor() as u64).min(n);
    let inside = bin.range(k_lo, k_hi);
    let above = if k_hi >= n { 0.0 } else { bin.range(k_hi + 1, n) };
    let below = if k_lo == 0 { 0.0 } else { bin.range(0, k_lo - 1) };
    let upper_tail = bin.range(hi.ceil() as u64, n);
    let lower_tail = bin.range(0, lo.floor() as u64);
    Ok(TwoPointProbabilities { inside, above, below, upper_tail, lower_tail })
}

/// Exact `P(1-δ ≤ ‖x‖_p/(nμ_p)^{1/p} ≤ 1+δ)` for the law with `P(x=0)=a`,
/// `|x| = r` otherwise. Interval endpoints are included.
pub fn exact_two_point_concentration(a: f64, r: f64, p: f64, delta: f64, n: u64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return domain(format!("r={r} must be positive"));
    }
    Ok(two_point_probabilities(a, p, delta, n)?.inside)
}

/// `P(k = n(1-a))`, zero when `n(1-a)` is not an integer.
pub fn binomial_mode_prob(a: f64, n: u64) -> f64 {
    let c = n as f64 * (1.0 - a);
    let k = c.round();
    if (c - k).abs() > 1e-9 * c.max(1.0) {
        return 0.0;
    }
    let k = k as u64;
    if n <= MAX_EXACT_N {
        return Binomial::new(n, 1.0 - a).pmf(k);
    }
    (ln_choose(n, k) + k as f64 * (1.0 - a).ln() + (n - k) as f64 * a.ln()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerryEsseenBounds {
    pub sigma: f64,
    pub rho: f64,
    pub c_const: f64,
    /// Lower bound on `P(‖x‖_p ≥ (1+δ)(nμ_p)^{1/p})`.
    pub upper_tail_lower_bound: f64,
    /// Lower bound on `P(‖x‖_p ≤ (1-δ)(nμ_p)^{1/p})`.
    pub lower_tail_lower_bound: f64,
    pub upper_vacuous: bool,
    pub lower_vacuous: bool,
}

pub fn sigma_rho(a: f64) -> (f64, f64) {
    let q = 1.0 - a;
    ((a * q).sqrt(), a * q * (1.0 - 2.0 * q + 2.0 * q * q))
}

pub fn berry_esseen_bounds(a: f64, p: f64, delta: f64, n: u64, c_const: f64) -> Result<BerryEsseenBounds> {
    if !(BERRY_ESSEEN_C_MIN..=BERRY_ESSEEN_C_MAX).contains(&c_const) {
        return domain(format!("Berry-Esseen constant {c_const} outside [{BERRY_ESSEEN_C_MIN}, {BERRY_ESSEEN_C_MAX}]"));
    }
    if !(a > 0.0 && a < 1.0) || !(p > 0.0) || !(delta > 0.0 && delta < 1.0) || n == 0 {
        return domain(format!("invalid arguments a={a}, p={p}, delta={delta}, n={n}"));
    }
    let (sigma, rho) = sigma_rho(a);
    let sn = (n as f64).sqrt();
    let err = c_const * rho / (sigma.powi(3) * sn);
    let u_plus = sn / sigma * (p * delta.ln_1p()).exp_m1() * (1.0 - a);
    let u_minus = sn / sigma * (p * (-delta).ln_1p()).exp_m1() * (1.0 - a);
    let upper = norm_cdf(-u_plus) - err;
    let lower = norm_cdf(u_minus) - err;
    Ok(BerryEsseenBounds {
        sigma,
        rho,
        c_const,
        upper_tail_lower_bound: upper,
        lower_tail_lower_bound: lower,
        upper_vacuous: upper <= 0.0,
        lower_vacuous: lower <= 0.0,
    })
}

/// Largest `p` with `√n/σ ((1+δ)^p - 1)(1-a) ≤ ε` and
/// `√n/σ ((1-δ)^p - 1)(1-a) ≥ -ε`.
pub fn p_star_for_epsilon(a: f64, delta: f64, epsilon: f64, n: u64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) || !(delta > 0.0 && delta < 1.0) || !(epsilon > 0.0) || n == 0 {
        return domain(format!("invalid arguments a={a}, delta={delta}, epsilon={epsilon}, n={n}"));
    }
    let (sigma, _) = sigma_rho(a);
    let e = epsilon * sigma / ((1.0 - a) * (n as f64).sqrt());
    let plus = e.ln_1p() / delta.ln_1p();
    let minus = if e >= 1.0 { f64::INFINITY } else { (-e).ln_1p() / (-delta).ln_1p() };
    Ok(plus.min(minus))
}

/// `16 C² ρ² / (σ⁶ Δ²)`.
pub fn conservative_n(a: f64, target: f64, c_const: f64) -> f64 {
    let (sigma, rho) = sigma_rho(a);
    16.0 * c_const * c_const * rho * rho / (sigma.powi(6) * target * target)
}

/// Largest `n` with `n(1-a)` an integer and `P(k = n(1-a)) ≥ Δ/2`, so the mode
/// mass stays below `Δ/2` for every larger dimension. `Some(0)` when no
/// dimension up to `10⁶` puts mass on the mode; `None` if the search cap is hit.
pub fn empirical_n(a: f64, target: f64) -> Option<u64> {
    let q = 1.0 - a;
    let period = (1..=1_000_000u64).find(|&m| {
        let c = m as f64 * q;
        (c - c.round()).abs() <= 1e-9 * c.max(1.0)
    });
    let Some(period) = period else {
        return Some(0);
    };
    let mut last = 0;
    for j in 1..=10_000_000u64 {
        let n = j * period;
        if binomial_mode_prob(a, n) < 0.5 * target {
            return Some(last);
        }
        last = n;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntiConcReport {
    pub n: u64,
    pub delta: f64,
    pub target_delta: f64,
    pub p_star: Option<f64>,
    /// Concentration probability at `p_star`, or at the smallest tested `p`
    /// when `p_star` is absent. A Monte Carlo estimate for that method.
    pub exact_prob_at_p_star: f64,
    pub binomial_mode_prob: f64,
    pub method: Method,
    /// Wilson half-width of the Monte Carlo estimate.
    pub mc_ci_halfwidth: Option<f64>,
    pub mc_samples: Option<usize>,
    pub seed: Option<u64>,
    pub conservative_n: f64,
    pub empirical_n: Option<u64>,
    pub evaluations: usize,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PStarOptions {
    pub method: Option<Method>,
    pub mc_samples: usize,
    pub seed: u64,
    pub c_const: f64,
}

impl Default for PStarOptions {
    fn default() -> Self {
        PStarOptions { method: None, mc_samples: DEFAULT_MC_SAMPLES, seed: 0, c_const: BERRY_ESSEEN_C_MAX }
    }
}

/// Searches `(10⁻⁶, 2]` for the largest `p` whose concentration probability is
/// at most `target`.
pub fn find_p_star(dist: &DistributionSpec, n: u64, delta: f64, target: f64, opts: PStarOptions) -> Result<AntiConcReport> {
    dist.validate()?;
    let a = dist.atom_at_zero();
    if !(a > 0.0 && a < 1.0) {
        return domain(format!("{dist} has no atom at zero; the anti-concentration search needs one"));
    }
    if !dist.validate_assumptions().a4_holds {
        return domain(format!("{dist} fails the small-moment assumption for atomic laws"));
    }
    if !(delta > 0.0 && delta < 1.0) || !(target > 0.0 && target < 1.0) || n == 0 {
        return domain(format!("invalid arguments n={n}, delta={delta}, Delta={target}"));
    }
    let exact_ok = matches!(dist, DistributionSpec::TwoPoint { .. } | DistributionSpec::ThreePointSymmetric { .. });
    let method = match opts.method {
        Some(Method::ExactBinomial) if !exact_ok => {
            return input(format!("the exact path needs a two-point or symmetric three-point law, got {dist}"));
        }
        Some(m) => m,
        None if exact_ok && n <= MAX_EXACT_N => Method::ExactBinomial,
        None => Method::MonteCarlo,
    };
    if opts.mc_samples < 100 && method == Method::MonteCarlo {
        return input("Monte Carlo search needs at least 100 samples");
    }
    let p_hi = P_SEARCH_HI.min(dist.p0());
    // Common random numbers: every p reuses the same vectors.
    let seed = mix64(opts.seed ^ mix64(n ^ mix64(delta.to_bits() ^ mix64(target.to_bits()))));
    let eval = |p: f64| -> Result<(f64, Option<f64>)> {
        match method {
            Method::ExactBinomial => Ok((two_point_probabilities(a, p, delta, n)?.inside, None)),
            Method::MonteCarlo => {
                let f = monte_carlo::concentration_frequency(dist, n as usize, p, delta, opts.mc_samples, seed, Normalization::AnalyticMu)?;
                Ok((f.freq, Some(f.ci_halfwidth)))
            }
        }
    };
    let mode = binomial_mode_prob(a, n);
    let mut evaluations = 0;
    let (p_lo_prob, ci_lo) = eval(P_SEARCH_LO)?;
    evaluations += 1;
    let mut best: Option<(f64, f64, Option<f64>)> = None;
    if p_lo_prob <= target {
        best = Some((P_SEARCH_LO, p_lo_prob, ci_lo));
        let (hi_prob, hi_ci) = eval(p_hi)?;
        evaluations += 1;
        if hi_prob <= target {
            best = Some((p_hi, hi_prob, hi_ci));
        } else {
            let (mut lo, mut hi) = (P_SEARCH_LO, p_hi);
            for _ in 0..BISECTION_STEPS {
                let mid = (lo * hi).sqrt();
                let (prob, ci) = eval(mid)?;
                evaluations += 1;
                if prob <= target {
                    lo = mid;
                    if best.is_none_or(|b| mid > b.0) {
                        best = Some((mid, prob, ci));
                    }
                } else {
                    hi = mid;
                }
            }
        }
    }
    let emp_n = empirical_n(a, target);
    let cons_n = conservative_n(a, target, opts.c_const);
    let diagnostic = match best {
        Some(_) => None,
        None => Some(format!(
            "no p in [{P_SEARCH_LO}, {p_hi}] reaches probability {target}: at p={P_SEARCH_LO} it is {p_lo_prob:.6} \
             (mode mass P(k=n(1-a))={mode:.6}); n={n} is likely below the dimension threshold \
             (empirical lattice N={}, conservative N={cons_n:.1})",
            emp_n.map_or("unknown".to_string(), |v| v.to_string())
        )),
    };
    let (p_star, prob, ci) = match best {
        Some((p, prob, ci)) => (Some(p), prob, ci),
        None => (None, p_lo_prob, ci_lo),
    };
    let mc = method == Method::MonteCarlo;
    Ok(AntiConcReport {
        n,
        delta,
        target_delta: target,
        p_star,
        exact_prob_at_p_star: prob,
        binomial_mode_prob: mode,
        method,
        mc_ci_halfwidth: ci,
        mc_samples: mc.then_some(opts.mc_samples),
        seed: mc.then_some(seed),
        conservative_n: cons_n,
        empirical_n: emp_n,
        evaluations,
        diagnostic,
    })
}
