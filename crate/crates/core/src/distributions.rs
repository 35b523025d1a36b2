//! Component laws ν, their moments, moment generating functions of `±|x|^p`,
//! CDFs of `|x|`, assumption checks and sampling.
//!
//! Continuous families are integrated in the log-radius variable `v = ln|x|`,
//! which keeps `|x|^p = e^{pv}` well conditioned for tiny and huge `p`.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{domain, input, Result};
use crate::quadrature::{golden_max, ln_integral_exp, Tolerance};
use crate::rng::{chunk_count, chunk_range, chunk_rng};
use crate::special::{ln_1m_exp, ln_add_exp, ln_gamma, ln_sum_exp, norm_cdf, EULER_GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// One-dimensional component law.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    /// Uniform on `[-b, b]`.
    UniformSymmetric { b: f64 },
    /// Uniform on `[0, 1]`.
    UniformUnit,
    /// `y - z` with `y, z` independent uniform on `[-1, 1]`; `|x|` has density `1 - x/2` on `[0, 2]`.
    DiffUniform,
    StandardNormal,
    /// `0` with probability `a`, `r` otherwise.
    TwoPoint { a: f64, r: f64 },
    /// `xi` with probability `a`, `r` otherwise, `0 < xi < r`.
    ShiftedTwoPoint { a: f64, xi: f64, r: f64 },
    /// `0` with probability `a`, `±r` with probability `(1-a)/2` each.
    ThreePointSymmetric { a: f64, r: f64 },
    /// `0` with probability `a`, a draw from `base` otherwise.
    ZeroInflated { a: f64, base: Box<DistributionSpec> },
    /// Uniform over the listed values.
    Empirical { samples: Arc<[f64]> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub p: f64,
    pub mu_p: f64,
    /// `E[ln|x|]`, absent when the law has an atom at zero.
    pub log_mean: Option<f64>,
    pub log_var: Option<f64>,
    pub ess_sup: f64,
    pub atom_at_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// i.i.d. coordinates with `|x|` not almost surely constant.
    pub a1_holds: bool,
    /// Exponential moment `E[e^{t0 |x|^{p0}}] < ∞`.
    pub a2_holds: bool,
    pub a2_p0: Option<f64>,
    pub a2_t0: Option<f64>,
    /// Finite negative moment `E[|x|^{-y0}] < ∞`.
    pub a3_holds: bool,
    pub a3_y0: Option<f64>,
    /// Atom at zero with finite small moments.
    pub a4_holds: bool,
    pub a4_p1: Option<f64>,
    pub a4_a: Option<f64>,
    pub atom_at_zero: f64,
    pub notes: Vec<String>,
}

fn check_prob(a: f64) -> Result<()> {
    if !(a > 0.0 && a < 1.0) {
        return input(format!("atom probability a={a} must lie strictly inside (0, 1)"));
    }
    Ok(())
}

fn check_pos(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return input(format!("{name}={v} must be positive and finite"));
    }
    Ok(())
}

impl DistributionSpec {
    pub fn uniform_symmetric(b: f64) -> Result<Self> {
        check_pos("b", b)?;
        Ok(DistributionSpec::UniformSymmetric { b })
    }

    pub fn two_point(a: f64, r: f64) -> Result<Self> {
        check_prob(a)?;
        check_pos("r", r)?;
        Ok(DistributionSpec::TwoPoint { a, r })
    }

    pub fn shifted_two_point(a: f64, xi: f64, r: f64) -> Result<Self> {
        let d = DistributionSpec::ShiftedTwoPoint { a, xi, r };
        d.validate()?;
        Ok(d)
    }

    pub fn three_point(a: f64, r: f64) -> Result<Self> {
        check_prob(a)?;
        check_pos("r", r)?;
        Ok(DistributionSpec::ThreePointSymmetric { a, r })
    }

    pub fn zero_inflated(a: f64, base: DistributionSpec) -> Result<Self> {
        check_prob(a)?;
        base.validate()?;
        if base.atom_at_zero() > 0.0 {
            return input("zero-inflated base law must not have its own atom at zero");
        }
        Ok(DistributionSpec::ZeroInflated { a, base: Box::new(base) })
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        let d = DistributionSpec::Empirical { samples: samples.into() };
        d.validate()?;
        Ok(d)
    }

    /// Checks the type invariants; specs built with the constructors always pass.
    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::UniformSymmetric { b } => check_pos("b", *b),
            DistributionSpec::TwoPoint { a, r } | DistributionSpec::ThreePointSymmetric { a, r } => {
                check_prob(*a)?;
                check_pos("r", *r)
            }
            DistributionSpec::ShiftedTwoPoint { a, xi, r } => {
                check_prob(*a)?;
                check_pos("xi", *xi)?;
                check_pos("r", *r)?;
                if xi >= r {
                    return input(format!("xi={xi} must be below r={r}"));
                }
                Ok(())
            }
            DistributionSpec::ZeroInflated { a, base } => {
                check_prob(*a)?;
                base.validate()?;
                if base.atom_at_zero() > 0.0 {
                    return input("zero-inflated base law must not have its own atom at zero");
                }
                Ok(())
            }
            DistributionSpec::Empirical { samples } => {
                if samples.is_empty() {
                    return input("empirical sample is empty");
                }
                if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
                    return input(format!("empirical sample has a non-finite entry at index {i}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `P(x = 0)`.
    pub fn atom_at_zero(&self) -> f64 {
        match self {
            DistributionSpec::TwoPoint { a, .. } | DistributionSpec::ThreePointSymmetric { a, .. } => *a,
            DistributionSpec::ZeroInflated { a, .. } => *a,
            DistributionSpec::Empirical { samples } => {
                samples.iter().filter(|&&v| v == 0.0).count() as f64 / samples.len() as f64
            }
            _ => 0.0,
        }
    }

    /// Whether the law of `|x|` has any atoms.
    pub fn has_atoms(&self) -> bool {
        matches!(
            self,
            DistributionSpec::TwoPoint { .. }
                | DistributionSpec::ShiftedTwoPoint { .. }
                | DistributionSpec::ThreePointSymmetric { .. }
                | DistributionSpec::ZeroInflated { .. }
                | DistributionSpec::Empirical { .. }
        )
    }

    /// Essential supremum `B` of `|x|` (infinite for the normal law).
    pub fn ess_sup(&self) -> f64 {
        match self {
            DistributionSpec::UniformSymmetric { b } => *b,
            DistributionSpec::UniformUnit => 1.0,
            DistributionSpec::DiffUniform => 2.0,
            DistributionSpec::StandardNormal => f64::INFINITY,
            DistributionSpec::TwoPoint { r, .. }
            | DistributionSpec::ShiftedTwoPoint { r, .. }
            | DistributionSpec::ThreePointSymmetric { r, .. } => *r,
            DistributionSpec::ZeroInflated { base, .. } => base.ess_sup(),
            DistributionSpec::Empirical { samples } => samples.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }

    /// Essential infimum of `|x|`.
    pub fn ess_inf(&self) -> f64 {
        match self {
            DistributionSpec::Empirical { samples } => samples.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())),
            DistributionSpec::ShiftedTwoPoint { xi, .. } => *xi,
            _ => 0.0,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.ess_sup().is_finite()
    }

    /// Largest exponent `p0` for which an exponential moment of `|x|^{p0}` exists.
    pub fn p0(&self) -> f64 {
        match self {
            DistributionSpec::StandardNormal => 2.0,
            DistributionSpec::ZeroInflated { base, .. } => base.p0(),
            _ => f64::INFINITY,
        }
    }

    /// `ln E[|x|^q]` for real `q` (may be `+inf`). `q = 0` gives `0`.
    pub fn ln_abs_moment(&self, q: f64) -> f64 {
        if q == 0.0 {
            return 0.0;
        }
        match self {
            DistributionSpec::UniformSymmetric { b } => {
                if q <= -1.0 {
                    f64::INFINITY
                } else {
                    q * b.ln() - q.ln_1p()
                }
            }
            DistributionSpec::UniformUnit => {
                if q <= -1.0 {
                    f64::INFINITY
                } else {
                    -q.ln_1p()
                }
            }
            DistributionSpec::DiffUniform => {
                if q <= -1.0 {
                    f64::INFINITY
                } else {
                    (1.0 + q) * LN_2 - q.ln_1p() - (2.0 + q).ln()
                }
            }
            DistributionSpec::StandardNormal => {
                if q <= -1.0 {
                    f64::INFINITY
                } else {
                    0.5 * q * LN_2 + ln_gamma(0.5 * (q + 1.0)) - 0.5 * PI.ln()
                }
            }
            DistributionSpec::TwoPoint { a, r } | DistributionSpec::ThreePointSymmetric { a, r } => {
                if q < 0.0 {
                    f64::INFINITY
                } else {
                    q * r.ln() + (-a).ln_1p()
                }
            }
            DistributionSpec::ShiftedTwoPoint { a, xi, r } => ln_add_exp(a.ln() + q * xi.ln(), (-a).ln_1p() + q * r.ln()),
            DistributionSpec::ZeroInflated { a, base } => {
                if q < 0.0 {
                    f64::INFINITY
                } else {
                    (-a).ln_1p() + base.ln_abs_moment(q)
                }
            }
            DistributionSpec::Empirical { samples } => {
                let n = samples.len() as f64;
                if q < 0.0 && samples.contains(&0.0) {
                    return f64::INFINITY;
                }
                let logs = samples.iter().filter(|&&v| v != 0.0).map(|v| q * v.abs().ln());
                ln_sum_exp(logs) - n.ln()
            }
        }
    }

    /// `ln μ_p`.
    pub fn ln_mu_p(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return domain(format!("p={p} must be positive"));
        }
        self.validate()?;
        let v = self.ln_abs_moment(p);
        if v.is_nan() || v == f64::INFINITY {
            return input(format!("E|x|^p is not finite at p={p}"));
        }
        Ok(v)
    }

    /// `μ_p = E[|x|^p]`.
    pub fn mu_p(&self, p: f64) -> Result<f64> {
        self.ln_mu_p(p).map(f64::exp)
    }

    /// `E[|x|^{-y}]`, `+inf` when it diverges.
    pub fn neg_moment(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return domain(format!("y={y} must be non-negative"));
        }
        Ok(self.ln_abs_moment(-y).exp())
    }

    /// `(E[ln|x|], Var[ln|x|])`.
    pub fn log_moments(&self) -> Result<(f64, f64)> {
        if self.atom_at_zero() > 0.0 {
            return domain("log moments are undefined for a law with an atom at zero");
        }
        Ok(match self {
            DistributionSpec::UniformSymmetric { b } => (b.ln() - 1.0, 1.0),
            DistributionSpec::UniformUnit => (-1.0, 1.0),
            DistributionSpec::DiffUniform => (LN_2 - 1.5, 1.25),
            DistributionSpec::StandardNormal => (-0.5 * (EULER_GAMMA + LN_2), PI * PI / 8.0),
            DistributionSpec::ShiftedTwoPoint { a, xi, r } => {
                let (lx, lr) = (xi.ln(), r.ln());
                (a * lx + (1.0 - a) * lr, a * (1.0 - a) * (lr - lx) * (lr - lx))
            }
            DistributionSpec::Empirical { samples } => {
                let n = samples.len() as f64;
                let logs: Vec<f64> = samples.iter().map(|v| v.abs().ln()).collect();
                let m = logs.iter().sum::<f64>() / n;
                let var = logs.iter().map(|l| (l - m) * (l - m)).sum::<f64>() / n;
                (m, var)
            }
            _ => unreachable!("atomic laws are rejected above"),
        })
    }

    /// `P(|x| ≤ x)`.
    pub fn cdf_abs(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            DistributionSpec::UniformSymmetric { b } => (x / b).min(1.0),
            DistributionSpec::UniformUnit => x.min(1.0),
            DistributionSpec::DiffUniform => {
                if x >= 2.0 {
                    1.0
                } else {
                    x - 0.25 * x * x
                }
            }
            DistributionSpec::StandardNormal => 2.0 * norm_cdf(x) - 1.0,
            DistributionSpec::TwoPoint { a, r } | DistributionSpec::ThreePointSymmetric { a, r } => {
                if x >= *r {
                    1.0
                } else {
                    *a
                }
            }
            DistributionSpec::ShiftedTwoPoint { a, xi, r } => {
                if x >= *r {
                    1.0
                } else if x >= *xi {
                    *a
                } else {
                    0.0
                }
            }
            DistributionSpec::ZeroInflated { a, base } => a + (1.0 - a) * base.cdf_abs(x),
            DistributionSpec::Empirical { samples } => {
                samples.iter().filter(|v| v.abs() <= x).count() as f64 / samples.len() as f64
            }
        }
    }

    /// `P(|x| < x)`.
    pub fn cdf_abs_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.cdf_abs(x) - self.atom_mass_abs(x)
    }

    /// `P(|x| = x)`.
    pub fn atom_mass_abs(&self, x: f64) -> f64 {
        match self {
            DistributionSpec::TwoPoint { a, r } | DistributionSpec::ThreePointSymmetric { a, r } => {
                if x == 0.0 {
                    *a
                } else if x == *r {
                    1.0 - a
                } else {
                    0.0
                }
            }
            DistributionSpec::ShiftedTwoPoint { a, xi, r } => {
                if x == *xi {
                    *a
                } else if x == *r {
                    1.0 - a
                } else {
                    0.0
                }
            }
            DistributionSpec::ZeroInflated { a, base } => {
                if x == 0.0 {
                    *a
                } else {
                    (1.0 - a) * base.atom_mass_abs(x)
                }
            }
            DistributionSpec::Empirical { samples } => {
                samples.iter().filter(|v| v.abs() == x).count() as f64 / samples.len() as f64
            }
            _ => 0.0,
        }
    }

    /// `ln E[exp(c (|x|^p - z))]` with `z = e^{ln_z}`; `+inf` on divergence.
    pub fn ln_mgf_centered(&self, c: f64, p: f64, ln_z: f64) -> f64 {
        if c == 0.0 {
            return 0.0;
        }
        let z = ln_z.exp();
        let centered = |lx: f64| exp_diff(p * lx, ln_z);
        match self {
            DistributionSpec::TwoPoint { a, r } | DistributionSpec::ThreePointSymmetric { a, r } => {
                ln_add_exp(a.ln() - c * z, (-a).ln_1p() + c * centered(r.ln()))
            }
            DistributionSpec::ShiftedTwoPoint { a, xi, r } => {
                ln_add_exp(a.ln() + c * centered(xi.ln()), (-a).ln_1p() + c * centered(r.ln()))
            }
            DistributionSpec::ZeroInflated { a, base } => {
                ln_add_exp(a.ln() - c * z, (-a).ln_1p() + base.ln_mgf_centered(c, p, ln_z))
            }
            DistributionSpec::Empirical { samples } => {
                let n = samples.len() as f64;
                let terms = samples.iter().map(|&v| if v == 0.0 { -c * z } else { c * centered(v.abs().ln()) });
                ln_sum_exp(terms) - n.ln()
            }
            DistributionSpec::StandardNormal if c > 0.0 && (p > 2.0 || (p == 2.0 && c >= 0.5)) => f64::INFINITY,
            _ => self.ln_mgf_continuous(c, p, ln_z),
        }
    }

    fn ln_mgf_continuous(&self, c: f64, p: f64, ln_z: f64) -> f64 {
        let ub = self.ess_sup().ln();
        let lw: Box<dyn Fn(f64) -> f64> = match self {
            DistributionSpec::UniformSymmetric { b } => {
                let lb = b.ln();
                Box::new(move |v| if v <= lb { v - lb } else { f64::NEG_INFINITY })
            }
            DistributionSpec::UniformUnit => Box::new(|v| if v <= 0.0 { v } else { f64::NEG_INFINITY }),
            DistributionSpec::DiffUniform => Box::new(|v| v + ln_1m_exp(v - LN_2)),
            DistributionSpec::StandardNormal => {
                let k = LN_2 - 0.5 * (2.0 * PI).ln();
                Box::new(move |v| k - 0.5 * (2.0 * v).exp() + v)
            }
            _ => unreachable!(),
        };
        let h = |v: f64| {
            let val = c * exp_diff(p * v, ln_z) + lw(v);
            if val.is_nan() {
                f64::NEG_INFINITY
            } else {
                val
            }
        };
        let peak = match self {
            DistributionSpec::UniformSymmetric { .. } | DistributionSpec::UniformUnit if c > 0.0 => ub,
            DistributionSpec::DiffUniform if c > 0.0 => {
                // Increasing on v ≤ 0; any interior maxima sit in (0, ln 2).
                let k = 512;
                let step = LN_2 / k as f64;
                let (i, _) = (0..k).map(|i| (i, h(i as f64 * step))).fold((0, f64::NEG_INFINITY), |best, (i, y)| {
                    if y > best.1 {
                        (i, y)
                    } else {
                        best
                    }
                });
                let lo = (i as f64 - 1.0).max(0.0) * step;
                let hi = ((i + 1) as f64 * step).min(LN_2);
                golden_max(&h, lo, hi, 200).0
            }
            _ => {
                let guess = if c < 0.0 { (-(-c * p).ln() / p).clamp(-1e6, ub.min(0.0)) } else { 0.0 };
                unimodal_peak(&h, guess, ub)
            }
        };
        let tol = Tolerance { abs: 0.0, rel: 1e-11, max_intervals: 4000 };
        ln_integral_exp(h, f64::NEG_INFINITY, ub, peak, 45.0, tol)
    }

    /// `E[e^{±t|x|^p}]`, `+inf` when divergent.
    pub fn mgf_abs_p(&self, t: f64, p: f64, sign: Sign) -> Result<f64> {
        if !(t >= 0.0) {
            return domain(format!("t={t} must be non-negative"));
        }
        let ln_mu = self.ln_mu_p(p)?;
        if t == 0.0 {
            return Ok(1.0);
        }
        let c = sign.factor() * t;
        Ok((self.ln_mgf_centered(c, p, ln_mu) + c * ln_mu.exp()).exp())
    }

    pub fn moment_report(&self, p: f64) -> Result<MomentReport> {
        let mu_p = self.mu_p(p)?;
        let lm = self.log_moments().ok();
        Ok(MomentReport {
            p,
            mu_p,
            log_mean: lm.map(|x| x.0),
            log_var: lm.map(|x| x.1),
            ess_sup: self.ess_sup(),
            atom_at_zero: self.atom_at_zero(),
        })
    }

    pub fn validate_assumptions(&self) -> AssumptionReport {
        let atom = self.atom_at_zero();
        let mut notes = Vec::new();
        let valid = self.validate();
        if let Err(e) = &valid {
            notes.push(e.to_string());
        }
        let a1 = valid.is_ok()
            && match self {
                DistributionSpec::Empirical { samples } => {
                    let first = samples[0].abs();
                    samples.iter().any(|v| v.abs() != first)
                }
                _ => true,
            };
        let bounded = self.is_bounded();
        let (a2, p0, t0) = if valid.is_err() {
            (false, None, None)
        } else if bounded {
            (true, Some(f64::INFINITY), Some(1.0))
        } else {
            // Only the normal family is unbounded here: E[e^{t|x|^2}] < ∞ for t < 1/2.
            (true, Some(self.p0()), Some(0.25))
        };
        if matches!(self, DistributionSpec::Empirical { .. }) {
            notes.push("empirical sample: bounded-support sense only".into());
        }
        let a3 = valid.is_ok() && atom == 0.0;
        let y0 = if a3 {
            match self {
                DistributionSpec::Empirical { .. } => Some(1.0),
                _ => Some(0.5),
            }
        } else {
            None
        };
        let a4 = valid.is_ok() && atom > 0.0 && atom < 1.0;
        AssumptionReport {
            a1_holds: a1,
            a2_holds: a2,
            a2_p0: p0,
            a2_t0: t0,
            a3_holds: a3,
            a3_y0: y0,
            a4_holds: a4,
            a4_p1: if a4 { p0 } else { None },
            a4_a: if a4 { Some(atom) } else { None },
            atom_at_zero: atom,
            notes,
        }
    }

    /// One draw of `x`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DistributionSpec::UniformSymmetric { b } => b * (2.0 * rng.random::<f64>() - 1.0),
            DistributionSpec::UniformUnit => rng.random::<f64>(),
            DistributionSpec::DiffUniform => 2.0 * (rng.random::<f64>() - rng.random::<f64>()),
            DistributionSpec::StandardNormal => rng.sample(StandardNormal),
            DistributionSpec::TwoPoint { a, r } => {
                if rng.random::<f64>() < *a {
                    0.0
                } else {
                    *r
                }
            }
            DistributionSpec::ThreePointSymmetric { a, r } => {
                let u = rng.random::<f64>();
                if u < *a {
                    0.0
                } else if u < 0.5 * (1.0 + a) {
                    *r
                } else {
                    -r
                }
            }
            DistributionSpec::ShiftedTwoPoint { a, xi, r } => {
                if rng.random::<f64>() < *a {
                    *xi
                } else {
                    *r
                }
            }
            DistributionSpec::ZeroInflated { a, base } => {
                if rng.random::<f64>() < *a {
                    0.0
                } else {
                    base.draw(rng)
                }
            }
            DistributionSpec::Empirical { samples } => samples[rng.random_range(0..samples.len())],
        }
    }

    /// `count` deterministic draws for `seed`, independent of threading.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        if count == 0 {
            return input("sample count must be at least 1");
        }
        let mut out = Vec::with_capacity(count);
        for c in 0..chunk_count(count) {
            let mut rng = chunk_rng(seed, u64::MAX, c as u64);
            for _ in chunk_range(c, count) {
                out.push(self.draw(&mut rng));
            }
        }
        Ok(out)
    }

    /// Short family name.
    pub fn family(&self) -> &'static str {
        match self {
            DistributionSpec::UniformSymmetric { .. } => "uniform",
            DistributionSpec::UniformUnit => "uniformunit",
            DistributionSpec::DiffUniform => "diffuniform",
            DistributionSpec::StandardNormal => "normal",
            DistributionSpec::TwoPoint { .. } | DistributionSpec::ShiftedTwoPoint { .. } => "twopoint",
            DistributionSpec::ThreePointSymmetric { .. } => "threepoint",
            DistributionSpec::ZeroInflated { .. } => "zeroinflated",
            DistributionSpec::Empirical { .. } => "empirical",
        }
    }

    /// Parses the textual form, e.g. `uniform:b=1`, `twopoint:a=0.5,r=1,xi=0.001`,
    /// `zeroinflated:a=0.01,base=uniform:b=1`, `empirical:path=FILE.csv,col=3`.
    ///
    /// For `empirical`, `col` is either a header name or a zero-based index.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (family, rest) = match text.split_once(':') {
            Some((f, r)) => (f.trim().to_ascii_lowercase(), r),
            None => (text.to_ascii_lowercase(), ""),
        };
        // `base=` swallows the remainder so nested specs keep their own commas.
        let (own, base) = match rest.find("base=") {
            Some(i) => (rest[..i].trim_end_matches(','), Some(&rest[i + 5..])),
            None => (rest, None),
        };
        let mut params: Vec<(String, String)> = Vec::new();
        for kv in own.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let Some((k, v)) = kv.split_once('=') else {
                return input(format!("expected key=value in distribution spec, got '{kv}'"));
            };
            params.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let get = |k: &str| params.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        let num = |k: &str| -> Result<f64> {
            let raw = get(k).ok_or_else(|| crate::Error::Input(format!("'{family}' needs parameter '{k}'")))?;
            raw.parse::<f64>().map_err(|_| crate::Error::Input(format!("parameter {k}='{raw}' is not a number")))
        };
        let allow = |keys: &[&str]| -> Result<()> {
            for (k, _) in &params {
                if !keys.contains(&k.as_str()) {
                    return input(format!("unknown parameter '{k}' for '{family}'"));
                }
            }
            Ok(())
        };
        match family.as_str() {
            "uniform" | "uniformsymmetric" => {
                allow(&["b"])?;
                let b = if get("b").is_some() { num("b")? } else { 1.0 };
                Self::uniform_symmetric(b)
            }
            "uniformunit" | "unit" => {
                allow(&[])?;
                Ok(DistributionSpec::UniformUnit)
            }
            "diffuniform" => {
                allow(&[])?;
                Ok(DistributionSpec::DiffUniform)
            }
            "normal" | "standardnormal" => {
                allow(&[])?;
                Ok(DistributionSpec::StandardNormal)
            }
            "twopoint" => {
                allow(&["a", "r", "xi"])?;
                let xi = if get("xi").is_some() { num("xi")? } else { 0.0 };
                if xi == 0.0 {
                    Self::two_point(num("a")?, num("r")?)
                } else {
                    Self::shifted_two_point(num("a")?, xi, num("r")?)
                }
            }
            "threepoint" | "threepointsymmetric" => {
                allow(&["a", "r"])?;
                Self::three_point(num("a")?, num("r")?)
            }
            "zeroinflated" => {
                allow(&["a"])?;
                let Some(base) = base else {
                    return input("zeroinflated needs base=<spec> as its last parameter");
                };
                Self::zero_inflated(num("a")?, Self::parse(base)?)
            }
            "empirical" => {
                allow(&["path", "col"])?;
                let path = get("path").ok_or_else(|| crate::Error::Input("empirical needs path=FILE".into()))?;
                let col = get("col").unwrap_or("0");
                let values = crate::diagnostics::read_column(std::path::Path::new(path), col)?;
                Self::empirical(values)
            }
            other => input(format!("unknown distribution family '{other}'")),
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::UniformSymmetric { b } => write!(f, "uniform:b={b}"),
            DistributionSpec::UniformUnit => f.write_str("uniformunit"),
            DistributionSpec::DiffUniform => f.write_str("diffuniform"),
            DistributionSpec::StandardNormal => f.write_str("normal"),
            DistributionSpec::TwoPoint { a, r } => write!(f, "twopoint:a={a},r={r}"),
            DistributionSpec::ShiftedTwoPoint { a, xi, r } => write!(f, "twopoint:a={a},r={r},xi={xi}"),
            DistributionSpec::ThreePointSymmetric { a, r } => write!(f, "threepoint:a={a},r={r}"),
            DistributionSpec::ZeroInflated { a, base } => write!(f, "zeroinflated:a={a},base={base}"),
            DistributionSpec::Empirical { samples } => write!(f, "empirical:n={}", samples.len()),
        }
    }
}

/// `e^a - e^b` with small relative error, also when both sides are tiny or
/// nearly equal.
fn exp_diff(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d.abs() < 700.0 {
        b.exp() * d.exp_m1()
    } else {
        a.exp() - b.exp()
    }
}

/// Peak of a unimodal `h` on `(-inf, ub]`, searched from `guess`.
fn unimodal_peak<F: Fn(f64) -> f64>(h: &F, guess: f64, ub: f64) -> f64 {
    let x0 = guess.min(ub);
    let f0 = h(x0);
    let d = 1e-6 * (1.0 + x0.abs());
    let up = x0 + d <= ub && h(x0 + d) > f0;
    let dir = if up { 1.0 } else { -1.0 };
    let mut prev = x0;
    let mut cur = x0;
    let mut fcur = f0;
    let mut step = 1e-3 * (1.0 + x0.abs());
    for _ in 0..200 {
        let mut next = cur + dir * step;
        if next > ub {
            next = ub;
        }
        let fnext = h(next);
        if fnext <= fcur || next == cur {
            let (lo, hi) = if dir > 0.0 { (prev, next) } else { (next, prev) };
            return golden_max(h, lo, hi, 300).0;
        }
        prev = cur;
        cur = next;
        fcur = fnext;
        if cur >= ub {
            return ub;
        }
        step *= 2.0;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn families() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::UniformSymmetric { b: 1.0 },
            DistributionSpec::UniformSymmetric { b: 2.5 },
            DistributionSpec::UniformUnit,
            DistributionSpec::DiffUniform,
            DistributionSpec::StandardNormal,
        ]
    }

    #[test]
    fn closed_moment_examples() {
        assert_relative_eq!(DistributionSpec::UniformSymmetric { b: 1.0 }.mu_p(1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(DistributionSpec::DiffUniform.mu_p(1.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(DistributionSpec::two_point(0.25, 1.0).unwrap().mu_p(0.7).unwrap(), 0.75, epsilon = 1e-15);
        assert_relative_eq!(DistributionSpec::StandardNormal.mu_p(2.0).unwrap(), 1.0, epsilon = 1e-13);
        assert_relative_eq!(DistributionSpec::StandardNormal.mu_p(4.0).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn small_p_moment_tends_to_one() {
        for d in families() {
            assert!((d.mu_p(1e-9).unwrap() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn mu_p_matches_quadrature_derivative_of_mgf() {
        // d/dt E[e^{t|x|^p}] at 0 equals μ_p.
        for d in families() {
            for &p in &[0.1, 0.5, 1.0, 2.0, 4.0] {
                if matches!(d, DistributionSpec::StandardNormal) && p > 2.0 {
                    continue;
                }
                let mu = d.mu_p(p).unwrap();
                let h = 1e-5 / mu.max(1e-3);
                let plus = d.mgf_abs_p(h, p, Sign::Plus).unwrap();
                let minus = d.mgf_abs_p(h, p, Sign::Minus).unwrap();
                let deriv = (plus - minus) / (2.0 * h);
                assert!((deriv - mu).abs() <= 1e-4 * mu, "{d} p={p}: {deriv} vs {mu}");
            }
        }
    }

    #[test]
    fn mgf_examples() {
        let tp = DistributionSpec::two_point(0.5, 1.0).unwrap();
        assert_eq!(tp.mgf_abs_p(0.0, 1.0, Sign::Plus).unwrap(), 1.0);
        assert_relative_eq!(tp.mgf_abs_p(1.0, 1.0, Sign::Plus).unwrap(), 0.5 + 0.5 * std::f64::consts::E, max_relative = 1e-14);
        let u = DistributionSpec::UniformUnit;
        assert_relative_eq!(u.mgf_abs_p(1.0, 1.0, Sign::Plus).unwrap(), std::f64::consts::E - 1.0, max_relative = 1e-10);
        // E[e^{-t|x|}] for uniform on [0,1] is (1 - e^{-t})/t.
        for &t in &[0.3f64, 7.0, 1e4] {
            let want = -(-t).exp_m1() / t;
            assert_relative_eq!(u.mgf_abs_p(t, 1.0, Sign::Minus).unwrap(), want, max_relative = 1e-9);
        }
        // E[e^{t x^2}] for the normal law is (1-2t)^{-1/2}.
        let n = DistributionSpec::StandardNormal;
        for &t in &[0.1f64, 0.4, 0.0] {
            let want = (1.0 - 2.0 * t).powf(-0.5);
            assert_relative_eq!(n.mgf_abs_p(t, 2.0, Sign::Plus).unwrap(), want, max_relative = 1e-9);
        }
        assert_eq!(n.mgf_abs_p(0.5, 2.0, Sign::Plus).unwrap(), f64::INFINITY);
        assert_eq!(n.mgf_abs_p(0.1, 2.5, Sign::Plus).unwrap(), f64::INFINITY);
        // E[e^{t|x|}] for |x| with density 1 - x/2 on [0, 2].
        let t: f64 = 0.7;
        let want = ((2.0 * t).exp() - 1.0 - 2.0 * t) / (2.0 * t * t);
        assert_relative_eq!(DistributionSpec::DiffUniform.mgf_abs_p(t, 1.0, Sign::Plus).unwrap(), want, max_relative = 1e-9);
    }

    #[test]
    fn neg_moments() {
        let u = DistributionSpec::UniformUnit;
        assert_relative_eq!(u.neg_moment(0.5).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(u.neg_moment(1.0).unwrap(), f64::INFINITY);
        assert_eq!(DistributionSpec::two_point(0.3, 1.0).unwrap().neg_moment(0.1).unwrap(), f64::INFINITY);
        assert_eq!(u.neg_moment(0.0).unwrap(), 1.0);
    }

    #[test]
    fn log_moment_examples() {
        let (m, v) = DistributionSpec::UniformSymmetric { b: 1.0 }.log_moments().unwrap();
        assert_eq!((m, v), (-1.0, 1.0));
        let (m, v) = DistributionSpec::DiffUniform.log_moments().unwrap();
        assert_relative_eq!(m, -1.5 + LN_2);
        assert_eq!(v, 1.25);
        let (_, v) = DistributionSpec::StandardNormal.log_moments().unwrap();
        assert_relative_eq!(v, PI * PI / 8.0);
        assert!(DistributionSpec::two_point(0.5, 1.0).unwrap().log_moments().is_err());
    }

    #[test]
    fn log_moments_match_derivatives_of_moments() {
        // d/dq ln E|x|^q at 0 is E ln|x|; second derivative is Var ln|x|.
        for d in families() {
            let (m, v) = d.log_moments().unwrap();
            let h = 1e-4;
            let fp = d.ln_abs_moment(h);
            let fm = d.ln_abs_moment(-h);
            assert!(((fp - fm) / (2.0 * h) - m).abs() < 1e-6, "{d}");
            assert!(((fp + fm) / (h * h) - v).abs() < 1e-4, "{d}");
        }
    }

    #[test]
    fn assumption_reports() {
        let r = DistributionSpec::two_point(0.5, 1.0).unwrap().validate_assumptions();
        assert!(r.a1_holds && r.a2_holds && !r.a3_holds && r.a4_holds);
        assert_eq!(r.a2_p0, Some(f64::INFINITY));
        assert_eq!(r.a4_a, Some(0.5));
        let r = DistributionSpec::UniformSymmetric { b: 1.0 }.validate_assumptions();
        assert!(r.a1_holds && r.a2_holds && r.a3_holds && !r.a4_holds);
        let r = DistributionSpec::StandardNormal.validate_assumptions();
        assert_eq!(r.a2_p0, Some(2.0));
        let r = DistributionSpec::empirical(vec![1.0, 1.0, -1.0]).unwrap().validate_assumptions();
        assert!(!r.a1_holds);
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(DistributionSpec::two_point(1.0, 1.0).is_err());
        assert!(DistributionSpec::two_point(0.5, 0.0).is_err());
        assert!(DistributionSpec::empirical(vec![]).is_err());
        assert!(DistributionSpec::empirical(vec![1.0, f64::NAN]).is_err());
        let nested = DistributionSpec::two_point(0.5, 1.0).unwrap();
        assert!(DistributionSpec::zero_inflated(0.1, nested).is_err());
    }

    #[test]
    fn parse_round_trip() {
        for text in ["uniform:b=1", "twopoint:a=0.5,r=1", "diffuniform", "normal", "zeroinflated:a=0.01,base=uniform:b=1", "threepoint:a=0.2,r=3"] {
            let d = DistributionSpec::parse(text).unwrap();
            assert_eq!(d.to_string(), text);
        }
        assert!(DistributionSpec::parse("twopoint:a=0.5").is_err());
        assert!(DistributionSpec::parse("uniform:c=1").is_err());
        assert!(DistributionSpec::parse("cauchy").is_err());
    }

    #[test]
    fn sampling_moments() {
        let tp = DistributionSpec::two_point(0.5, 1.0).unwrap();
        let xs = tp.sample(1_000_000, 11).unwrap();
        let zeros = xs.iter().filter(|&&v| v == 0.0).count() as f64 / 1e6;
        assert!((zeros - 0.5).abs() < 0.002);
        let xs = DistributionSpec::UniformUnit.sample(1_000_000, 11).unwrap();
        let mean = xs.iter().sum::<f64>() / 1e6;
        assert!((mean - 0.5).abs() < 0.001);
        assert_eq!(xs, DistributionSpec::UniformUnit.sample(1_000_000, 11).unwrap());
    }

    #[test]
    fn cdf_of_modulus() {
        let d = DistributionSpec::DiffUniform;
        assert_relative_eq!(d.cdf_abs(1.0), 0.75);
        assert_eq!(d.cdf_abs(3.0), 1.0);
        let tp = DistributionSpec::two_point(0.3, 1.0).unwrap();
        assert_eq!(tp.cdf_abs(0.5), 0.3);
        assert_relative_eq!(tp.cdf_abs_left(1.0), 0.3, epsilon = 1e-15);
        assert_eq!(tp.cdf_abs(1.0), 1.0);
    }
}
