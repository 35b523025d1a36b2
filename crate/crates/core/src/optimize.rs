//! Bracketing plus golden-section maximization of concave functions on `[0, ∞)`.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxResult {
    pub argmax: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The bracket kept growing until the doubling cap; the supremum may be
    /// approached only as the argument tends to infinity.
    pub unbounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxOptions {
    pub rel_tol_x: f64,
    pub max_iter: usize,
    pub max_doublings: usize,
}

impl Default for MaxOptions {
    fn default() -> Self {
        MaxOptions { rel_tol_x: 1e-8, max_iter: 300, max_doublings: 200 }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes a concave `f` over `[0, upper)` where `upper` may be infinite.
///
/// `f(0)` must be finite. Values of `-inf` are allowed and mark points outside
/// the effective domain. The bracket is found by doubling from `x = 1`.
pub fn maximize_concave<F: Fn(f64) -> f64>(f: F, upper: f64, opts: MaxOptions) -> MaxResult {
    let f0 = f(0.0);
    let mut iterations = 0;
    let mut lo = 0.0;
    let mut prev = (0.0, f0);
    let mut x = if upper.is_finite() { 1f64.min(0.5 * upper) } else { 1.0 };
    let hi;
    let mut unbounded = false;
    loop {
        let fx = f(x);
        iterations += 1;
        if !(fx > prev.1) {
            hi = x;
            break;
        }
        lo = prev.0;
        prev = (x, fx);
        if iterations >= opts.max_doublings {
            unbounded = true;
            hi = x;
            break;
        }
        let next = 2.0 * x;
        x = if upper.is_finite() && next >= upper { 0.5 * (x + upper) } else { next };
        if upper.is_finite() && upper - x <= opts.rel_tol_x * upper {
            hi = x;
            break;
        }
    }
    if unbounded {
        return MaxResult { argmax: prev.0, value: prev.1, iterations, converged: false, unbounded };
    }

    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut converged = false;
    for _ in 0..opts.max_iter {
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        let mid = 0.5 * (a + b);
        let x_ok = b - a <= opts.rel_tol_x * mid.abs().max(f64::MIN_POSITIVE);
        if x_ok || b - a == 0.0 {
            converged = true;
            break;
        }
    }
    let (argmax, value) = [(a, None), (c, Some(fc)), (d, Some(fd)), (b, None)]
        .into_iter()
        .map(|(x, v)| (x, v.unwrap_or_else(|| if x == 0.0 { f0 } else { f(x) })))
        .filter(|(_, v)| !v.is_nan())
        .fold((0.0, f0), |best, cand| if cand.1 > best.1 { cand } else { best });
    MaxResult { argmax, value, iterations, converged, unbounded: false }
}
