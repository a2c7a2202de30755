//! Shared numeric kernels: log-domain accumulation, bracketed root finding,
//! adaptive quadrature, an upper incomplete gamma valid for any real order,
//! and evaluation of the power-log series `sum_t (1 + ln t)^beta / t^s`
//! (head sum + Euler-Maclaurin tail) that normalizes heavy-tailed gap laws.

/// Neumaier-compensated accumulator; keeps long sums accurate to ~1 ulp of
/// the result instead of drifting by sqrt(terms) ulps.
#[derive(Debug, Default, Clone, Copy)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline(always)]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `ln(e^a + e^b)` with `-inf` treated as zero mass on either side.
#[inline(always)]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln sum_i e^{x_i}` by max shift; empty slices and all `-inf` give `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = 0.0;
    for &x in xs {
        if x != f64::NEG_INFINITY {
            acc += (x - max).exp();
        }
    }
    max + acc.ln()
}

/// Bracketed bisection for a continuous `f` with `f(lo)` and `f(hi)` of
/// opposite (non-strict) sign. Runs to floating-point exhaustion of the
/// bracket; returns the midpoint of the final bracket.
///
/// Panics if the initial bracket does not straddle a sign change.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    let fhi = f(hi);
    if fhi == 0.0 {
        return hi;
    }
    assert!(
        flo.signum() != fhi.signum(),
        "bisect: no sign change on [{lo}, {hi}] (f: {flo} .. {fhi})"
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket exhausted at f64 resolution
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48)
}

/// Upper incomplete gamma `Gamma(a, x) = int_x^inf t^(a-1) e^(-t) dt` for any
/// real `a` and `x > 0`.
///
/// Uses the Legendre continued fraction (modified Lentz) when `x` is large
/// enough for it to converge fast, and log-substituted adaptive quadrature on
/// the remaining head otherwise, so small `x` with non-positive `a` (where the
/// value blows up like `x^a / |a|`) is handled without reflection formulas.
pub fn upper_gamma(a: f64, x: f64) -> f64 {
    assert!(x > 0.0, "upper_gamma: x must be positive");
    let switch = a.max(0.0) + 1.5;
    if x >= switch {
        return upper_gamma_cf(a, x);
    }
    // int_x^switch t^(a-1) e^(-t) dt, integrated in u = ln t to tame the
    // power-law spike at small t, plus the continued-fraction tail.
    let integrand = |u: f64| {
        let t = u.exp();
        (a * u - t).exp()
    };
    let head = adaptive_simpson(&integrand, x.ln(), switch.ln(), 1e-14 * upper_gamma_scale(a, x));
    head + upper_gamma_cf(a, switch)
}

/// Rough magnitude of `Gamma(a, x)` used only to set quadrature tolerances.
fn upper_gamma_scale(a: f64, x: f64) -> f64 {
    if a < 0.0 {
        // dominated by the x^a / |a| spike at the lower limit
        (a * x.ln() - x).exp() / a.abs().max(0.5)
    } else {
        (a * x.ln().max(0.0) - x).exp().max(1.0)
    }
}

/// Legendre continued fraction for `Gamma(a, x)`, reliable for `x >= a + 1.5`.
fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    // Gamma(a,x) = e^(-x) x^a / (x + 1 - a - 1(1-a)/(x + 3 - a - 2(2-a)/(...)))
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..400 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (a * x.ln() - x).exp() * h
}

/// Does `sum_t (1 + ln t)^beta t^(-s)` converge?
pub fn powerlog_converges(s: f64, beta: f64) -> bool {
    s > 1.0 || (s == 1.0 && beta < -1.0)
}

/// How many leading terms are summed directly before switching to the
/// Euler-Maclaurin tail. Large enough that the neglected `f'''(N)/720` term
/// is ~1e-20 of the total for every admissible `(s, beta)`.
const POWERLOG_HEAD: u64 = 100_000;

/// `sum_{t=1}^inf (1 + ln t)^beta t^(-s)`, or `None` when divergent.
///
/// Head sum to `POWERLOG_HEAD` plus the tail
/// `int_N^inf f - f(N)/2 - f'(N)/12`, whose integral reduces to an upper
/// incomplete gamma by `u = (s-1)(1 + ln t)`.
pub fn powerlog_sum(s: f64, beta: f64) -> Option<f64> {
    if !powerlog_converges(s, beta) {
        return None;
    }
    let mut acc = Kahan::default();
    for t in 1..=POWERLOG_HEAD {
        acc.add(powerlog_term(t as f64, s, beta));
    }
    Some(acc.total() + powerlog_tail(s, beta, POWERLOG_HEAD as f64))
}

#[inline]
fn powerlog_term(t: f64, s: f64, beta: f64) -> f64 {
    let u = 1.0 + t.ln();
    (beta * u.ln() - s * t.ln()).exp()
}

/// `sum_{t > n0} (1 + ln t)^beta t^(-s)` by Euler-Maclaurin at `n0` (which
/// must be large enough to be in the smooth regime; >= 64 is plenty).
/// Accurate to ~1e-15 relative; callers treating it as a certified bound
/// should allow that slack.
pub fn powerlog_tail(s: f64, beta: f64, n0: f64) -> f64 {
    assert!(powerlog_converges(s, beta));
    let u0 = 1.0 + n0.ln();
    let integral = if s == 1.0 {
        // int_{n0}^inf (1+ln x)^beta / x dx = u0^(beta+1) / (-(beta+1)),
        // convergent here because beta < -1
        -u0.powf(beta + 1.0) / (beta + 1.0)
    } else {
        // u = (s-1)(1 + ln x) turns the integral into an incomplete gamma:
        // e^g g^(-(beta+1)) Gamma(beta+1, g u0) with g = s - 1
        let g = s - 1.0;
        (g - (beta + 1.0) * g.ln()).exp() * upper_gamma(beta + 1.0, g * u0)
    };
    let f_n = powerlog_term(n0, s, beta);
    let fp_n = f_n * (beta / (n0 * u0) - s / n0);
    integral - 0.5 * f_n - fp_n / 12.0
}
