//! Adaptive quadrature.
//!
//! Everything in the crate that integrates goes through here: adaptive
//! Simpson subdivision on finite intervals, geometric panel truncation for
//! improper endpoints, and a convergence verdict for the boundary-
//! classification integrals, which may be log-divergent and must be detected
//! as such rather than summed forever.

use crate::{Error, Result};

/// Default absolute tolerance.
pub const ABS_TOL: f64 = 1e-10;
/// Default relative tolerance.
pub const REL_TOL: f64 = 1e-9;

const MAX_DEPTH: u32 = 48;
const MAX_PANELS: usize = 220;

/// Tolerance pair for a single integration call.
#[derive(Clone, Copy, Debug)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol {
            abs: ABS_TOL,
            rel: REL_TOL,
        }
    }
}

impl Tol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tol { abs, rel }
    }

    fn bound(&self, scale: f64) -> f64 {
        self.abs.max(self.rel * scale.abs())
    }
}

/// Integrate `f` over the finite interval `[lo, hi]` by adaptive Simpson
/// subdivision.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: Tol) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::domain(format!(
            "integrate requires finite endpoints, got [{lo}, {hi}]"
        )));
    }
    let (a, b, sign) = if lo < hi {
        (lo, hi, 1.0)
    } else {
        (hi, lo, -1.0)
    };
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let (value, err) = adapt(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH);
    if !value.is_finite() || err > tol.bound(value).max(tol.abs) * 4.0 {
        return Err(Error::QuadratureFailure {
            lo: a,
            hi: b,
            estimate: value,
            error: err,
        });
    }
    Ok(sign * value)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: Tol,
    depth: u32,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // |S2 - S1| / 15 is the standard Richardson error estimate for Simpson.
    if depth == 0 || !delta.is_finite() {
        return (left + right + delta / 15.0, delta.abs());
    }
    if delta.abs() <= 15.0 * tol.bound(left + right) {
        return (left + right + delta / 15.0, delta.abs() / 15.0);
    }
    let half = Tol {
        abs: 0.5 * tol.abs,
        rel: tol.rel,
    };
    let (lv, le) = adapt(f, a, m, fa, flm, fm, left, half, depth - 1);
    let (rv, re) = adapt(f, m, b, fm, frm, fb, right, half, depth - 1);
    (lv + rv, le + re)
}

/// Integrate `f` over `[lo, +inf)` by geometrically expanding panels,
/// stopping once a panel contributes less than the tolerance.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, lo: f64, tol: Tol) -> Result<f64> {
    improper_sum(&f, lo, 1.0, tol)
}

/// Integrate `f` over `(-inf, hi]`.
pub fn integrate_from_neg_inf<F: Fn(f64) -> f64>(f: F, hi: f64, tol: Tol) -> Result<f64> {
    improper_sum(&|x| f(-x), -hi, 1.0, tol)
}

fn improper_sum<F: Fn(f64) -> f64>(f: &F, start: f64, first_len: f64, tol: Tol) -> Result<f64> {
    let mut total = 0.0;
    let mut a = start;
    let mut len = first_len;
    let mut quiet = 0;
    for _ in 0..MAX_PANELS {
        let b = a + len;
        let panel = integrate(f, a, b, tol)?;
        total += panel;
        if panel.abs() < tol.bound(total) {
            quiet += 1;
            if quiet >= 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        a = b;
        len *= 2.0;
    }
    Err(Error::QuadratureFailure {
        lo: start,
        hi: a,
        estimate: total,
        error: f64::INFINITY,
    })
}

/// Outcome of an improper integral that is allowed to diverge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Verdict {
    /// The truncated sums converged; the value includes a geometric tail
    /// extrapolation.
    Finite(f64),
    /// The panel increments stopped shrinking (log-divergence or worse) or
    /// the sum overflowed; the partial sum is reported.
    Infinite(f64),
    /// Neither convergence nor divergence was established within the panel
    /// budget.
    Indeterminate(f64),
}

impl Verdict {
    pub fn partial(&self) -> f64 {
        match *self {
            Verdict::Finite(v) | Verdict::Infinite(v) | Verdict::Indeterminate(v) => v,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Verdict::Finite(_))
    }
}

/// Integrate a nonnegative integrand from `z` toward an endpoint that may be
/// singular or infinite, and decide whether the improper integral is finite.
///
/// For a finite `endpoint` the panels approach it geometrically
/// (`|panel k| ~ q^k`); for an infinite endpoint they expand geometrically.
/// Divergence is declared when the panel increments stop decaying, which
/// catches the log-divergent boundary cases exactly where plain summation
/// would stall.
pub fn improper_verdict<F: Fn(f64) -> f64>(f: F, z: f64, endpoint: f64, tol: Tol) -> Verdict {
    debug_assert!(z != endpoint);
    let mut cuts: Vec<f64> = Vec::new();
    if endpoint.is_finite() {
        // z, then points approaching the endpoint: endpoint + (z-endpoint)*q^k.
        let gap = z - endpoint;
        let q = 0.25f64;
        let mut frac = 1.0;
        for _ in 0..MAX_PANELS {
            frac *= q;
            cuts.push(endpoint + gap * frac);
            if (gap * frac).abs() < 1e-300 {
                break;
            }
        }
    } else {
        let dir = endpoint.signum();
        let mut len = 1.0f64;
        let mut x = z;
        for _ in 0..MAX_PANELS {
            x += dir * len;
            cuts.push(x);
            len *= 2.0;
            if x.abs() > 1e200 {
                break;
            }
        }
    }

    let mut total = 0.0f64;
    let mut prev = z;
    let mut prev_inc: Option<f64> = None;
    let mut stall = 0;
    let mut ratios: Vec<f64> = Vec::new();
    for &cut in &cuts {
        let inc = match integrate(&f, prev, cut, tol) {
            Ok(v) => v.abs(),
            // A panel that cannot be integrated at this tolerance is treated
            // as overflow: for the nonnegative integrands used here that
            // means divergence.
            Err(_) => return Verdict::Infinite(total),
        };
        if !inc.is_finite() || total + inc > 1e12 {
            return Verdict::Infinite(total);
        }
        total += inc;
        if inc < tol.bound(total).max(tol.abs) {
            return Verdict::Finite(total);
        }
        if let Some(p) = prev_inc {
            if p > 0.0 {
                let rho = inc / p;
                ratios.push(rho);
                if rho >= 0.98 {
                    stall += 1;
                    if stall >= 6 {
                        return Verdict::Infinite(total);
                    }
                } else {
                    stall = 0;
                }
                // Geometric tail extrapolation once the decay rate settles.
                if ratios.len() >= 4 {
                    let recent = &ratios[ratios.len() - 3..];
                    let rho_max = recent.iter().cloned().fold(0.0f64, f64::max);
                    if rho_max < 0.9 {
                        let tail = inc * rho_max / (1.0 - rho_max);
                        if tail < tol.bound(total).max(tol.abs) {
                            return Verdict::Finite(total + tail);
                        }
                    }
                }
            }
        }
        prev_inc = Some(inc);
        prev = cut;
    }
    Verdict::Indeterminate(total)
}
