//! Doob h-transform machinery.
//!
//! For a transient diffusion with null killing, scale `s` and speed `m`, an
//! excessive function `h` with representing measure `nu` produces a new
//! diffusion with characteristics
//!
//! ```text
//!   s^h(dy) = h^{-2}(y) s(dy),
//!   m^h(dy) = h^{2}(y)  m(dy),
//!   k^h(dy) = h(x0) h(y) / r_0(x0, y) nu(dy)   (interior part of nu),
//! ```
//!
//! where `r_0` is the Green kernel of the base process. The workhorse case is
//! `h(x) = P^x{T_a < infinity}` for a process attracted to the lower
//! endpoint: `h = s(x)/s(a)` below `a` and `1` above, with a kink at `a`
//! whose representing measure is the point mass at `a`, so the transform
//! kills at `a` at local-time rate `1/s(a) = 1/r_0(a,a)`.
//!
//! Scaling note: the transformed triple is only determined up to the usual
//! `(c s, m/c, k/c)` equivalence, and the killing atom is often quoted in the
//! unnormalized convention `h = r_0(., a)`, where its mass reads `s(a)`
//! instead. We fix `h(x0) = 1` everywhere; with that convention the atom mass
//! `1/s(a)` is the local-time killing rate the Monte Carlo and
//! finite-difference suites verify.

use std::sync::Arc;

use crate::bangbang::{ReferenceMeasure, ResolventOracle};
use crate::diffusion_core::{
    AnchoredScale, Characteristics, DiffusionSpec, KillingMeasure, StateFn,
};
use crate::quadrature::{self, Tol};
use crate::{Error, Result};

/// A strictly positive excessive function with one-sided derivatives,
/// normalized so `h(x0) = 1`.
#[derive(Clone)]
pub struct ExcessiveFn {
    value: StateFn,
    left: StateFn,
    right: StateFn,
    pub x0: f64,
    kinks: Vec<f64>,
}

impl ExcessiveFn {
    /// Wraps raw closures, renormalizing all three by `value(x0)`.
    pub fn new(value: StateFn, left: StateFn, right: StateFn, x0: f64) -> Result<Self> {
        let norm = value(x0);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Normalization(format!(
                "h({x0}) = {norm}; cannot normalize"
            )));
        }
        let scale = 1.0 / norm;
        let v = value.clone();
        let l = left.clone();
        let r = right.clone();
        Ok(ExcessiveFn {
            value: Arc::new(move |x| v(x) * scale),
            left: Arc::new(move |x| l(x) * scale),
            right: Arc::new(move |x| r(x) * scale),
            x0,
            kinks: Vec::new(),
        })
    }

    pub fn with_kinks(mut self, kinks: Vec<f64>) -> Self {
        self.kinks = kinks;
        self
    }

    /// The constant function 1 (trivial transform).
    pub fn one(x0: f64) -> Self {
        ExcessiveFn {
            value: Arc::new(|_| 1.0),
            left: Arc::new(|_| 0.0),
            right: Arc::new(|_| 0.0),
            x0,
            kinks: Vec::new(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    pub fn left_deriv(&self, x: f64) -> f64 {
        (self.left)(x)
    }

    pub fn right_deriv(&self, x: f64) -> f64 {
        (self.right)(x)
    }

    /// Derivative away from kinks; at a kink the right derivative is
    /// returned. Consumers that care about the jump must ask for the
    /// one-sided values explicitly.
    pub fn deriv(&self, x: f64) -> f64 {
        self.right_deriv(x)
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    pub fn is_kink(&self, x: f64) -> bool {
        self.kinks.iter().any(|&k| k == x)
    }
}

impl std::fmt::Debug for ExcessiveFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExcessiveFn")
            .field("x0", &self.x0)
            .field("kinks", &self.kinks)
            .finish_non_exhaustive()
    }
}

/// Representing measure of an excessive function: an interior part plus
/// atoms at the two endpoints. Total mass 1.
#[derive(Clone, Debug)]
pub struct RepresentingMeasure {
    pub interior: KillingMeasure,
    pub atom_lower: f64,
    pub atom_upper: f64,
}

impl RepresentingMeasure {
    /// Point mass at an interior state.
    pub fn point_mass(a: f64) -> Self {
        RepresentingMeasure {
            interior: KillingMeasure::single_atom(a, 1.0),
            atom_lower: 0.0,
            atom_upper: 0.0,
        }
    }

    /// Full mass on the lower endpoint. For a process attracted to the lower
    /// endpoint `phi_0 = 1`, so this represents `h = 1`.
    pub fn at_lower() -> Self {
        RepresentingMeasure {
            interior: KillingMeasure::null(),
            atom_lower: 1.0,
            atom_upper: 0.0,
        }
    }

    /// Full mass on the upper endpoint (`h` proportional to the scale
    /// function itself; a harmonic transform with no killing).
    pub fn at_upper() -> Self {
        RepresentingMeasure {
            interior: KillingMeasure::null(),
            atom_lower: 0.0,
            atom_upper: 1.0,
        }
    }
}

/// The transformed triple `(s^h, m^h, k^h)` together with the data that
/// produced it.
#[derive(Clone)]
pub struct TransformedCharacteristics {
    scale_density: StateFn,
    speed_density: StateFn,
    pub killing: KillingMeasure,
    pub base: Characteristics,
    pub h: ExcessiveFn,
}

impl TransformedCharacteristics {
    pub fn scale_density(&self, y: f64) -> f64 {
        (self.scale_density)(y)
    }

    pub fn speed_density(&self, y: f64) -> f64 {
        (self.speed_density)(y)
    }

    pub fn scale_density_fn(&self) -> StateFn {
        self.scale_density.clone()
    }

    pub fn speed_density_fn(&self) -> StateFn {
        self.speed_density.clone()
    }
}

impl std::fmt::Debug for TransformedCharacteristics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformedCharacteristics")
            .field("killing", &self.killing)
            .finish_non_exhaustive()
    }
}

/// The excessive function `h(x) = P^x{T_a < infinity}` for a diffusion
/// attracted to the lower endpoint: `s(x)/s(a)` below `a`, `1` above, with
/// the scale anchored so `s(l+) = 0`.
pub fn h_hit(chars: &Characteristics, a: f64) -> Result<ExcessiveFn> {
    if !chars.interval.contains(a) {
        return Err(Error::domain(format!(
            "conditioning point {a} not interior"
        )));
    }
    let anchored = AnchoredScale::new(chars)?;
    let sa = anchored.value(a);
    if !(sa.is_finite() && sa > 0.0) {
        return Err(Error::Normalization(format!("s(a) = {sa} at a = {a}")));
    }
    let an_v = anchored.clone();
    let value: StateFn = Arc::new(move |x| if x >= a { 1.0 } else { an_v.value(x) / sa });
    // h' = s'(x)/s(a) strictly below a, 0 strictly above; at a the left
    // derivative is s'(a)/s(a) and the right derivative 0.
    let an_l = anchored.clone();
    let left: StateFn = Arc::new(move |x| if x > a { 0.0 } else { an_l.density(x) / sa });
    let an_r = anchored;
    let right: StateFn = Arc::new(move |x| if x >= a { 0.0 } else { an_r.density(x) / sa });
    Ok(ExcessiveFn::new(value, left, right, a)?.with_kinks(vec![a]))
}

/// Reconstruct `h(x)` from a representing measure via the Green kernel
/// `r_0(x,y) = s(x^y)` of the attracted-to-lower case.
fn reconstruct_h(anchored: &AnchoredScale, nu: &RepresentingMeasure, x0: f64, x: f64) -> f64 {
    let s = |v: f64| anchored.value(v);
    let mut total = 0.0;
    for &(loc, mass) in nu.interior.atoms() {
        total += mass * s(x.min(loc)) / s(x0.min(loc));
    }
    if !nu.interior.is_null() {
        let f = |y: f64| nu.interior.density_at(y) * s(x.min(y)) / s(x0.min(y));
        let lo = x.min(x0) - 30.0;
        let hi = x.max(x0) + 30.0;
        total += quadrature::integrate(f, lo, hi, Tol::new(1e-9, 1e-8)).unwrap_or(0.0);
    }
    // Toward the attracting lower endpoint phi_0 = 1; psi_0 = s.
    total += nu.atom_lower;
    total += nu.atom_upper * s(x) / s(x0);
    total
}

/// Theorem-level transform of the characteristics by `(h, nu)`.
///
/// Validates the pair by reconstructing `h` from `nu` at probe points
/// (tolerance 1e-6) before assembling `(s^h, m^h, k^h)`. Endpoint atoms of
/// `nu` contribute no killing; interior mass at `y` kills at rate
/// `h(x0) h(y) / r_0(x0, y)`.
pub fn transform_characteristics(
    chars: &Characteristics,
    h: &ExcessiveFn,
    nu: &RepresentingMeasure,
) -> Result<TransformedCharacteristics> {
    if !chars.killing.is_null() {
        return Err(Error::domain(
            "transform_characteristics requires a null base killing measure",
        ));
    }
    let anchored = AnchoredScale::new(chars)?;
    let x0 = h.x0;

    // Probe-point validation of the representation.
    let window = 4.0f64;
    let lo = if chars.interval.lower.is_finite() {
        chars.interval.lower + 1e-4
    } else {
        x0 - window
    };
    let hi = if chars.interval.upper.is_finite() {
        chars.interval.upper - 1e-4
    } else {
        x0 + window
    };
    let n_probe = 100;
    for i in 0..n_probe {
        let x = lo + (hi - lo) * (i as f64 + 0.5) / n_probe as f64;
        if !chars.interval.contains(x) {
            continue;
        }
        let rec = reconstruct_h(&anchored, nu, x0, x);
        let dev = (rec - h.value(x)).abs();
        if dev > 1e-6 {
            return Err(Error::InconsistentRepresentation {
                deviation: dev,
                at: x,
            });
        }
    }

    let hv = h.clone();
    let base_sp = chars.scale_density_fn();
    let scale_density: StateFn = Arc::new(move |y| {
        let hy = hv.value(y);
        base_sp(y) / (hy * hy)
    });
    let hv = h.clone();
    let base_mp = chars.speed_density_fn();
    let speed_density: StateFn = Arc::new(move |y| {
        let hy = hv.value(y);
        hy * hy * base_mp(y)
    });

    // k^h from the interior part of nu.
    let killing = if nu.interior.is_null() {
        KillingMeasure::null()
    } else {
        let atoms: Vec<(f64, f64)> = nu
            .interior
            .atoms()
            .iter()
            .map(|&(loc, mass)| {
                let r0 = anchored.value(x0.min(loc));
                (loc, mass * h.value(x0) * h.value(loc) / r0)
            })
            .collect();
        let hv = h.clone();
        let an = anchored.clone();
        let nu_interior = nu.interior.clone();
        let has_density = nu_interior.density_at(x0) != 0.0
            || nu_interior.density_at(x0 + 0.37) != 0.0
            || nu_interior.density_at(x0 - 0.37) != 0.0;
        let density: Option<StateFn> = if has_density {
            Some(Arc::new(move |y| {
                hv.value(x0) * hv.value(y) / an.value(x0.min(y)) * nu_interior.density_at(y)
            }))
        } else {
            None
        };
        KillingMeasure::with_parts(density, atoms)
    };

    Ok(TransformedCharacteristics {
        scale_density,
        speed_density,
        killing,
        base: chars.clone(),
        h: h.clone(),
    })
}

/// Drift of the h-transformed diffusion, `b(x) + sigma^2(x) h'(x)/h(x)`.
/// At a kink of `h` the right derivative is used; request one-sided values
/// from [`ExcessiveFn`] directly when the jump matters.
pub fn transformed_drift(spec: &DiffusionSpec, h: &ExcessiveFn, x: f64) -> f64 {
    let sigma = spec.dispersion(x);
    spec.drift(x) + sigma * sigma * h.deriv(x) / h.value(x)
}

/// Resolvent density of the h-transform expressed against a chosen
/// reference measure:
///
/// * w.r.t. the base speed `m`: `r_lambda(x,y) h(y)/h(x)`;
/// * w.r.t. the transformed speed `m^h`: `r_lambda(x,y) / (h(x) h(y))`
///   (symmetric).
pub fn transformed_resolvent_density(
    oracle: &ResolventOracle,
    h: &ExcessiveFn,
    x: f64,
    y: f64,
    lambda: f64,
    reference: ReferenceMeasure,
) -> f64 {
    let r = oracle.eval(lambda, x, y);
    match reference {
        ReferenceMeasure::SpeedBase => r * h.value(y) / h.value(x),
        ReferenceMeasure::SpeedTransformed => r / (h.value(x) * h.value(y)),
        ReferenceMeasure::Lebesgue => r * oracle.reference_density(y),
    }
}
