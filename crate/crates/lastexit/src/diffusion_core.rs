//! Regular one-dimensional diffusions through their characteristics.
//!
//! A regular diffusion on an open interval `I = (l, r)` with null killing is
//! determined by a scale function `s` and a speed measure `m`. From a drift
//! `b` and dispersion `sigma > 0` these are
//!
//! ```text
//!   s'(x) = exp(-B(x)),   m'(x) = 2 sigma^{-2}(x) exp(B(x)),
//!   B(x)  = int_{x0}^{x} 2 b(y) / sigma^2(y) dy,
//! ```
//!
//! and everything else here - hitting probabilities, the two-barrier Green
//! function, mean exit times, boundary classification, and the Green kernel
//! `r_0(x,y) = s(x ^ y)` for processes attracted to the lower endpoint - is a
//! functional of `(s, m)`.

use std::sync::Arc;

use crate::quadrature::{self, Tol, Verdict};
use crate::{Error, Result};

/// Shared state-space function.
pub type StateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Open interval `(lower, upper)`; endpoints may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::domain(format!(
                "interval requires lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Interval { lower, upper })
    }

    /// The whole real line.
    pub fn real_line() -> Self {
        Interval {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    /// `(0, +inf)`.
    pub fn positive_half_line() -> Self {
        Interval {
            lower: 0.0,
            upper: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    pub fn endpoint(&self, which: Endpoint) -> f64 {
        match which {
            Endpoint::Lower => self.lower,
            Endpoint::Upper => self.upper,
        }
    }
}

/// One of the two boundary points of the state interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Lower,
    Upper,
}

/// Drift/dispersion description of a diffusion, `dX = b(X) dt + sigma(X) dW`.
#[derive(Clone)]
pub struct DiffusionSpec {
    pub interval: Interval,
    drift: StateFn,
    dispersion: StateFn,
}

impl DiffusionSpec {
    pub fn new(interval: Interval, drift: StateFn, dispersion: StateFn) -> Self {
        DiffusionSpec {
            interval,
            drift,
            dispersion,
        }
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn dispersion(&self, x: f64) -> f64 {
        (self.dispersion)(x)
    }
}

impl std::fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("interval", &self.interval)
            .finish_non_exhaustive()
    }
}

/// Killing measure: an absolutely continuous part plus point atoms.
#[derive(Clone, Default)]
pub struct KillingMeasure {
    density: Option<StateFn>,
    atoms: Vec<(f64, f64)>,
}

impl KillingMeasure {
    pub fn null() -> Self {
        KillingMeasure::default()
    }

    pub fn from_density(density: StateFn) -> Self {
        KillingMeasure {
            density: Some(density),
            atoms: Vec::new(),
        }
    }

    pub fn single_atom(location: f64, mass: f64) -> Self {
        KillingMeasure {
            density: None,
            atoms: vec![(location, mass)],
        }
    }

    pub fn with_parts(density: Option<StateFn>, atoms: Vec<(f64, f64)>) -> Self {
        KillingMeasure { density, atoms }
    }

    pub fn is_null(&self) -> bool {
        self.density.is_none() && self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn density_at(&self, x: f64) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d(x))
    }

    /// Mass of the open interval `(lo, hi)`.
    pub fn mass(&self, lo: f64, hi: f64) -> Result<f64> {
        let mut total: f64 = self
            .atoms
            .iter()
            .filter(|(loc, _)| *loc > lo && *loc < hi)
            .map(|(_, m)| m)
            .sum();
        if let Some(d) = &self.density {
            total += quadrature::integrate(|x| d(x), lo, hi, Tol::default())?;
        }
        Ok(total)
    }
}

impl std::fmt::Debug for KillingMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KillingMeasure")
            .field("has_density", &self.density.is_some())
            .field("atoms", &self.atoms)
            .finish()
    }
}

/// Boundary taxonomy. Regular means both the exit and entrance integral
/// tests are finite; natural means neither is, with the attractive subcase
/// when the scale function stays bounded toward the endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryClass {
    Exit,
    Entrance,
    Regular,
    NaturalAttractive,
    NaturalNonattractive,
}

/// The `(s, m, k)` triple of a diffusion. The scale function is stored
/// anchored at `anchor` (`s(anchor) = 0`); re-anchoring so that `s(l+) = 0`
/// is done by [`AnchoredScale`].
#[derive(Clone)]
pub struct Characteristics {
    pub interval: Interval,
    scale: StateFn,
    scale_density: StateFn,
    speed_density: StateFn,
    pub killing: KillingMeasure,
    pub anchor: f64,
}

impl Characteristics {
    /// Build from closed-form scale/speed expressions. `scale` must satisfy
    /// `scale(anchor) = 0`.
    pub fn from_closed_form(
        interval: Interval,
        scale: StateFn,
        scale_density: StateFn,
        speed_density: StateFn,
        anchor: f64,
    ) -> Self {
        debug_assert!(scale(anchor).abs() < 1e-12);
        Characteristics {
            interval,
            scale,
            scale_density,
            speed_density,
            killing: KillingMeasure::null(),
            anchor,
        }
    }

    /// Build from a drift/dispersion spec by quadrature. Evaluability is
    /// probed at construction; later evaluations of the stored closures
    /// return NaN if their internal quadrature degenerates, which downstream
    /// operations surface as errors.
    pub fn from_drift(spec: &DiffusionSpec, x0: f64) -> Result<Self> {
        if !spec.interval.contains(x0) {
            return Err(Error::domain(format!(
                "anchor {x0} outside interval ({}, {})",
                spec.interval.lower, spec.interval.upper
            )));
        }
        let tol = Tol::new(1e-12, 1e-10);
        let b_exponent = {
            let spec = spec.clone();
            move |x: f64| -> f64 {
                let f = |y: f64| {
                    let s = spec.dispersion(y);
                    2.0 * spec.drift(y) / (s * s)
                };
                quadrature::integrate(f, x0, x, tol).unwrap_or(f64::NAN)
            }
        };
        let scale_density: StateFn = {
            let be = b_exponent.clone();
            Arc::new(move |x| (-be(x)).exp())
        };
        let speed_density: StateFn = {
            let be = b_exponent;
            let spec = spec.clone();
            Arc::new(move |x| {
                let s = spec.dispersion(x);
                2.0 / (s * s) * be(x).exp()
            })
        };
        let scale: StateFn = {
            let sd = scale_density.clone();
            Arc::new(move |x| {
                quadrature::integrate(|y| sd(y), x0, x, Tol::new(1e-11, 1e-9)).unwrap_or(f64::NAN)
            })
        };
        let chars = Characteristics {
            interval: spec.interval,
            scale,
            scale_density,
            speed_density,
            killing: KillingMeasure::null(),
            anchor: x0,
        };
        chars.probe()?;
        Ok(chars)
    }

    fn probe(&self) -> Result<()> {
        for &x in &self.probe_points() {
            let s = self.scale(x);
            let sp = self.scale_density(x);
            let mp = self.speed_density(x);
            if !(s.is_finite() && sp.is_finite() && mp.is_finite() && sp > 0.0 && mp > 0.0) {
                return Err(Error::QuadratureFailure {
                    lo: self.anchor.min(x),
                    hi: self.anchor.max(x),
                    estimate: s,
                    error: f64::NAN,
                });
            }
        }
        Ok(())
    }

    fn probe_points(&self) -> Vec<f64> {
        let mut pts = vec![self.anchor];
        let up = if self.interval.upper.is_finite() {
            self.interval.upper
        } else {
            self.anchor + 4.0
        };
        let lo = if self.interval.lower.is_finite() {
            self.interval.lower
        } else {
            self.anchor - 4.0
        };
        for t in [0.25, 0.6] {
            pts.push(self.anchor + t * (up - self.anchor));
            pts.push(self.anchor + t * (lo - self.anchor));
        }
        pts
    }

    pub fn scale(&self, x: f64) -> f64 {
        (self.scale)(x)
    }

    pub fn scale_density(&self, x: f64) -> f64 {
        (self.scale_density)(x)
    }

    pub fn speed_density(&self, x: f64) -> f64 {
        (self.speed_density)(x)
    }

    pub fn scale_fn(&self) -> StateFn {
        self.scale.clone()
    }

    pub fn scale_density_fn(&self) -> StateFn {
        self.scale_density.clone()
    }

    pub fn speed_density_fn(&self) -> StateFn {
        self.speed_density.clone()
    }

    /// Speed-measure mass of `(lo, hi)` by quadrature.
    pub fn speed_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        quadrature::integrate(|y| self.speed_density(y), lo, hi, Tol::default())
    }

    fn require_null_killing(&self, op: &str) -> Result<()> {
        if self.killing.is_null() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{op} requires a null killing measure on the base process"
            )))
        }
    }
}

impl std::fmt::Debug for Characteristics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Characteristics")
            .field("interval", &self.interval)
            .field("anchor", &self.anchor)
            .field("killing", &self.killing)
            .finish_non_exhaustive()
    }
}

/// Scale part of the characteristics of `spec`, anchored at `x0`.
pub fn scale_from_drift(spec: &DiffusionSpec, x0: f64) -> Result<Characteristics> {
    Characteristics::from_drift(spec, x0)
}

/// Speed part of the characteristics of `spec`; same object as
/// [`scale_from_drift`], kept as a separate entry point because the two
/// halves are used independently.
pub fn speed_from_drift(spec: &DiffusionSpec, x0: f64) -> Result<Characteristics> {
    Characteristics::from_drift(spec, x0)
}

/// Two-barrier hitting probabilities from an interior starting point.
#[derive(Clone, Copy, Debug)]
pub struct HittingProbabilities {
    /// `P^x{T_a < T_b}` (reach the lower barrier first).
    pub lower: f64,
    /// `P^x{T_b < T_a}`.
    pub upper: f64,
}

/// `P^x{T_a < T_b}` and its complement for `a <= x <= b`, null killing.
pub fn hitting_prob(
    chars: &Characteristics,
    a: f64,
    b: f64,
    x: f64,
) -> Result<HittingProbabilities> {
    chars.require_null_killing("hitting_prob")?;
    if !(a < b) {
        return Err(Error::domain(format!("need a < b, got a={a}, b={b}")));
    }
    if x < a || x > b {
        return Err(Error::domain(format!("x={x} outside [{a}, {b}]")));
    }
    // Closed boundary values for the degenerate calls.
    if x == a {
        return Ok(HittingProbabilities {
            lower: 1.0,
            upper: 0.0,
        });
    }
    if x == b {
        return Ok(HittingProbabilities {
            lower: 0.0,
            upper: 1.0,
        });
    }
    let (sa, sb, sx) = (chars.scale(a), chars.scale(b), chars.scale(x));
    if !(sa.is_finite() && sb.is_finite() && sx.is_finite()) {
        return Err(Error::QuadratureFailure {
            lo: a,
            hi: b,
            estimate: sx,
            error: f64::NAN,
        });
    }
    let upper = (sx - sa) / (sb - sa);
    Ok(HittingProbabilities {
        lower: 1.0 - upper,
        upper,
    })
}

/// Two-barrier Green function
/// `G_{a,b}(x,y) = (s(x^y)-s(a))(s(b)-s(x|y)) / (s(b)-s(a))`.
pub fn green_ab(chars: &Characteristics, a: f64, b: f64, x: f64, y: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::domain(format!("need a < b, got a={a}, b={b}")));
    }
    for v in [x, y] {
        if v < a || v > b {
            return Err(Error::domain(format!("point {v} outside [{a}, {b}]")));
        }
    }
    let lo = x.min(y);
    let hi = x.max(y);
    let (sa, sb) = (chars.scale(a), chars.scale(b));
    let g = (chars.scale(lo) - sa) * (sb - chars.scale(hi)) / (sb - sa);
    if !g.is_finite() {
        return Err(Error::QuadratureFailure {
            lo: a,
            hi: b,
            estimate: g,
            error: f64::NAN,
        });
    }
    Ok(g)
}

/// Mean exit time `e_{ab}(x) = int_a^b G_{a,b}(x,y) m'(y) dy`.
pub fn mean_exit_time(chars: &Characteristics, a: f64, b: f64, x: f64) -> Result<f64> {
    chars.require_null_killing("mean_exit_time")?;
    if x == a || x == b {
        return Ok(0.0);
    }
    // The integrand has a kink at y = x; integrate the two sides separately.
    let f = |y: f64| green_ab(chars, a, b, x, y).unwrap_or(f64::NAN) * chars.speed_density(y);
    let left = quadrature::integrate(f, a, x, Tol::new(1e-10, 1e-8))?;
    let right = quadrature::integrate(f, x, b, Tol::new(1e-10, 1e-8))?;
    Ok(left + right)
}

fn classify_one(
    chars: &Characteristics,
    which: Endpoint,
    z: f64,
) -> Result<(Verdict, Verdict, Verdict)> {
    let endpoint = chars.interval.endpoint(which);
    let tol = Tol::new(1e-9, 1e-7);
    // Inner masses m((x,z)) or m((z,x)) plus the killing contribution.
    let speed_plus_kill_mass = |lo: f64, hi: f64| -> f64 {
        let m = quadrature::integrate(|y| chars.speed_density(y), lo, hi, tol)
            .unwrap_or(f64::INFINITY);
        let k = chars.killing.mass(lo, hi).unwrap_or(f64::INFINITY);
        m + k
    };
    let exit_integrand = move |x: f64| {
        let (lo, hi) = if x < z { (x, z) } else { (z, x) };
        speed_plus_kill_mass(lo, hi) * chars.scale_density(x)
    };
    let exit = quadrature::improper_verdict(exit_integrand, z, endpoint, tol);

    let sz = chars.scale(z);
    let entrance_integrand = move |x: f64| {
        (chars.scale(x) - sz).abs() * (chars.speed_density(x) + chars.killing.density_at(x))
    };
    let entrance = quadrature::improper_verdict(entrance_integrand, z, endpoint, tol);

    let scale_limit = quadrature::improper_verdict(|x| chars.scale_density(x), z, endpoint, tol);
    Ok((exit, entrance, scale_limit))
}

/// Classify an endpoint by the exit/entrance integral tests, with natural
/// endpoints split by whether the scale function stays bounded.
pub fn classify_boundary(chars: &Characteristics, which: Endpoint) -> Result<BoundaryClass> {
    let z = chars.anchor;
    let (exit, entrance, scale_limit) = classify_one(chars, which, z)?;
    let indeterminate = |e: &Verdict| matches!(e, Verdict::Indeterminate(_));
    if indeterminate(&exit) || indeterminate(&entrance) {
        return Err(Error::IndeterminateClassification {
            exit_partial: exit.partial(),
            entrance_partial: entrance.partial(),
        });
    }
    Ok(match (exit.is_finite(), entrance.is_finite()) {
        (true, true) => BoundaryClass::Regular,
        (true, false) => BoundaryClass::Exit,
        (false, true) => BoundaryClass::Entrance,
        (false, false) => match scale_limit {
            Verdict::Finite(_) => BoundaryClass::NaturalAttractive,
            Verdict::Infinite(_) => BoundaryClass::NaturalNonattractive,
            Verdict::Indeterminate(p) => {
                return Err(Error::IndeterminateClassification {
                    exit_partial: p,
                    entrance_partial: p,
                })
            }
        },
    })
}

/// Scale function re-anchored so that `s(l+) = 0`, for diffusions attracted
/// to the lower endpoint.
#[derive(Clone)]
pub struct AnchoredScale {
    chars: Characteristics,
    offset: f64,
}

impl AnchoredScale {
    /// Computes `lim_{a -> l} s(a)` by geometric truncation and shifts the
    /// scale so the limit is zero. Fails if the limit is `-inf` (lower
    /// endpoint not attracting in the required sense) or if the scale does
    /// not diverge at the upper endpoint (process not a.s. absorbed below).
    pub fn new(chars: &Characteristics) -> Result<Self> {
        let tol = Tol::new(1e-13, 1e-12);
        let down = quadrature::improper_verdict(
            |x| chars.scale_density(x),
            chars.anchor,
            chars.interval.lower,
            tol,
        );
        let offset = match down {
            Verdict::Finite(v) => v,
            Verdict::Infinite(_) => {
                return Err(Error::Normalization(
                    "scale diverges at the lower endpoint; s(l+) = -inf".into(),
                ))
            }
            Verdict::Indeterminate(p) => {
                return Err(Error::Normalization(format!(
                    "scale limit at the lower endpoint did not converge (partial {p:e})"
                )))
            }
        };
        let up = quadrature::improper_verdict(
            |x| chars.scale_density(x),
            chars.anchor,
            chars.interval.upper,
            tol,
        );
        if up.is_finite() {
            return Err(Error::Normalization(
                "scale is bounded at the upper endpoint; process is not a.s. attracted to l"
                    .into(),
            ));
        }
        Ok(AnchoredScale {
            chars: chars.clone(),
            offset,
        })
    }

    /// `s(x)` with `s(l+) = 0`.
    pub fn value(&self, x: f64) -> f64 {
        self.chars.scale(x) + self.offset
    }

    pub fn density(&self, x: f64) -> f64 {
        self.chars.scale_density(x)
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

/// Green kernel `r_0(x,y) = s(x ^ y)` (density with respect to the speed
/// measure) for a transient diffusion attracted to the lower endpoint, with
/// the scale anchored so `s(l+) = 0`.
pub fn r0_drift_to_lower(chars: &Characteristics, x: f64, y: f64) -> Result<f64> {
    chars.require_null_killing("r0_drift_to_lower")?;
    let anchored = AnchoredScale::new(chars)?;
    Ok(anchored.value(x.min(y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form_models::BmWithDrift;
    use proptest::prelude::*;

    fn bm_chars(mu: f64) -> Characteristics {
        BmWithDrift::new(mu).unwrap().characteristics()
    }

    fn driftless_chars() -> Characteristics {
        Characteristics::from_closed_form(
            Interval::real_line(),
            Arc::new(|x| x),
            Arc::new(|_| 1.0),
            Arc::new(|_| 2.0),
            0.0,
        )
    }

    #[test]
    fn scale_from_drift_matches_bm_closed_form() {
        let spec = BmWithDrift::new(1.0).unwrap().spec();
        let chars = scale_from_drift(&spec, 0.0).unwrap();
        for x in [-1.5, -0.3, 0.0, 0.7, 2.0] {
            assert!((chars.scale_density(x) - (2.0 * x).exp()).abs() < 1e-8);
            let s_expected = ((2.0 * x).exp() - 1.0) / 2.0;
            assert!((chars.scale(x) - s_expected).abs() < 1e-8);
        }
    }

    #[test]
    fn speed_from_drift_matches_bm_and_ou() {
        let spec = BmWithDrift::new(1.0).unwrap().spec();
        let chars = speed_from_drift(&spec, 0.0).unwrap();
        for x in [-1.0, 0.0, 1.3] {
            assert!((chars.speed_density(x) - 2.0 * (-2.0 * x).exp()).abs() < 1e-8);
        }
        // OU with parameter gamma: m'(x) = 2 exp(-gamma x^2).
        let gamma = -1.0;
        let ou = DiffusionSpec::new(
            Interval::real_line(),
            Arc::new(move |x| -gamma * x),
            Arc::new(|_| 1.0),
        );
        let chars = speed_from_drift(&ou, 0.0).unwrap();
        for x in [-2.0, 0.5, 1.0] {
            assert!((chars.speed_density(x) - 2.0 * (-gamma * x * x).exp()).abs() < 1e-7);
        }
    }

    #[test]
    fn driftless_scale_is_identity() {
        let spec = DiffusionSpec::new(Interval::real_line(), Arc::new(|_| 0.0), Arc::new(|_| 1.0));
        let chars = scale_from_drift(&spec, 0.0).unwrap();
        for x in [-2.0, 0.1, 3.0] {
            assert!((chars.scale(x) - x).abs() < 1e-9);
            assert!((chars.scale_density(x) - 1.0).abs() < 1e-12);
            assert!((chars.speed_density(x) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_scale_density_shape() {
        // s'(x) = x^{-2 mu / sigma^2} e^{2 kappa x / sigma^2} up to a constant;
        // from_drift anchors B at x0 = 1, so compare ratios.
        let (mu, kappa, sigma) = (0.3, 0.1, 1.0);
        let spec = DiffusionSpec::new(
            Interval::positive_half_line(),
            Arc::new(move |x: f64| x * (mu - kappa * x)),
            Arc::new(move |x: f64| sigma * x),
        );
        let chars = scale_from_drift(&spec, 1.0).unwrap();
        let closed = |x: f64| x.powf(-2.0 * mu / (sigma * sigma)) * (2.0 * kappa * x / (sigma * sigma)).exp();
        let ratio0 = chars.scale_density(0.5) / closed(0.5);
        for x in [0.25, 0.8, 1.5, 3.0] {
            let r = chars.scale_density(x) / closed(x);
            assert!((r / ratio0 - 1.0).abs() < 1e-7, "x={x}: ratio {r} vs {ratio0}");
        }
    }

    #[test]
    fn hitting_prob_bm_closed_form() {
        let chars = bm_chars(1.0);
        let p = hitting_prob(&chars, -1.0, 1.0, 0.0).unwrap();
        // p_{ab}(0) = (e^2 - 1)/(e^2 - e^{-2}).
        let expected = ((2.0f64).exp() - 1.0) / ((2.0f64).exp() - (-2.0f64).exp());
        assert!((p.lower - expected).abs() < 1e-12, "{} vs {expected}", p.lower);
        assert!((p.lower - 0.88080).abs() < 5e-6);
        assert!(hitting_prob(&chars, -1.0, 1.0, -1.0).unwrap().lower == 1.0);
        assert!(hitting_prob(&chars, -1.0, 1.0, 1.0).unwrap().lower == 0.0);
        assert!(hitting_prob(&chars, -1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn green_function_values() {
        let chars = driftless_chars();
        assert_eq!(green_ab(&chars, 0.0, 1.0, 0.0, 0.5).unwrap(), 0.0);
        assert_eq!(green_ab(&chars, 0.0, 1.0, 0.5, 1.0).unwrap(), 0.0);
        let g = green_ab(&chars, 0.0, 1.0, 0.5, 0.5).unwrap();
        assert!((g - 0.25).abs() < 1e-14);
    }

    #[test]
    fn mean_exit_time_driftless() {
        let chars = driftless_chars();
        let e = mean_exit_time(&chars, 0.0, 1.0, 0.5).unwrap();
        assert!((e - 0.25).abs() < 1e-9, "got {e}");
        assert_eq!(mean_exit_time(&chars, 0.0, 1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn classify_bm_with_drift_boundaries() {
        let chars = bm_chars(1.0);
        assert_eq!(
            classify_boundary(&chars, Endpoint::Lower).unwrap(),
            BoundaryClass::NaturalAttractive
        );
        assert_eq!(
            classify_boundary(&chars, Endpoint::Upper).unwrap(),
            BoundaryClass::NaturalNonattractive
        );
    }

    #[test]
    fn classify_driftless_boundaries() {
        let chars = driftless_chars();
        assert_eq!(
            classify_boundary(&chars, Endpoint::Lower).unwrap(),
            BoundaryClass::NaturalNonattractive
        );
        assert_eq!(
            classify_boundary(&chars, Endpoint::Upper).unwrap(),
            BoundaryClass::NaturalNonattractive
        );
    }

    #[test]
    fn r0_bm_closed_form() {
        let mu = 1.0;
        let chars = bm_chars(mu);
        let r = r0_drift_to_lower(&chars, 0.0, 0.0).unwrap();
        assert!((r - 1.0 / (2.0 * mu)).abs() < 1e-10);
        let r = r0_drift_to_lower(&chars, -0.5, 1.0).unwrap();
        assert!((r - (-1.0f64).exp() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn r0_rejects_nonattracted() {
        let chars = driftless_chars();
        assert!(matches!(
            r0_drift_to_lower(&chars, 0.0, 0.0),
            Err(Error::Normalization(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hitting_probabilities_sum_to_one(x in -0.99f64..0.99) {
            let chars = bm_chars(0.7);
            let p = hitting_prob(&chars, -1.0, 1.0, x).unwrap();
            prop_assert!((p.lower + p.upper - 1.0).abs() < 1e-12);
        }

        #[test]
        fn green_symmetric_nonnegative(x in -0.99f64..0.99, y in -0.99f64..0.99) {
            let chars = bm_chars(0.7);
            let g1 = green_ab(&chars, -1.0, 1.0, x, y).unwrap();
            let g2 = green_ab(&chars, -1.0, 1.0, y, x).unwrap();
            prop_assert!((g1 - g2).abs() < 1e-12);
            prop_assert!(g1 >= 0.0);
        }

        #[test]
        fn scale_strictly_increasing(x1 in -3.0f64..3.0, gap in 0.01f64..2.0) {
            let spec = BmWithDrift::new(0.5).unwrap().spec();
            let chars = scale_from_drift(&spec, 0.0).unwrap();
            prop_assert!(chars.scale(x1) < chars.scale(x1 + gap));
        }

        #[test]
        fn r0_symmetric_and_monotone(x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let chars = bm_chars(1.0);
            let rxy = r0_drift_to_lower(&chars, x, y).unwrap();
            let ryx = r0_drift_to_lower(&chars, y, x).unwrap();
            prop_assert!((rxy - ryx).abs() < 1e-12);
            // nondecreasing in x for fixed y >= x
            if x < y {
                let bigger = r0_drift_to_lower(&chars, x + 0.1, y).unwrap();
                prop_assert!(bigger >= rxy);
            }
        }
    }
}
