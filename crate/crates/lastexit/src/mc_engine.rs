//! Reproducible parallel Monte Carlo for diffusions.
//!
//! Paths are independent work items: path `i` draws all of its randomness
//! from a counter-based substream derived from `(master_seed, i)`, so
//! ensembles are bit-identical regardless of thread count or batch size, and
//! aggregation happens in path-index order.
//!
//! Local time at `a` is estimated by the occupation-band formula
//! `dL = dt 1{|x-a| < eps} / m((a-eps, a+eps))`, normalized by the *speed
//! measure* of the base process; every killing clock in the crate is
//! expressed in this same normalization, under which the total at `a` for a
//! transient start there is `Exp(1/r_0(a,a))`.
//!
//! Last-exit times are not stopping times; they are detected operationally:
//! run until the path crosses an escape barrier `c` with `h(c)` below
//! `escape_delta`, and report the end of the final visit to the band. The
//! `escape_delta` tail bound travels with every ensemble.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::closed_form_models::BmWithDrift;
use crate::diffusion_core::{Interval, StateFn};
use crate::htransform::ExcessiveFn;
use crate::quadrature::{self, Tol};
use crate::stats;
use crate::{Error, Result};

/// Deterministic substream policy: path `i` gets stream `i` of a ChaCha12
/// generator keyed by the master seed.
#[derive(Clone, Copy, Debug)]
pub struct RngPolicy {
    pub master_seed: u64,
}

impl RngPolicy {
    pub fn new(master_seed: u64) -> Self {
        RngPolicy { master_seed }
    }

    pub fn substream(&self, path_index: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(path_index);
        rng
    }
}

/// Step-level description of the simulated process.
#[derive(Clone)]
pub enum PathModel {
    /// Brownian motion with drift `-mu`: increments exact in law at any dt.
    Bm(BmWithDrift),
    /// Euler-Maruyama on a drift/dispersion pair.
    Generic {
        interval: Interval,
        drift: StateFn,
        dispersion: StateFn,
    },
}

impl PathModel {
    pub fn interval(&self) -> Interval {
        match self {
            PathModel::Bm(_) => Interval::real_line(),
            PathModel::Generic { interval, .. } => *interval,
        }
    }

    #[inline]
    fn advance(&self, x: f64, dt: f64, z: f64) -> f64 {
        match self {
            PathModel::Bm(m) => x - m.mu() * dt + dt.sqrt() * z,
            PathModel::Generic {
                drift, dispersion, ..
            } => x + drift(x) * dt + dispersion(x) * dt.sqrt() * z,
        }
    }

    #[inline]
    fn dispersion_at(&self, x: f64) -> f64 {
        match self {
            PathModel::Bm(_) => 1.0,
            PathModel::Generic { dispersion, .. } => dispersion(x),
        }
    }
}

impl std::fmt::Debug for PathModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathModel::Bm(m) => f.debug_tuple("Bm").field(m).finish(),
            PathModel::Generic { interval, .. } => f
                .debug_struct("Generic")
                .field("interval", interval)
                .finish_non_exhaustive(),
        }
    }
}

/// One simulated step; BM branch is exact in law, generic branch is
/// Euler-Maruyama. Errors if the step leaves the open state interval.
pub fn step(model: &PathModel, x: f64, dt: f64, rng: &mut ChaCha12Rng) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::domain("step requires dt > 0"));
    }
    let z: f64 = StandardNormal.sample(rng);
    let next = model.advance(x, dt, z);
    if !model.interval().contains(next) {
        return Err(Error::StateEscaped(next));
    }
    Ok(next)
}

/// Occupation-band local-time increment
/// `dt 1{|x-a|<eps} / m((a-eps, a+eps))`, with the band mass computed from
/// the supplied speed density by quadrature.
pub fn local_time_increment<F: Fn(f64) -> f64>(
    x: f64,
    dt: f64,
    a: f64,
    epsilon: f64,
    speed_density: F,
) -> Result<f64> {
    let band = LocalTimeBand::new(a, epsilon, speed_density)?;
    Ok(band.increment(x, dt))
}

/// Precomputed band for the hot loops.
#[derive(Clone, Copy, Debug)]
pub struct LocalTimeBand {
    pub a: f64,
    pub epsilon: f64,
    pub band_mass: f64,
}

impl LocalTimeBand {
    pub fn new<F: Fn(f64) -> f64>(a: f64, epsilon: f64, speed_density: F) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::domain("local-time band needs epsilon > 0"));
        }
        let band_mass = quadrature::integrate(
            |y| speed_density(y),
            a - epsilon,
            a + epsilon,
            Tol::default(),
        )?;
        Ok(LocalTimeBand {
            a,
            epsilon,
            band_mass,
        })
    }

    #[inline]
    pub fn increment(&self, x: f64, dt: f64) -> f64 {
        if (x - self.a).abs() < self.epsilon {
            dt / self.band_mass
        } else {
            0.0
        }
    }
}

/// Why a simulated path ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeathCause {
    LocalTimeClock,
    LastExit,
    Conditioned,
    Horizon,
    EscapedInterval,
}

/// Summary of one simulated path. Full trajectories are never retained by
/// the ensemble runners; the probe grid carries what the statistics need.
#[derive(Clone, Debug)]
pub struct Path {
    pub index: u64,
    pub death_time: f64,
    pub cause: DeathCause,
    /// Raw band-estimator total at death (a lattice multiple of
    /// `dt / band_mass`).
    pub local_time_total: f64,
    /// Continuum-faithful total for clock/conditioned deaths: the clock
    /// threshold itself. Equals `local_time_total` otherwise.
    pub local_time_exact: f64,
    /// State at each configured probe time, `None` if dead by then.
    pub probes: Vec<Option<f64>>,
    pub final_state: f64,
    /// Rejection attempts consumed (1 = accepted first try).
    pub attempts: u64,
}

/// Stepping configuration shared by the engine entry points.
#[derive(Clone, Debug)]
pub struct PathConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Local-time band half-width.
    pub epsilon: f64,
    /// Tail bound for last-exit detection.
    pub escape_delta: f64,
    /// Probe times (grid-aligned) at which alive states are recorded.
    pub probe_times: Vec<f64>,
    pub rejection_budget: u64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            dt: 1e-3,
            horizon: 200.0,
            epsilon: 0.02,
            escape_delta: 1e-4,
            probe_times: vec![],
            rejection_budget: 10_000_000,
        }
    }
}

impl PathConfig {
    pub fn with_probes(mut self, probes: Vec<f64>) -> Self {
        self.probe_times = probes;
        self
    }
}

struct ProbeTracker<'a> {
    times: &'a [f64],
    values: Vec<Option<f64>>,
    next: usize,
}

impl<'a> ProbeTracker<'a> {
    fn new(times: &'a [f64]) -> Self {
        ProbeTracker {
            times,
            values: vec![None; times.len()],
            next: 0,
        }
    }

    /// Record `x` for every probe time in `(t_prev, t_now]`.
    #[inline]
    fn advance(&mut self, t_now: f64, x: f64) {
        while self.next < self.times.len() && self.times[self.next] <= t_now + 1e-12 {
            self.values[self.next] = Some(x);
            self.next += 1;
        }
    }

    /// Erase probes at or after the death time.
    fn truncate_after(&mut self, death: f64) {
        for (i, &t) in self.times.iter().enumerate() {
            if t >= death {
                self.values[i] = None;
            }
        }
    }
}

/// Find the barrier position `c` below `a` with `h(c) = escape_delta`, by
/// stepping down then bisecting.
pub fn escape_barrier(h: &ExcessiveFn, a: f64, escape_delta: f64) -> Result<f64> {
    if !(escape_delta > 0.0 && escape_delta < 1.0) {
        return Err(Error::domain("escape_delta must be in (0,1)"));
    }
    let mut lo = a - 1.0;
    let mut steps = 0;
    while h.value(lo) > escape_delta {
        lo -= 1.0;
        steps += 1;
        if steps > 100_000 {
            return Err(Error::domain("escape barrier search did not terminate"));
        }
    }
    let mut hi = lo + 1.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if h.value(mid) > escape_delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Simulate from `x0`, killing the path when its local time at the band
/// center exceeds an independent `Exp(rate)` threshold.
pub fn kill_at_local_time_clock(
    model: &PathModel,
    x0: f64,
    band: &LocalTimeBand,
    rate: f64,
    config: &PathConfig,
    rng: &mut ChaCha12Rng,
    index: u64,
) -> Result<Path> {
    if !(rate > 0.0) {
        return Err(Error::domain("clock rate must be positive"));
    }
    let threshold = exp_draw(rng, rate);
    let mut x = x0;
    let mut t = 0.0;
    let mut ell = 0.0;
    let mut probes = ProbeTracker::new(&config.probe_times);
    probes.advance(0.0, x0);
    let interval = model.interval();
    while t < config.horizon {
        let inc = band.increment(x, config.dt);
        let z: f64 = StandardNormal.sample(rng);
        let next = model.advance(x, config.dt, z);
        if ell + inc >= threshold {
            // Clock fires inside this step; interpolate the crossing.
            let frac = if inc > 0.0 {
                ((threshold - ell) / inc).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let death = t + frac * config.dt;
            probes.truncate_after(death);
            return Ok(Path {
                index,
                death_time: death,
                cause: DeathCause::LocalTimeClock,
                local_time_total: ell + inc,
                local_time_exact: threshold,
                probes: probes.values,
                final_state: x,
                attempts: 1,
            });
        }
        ell += inc;
        t += config.dt;
        if !interval.contains(next) {
            probes.truncate_after(t);
            return Ok(Path {
                index,
                death_time: t,
                cause: DeathCause::EscapedInterval,
                local_time_total: ell,
                local_time_exact: ell,
                probes: probes.values,
                final_state: x,
                attempts: 1,
            });
        }
        x = next;
        probes.advance(t, x);
    }
    Err(Error::HorizonReached(config.horizon))
}

/// Realize the conditioned-to-hit, killed-at-last-exit path: run from `x0`
/// (rejecting starts that escape below the barrier before reaching `a`),
/// then record the end of the final visit to the local-time band before the
/// escape barrier is crossed.
pub fn run_to_last_exit(
    model: &PathModel,
    h: &ExcessiveFn,
    x0: f64,
    band: &LocalTimeBand,
    config: &PathConfig,
    rng: &mut ChaCha12Rng,
    index: u64,
) -> Result<Path> {
    let a = band.a;
    let barrier = escape_barrier(h, a, config.escape_delta)?;
    let interval = model.interval();
    'attempt: for attempt in 1..=config.rejection_budget {
        let mut x = x0;
        let mut t = 0.0;
        let mut hit = x0 >= a || (x0 - a).abs() < band.epsilon;
        let mut ell = 0.0;
        let mut last_exit = 0.0;
        let mut ell_at_exit = 0.0;
        let mut probes = ProbeTracker::new(&config.probe_times);
        probes.advance(0.0, x0);
        while t < config.horizon {
            let inc = band.increment(x, config.dt);
            let in_band = inc > 0.0;
            let z: f64 = StandardNormal.sample(rng);
            let next = model.advance(x, config.dt, z);
            ell += inc;
            t += config.dt;
            if in_band {
                // End of a band-occupying step: candidate last exit.
                last_exit = t;
                ell_at_exit = ell;
                hit = true;
            }
            if !hit && !in_band {
                // Still waiting on the first hit; crossing the level counts.
                if (x - a) * (next - a) <= 0.0 {
                    hit = true;
                }
            }
            if !interval.contains(next) {
                continue 'attempt;
            }
            if next <= barrier {
                if !hit {
                    // Escaped without conditioning event: reject.
                    continue 'attempt;
                }
                probes.truncate_after(last_exit);
                return Ok(Path {
                    index,
                    death_time: last_exit,
                    cause: DeathCause::LastExit,
                    local_time_total: ell_at_exit,
                    local_time_exact: ell_at_exit,
                    probes: probes.values,
                    final_state: x,
                    attempts: attempt,
                });
            }
            x = next;
            probes.advance(t, x);
        }
        return Err(Error::HorizonReached(config.horizon));
    }
    Err(Error::RejectionBudgetExhausted {
        budget: config.rejection_budget,
    })
}

/// Conditioning near a point: accept a proposal if at an independent
/// `Exp(lambda)` time the path sits within `eps_cond` of `a`; the accepted
/// path is killed at that time.
pub fn condition_near_point(
    model: &PathModel,
    a: f64,
    lambda: f64,
    eps_cond: f64,
    band: &LocalTimeBand,
    config: &PathConfig,
    rng: &mut ChaCha12Rng,
    index: u64,
    x0: f64,
) -> Result<Path> {
    if !(lambda > 0.0 && eps_cond > 0.0) {
        return Err(Error::domain("condition_near_point needs lambda, eps_cond > 0"));
    }
    let interval = model.interval();
    'attempt: for attempt in 1..=config.rejection_budget {
        let kappa = exp_draw(rng, lambda);
        if kappa >= config.horizon {
            continue 'attempt;
        }
        let mut x = x0;
        let mut t = 0.0;
        let mut ell = 0.0;
        let mut probes = ProbeTracker::new(&config.probe_times);
        probes.advance(0.0, x0);
        loop {
            let remaining = kappa - t;
            if remaining <= 0.0 {
                break;
            }
            let dt = config.dt.min(remaining);
            ell += band.increment(x, dt);
            let z: f64 = StandardNormal.sample(rng);
            let next = model.advance(x, dt, z);
            if !interval.contains(next) {
                continue 'attempt;
            }
            t += dt;
            x = next;
            if t < kappa {
                probes.advance(t, x);
            }
        }
        if (x - a).abs() < eps_cond {
            probes.truncate_after(kappa);
            return Ok(Path {
                index,
                death_time: kappa,
                cause: DeathCause::Conditioned,
                local_time_total: ell,
                local_time_exact: ell,
                probes: probes.values,
                final_state: x,
                attempts: attempt,
            });
        }
    }
    Err(Error::RejectionBudgetExhausted {
        budget: config.rejection_budget,
    })
}

/// Conditioning on local time: accept a proposal whose total local time at
/// `a` exceeds an independent `Exp(lambda)` draw `zeta`, killed when the
/// local time reaches `zeta`. Escape past the barrier before the crossing
/// rejects the proposal (tail bound `escape_delta`).
pub fn condition_on_local_time(
    model: &PathModel,
    h: &ExcessiveFn,
    lambda: f64,
    band: &LocalTimeBand,
    config: &PathConfig,
    rng: &mut ChaCha12Rng,
    index: u64,
    x0: f64,
) -> Result<Path> {
    if !(lambda > 0.0) {
        return Err(Error::domain("condition_on_local_time needs lambda > 0"));
    }
    let barrier = escape_barrier(h, band.a, config.escape_delta)?;
    let interval = model.interval();
    'attempt: for attempt in 1..=config.rejection_budget {
        let zeta = exp_draw(rng, lambda);
        let mut x = x0;
        let mut t = 0.0;
        let mut ell = 0.0;
        let mut probes = ProbeTracker::new(&config.probe_times);
        probes.advance(0.0, x0);
        while t < config.horizon {
            let inc = band.increment(x, config.dt);
            let z: f64 = StandardNormal.sample(rng);
            let next = model.advance(x, config.dt, z);
            if ell + inc >= zeta {
                let frac = if inc > 0.0 {
                    ((zeta - ell) / inc).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                let death = t + frac * config.dt;
                probes.truncate_after(death);
                return Ok(Path {
                    index,
                    death_time: death,
                    cause: DeathCause::Conditioned,
                    local_time_total: ell + inc,
                    local_time_exact: zeta,
                    probes: probes.values,
                    final_state: x,
                    attempts: attempt,
                });
            }
            ell += inc;
            t += config.dt;
            if !interval.contains(next) || next <= barrier {
                continue 'attempt;
            }
            x = next;
            probes.advance(t, x);
        }
        return Err(Error::HorizonReached(config.horizon));
    }
    Err(Error::RejectionBudgetExhausted {
        budget: config.rejection_budget,
    })
}

/// Outcome of a two-barrier run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitSide {
    Lower,
    Upper,
}

/// First-exit experiment on `(a, b)` with Brownian-bridge crossing
/// correction inside each step; returns the side and the exit time.
pub fn first_exit_side(
    model: &PathModel,
    x0: f64,
    a: f64,
    b: f64,
    config: &PathConfig,
    rng: &mut ChaCha12Rng,
) -> Result<(ExitSide, f64)> {
    if !(a < x0 && x0 < b) {
        return Err(Error::domain("first_exit_side needs a < x0 < b"));
    }
    let mut x = x0;
    let mut t = 0.0;
    while t < config.horizon {
        let z: f64 = StandardNormal.sample(rng);
        let next = model.advance(x, config.dt, z);
        t += config.dt;
        if next <= a {
            return Ok((ExitSide::Lower, t));
        }
        if next >= b {
            return Ok((ExitSide::Upper, t));
        }
        let sigma2 = model.dispersion_at(x).powi(2) * config.dt;
        // Brownian-bridge probability of touching a barrier inside the step.
        let p_lower = (-2.0 * (x - a) * (next - a) / sigma2).exp();
        let u: f64 = rng.random();
        if u < p_lower {
            return Ok((ExitSide::Lower, t));
        }
        let p_upper = (-2.0 * (b - x) * (b - next) / sigma2).exp();
        let u: f64 = rng.random();
        if u < p_upper {
            return Ok((ExitSide::Upper, t));
        }
        x = next;
    }
    Err(Error::HorizonReached(config.horizon))
}

/// Does the path hit `level` before leaving `(lo_barrier, hi_barrier)`?
/// Bridge-corrected on the level; used for hitting-probability checks
/// against closed forms.
pub fn hits_level_before_escape(
    model: &PathModel,
    x0: f64,
    level: f64,
    lo_barrier: f64,
    hi_barrier: f64,
    config: &PathConfig,
    rng: &mut ChaCha12Rng,
) -> Result<bool> {
    let mut x = x0;
    let mut t = 0.0;
    while t < config.horizon {
        let z: f64 = StandardNormal.sample(rng);
        let next = model.advance(x, config.dt, z);
        t += config.dt;
        if (x - level) * (next - level) <= 0.0 {
            return Ok(true);
        }
        let sigma2 = model.dispersion_at(x).powi(2) * config.dt;
        let p_touch = (-2.0 * (x - level) * (next - level) / sigma2).exp();
        let u: f64 = rng.random();
        if u < p_touch {
            return Ok(true);
        }
        if next <= lo_barrier || next >= hi_barrier {
            return Ok(false);
        }
        x = next;
    }
    Err(Error::HorizonReached(config.horizon))
}

fn exp_draw(rng: &mut ChaCha12Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Run `n_paths` independent paths in parallel; path `i` sees only the
/// substream for index `i`, and results are collected in index order.
pub fn run_ensemble<F>(n_paths: usize, policy: &RngPolicy, f: F) -> Result<Vec<Path>>
where
    F: Fn(u64, &mut ChaCha12Rng) -> Result<Path> + Sync,
{
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = policy.substream(i);
            f(i, &mut rng)
        })
        .collect()
}

/// Weighted empirical distribution (weights default to 1).
#[derive(Clone, Debug)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn from_samples(mut values: Vec<f64>) -> Self {
        values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let n = values.len();
        EmpiricalDistribution {
            values,
            weights: vec![1.0; n],
        }
    }

    pub fn from_weighted(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (values, weights) = pairs.into_iter().unzip();
        EmpiricalDistribution { values, weights }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Two-sample Kolmogorov-Smirnov test on empirical distributions.
/// Unit-weight inputs reduce to the classical test.
pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty(), "empty sample");
    let wa: f64 = a.weights.iter().sum();
    let wb: f64 = b.weights.iter().sum();
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ca, mut cb) = (0.0f64, 0.0f64);
    let mut d: f64 = 0.0;
    while i < a.values.len() && j < b.values.len() {
        let v = a.values[i].min(b.values[j]);
        while i < a.values.len() && a.values[i] <= v {
            ca += a.weights[i];
            i += 1;
        }
        while j < b.values.len() && b.values[j] <= v {
            cb += b.weights[j];
            j += 1;
        }
        d = d.max((ca / wa - cb / wb).abs());
    }
    let n_eff = wa * wb / (wa + wb);
    let sqrt_n = n_eff.sqrt();
    let p = stats::kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
    (d, p)
}

/// Alive states at probe index `k`.
pub fn probe_marginal(paths: &[Path], k: usize) -> Vec<f64> {
    paths.iter().filter_map(|p| p.probes[k]).collect()
}

/// Death times.
pub fn lifetimes(paths: &[Path]) -> Vec<f64> {
    paths.iter().map(|p| p.death_time).collect()
}

/// Raw local-time totals at death.
pub fn local_time_totals(paths: &[Path]) -> Vec<f64> {
    paths.iter().map(|p| p.local_time_total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form_models::BmWithDrift;
    use crate::diffusion_core::hitting_prob;
    use crate::htransform::h_hit;

    fn bm_model() -> PathModel {
        PathModel::Bm(BmWithDrift::new(1.0).unwrap())
    }

    fn std_bm_band(eps: f64) -> LocalTimeBand {
        // Standard BM: m' = 2.
        LocalTimeBand::new(0.0, eps, |_| 2.0).unwrap()
    }

    #[test]
    fn step_moments_bm() {
        let model = bm_model();
        let policy = RngPolicy::new(42);
        let mut rng = policy.substream(0);
        let n = 1_000_000;
        let dt = 0.01;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let dx = step(&model, 0.0, dt, &mut rng).unwrap();
            sum += dx;
            sumsq += dx * dx;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        // mean -mu dt = -0.01, var dt = 0.01; 5 s.e. tolerances.
        let se_mean = (dt / n as f64).sqrt();
        assert!((mean + 0.01).abs() < 5.0 * se_mean, "mean {mean}");
        assert!((var - 0.01).abs() < 5.0 * 0.01 * (2.0 / n as f64).sqrt(), "var {var}");
    }

    #[test]
    fn generic_step_agrees_with_bm_in_law() {
        // Weak check: time-1 mean of the generic Euler branch vs the exact
        // branch on the same model.
        let exact = bm_model();
        let generic = PathModel::Generic {
            interval: Interval::real_line(),
            drift: std::sync::Arc::new(|_| -1.0),
            dispersion: std::sync::Arc::new(|_| 1.0),
        };
        let policy = RngPolicy::new(7);
        let n = 20_000;
        let steps = 100;
        let dt = 0.01;
        let mut means = [0.0f64; 2];
        for (mi, model) in [&exact, &generic].iter().enumerate() {
            let mut total = 0.0;
            for i in 0..n {
                let mut rng = policy.substream((mi * n + i) as u64);
                let mut x = 0.0;
                for _ in 0..steps {
                    x = step(model, x, dt, &mut rng).unwrap();
                }
                total += x;
            }
            means[mi] = total / n as f64;
        }
        let se = (1.0f64 / n as f64).sqrt();
        assert!((means[0] - means[1]).abs() < 3.0 * 2.0f64.sqrt() * se);
    }

    #[test]
    fn local_time_increment_formula() {
        let band = std_bm_band(0.02);
        assert!((band.band_mass - 0.08).abs() < 1e-12);
        assert_eq!(band.increment(0.05, 1e-3), 0.0);
        assert!((band.increment(0.01, 1e-3) - 1e-3 / 0.08).abs() < 1e-15);
        // Doubling m' halves the increment.
        let v = local_time_increment(0.0, 1e-3, 0.0, 0.02, |_| 4.0).unwrap();
        assert!((v - 1e-3 / 0.16).abs() < 1e-15);
    }

    #[test]
    fn standard_bm_expected_local_time_at_one() {
        // E[L(1,0)] under m' = 2 is E|B_1|/2 = sqrt(2/pi)/2 ~ 0.39894/2.
        let model = PathModel::Generic {
            interval: Interval::real_line(),
            drift: std::sync::Arc::new(|_| 0.0),
            dispersion: std::sync::Arc::new(|_| 1.0),
        };
        let policy = RngPolicy::new(11);
        let n = 30_000usize;
        let dt = 2.5e-4f64;
        let band = std_bm_band(2.0 * dt.sqrt());
        let totals: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = policy.substream(i as u64);
                let mut x = 0.0;
                let mut ell = 0.0;
                let mut t = 0.0;
                while t < 1.0 {
                    ell += band.increment(x, dt);
                    x = model.advance(x, dt, StandardNormal.sample(&mut rng));
                    t += dt;
                }
                ell
            })
            .collect();
        let mean = stats::mean(&totals);
        let expected = (2.0 / std::f64::consts::PI).sqrt() / 2.0;
        let se = stats::std_error(&totals);
        assert!(
            (mean - expected).abs() < 3.0 * se + 0.02 * expected,
            "mean {mean} vs {expected} (se {se})"
        );
    }

    #[test]
    fn clock_kill_total_is_exponential() {
        // Bang-bang BM killed at rate 1; the exact totals are the thresholds,
        // and the raw lattice totals must match them to within one increment.
        let mu = 1.0;
        let model = PathModel::Generic {
            interval: Interval::real_line(),
            drift: std::sync::Arc::new(move |x: f64| -mu * x.signum()),
            dispersion: std::sync::Arc::new(|_| 1.0),
        };
        let chars = BmWithDrift::new(mu).unwrap().characteristics();
        let band = LocalTimeBand::new(0.0, 0.02, |y| chars.speed_density(y)).unwrap();
        let config = PathConfig {
            dt: 1e-4,
            epsilon: 0.02,
            ..PathConfig::default()
        };
        let policy = RngPolicy::new(3);
        let rate = 1.0;
        let paths = run_ensemble(20_000, &policy, |i, rng| {
            kill_at_local_time_clock(&model, 0.0, &band, rate, &config, rng, i)
        })
        .unwrap();
        let totals = local_time_totals(&paths);
        let (_, p) = stats::ks_one_sample(&totals, |x| 1.0 - (-rate * x).exp());
        assert!(p > 0.01, "KS p = {p}");
        // Threshold independent of the increment overshoot.
        for path in paths.iter().take(100) {
            assert!(path.local_time_total >= path.local_time_exact - 1e-12);
            assert!(path.local_time_total - path.local_time_exact <= config.dt / band.band_mass);
        }
    }

    #[test]
    fn clock_rate_to_infinity_kills_at_first_band_entry() {
        let model = bm_model();
        let chars = BmWithDrift::new(1.0).unwrap().characteristics();
        let band = LocalTimeBand::new(0.0, 0.02, |y| chars.speed_density(y)).unwrap();
        let config = PathConfig {
            dt: 1e-4,
            ..PathConfig::default()
        };
        let policy = RngPolicy::new(17);
        // From x0 = 1 the first band entry is near T_0; a rate-1e4 clock
        // fires almost immediately afterwards.
        let paths = run_ensemble(200, &policy, |i, rng| {
            kill_at_local_time_clock(&model, 1.0, &band, 1e4, &config, rng, i)
        })
        .unwrap();
        for p in &paths {
            assert_eq!(p.cause, DeathCause::LocalTimeClock);
            assert!((p.final_state).abs() < 0.02 + 0.05, "died at {}", p.final_state);
        }
    }

    #[test]
    fn run_to_last_exit_basics() {
        let model = bm_model();
        let bm = BmWithDrift::new(1.0).unwrap();
        let chars = bm.characteristics();
        let h = h_hit(&chars, 0.0).unwrap();
        let band = LocalTimeBand::new(0.0, 0.02, |y| chars.speed_density(y)).unwrap();
        let config = PathConfig {
            dt: 1e-3,
            escape_delta: 1e-4,
            probe_times: vec![0.5],
            ..PathConfig::default()
        };
        // Barrier where e^{2c} = 1e-4: c = -ln(1e4)/2 = -4.605.
        let barrier = escape_barrier(&h, 0.0, 1e-4).unwrap();
        assert!((barrier + 4.60517).abs() < 1e-3, "barrier {barrier}");
        let policy = RngPolicy::new(5);
        let paths = run_ensemble(2000, &policy, |i, rng| {
            run_to_last_exit(&model, &h, 0.0, &band, &config, rng, i)
        })
        .unwrap();
        for p in &paths {
            assert_eq!(p.cause, DeathCause::LastExit);
            assert_eq!(p.attempts, 1, "from x0 = a acceptance is certain");
            assert!(p.death_time > 0.0);
        }
        // Mean total local time ~ r_0(0,0) = 1/2.
        let totals = local_time_totals(&paths);
        let mean = stats::mean(&totals);
        assert!((mean - 0.5).abs() < 0.05, "mean local time {mean}");
    }

    #[test]
    fn run_to_last_exit_rejects_nonhitting_starts() {
        let model = bm_model();
        let bm = BmWithDrift::new(1.0).unwrap();
        let chars = bm.characteristics();
        let h = h_hit(&chars, 0.0).unwrap();
        let band = LocalTimeBand::new(0.0, 0.02, |y| chars.speed_density(y)).unwrap();
        let config = PathConfig {
            dt: 1e-3,
            ..PathConfig::default()
        };
        let policy = RngPolicy::new(23);
        // From x0 = -1, P(hit 0) = e^{-2} ~ 0.135, so attempts ~ 7.4 on
        // average.
        let paths = run_ensemble(400, &policy, |i, rng| {
            run_to_last_exit(&model, &h, -1.0, &band, &config, rng, i)
        })
        .unwrap();
        let mean_attempts =
            paths.iter().map(|p| p.attempts as f64).sum::<f64>() / paths.len() as f64;
        assert!(
            (mean_attempts - (2.0f64).exp()).abs() < 1.5,
            "mean attempts {mean_attempts}"
        );
    }

    #[test]
    fn condition_near_point_acceptance_shrinks_with_band() {
        let model = bm_model();
        let chars = BmWithDrift::new(1.0).unwrap().characteristics();
        let band = LocalTimeBand::new(0.0, 0.02, |y| chars.speed_density(y)).unwrap();
        let config = PathConfig {
            dt: 0.05,
            ..PathConfig::default()
        };
        let policy = RngPolicy::new(31);
        let mut rates = Vec::new();
        for eps_cond in [0.2, 0.1, 0.05] {
            let paths = run_ensemble(300, &policy, |i, rng| {
                condition_near_point(&model, 0.0, 0.5, eps_cond, &band, &config, rng, i, 0.0)
            })
            .unwrap();
            let attempts: f64 = paths.iter().map(|p| p.attempts as f64).sum();
            rates.push(paths.len() as f64 / attempts);
        }
        assert!(rates[0] > rates[1] && rates[1] > rates[2], "{rates:?}");
    }

    #[test]
    fn hitting_probability_mc_matches_scale_formula() {
        // BM(-1), interval (-1, 1) from 0: P{T_{-1} < T_1}.
        let bm = BmWithDrift::new(1.0).unwrap();
        let model = bm_model();
        let chars = bm.characteristics();
        let p_exact = hitting_prob(&chars, -1.0, 1.0, 0.0).unwrap().lower;
        let config = PathConfig {
            dt: 5e-4,
            ..PathConfig::default()
        };
        let policy = RngPolicy::new(13);
        let n = 100_000;
        let hits: usize = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = policy.substream(i as u64);
                match first_exit_side(&model, 0.0, -1.0, 1.0, &config, &mut rng).unwrap() {
                    (ExitSide::Lower, _) => 1usize,
                    _ => 0,
                }
            })
            .sum();
        let phat = hits as f64 / n as f64;
        let se = stats::binomial_std_error(p_exact, n);
        assert!(
            (phat - p_exact).abs() < 3.0 * se,
            "phat {phat} vs {p_exact} (3se {})",
            3.0 * se
        );
    }

    #[test]
    fn mean_exit_time_mc_matches_quadrature() {
        let bm = BmWithDrift::new(1.0).unwrap();
        let model = bm_model();
        let chars = bm.characteristics();
        let e_exact = crate::diffusion_core::mean_exit_time(&chars, -1.0, 1.0, 0.0).unwrap();
        let config = PathConfig {
            dt: 2e-4,
            ..PathConfig::default()
        };
        let policy = RngPolicy::new(29);
        let n = 50_000;
        let times: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = policy.substream(i as u64);
                first_exit_side(&model, 0.0, -1.0, 1.0, &config, &mut rng)
                    .unwrap()
                    .1
            })
            .collect();
        let mean = stats::mean(&times);
        let se = stats::std_error(&times);
        assert!(
            (mean - e_exact).abs() < 3.0 * se + 2.0 * config.dt,
            "mean {mean} vs {e_exact}"
        );
    }

    #[test]
    fn ensembles_are_deterministic_and_order_independent() {
        let model = bm_model();
        let chars = BmWithDrift::new(1.0).unwrap().characteristics();
        let h = h_hit(&chars, 0.0).unwrap();
        let band = LocalTimeBand::new(0.0, 0.02, |y| chars.speed_density(y)).unwrap();
        let config = PathConfig::default().with_probes(vec![0.25]);
        let policy = RngPolicy::new(99);
        let run = || {
            run_ensemble(64, &policy, |i, rng| {
                run_to_last_exit(&model, &h, 0.0, &band, &config, rng, i)
            })
            .unwrap()
        };
        let a = run();
        let b = run();
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.death_time, q.death_time);
            assert_eq!(p.local_time_total, q.local_time_total);
            assert_eq!(p.probes, q.probes);
        }
    }

    #[test]
    fn ks_helpers_roundtrip() {
        let a = EmpiricalDistribution::from_samples(vec![1.0, 2.0, 3.0]);
        let (d, p) = ks_two_sample(&a, &a);
        assert_eq!(d, 0.0);
        assert!(p > 0.999);
        let b = EmpiricalDistribution::from_weighted(vec![(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]);
        let (d, _) = ks_two_sample(&a, &b);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn ks_calibration_against_known_separation() {
        // N(0,1) vs N(1,1) at n = 10^4: decisive rejection.
        let policy = RngPolicy::new(1);
        let mut rng = policy.substream(0);
        let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ys: Vec<f64> = (0..10_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z + 1.0
            })
            .collect();
        let (_, p) = stats::ks_two_sample(&xs, &ys);
        assert!(p < 1e-6);
        // Two independent N(0,1) samples: p roughly uniform; over 200
        // repetitions the mean should hover near 1/2.
        let mut mean_p = 0.0;
        for rep in 0..200 {
            let mut rng = policy.substream(100 + rep);
            let xs: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
            let ys: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
            mean_p += stats::ks_two_sample(&xs, &ys).1;
        }
        mean_p /= 200.0;
        assert!((mean_p - 0.5).abs() < 0.1, "mean p {mean_p}");
    }
}
