//! Exactly solvable laboratory: the asymmetric continuous-time walk on the
//! integers, jumping down at rate `alpha` and up at rate `beta` with
//! `alpha < beta` (so it drifts to `+inf` and is transient).
//!
//! Everything here is doubly checkable: closed-form expressions on one side,
//! finite matrix computations (uniformized exponentials, tridiagonal
//! resolvent solves) on a truncated window with a tracked boundary leak on
//! the other, plus an exact Gillespie sampler.
//!
//! The key objects:
//!
//! * `r_0(u,v)`: `1/(beta-alpha)` for `u <= v`, times `(alpha/beta)^{u-v}`
//!   above.
//! * The conditioned walk at rate `lambda`, with kernel
//!   `e^{-lambda t} P_t(x,y) r_lambda(y,0) / r_lambda(x,0)`.
//! * Its `lambda -> 0` limit, the h-transform by `h(x) = (alpha/beta)^{x_+}`.
//! * The bang-bang walk (pushed toward 0 from both sides) killed at rate
//!   `beta - alpha` in state 0, which has the same law as the limit.
//! * The excursion picture at 0: holds are `Exp(alpha+beta)`, a fraction
//!   `2 alpha/(alpha+beta)` of visits launch finite excursions, and the
//!   number of visits `N` is geometric.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::linalg::solve_tridiagonal;
use crate::{Error, Result};

/// Jump rates of the walk; `0 < alpha < beta`.
#[derive(Clone, Copy, Debug)]
pub struct WalkParams {
    pub alpha: f64,
    pub beta: f64,
}

impl WalkParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > alpha) {
            return Err(Error::domain(format!(
                "walk requires 0 < alpha < beta, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(WalkParams { alpha, beta })
    }

    /// `h(x) = (alpha/beta)^{x_+}`, the hitting probability of 0 from above.
    pub fn h(&self, x: i64) -> f64 {
        (self.alpha / self.beta).powi(x.max(0) as i32)
    }
}

/// Closed-form Green kernel `r_0(u,v)` (time spent at `v` started from `u`).
pub fn walk_r0(p: &WalkParams, u: i64, v: i64) -> f64 {
    let base = 1.0 / (p.beta - p.alpha);
    if u <= v {
        base
    } else {
        (p.alpha / p.beta).powi((u - v) as i32) * base
    }
}

/// Probability that `N` (visits to 0 before the final escape) equals `n`:
/// geometric with success `(beta-alpha)/(alpha+beta)`.
pub fn n_law(p: &WalkParams, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("N takes values 1, 2, ..."));
    }
    let s = p.alpha + p.beta;
    Ok((2.0 * p.alpha / s).powi(n as i32 - 1) * (p.beta - p.alpha) / s)
}

/// Generator of a birth-death chain truncated to `[lo, hi]` with absorbing
/// (leak-monitored) boundaries and optional on-diagonal killing.
#[derive(Clone, Debug)]
pub struct TruncatedChain {
    pub lo: i64,
    pub hi: i64,
    /// Down-rate per state.
    down: Vec<f64>,
    /// Up-rate per state.
    up: Vec<f64>,
    /// Killing rate per state (diagonal defect beyond the jump rates).
    kill: Vec<f64>,
    /// Uniformization constant (max total exit rate).
    unif: f64,
}

/// One row of a (sub-)stochastic kernel on the window, with the mass lost to
/// killing and to the truncation boundary tracked separately.
#[derive(Clone, Debug)]
pub struct KernelRow {
    pub lo: i64,
    pub probs: Vec<f64>,
    pub killed: f64,
    pub leak: f64,
}

impl KernelRow {
    pub fn prob(&self, y: i64) -> f64 {
        let idx = y - self.lo;
        if idx < 0 || idx as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[idx as usize]
        }
    }
}

impl TruncatedChain {
    /// The base walk on `[lo, hi]`.
    pub fn walk(p: &WalkParams, lo: i64, hi: i64) -> Self {
        let n = (hi - lo + 1) as usize;
        TruncatedChain {
            lo,
            hi,
            down: vec![p.alpha; n],
            up: vec![p.beta; n],
            kill: vec![0.0; n],
            unif: p.alpha + p.beta,
        }
    }

    /// The bang-bang walk: pushed up below 0, symmetric at 0, pushed down
    /// above 0; optionally killed at rate `beta - alpha` in state 0.
    pub fn bangbang_walk(p: &WalkParams, lo: i64, hi: i64, with_kill: bool) -> Self {
        let n = (hi - lo + 1) as usize;
        let mut down = vec![0.0; n];
        let mut up = vec![0.0; n];
        let mut kill = vec![0.0; n];
        for i in 0..n {
            let x = lo + i as i64;
            let (d, u) = match x.cmp(&0) {
                std::cmp::Ordering::Less => (p.alpha, p.beta),
                std::cmp::Ordering::Equal => (p.alpha, p.alpha),
                std::cmp::Ordering::Greater => (p.beta, p.alpha),
            };
            down[i] = d;
            up[i] = u;
            if x == 0 && with_kill {
                kill[i] = p.beta - p.alpha;
            }
        }
        TruncatedChain {
            lo,
            hi,
            down,
            up,
            kill,
            unif: p.alpha + p.beta,
        }
    }

    pub fn n_states(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    fn index(&self, x: i64) -> Result<usize> {
        if x < self.lo || x > self.hi {
            return Err(Error::domain(format!(
                "state {x} outside window [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok((x - self.lo) as usize)
    }

    /// Total exit rate (including killing) at a state; the negated diagonal.
    pub fn exit_rate(&self, x: i64) -> Result<f64> {
        let i = self.index(x)?;
        Ok(self.down[i] + self.up[i] + self.kill[i])
    }

    /// Row `x` of `e^{tQ}` by uniformization with the Poisson tail truncated
    /// at 1e-13. The returned row tracks killed mass and boundary leak.
    pub fn transition_row(&self, x: i64, t: f64) -> Result<KernelRow> {
        let n = self.n_states();
        let ix = self.index(x)?;
        let lam = self.unif;
        let a = lam * t;
        let mut v = vec![0.0f64; n];
        v[ix] = 1.0;
        let mut killed = 0.0f64;
        let mut leak = 0.0f64;

        // Accumulators weighted by Poisson(a) probabilities.
        let mut out = vec![0.0f64; n];
        let mut out_killed = 0.0;
        let mut out_leak = 0.0;

        let mut weight = (-a).exp();
        let mut cum = 0.0;
        let mut k = 0usize;
        let kmax = 20 + (a + 12.0 * a.sqrt()).ceil() as usize;
        let mut next = vec![0.0f64; n];
        loop {
            cum += weight;
            for i in 0..n {
                out[i] += weight * v[i];
            }
            out_killed += weight * killed;
            out_leak += weight * leak;
            if cum >= 1.0 - 1e-13 || k > kmax {
                break;
            }
            // One application of P = I + Q/lam to (v, killed, leak).
            for i in 0..n {
                let stay = 1.0 - (self.down[i] + self.up[i] + self.kill[i]) / lam;
                next[i] = v[i] * stay;
            }
            for i in 0..n {
                let mass = v[i];
                if mass == 0.0 {
                    continue;
                }
                if i > 0 {
                    next[i - 1] += mass * self.down[i] / lam;
                } else {
                    leak += mass * self.down[i] / lam;
                }
                if i + 1 < n {
                    next[i + 1] += mass * self.up[i] / lam;
                } else {
                    leak += mass * self.up[i] / lam;
                }
                killed += mass * self.kill[i] / lam;
            }
            std::mem::swap(&mut v, &mut next);
            weight *= a / (k as f64 + 1.0);
            k += 1;
        }
        Ok(KernelRow {
            lo: self.lo,
            probs: out,
            killed: out_killed,
            leak: out_leak + (1.0 - cum),
        })
    }

    /// Column `v` of `(lambda I - Q)^{-1}`: the resolvent `r_lambda(., v)`.
    /// `lambda = 0` is allowed because the truncated generator is strictly
    /// substochastic (boundary absorption).
    pub fn resolvent_column(&self, lambda: f64, v: i64) -> Result<Vec<f64>> {
        let n = self.n_states();
        let iv = self.index(v)?;
        let mut sub = vec![0.0; n - 1];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n - 1];
        for i in 0..n {
            diag[i] = lambda + self.down[i] + self.up[i] + self.kill[i];
            // -Q off-diagonals: row i has -down (to i-1) and -up (to i+1).
            if i > 0 {
                sub[i - 1] = -self.down[i];
            }
            if i + 1 < n {
                sup[i] = -self.up[i];
            }
        }
        let mut rhs = vec![0.0; n];
        rhs[iv] = 1.0;
        solve_tridiagonal(&sub, &diag, &sup, &rhs)
    }
}

/// Exact conditioned kernel `P^x{X_t^lambda = y}` on a default window
/// `[x-40, x+80]`, with the leak bound enforced.
pub fn conditioned_kernel(
    p: &WalkParams,
    lambda: f64,
    x: i64,
    y: i64,
    t: f64,
) -> Result<f64> {
    let row = conditioned_row(p, lambda, x, t, x - 40, x + 80)?;
    Ok(row.prob(y))
}

/// Full conditioned row at time `t` from `x` on an explicit window.
pub fn conditioned_row(
    p: &WalkParams,
    lambda: f64,
    x: i64,
    t: f64,
    lo: i64,
    hi: i64,
) -> Result<KernelRow> {
    if !(lambda > 0.0) {
        return Err(Error::domain("conditioned kernel requires lambda > 0"));
    }
    let chain = TruncatedChain::walk(p, lo, hi);
    let base = chain.transition_row(x, t)?;
    if base.leak > 1e-8 {
        return Err(Error::LeakExceeded {
            leak: base.leak,
            bound: 1e-8,
        });
    }
    let r = chain.resolvent_column(lambda, 0)?;
    let rx = r[(x - lo) as usize];
    let decay = (-lambda * t).exp();
    let probs: Vec<f64> = base
        .probs
        .iter()
        .enumerate()
        .map(|(i, &q)| q * decay * r[i] / rx)
        .collect();
    let alive: f64 = probs.iter().sum();
    Ok(KernelRow {
        lo,
        probs,
        killed: 1.0 - alive - base.leak,
        leak: base.leak,
    })
}

/// Death mass of the conditioned walk by time `t`, computed independently of
/// [`conditioned_row`] as `int_0^t lambda e^{-lambda u} P_u(x,0) du / (lambda r_lambda(x,0))`.
pub fn conditioned_death_mass(
    p: &WalkParams,
    lambda: f64,
    x: i64,
    t: f64,
    lo: i64,
    hi: i64,
) -> Result<f64> {
    let chain = TruncatedChain::walk(p, lo, hi);
    let r = chain.resolvent_column(lambda, 0)?;
    let rx = r[(x - lo) as usize];
    let at_zero = |u: f64| -> f64 {
        chain
            .transition_row(x, u)
            .map(|row| row.prob(0))
            .unwrap_or(f64::NAN)
    };
    let integral = crate::quadrature::integrate(
        |u| (-lambda * u).exp() * at_zero(u),
        0.0,
        t,
        crate::quadrature::Tol::new(1e-11, 1e-9),
    )?;
    Ok(integral / rx)
}

/// Exact limit kernel `P^x{X_t^0 = y} = P_t(x,y) h(y)/h(x)` on a window.
pub fn limit_row(p: &WalkParams, x: i64, t: f64, lo: i64, hi: i64) -> Result<KernelRow> {
    let chain = TruncatedChain::walk(p, lo, hi);
    let base = chain.transition_row(x, t)?;
    if base.leak > 1e-8 {
        return Err(Error::LeakExceeded {
            leak: base.leak,
            bound: 1e-8,
        });
    }
    let hx = p.h(x);
    let probs: Vec<f64> = base
        .probs
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let y = lo + i as i64;
            q * p.h(y) / hx
        })
        .collect();
    let alive: f64 = probs.iter().sum();
    Ok(KernelRow {
        lo,
        probs,
        killed: 1.0 - alive - base.leak,
        leak: base.leak,
    })
}

/// Exact limit kernel entry on the default window.
pub fn limit_kernel(p: &WalkParams, x: i64, y: i64, t: f64) -> Result<f64> {
    Ok(limit_row(p, x, t, x - 40, x + 80)?.prob(y))
}

/// Why a simulated chain path ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainDeathCause {
    /// Conditioning clock fired (accepted rejection sample).
    ExponentialClock,
    /// Killed by the state-dependent kill rate.
    StateKill,
    /// Escaped above the escape level: the final, infinite excursion.
    InfiniteExcursion,
    /// Ran into the time horizon.
    Horizon,
}

/// A simulated (possibly killed) chain path: piecewise-constant, with
/// `states[i]` held on `[jump_times[i], jump_times[i+1])`.
#[derive(Clone, Debug)]
pub struct KilledChainPath {
    pub jump_times: Vec<f64>,
    pub states: Vec<i64>,
    pub death_time: Option<f64>,
    pub death_cause: Option<ChainDeathCause>,
}

impl KilledChainPath {
    pub fn final_time(&self) -> f64 {
        self.death_time
            .unwrap_or_else(|| *self.jump_times.last().unwrap())
    }

    /// State occupied at time `t` (before death).
    pub fn state_at(&self, t: f64) -> Option<i64> {
        if let Some(d) = self.death_time {
            if t >= d {
                return None;
            }
        }
        match self
            .jump_times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => Some(self.states[i]),
            Err(0) => None,
            Err(i) => {
                if i > self.states.len() {
                    None
                } else {
                    Some(self.states[i - 1])
                }
            }
        }
    }

    /// Total time spent in `state` before death.
    pub fn occupation(&self, state: i64) -> f64 {
        let end = self.final_time();
        let mut total = 0.0;
        for i in 0..self.states.len() {
            if self.states[i] != state {
                continue;
            }
            let t0 = self.jump_times[i];
            let t1 = if i + 1 < self.jump_times.len() {
                self.jump_times[i + 1]
            } else {
                end
            };
            total += (t1.min(end) - t0).max(0.0);
        }
        total
    }
}

/// Simulation mode for [`simulate_walk`].
#[derive(Clone, Copy, Debug)]
pub enum WalkMode {
    /// The transient base walk, followed until it escapes above
    /// `escape_level` (after which it returns with probability
    /// `(alpha/beta)^{level}`, treated as never).
    Base,
    /// Bang-bang walk killed at rate `beta - alpha` in state 0.
    BangBangKilled,
    /// Base walk conditioned on sitting at 0 at an independent
    /// `Exp(lambda)` time, realized by rejection; the accepted path is
    /// killed at the clock.
    Conditioned { lambda: f64 },
}

/// Knobs for the event-driven sampler.
#[derive(Clone, Copy, Debug)]
pub struct WalkSimConfig {
    /// Escape level above which the base walk is treated as gone for good.
    pub escape_level: i64,
    /// Hard time horizon per path attempt.
    pub horizon: f64,
    /// Proposal budget for the conditioned mode.
    pub rejection_budget: u64,
}

impl Default for WalkSimConfig {
    fn default() -> Self {
        WalkSimConfig {
            escape_level: 40,
            horizon: 1e4,
            rejection_budget: 10_000_000,
        }
    }
}

fn exp_draw(rng: &mut ChaCha12Rng, rate: f64) -> f64 {
    // Inverse transform; random::<f64>() is in [0,1).
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Exact Gillespie simulation of the walk in the requested mode.
pub fn simulate_walk(
    p: &WalkParams,
    x0: i64,
    mode: WalkMode,
    cfg: &WalkSimConfig,
    rng: &mut ChaCha12Rng,
) -> Result<KilledChainPath> {
    match mode {
        WalkMode::Base => Ok(simulate_base(p, x0, cfg, rng, f64::INFINITY).0),
        WalkMode::BangBangKilled => Ok(simulate_bangbang_killed(p, x0, cfg, rng)),
        WalkMode::Conditioned { lambda } => {
            if !(lambda > 0.0) {
                return Err(Error::domain("conditioned mode requires lambda > 0"));
            }
            for _attempt in 0..cfg.rejection_budget {
                let zeta = exp_draw(rng, lambda);
                let (path, alive_state) = simulate_base(p, x0, cfg, rng, zeta);
                if let Some(s) = alive_state {
                    if s == 0 {
                        let mut accepted = path;
                        accepted.death_time = Some(zeta);
                        accepted.death_cause = Some(ChainDeathCause::ExponentialClock);
                        return Ok(accepted);
                    }
                }
            }
            Err(Error::RejectionBudgetExhausted {
                budget: cfg.rejection_budget,
            })
        }
    }
}

/// Base walk run to min(escape, horizon, `cap`). Returns the path and, when
/// the cap was reached first, the state held at the cap.
fn simulate_base(
    p: &WalkParams,
    x0: i64,
    cfg: &WalkSimConfig,
    rng: &mut ChaCha12Rng,
    cap: f64,
) -> (KilledChainPath, Option<i64>) {
    let mut t = 0.0;
    let mut x = x0;
    let mut jump_times = vec![0.0];
    let mut states = vec![x0];
    let total = p.alpha + p.beta;
    loop {
        let hold = exp_draw(rng, total);
        if t + hold >= cap {
            return (
                KilledChainPath {
                    jump_times,
                    states,
                    death_time: None,
                    death_cause: None,
                },
                Some(x),
            );
        }
        t += hold;
        if t >= cfg.horizon {
            return (
                KilledChainPath {
                    jump_times,
                    states,
                    death_time: Some(cfg.horizon),
                    death_cause: Some(ChainDeathCause::Horizon),
                },
                None,
            );
        }
        let u: f64 = rng.random();
        x += if u < p.alpha / total { -1 } else { 1 };
        jump_times.push(t);
        states.push(x);
        if x >= cfg.escape_level {
            return (
                KilledChainPath {
                    jump_times,
                    states,
                    death_time: Some(t),
                    death_cause: Some(ChainDeathCause::InfiniteExcursion),
                },
                None,
            );
        }
    }
}

fn simulate_bangbang_killed(
    p: &WalkParams,
    x0: i64,
    cfg: &WalkSimConfig,
    rng: &mut ChaCha12Rng,
) -> KilledChainPath {
    let mut t = 0.0;
    let mut x = x0;
    let mut jump_times = vec![0.0];
    let mut states = vec![x0];
    loop {
        // At every state the total event rate is alpha + beta: away from 0
        // the two jump rates, at 0 two alpha-jumps plus the kill rate.
        let total = p.alpha + p.beta;
        let hold = exp_draw(rng, total);
        t += hold;
        if t >= cfg.horizon {
            return KilledChainPath {
                jump_times,
                states,
                death_time: Some(cfg.horizon),
                death_cause: Some(ChainDeathCause::Horizon),
            };
        }
        let u: f64 = rng.random();
        if x == 0 {
            let kill_frac = (p.beta - p.alpha) / total;
            if u < kill_frac {
                return KilledChainPath {
                    jump_times,
                    states,
                    death_time: Some(t),
                    death_cause: Some(ChainDeathCause::StateKill),
                };
            }
            let rest = (u - kill_frac) / (1.0 - kill_frac);
            x += if rest < 0.5 { -1 } else { 1 };
        } else if x > 0 {
            x += if u < p.beta / total { -1 } else { 1 };
        } else {
            x += if u < p.alpha / total { -1 } else { 1 };
        }
        jump_times.push(t);
        states.push(x);
    }
}

/// One excursion record from the decomposition at 0.
#[derive(Clone, Copy, Debug)]
pub struct ExcursionRecord {
    /// Time held at 0 before the excursion started.
    pub hold: f64,
    /// Sign of the first step (+1 up, -1 down); `None` when the path ended
    /// during the hold.
    pub sign: Option<i8>,
    /// Duration away from 0; `None` for the final unfinished excursion.
    pub duration: Option<f64>,
    /// Whether the excursion returned to 0.
    pub finite: bool,
}

/// Split a path started at 0 into hold/excursion records at 0.
pub fn excursion_decomposition(path: &KilledChainPath) -> Result<Vec<ExcursionRecord>> {
    if path.states.first() != Some(&0) {
        return Err(Error::domain("excursion decomposition requires a path started at 0"));
    }
    let n = path.states.len();
    let end = path.final_time();
    let mut records = Vec::new();
    let mut i = 0usize;
    while i < n {
        debug_assert_eq!(path.states[i], 0);
        let hold_start = path.jump_times[i];
        let hold_end = if i + 1 < n { path.jump_times[i + 1] } else { end };
        if i + 1 >= n {
            // Path ended while holding at 0 (clock or state kill).
            records.push(ExcursionRecord {
                hold: hold_end - hold_start,
                sign: None,
                duration: None,
                finite: false,
            });
            break;
        }
        let hold = hold_end - hold_start;
        let sign = if path.states[i + 1] > 0 { 1i8 } else { -1i8 };
        // Scan forward for the return to 0.
        let mut j = i + 1;
        while j < n && path.states[j] != 0 {
            j += 1;
        }
        if j < n {
            records.push(ExcursionRecord {
                hold,
                sign: Some(sign),
                duration: Some(path.jump_times[j] - hold_end),
                finite: true,
            });
            i = j;
        } else {
            records.push(ExcursionRecord {
                hold,
                sign: Some(sign),
                duration: None,
                finite: false,
            });
            break;
        }
    }
    Ok(records)
}
