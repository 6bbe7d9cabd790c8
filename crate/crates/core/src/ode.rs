//! Initial-value-problem integrators.
//!
//! Two methods are provided: classical fixed-step RK4 and the adaptive
//! Dormand-Prince 5(4) pair with its standard continuous extension. Both
//! return the solution sampled exactly at caller-supplied times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Right-hand side of `dy/dt = F(t, y)`.
pub trait OdeSystem {
    fn dimension(&self) -> usize;

    /// Writes `F(t, y)` into `dydt`. Both slices have length `dimension()`.
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]);
}

impl<S: OdeSystem + ?Sized> OdeSystem for &S {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        (**self).rhs(t, y, dydt)
    }
}

/// Adapter turning a closure into an [`OdeSystem`].
pub struct FnSystem<F> {
    dimension: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        (self.f)(t, y, dydt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Step length in days, fixed-step mode only.
    pub step: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk45Adaptive,
            step: 0.1,
            rtol: 1e-6,
            atol: 1e-8,
            max_steps: 100_000,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        Self {
            method: Method::Rk4Fixed,
            step,
            ..Self::default()
        }
    }

    pub fn rk45(rtol: f64, atol: f64) -> Self {
        Self {
            method: Method::Rk45Adaptive,
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.step) {
            return Err(OdeError::InvalidConfig(format!("step must be > 0, got {}", self.step)));
        }
        if !ok(self.rtol) || !ok(self.atol) {
            return Err(OdeError::InvalidConfig(format!(
                "rtol and atol must be > 0, got rtol={} atol={}",
                self.rtol, self.atol
            )));
        }
        if self.max_steps == 0 {
            return Err(OdeError::InvalidConfig("max_steps must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("invalid time span [{t0}, {t1}]: need finite t0 < t1")]
    InvalidSpan { t0: f64, t1: f64 },
    #[error("invalid sample times: {0}")]
    InvalidSampleTimes(String),
    #[error("state dimension mismatch: system has {expected}, initial state has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("initial state is not finite")]
    NonFiniteInitialState,
    #[error("step limit of {max_steps} reached at t = {t}")]
    StepLimitExceeded { max_steps: usize, t: f64 },
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("non-finite state produced; last good time t = {last_good_t}")]
    NonFiniteState { last_good_t: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
    /// Largest scaled error norm among accepted steps (0 for fixed-step runs).
    pub max_error_estimate: f64,
}

/// Solution sampled at a strictly increasing set of times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    dimension: usize,
    states: Vec<f64>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, index: usize) -> &[f64] {
        &self.states[index * self.dimension..(index + 1) * self.dimension]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dimension)
    }

    /// Values of one state component across all sample times.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.states().map(|s| s[j]).collect()
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states().last()
    }
}

/// Integrates `system` from `t_span.0` to `t_span.1` starting at `y0`, and
/// returns the solution at every entry of `sample_times`.
pub fn integrate<S: OdeSystem + ?Sized>(
    system: &S,
    y0: &[f64],
    t_span: (f64, f64),
    sample_times: &[f64],
    config: &IntegratorConfig,
) -> Result<Trajectory, OdeError> {
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
        return Err(OdeError::InvalidSpan { t0, t1 });
    }
    if y0.len() != system.dimension() {
        return Err(OdeError::DimensionMismatch {
            expected: system.dimension(),
            found: y0.len(),
        });
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::NonFiniteInitialState);
    }
    config.validate()?;
    check_samples(sample_times, t0, t1)?;

    let mut out = Sampler::new(sample_times, y0.len());
    let stats = match config.method {
        Method::Rk4Fixed => rk4_fixed(system, y0, t0, t1, config, &mut out)?,
        Method::Rk45Adaptive => dopri5(system, y0, t0, t1, config, &mut out)?,
    };
    debug_assert!(out.done());
    Ok(Trajectory {
        times: sample_times.to_vec(),
        dimension: y0.len(),
        states: out.states,
        stats,
    })
}

fn check_samples(samples: &[f64], t0: f64, t1: f64) -> Result<(), OdeError> {
    if let Some(bad) = samples.iter().find(|&&s| !(s >= t0 && s <= t1)) {
        return Err(OdeError::InvalidSampleTimes(format!(
            "{bad} lies outside [{t0}, {t1}]"
        )));
    }
    if samples.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OdeError::InvalidSampleTimes("times must be strictly increasing".into()));
    }
    Ok(())
}

struct Sampler<'a> {
    times: &'a [f64],
    next: usize,
    states: Vec<f64>,
}

impl<'a> Sampler<'a> {
    fn new(times: &'a [f64], dim: usize) -> Self {
        Self {
            times,
            next: 0,
            states: Vec::with_capacity(times.len() * dim),
        }
    }

    fn peek(&self) -> Option<f64> {
        self.times.get(self.next).copied()
    }

    fn push(&mut self, y: &[f64]) {
        self.states.extend_from_slice(y);
        self.next += 1;
    }

    fn done(&self) -> bool {
        self.next == self.times.len()
    }
}

fn all_finite(y: &[f64]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn rk4_step<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[f64],
    h: f64,
    out: &mut [f64],
    work: &mut [Vec<f64>; 5],
) {
    let n = y.len();
    let [k1, k2, k3, k4, tmp] = work;
    system.rhs(t, y, k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    system.rhs(t + 0.5 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    system.rhs(t + 0.5 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    system.rhs(t + h, tmp, k4);
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Grid points are `t0 + k*step`; the last interval is shortened to end at
/// `t1`. Samples falling strictly inside an interval are reached with one
/// extra RK4 sub-step from the interval's left end, leaving the grid intact.
fn rk4_fixed<S: OdeSystem + ?Sized>(
    system: &S,
    y0: &[f64],
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
    out: &mut Sampler<'_>,
) -> Result<IntegratorStats, OdeError> {
    let h = config.step;
    let n_steps = (((t1 - t0) / h) - 1e-9).ceil().max(1.0) as usize;
    if n_steps > config.max_steps {
        return Err(OdeError::StepLimitExceeded {
            max_steps: config.max_steps,
            t: t0,
        });
    }
    let dim = y0.len();
    let mut work: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; dim]);
    let mut y = y0.to_vec();
    let mut y_next = vec![0.0; dim];
    let mut y_sub = vec![0.0; dim];
    let mut stats = IntegratorStats::default();

    for k in 0..n_steps {
        let t = t0 + k as f64 * h;
        let t_next = if k + 1 == n_steps { t1 } else { t0 + (k + 1) as f64 * h };
        while let Some(s) = out.peek() {
            if s >= t_next {
                break;
            }
            if s == t {
                out.push(&y);
            } else {
                rk4_step(system, t, &y, s - t, &mut y_sub, &mut work);
                stats.rhs_evals += 4;
                if !all_finite(&y_sub) {
                    return Err(OdeError::NonFiniteState { last_good_t: t });
                }
                out.push(&y_sub);
            }
        }
        rk4_step(system, t, &y, t_next - t, &mut y_next, &mut work);
        stats.rhs_evals += 4;
        stats.steps += 1;
        if !all_finite(&y_next) {
            return Err(OdeError::NonFiniteState { last_good_t: t });
        }
        std::mem::swap(&mut y, &mut y_next);
    }
    while out.peek().is_some() {
        out.push(&y);
    }
    Ok(stats)
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
// PI controller exponents (Gustafsson-style, as in Hairer's DOPRI5).
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;

fn scaled_norm(v: &[f64], y: &[f64], y_other: &[f64], rtol: f64, atol: f64) -> f64 {
    let sum: f64 = v
        .iter()
        .zip(y.iter().zip(y_other))
        .map(|(&e, (&a, &b))| {
            let sk = atol + rtol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (sum / v.len() as f64).sqrt()
}

fn initial_step<S: OdeSystem + ?Sized>(
    system: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    config: &IntegratorConfig,
) -> f64 {
    let d0 = scaled_norm(y0, y0, y0, config.rtol, config.atol);
    let d1 = scaled_norm(f0, y0, y0, config.rtol, config.atol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    system.rhs(t0 + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled_norm(&diff, y0, y0, config.rtol, config.atol) / h0;
    let dmax = d1.max(d2);
    let h1 = if !dmax.is_finite() {
        h0 * 1e-3
    } else if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(span)
}

fn dopri5<S: OdeSystem + ?Sized>(
    system: &S,
    y0: &[f64],
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
    out: &mut Sampler<'_>,
) -> Result<IntegratorStats, OdeError> {
    let n = y0.len();
    let (rtol, atol) = (config.rtol, config.atol);
    let mut stats = IntegratorStats::default();

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    system.rhs(t0, &y, &mut k1);
    stats.rhs_evals += 1;
    if !all_finite(&k1) {
        return Err(OdeError::NonFiniteState { last_good_t: t0 });
    }
    while out.peek() == Some(t0) {
        out.push(&y);
    }

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err_vec = vec![0.0; n];
    let mut dense = vec![0.0; n];
    let mut y_sample = vec![0.0; n];

    let mut t = t0;
    let mut h = initial_step(system, t0, &y, &k1, t1 - t0, config);
    stats.rhs_evals += 1;
    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;
    let mut attempts = 0usize;

    while t < t1 {
        if attempts >= config.max_steps {
            return Err(OdeError::StepLimitExceeded {
                max_steps: config.max_steps,
                t,
            });
        }
        attempts += 1;
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(OdeError::StepSizeUnderflow { t });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }

        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        system.rhs(t + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        system.rhs(t + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        system.rhs(t + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        system.rhs(t + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t1 } else { t + h };
        system.rhs(t_new, &tmp, &mut k6);
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        system.rhs(t_new, &y_new, &mut k7);
        stats.rhs_evals += 6;

        if !all_finite(&y_new) || !all_finite(&k7) {
            return Err(OdeError::NonFiniteState { last_good_t: t });
        }

        for i in 0..n {
            err_vec[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = scaled_norm(&err_vec, &y, &y_new, rtol, atol);
        if !err.is_finite() {
            return Err(OdeError::NonFiniteState { last_good_t: t });
        }

        if err <= 1.0 {
            let err_c = err.max(1e-10);
            let mut factor = SAFETY * err_c.powf(-ALPHA) * err_old.powf(BETA);
            factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
            if last_rejected {
                factor = factor.min(1.0);
            }
            err_old = err_c;

            // Dense output over (t, t_new].
            while let Some(s) = out.peek() {
                if s > t_new {
                    break;
                }
                if s == t_new {
                    out.push(&y_new);
                    continue;
                }
                let theta = (s - t) / h;
                let theta1 = 1.0 - theta;
                for i in 0..n {
                    dense[i] = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    let r4 = ydiff - h * k7[i] - bspl;
                    y_sample[i] =
                        y[i] + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * dense[i])));
                }
                if !all_finite(&y_sample) {
                    return Err(OdeError::NonFiniteState { last_good_t: t });
                }
                out.push(&y_sample);
            }

            stats.steps += 1;
            stats.max_error_estimate = stats.max_error_estimate.max(err);
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            h *= factor;
            last_rejected = false;
        } else {
            stats.rejected_steps += 1;
            let factor = (SAFETY * err.powf(-ALPHA)).clamp(MIN_FACTOR, 1.0);
            h *= factor;
            last_rejected = true;
        }
    }
    Ok(stats)
}
