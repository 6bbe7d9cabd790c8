//! Standard SIR and the globally-forced extended SIR.
//!
//! State vectors are ordered `[S, I, R]` in persons, time in days since the
//! first observation. The extended model adds three exogenous inflow terms:
//!
//! ```text
//! dS/dt = -beta*S*I           + f(t)     f(t) = lambda
//! dI/dt =  beta*S*I - gamma*I + g(t)     g(t) = a1*b1*cos(b1*t + c1) + a2*b2*cos(b2*t + c2)
//! dR/dt =  gamma*I            + h(t)     h(t) = 2*p1*t + p2
//! ```

use serde::{Deserialize, Serialize};

use crate::ode::{integrate, IntegratorConfig, OdeError, OdeSystem, Trajectory};

pub const S: usize = 0;
pub const I: usize = 1;
pub const R: usize = 2;

/// Local transmission and recovery rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SirParams {
    /// Per-person per-day transmission rate (mass action).
    pub beta: f64,
    /// Per-day recovery rate.
    pub gamma: f64,
}

impl SirParams {
    pub fn new(beta: f64, gamma: f64) -> Self {
        Self { beta, gamma }
    }

    pub fn is_valid(&self) -> bool {
        self.beta.is_finite() && self.gamma.is_finite() && self.beta >= 0.0 && self.gamma >= 0.0
    }
}

/// Parameters of the three global-effect inflow functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalEffects {
    /// Net constant susceptible inflow, persons/day. May be negative.
    pub lambda: f64,
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl Default for GlobalEffects {
    fn default() -> Self {
        Self::zero()
    }
}

impl GlobalEffects {
    /// No global effects. Frequencies are kept at 1 rad/day so the record
    /// stays valid; with zero amplitudes they have no influence.
    pub fn zero() -> Self {
        Self {
            lambda: 0.0,
            a1: 0.0,
            b1: 1.0,
            c1: 0.0,
            a2: 0.0,
            b2: 1.0,
            c2: 0.0,
            p1: 0.0,
            p2: 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        let all = [
            self.lambda, self.a1, self.b1, self.c1, self.a2, self.b2, self.c2, self.p1, self.p2,
        ];
        all.iter().all(|v| v.is_finite()) && self.b1 > 0.0 && self.b2 > 0.0
    }

    /// True when every inflow function is identically zero.
    pub fn is_inactive(&self) -> bool {
        self.lambda == 0.0 && self.a1 == 0.0 && self.a2 == 0.0 && self.p1 == 0.0 && self.p2 == 0.0
    }

    /// Net inflow of travellers returning uninfected.
    pub fn f(&self, _t: f64) -> f64 {
        self.lambda
    }

    /// Inflow of travellers returning infected.
    pub fn g(&self, t: f64) -> f64 {
        self.a1 * self.b1 * (self.b1 * t + self.c1).cos()
            + self.a2 * self.b2 * (self.b2 * t + self.c2).cos()
    }

    /// Inflow of travellers returning recovered.
    pub fn h(&self, t: f64) -> f64 {
        2.0 * self.p1 * t + self.p2
    }

    /// `∫₀ᵗ f`.
    pub fn f_integral(&self, t: f64) -> f64 {
        self.lambda * t
    }

    /// `∫₀ᵗ g`.
    pub fn g_integral(&self, t: f64) -> f64 {
        self.a1 * ((self.b1 * t + self.c1).sin() - self.c1.sin())
            + self.a2 * ((self.b2 * t + self.c2).sin() - self.c2.sin())
    }

    /// `∫₀ᵗ h`.
    pub fn h_integral(&self, t: f64) -> f64 {
        self.p1 * t * t + self.p2 * t
    }
}

pub fn global_f(t: f64, g: &GlobalEffects) -> f64 {
    g.f(t)
}

pub fn global_g(t: f64, g: &GlobalEffects) -> f64 {
    g.g(t)
}

pub fn global_h(t: f64, g: &GlobalEffects) -> f64 {
    g.h(t)
}

/// Full parameter set of the extended model. Serializes flat, with field
/// names `beta, gamma, lambda, a1, b1, c1, a2, b2, c2, p1, p2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedParams {
    #[serde(flatten)]
    pub sir: SirParams,
    #[serde(flatten)]
    pub global: GlobalEffects,
}

impl ExtendedParams {
    pub fn new(sir: SirParams, global: GlobalEffects) -> Self {
        Self { sir, global }
    }

    pub fn standard(sir: SirParams) -> Self {
        Self {
            sir,
            global: GlobalEffects::zero(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.sir.is_valid() && self.global.is_valid()
    }
}

/// `F(t, [S,I,R]) = [-βSI, βSI - γI, γI]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardSir {
    pub params: SirParams,
}

impl OdeSystem for StandardSir {
    fn dimension(&self) -> usize {
        3
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        let SirParams { beta, gamma } = self.params;
        let infection = beta * y[S] * y[I];
        let recovery = gamma * y[I];
        dydt[S] = -infection;
        dydt[I] = infection - recovery;
        dydt[R] = recovery;
    }
}

/// Standard SIR plus the forcing terms `f`, `g`, `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedSir {
    pub params: ExtendedParams,
}

impl OdeSystem for ExtendedSir {
    fn dimension(&self) -> usize {
        3
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        let SirParams { beta, gamma } = self.params.sir;
        let g = &self.params.global;
        let infection = beta * y[S] * y[I];
        let recovery = gamma * y[I];
        dydt[S] = -infection + g.f(t);
        dydt[I] = infection - recovery + g.g(t);
        dydt[R] = recovery + g.h(t);
    }
}

pub fn standard_sir_rhs(params: SirParams) -> StandardSir {
    StandardSir { params }
}

pub fn extended_sir_rhs(params: ExtendedParams) -> ExtendedSir {
    ExtendedSir { params }
}

/// Which right-hand side to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Standard,
    Extended,
}

impl ModelKind {
    /// Number of free parameters in the model.
    pub fn parameter_count(self) -> usize {
        match self {
            ModelKind::Standard => 2,
            ModelKind::Extended => 11,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Standard => "standard",
            ModelKind::Extended => "extended",
        })
    }
}

/// Initial compartment sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub s0: f64,
    pub i0: f64,
    pub r0: f64,
}

impl InitialState {
    pub fn new(s0: f64, i0: f64, r0: f64) -> Self {
        Self { s0, i0, r0 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.s0, self.i0, self.r0]
    }

    pub fn total(&self) -> f64 {
        self.s0 + self.i0 + self.r0
    }
}

/// A simulated run together with a positivity flag.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory,
    /// False if any compartment dipped below zero at a sample time. The
    /// extended model does not constrain positivity (negative `lambda` is
    /// legal), so this is reported rather than enforced.
    pub nonnegative: bool,
}

/// Integrates the chosen model from `t = 0` and samples it at `times`.
pub fn simulate(
    kind: ModelKind,
    params: &ExtendedParams,
    y0: &InitialState,
    times: &[f64],
    config: &IntegratorConfig,
) -> Result<Simulation, OdeError> {
    let t_end = times.last().copied().unwrap_or(0.0);
    let span = (0.0, t_end);
    let y0 = y0.as_array();
    let trajectory = match kind {
        ModelKind::Standard => integrate(&standard_sir_rhs(params.sir), &y0, span, times, config)?,
        ModelKind::Extended => integrate(&extended_sir_rhs(*params), &y0, span, times, config)?,
    };
    let nonnegative = trajectory.states().all(|s| s.iter().all(|&v| v >= 0.0));
    Ok(Simulation {
        trajectory,
        nonnegative,
    })
}

/// Integer day grid `0, 1, ..., days`.
pub fn day_grid(days: usize) -> Vec<f64> {
    (0..=days).map(|d| d as f64).collect()
}

/// Reference estimates for the Kansas City data, used throughout the tests and
/// by the sample data generator.
pub mod reference {
    use super::*;

    pub const KC_INITIAL: InitialState = InitialState {
        s0: 12615.0,
        i0: 1.0,
        r0: 300.0,
    };

    pub const STEP1: SirParams = SirParams {
        beta: 0.0816,
        gamma: 1.3e-11,
    };

    pub const STEP2: SirParams = SirParams {
        beta: 0.0043,
        gamma: 2.8e-11,
    };

    pub const GLOBAL: GlobalEffects = GlobalEffects {
        lambda: -2.6630,
        a1: 97.41,
        b1: 0.008485,
        c1: 2.759,
        a2: 24.12,
        b2: 0.04181,
        c2: -2.359,
        p1: 0.3012,
        p2: -22.02,
    };

    pub fn extended() -> ExtendedParams {
        ExtendedParams::new(STEP2, GLOBAL)
    }
}
