//! Two-step least-squares estimation of the standard and extended models.
//!
//! Step 1 fits `(beta, gamma)` with the global effects switched off. Step 2
//! explains the step-1 residuals (data minus model) compartment by
//! compartment, using the antiderivatives of the forcing terms:
//!
//! ```text
//! S residual  ~ lambda*t
//! I residual  ~ a1*(sin(b1*t + c1) - sin c1) + a2*(sin(b2*t + c2) - sin c2)
//! R residual  ~ p1*t^2 + p2*t
//! ```
//!
//! and then re-minimizes the full-model SSE over all eleven parameters from
//! that starting point.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TimeSeriesTriple;
use crate::models::{
    day_grid, simulate, ExtendedParams, GlobalEffects, InitialState, ModelKind, SirParams,
};
use crate::ode::{IntegratorConfig, Method, OdeError};
use crate::optim::{
    best_of, central_jacobian, levenberg_marquardt, nelder_mead, projected_gradient,
    GradientOptions, LmOptions, NelderMeadOptions, OptimResult, ParamSpec, Problem,
};
use crate::selection::{fitness, FitnessReport, MetricError};
use crate::stats::student_t_quantile;

/// Objective value returned when the model cannot be integrated.
pub const SSE_PENALTY: f64 = 1e30;

/// Minimum series length accepted by [`fit_step1`].
pub const MIN_FIT_DAYS: usize = 30;

/// Frequencies below this mean the I residual has no oscillation to explain.
pub const DEGENERATE_FREQUENCY: f64 = 1e-6;

const PERIODOGRAM_POINTS: usize = 2000;
const PERIODOGRAM_PEAKS: usize = 6;

pub const EXTENDED_NAMES: [&str; 11] = [
    "beta", "gamma", "lambda", "a1", "b1", "c1", "a2", "b2", "c2", "p1", "p2",
];

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("need at least {required} days of data, got {actual}")]
    InsufficientData { required: usize, actual: usize },
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error("sinusoid fit degenerate: frequency {frequency} rad/day collapsed below 1e-6")]
    SinusoidFitDegenerate { frequency: f64 },
    #[error("model integration failed at the fitted parameters: {0}")]
    Integration(#[from] OdeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl EstimationError {
    pub fn category(&self) -> &'static str {
        match self {
            EstimationError::InsufficientData { .. } => "InsufficientData",
            EstimationError::InvalidConfig(_) => "ConfigError",
            EstimationError::SinusoidFitDegenerate { .. } => "SinusoidFitDegenerate",
            EstimationError::Integration(OdeError::NonFiniteState { .. }) => "NonFiniteState",
            EstimationError::Integration(_) => "IntegrationError",
            EstimationError::Metric(MetricError::MismatchedData(_)) => "MismatchedData",
            EstimationError::Metric(_) => "MetricError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Keyword {
    #[serde(rename = "from-data")]
    FromData,
}

/// Initial state of a fit: explicit values or the first data row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialCondition {
    Fixed(InitialState),
    #[serde(with = "from_data")]
    FromData,
}

mod from_data {
    use super::Keyword;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        Keyword::FromData.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        Keyword::deserialize(d).map(|_| ())
    }
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Fixed(InitialState::new(12615.0, 1.0, 300.0))
    }
}

impl InitialCondition {
    pub fn resolve(&self, data: &TimeSeriesTriple) -> Result<InitialState, EstimationError> {
        match self {
            InitialCondition::Fixed(y0) => Ok(*y0),
            InitialCondition::FromData => data
                .first_state()
                .map(|[s, i, r]| InitialState::new(s, i, r))
                .ok_or(EstimationError::InsufficientData {
                    required: 1,
                    actual: 0,
                }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    #[default]
    NelderMead,
    ProjectedGradient,
}

/// Per-compartment SSE weights. Zero weights drop a compartment from the
/// objective, which gives single-compartment fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub susceptible: f64,
    pub infected: f64,
    pub recovered: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            susceptible: 1.0,
            infected: 1.0,
            recovered: 1.0,
        }
    }
}

impl Weights {
    pub fn as_array(&self) -> [f64; 3] {
        [self.susceptible, self.infected, self.recovered]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamBounds {
    pub beta: [f64; 2],
    pub gamma: [f64; 2],
    pub lambda: [f64; 2],
    /// Amplitude upper bound as a multiple of the largest |I residual|.
    pub amplitude_factor: f64,
    pub frequency: [f64; 2],
    pub phase: [f64; 2],
    pub p1: [f64; 2],
    pub p2: [f64; 2],
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            beta: [0.0, 2.0],
            gamma: [0.0, 1.0],
            lambda: [-100.0, 100.0],
            amplitude_factor: 10.0,
            frequency: [1e-4, PI],
            phase: [-PI, PI],
            p1: [-10.0, 10.0],
            p2: [-1000.0, 1000.0],
        }
    }
}

impl ParamBounds {
    fn validate(&self) -> Result<(), EstimationError> {
        let pairs = [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("frequency", self.frequency),
            ("phase", self.phase),
            ("p1", self.p1),
            ("p2", self.p2),
        ];
        for (name, [lo, hi]) in pairs {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(EstimationError::InvalidConfig(format!(
                    "bounds for {name} must be finite with lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        if self.beta[0] < 0.0 || self.gamma[0] < 0.0 {
            return Err(EstimationError::InvalidConfig("beta and gamma bounds must be >= 0".into()));
        }
        if self.frequency[0] <= 0.0 {
            return Err(EstimationError::InvalidConfig("frequency lower bound must be > 0".into()));
        }
        if !(self.amplitude_factor.is_finite() && self.amplitude_factor > 0.0) {
            return Err(EstimationError::InvalidConfig("amplitude_factor must be > 0".into()));
        }
        Ok(())
    }

    fn sir_specs(&self) -> Vec<ParamSpec> {
        vec![
            ParamSpec::log("beta", self.beta[0], self.beta[1], 1e-12),
            ParamSpec::log("gamma", self.gamma[0], self.gamma[1], 1e-14),
        ]
    }

    fn sinusoid_specs(&self, amplitude_max: f64) -> Vec<ParamSpec> {
        let typical = (0.1 * amplitude_max).max(1e-12);
        let mut specs = Vec::with_capacity(6);
        for k in 1..=2 {
            specs.push(ParamSpec::linear(&format!("a{k}"), 0.0, amplitude_max, typical));
            specs.push(ParamSpec::log(
                &format!("b{k}"),
                self.frequency[0],
                self.frequency[1],
                self.frequency[0],
            ));
            specs.push(ParamSpec::periodic(&format!("c{k}"), self.phase[0], self.phase[1]));
        }
        specs
    }

    fn extended_specs(&self, amplitude_max: f64) -> Vec<ParamSpec> {
        let mut specs = self.sir_specs();
        specs.push(ParamSpec::linear("lambda", self.lambda[0], self.lambda[1], 1.0));
        specs.extend(self.sinusoid_specs(amplitude_max));
        specs.push(ParamSpec::linear("p1", self.p1[0], self.p1[1], 0.01));
        specs.push(ParamSpec::linear("p2", self.p2[0], self.p2[1], 1.0));
        specs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub initial_params: SirParams,
    pub bounds: ParamBounds,
    pub y0: InitialCondition,
    pub optimizer: Optimizer,
    /// Relative objective tolerance for the local searches.
    pub obj_tol: f64,
    /// Objective evaluations allowed per local search.
    pub max_evals: usize,
    /// Number of step-1 starts, the first being `initial_params`.
    pub multistart_count: usize,
    /// Seed for the multistart draws. Not serialized: run configurations
    /// carry a single top-level seed.
    #[serde(skip)]
    pub seed: u64,
    pub weights: Weights,
    /// Integrator used inside the objective.
    pub integrator: IntegratorConfig,
    /// Compute linearized 95% intervals after fitting.
    pub confidence_intervals: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            initial_params: SirParams::new(0.5, 0.13),
            bounds: ParamBounds::default(),
            y0: InitialCondition::default(),
            optimizer: Optimizer::NelderMead,
            obj_tol: 1e-8,
            max_evals: 20_000,
            multistart_count: 12,
            seed: 0,
            weights: Weights::default(),
            integrator: IntegratorConfig {
                max_steps: 20_000,
                ..IntegratorConfig::default()
            },
            confidence_intervals: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), EstimationError> {
        self.bounds.validate()?;
        let p = self.initial_params;
        let inside = |v: f64, [lo, hi]: [f64; 2]| v >= lo && v <= hi;
        if !inside(p.beta, self.bounds.beta) || !inside(p.gamma, self.bounds.gamma) {
            return Err(EstimationError::InvalidConfig(format!(
                "initial (beta, gamma) = ({}, {}) lies outside the bounds",
                p.beta, p.gamma
            )));
        }
        if !(self.obj_tol.is_finite() && self.obj_tol > 0.0) {
            return Err(EstimationError::InvalidConfig("obj_tol must be > 0".into()));
        }
        if self.max_evals == 0 || self.multistart_count == 0 {
            return Err(EstimationError::InvalidConfig(
                "max_evals and multistart_count must be >= 1".into(),
            ));
        }
        let w = self.weights.as_array();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().all(|v| *v == 0.0) {
            return Err(EstimationError::InvalidConfig(
                "weights must be finite, nonnegative and not all zero".into(),
            ));
        }
        self.integrator.validate()?;
        Ok(())
    }

    fn nm_options(&self) -> NelderMeadOptions {
        NelderMeadOptions {
            max_evals: self.max_evals,
            f_rel_tol: self.obj_tol,
            ..NelderMeadOptions::default()
        }
    }

    fn local_search<F>(&self, problem: &Problem, f: F, x0: &[f64]) -> OptimResult
    where
        F: Fn(&[f64]) -> f64,
    {
        match self.optimizer {
            Optimizer::NelderMead => nelder_mead(problem, f, x0, &self.nm_options()),
            Optimizer::ProjectedGradient => projected_gradient(
                problem,
                f,
                x0,
                &GradientOptions {
                    max_evals: self.max_evals,
                    f_rel_tol: self.obj_tol,
                    ..GradientOptions::default()
                },
            ),
        }
    }

    /// Integrator for Jacobians and the final polish, where the objective
    /// must be smooth in the parameters.
    fn tight_integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            method: Method::Rk45Adaptive,
            rtol: self.integrator.rtol.min(1e-10),
            atol: self.integrator.atol.min(1e-10),
            max_steps: self.integrator.max_steps.max(100_000),
            ..self.integrator
        }
    }
}

/// Model compartments sampled at days `0..n`.
pub fn model_series(
    params: &ExtendedParams,
    y0: &InitialState,
    n: usize,
    integrator: &IntegratorConfig,
) -> Result<[Vec<f64>; 3], OdeError> {
    if n <= 1 {
        let take = |v: f64| if n == 1 { vec![v] } else { Vec::new() };
        return Ok([take(y0.s0), take(y0.i0), take(y0.r0)]);
    }
    let kind = if params.global.is_inactive() {
        ModelKind::Standard
    } else {
        ModelKind::Extended
    };
    let sim = simulate(kind, params, y0, &day_grid(n - 1), integrator)?;
    let traj = sim.trajectory;
    Ok([traj.component(0), traj.component(1), traj.component(2)])
}

/// Weighted SSE of the model against `data`; [`SSE_PENALTY`] if the model
/// cannot be integrated or produces non-finite values.
pub fn sse_objective(
    params: &ExtendedParams,
    data: &TimeSeriesTriple,
    y0: &InitialState,
    weights: &Weights,
    integrator: &IntegratorConfig,
) -> f64 {
    let Ok(model) = model_series(params, y0, data.len(), integrator) else {
        return SSE_PENALTY;
    };
    let w = weights.as_array();
    let mut total = 0.0;
    for k in 0..3 {
        if w[k] == 0.0 {
            continue;
        }
        let s: f64 = model[k]
            .iter()
            .zip(data.compartment(k))
            .map(|(m, d)| (m - d) * (m - d))
            .sum();
        total += w[k] * s;
    }
    if total.is_finite() {
        total
    } else {
        SSE_PENALTY
    }
}

/// `sqrt(w)·(model − data)`, stacked S then I then R.
fn weighted_residuals(
    params: &ExtendedParams,
    data: &TimeSeriesTriple,
    y0: &InitialState,
    weights: &Weights,
    integrator: &IntegratorConfig,
) -> Option<Vec<f64>> {
    let model = model_series(params, y0, data.len(), integrator).ok()?;
    let w = weights.as_array();
    let mut out = Vec::with_capacity(3 * data.len());
    for k in 0..3 {
        let sw = w[k].sqrt();
        out.extend(model[k].iter().zip(data.compartment(k)).map(|(m, d)| sw * (m - d)));
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

fn params_to_vec(kind: ModelKind, p: &ExtendedParams) -> Vec<f64> {
    let g = &p.global;
    match kind {
        ModelKind::Standard => vec![p.sir.beta, p.sir.gamma],
        ModelKind::Extended => vec![
            p.sir.beta, p.sir.gamma, g.lambda, g.a1, g.b1, g.c1, g.a2, g.b2, g.c2, g.p1, g.p2,
        ],
    }
}

fn params_from_vec(x: &[f64]) -> ExtendedParams {
    let sir = SirParams::new(x[0], x[1]);
    if x.len() == 2 {
        return ExtendedParams::standard(sir);
    }
    ExtendedParams::new(
        sir,
        GlobalEffects {
            lambda: x[2],
            a1: x[3],
            b1: x[4],
            c1: x[5],
            a2: x[6],
            b2: x[7],
            c2: x[8],
            p1: x[9],
            p2: x[10],
        },
    )
}

fn param_names(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Standard => &EXTENDED_NAMES[..2],
        ModelKind::Extended => &EXTENDED_NAMES,
    }
}

/// Symmetric linearized 95% interval. `None` bounds mean unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamInterval {
    pub name: String,
    pub estimate: f64,
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub std_error: Option<f64>,
}

impl ParamInterval {
    fn unbounded(name: &str, estimate: f64) -> Self {
        Self {
            name: name.into(),
            estimate,
            low: None,
            high: None,
            std_error: None,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.low.is_none_or(|lo| v >= lo) && self.high.is_none_or(|hi| v <= hi)
    }

    pub fn half_width(&self) -> Option<f64> {
        Some(0.5 * (self.high? - self.low?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiStatus {
    Ok,
    /// `JᵀJ` is numerically rank deficient; intervals are unbounded.
    SingularInformation,
    /// Fewer observations than parameters plus one.
    InsufficientDof,
    NotComputed,
}

/// Linearized intervals from a residual Jacobian: covariance
/// `σ²(JᵀJ)⁻¹` with `σ² = sse/(n−k)`, half-width `t(0.975, n−k)·SE`.
pub fn linearized_intervals(
    jacobian: &DMatrix<f64>,
    sse: f64,
    names: &[&str],
    estimates: &[f64],
) -> (Vec<ParamInterval>, CiStatus) {
    let n = jacobian.nrows();
    let k = jacobian.ncols();
    let unbounded = || {
        names
            .iter()
            .zip(estimates)
            .map(|(n, &e)| ParamInterval::unbounded(n, e))
            .collect::<Vec<_>>()
    };
    if n <= k {
        return (unbounded(), CiStatus::InsufficientDof);
    }
    if !jacobian.iter().all(|v| v.is_finite()) || !sse.is_finite() {
        return (unbounded(), CiStatus::SingularInformation);
    }
    let scale: Vec<f64> = (0..k).map(|j| jacobian.column(j).norm()).collect();
    if scale.iter().any(|&s| s == 0.0) {
        return (unbounded(), CiStatus::SingularInformation);
    }
    let mut scaled = jacobian.clone();
    for (j, s) in scale.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = scaled.svd(false, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 0.0 || smax / smin > 1e12 {
        return (unbounded(), CiStatus::SingularInformation);
    }
    let vt = svd.v_t.expect("requested V");
    let dof = (n - k) as f64;
    let sigma2 = sse / dof;
    let tq = student_t_quantile(0.975, dof);
    let intervals = (0..k)
        .map(|j| {
            // (JᵀJ)⁻¹_jj = Σ_i (V_ji / s_i)² / scale_j²
            let var: f64 = (0..k).map(|i| (vt[(i, j)] / sv[i]).powi(2)).sum::<f64>() / (scale[j] * scale[j]);
            let se = (sigma2 * var).sqrt();
            let half = tq * se;
            ParamInterval {
                name: names[j].into(),
                estimate: estimates[j],
                low: Some(estimates[j] - half),
                high: Some(estimates[j] + half),
                std_error: Some(se),
            }
        })
        .collect();
    (intervals, CiStatus::Ok)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompartmentSse {
    pub susceptible: f64,
    pub infected: f64,
    pub recovered: f64,
}

/// Data minus model, per compartment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub times: Vec<f64>,
    pub susceptible: Vec<f64>,
    pub infected: Vec<f64>,
    pub recovered: Vec<f64>,
}

impl ResidualSeries {
    pub fn compartment(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.susceptible,
            1 => &self.infected,
            2 => &self.recovered,
            _ => panic!("compartment index {k} out of range"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub params: ExtendedParams,
    pub y0: InitialState,
    pub intervals: Vec<ParamInterval>,
    pub ci_status: CiStatus,
    /// Weighted objective at `params`.
    pub objective: f64,
    /// Unweighted SSE.
    pub sse_total: f64,
    pub sse: CompartmentSse,
    pub residuals: ResidualSeries,
    /// Best objective after each accepted optimizer iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub evaluations: usize,
    /// Step-1 `(beta, gamma)` an extended fit started from.
    pub step1: Option<SirParams>,
    /// Global effects from the residual decomposition, before the joint polish.
    pub decomposition: Option<GlobalEffects>,
    /// `None` if some data compartment is constant (R² undefined).
    pub fitness: Option<FitnessReport>,
}

impl FitResult {
    pub fn interval(&self, name: &str) -> Option<&ParamInterval> {
        self.intervals.iter().find(|c| c.name == name)
    }
}

struct Outcome {
    x: Vec<f64>,
    trace: Vec<f64>,
    converged: bool,
    evaluations: usize,
}

fn finish(
    kind: ModelKind,
    data: &TimeSeriesTriple,
    y0: InitialState,
    config: &FitConfig,
    outcome: Outcome,
) -> Result<FitResult, EstimationError> {
    let params = params_from_vec(&outcome.x);
    let model = model_series(&params, &y0, data.len(), &config.integrator)?;
    let mut residuals = ResidualSeries {
        times: data.days(),
        susceptible: Vec::new(),
        infected: Vec::new(),
        recovered: Vec::new(),
    };
    let mut sse = [0.0; 3];
    for k in 0..3 {
        let r: Vec<f64> = data.compartment(k).iter().zip(&model[k]).map(|(d, m)| d - m).collect();
        if let Some(t) = r.iter().position(|v| !v.is_finite()) {
            return Err(OdeError::NonFiniteState {
                last_good_t: t.saturating_sub(1) as f64,
            }
            .into());
        }
        sse[k] = r.iter().map(|v| v * v).sum();
        match k {
            0 => residuals.susceptible = r,
            1 => residuals.infected = r,
            _ => residuals.recovered = r,
        }
    }
    let w = config.weights.as_array();
    let objective = (0..3).map(|k| w[k] * sse[k]).sum();
    let mut trace = outcome.trace;
    for i in 1..trace.len() {
        trace[i] = trace[i].min(trace[i - 1]);
    }
    let report = fitness(kind, data, [&model[0], &model[1], &model[2]]).ok();
    let names = param_names(kind);
    Ok(FitResult {
        model: kind,
        params,
        y0,
        intervals: names
            .iter()
            .zip(&outcome.x)
            .map(|(n, &e)| ParamInterval::unbounded(n, e))
            .collect(),
        ci_status: CiStatus::NotComputed,
        objective,
        sse_total: sse.iter().sum(),
        sse: CompartmentSse {
            susceptible: sse[0],
            infected: sse[1],
            recovered: sse[2],
        },
        residuals,
        objective_trace: trace,
        converged: outcome.converged,
        evaluations: outcome.evaluations,
        step1: None,
        decomposition: None,
        fitness: report,
    })
}

/// Step 1: box-constrained fit of `(beta, gamma)` with the global effects
/// off, best of `multistart_count` seeded starts.
pub fn fit_step1(data: &TimeSeriesTriple, config: &FitConfig) -> Result<FitResult, EstimationError> {
    config.validate()?;
    if data.len() < MIN_FIT_DAYS {
        return Err(EstimationError::InsufficientData {
            required: MIN_FIT_DAYS,
            actual: data.len(),
        });
    }
    let y0 = config.y0.resolve(data)?;
    let problem = Problem::new(config.bounds.sir_specs());
    let objective = |x: &[f64]| {
        sse_objective(
            &params_from_vec(x),
            data,
            &y0,
            &config.weights,
            &config.integrator,
        )
    };
    let mut starts = vec![vec![config.initial_params.beta, config.initial_params.gamma]];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    starts.extend(problem.sample(&mut rng, config.multistart_count - 1));

    let results: Vec<OptimResult> = starts
        .par_iter()
        .map(|x0| config.local_search(&problem, objective, x0))
        .collect();
    let evaluations = results.iter().map(|r| r.evals).sum();
    let (_, best) = best_of(results).expect("at least one start");
    let mut fit = finish(
        ModelKind::Standard,
        data,
        y0,
        config,
        Outcome {
            x: best.x,
            trace: best.trace,
            converged: best.converged,
            evaluations,
        },
    )?;
    if config.confidence_intervals {
        confidence_intervals(&mut fit, data, config);
    }
    Ok(fit)
}

/// One term `a·(sin(b·t + c) − sin c)` of the anchored I-residual model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Sinusoid {
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * ((self.frequency * t + self.phase).sin() - self.phase.sin())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    /// Sorted by frequency, lowest first.
    pub components: [Sinusoid; 2],
    pub sse: f64,
    pub intervals: Vec<ParamInterval>,
    pub ci_status: CiStatus,
}

/// Least-squares power of the anchored basis `[sin ωt, cos ωt − 1]` at each
/// frequency: the reduction in SSE from fitting that pair alone.
pub fn periodogram(times: &[f64], values: &[f64], frequencies: &[f64]) -> Vec<f64> {
    frequencies
        .iter()
        .map(|&w| {
            let (mut uu, mut uv, mut vv, mut uy, mut vy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (&t, &y) in times.iter().zip(values) {
                let u = (w * t).sin();
                let v = (w * t).cos() - 1.0;
                uu += u * u;
                uv += u * v;
                vv += v * v;
                uy += u * y;
                vy += v * y;
            }
            let det = uu * vv - uv * uv;
            if det > 1e-12 * uu * vv && det > 0.0 {
                let a = (vv * uy - uv * vy) / det;
                let b = (uu * vy - uv * uy) / det;
                a * uy + b * vy
            } else if uu > 0.0 {
                uy * uy / uu
            } else {
                0.0
            }
        })
        .collect()
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Indices of local maxima (endpoints included), strongest first, ties
/// toward the lower frequency.
fn periodogram_peaks(power: &[f64], count: usize) -> Vec<usize> {
    let n = power.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || power[i] >= power[i - 1];
            let right = i + 1 == n || power[i] > power[i + 1];
            left && right
        })
        .collect();
    peaks.sort_by(|&a, &b| power[b].total_cmp(&power[a]).then(a.cmp(&b)));
    peaks.truncate(count);
    peaks
}

fn anchored_design(times: &[f64], b: [f64; 2]) -> DMatrix<f64> {
    DMatrix::from_fn(times.len(), 4, |i, j| {
        let t = times[i];
        let w = b[j / 2];
        if j % 2 == 0 {
            (w * t).sin()
        } else {
            (w * t).cos() - 1.0
        }
    })
}

/// Linear least squares for the four anchored coefficients at fixed
/// frequencies; returns the coefficients and the SSE.
fn projected_fit(times: &[f64], values: &DVector<f64>, b: [f64; 2]) -> (DVector<f64>, f64) {
    let design = anchored_design(times, b);
    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(values, 1e-12 * svd.singular_values.max())
        .unwrap_or_else(|_| DVector::zeros(4));
    let sse = (values - &design * &coef).norm_squared();
    (coef, sse)
}

fn components_from(x: &[f64]) -> [Sinusoid; 2] {
    [
        Sinusoid {
            amplitude: x[0],
            frequency: x[1],
            phase: x[2],
        },
        Sinusoid {
            amplitude: x[3],
            frequency: x[4],
            phase: x[5],
        },
    ]
}

fn sinusoid_jacobian(times: &[f64], x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(times.len(), 6, |i, j| {
        let t = times[i];
        let (a, b, c) = (x[3 * (j / 3)], x[3 * (j / 3) + 1], x[3 * (j / 3) + 2]);
        match j % 3 {
            0 => (b * t + c).sin() - c.sin(),
            1 => a * t * (b * t + c).cos(),
            _ => a * ((b * t + c).cos() - c.cos()),
        }
    })
}

/// Fits `Σ a_k (sin(b_k t + c_k) − sin c_k)` to `values`.
///
/// Frequencies start from the strongest periodogram peaks; each pair of
/// candidate peaks seeds a Nelder-Mead search over the two frequencies with
/// the amplitudes and phases solved linearly, and the best candidate is
/// polished by Levenberg-Marquardt over all six parameters.
pub fn fit_sinusoids(
    times: &[f64],
    values: &[f64],
    bounds: &ParamBounds,
) -> Result<SinusoidFit, EstimationError> {
    if times.len() != values.len() {
        return Err(EstimationError::InvalidConfig(
            "times and values differ in length".into(),
        ));
    }
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        let z = GlobalEffects::zero();
        let components = [
            Sinusoid {
                amplitude: 0.0,
                frequency: z.b1,
                phase: 0.0,
            },
            Sinusoid {
                amplitude: 0.0,
                frequency: z.b2,
                phase: 0.0,
            },
        ];
        let names = ["a1", "b1", "c1", "a2", "b2", "c2"];
        let x = [0.0, z.b1, 0.0, 0.0, z.b2, 0.0];
        return Ok(SinusoidFit {
            components,
            sse: 0.0,
            intervals: names
                .iter()
                .zip(x)
                .map(|(n, e)| ParamInterval::unbounded(n, e))
                .collect(),
            ci_status: CiStatus::NotComputed,
        });
    }
    let y = DVector::from_column_slice(values);
    let [f_lo, f_hi] = bounds.frequency;
    let grid = log_grid(f_lo, f_hi, PERIODOGRAM_POINTS);
    let power = periodogram(times, values, &grid);
    let mut peaks = periodogram_peaks(&power, PERIODOGRAM_PEAKS);
    if peaks.len() < 2 {
        peaks.push(if peaks.first() == Some(&0) { grid.len() - 1 } else { 0 });
    }

    let freq_problem = Problem::new(vec![
        ParamSpec::log("b1", f_lo, f_hi, f_lo),
        ParamSpec::log("b2", f_lo, f_hi, f_lo),
    ]);
    let vp = |b: &[f64]| projected_fit(times, &y, [b[0], b[1]]).1;
    let mut pairs = Vec::new();
    for i in 0..peaks.len() {
        for j in i + 1..peaks.len() {
            pairs.push([grid[peaks[i]], grid[peaks[j]]]);
        }
    }
    let opts = NelderMeadOptions {
        max_evals: 4000,
        f_rel_tol: 1e-12,
        ..NelderMeadOptions::default()
    };
    let candidates: Vec<OptimResult> = pairs
        .par_iter()
        .map(|p| nelder_mead(&freq_problem, vp, p, &opts))
        .collect();
    let (_, best) = best_of(candidates).expect("at least one frequency pair");
    let b = [best.x[0], best.x[1]];
    let (coef, _) = projected_fit(times, &y, b);

    let amplitude_max = bounds.amplitude_factor * peak;
    let problem = Problem::new(bounds.sinusoid_specs(amplitude_max));
    let mut x0 = Vec::with_capacity(6);
    for k in 0..2 {
        let (p, q) = (coef[2 * k], coef[2 * k + 1]);
        // a(sin(bt + c) − sin c) = a cos c · sin bt + a sin c · (cos bt − 1)
        x0.extend([p.hypot(q), b[k], q.atan2(p)]);
    }
    let x0 = problem.project(&x0);
    let residual = |x: &[f64]| -> Option<Vec<f64>> {
        let comps = components_from(x);
        Some(
            times
                .iter()
                .zip(values)
                .map(|(&t, &v)| comps[0].value(t) + comps[1].value(t) - v)
                .collect(),
        )
    };
    let jac = |x: &[f64]| Some(sinusoid_jacobian(times, x));
    let lm = levenberg_marquardt(&problem, residual, Some(jac), &x0, &LmOptions::default());

    let mut components = components_from(&lm.x);
    components.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    for c in &components {
        if c.frequency < DEGENERATE_FREQUENCY {
            return Err(EstimationError::SinusoidFitDegenerate {
                frequency: c.frequency,
            });
        }
    }
    let x: Vec<f64> = components
        .iter()
        .flat_map(|c| [c.amplitude, c.frequency, c.phase])
        .collect();
    let (intervals, ci_status) = linearized_intervals(
        &sinusoid_jacobian(times, &x),
        lm.f,
        &["a1", "b1", "c1", "a2", "b2", "c2"],
        &x,
    );
    Ok(SinusoidFit {
        components,
        sse: lm.f,
        intervals,
        ci_status,
    })
}

/// Through-origin slope of `values` against `times`.
fn origin_slope(times: &[f64], values: &[f64]) -> f64 {
    let tt: f64 = times.iter().map(|t| t * t).sum();
    if tt == 0.0 {
        return 0.0;
    }
    times.iter().zip(values).map(|(t, v)| t * v).sum::<f64>() / tt
}

/// Least squares of `values` on `[t², t]`.
fn quadratic_fit(times: &[f64], values: &[f64]) -> (f64, f64) {
    let (mut s4, mut s3, mut s2, mut y2, mut y1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &v) in times.iter().zip(values) {
        s4 += t.powi(4);
        s3 += t.powi(3);
        s2 += t * t;
        y2 += t * t * v;
        y1 += t * v;
    }
    let det = s4 * s2 - s3 * s3;
    if det.abs() <= 1e-12 * s4 * s2 || det == 0.0 {
        return (0.0, origin_slope(times, values));
    }
    ((s2 * y2 - s3 * y1) / det, (s4 * y1 - s3 * y2) / det)
}

/// Global effects explaining the step-1 residuals, one compartment at a time.
pub fn decompose_residuals(
    residuals: &ResidualSeries,
    bounds: &ParamBounds,
) -> Result<GlobalEffects, EstimationError> {
    let t = &residuals.times;
    let lambda = origin_slope(t, &residuals.susceptible).clamp(bounds.lambda[0], bounds.lambda[1]);
    let (p1, p2) = quadratic_fit(t, &residuals.recovered);
    let sines = fit_sinusoids(t, &residuals.infected, bounds)?;
    let [s1, s2] = sines.components;
    Ok(GlobalEffects {
        lambda,
        a1: s1.amplitude,
        b1: s1.frequency,
        c1: s1.phase,
        a2: s2.amplitude,
        b2: s2.frequency,
        c2: s2.phase,
        p1: p1.clamp(bounds.p1[0], bounds.p1[1]),
        p2: p2.clamp(bounds.p2[0], bounds.p2[1]),
    })
}

/// Step 2: decompose the step-1 residuals into global effects, then polish
/// all eleven parameters jointly against the full-model SSE.
pub fn fit_step2(
    data: &TimeSeriesTriple,
    step1: &FitResult,
    config: &FitConfig,
) -> Result<FitResult, EstimationError> {
    config.validate()?;
    let start_global = decompose_residuals(&step1.residuals, &config.bounds)?;
    let amplitude_max = config.bounds.amplitude_factor
        * step1
            .residuals
            .infected
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
    let start = ExtendedParams::new(step1.params.sir, start_global);
    let mut fit = polish_extended(data, &step1.y0, &start, amplitude_max, config)?;
    fit.step1 = Some(step1.params.sir);
    fit.decomposition = Some(start_global);
    Ok(fit)
}

/// Minimizes the full extended-model SSE over all eleven parameters from
/// `start`: a local search, then Levenberg-Marquardt with a tight integrator.
/// Amplitudes are bounded by `[0, amplitude_max]`.
pub fn polish_extended(
    data: &TimeSeriesTriple,
    y0: &InitialState,
    start: &ExtendedParams,
    amplitude_max: f64,
    config: &FitConfig,
) -> Result<FitResult, EstimationError> {
    config.validate()?;
    let y0 = *y0;
    let problem = Problem::new(config.bounds.extended_specs(amplitude_max));
    let x0 = problem.project(&params_to_vec(ModelKind::Extended, start));

    let objective = |x: &[f64]| {
        sse_objective(
            &params_from_vec(x),
            data,
            &y0,
            &config.weights,
            &config.integrator,
        )
    };
    let tight = config.tight_integrator();
    let residual =
        |x: &[f64]| weighted_residuals(&params_from_vec(x), data, &y0, &config.weights, &tight);
    let lm_options = LmOptions {
        max_iterations: 300,
        f_rel_tol: config.obj_tol,
        fd_rel_step: 1e-6,
    };
    let lm = |x: &[f64]| {
        levenberg_marquardt(
            &problem,
            residual,
            None::<fn(&[f64]) -> Option<DMatrix<f64>>>,
            x,
            &lm_options,
        )
    };

    let mut x = x0;
    let mut best = objective(&x);
    let mut trace = vec![best];
    let mut evaluations = 1;
    // LM first for the smooth descent, the derivative-free search to escape
    // shallow valleys, LM again to settle. LM values are re-scored with the
    // configured integrator so the trace stays on one objective.
    let mut accept = |x: &mut Vec<f64>, r: OptimResult, rescore: bool, trace: &mut Vec<f64>| {
        let value = if rescore { objective(&r.x) } else { r.f };
        if value < best {
            best = value;
            *x = r.x;
            if !rescore {
                trace.extend(r.trace.iter().skip(1));
            }
            trace.push(value);
        }
        r.converged
    };
    let first = lm(&x);
    evaluations += first.evals + 1;
    accept(&mut x, first, true, &mut trace);
    let local = config.local_search(&problem, objective, &x);
    evaluations += local.evals;
    let local_converged = accept(&mut x, local, false, &mut trace);
    let last = lm(&x);
    evaluations += last.evals + 1;
    let lm_converged = accept(&mut x, last, true, &mut trace);
    let converged = local_converged || lm_converged;
    let mut fit = finish(
        ModelKind::Extended,
        data,
        y0,
        config,
        Outcome {
            x,
            trace,
            converged,
            evaluations,
        },
    )?;
    if config.confidence_intervals {
        confidence_intervals(&mut fit, data, config);
    }
    Ok(fit)
}

/// Fills `fit.intervals` with linearized 95% intervals from a
/// central-difference Jacobian of the weighted residuals.
pub fn confidence_intervals(fit: &mut FitResult, data: &TimeSeriesTriple, config: &FitConfig) {
    let kind = fit.model;
    let x = params_to_vec(kind, &fit.params);
    let names = param_names(kind);
    let typical = [1e-4, 1e-4, 1.0, 1.0, 1e-2, 1.0, 1.0, 1e-2, 1.0, 1e-2, 1.0];
    let problem = Problem::new(
        names
            .iter()
            .zip(typical)
            .map(|(n, t)| ParamSpec::linear(n, f64::NEG_INFINITY, f64::INFINITY, t))
            .collect(),
    );
    let tight = config.tight_integrator();
    let y0 = fit.y0;
    let residual = |p: &[f64]| weighted_residuals(&params_from_vec(p), data, &y0, &config.weights, &tight);
    let (intervals, status) = match central_jacobian(&problem, &residual, &x, 1e-6) {
        Some(jac) => linearized_intervals(&jac, fit.objective, names, &x),
        None => (
            names
                .iter()
                .zip(&x)
                .map(|(n, &e)| ParamInterval::unbounded(n, e))
                .collect(),
            CiStatus::SingularInformation,
        ),
    };
    fit.intervals = intervals;
    fit.ci_status = status;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepFit {
    pub standard: FitResult,
    pub extended: FitResult,
}

/// Runs step 1 and step 2. Step 1 is itself the least-squares fit of the
/// standard model, so it doubles as the standard-model result.
pub fn two_step_fit(data: &TimeSeriesTriple, config: &FitConfig) -> Result<TwoStepFit, EstimationError> {
    let standard = fit_step1(data, config)?;
    let extended = fit_step2(data, &standard, config)?;
    Ok(TwoStepFit { standard, extended })
}
