//! Box-constrained local optimizers and a seeded multistart driver.
//!
//! Parameters are described by [`ParamSpec`]s. Nelder-Mead and projected
//! gradient search run in an internal coordinate system (log for rate
//! constants, identity otherwise) and project back into the box before every
//! objective evaluation, so the objective never sees an out-of-bounds point.
//! Levenberg-Marquardt works on least-squares residuals in the original
//! coordinates with Marquardt diagonal scaling.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scale {
    Linear,
    /// Searched as `ln(max(x, floor))`.
    Log { floor: f64 },
    /// Wraps into `[lower, upper)` instead of clamping.
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
    /// Magnitude used when the current value is near zero (finite-difference
    /// steps, initial simplex size).
    pub typical: f64,
}

impl ParamSpec {
    pub fn linear(name: &str, lower: f64, upper: f64, typical: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            scale: Scale::Linear,
            typical,
        }
    }

    pub fn log(name: &str, lower: f64, upper: f64, floor: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            scale: Scale::Log { floor },
            typical: floor.max(lower),
        }
    }

    pub fn periodic(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            scale: Scale::Periodic,
            typical: 1.0,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// Maps an arbitrary value into the box.
    pub fn project(&self, x: f64) -> f64 {
        match self.scale {
            Scale::Periodic => wrap(x, self.lower, self.upper),
            _ => x.clamp(self.lower, self.upper),
        }
    }

    fn to_internal(&self, x: f64) -> f64 {
        match self.scale {
            Scale::Log { floor } => x.max(floor).max(self.lower).ln(),
            _ => x,
        }
    }

    fn to_external(&self, u: f64) -> f64 {
        match self.scale {
            Scale::Log { .. } => u.exp().clamp(self.lower, self.upper),
            Scale::Periodic => wrap(u, self.lower, self.upper),
            Scale::Linear => u.clamp(self.lower, self.upper),
        }
    }

    fn internal_bounds(&self) -> (f64, f64) {
        match self.scale {
            Scale::Log { floor } => (floor.max(self.lower).ln(), self.upper.ln()),
            _ => (self.lower, self.upper),
        }
    }

    fn project_internal(&self, u: f64) -> f64 {
        match self.scale {
            Scale::Periodic => u,
            _ => {
                let (lo, hi) = self.internal_bounds();
                u.clamp(lo, hi)
            }
        }
    }

    fn initial_step(&self, u: f64) -> f64 {
        let (lo, hi) = self.internal_bounds();
        let step = match self.scale {
            Scale::Log { .. } => 0.5,
            Scale::Periodic => 0.05 * (hi - lo),
            Scale::Linear => (0.05 * u.abs().max(self.typical)).min(0.25 * (hi - lo)),
        };
        if matches!(self.scale, Scale::Periodic) || u + step <= hi {
            step
        } else {
            -step
        }
    }
}

/// Wraps `x` into `[lower, upper)`.
pub fn wrap(x: f64, lower: f64, upper: f64) -> f64 {
    let width = upper - lower;
    let w = lower + (x - lower).rem_euclid(width);
    if w >= upper {
        lower
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub specs: Vec<ParamSpec>,
}

impl Problem {
    pub fn new(specs: Vec<ParamSpec>) -> Self {
        Self { specs }
    }

    pub fn dim(&self) -> usize {
        self.specs.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.specs.iter().zip(x).all(|(s, &v)| s.contains(v))
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.specs.iter().zip(x).map(|(s, &v)| s.project(v)).collect()
    }

    fn to_internal(&self, x: &[f64]) -> Vec<f64> {
        self.specs.iter().zip(x).map(|(s, &v)| s.to_internal(s.project(v))).collect()
    }

    fn to_external(&self, u: &[f64]) -> Vec<f64> {
        self.specs.iter().zip(u).map(|(s, &v)| s.to_external(v)).collect()
    }

    fn project_internal(&self, u: &mut [f64]) {
        for (s, v) in self.specs.iter().zip(u.iter_mut()) {
            *v = s.project_internal(*v);
        }
    }

    /// Draws `count` points uniformly in internal coordinates (log-uniform
    /// for log-scaled parameters).
    pub fn sample(&self, rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                let u: Vec<f64> = self
                    .specs
                    .iter()
                    .map(|s| {
                        let (lo, hi) = s.internal_bounds();
                        rng.random_range(lo..=hi)
                    })
                    .collect();
                self.to_external(&u)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration; nonincreasing.
    pub trace: Vec<f64>,
}

/// Picks the lowest objective, breaking ties toward the earlier entry.
pub fn best_of(results: Vec<OptimResult>) -> Option<(usize, OptimResult)> {
    results
        .into_iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, OptimResult)>, (i, r)| match acc {
            Some((j, best)) if !(r.f < best.f) => Some((j, best)),
            _ => Some((i, r)),
        })
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when `f_worst - f_best <= f_rel_tol·|f_best| + f_abs_tol`.
    pub f_rel_tol: f64,
    pub f_abs_tol: f64,
    /// ... or when the simplex diameter (internal units) drops below this.
    pub x_tol: f64,
    /// Fresh-simplex restarts from the best vertex after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            f_rel_tol: 1e-8,
            f_abs_tol: 1e-12,
            x_tol: 1e-10,
            restarts: 2,
        }
    }
}

/// Bounded Nelder-Mead with dimension-adaptive coefficients.
pub fn nelder_mead<F>(problem: &Problem, f: F, x0: &[f64], opts: &NelderMeadOptions) -> OptimResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = problem.dim();
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    let counter = Cell::new(0usize);
    let eval = |u: &[f64]| {
        counter.set(counter.get() + 1);
        sanitize(f(&problem.to_external(u)))
    };

    let mut best_u = problem.to_internal(x0);
    let mut best_f = eval(&best_u);
    let mut trace = vec![best_f];
    let mut iterations = 0;
    let mut converged = false;

    for round in 0..=opts.restarts {
        let round_start_f = best_f;
        let mut simplex: Vec<Vec<f64>> = vec![best_u.clone()];
        for j in 0..n {
            let mut u = best_u.clone();
            u[j] += problem.specs[j].initial_step(u[j]);
            problem.project_internal(&mut u);
            simplex.push(u);
        }
        let mut values: Vec<f64> = Vec::with_capacity(n + 1);
        values.push(best_f);
        for u in simplex.iter().skip(1) {
            values.push(eval(u));
        }
        converged = false;

        while counter.get() < opts.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();
            iterations += 1;
            trace.push(values[0].min(*trace.last().unwrap()));

            let spread = values[n] - values[0];
            let diameter = simplex
                .iter()
                .skip(1)
                .flat_map(|u| u.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if (values[0].is_finite() && spread <= opts.f_rel_tol * values[0].abs() + opts.f_abs_tol)
                || diameter <= opts.x_tol
            {
                converged = true;
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|u| u[j]).sum::<f64>() / nf)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                let mut u: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + t * (c - w))
                    .collect();
                problem.project_internal(&mut u);
                u
            };

            let xr = along(alpha);
            let fr = eval(&xr);
            if fr < values[0] {
                let xe = along(alpha * gamma);
                let fe = eval(&xe);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
                continue;
            }
            let (xc, fc) = if fr < values[n] {
                let xc = along(alpha * rho);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
                continue;
            }
            for i in 1..=n {
                let mut u: Vec<f64> = simplex[0]
                    .iter()
                    .zip(&simplex[i])
                    .map(|(b, x)| b + sigma * (x - b))
                    .collect();
                problem.project_internal(&mut u);
                values[i] = eval(&u);
                simplex[i] = u;
            }
        }

        let (i_best, &f_round) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        if f_round <= best_f {
            best_f = f_round;
            best_u = simplex[i_best].clone();
        }
        if counter.get() >= opts.max_evals {
            break;
        }
        let gain = round_start_f - best_f;
        if round > 0 && gain <= opts.f_rel_tol * best_f.abs() + opts.f_abs_tol {
            break;
        }
    }
    OptimResult {
        x: problem.to_external(&best_u),
        f: best_f,
        evals: counter.get(),
        iterations,
        converged,
        trace,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientOptions {
    pub max_evals: usize,
    pub f_rel_tol: f64,
    /// Central-difference step in internal units.
    pub fd_step: f64,
}

impl Default for GradientOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            f_rel_tol: 1e-10,
            fd_step: 1e-6,
        }
    }
}

/// Projected steepest descent with Armijo backtracking, in internal
/// coordinates.
pub fn projected_gradient<F>(
    problem: &Problem,
    f: F,
    x0: &[f64],
    opts: &GradientOptions,
) -> OptimResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = problem.dim();
    let counter = Cell::new(0usize);
    let eval = |u: &[f64]| {
        counter.set(counter.get() + 1);
        sanitize(f(&problem.to_external(u)))
    };
    let mut u = problem.to_internal(x0);
    let mut fu = eval(&u);
    let mut trace = vec![fu];
    let mut iterations = 0;
    let mut converged = false;
    let mut step = 1.0;

    while counter.get() + 2 * n + 1 < opts.max_evals && fu.is_finite() {
        iterations += 1;
        let mut grad = vec![0.0; n];
        for j in 0..n {
            let h = opts.fd_step * u[j].abs().max(1.0);
            let mut up = u.clone();
            up[j] += h;
            let mut dn = u.clone();
            dn[j] -= h;
            problem.project_internal(&mut up);
            problem.project_internal(&mut dn);
            let width = up[j] - dn[j];
            grad[j] = if width > 0.0 {
                (eval(&up) - eval(&dn)) / width
            } else {
                0.0
            };
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 || !gnorm.is_finite() {
            converged = gnorm == 0.0;
            break;
        }
        let mut accepted = false;
        while step * gnorm > 1e-14 && counter.get() < opts.max_evals {
            let mut trial: Vec<f64> = u.iter().zip(&grad).map(|(x, g)| x - step * g / gnorm).collect();
            problem.project_internal(&mut trial);
            let moved: f64 = trial.iter().zip(&u).zip(&grad).map(|((t, x), g)| g * (x - t)).sum();
            let ft = eval(&trial);
            if moved > 0.0 && ft <= fu - 1e-4 * moved {
                let decrease = fu - ft;
                u = trial;
                fu = ft;
                step *= 2.0;
                accepted = true;
                if decrease <= opts.f_rel_tol * fu.abs() {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        trace.push(fu);
        if !accepted {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    OptimResult {
        x: problem.to_external(&u),
        f: fu,
        evals: counter.get(),
        iterations,
        converged,
        trace,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub f_rel_tol: f64,
    /// Relative forward-difference step for numerical Jacobians.
    pub fd_rel_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            f_rel_tol: 1e-12,
            fd_rel_step: 1e-6,
        }
    }
}

/// Forward-difference Jacobian of `residuals` at `x`. Steps are taken inward
/// at the upper bound. Returns `None` if any perturbed evaluation fails.
pub fn numerical_jacobian<R>(
    problem: &Problem,
    residuals: &R,
    x: &[f64],
    r0: &[f64],
    rel_step: f64,
) -> Option<DMatrix<f64>>
where
    R: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let m = r0.len();
    let mut jac = DMatrix::zeros(m, x.len());
    for j in 0..x.len() {
        let spec = &problem.specs[j];
        let mut h = rel_step * x[j].abs().max(spec.typical);
        if !matches!(spec.scale, Scale::Periodic) && x[j] + h > spec.upper {
            h = -h;
        }
        let mut xp = x.to_vec();
        xp[j] += h;
        let rp = residuals(&xp)?;
        for i in 0..m {
            jac[(i, j)] = (rp[i] - r0[i]) / h;
        }
    }
    Some(jac)
}

/// Central-difference Jacobian; falls back to a one-sided difference at a
/// bound.
pub fn central_jacobian<R>(
    problem: &Problem,
    residuals: &R,
    x: &[f64],
    rel_step: f64,
) -> Option<DMatrix<f64>>
where
    R: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let r0 = residuals(x)?;
    let m = r0.len();
    let mut jac = DMatrix::zeros(m, x.len());
    for j in 0..x.len() {
        let spec = &problem.specs[j];
        let h = rel_step * x[j].abs().max(spec.typical);
        let periodic = matches!(spec.scale, Scale::Periodic);
        let up = if periodic || x[j] + h <= spec.upper { h } else { 0.0 };
        let dn = if periodic || x[j] - h >= spec.lower { h } else { 0.0 };
        if up + dn == 0.0 {
            continue;
        }
        let at = |d: f64| -> Option<Vec<f64>> {
            if d == 0.0 {
                return Some(r0.clone());
            }
            let mut xp = x.to_vec();
            xp[j] += d;
            residuals(&xp)
        };
        let rp = at(up)?;
        let rm = at(-dn)?;
        for i in 0..m {
            jac[(i, j)] = (rp[i] - rm[i]) / (up + dn);
        }
    }
    Some(jac)
}

/// Levenberg-Marquardt on `residuals`, with steps projected into the box.
/// `jacobian` defaults to forward differences when `None`.
pub fn levenberg_marquardt<R, J>(
    problem: &Problem,
    residuals: R,
    jacobian: Option<J>,
    x0: &[f64],
    opts: &LmOptions,
) -> OptimResult
where
    R: Fn(&[f64]) -> Option<Vec<f64>>,
    J: Fn(&[f64]) -> Option<DMatrix<f64>>,
{
    let sumsq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut evals = 0usize;
    let mut x = problem.project(x0);
    let mut r = match residuals(&x) {
        Some(r) => r,
        None => {
            return OptimResult {
                x,
                f: f64::INFINITY,
                evals: 1,
                iterations: 0,
                converged: false,
                trace: vec![f64::INFINITY],
            }
        }
    };
    evals += 1;
    let mut fx = sumsq(&r);
    let mut trace = vec![fx];
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let n = x.len();

    while iterations < opts.max_iterations {
        iterations += 1;
        let jac = match &jacobian {
            Some(jf) => jf(&x),
            None => {
                evals += n;
                numerical_jacobian(problem, &residuals, &x, &r, opts.fd_rel_step)
            }
        };
        let Some(jac) = jac else { break };
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);
        let diag_max = (0..n).map(|j| jtj[(j, j)]).fold(0.0, f64::max);
        if diag_max == 0.0 {
            converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += mu * jtj[(j, j)].max(1e-12 * diag_max);
            }
            let Some(chol) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&grad));
            let trial: Vec<f64> = problem.project(
                &x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect::<Vec<_>>(),
            );
            evals += 1;
            match residuals(&trial) {
                Some(rt) => {
                    let ft = sumsq(&rt);
                    if ft < fx {
                        let decrease = fx - ft;
                        x = trial;
                        r = rt;
                        fx = ft;
                        mu = (mu / 3.0).max(1e-12);
                        improved = true;
                        if decrease <= opts.f_rel_tol * fx.max(f64::MIN_POSITIVE) {
                            converged = true;
                        }
                        break;
                    }
                    mu *= 4.0;
                }
                None => mu *= 10.0,
            }
            if mu > 1e16 {
                break;
            }
        }
        trace.push(fx);
        if !improved {
            converged = true;
            break;
        }
        if converged || fx == 0.0 {
            converged = true;
            break;
        }
    }
    OptimResult {
        x,
        f: fx,
        evals,
        iterations,
        converged,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    fn box2() -> Problem {
        Problem::new(vec![
            ParamSpec::linear("x", -2.0, 2.0, 1.0),
            ParamSpec::linear("y", -1.0, 3.0, 1.0),
        ])
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let res = nelder_mead(&box2(), rosenbrock, &[-1.2, 1.0], &NelderMeadOptions::default());
        assert!(res.converged);
        assert!((res.x[0] - 1.0).abs() < 1e-4 && (res.x[1] - 1.0).abs() < 1e-4, "{:?}", res.x);
        assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bounds_are_respected() {
        // Unconstrained minimum at (3, -2) lies outside the box.
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 2.0).powi(2);
        let p = box2();
        let nm = nelder_mead(&p, f, &[0.0, 0.0], &NelderMeadOptions::default());
        assert!(p.contains(&nm.x));
        assert!((nm.x[0] - 2.0).abs() < 1e-6 && (nm.x[1] + 1.0).abs() < 1e-6);
        let pg = projected_gradient(&p, f, &[0.0, 0.0], &GradientOptions::default());
        assert!(p.contains(&pg.x));
        assert!((pg.x[0] - 2.0).abs() < 1e-6 && (pg.x[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn log_scale_finds_tiny_minimum() {
        let p = Problem::new(vec![ParamSpec::log("k", 0.0, 2.0, 1e-12)]);
        let f = |x: &[f64]| (x[0].ln() - (3e-7f64).ln()).powi(2);
        let res = nelder_mead(&p, f, &[0.5], &NelderMeadOptions::default());
        assert!((res.x[0] / 3e-7 - 1.0).abs() < 1e-3, "{:?}", res.x);
    }

    #[test]
    fn nan_objective_is_avoided() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { (x[0] - 0.2).powi(2) + x[1].powi(2) };
        let res = nelder_mead(&box2(), f, &[0.0, 0.5], &NelderMeadOptions::default());
        assert!(res.f.is_finite());
        assert!((res.x[0] - 0.2).abs() < 1e-4);
    }

    #[test]
    fn lm_fits_exponential() {
        let t: Vec<f64> = (0..30).map(|k| k as f64 * 0.2).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let p = Problem::new(vec![
            ParamSpec::linear("a", 0.0, 10.0, 1.0),
            ParamSpec::linear("k", 0.0, 5.0, 1.0),
        ]);
        let res = levenberg_marquardt(
            &p,
            |x: &[f64]| Some(t.iter().zip(&y).map(|(t, y)| x[0] * (-x[1] * t).exp() - y).collect()),
            None::<fn(&[f64]) -> Option<DMatrix<f64>>>,
            &[1.0, 0.1],
            &LmOptions::default(),
        );
        assert!((res.x[0] - 3.0).abs() < 1e-6 && (res.x[1] - 0.7).abs() < 1e-6, "{:?}", res);
        assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn wrap_and_sampling() {
        let pi = std::f64::consts::PI;
        assert!((wrap(3.5, -pi, pi) - (3.5 - 2.0 * pi)).abs() < 1e-15);
        assert_eq!(wrap(pi, -pi, pi), -pi);
        let p = Problem::new(vec![ParamSpec::log("b", 0.0, 2.0, 1e-10), ParamSpec::periodic("c", -pi, pi)]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = p.sample(&mut rng, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(a, p.sample(&mut rng, 50));
        assert!(a.iter().all(|x| p.contains(x)));
    }

    #[test]
    fn best_of_prefers_first_on_ties() {
        let mk = |f| OptimResult { x: vec![], f, evals: 0, iterations: 0, converged: true, trace: vec![] };
        let (i, r) = best_of(vec![mk(2.0), mk(1.0), mk(1.0)]).unwrap();
        assert_eq!((i, r.f), (1, 1.0));
    }
}
