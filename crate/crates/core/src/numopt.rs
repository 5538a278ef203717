//! Levenberg–Marquardt least squares with forward-difference Jacobians.

use nalgebra::{DMatrix, DVector};

use crate::error::{QptError, Result};

/// Constraint on one parameter, realized by reparametrization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Free,
    /// x ≥ lower, via x = lower + u².
    Lower(f64),
    /// lower < x < upper, via a logistic map.
    Interval(f64, f64),
}

impl Bound {
    fn to_external(self, u: f64) -> f64 {
        match self {
            Bound::Free => u,
            Bound::Lower(lo) => lo + u * u,
            Bound::Interval(lo, hi) => lo + (hi - lo) / (1.0 + (-u).exp()),
        }
    }

    fn to_internal(self, x: f64) -> f64 {
        match self {
            Bound::Free => x,
            Bound::Lower(lo) => (x - lo).max(0.0).sqrt(),
            Bound::Interval(lo, hi) => {
                let t = ((x - lo) / (hi - lo)).clamp(1e-12, 1.0 - 1e-12);
                (t / (1.0 - t)).ln()
            }
        }
    }
}

/// A residual map `R^P → R^R` with R ≥ P.
pub trait LeastSquaresProblem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, x: &[f64]) -> Vec<f64>;
    /// Per-parameter bounds; `None` means unconstrained.
    fn bounds(&self) -> Option<Vec<Bound>> {
        None
    }
}

/// Closure-backed problem.
pub struct FnProblem<F: Fn(&[f64]) -> Vec<f64>> {
    pub n_params: usize,
    pub n_residuals: usize,
    pub f: F,
    pub bounds: Option<Vec<Bound>>,
}

impl<F: Fn(&[f64]) -> Vec<f64>> FnProblem<F> {
    pub fn new(n_params: usize, n_residuals: usize, f: F) -> Self {
        Self { n_params, n_residuals, f, bounds: None }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> LeastSquaresProblem for FnProblem<F> {
    fn n_params(&self) -> usize {
        self.n_params
    }
    fn n_residuals(&self) -> usize {
        self.n_residuals
    }
    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
    fn bounds(&self) -> Option<Vec<Bound>> {
        self.bounds.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmSettings {
    pub max_iter: usize,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub gtol: f64,
    pub ftol: f64,
    pub xtol: f64,
    pub jacobian_step: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self { max_iter: 200, lambda0: 1e-3, lambda_up: 10.0, lambda_down: 0.1, gtol: 1e-10, ftol: 1e-12, xtol: 1e-12, jacobian_step: 1e-7 }
    }
}

impl LmSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.lambda0, self.lambda_up, self.lambda_down, self.gtol, self.ftol, self.xtol, self.jacobian_step];
        if self.max_iter == 0 || positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(QptError::InvalidInput("LM settings must all be positive".into()));
        }
        if !(self.lambda_up > 1.0 && self.lambda_down < 1.0) {
            return Err(QptError::InvalidInput("LM settings need lambda_up > 1 > lambda_down".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmStatus {
    ConvergedGtol,
    ConvergedFtol,
    ConvergedXtol,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// ‖r‖ at `params`.
    pub residual_norm: f64,
    /// Number of Jacobian evaluations (outer iterations).
    pub iterations: usize,
    pub status: LmStatus,
    /// Residual norm after every accepted step, starting with the initial point.
    pub history: Vec<f64>,
    /// Internal parameters after every accepted step, starting with the initial point.
    pub path: Vec<Vec<f64>>,
}

const MAX_ESCALATIONS: usize = 10;

fn eval(problem: &dyn LeastSquaresProblem, bounds: &[Bound], u: &[f64]) -> Result<DVector<f64>> {
    let x: Vec<f64> = u.iter().zip(bounds).map(|(v, b)| b.to_external(*v)).collect();
    let r = problem.residuals(&x);
    if r.len() != problem.n_residuals() {
        return Err(QptError::InvalidInput(format!("residual function returned {} values, expected {}", r.len(), problem.n_residuals())));
    }
    if let Some(i) = r.iter().position(|v| !v.is_finite()) {
        return Err(QptError::NonFinite(format!("residual {i} is {} at parameters {x:?}", r[i])));
    }
    Ok(DVector::from_vec(r))
}

/// Forward-difference Jacobian, column p = (r(x + step·e_p) − r(x)) / step.
pub fn numeric_jacobian(problem: &dyn LeastSquaresProblem, x: &[f64], step: f64) -> Result<DMatrix<f64>> {
    if step.is_nan() || step <= 0.0 {
        return Err(QptError::InvalidInput("jacobian step must be positive".into()));
    }
    let free = vec![Bound::Free; x.len()];
    let r0 = eval(problem, &free, x)?;
    jacobian_from(problem, &free, x, &r0, step)
}

fn jacobian_from(problem: &dyn LeastSquaresProblem, bounds: &[Bound], u: &[f64], r0: &DVector<f64>, step: f64) -> Result<DMatrix<f64>> {
    let mut j = DMatrix::zeros(r0.len(), u.len());
    let mut probe = u.to_vec();
    for p in 0..u.len() {
        probe[p] = u[p] + step;
        let r = eval(problem, bounds, &probe)?;
        probe[p] = u[p];
        j.set_column(p, &((r - r0) / step));
    }
    Ok(j)
}

/// Minimize ½‖r(x)‖² from `x0`.
///
/// Each iteration solves `(JᵀJ + λ diag(JᵀJ)) δ = −Jᵀr`. A step is accepted only if it
/// lowers ‖r‖²; λ then shrinks by `lambda_down`, otherwise it grows by `lambda_up`.
pub fn lm_minimize(problem: &dyn LeastSquaresProblem, x0: &[f64], settings: &LmSettings) -> Result<LmResult> {
    settings.validate()?;
    let p = problem.n_params();
    if x0.len() != p {
        return Err(QptError::InvalidInput(format!("x0 has {} entries, problem has {p} parameters", x0.len())));
    }
    if problem.n_residuals() < p {
        return Err(QptError::InvalidInput(format!("underdetermined problem: {} residuals for {p} parameters", problem.n_residuals())));
    }
    let bounds = problem.bounds().unwrap_or_else(|| vec![Bound::Free; p]);
    if bounds.len() != p {
        return Err(QptError::InvalidInput("bounds length differs from parameter count".into()));
    }

    let mut u: Vec<f64> = x0.iter().zip(&bounds).map(|(x, b)| b.to_internal(*x)).collect();
    let mut r = eval(problem, &bounds, &u)?;
    let mut cost = r.norm_squared();
    let mut lambda = settings.lambda0;
    let mut history = vec![cost.sqrt()];
    let mut path = vec![u.clone()];
    let mut status = LmStatus::MaxIter;
    let mut iterations = 0;

    while iterations < settings.max_iter {
        iterations += 1;
        let j = jacobian_from(problem, &bounds, &u, &r, settings.jacobian_step)?;
        let g = j.tr_mul(&r);
        if g.amax() < settings.gtol {
            status = LmStatus::ConvergedGtol;
            break;
        }
        let a = j.tr_mul(&j);
        let mut escalations = 0;
        let mut accepted = false;
        let mut stop = None;
        while !accepted {
            let mut damped = a.clone();
            for d in 0..p {
                damped[(d, d)] += lambda * a[(d, d)];
            }
            let Some(chol) = damped.cholesky() else {
                escalations += 1;
                if escalations > MAX_ESCALATIONS {
                    return Err(QptError::NonConvergence {
                        reason: format!("damped normal matrix stayed singular after {MAX_ESCALATIONS} escalations"),
                        residual_norm: cost.sqrt(),
                        iterations,
                    });
                }
                lambda *= settings.lambda_up;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let trial: Vec<f64> = u.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let r_new = eval(problem, &bounds, &trial)?;
            let cost_new = r_new.norm_squared();
            if cost_new < cost {
                let step_norm = delta.norm();
                let x_norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                let decrease = cost - cost_new;
                u = trial;
                r = r_new;
                cost = cost_new;
                lambda *= settings.lambda_down;
                history.push(cost.sqrt());
                path.push(u.clone());
                accepted = true;
                if decrease <= settings.ftol * cost.max(f64::MIN_POSITIVE) || cost == 0.0 {
                    stop = Some(LmStatus::ConvergedFtol);
                } else if step_norm <= settings.xtol * (x_norm + settings.xtol) {
                    stop = Some(LmStatus::ConvergedXtol);
                }
            } else {
                lambda *= settings.lambda_up;
                if !lambda.is_finite() || lambda > 1e300 {
                    // No descent direction left at working precision.
                    stop = Some(LmStatus::ConvergedXtol);
                    break;
                }
                // A step that no longer moves the parameters has converged in x.
                let step_norm = delta.norm();
                let x_norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                if step_norm <= settings.xtol * (x_norm + settings.xtol) {
                    stop = Some(LmStatus::ConvergedXtol);
                    break;
                }
            }
        }
        if let Some(s) = stop {
            status = s;
            break;
        }
    }

    let params = u.iter().zip(&bounds).map(|(v, b)| b.to_external(*v)).collect();
    Ok(LmResult { params, residual_norm: cost.sqrt(), iterations, status, history, path })
}
