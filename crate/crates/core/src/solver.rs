//! Projected gradient descent for the constrained estimator
//!
//! ```text
//! minimize ‖y − Φx − √m·v‖₂  subject to (x, v) ∈ T = S_x × S_v
//! ```
//!
//! run on the smooth squared loss `g(x, v) = ½‖y − Φx − √m·v‖²`, which has
//! the same minimizers over `T`.

use ndarray::{Array1, ArrayView2};

use crate::error::{Error, Result};
use crate::links::NonlinearityParams;
use crate::model::ProblemInstance;
use crate::rng::{gaussian_vec, stream, stream_rng};
use crate::sets::ConstraintSet;

/// Inflation applied to the power-iteration estimate of the Lipschitz
/// constant.
pub const LIPSCHITZ_MARGIN: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `η = 1/L` with `L` estimated by power iteration.
    InverseLipschitz,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stop once `‖z_k − z_{k+1}‖/η` drops below this.
    pub grad_map_tol: f64,
    pub step_rule: StepRule,
    pub power_iters: usize,
}

impl SolveOptions {
    /// Defaults scaled to the number of measurements: tolerance `1e-8·√m`,
    /// at most `10⁵` iterations.
    pub fn for_measurements(m: usize) -> Self {
        SolveOptions {
            max_iters: 100_000,
            grad_map_tol: 1e-8 * (m as f64).sqrt(),
            step_rule: StepRule::InverseLipschitz,
            power_iters: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.grad_map_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grad_map_tol must be positive, got {}",
                self.grad_map_tol
            )));
        }
        if let StepRule::Fixed(eta) = self.step_rule {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidParameter(format!("step must be positive, got {eta}")));
            }
        }
        if self.power_iters < 10 {
            return Err(Error::InvalidParameter(format!(
                "power_iters must be at least 10, got {}",
                self.power_iters
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x_hat: Array1<f64>,
    pub v_hat: Array1<f64>,
    pub iterations: usize,
    pub final_residual_norm: f64,
    /// `½‖residual‖²` at the start point and after every iteration.
    pub objective_trace: Vec<f64>,
    /// The gradient-mapping norm fell below the tolerance. For non-convex
    /// `T` this certifies stationarity only.
    pub converged: bool,
    pub grad_map_norm: f64,
    pub step: f64,
    pub convex: bool,
}

/// `‖x̂ − μx⋆‖₂`, `‖v̂ − v⋆‖₂` and their root sum of squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBreakdown {
    pub signal: f64,
    pub corruption: f64,
    pub joint: f64,
}

pub fn error_breakdown(
    x_hat: &Array1<f64>,
    v_hat: &Array1<f64>,
    inst: &ProblemInstance,
    mu: f64,
) -> Result<ErrorBreakdown> {
    if x_hat.len() != inst.n() {
        return Err(Error::shape(inst.n(), x_hat.len()));
    }
    if v_hat.len() != inst.m() {
        return Err(Error::shape(inst.m(), v_hat.len()));
    }
    let signal_sq: f64 = x_hat
        .iter()
        .zip(inst.x_star.iter())
        .map(|(a, b)| (a - mu * b).powi(2))
        .sum();
    let corruption_sq: f64 = v_hat
        .iter()
        .zip(inst.v_star.iter())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(ErrorBreakdown {
        signal: signal_sq.sqrt(),
        corruption: corruption_sq.sqrt(),
        joint: (signal_sq + corruption_sq).sqrt(),
    })
}

/// `√(‖x̂ − μx⋆‖² + ‖v̂ − v⋆‖²)`.
pub fn joint_error(result: &SolveResult, inst: &ProblemInstance, params: &NonlinearityParams) -> Result<f64> {
    Ok(error_breakdown(&result.x_hat, &result.v_hat, inst, params.mu)?.joint)
}

/// Power-iteration estimate of `λ_max([Φ, √m·I][Φ, √m·I]ᵀ) = σ_max(Φ)² + m`,
/// inflated by 1%.
///
/// Iterates on the `n × n` Gram matrix `ΦᵀΦ`, which shares its top
/// eigenvalue with `ΦΦᵀ` and converges faster than the shifted `m × m`
/// operator.
pub fn lipschitz_estimate(inst: &ProblemInstance, iters: usize) -> Result<f64> {
    if iters < 10 {
        return Err(Error::InvalidParameter(format!(
            "power iteration needs at least 10 iterations, got {iters}"
        )));
    }
    let phi = inst.phi.view();
    let (m, n) = phi.dim();
    let mut rng = stream_rng(inst.seed, stream::POWER_ITERATION);
    let mut u = gaussian_vec(&mut rng, n);
    normalize(&mut u);
    let mut image = vec![0.0; m];
    let mut back = vec![0.0; n];
    let mut top = 0.0;
    for _ in 0..iters {
        matvec(phi, &u, &mut image);
        top = dot(&image, &image);
        rmatvec(phi, &image, &mut back);
        let norm = dot(&back, &back).sqrt();
        if !norm.is_finite() {
            return Err(Error::NumericalFailure("power iteration diverged".into()));
        }
        if norm == 0.0 {
            top = 0.0;
            break;
        }
        for (ui, bi) in u.iter_mut().zip(&back) {
            *ui = bi / norm;
        }
    }
    let lipschitz = (top + m as f64) * LIPSCHITZ_MARGIN;
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::NumericalFailure(format!(
            "Lipschitz estimate {lipschitz} is not a positive number"
        )));
    }
    Ok(lipschitz)
}

pub fn solve_tlasso(
    inst: &ProblemInstance,
    set_x: &ConstraintSet,
    set_v: &ConstraintSet,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    let (m, n) = inst.phi.dim();
    set_x.check_dim(n)?;
    set_v.check_dim(m)?;
    let feasible = ConstraintSet::product(set_x.clone(), set_v.clone());
    let step = match opts.step_rule {
        StepRule::InverseLipschitz => 1.0 / lipschitz_estimate(inst, opts.power_iters)?,
        StepRule::Fixed(eta) => eta,
    };
    let sqrt_m = inst.sqrt_m();
    let phi = inst.phi.view();
    let y = inst.y.as_slice().expect("contiguous observations");

    let mut z = vec![0.0; n + m];
    let origin = z.clone();
    feasible.project_into(&origin, &mut z);

    let mut r = vec![0.0; m];
    let mut grad_x = vec![0.0; n];
    let mut trial = vec![0.0; n + m];
    let mut next = vec![0.0; n + m];
    let mut objective = compute_residual(phi, y, sqrt_m, &z, &mut r);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut grad_map_norm = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        // ∇g = (−Φᵀr, −√m·r)
        rmatvec(phi, &r, &mut grad_x);
        for j in 0..n {
            trial[j] = z[j] + step * grad_x[j];
        }
        for i in 0..m {
            trial[n + i] = z[n + i] + step * sqrt_m * r[i];
        }
        feasible.project_into(&trial, &mut next);
        let moved: f64 = z.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum();
        grad_map_norm = moved.sqrt() / step;
        std::mem::swap(&mut z, &mut next);
        objective = compute_residual(phi, y, sqrt_m, &z, &mut r);
        if !objective.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "objective became non-finite at iteration {iterations}"
            )));
        }
        trace.push(objective);
        if grad_map_norm < opts.grad_map_tol {
            converged = true;
            break;
        }
    }

    let v_hat = Array1::from(z.split_off(n));
    Ok(SolveResult {
        x_hat: Array1::from(z),
        v_hat,
        iterations,
        final_residual_norm: (2.0 * objective).sqrt(),
        objective_trace: trace,
        converged,
        grad_map_norm,
        step,
        convex: feasible.is_convex(),
    })
}

/// Writes `y − Φx − √m·v` into `r` and returns `½‖r‖²`.
fn compute_residual(phi: ArrayView2<f64>, y: &[f64], sqrt_m: f64, z: &[f64], r: &mut [f64]) -> f64 {
    let n = phi.ncols();
    matvec(phi, &z[..n], r);
    let mut half_sq = 0.0;
    for ((ri, yi), vi) in r.iter_mut().zip(y).zip(&z[n..]) {
        *ri = yi - *ri - sqrt_m * vi;
        half_sq += *ri * *ri;
    }
    0.5 * half_sq
}

/// `out = Φ·x` for row-major `Φ`.
pub(crate) fn matvec(phi: ArrayView2<f64>, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(phi.rows()) {
        *o = match row.as_slice() {
            Some(row) => dot(row, x),
            None => row.iter().zip(x).map(|(a, b)| a * b).sum(),
        };
    }
}

/// `out = Φᵀ·r` for row-major `Φ`.
pub(crate) fn rmatvec(phi: ArrayView2<f64>, r: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (ri, row) in r.iter().zip(phi.rows()) {
        if *ri == 0.0 {
            continue;
        }
        match row.as_slice() {
            Some(row) => {
                for (o, a) in out.iter_mut().zip(row) {
                    *o += ri * a;
                }
            }
            None => {
                for (o, a) in out.iter_mut().zip(row.iter()) {
                    *o += ri * a;
                }
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociation.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}
