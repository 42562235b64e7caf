//! Nuclear-norm regularized estimation, the convex competitor to PGD.
//!
//! Two regularizers are supported for order-3 coefficients:
//!
//! ```text
//! R1(A) = Σ_j ‖A[:, :, j]‖_*                 (slice nuclear norms)
//! R2(A) = (‖M_0(A)‖_* + ‖M_1(A)‖_* + ‖M_2(A)‖_*) / 3   (matricizations)
//! ```
//!
//! and the estimate minimizes `f(A) + λ R(A)`.
//!
//! R1 is solved by proximal gradient with step halving. R2 is solved by
//! consensus ADMM with one copy `Z_k` of the coefficient per matricization.
//! For non-Gaussian families the linear predictor is split off as an extra
//! block `w = X a`, so every block update is either a linear solve, a
//! singular value soft threshold or a scalar convex problem.
//!
//! Both `a`-updates of the ADMM solve with `c·XᵀX/n + 3ρ I`, which does not
//! depend on λ; [`ConvexSolver`] keeps the Cholesky factor between calls.

use std::time::Instant;

use nalgebra::linalg::Cholesky;
use nalgebra::{DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{objective, Dataset, GlmFamily};
use crate::pgd::{rmse, IterRecord, RunTrace, Termination};
use crate::spectral::{singular_values, soft_threshold_singular};
use crate::tensor::{DenseTensor, Matrix};

/// Largest coefficient length for which the ADMM system is factored.
pub const MAX_DIRECT_LEN: usize = 8000;

/// Step halvings allowed in one proximal gradient iteration.
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegularizerKind {
    R1,
    R2,
}

impl RegularizerKind {
    pub fn name(self) -> &'static str {
        match self {
            RegularizerKind::R1 => "R1",
            RegularizerKind::R2 => "R2",
        }
    }
}

/// Regularizer and solver settings.
///
/// `tol` is a relative objective change for R1 and an absolute bound on
/// both ADMM residuals for R2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// ADMM penalty on the consensus constraints.
    pub rho: f64,
    /// ADMM penalty on `w = X a` (non-Gaussian families), in units of `1/n`.
    pub rho_w: f64,
}

impl RegularizerSpec {
    pub fn new(kind: RegularizerKind, lambda: f64) -> Self {
        Self {
            kind,
            lambda,
            max_iters: 500,
            tol: 1e-6,
            rho: 1.0,
            rho_w: 5.0,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn max_iters(mut self, k: usize) -> Self {
        self.max_iters = k;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Argument(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.max_iters == 0 {
            return Err(Error::Argument("max_iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Argument(format!("tol must be >= 0, got {}", self.tol)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite() && self.rho_w > 0.0 && self.rho_w.is_finite()) {
            return Err(Error::Argument("ADMM penalties must be finite and positive".into()));
        }
        Ok(())
    }

    /// Regularizer value at `a`.
    pub fn penalty(&self, a: &DenseTensor) -> Result<f64> {
        match self.kind {
            RegularizerKind::R1 => slice_nuclear_norm(a),
            RegularizerKind::R2 => mode_nuclear_norm(a),
        }
    }
}

/// Slice-wise singular value soft thresholding, the proximal map of `t·R1`.
pub fn prox_slice_nuclear(a: &DenseTensor, t: f64) -> Result<DenseTensor> {
    let (_, _, d3) = a.order3_dims()?;
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("threshold must be >= 0, got {}", t)));
    }
    let mut out = a.clone();
    for j in 0..d3 {
        out.set_slice(j, &soft_threshold_singular(&a.slice(j)?, t)?)?;
    }
    Ok(out)
}

/// `R1(A)`, the sum of slice nuclear norms.
pub fn slice_nuclear_norm(a: &DenseTensor) -> Result<f64> {
    let (_, _, d3) = a.order3_dims()?;
    let mut total = 0.0;
    for j in 0..d3 {
        total += singular_values(&a.slice(j)?)?.iter().sum::<f64>();
    }
    Ok(total)
}

/// `R2(A)`, the average nuclear norm of the three matricizations.
pub fn mode_nuclear_norm(a: &DenseTensor) -> Result<f64> {
    a.order3_dims()?;
    let mut total = 0.0;
    for k in 0..3 {
        total += singular_values(&a.matricize(k)?)?.iter().sum::<f64>();
    }
    Ok(total / 3.0)
}

/// Base of the default λ grid: `noise · √(max dim) / √n`.
///
/// The noise level is σ for Gaussian data and `α · sd(Y)` otherwise, with
/// the standard deviation taken over the observed responses.
pub fn lambda_scale(data: &Dataset) -> f64 {
    let noise = match *data.family() {
        GlmFamily::Gaussian { sigma } => sigma,
        GlmFamily::Logistic { alpha, .. } | GlmFamily::Poisson { alpha, .. } => {
            let y = data.responses();
            let n = y.len() as f64;
            let mean = y.iter().sum::<f64>() / n;
            let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            alpha.abs() * var.sqrt()
        }
    };
    let max_dim = data.dims().iter().copied().max().unwrap_or(1) as f64;
    noise * max_dim.sqrt() / (data.n() as f64).sqrt()
}

/// `points` log-spaced values over `[lo, hi] · scale`.
pub fn log_grid(lo: f64, hi: f64, points: usize, scale: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo * scale],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..points)
                .map(|i| scale * (a + (b - a) * i as f64 / (points - 1) as f64).exp())
                .collect()
        }
    }
}

/// 20 log-spaced points over `[1e-3, 1e1] · lambda_scale(data)`.
pub fn default_lambda_grid(data: &Dataset) -> Vec<f64> {
    log_grid(1e-3, 1e1, 20, lambda_scale(data))
}

/// Convex estimator bound to one dataset. Reuses the Gram matrix, the ADMM
/// factorization and the previous estimate (as a warm start) across calls.
pub struct ConvexSolver<'a> {
    data: &'a Dataset,
    gram: Option<Matrix>,
    factor: Option<((u64, u64), Cholesky<f64, Dyn>)>,
    warm: Option<DenseTensor>,
    residuals: Option<(f64, f64)>,
}

impl<'a> ConvexSolver<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        Self {
            data,
            gram: None,
            factor: None,
            warm: None,
            residuals: None,
        }
    }

    /// Disables warm starting for the next solve.
    pub fn reset(&mut self) {
        self.warm = None;
    }

    /// Primal and dual residuals at the end of the last ADMM run.
    pub fn last_residuals(&self) -> Option<(f64, f64)> {
        self.residuals
    }

    pub fn solve(&mut self, reg: &RegularizerSpec) -> Result<RunTrace> {
        reg.validate()?;
        if self.data.dims().len() != 3 {
            return Err(Error::Shape(format!(
                "convex regularizers need order-3 coefficients, got dims {:?}",
                self.data.dims()
            )));
        }
        let trace = match reg.kind {
            RegularizerKind::R1 => self.proximal_gradient(reg)?,
            RegularizerKind::R2 => match self.data.family() {
                GlmFamily::Gaussian { .. } => self.admm_gaussian(reg)?,
                _ => self.admm_split(reg)?,
            },
        };
        self.warm = Some(trace.estimate.clone());
        Ok(trace)
    }

    fn start(&self) -> DenseTensor {
        self.warm
            .clone()
            .unwrap_or_else(|| DenseTensor::zeros(self.data.dims()))
    }

    fn record(&self, iter: usize, value: f64, a: &DenseTensor, clock: &Instant) -> Result<IterRecord> {
        Ok(IterRecord {
            iter,
            objective: value,
            rmse: self.data.truth().map(|t| rmse(a, t)).transpose()?,
            seconds: clock.elapsed().as_secs_f64(),
        })
    }

    fn proximal_gradient(&mut self, reg: &RegularizerSpec) -> Result<RunTrace> {
        let clock = Instant::now();
        let data = self.data;
        let lambda = reg.lambda;
        let mut a = self.start();
        let (mut f, mut grad) = crate::glm::evaluate(data, &a)?;
        let mut composite = f + lambda * slice_nuclear_norm(&a)?;
        let mut records = vec![self.record(0, composite, &a, &clock)?];
        let mut step = 1.0;
        let mut termination = Termination::MaxIterations;

        for k in 1..=reg.max_iters {
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let mut trial = a.clone();
                trial.axpy(-step, &grad)?;
                let next = prox_slice_nuclear(&trial, step * lambda)?;
                let diff = next.sub(&a)?;
                let f_next = objective(data, &next).unwrap_or(f64::INFINITY);
                let model = f + grad.inner(&diff)? + diff.inner(&diff)? / (2.0 * step);
                if f_next <= model {
                    let c_next = f_next + lambda * slice_nuclear_norm(&next)?;
                    if c_next <= composite + 1e-12 * composite.abs() {
                        accepted = Some((next, c_next));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((next, c_next)) = accepted else {
                termination = Termination::Converged;
                break;
            };
            let change = (composite - c_next).abs();
            a = next;
            composite = c_next;
            let (f_new, g_new) = crate::glm::evaluate(data, &a)?;
            f = f_new;
            grad = g_new;
            records.push(self.record(k, composite, &a, &clock)?);
            if change <= reg.tol * composite.abs().max(1.0) {
                termination = Termination::Converged;
                break;
            }
        }
        Ok(RunTrace {
            records,
            estimate: a,
            termination,
        })
    }

    /// Cholesky factor of `weight · XᵀX/n + shift · I`.
    fn factor(&mut self, weight: f64, shift: f64) -> Result<&Cholesky<f64, Dyn>> {
        let key = (weight.to_bits(), shift.to_bits());
        if self.factor.as_ref().map(|(k, _)| *k) != Some(key) {
            let len = self.data.design().ncols();
            if len > MAX_DIRECT_LEN {
                return Err(Error::Argument(format!(
                    "ADMM factorization limited to {} coefficients, got {}",
                    MAX_DIRECT_LEN, len
                )));
            }
            let data = self.data;
            let n = data.n() as f64;
            let gram = self
                .gram
                .get_or_insert_with(|| data.design().tr_mul(data.design()));
            let mut system = &*gram * (weight / n);
            for i in 0..len {
                system[(i, i)] += shift;
            }
            let chol = Cholesky::new(system)
                .ok_or_else(|| Error::Numeric("ADMM system is not positive definite".into()))?;
            self.factor = Some((key, chol));
        }
        Ok(&self.factor.as_ref().expect("factor just set").1)
    }

    fn admm_gaussian(&mut self, reg: &RegularizerSpec) -> Result<RunTrace> {
        let clock = Instant::now();
        let data = self.data;
        let rho = reg.rho;
        let y = DVector::from_column_slice(data.responses());
        let b = data.design().tr_mul(&y) / data.n() as f64;
        let mut state = Consensus::new(self.start());
        let mut records = vec![self.record(0, self.composite(reg, &state.a)?, &state.a, &clock)?];
        let mut termination = Termination::MaxIterations;

        for k in 1..=reg.max_iters {
            let rhs = &b + state.pull(rho);
            let a = self.factor(1.0, 3.0 * rho)?.solve(&rhs);
            state.set_a(a.as_slice());
            let (primal, dual) = state.update_copies(reg.lambda, rho)?;
            self.residuals = Some((primal, dual));
            records.push(self.record(k, self.composite(reg, &state.a)?, &state.a, &clock)?);
            if primal <= reg.tol && dual <= reg.tol {
                termination = Termination::Converged;
                break;
            }
        }
        Ok(RunTrace {
            records,
            estimate: state.a,
            termination,
        })
    }

    fn admm_split(&mut self, reg: &RegularizerSpec) -> Result<RunTrace> {
        let clock = Instant::now();
        let data = self.data;
        let family = *data.family();
        let n = data.n() as f64;
        let rho = reg.rho;
        let rw = reg.rho_w / n;
        let mut state = Consensus::new(self.start());
        let mut w = data.linear_predictor(&state.a)?;
        let mut v = DVector::zeros(w.len());
        let mut records = vec![self.record(0, self.composite(reg, &state.a)?, &state.a, &clock)?];
        let mut termination = Termination::MaxIterations;

        for k in 1..=reg.max_iters {
            let rhs = data.design().tr_mul(&(&w - &v)) * rw + state.pull(rho);
            let a = self.factor(reg.rho_w, 3.0 * rho)?.solve(&rhs);
            state.set_a(a.as_slice());
            let xa = data.design() * &a;
            let target = &xa + &v;
            let w_prev = w.clone();
            for i in 0..w.len() {
                w[i] = scalar_prox(&family, target[i], data.responses()[i], n, rw);
            }
            let gap = &xa - &w;
            v += &gap;
            let (primal, dual) = state.update_copies(reg.lambda, rho)?;
            let primal = (primal * primal + gap.norm_squared()).sqrt();
            let dual = (dual * dual + (rw * (&w - &w_prev).norm()).powi(2)).sqrt();
            self.residuals = Some((primal, dual));
            let value = self.composite(reg, &state.a).unwrap_or(f64::INFINITY);
            records.push(self.record(k, value, &state.a, &clock)?);
            if primal <= reg.tol && dual <= reg.tol {
                termination = Termination::Converged;
                break;
            }
        }
        Ok(RunTrace {
            records,
            estimate: state.a,
            termination,
        })
    }

    fn composite(&self, reg: &RegularizerSpec, a: &DenseTensor) -> Result<f64> {
        Ok(objective(self.data, a)? + reg.lambda * reg.penalty(a)?)
    }
}

/// Consensus copies `Z_k` and scaled duals `U_k`, one per matricization.
struct Consensus {
    a: DenseTensor,
    z: Vec<DenseTensor>,
    u: Vec<DenseTensor>,
}

impl Consensus {
    fn new(a: DenseTensor) -> Self {
        let zero = DenseTensor::zeros(a.dims());
        Self {
            z: vec![a.clone(); 3],
            u: vec![zero; 3],
            a,
        }
    }

    /// `ρ Σ_k (Z_k − U_k)` as a vector.
    fn pull(&self, rho: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.a.len());
        for (z, u) in self.z.iter().zip(&self.u) {
            for (o, (zi, ui)) in out.iter_mut().zip(z.data().iter().zip(u.data())) {
                *o += rho * (zi - ui);
            }
        }
        out
    }

    fn set_a(&mut self, values: &[f64]) {
        self.a.data_mut().copy_from_slice(values);
    }

    /// Updates every `Z_k` by thresholding mode `k` of `A + U_k`, then the
    /// duals. Returns the primal and dual residual norms.
    fn update_copies(&mut self, lambda: f64, rho: f64) -> Result<(f64, f64)> {
        let dims = self.a.dims().to_vec();
        let threshold = lambda / (3.0 * rho);
        let mut primal = 0.0;
        let mut dual = 0.0;
        for k in 0..3 {
            let shifted = self.a.add(&self.u[k])?;
            let m = soft_threshold_singular(&shifted.matricize(k)?, threshold)?;
            let z = DenseTensor::dematricize(&m, k, &dims)?;
            let gap = self.a.sub(&z)?;
            dual += z.distance(&self.z[k])?.powi(2);
            primal += gap.inner(&gap)?;
            self.u[k].axpy(1.0, &gap)?;
            self.z[k] = z;
        }
        Ok((primal.sqrt(), rho * dual.sqrt()))
    }
}

/// `argmin_w loss(w, y)/n + (rw/2)(w − c)²` by Newton's method safeguarded
/// with bisection on a bracket of the root of the (increasing) derivative.
fn scalar_prox(family: &GlmFamily, c: f64, y: f64, n: f64, rw: f64) -> f64 {
    let deriv = |w: f64| family.loss_derivative(w, y) / n + rw * (w - c);
    let g0 = deriv(c);
    if g0 == 0.0 {
        return c;
    }
    let (mut lo, mut hi) = if g0 > 0.0 { (c - g0 / rw, c) } else { (c, c - g0 / rw) };
    let mut w = c;
    // Bisect whenever Newton leaves the bracket or fails to halve the step,
    // which happens far out on an exponential tail.
    let mut last_step = hi - lo;
    for _ in 0..200 {
        let g = deriv(w);
        if g == 0.0 {
            return w;
        }
        if g < 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let h = family.curvature(w) / n + rw;
        let delta = g / h;
        if delta.abs() <= 1e-15 * (1.0 + w.abs()) || hi - lo <= 1e-14 * (1.0 + w.abs()) {
            break;
        }
        let newton = w - delta;
        if newton > lo && newton < hi && newton.is_finite() && 2.0 * delta.abs() <= last_step {
            last_step = delta.abs();
            w = newton;
        } else {
            last_step = 0.5 * (hi - lo);
            w = lo + last_step;
        }
    }
    w
}

/// Convex estimate with a fresh solver.
pub fn solve_regularized(data: &Dataset, reg: &RegularizerSpec) -> Result<RunTrace> {
    ConvexSolver::new(data).solve(reg)
}

/// Outcome of a λ grid search.
#[derive(Debug, Clone)]
pub struct LambdaSearch {
    pub grid: Vec<f64>,
    /// Mean rmse over replicates at each grid point.
    pub mean_rmse: Vec<f64>,
    /// `rmse[replicate][grid point]`.
    pub rmse: Vec<Vec<f64>>,
    pub best_index: usize,
}

impl LambdaSearch {
    pub fn best_lambda(&self) -> f64 {
        self.grid[self.best_index]
    }

    pub fn best_rmse(&self) -> f64 {
        self.mean_rmse[self.best_index]
    }

    /// Per-replicate rmse at the selected λ.
    pub fn best_rmse_per_replicate(&self) -> Vec<f64> {
        self.rmse.iter().map(|row| row[self.best_index]).collect()
    }
}

/// Solves on every grid point for each replicate from `generate` and picks
/// the λ with the smallest mean rmse (the first one on ties).
///
/// Replicates run in parallel. Within a replicate the grid is traversed
/// from the largest λ down, warm starting each solve from the previous one.
pub fn grid_search_lambda<G>(
    generate: G,
    base: &RegularizerSpec,
    grid: &[f64],
    replicates: usize,
) -> Result<LambdaSearch>
where
    G: Fn(usize) -> Result<Dataset> + Sync,
{
    if grid.is_empty() {
        return Err(Error::Argument("lambda grid is empty".into()));
    }
    if replicates == 0 {
        return Err(Error::Argument("need at least one replicate".into()));
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&i, &j| grid[j].total_cmp(&grid[i]));

    let rmse = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let data = generate(rep)?;
            if data.truth().is_none() {
                return Err(Error::Argument("grid search needs the true coefficient".into()));
            }
            let mut solver = ConvexSolver::new(&data);
            let mut row = vec![0.0; grid.len()];
            for &i in &order {
                let trace = solver.solve(&base.with_lambda(grid[i]))?;
                row[i] = trace.final_rmse().expect("truth is known");
            }
            log::debug!("replicate {}: rmse over lambda grid {:?}", rep, row);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let mean_rmse: Vec<f64> = (0..grid.len())
        .map(|i| rmse.iter().map(|row| row[i]).sum::<f64>() / replicates as f64)
        .collect();
    let best_index = mean_rmse
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v < mean_rmse[best] { i } else { best });
    log::info!(
        "{} lambda curve: {:?}",
        base.kind.name(),
        grid.iter().zip(&mean_rmse).collect::<Vec<_>>()
    );
    Ok(LambdaSearch {
        grid: grid.to_vec(),
        mean_rmse,
        rmse,
        best_index,
    })
}
