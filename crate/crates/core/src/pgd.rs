//! Projected gradient descent.
//!
//! Each iteration takes a gradient step on the empirical risk and projects
//! the result back onto the constraint cone:
//!
//! ```text
//! G_k     = T_k − η ∇f(T_k)
//! T_{k+1} = P(G_k)
//! ```
//!
//! The run stops after `max_iters` iterations or once
//! `‖T_{k+1} − T_k‖_F <= tol · max(1, ‖T_k‖_F)`.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{evaluate, Dataset};
use crate::projection::{ConstraintSpec, RANK_TOL};
use crate::tensor::DenseTensor;

/// Objective growth over its initial value treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone)]
pub enum Init {
    Zero,
    Given(DenseTensor),
}

#[derive(Debug, Clone)]
pub struct PgdConfig {
    pub eta: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub init: Init,
    pub projection: ConstraintSpec,
    /// Check cone membership of every iterate (slow; used by tests).
    pub verify_feasibility: bool,
}

impl PgdConfig {
    pub fn new(projection: ConstraintSpec, eta: f64) -> Self {
        Self {
            eta,
            max_iters: 500,
            tol: 1e-7,
            init: Init::Zero,
            projection,
            verify_feasibility: false,
        }
    }

    pub fn max_iters(mut self, k: usize) -> Self {
        self.max_iters = k;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn verify_feasibility(mut self, on: bool) -> Self {
        self.verify_feasibility = on;
        self
    }

    fn validate(&self, dims: &[usize]) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Argument(format!("step size {} must be positive", self.eta)));
        }
        if self.max_iters == 0 {
            return Err(Error::Argument("max_iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Argument(format!("tolerance {} must be >= 0", self.tol)));
        }
        self.projection.validate(dims)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    /// `‖T_k − T‖_F / ‖T‖_F` when the truth is known.
    pub rmse: Option<f64>,
    /// Wall time since the start of the solve.
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    Diverged,
}

/// Iteration history and final estimate of a solver run.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<IterRecord>,
    pub estimate: DenseTensor,
    pub termination: Termination,
}

impl RunTrace {
    /// Number of iterations performed (records minus the initial one).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn final_rmse(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.rmse)
    }

    pub fn seconds(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.seconds)
    }

    /// Writes `iter,objective,rmse,seconds` rows with a header. Unknown
    /// rmse values are left empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iter", "objective", "rmse", "seconds"])?;
        for r in &self.records {
            out.write_record([
                r.iter.to_string(),
                r.objective.to_string(),
                r.rmse.map(|x| x.to_string()).unwrap_or_default(),
                r.seconds.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Normalized error `‖estimate − truth‖_F / ‖truth‖_F`; the plain distance
/// when `truth` is zero.
pub fn rmse(estimate: &DenseTensor, truth: &DenseTensor) -> Result<f64> {
    let dist = estimate.distance(truth)?;
    let norm = truth.frobenius_norm();
    Ok(if norm > 0.0 { dist / norm } else { dist })
}

pub fn pgd_solve(data: &Dataset, cfg: &PgdConfig) -> Result<RunTrace> {
    cfg.validate(data.dims())?;
    let start = Instant::now();
    let mut current = match &cfg.init {
        Init::Zero => DenseTensor::zeros(data.dims()),
        Init::Given(t) => {
            if t.dims() != data.dims() {
                return Err(Error::Shape(format!(
                    "initial iterate dims {:?} differ from {:?}",
                    t.dims(),
                    data.dims()
                )));
            }
            t.clone()
        }
    };
    let track = |t: &DenseTensor| data.truth().map(|truth| rmse(t, truth)).transpose();

    let (initial, mut grad) = evaluate(data, &current)?;
    let mut records = vec![IterRecord {
        iter: 0,
        objective: initial,
        rmse: track(&current)?,
        seconds: start.elapsed().as_secs_f64(),
    }];
    let limit = DIVERGENCE_FACTOR * initial.abs().max(1e-12);
    let mut termination = Termination::MaxIterations;

    for k in 1..=cfg.max_iters {
        let mut step = current.clone();
        step.axpy(-cfg.eta, &grad)?;
        let next = cfg.projection.project(&step)?;
        if cfg.verify_feasibility && !cfg.projection.is_member(&next, RANK_TOL)? {
            return Err(Error::Numeric(format!(
                "iterate {} left the constraint cone {:?}",
                k, cfg.projection
            )));
        }
        let change = next.distance(&current)?;
        let scale = current.frobenius_norm().max(1.0);
        current = next;

        let (objective, next_grad) = match evaluate(data, &current) {
            Ok((f, g)) => (f, Some(g)),
            Err(Error::Numeric(_)) => (f64::INFINITY, None),
            Err(e) => return Err(e),
        };
        if !objective.is_finite() || objective > limit {
            records.push(IterRecord {
                iter: k,
                objective,
                rmse: track(&current)?,
                seconds: start.elapsed().as_secs_f64(),
            });
            return Err(Error::Diverged {
                iteration: k,
                objective,
                initial,
                trace: Box::new(RunTrace {
                    records,
                    estimate: current,
                    termination: Termination::Diverged,
                }),
            });
        }
        grad = next_grad.expect("finite objective comes with a gradient");
        records.push(IterRecord {
            iter: k,
            objective,
            rmse: track(&current)?,
            seconds: start.elapsed().as_secs_f64(),
        });
        if change <= cfg.tol * scale {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(RunTrace {
        records,
        estimate: current,
        termination,
    })
}
