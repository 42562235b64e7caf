//! Exponential-family responses and the empirical negative log-likelihood.
//!
//! Every family is parameterized so that the linear predictor is
//! `θ_i = <X_i, A>` and the coefficient tensor being estimated is `T` itself.
//! The simulation constants `m` (trials or rate scale) and `α` (predictor
//! scale) are folded into the log-partition function:
//!
//! | family   | a(θ)               | a'(θ)               | response scale |
//! |----------|--------------------|---------------------|----------------|
//! | Gaussian | θ²/2               | θ                   | 1              |
//! | Logistic | m log(1 + e^{αθ})  | m α sigmoid(αθ)     | α              |
//! | Poisson  | m e^{αθ}           | m α e^{αθ}          | α              |
//!
//! The per-sample loss is `a(θ) − scale · y · θ`. For the Gaussian family the
//! response-only term `y²/2` is kept so that the loss is the familiar
//! `(y − θ)²/2`; for the other families it is dropped.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix};

/// Poisson rates above this are treated as a miscalibrated `α`.
pub const MAX_POISSON_RATE: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum GlmFamily {
    Gaussian { sigma: f64 },
    Logistic { m: u32, alpha: f64 },
    Poisson { m: f64, alpha: f64 },
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl GlmFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            GlmFamily::Gaussian { sigma } => sigma.is_finite() && sigma >= 0.0,
            GlmFamily::Logistic { m, alpha } => m >= 1 && alpha.is_finite() && alpha != 0.0,
            GlmFamily::Poisson { m, alpha } => {
                m.is_finite() && m > 0.0 && alpha.is_finite() && alpha != 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid family parameters {:?}", self)))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GlmFamily::Gaussian { .. } => "gaussian",
            GlmFamily::Logistic { .. } => "logistic",
            GlmFamily::Poisson { .. } => "poisson",
        }
    }

    /// `a(θ)`.
    pub fn log_partition(&self, theta: f64) -> f64 {
        match *self {
            GlmFamily::Gaussian { .. } => 0.5 * theta * theta,
            GlmFamily::Logistic { m, alpha } => m as f64 * softplus(alpha * theta),
            GlmFamily::Poisson { m, alpha } => m * (alpha * theta).exp(),
        }
    }

    /// `a'(θ)`.
    pub fn mean(&self, theta: f64) -> f64 {
        match *self {
            GlmFamily::Gaussian { .. } => theta,
            GlmFamily::Logistic { m, alpha } => m as f64 * alpha * sigmoid(alpha * theta),
            GlmFamily::Poisson { m, alpha } => m * alpha * (alpha * theta).exp(),
        }
    }

    /// `a''(θ)`.
    pub fn curvature(&self, theta: f64) -> f64 {
        match *self {
            GlmFamily::Gaussian { .. } => 1.0,
            GlmFamily::Logistic { m, alpha } => {
                let p = sigmoid(alpha * theta);
                m as f64 * alpha * alpha * p * (1.0 - p)
            }
            GlmFamily::Poisson { m, alpha } => m * alpha * alpha * (alpha * theta).exp(),
        }
    }

    /// Factor multiplying `y` in the natural-parameter term.
    pub fn response_scale(&self) -> f64 {
        match *self {
            GlmFamily::Gaussian { .. } => 1.0,
            GlmFamily::Logistic { alpha, .. } | GlmFamily::Poisson { alpha, .. } => alpha,
        }
    }

    /// Per-sample loss at linear predictor `theta`.
    pub fn loss(&self, theta: f64, y: f64) -> f64 {
        match self {
            GlmFamily::Gaussian { .. } => 0.5 * (y - theta) * (y - theta),
            _ => self.log_partition(theta) - self.response_scale() * y * theta,
        }
    }

    /// Derivative of [`GlmFamily::loss`] in `theta`.
    pub fn loss_derivative(&self, theta: f64, y: f64) -> f64 {
        self.mean(theta) - self.response_scale() * y
    }

    /// Expected response `E[Y | θ]`.
    pub fn response_mean(&self, theta: f64) -> f64 {
        match *self {
            GlmFamily::Gaussian { .. } => theta,
            GlmFamily::Logistic { m, alpha } => m as f64 * sigmoid(alpha * theta),
            GlmFamily::Poisson { m, alpha } => m * (alpha * theta).exp(),
        }
    }

    /// `Var[Y | θ]`.
    pub fn response_variance(&self, theta: f64) -> f64 {
        match *self {
            GlmFamily::Gaussian { sigma } => sigma * sigma,
            GlmFamily::Logistic { m, alpha } => {
                let p = sigmoid(alpha * theta);
                m as f64 * p * (1.0 - p)
            }
            GlmFamily::Poisson { m, alpha } => m * (alpha * theta).exp(),
        }
    }

    /// Draws one response with linear predictor `theta`.
    pub fn sample<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Result<f64> {
        match *self {
            GlmFamily::Gaussian { sigma } => {
                if sigma == 0.0 {
                    return Ok(theta);
                }
                let noise = Normal::new(0.0, sigma)
                    .map_err(|e| Error::Argument(e.to_string()))?
                    .sample(rng);
                Ok(theta + noise)
            }
            GlmFamily::Logistic { m, alpha } => {
                let p = sigmoid(alpha * theta);
                let draw = Binomial::new(m as u64, p)
                    .map_err(|e| Error::Argument(e.to_string()))?
                    .sample(rng);
                Ok(draw as f64)
            }
            GlmFamily::Poisson { m, alpha } => {
                let rate = m * (alpha * theta).exp();
                if !(rate <= MAX_POISSON_RATE) {
                    return Err(Error::Numeric(format!(
                        "Poisson rate {:e} exceeds {:e}; alpha is probably too large",
                        rate, MAX_POISSON_RATE
                    )));
                }
                if rate == 0.0 {
                    return Ok(0.0);
                }
                let draw: f64 = Poisson::new(rate)
                    .map_err(|e| Error::Argument(e.to_string()))?
                    .sample(rng);
                Ok(draw)
            }
        }
    }
}

/// Covariates, responses and (for simulations) the generating tensor.
///
/// Covariates are stored as the rows of an `n x D` design matrix, where row
/// `i` is the column-major vectorization of `X_i`.
#[derive(Debug, Clone)]
pub struct Dataset {
    dims: Vec<usize>,
    design: Matrix,
    responses: Vec<f64>,
    family: GlmFamily,
    truth: Option<DenseTensor>,
}

impl Dataset {
    pub fn new(
        covariates: &[DenseTensor],
        responses: Vec<f64>,
        family: GlmFamily,
        truth: Option<DenseTensor>,
    ) -> Result<Self> {
        let first = covariates
            .first()
            .ok_or_else(|| Error::Argument("dataset needs at least one sample".into()))?;
        let dims = first.dims().to_vec();
        if let Some(x) = covariates.iter().find(|x| x.dims() != dims.as_slice()) {
            return Err(Error::Shape(format!(
                "covariate dims {:?} differ from {:?}",
                x.dims(),
                dims
            )));
        }
        let n = covariates.len();
        let len = first.len();
        let design = Matrix::from_fn(n, len, |i, j| covariates[i].data()[j]);
        Self::from_design(dims, design, responses, family, truth)
    }

    pub fn from_design(
        dims: Vec<usize>,
        design: Matrix,
        responses: Vec<f64>,
        family: GlmFamily,
        truth: Option<DenseTensor>,
    ) -> Result<Self> {
        family.validate()?;
        let len: usize = dims.iter().product();
        if design.nrows() == 0 {
            return Err(Error::Argument("dataset needs at least one sample".into()));
        }
        if design.ncols() != len {
            return Err(Error::Shape(format!(
                "design has {} columns, dims {:?} need {}",
                design.ncols(),
                dims,
                len
            )));
        }
        if responses.len() != design.nrows() {
            return Err(Error::Shape(format!(
                "{} responses for {} covariates",
                responses.len(),
                design.nrows()
            )));
        }
        if let Some(t) = &truth {
            if t.dims() != dims.as_slice() {
                return Err(Error::Shape(format!(
                    "truth dims {:?} differ from covariate dims {:?}",
                    t.dims(),
                    dims
                )));
            }
        }
        Ok(Self {
            dims,
            design,
            responses,
            family,
            truth,
        })
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn family(&self) -> &GlmFamily {
        &self.family
    }

    pub fn truth(&self) -> Option<&DenseTensor> {
        self.truth.as_ref()
    }

    pub fn covariate(&self, i: usize) -> DenseTensor {
        let row: Vec<f64> = self.design.row(i).iter().copied().collect();
        DenseTensor::new(self.dims.clone(), row).expect("row length matches dims")
    }

    /// `θ_i = <X_i, A>` for every sample.
    pub fn linear_predictor(&self, a: &DenseTensor) -> Result<DVector<f64>> {
        if a.dims() != self.dims.as_slice() {
            return Err(Error::Shape(format!(
                "coefficient dims {:?} differ from covariate dims {:?}",
                a.dims(),
                self.dims
            )));
        }
        Ok(&self.design * DVector::from_column_slice(a.data()))
    }

    /// `Xᵀ w / n` reshaped to the coefficient dims.
    pub(crate) fn adjoint(&self, w: &DVector<f64>) -> DenseTensor {
        let g = self.design.tr_mul(w) / self.n() as f64;
        DenseTensor::new(self.dims.clone(), g.data.into()).expect("adjoint length")
    }
}

/// Mean loss from precomputed linear predictors.
pub(crate) fn mean_loss(family: &GlmFamily, theta: &DVector<f64>, y: &[f64]) -> f64 {
    theta
        .iter()
        .zip(y)
        .map(|(&t, &y)| family.loss(t, y))
        .sum::<f64>()
        / y.len() as f64
}

fn non_finite(a: &DenseTensor, theta: &DVector<f64>) -> Error {
    let max_theta = theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    Error::Numeric(format!(
        "objective is not finite at iterate with ‖A‖_F = {:e}, max |<X_i, A>| = {:e}",
        a.frobenius_norm(),
        max_theta
    ))
}

/// Empirical risk `(1/n) Σ loss(<X_i, A>, Y_i)`.
pub fn objective(data: &Dataset, a: &DenseTensor) -> Result<f64> {
    let theta = data.linear_predictor(a)?;
    let value = mean_loss(&data.family, &theta, &data.responses);
    if !value.is_finite() {
        return Err(non_finite(a, &theta));
    }
    Ok(value)
}

/// `(1/n) Σ (a'(<X_i, A>) − scale · Y_i) X_i`.
pub fn gradient(data: &Dataset, a: &DenseTensor) -> Result<DenseTensor> {
    Ok(evaluate(data, a)?.1)
}

/// Objective and gradient sharing one pass over the design.
pub fn evaluate(data: &Dataset, a: &DenseTensor) -> Result<(f64, DenseTensor)> {
    let theta = data.linear_predictor(a)?;
    let value = mean_loss(&data.family, &theta, &data.responses);
    if !value.is_finite() {
        return Err(non_finite(a, &theta));
    }
    let w = DVector::from_iterator(
        theta.len(),
        theta
            .iter()
            .zip(&data.responses)
            .map(|(&t, &y)| data.family.loss_derivative(t, y)),
    );
    let g = data.adjoint(&w);
    if !g.is_finite() {
        return Err(non_finite(a, &theta));
    }
    Ok((value, g))
}
