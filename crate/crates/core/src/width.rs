//! Monte-Carlo Gaussian widths of the constraint cones intersected with the
//! unit Frobenius ball, and closed-form upper bounds.
//!
//! For a cone that is a union of subspaces with an exact Euclidean
//! projection `P`, `sup_{A ∈ Θ, ‖A‖ <= 1} <A, G> = ‖P(G)‖_F`: the supremum
//! over each subspace is attained at the normalized projection of `G` onto
//! it, and `P` picks the subspace capturing the most energy. This covers
//! Θ1 and Θ2. The Tucker projection is only approximate, so for Θ3 the
//! average of `‖P̂(G)‖_F` is reported as a lower bound.

use rayon::prelude::*;
use serde::Serialize;

use crate::datagen::{derive_seed, gaussian_tensor};
use crate::error::{Error, Result};
use crate::projection::ConstraintSpec;

/// Default number of Monte-Carlo draws.
pub const DEFAULT_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidthKind {
    ExactCone,
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WidthEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub kind: WidthKind,
}

/// Averages `‖P(G)‖_F` over `samples` standard normal tensors. Draw `i`
/// uses seed `derive_seed(seed, [i])`.
pub fn estimate_width_mc(
    spec: &ConstraintSpec,
    dims: &[usize],
    samples: usize,
    seed: u64,
) -> Result<WidthEstimate> {
    spec.validate(dims)?;
    if samples < 2 {
        return Err(Error::Argument(format!("need at least 2 samples, got {}", samples)));
    }
    let values = (0..samples)
        .into_par_iter()
        .map(|i| {
            let g = gaussian_tensor(dims, derive_seed(seed, &[i as u64]));
            Ok(spec.project(&g)?.frobenius_norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let kind = match spec {
        ConstraintSpec::Theta3 { .. } => WidthKind::LowerBound,
        _ => WidthKind::ExactCone,
    };
    Ok(WidthEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
        kind,
    })
}

/// `√(s r) · √(6 (d1 + d2 + ln d3))`.
pub fn width_bound_theta2(d1: usize, d2: usize, d3: usize, r: usize, s: usize) -> f64 {
    ((s * r) as f64).sqrt() * (6.0 * ((d1 + d2) as f64 + (d3 as f64).ln())).sqrt()
}

/// `√r · √(6 min{d1 + d2 d3, d2 + d1 d3, d3 + d1 d2})`.
pub fn width_bound_theta3(d1: usize, d2: usize, d3: usize, r: usize) -> f64 {
    let m = (d1 + d2 * d3).min(d2 + d1 * d3).min(d3 + d1 * d2);
    (r as f64).sqrt() * (6.0 * m as f64).sqrt()
}

/// Closed-form bound for the spec at `dims`, when one is available.
pub fn width_bound(spec: &ConstraintSpec, dims: &[usize]) -> Option<f64> {
    let &[d1, d2, d3] = dims else {
        return None;
    };
    match *spec {
        ConstraintSpec::Theta1 { .. } => None,
        ConstraintSpec::Theta2 { r, s } => Some(width_bound_theta2(d1, d2, d3, r, s)),
        ConstraintSpec::Theta3 { r } => Some(width_bound_theta3(d1, d2, d3, r)),
    }
}
