//! Translation-invariant power costs c(x,y) = |x-y|^p, p >= 1, with the
//! gradient in y needed by the Hessian band estimator.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    Euclidean,
    SquaredEuclidean,
    Power { p: f64 },
}

impl CostSpec {
    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("cost exponent p={p} must be >= 1")));
        }
        Ok(CostSpec::Power { p })
    }

    pub fn exponent(&self) -> f64 {
        match self {
            CostSpec::Euclidean => 1.0,
            CostSpec::SquaredEuclidean => 2.0,
            CostSpec::Power { p } => *p,
        }
    }
}

fn dist(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "points of dimension {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// |x - y|^p.
pub fn cost(spec: &CostSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    let r = dist(x, y)?;
    Ok(match spec {
        CostSpec::Euclidean => r,
        CostSpec::SquaredEuclidean => r * r,
        CostSpec::Power { p } => r.powf(*p),
    })
}

/// Gradient in y: p |x-y|^{p-2} (y - x). Singular at y = x when p < 2.
pub fn cost_grad_y(spec: &CostSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let p = spec.exponent();
    let r = dist(x, y)?;
    if r == 0.0 {
        if p < 2.0 {
            return Err(Error::SingularGradient);
        }
        return Ok(vec![0.0; x.len()]);
    }
    let scale = p * r.powf(p - 2.0);
    Ok(x.iter().zip(y).map(|(a, b)| scale * (b - a)).collect())
}
