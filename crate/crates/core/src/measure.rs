//! Discrete measures aligned to a space's nodes, and relative entropy.

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Nonnegative masses on a fixed node set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub weights: Vec<f64>,
    pub total: f64,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(&w) = weights.iter().find(|&&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Parameter {
                name: "weights",
                reason: format!("weights must be finite and nonnegative, got {w}"),
            });
        }
        let total = pairwise_sum(&weights);
        Ok(Self { weights, total })
    }

    /// A probability measure; rejects totals off 1 beyond accumulated rounding.
    pub fn probability(weights: Vec<f64>) -> Result<Self> {
        let m = Self::new(weights)?;
        if (m.total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter {
                name: "weights",
                reason: format!("probability vector must sum to 1, got {}", m.total),
            });
        }
        Ok(m)
    }

    /// Rescale to total mass 1.
    pub fn normalized(&self) -> Result<Self> {
        if self.total <= 0.0 {
            return Err(Error::DegeneratePrior);
        }
        let weights: Vec<f64> = self.weights.iter().map(|w| w / self.total).collect();
        Ok(Self { total: pairwise_sum(&weights), weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Entropy of `mu` relative to `nu`: the nu-integral of (dmu/dnu) ln(dmu/dnu),
/// with the 0 ln 0 = 0 convention. Returns +inf when `mu` puts mass where `nu`
/// has none (mu is then not absolutely continuous with respect to nu).
pub fn relative_entropy(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::Alignment(mu.len(), nu.len()));
    }
    if (mu.total - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter {
            name: "mu",
            reason: format!("mu must be a probability measure, total = {}", mu.total),
        });
    }
    let mut terms = Vec::with_capacity(mu.len());
    for (&m, &n) in mu.weights.iter().zip(&nu.weights) {
        if n > 0.0 {
            if m > 0.0 {
                terms.push(m * (m / n).ln());
            }
        } else if m > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(pairwise_sum(&terms))
}
