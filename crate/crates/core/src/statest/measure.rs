use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::RngStream;

pub type BlochVector = [f64; 3];

/// Measurement directions must be unit vectors within this tolerance.
pub const UNIT_TOL: f64 = 1e-12;

pub fn norm(y: &BlochVector) -> f64 {
    y.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn dot(a: &BlochVector, b: &BlochVector) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projectors (I + n̂_j·σ)/2 given by their directions n̂_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    directions: Vec<BlochVector>,
}

impl MeasurementPlan {
    pub fn new(directions: Vec<BlochVector>) -> Result<Self> {
        for (j, n) in directions.iter().enumerate() {
            if !n.iter().all(|c| c.is_finite()) || (norm(n) - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidArgument(format!(
                    "direction {j} has norm {}, expected 1",
                    norm(n)
                )));
            }
        }
        Ok(MeasurementPlan { directions })
    }

    /// `per_axis` measurements along each of x, y and z, in that order.
    pub fn axis_balanced(per_axis: usize) -> Self {
        let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let directions = axes
            .iter()
            .flat_map(|a| std::iter::repeat_n(*a, per_axis))
            .collect();
        MeasurementPlan { directions }
    }

    pub fn directions(&self) -> &[BlochVector] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// p = ⟨Ψ|P̂|Ψ⟩ = (1 + n̂·y)/2.
pub fn outcome_probability(state: &BlochVector, direction: &BlochVector) -> f64 {
    (0.5 * (1.0 + dot(state, direction))).clamp(0.0, 1.0)
}

/// Uniform on the unit sphere via a normalized Gaussian vector.
pub fn sample_state_uniform(rng: &mut RngStream) -> BlochVector {
    loop {
        let g = [rng.gaussian_std(), rng.gaussian_std(), rng.gaussian_std()];
        let r = norm(&g);
        if r > 1e-300 {
            return [g[0] / r, g[1] / r, g[2] / r];
        }
    }
}

/// Independent Bernoulli outcomes, one per projector.
pub fn simulate_outcomes(state: &BlochVector, plan: &MeasurementPlan, rng: &mut RngStream) -> Result<Vec<u8>> {
    let r = norm(state);
    if !r.is_finite() || r > 1.0 + UNIT_TOL {
        return Err(Error::InvalidArgument(format!("Bloch vector has norm {r} > 1")));
    }
    Ok(plan
        .directions()
        .iter()
        .map(|n| u8::from(rng.uniform01() < outcome_probability(state, n)))
        .collect())
}
