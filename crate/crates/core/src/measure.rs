//! Probability measures with finite support, and the perturbations used to
//! set up paired stability experiments.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::sum;
use crate::rng::stream;
use crate::space::FiniteMetricSpace;

/// Slack allowed on the total mass of a measure.
pub const MASS_TOL: f64 = 1e-12;

/// A probability measure on the points of a [`FiniteMetricSpace`].
///
/// Weights are nonnegative and sum to one within [`MASS_TOL`]. Zero weights
/// are allowed here; solvers that need strictly positive marginals restrict
/// to the support when a problem is assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    space: Arc<FiniteMetricSpace>,
    weights: Vec<f64>,
}

fn validate_weights(space: &FiniteMetricSpace, weights: &[f64]) -> Result<()> {
    if weights.len() != space.len() {
        return Err(Error::WeightCount {
            expected: space.len(),
            got: weights.len(),
        });
    }
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: format!("weight {index}"),
            });
        }
        if value < 0.0 {
            return Err(Error::NegativeWeight { index, value });
        }
    }
    Ok(())
}

impl DiscreteMeasure {
    /// Wraps weights that already sum to one within [`MASS_TOL`].
    pub fn new(space: Arc<FiniteMetricSpace>, weights: Vec<f64>) -> Result<Self> {
        validate_weights(&space, &weights)?;
        let total = sum(&weights);
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::WeightSum { sum: total });
        }
        Ok(Self { space, weights })
    }

    /// Rescales arbitrary nonnegative weights to total mass one.
    ///
    /// Normalization runs twice: after the first division the residual of
    /// the sum is at the scale of one rounding error per atom, and the
    /// second division brings it to a few ulps regardless of support size.
    pub fn normalized(space: Arc<FiniteMetricSpace>, weights: Vec<f64>) -> Result<Self> {
        validate_weights(&space, &weights)?;
        let total = sum(&weights);
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let mut scaled: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let second = sum(&scaled);
        for w in &mut scaled {
            *w /= second;
        }
        Ok(Self {
            space,
            weights: scaled,
        })
    }

    /// The uniform measure.
    pub fn uniform(space: Arc<FiniteMetricSpace>) -> Self {
        let n = space.len();
        Self::normalized(space, vec![1.0; n])
            .expect("uniform weights on a non-empty space are valid")
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        sum(&self.weights)
    }

    /// Indices carrying strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }

    /// Drops zero-weight atoms, returning the measure on the restricted
    /// space together with the kept indices.
    pub fn restricted_to_support(&self) -> Result<(Self, Vec<usize>)> {
        let keep = self.support();
        if keep.is_empty() {
            return Err(Error::ZeroMass);
        }
        if keep.len() == self.weights.len() {
            return Ok((self.clone(), keep));
        }
        let space = Arc::new(self.space.restrict(&keep)?);
        let weights: Vec<f64> = keep.iter().map(|&i| self.weights[i]).collect();
        let measure = Self::new(space, weights)?;
        Ok((measure, keep))
    }
}

/// The ways a measure can be perturbed to produce the second leg of a
/// paired experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbMode {
    /// Multiplies each weight by `1 + u`, `u` uniform on
    /// `[-magnitude, magnitude]`, then renormalizes. Magnitudes above one
    /// can drive a weight negative, which is rejected.
    WeightJitter,
    /// Draws `ceil(magnitude)` points from the measure and returns the
    /// empirical frequencies on the same support.
    EmpiricalSubsample,
    /// Adds uniform noise on `[-magnitude, magnitude]` to every coordinate,
    /// returning a measure on the jittered support. Requires a
    /// coordinate-mode space.
    PointJitter,
}

impl PerturbMode {
    pub fn name(self) -> &'static str {
        match self {
            PerturbMode::WeightJitter => "weight-jitter",
            PerturbMode::EmpiricalSubsample => "empirical-subsample",
            PerturbMode::PointJitter => "point-jitter",
        }
    }
}

/// Produces a perturbed copy of `measure`. Deterministic in
/// `(mode, magnitude, seed)`.
pub fn perturb(
    measure: &DiscreteMeasure,
    mode: PerturbMode,
    magnitude: f64,
    seed: u64,
) -> Result<DiscreteMeasure> {
    if !magnitude.is_finite() || magnitude < 0.0 {
        return Err(Error::BadPerturbation(format!(
            "magnitude must be finite and nonnegative, got {magnitude}"
        )));
    }
    let mut rng = stream(seed, &format!("perturb.{}", mode.name()));
    match mode {
        PerturbMode::WeightJitter => {
            let mut jittered = Vec::with_capacity(measure.len());
            for (index, &w) in measure.weights().iter().enumerate() {
                let u: f64 = rng.random_range(-magnitude..=magnitude);
                let value = w * (1.0 + u);
                if value < 0.0 {
                    return Err(Error::BadPerturbation(format!(
                        "magnitude {magnitude} drives weight {index} negative"
                    )));
                }
                jittered.push(value);
            }
            DiscreteMeasure::normalized(Arc::clone(measure.space()), jittered)
        }
        PerturbMode::EmpiricalSubsample => {
            let draws = magnitude.ceil();
            if !(1.0..=1e9).contains(&draws) {
                return Err(Error::BadPerturbation(format!(
                    "subsample size ceil({magnitude}) is outside [1, 1e9]"
                )));
            }
            let draws = draws as u64;
            let mut counts = vec![0u64; measure.len()];
            for _ in 0..draws {
                let u: f64 = rng.random_range(0.0..1.0);
                counts[sample_index(measure.weights(), u)] += 1;
            }
            let weights: Vec<f64> =
                counts.iter().map(|&c| c as f64 / draws as f64).collect();
            DiscreteMeasure::normalized(Arc::clone(measure.space()), weights)
        }
        PerturbMode::PointJitter => {
            let points = measure.space().points().ok_or_else(|| {
                Error::BadPerturbation(
                    "point-jitter needs a coordinate-mode support".to_string(),
                )
            })?;
            let mut jittered = Vec::with_capacity(points.nrows());
            for row in points.rows() {
                let moved: Vec<f64> = row
                    .iter()
                    .map(|&v| v + rng.random_range(-magnitude..=magnitude))
                    .collect();
                jittered.push(moved);
            }
            let space = Arc::new(FiniteMetricSpace::from_points(&jittered)?);
            DiscreteMeasure::new(space, measure.weights().to_vec())
        }
    }
}

/// Inverse-CDF draw: the first index whose cumulative weight exceeds `u`.
fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
