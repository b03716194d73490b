//! Hilbert's projective metric on positive functions over a finite set,
//! and the contraction rate of kernel integral operators under it.
//!
//! The metric on positive `f`, `g` is
//! `log sup(f/g) + log sup(g/f)`, which equals the oscillation of
//! `log f - log g`. Everything here works on log-values directly: no ratio
//! of function values is ever formed, so functions whose values span many
//! orders of magnitude cost no precision.

use rand::Rng;

use crate::cost::KernelTable;
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::numerics::oscillation;
use crate::rng::stream;

/// A strictly positive function on a finite set, stored as log-values.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveFunction {
    log_values: Vec<f64>,
}

impl PositiveFunction {
    /// Wraps strictly positive, finite values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::NonPositiveFunction);
        }
        let mut log_values = Vec::with_capacity(values.len());
        for &v in values {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositiveFunction);
            }
            log_values.push(v.ln());
        }
        Ok(Self { log_values })
    }

    /// Wraps finite log-values.
    pub fn from_log_values(log_values: Vec<f64>) -> Result<Self> {
        if log_values.is_empty() || log_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonPositiveFunction);
        }
        Ok(Self { log_values })
    }

    /// The constant function one.
    pub fn ones(len: usize) -> Self {
        Self {
            log_values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.log_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_values.is_empty()
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn values(&self) -> Vec<f64> {
        self.log_values.iter().map(|v| v.exp()).collect()
    }

    /// `sup f`, evaluated as `exp(max log f)`.
    pub fn sup(&self) -> f64 {
        let m = self
            .log_values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        m.exp()
    }

    /// `sup 1/f`, evaluated as `exp(-min log f)`.
    pub fn sup_of_reciprocal(&self) -> f64 {
        let m = self.log_values.iter().copied().fold(f64::INFINITY, f64::min);
        (-m).exp()
    }
}

/// Hilbert projective distance between two positive functions on a common
/// finite set: the oscillation of `log f - log g`.
///
/// It is symmetric, vanishes exactly when `f` is a positive multiple of
/// `g`, and is invariant under scaling either argument.
pub fn hilbert_metric(f: &PositiveFunction, g: &PositiveFunction) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::LengthMismatch {
            left: f.len(),
            right: g.len(),
            context: "hilbert metric".to_string(),
        });
    }
    let diffs: Vec<f64> = f
        .log_values
        .iter()
        .zip(&g.log_values)
        .map(|(a, b)| a - b)
        .collect();
    Ok(oscillation(&diffs))
}

/// Hilbert distance between the product functions `f(x) g(y)` and
/// `fh(x) gh(y)` on the grid, computed two ways.
#[derive(Debug, Clone, Copy)]
pub struct ProductHilbert {
    /// Oscillation of `log(fg) - log(fh gh)` over the full grid.
    pub grid: f64,
    /// Sum of the per-factor Hilbert distances. Agrees with `grid` up to
    /// rounding: the metric is additive over products.
    pub factor_sum: f64,
}

pub fn hilbert_metric_product(
    f: &PositiveFunction,
    fh: &PositiveFunction,
    g: &PositiveFunction,
    gh: &PositiveFunction,
) -> Result<ProductHilbert> {
    let df: Vec<f64> = f
        .log_values
        .iter()
        .zip(fh.log_values())
        .map(|(a, b)| a - b)
        .collect();
    if f.len() != fh.len() || g.len() != gh.len() {
        return Err(Error::LengthMismatch {
            left: f.len().max(g.len()),
            right: fh.len().max(gh.len()),
            context: "hilbert metric on products".to_string(),
        });
    }
    let dg: Vec<f64> = g
        .log_values
        .iter()
        .zip(gh.log_values())
        .map(|(a, b)| a - b)
        .collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &a in &df {
        for &b in &dg {
            let v = a + b;
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
    }
    let factor_sum = oscillation(&df) + oscillation(&dg);
    Ok(ProductHilbert {
        grid: hi - lo,
        factor_sum,
    })
}

/// Worst-case contraction rate of the kernel's integral operator in the
/// Hilbert metric: `tanh` of the sup-norm of the cost.
pub fn contraction_bound(kernel: &KernelTable) -> f64 {
    kernel.cost_sup_norm().tanh()
}

/// Measures the contraction of the operator `f -> integral of K(., y) f
/// d pi` over `samples` random pairs of positive functions, returning the
/// largest observed ratio `d_H(Ef, Eg) / d_H(f, g)`.
///
/// Pairs closer than `1e-9` in the Hilbert metric are skipped so the ratio
/// stays well conditioned; if every pair is skipped the result is zero.
pub fn empirical_contraction(
    kernel: &KernelTable,
    pi: &DiscreteMeasure,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if pi.len() != kernel.input_len() {
        return Err(Error::LengthMismatch {
            left: pi.len(),
            right: kernel.input_len(),
            context: "empirical contraction".to_string(),
        });
    }
    let mut rng = stream(seed, "hilbert.empirical-contraction");
    let n = kernel.input_len();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let f = random_log_values(&mut rng, n);
        let g = random_log_values(&mut rng, n);
        let f = PositiveFunction::from_log_values(f)?;
        let g = PositiveFunction::from_log_values(g)?;
        let before = hilbert_metric(&f, &g)?;
        if before < 1e-9 {
            continue;
        }
        let ef = kernel.apply_x(&f, pi)?;
        let eg = kernel.apply_x(&g, pi)?;
        let after = hilbert_metric(&ef, &eg)?;
        let ratio = after / before;
        if ratio > worst {
            worst = ratio;
        }
    }
    Ok(worst)
}

fn random_log_values(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}
