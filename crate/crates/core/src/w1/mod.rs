//! Exact Wasserstein-1 distances on finite supports.
//!
//! This is the measuring stick the rest of the crate is judged against, so
//! it is solved exactly (a transportation simplex with an optimality check)
//! rather than approximated. Distances between measures sharing a support
//! first cancel the common mass `min(mu, nu)` atom by atom; the ground
//! metric satisfies the triangle inequality, so moving mass a distance of
//! zero is always optimal and the cancellation changes nothing. What
//! remains is a much smaller positive-difference instance.

mod simplex;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ipfp::Coupling;
use crate::measure::DiscreteMeasure;
use crate::space::{cross_distance, product_distance, FiniteMetricSpace};
use simplex::{solve, TransportInstance};

/// Hard cap on the number of edges a single transport instance may have.
pub const EDGE_CAP: usize = 1_000_000;

/// Default weight below which coupling atoms are dropped before the flow
/// solver runs.
pub const COUPLING_ATOM_FLOOR: f64 = 1e-15;

/// An optimal transport plan between two measures, with rows indexing the
/// first measure's atoms and columns the second's.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    flow: Array2<f64>,
    value: f64,
}

impl TransportPlan {
    /// Total cost of the plan, i.e. the Wasserstein-1 distance.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn flow(&self) -> &Array2<f64> {
        &self.flow
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.flow
            .rows()
            .into_iter()
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.flow.ncols())
            .map(|j| self.flow.column(j).iter().sum())
            .collect()
    }
}

fn check_edge_cap(edges: usize) -> Result<()> {
    if edges > EDGE_CAP {
        return Err(Error::InstanceTooLarge {
            edges,
            cap: EDGE_CAP,
        });
    }
    Ok(())
}

/// Wasserstein-1 distance between two measures, together with an optimal
/// plan.
///
/// The ground metric is taken from the supports: measures on the same
/// space use that space's metric, measures on different coordinate
/// supports of equal dimension use the Euclidean distance between their
/// points. Any other combination has no canonical metric and is rejected.
pub fn wasserstein1(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<TransportPlan> {
    let same_space = std::sync::Arc::ptr_eq(mu.space(), nu.space())
        || mu.space().as_ref() == nu.space().as_ref();
    if same_space {
        let space = mu.space().as_ref();
        return cancelled_transport(mu.weights(), nu.weights(), |i, j| {
            space.distance(i, j)
        });
    }
    // Distinct supports: need coordinates on both sides.
    let mx = mu.space().points().is_some();
    let nx = nu.space().points().is_some();
    if !(mx && nx) {
        return Err(Error::MetricUndefined(
            "supports differ and at least one has no coordinates".to_string(),
        ));
    }
    let sources: Vec<usize> = mu.support();
    let sinks: Vec<usize> = nu.support();
    if sources.is_empty() || sinks.is_empty() {
        return Err(Error::ZeroMass);
    }
    check_edge_cap(sources.len() * sinks.len())?;
    let mut cost = Vec::with_capacity(sources.len() * sinks.len());
    for &i in &sources {
        for &j in &sinks {
            cost.push(cross_distance(mu.space(), nu.space(), i, j)?);
        }
    }
    let instance = TransportInstance {
        supply: sources.iter().map(|&i| mu.weight(i)).collect(),
        demand: sinks.iter().map(|&j| nu.weight(j)).collect(),
        cost,
    };
    let solution = solve(&instance)?;
    let mut flow = Array2::zeros((mu.len(), nu.len()));
    for &(r, c, f) in &solution.flows {
        flow[[sources[r], sinks[c]]] += f;
    }
    Ok(TransportPlan {
        flow,
        value: solution.value,
    })
}

/// Transport between two weight vectors over one support, cancelling the
/// shared mass first.
fn cancelled_transport(
    wa: &[f64],
    wb: &[f64],
    dist: impl Fn(usize, usize) -> f64,
) -> Result<TransportPlan> {
    let n = wa.len();
    if wb.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: wb.len(),
            context: "transport on a common support".to_string(),
        });
    }
    let mut flow = Array2::zeros((n, n));
    let mut excess = Vec::new();
    let mut deficit = Vec::new();
    for i in 0..n {
        let common = wa[i].min(wb[i]);
        flow[[i, i]] = common;
        let a = wa[i] - common;
        let b = wb[i] - common;
        if a > 0.0 {
            excess.push((i, a));
        }
        if b > 0.0 {
            deficit.push((i, b));
        }
    }
    if excess.is_empty() || deficit.is_empty() {
        return Ok(TransportPlan { flow, value: 0.0 });
    }
    check_edge_cap(excess.len() * deficit.len())?;
    let mut cost = Vec::with_capacity(excess.len() * deficit.len());
    for &(i, _) in &excess {
        for &(j, _) in &deficit {
            cost.push(dist(i, j));
        }
    }
    let instance = TransportInstance {
        supply: excess.iter().map(|&(_, a)| a).collect(),
        demand: deficit.iter().map(|&(_, b)| b).collect(),
        cost,
    };
    let solution = solve(&instance)?;
    for &(r, c, f) in &solution.flows {
        flow[[excess[r].0, deficit[c].0]] += f;
    }
    Ok(TransportPlan {
        flow,
        value: solution.value,
    })
}

/// Wasserstein-1 distance between two couplings over the same product
/// grid, under the sum metric
/// `d((x,y),(x',y')) = d_X(x,x') + d_Y(y,y')`. Atoms below `floor` are
/// dropped on both sides before the solver runs.
pub fn wasserstein1_grid(
    pa: &Array2<f64>,
    pb: &Array2<f64>,
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    floor: f64,
) -> Result<f64> {
    if pa.dim() != pb.dim() {
        return Err(Error::LengthMismatch {
            left: pa.len(),
            right: pb.len(),
            context: "coupling distance".to_string(),
        });
    }
    if pa.nrows() != x.len() || pa.ncols() != y.len() {
        return Err(Error::LengthMismatch {
            left: pa.nrows() * pa.ncols(),
            right: x.len() * y.len(),
            context: "coupling grid against spaces".to_string(),
        });
    }
    let ny = pa.ncols();
    let clip = |w: f64| if w < floor { 0.0 } else { w };
    let mass_a: f64 = pa.iter().map(|&w| clip(w)).sum();
    let mass_b: f64 = pb.iter().map(|&w| clip(w)).sum();
    if (mass_a - mass_b).abs() > 1e-9 * mass_a.max(mass_b).max(1.0) {
        return Err(Error::MassMismatch {
            left: mass_a,
            right: mass_b,
        });
    }
    let mut excess = Vec::new();
    let mut deficit = Vec::new();
    for (idx, (&a_raw, &b_raw)) in pa.iter().zip(pb.iter()).enumerate() {
        let a = clip(a_raw);
        let b = clip(b_raw);
        if a > b {
            excess.push((idx, a - b));
        } else if b > a {
            deficit.push((idx, b - a));
        }
    }
    if excess.is_empty() || deficit.is_empty() {
        return Ok(0.0);
    }
    check_edge_cap(excess.len() * deficit.len())?;
    let mut cost = Vec::with_capacity(excess.len() * deficit.len());
    for &(p, _) in &excess {
        let pij = (p / ny, p % ny);
        for &(q, _) in &deficit {
            let qij = (q / ny, q % ny);
            cost.push(product_distance(x, y, pij, qij));
        }
    }
    let instance = TransportInstance {
        supply: excess.iter().map(|&(_, a)| a).collect(),
        demand: deficit.iter().map(|&(_, b)| b).collect(),
        cost,
    };
    Ok(solve(&instance)?.value)
}

/// [`wasserstein1_grid`] with the default atom floor, reading the grids
/// out of two couplings.
pub fn wasserstein1_coupling(
    a: &Coupling,
    b: &Coupling,
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
) -> Result<f64> {
    wasserstein1_grid(a.weights(), b.weights(), x, y, COUPLING_ATOM_FLOOR)
}
