//! Iterative proportional fitting in normalized log-domain form.
//!
//! The static problem is a pair of marginals and a cost; the iteration
//! alternately fits each marginal of the entropic coupling. Everything is
//! carried as log-potentials `(phi_n, psi_n)`, with `phi_n` centered to
//! mean zero against the first marginal after every step. The centering
//! constants are not thrown away: their running sum `log_a` is stored on
//! each potential pair, because odd-indexed couplings need the constant
//! back to carry unit mass.
//!
//! Update for one step, writing `K` for the Gibbs kernel `exp(-c)`:
//!
//! ```text
//! L(x)      = log sum_y K(x, y) exp(psi_n(y)) pi1(y)
//! s         = sum_x L(x) pi0(x)
//! phi_n+1   = s - L                  (mean zero against pi0)
//! psi_n+1   = -log sum_x K(x, y) exp(phi_n+1(x)) pi0(x)
//! log_a_n+1 = log_a_n + s
//! ```
//!
//! Couplings are recovered as
//! `P[2n]   = exp(phi_n(x) + psi_n(y) - c) pi0(x) pi1(y)` and
//! `P[2n+1] = exp(phi_n+1(x) + psi_n(y) - c - s_n+1) pi0(x) pi1(y)`;
//! the even form has its second marginal fitted exactly, the odd form its
//! first.

use std::sync::Arc;

use ndarray::Array2;

use crate::cost::{lipschitz_estimate_on, CostModel, KernelTable};
use crate::error::{Error, Result};
use crate::hilbert::PositiveFunction;
use crate::measure::DiscreteMeasure;
use crate::numerics::{dot, l1_distance, oscillation, sum, sup_norm};
use crate::space::FiniteMetricSpace;

/// A static bridge problem: two strictly positive marginals on their
/// spaces and a cost between them.
///
/// Zero-weight atoms in either marginal are dropped here, with a logged
/// warning, so that every log-weight the iteration touches is finite.
#[derive(Debug, Clone)]
pub struct SchrodingerProblem {
    pi0: DiscreteMeasure,
    pi1: DiscreteMeasure,
    cost: CostModel,
    kernel: KernelTable,
    log_w0: Vec<f64>,
    log_w1: Vec<f64>,
}

impl SchrodingerProblem {
    pub fn new(
        pi0: DiscreteMeasure,
        pi1: DiscreteMeasure,
        cost: CostModel,
    ) -> Result<Self> {
        if cost.nx() != pi0.len() || cost.ny() != pi1.len() {
            return Err(Error::CostShape {
                rows: cost.nx(),
                cols: cost.ny(),
                expected_rows: pi0.len(),
                expected_cols: pi1.len(),
            });
        }
        let (pi0, keep0) = pi0.restricted_to_support()?;
        let (pi1, keep1) = pi1.restricted_to_support()?;
        let cost = if keep0.len() != cost.nx() || keep1.len() != cost.ny() {
            log::warn!(
                "dropping zero-weight atoms: {} kept of {} on X, {} kept of {} on Y",
                keep0.len(),
                cost.nx(),
                keep1.len(),
                cost.ny()
            );
            cost.sliced(&keep0, &keep1)
        } else {
            cost
        };
        let kernel = KernelTable::from_cost(&cost);
        let log_w0 = pi0.weights().iter().map(|&w| w.ln()).collect();
        let log_w1 = pi1.weights().iter().map(|&w| w.ln()).collect();
        Ok(Self {
            pi0,
            pi1,
            cost,
            kernel,
            log_w0,
            log_w1,
        })
    }

    pub fn pi0(&self) -> &DiscreteMeasure {
        &self.pi0
    }

    pub fn pi1(&self) -> &DiscreteMeasure {
        &self.pi1
    }

    pub fn x(&self) -> &Arc<FiniteMetricSpace> {
        self.pi0.space()
    }

    pub fn y(&self) -> &Arc<FiniteMetricSpace> {
        self.pi1.space()
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn kernel(&self) -> &KernelTable {
        &self.kernel
    }

    pub fn nx(&self) -> usize {
        self.pi0.len()
    }

    pub fn ny(&self) -> usize {
        self.pi1.len()
    }
}

/// Log-potentials after `index` fitting sweeps, plus the cumulative
/// centering constant `log_a`.
#[derive(Debug, Clone)]
pub struct PotentialPair {
    index: usize,
    phi: Vec<f64>,
    psi: Vec<f64>,
    log_a: f64,
}

impl PotentialPair {
    /// The starting pair: both potentials identically zero.
    pub fn initial(nx: usize, ny: usize) -> Self {
        Self {
            index: 0,
            phi: vec![0.0; nx],
            psi: vec![0.0; ny],
            log_a: 0.0,
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// Running sum of the centering constants applied so far.
    pub fn log_a(&self) -> f64 {
        self.log_a
    }

    /// `exp(phi)` as a positive function.
    pub fn f(&self) -> PositiveFunction {
        PositiveFunction::from_log_values(self.phi.clone())
            .expect("potentials are finite by construction")
    }

    /// `exp(psi)` as a positive function.
    pub fn g(&self) -> PositiveFunction {
        PositiveFunction::from_log_values(self.psi.clone())
            .expect("potentials are finite by construction")
    }
}

/// One full sweep: fit the first marginal, center, then fit the second.
pub fn ipfp_step(problem: &SchrodingerProblem, pair: &PotentialPair) -> Result<PotentialPair> {
    let l = problem.kernel.apply_log_y(&pair.psi, &problem.log_w1);
    let s_raw = dot(&l, problem.pi0.weights());
    let denom = sum(problem.pi0.weights());
    let s = s_raw / denom;
    let phi: Vec<f64> = l.iter().map(|&li| s - li).collect();
    let m = problem.kernel.apply_log_x(&phi, &problem.log_w0);
    let psi: Vec<f64> = m.iter().map(|&mj| -mj).collect();
    if phi.iter().chain(&psi).any(|v| !v.is_finite()) || !s.is_finite() {
        return Err(Error::NonFinite {
            context: format!("potentials at sweep {}", pair.index + 1),
        });
    }
    Ok(PotentialPair {
        index: pair.index + 1,
        phi,
        psi,
        log_a: pair.log_a + s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingParity {
    /// Index `2n`: second marginal fitted exactly.
    Even,
    /// Index `2n + 1`: first marginal fitted exactly.
    Odd,
}

/// A joint distribution over the problem grid, tagged with its position
/// in the fitting sequence.
///
/// Index 0 is the un-normalized reference coupling `K d(pi0 x pi1)`; its
/// mass is recorded rather than forced to one. All later indices carry
/// mass one up to rounding.
#[derive(Debug, Clone)]
pub struct Coupling {
    weights: Array2<f64>,
    index: usize,
    total_mass: f64,
}

impl Coupling {
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn parity(&self) -> CouplingParity {
        if self.index.is_multiple_of(2) {
            CouplingParity::Even
        } else {
            CouplingParity::Odd
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// The coupling rescaled to unit mass.
    pub fn normalized(&self) -> Self {
        let weights = self.weights.mapv(|w| w / self.total_mass);
        let total_mass = weights.iter().sum();
        Self {
            weights,
            index: self.index,
            total_mass,
        }
    }

    /// Row sums: the distribution of the first coordinate.
    pub fn marginal_x(&self) -> Vec<f64> {
        self.weights
            .rows()
            .into_iter()
            .map(|r| {
                let mut acc = 0.0;
                for &v in r {
                    acc += v;
                }
                acc
            })
            .collect()
    }

    /// Column sums: the distribution of the second coordinate.
    pub fn marginal_y(&self) -> Vec<f64> {
        (0..self.weights.ncols())
            .map(|j| {
                let mut acc = 0.0;
                for &v in self.weights.column(j) {
                    acc += v;
                }
                acc
            })
            .collect()
    }
}

/// The coupling at index `2 * pair.index`.
pub fn coupling_even(problem: &SchrodingerProblem, pair: &PotentialPair) -> Coupling {
    let log_k = problem.kernel.log_values();
    let mut weights = Array2::zeros((problem.nx(), problem.ny()));
    for i in 0..problem.nx() {
        for j in 0..problem.ny() {
            weights[[i, j]] = (pair.phi[i] + pair.psi[j] + log_k[[i, j]]).exp()
                * problem.pi0.weight(i)
                * problem.pi1.weight(j);
        }
    }
    let total_mass = grid_mass(&weights);
    Coupling {
        weights,
        index: 2 * pair.index,
        total_mass,
    }
}

/// The coupling at index `2 * older.index + 1`, built from two consecutive
/// potential pairs. The difference of their `log_a` values undoes the
/// centering applied to `newer.phi`, which is what restores unit mass.
pub fn coupling_odd(
    problem: &SchrodingerProblem,
    newer: &PotentialPair,
    older: &PotentialPair,
) -> Result<Coupling> {
    if newer.index != older.index + 1 {
        return Err(Error::InstanceMismatch(format!(
            "odd coupling needs consecutive potential pairs, got {} and {}",
            newer.index, older.index
        )));
    }
    let shift = newer.log_a - older.log_a;
    let log_k = problem.kernel.log_values();
    let mut weights = Array2::zeros((problem.nx(), problem.ny()));
    for i in 0..problem.nx() {
        for j in 0..problem.ny() {
            weights[[i, j]] = (newer.phi[i] + older.psi[j] + log_k[[i, j]] - shift)
                .exp()
                * problem.pi0.weight(i)
                * problem.pi1.weight(j);
        }
    }
    let total_mass = grid_mass(&weights);
    Ok(Coupling {
        weights,
        index: 2 * older.index + 1,
        total_mass,
    })
}

fn grid_mass(weights: &Array2<f64>) -> f64 {
    let mut acc = 0.0;
    for &v in weights.iter() {
        acc += v;
    }
    acc
}

/// L1 error of the marginal the coupling has not yet fitted: the first
/// marginal for even indices, the second for odd ones. The index-0
/// coupling is normalized before comparison since it does not carry unit
/// mass.
pub fn marginal_error(problem: &SchrodingerProblem, coupling: &Coupling) -> f64 {
    let normalized;
    let c = if coupling.index == 0 {
        normalized = coupling.normalized();
        &normalized
    } else {
        coupling
    };
    match c.parity() {
        CouplingParity::Even => l1_distance(&c.marginal_x(), problem.pi0.weights()),
        CouplingParity::Odd => l1_distance(&c.marginal_y(), problem.pi1.weights()),
    }
}

/// Per-sweep diagnostics recorded along a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct IterationDiagnostics {
    /// Sweep number, starting at 1.
    pub n: usize,
    /// L1 error of the unfitted marginal of the even coupling after this
    /// sweep.
    pub marginal_err: f64,
    /// Hilbert step `d_H(f_n, f_{n-1})`.
    pub dh_f_step: f64,
    /// Hilbert step `d_H(g_n, g_{n-1})`.
    pub dh_g_step: f64,
    pub phi_sup: f64,
    pub psi_sup: f64,
    /// Finite-difference Lipschitz estimate of `phi_n` on `X`.
    pub phi_lip: f64,
    /// Finite-difference Lipschitz estimate of `psi_n` on `Y`.
    pub psi_lip: f64,
}

/// Everything produced by a run: the potential pairs (index 0 through the
/// last sweep), per-sweep diagnostics, and where convergence happened.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pairs: Vec<PotentialPair>,
    diagnostics: Vec<IterationDiagnostics>,
    converged: Option<usize>,
}

/// Column header of the trajectory CSV.
pub const TRAJECTORY_CSV_HEADER: &str =
    "n,marginal_err,dH_f_step,dH_g_step,phi_sup,psi_sup,phi_lip,psi_lip";

impl Trajectory {
    /// Potential pair after `n` sweeps, if the run got that far.
    pub fn pair(&self, n: usize) -> Option<&PotentialPair> {
        self.pairs.get(n)
    }

    pub fn pairs(&self) -> &[PotentialPair] {
        &self.pairs
    }

    pub fn last_pair(&self) -> &PotentialPair {
        self.pairs.last().expect("trajectory holds at least pair 0")
    }

    /// Number of sweeps performed.
    pub fn sweeps(&self) -> usize {
        self.pairs.len() - 1
    }

    pub fn diagnostics(&self) -> &[IterationDiagnostics] {
        &self.diagnostics
    }

    /// First sweep at which the marginal error dropped below tolerance.
    pub fn converged(&self) -> Option<usize> {
        self.converged
    }

    /// The coupling at fitting index `m` (`m = 0` is the reference
    /// coupling; even `m = 2n` and odd `m = 2n+1` come from the stored
    /// pairs).
    pub fn coupling(&self, problem: &SchrodingerProblem, m: usize) -> Result<Coupling> {
        if m.is_multiple_of(2) {
            let pair = self.pair(m / 2).ok_or_else(|| {
                Error::InstanceMismatch(format!(
                    "coupling {m} needs potential pair {}, trajectory has {}",
                    m / 2,
                    self.sweeps()
                ))
            })?;
            Ok(coupling_even(problem, pair))
        } else {
            let k = (m - 1) / 2;
            let older = self.pair(k).ok_or_else(|| {
                Error::InstanceMismatch(format!("coupling {m} needs potential pair {k}"))
            })?;
            let newer = self.pair(k + 1).ok_or_else(|| {
                Error::InstanceMismatch(format!(
                    "coupling {m} needs potential pair {}",
                    k + 1
                ))
            })?;
            coupling_odd(problem, newer, older)
        }
    }

    /// Renders the diagnostics as CSV with the fixed column header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAJECTORY_CSV_HEADER);
        out.push('\n');
        for d in &self.diagnostics {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                d.n,
                d.marginal_err,
                d.dh_f_step,
                d.dh_g_step,
                d.phi_sup,
                d.psi_sup,
                d.phi_lip,
                d.psi_lip
            ));
        }
        out
    }
}

/// Runs the fitting iteration until the even coupling's unfitted marginal
/// is within `tol` in L1, or `max_iters` sweeps have been performed.
///
/// Passing `tol = 0` forces the full `max_iters` sweeps; the trajectory
/// then reports no convergence sweep. This is not an error: callers that
/// need a converged run check [`Trajectory::converged`].
pub fn run_ipfp(
    problem: &SchrodingerProblem,
    max_iters: usize,
    tol: f64,
) -> Result<Trajectory> {
    let mut pairs = vec![PotentialPair::initial(problem.nx(), problem.ny())];
    let mut diagnostics = Vec::new();
    let mut converged = None;
    for n in 1..=max_iters {
        let prev = pairs.last().expect("nonempty");
        let next = ipfp_step(problem, prev)?;
        let even = coupling_even(problem, &next);
        let marginal_err = marginal_error(problem, &even);
        let df: Vec<f64> = next
            .phi
            .iter()
            .zip(&prev.phi)
            .map(|(a, b)| a - b)
            .collect();
        let dg: Vec<f64> = next
            .psi
            .iter()
            .zip(&prev.psi)
            .map(|(a, b)| a - b)
            .collect();
        diagnostics.push(IterationDiagnostics {
            n,
            marginal_err,
            dh_f_step: oscillation(&df),
            dh_g_step: oscillation(&dg),
            phi_sup: sup_norm(&next.phi),
            psi_sup: sup_norm(&next.psi),
            phi_lip: lipschitz_estimate_on(problem.x(), &next.phi),
            psi_lip: lipschitz_estimate_on(problem.y(), &next.psi),
        });
        pairs.push(next);
        if marginal_err < tol {
            converged = Some(n);
            break;
        }
    }
    Ok(Trajectory {
        pairs,
        diagnostics,
        converged,
    })
}
