//! Discrete entropic optimal transport with measured stability.
//!
//! The crate solves static Schrodinger bridge problems on finite metric
//! spaces by iterative proportional fitting in the log domain, and it
//! ships the instruments needed to watch that solver from the outside:
//! an exact Wasserstein-1 solver built on the transportation simplex, a
//! Hilbert projective metric for positive functions and their products,
//! and a harness that runs perturbed problem pairs side by side and
//! checks every observed distance against the quantitative stability
//! bound that covers it.
//!
//! The intended loop: describe marginals and a cost in JSON, iterate,
//! and read back per-sweep CSV that pairs each observation with its
//! bound. Everything is deterministic; randomness only enters through
//! explicitly seeded perturbations and sampling helpers.

pub mod cost;
pub mod error;
pub mod formats;
pub mod hilbert;
pub mod ipfp;
pub mod measure;
pub mod numerics;
pub mod rng;
pub mod space;
pub mod stability;
pub mod w1;

pub use cost::{CostModel, KernelTable, LipProvenance, LipschitzConstant};
pub use error::{Error, Result};
pub use hilbert::{hilbert_metric, PositiveFunction};
pub use ipfp::{run_ipfp, Coupling, CouplingParity, PotentialPair, SchrodingerProblem, Trajectory};
pub use measure::{perturb, DiscreteMeasure, PerturbMode};
pub use space::FiniteMetricSpace;
pub use stability::{bridge_stability, run_stability_experiment, StabilityReport};
pub use w1::{wasserstein1, wasserstein1_coupling, TransportPlan};
