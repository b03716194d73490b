//! JSON input formats and the builders that turn them into live objects.
//!
//! Three document kinds exist: measure files (a support given either by
//! coordinates or by a distance table, plus optional weights), cost
//! specifications, and experiment configurations tying the pieces
//! together. All parsers reject unknown fields and return errors instead
//! of panicking, whatever the input bytes.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::ipfp::SchrodingerProblem;
use crate::measure::{perturb, DiscreteMeasure, PerturbMode};
use crate::numerics::sum;
use crate::space::FiniteMetricSpace;

/// Mass drift tolerated in a measure file before weights get renormalized
/// on load.
const LOAD_MASS_TOL: f64 = 1e-12;

/// A measure document. Exactly one of `points` and `distances` describes
/// the support; omitted `weights` mean uniform.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl MeasureFile {
    pub fn validate(&self) -> Result<()> {
        match (&self.points, &self.distances) {
            (Some(_), Some(_)) => Err(Error::BadConfig(
                "measure file sets both points and distances".to_string(),
            )),
            (None, None) => Err(Error::BadConfig(
                "measure file sets neither points nor distances".to_string(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Quadratic,
    Absolute,
    Table,
}

/// A cost specification. Which optional fields must be present depends on
/// `type`; [`CostSpec::validate`] enforces the pairing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    #[serde(rename = "type")]
    pub kind: CostKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<f64>>>,
}

impl CostSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            CostKind::Quadratic => {
                if self.epsilon.is_none() {
                    return Err(Error::BadConfig(
                        "quadratic cost needs epsilon".to_string(),
                    ));
                }
                if self.table.is_some() {
                    return Err(Error::BadConfig(
                        "quadratic cost takes no table".to_string(),
                    ));
                }
            }
            CostKind::Absolute => {
                if self.table.is_some() {
                    return Err(Error::BadConfig(
                        "absolute cost takes no table".to_string(),
                    ));
                }
            }
            CostKind::Table => {
                if self.table.is_none() {
                    return Err(Error::BadConfig("table cost needs a table".to_string()));
                }
                if self.epsilon.is_some() {
                    return Err(Error::BadConfig(
                        "table cost takes no epsilon".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbKind {
    WeightJitter,
    EmpiricalSubsample,
    PointJitter,
}

impl PerturbKind {
    pub fn mode(self) -> PerturbMode {
        match self {
            PerturbKind::WeightJitter => PerturbMode::WeightJitter,
            PerturbKind::EmpiricalSubsample => PerturbMode::EmpiricalSubsample,
            PerturbKind::PointJitter => PerturbMode::PointJitter,
        }
    }
}

/// How to synthesize the perturbed marginals when explicit ones are not
/// given.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub mode: PerturbKind,
    pub magnitude: f64,
    pub seed: u64,
}

fn default_max_iters() -> usize {
    500
}

fn default_tol() -> f64 {
    1e-10
}

/// Experiment configuration shared by the solve and stability commands.
/// Measure paths are resolved relative to the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pi0: String,
    pub pi1: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi0_hat: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi1_hat: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    pub cost: CostSpec,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lip_override: Option<f64>,
}

impl ExperimentConfig {
    fn validate_common(&self) -> Result<()> {
        self.cost.validate()?;
        if self.max_iters == 0 {
            return Err(Error::BadConfig("max_iters must be at least 1".to_string()));
        }
        if !self.tol.is_finite() || self.tol < 0.0 {
            return Err(Error::BadConfig(
                "tol must be finite and nonnegative".to_string(),
            ));
        }
        if let Some(p) = &self.perturbation {
            if !p.magnitude.is_finite() || p.magnitude < 0.0 {
                return Err(Error::BadConfig(
                    "perturbation magnitude must be finite and nonnegative".to_string(),
                ));
            }
        }
        if self.lip_override.is_some() && self.kind() != CostKind::Table {
            return Err(Error::BadConfig(
                "lip_override only applies to table costs".to_string(),
            ));
        }
        if self.pi0_hat.is_some() != self.pi1_hat.is_some() {
            return Err(Error::BadConfig(
                "pi0_hat and pi1_hat must be given together".to_string(),
            ));
        }
        Ok(())
    }

    fn kind(&self) -> CostKind {
        self.cost.kind
    }

    /// Checks everything the solve command needs. Perturbation fields may
    /// be present so one file can drive both commands; solve ignores
    /// them.
    pub fn validate_solve(&self) -> Result<()> {
        self.validate_common()
    }

    /// Checks everything the stability command needs: exactly one source
    /// of perturbed marginals, and a perturbation mode that keeps the
    /// support fixed.
    pub fn validate_stability(&self) -> Result<()> {
        self.validate_common()?;
        let has_hats = self.pi0_hat.is_some();
        let has_perturbation = self.perturbation.is_some();
        match (has_hats, has_perturbation) {
            (true, true) => Err(Error::BadConfig(
                "give either explicit perturbed measures or a perturbation, not both"
                    .to_string(),
            )),
            (false, false) => Err(Error::BadConfig(
                "stability needs pi0_hat/pi1_hat or a perturbation".to_string(),
            )),
            _ => {
                if let Some(p) = &self.perturbation {
                    if p.mode == PerturbKind::PointJitter {
                        return Err(Error::BadConfig(
                            "point-jitter moves the support; stability requires a \
                             shared support"
                                .to_string(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }
}

pub fn parse_measure_file(text: &str) -> Result<MeasureFile> {
    let file: MeasureFile = serde_json::from_str(text)?;
    file.validate()?;
    Ok(file)
}

pub fn parse_cost_spec(text: &str) -> Result<CostSpec> {
    let spec: CostSpec = serde_json::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = serde_json::from_str(text)?;
    config.validate_solve()?;
    Ok(config)
}

/// Builds the measure a document describes, renormalizing drifted weights.
pub fn build_measure(file: &MeasureFile) -> Result<DiscreteMeasure> {
    file.validate()?;
    let space = Arc::new(match (&file.points, &file.distances) {
        (Some(points), None) => FiniteMetricSpace::from_points(points)?,
        (None, Some(rows)) => FiniteMetricSpace::from_distance_table(rows)?,
        _ => unreachable!("validate enforces exactly one support description"),
    });
    match &file.weights {
        None => Ok(DiscreteMeasure::uniform(space)),
        Some(weights) => {
            let mass = sum(weights);
            if (mass - 1.0).abs() > LOAD_MASS_TOL {
                log::info!("renormalizing measure weights with total mass {mass}");
                DiscreteMeasure::normalized(space, weights.clone())
            } else {
                DiscreteMeasure::new(space, weights.clone())
            }
        }
    }
}

/// Serializes a measure back into document form. Coordinate spaces keep
/// their points; table spaces dump the full distance table.
pub fn measure_to_file(measure: &DiscreteMeasure) -> MeasureFile {
    let space = measure.space();
    let (points, distances) = match space.points() {
        Some(array) => (
            Some(array.outer_iter().map(|row| row.to_vec()).collect()),
            None,
        ),
        None => {
            let n = space.len();
            let table = (0..n)
                .map(|i| (0..n).map(|j| space.distance(i, j)).collect())
                .collect();
            (None, Some(table))
        }
    };
    MeasureFile {
        points,
        distances,
        weights: Some(measure.weights().to_vec()),
    }
}

/// Builds the cost a specification describes over the given supports.
pub fn build_cost(
    spec: &CostSpec,
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    lip_override: Option<f64>,
) -> Result<CostModel> {
    spec.validate()?;
    match spec.kind {
        CostKind::Quadratic => {
            let epsilon = spec.epsilon.expect("validate requires epsilon");
            CostModel::quadratic(x, y, epsilon)
        }
        CostKind::Absolute => CostModel::absolute(x, y, spec.epsilon.unwrap_or(1.0)),
        CostKind::Table => {
            let rows = spec.table.as_ref().expect("validate requires a table");
            CostModel::from_table(x, y, rows, lip_override)
        }
    }
}

/// Resolves a config entry against the config file's directory; absolute
/// entries pass through.
pub fn resolve_path(config_path: &Path, entry: &str) -> PathBuf {
    match config_path.parent() {
        Some(dir) => dir.join(entry),
        None => PathBuf::from(entry),
    }
}

pub fn load_measure(path: &Path) -> Result<DiscreteMeasure> {
    let text = std::fs::read_to_string(path)?;
    build_measure(&parse_measure_file(&text)?)
}

pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_experiment_config(&text)
}

/// Loads the base problem an experiment config describes.
pub fn build_solve_problem(
    config: &ExperimentConfig,
    config_path: &Path,
) -> Result<SchrodingerProblem> {
    config.validate_solve()?;
    let pi0 = load_measure(&resolve_path(config_path, &config.pi0))?;
    let pi1 = load_measure(&resolve_path(config_path, &config.pi1))?;
    let cost = build_cost(&config.cost, pi0.space(), pi1.space(), config.lip_override)?;
    SchrodingerProblem::new(pi0, pi1, cost)
}

/// Loads the base and perturbed problems for a stability experiment.
/// Returns the seed that produced the perturbation, when one was drawn;
/// `seed_override` replaces the configured seed.
pub fn build_stability_pair(
    config: &ExperimentConfig,
    config_path: &Path,
    seed_override: Option<u64>,
) -> Result<(SchrodingerProblem, SchrodingerProblem, Option<u64>)> {
    config.validate_stability()?;
    let pi0 = load_measure(&resolve_path(config_path, &config.pi0))?;
    let pi1 = load_measure(&resolve_path(config_path, &config.pi1))?;
    let cost = build_cost(&config.cost, pi0.space(), pi1.space(), config.lip_override)?;

    let (pi0_hat, pi1_hat, seed) = match (&config.pi0_hat, &config.pi1_hat) {
        (Some(p0), Some(p1)) => {
            let a = load_measure(&resolve_path(config_path, p0))?;
            let b = load_measure(&resolve_path(config_path, p1))?;
            (a, b, None)
        }
        _ => {
            let spec = config
                .perturbation
                .as_ref()
                .expect("validate_stability requires a perturbation here");
            let seed = seed_override.unwrap_or(spec.seed);
            let mode = spec.mode.mode();
            let a = perturb(&pi0, mode, spec.magnitude, seed)?;
            let b = perturb(&pi1, mode, spec.magnitude, seed.wrapping_add(1))?;
            (a, b, Some(seed))
        }
    };

    let base = SchrodingerProblem::new(pi0, pi1, cost.clone())?;
    let hat = SchrodingerProblem::new(pi0_hat, pi1_hat, cost)?;
    Ok((base, hat, seed))
}
