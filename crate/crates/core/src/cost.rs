//! Cost tables on a pair of supports and the Gibbs kernels they induce.
//!
//! A cost is a dense table `c[i][j]` over `X x Y` together with its
//! sup-norm and a Lipschitz constant for the sum metric
//! `d((x,y),(x',y')) = d_X(x,x') + d_Y(y,y')`. The kernel is represented by
//! its log-table `-c`; pointwise kernel values are derived on demand, so
//! nothing downstream ever takes the log of an exponential it just formed.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hilbert::PositiveFunction;
use crate::measure::DiscreteMeasure;
use crate::numerics::log_sum_exp;
use crate::space::FiniteMetricSpace;

/// How a Lipschitz constant was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipProvenance {
    /// Closed-form constant valid for the cost family.
    Analytic,
    /// Largest finite-difference ratio over the support grid. A lower
    /// bound for the constant of any continuum instance the grid samples,
    /// so downstream bound checks that use it are advisory.
    DiscreteEstimate,
}

impl LipProvenance {
    pub fn name(self) -> &'static str {
        match self {
            LipProvenance::Analytic => "analytic",
            LipProvenance::DiscreteEstimate => "discrete-estimate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzConstant {
    pub value: f64,
    pub provenance: LipProvenance,
}

/// A cost table together with the constants the stability bounds consume.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    table: Array2<f64>,
    sup_norm: f64,
    lip: LipschitzConstant,
}

fn table_sup_norm(table: &Array2<f64>) -> f64 {
    table.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

fn point_norms(space: &FiniteMetricSpace) -> Option<Vec<f64>> {
    let points = space.points()?;
    Some(
        points
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect(),
    )
}

impl CostModel {
    /// Scaled squared Euclidean cost `|x - y|^2 / epsilon` with the
    /// closed-form Lipschitz constant
    /// `2 (max |x| + max |y|) / epsilon`.
    pub fn quadratic(
        x: &FiniteMetricSpace,
        y: &FiniteMetricSpace,
        epsilon: f64,
    ) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::BadEpsilon { value: epsilon });
        }
        let (px, py) = coordinate_pair(x, y, "quadratic cost")?;
        let mut table = Array2::zeros((x.len(), y.len()));
        for i in 0..x.len() {
            for j in 0..y.len() {
                let mut acc = 0.0;
                for k in 0..px.ncols() {
                    let d = px[[i, k]] - py[[j, k]];
                    acc += d * d;
                }
                table[[i, j]] = acc / epsilon;
            }
        }
        let nx = point_norms(x).expect("coordinate mode checked above");
        let ny = point_norms(y).expect("coordinate mode checked above");
        let max_x = nx.iter().copied().fold(0.0f64, f64::max);
        let max_y = ny.iter().copied().fold(0.0f64, f64::max);
        let sup_norm = table_sup_norm(&table);
        Ok(Self {
            table,
            sup_norm,
            lip: LipschitzConstant {
                value: 2.0 * (max_x + max_y) / epsilon,
                provenance: LipProvenance::Analytic,
            },
        })
    }

    /// Scaled Euclidean cost `|x - y| / epsilon`, Lipschitz constant
    /// `1 / epsilon`.
    pub fn absolute(
        x: &FiniteMetricSpace,
        y: &FiniteMetricSpace,
        epsilon: f64,
    ) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::BadEpsilon { value: epsilon });
        }
        let (px, py) = coordinate_pair(x, y, "absolute cost")?;
        let mut table = Array2::zeros((x.len(), y.len()));
        for i in 0..x.len() {
            for j in 0..y.len() {
                let mut acc = 0.0;
                for k in 0..px.ncols() {
                    let d = px[[i, k]] - py[[j, k]];
                    acc += d * d;
                }
                table[[i, j]] = acc.sqrt() / epsilon;
            }
        }
        let sup_norm = table_sup_norm(&table);
        Ok(Self {
            table,
            sup_norm,
            lip: LipschitzConstant {
                value: 1.0 / epsilon,
                provenance: LipProvenance::Analytic,
            },
        })
    }

    /// Wraps an explicit cost table. Without an override the Lipschitz
    /// constant is the finite-difference estimate over the grid; an
    /// override is treated as analytic and must dominate that estimate.
    pub fn from_table(
        x: &FiniteMetricSpace,
        y: &FiniteMetricSpace,
        rows: &[Vec<f64>],
        lip_override: Option<f64>,
    ) -> Result<Self> {
        if rows.len() != x.len() || rows.iter().any(|r| r.len() != y.len()) {
            let cols = rows.first().map_or(0, |r| r.len());
            return Err(Error::CostShape {
                rows: rows.len(),
                cols,
                expected_rows: x.len(),
                expected_cols: y.len(),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "cost table".to_string(),
            });
        }
        let table = Array2::from_shape_vec((x.len(), y.len()), flat)
            .expect("shape checked above");
        let estimate = discrete_lipschitz(x, y, &table)?;
        let lip = match lip_override {
            Some(value) => {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::BadConfig(format!(
                        "Lipschitz override must be finite and nonnegative, got {value}"
                    )));
                }
                if value < estimate - 1e-12 {
                    return Err(Error::BadConfig(format!(
                        "Lipschitz override {value} is below the grid estimate {estimate}"
                    )));
                }
                LipschitzConstant {
                    value,
                    provenance: LipProvenance::Analytic,
                }
            }
            None => LipschitzConstant {
                value: estimate,
                provenance: LipProvenance::DiscreteEstimate,
            },
        };
        let sup_norm = table_sup_norm(&table);
        Ok(Self {
            table,
            sup_norm,
            lip,
        })
    }

    pub fn table(&self) -> &Array2<f64> {
        &self.table
    }

    pub fn nx(&self) -> usize {
        self.table.nrows()
    }

    pub fn ny(&self) -> usize {
        self.table.ncols()
    }

    /// `sup |c|`. Costs may be negative, so this is the sup of absolute
    /// values.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn lip(&self) -> LipschitzConstant {
        self.lip
    }

    /// The restriction of the cost to a sub-grid. The stored Lipschitz
    /// constant still dominates the restricted table, so it is kept; the
    /// sup-norm is recomputed on the slice.
    pub fn sliced(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut table = Array2::zeros((rows.len(), cols.len()));
        for (r, &i) in rows.iter().enumerate() {
            for (c, &j) in cols.iter().enumerate() {
                table[[r, c]] = self.table[[i, j]];
            }
        }
        let sup_norm = table_sup_norm(&table);
        Self {
            table,
            sup_norm,
            lip: self.lip,
        }
    }
}

fn coordinate_pair<'a>(
    x: &'a FiniteMetricSpace,
    y: &'a FiniteMetricSpace,
    context: &str,
) -> Result<(&'a Array2<f64>, &'a Array2<f64>)> {
    let (px, py) = match (x.points(), y.points()) {
        (Some(px), Some(py)) => (px, py),
        _ => {
            return Err(Error::CoordinatesRequired {
                context: context.to_string(),
            })
        }
    };
    if px.ncols() != py.ncols() {
        return Err(Error::CrossDimension {
            left: px.ncols(),
            right: py.ncols(),
        });
    }
    Ok((px, py))
}

/// Largest finite-difference ratio `|c(p) - c(q)| / d(p, q)` over pairs of
/// grid points of `X x Y` under the sum metric.
///
/// Pairs at distance zero with equal cost are skipped. A pair at distance
/// zero with differing cost makes the ratio unbounded, and the result is
/// infinity. If no pair has positive distance the ratio is undefined and
/// an error is returned.
pub fn discrete_lipschitz(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    table: &Array2<f64>,
) -> Result<f64> {
    let n = x.len();
    let m = y.len();
    let mut best = 0.0f64;
    let mut any_positive = false;
    for i in 0..n {
        for j in 0..m {
            for k in 0..n {
                for l in 0..m {
                    if (k, l) <= (i, j) {
                        continue;
                    }
                    let den = x.distance(i, k) + y.distance(j, l);
                    let num = (table[[i, j]] - table[[k, l]]).abs();
                    if den > 0.0 {
                        any_positive = true;
                        let ratio = num / den;
                        if ratio > best {
                            best = ratio;
                        }
                    } else if num > 0.0 {
                        return Ok(f64::INFINITY);
                    }
                }
            }
        }
    }
    if !any_positive {
        return Err(Error::CoincidentSupport);
    }
    Ok(best)
}

/// Largest finite-difference ratio of a function on a single space. Used
/// for per-iteration potential diagnostics; with no positive-distance pair
/// the sup runs over an empty set and is zero.
pub fn lipschitz_estimate_on(space: &FiniteMetricSpace, values: &[f64]) -> f64 {
    let n = space.len().min(values.len());
    let mut best = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let den = space.distance(i, j);
            if den > 0.0 {
                let ratio = (values[i] - values[j]).abs() / den;
                if ratio > best {
                    best = ratio;
                }
            }
        }
    }
    best
}

/// The Gibbs kernel `K = exp(-c)`, stored as its log-table.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    log_values: Array2<f64>,
    cost_sup_norm: f64,
}

impl KernelTable {
    pub fn from_cost(cost: &CostModel) -> Self {
        Self {
            log_values: cost.table().mapv(|c| -c),
            cost_sup_norm: cost.sup_norm(),
        }
    }

    /// Log-kernel `-c`, the representation every solver works on.
    pub fn log_values(&self) -> &Array2<f64> {
        &self.log_values
    }

    /// Pointwise kernel values, derived from the log-table on demand.
    pub fn values(&self) -> Array2<f64> {
        self.log_values.mapv(f64::exp)
    }

    /// Sup-norm of the underlying cost.
    pub fn cost_sup_norm(&self) -> f64 {
        self.cost_sup_norm
    }

    /// Number of points on the `X` side.
    pub fn input_len(&self) -> usize {
        self.log_values.nrows()
    }

    /// Number of points on the `Y` side.
    pub fn output_len(&self) -> usize {
        self.log_values.ncols()
    }

    /// Log-domain integration over `X`: returns
    /// `log sum_i exp(log K(i, j) + log_f[i] + log_w[i])` for each `j`.
    /// Entries with `log_w[i] = -inf` (zero weight) drop out.
    pub fn apply_log_x(&self, log_f: &[f64], log_w: &[f64]) -> Vec<f64> {
        let n = self.input_len();
        let m = self.output_len();
        let mut out = Vec::with_capacity(m);
        let mut terms = vec![0.0; n];
        for j in 0..m {
            for i in 0..n {
                terms[i] = self.log_values[[i, j]] + log_f[i] + log_w[i];
            }
            out.push(log_sum_exp(&terms));
        }
        out
    }

    /// Log-domain integration over `Y`, the mirror of
    /// [`apply_log_x`](Self::apply_log_x).
    pub fn apply_log_y(&self, log_g: &[f64], log_w: &[f64]) -> Vec<f64> {
        let n = self.input_len();
        let m = self.output_len();
        let mut out = Vec::with_capacity(n);
        let mut terms = vec![0.0; m];
        for i in 0..n {
            for j in 0..m {
                terms[j] = self.log_values[[i, j]] + log_g[j] + log_w[j];
            }
            out.push(log_sum_exp(&terms));
        }
        out
    }

    /// Integrates a positive function on `X` against `pi` to produce a
    /// positive function on `Y`.
    pub fn apply_x(
        &self,
        f: &PositiveFunction,
        pi: &DiscreteMeasure,
    ) -> Result<PositiveFunction> {
        if f.len() != self.input_len() || pi.len() != self.input_len() {
            return Err(Error::LengthMismatch {
                left: f.len(),
                right: self.input_len(),
                context: "kernel integration over X".to_string(),
            });
        }
        let log_w: Vec<f64> = pi.weights().iter().map(|&w| w.ln()).collect();
        PositiveFunction::from_log_values(self.apply_log_x(f.log_values(), &log_w))
    }

    /// Integrates a positive function on `Y` against `pi` to produce a
    /// positive function on `X`.
    pub fn apply_y(
        &self,
        g: &PositiveFunction,
        pi: &DiscreteMeasure,
    ) -> Result<PositiveFunction> {
        if g.len() != self.output_len() || pi.len() != self.output_len() {
            return Err(Error::LengthMismatch {
                left: g.len(),
                right: self.output_len(),
                context: "kernel integration over Y".to_string(),
            });
        }
        let log_w: Vec<f64> = pi.weights().iter().map(|&w| w.ln()).collect();
        PositiveFunction::from_log_values(self.apply_log_y(g.log_values(), &log_w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn two_point_line() -> FiniteMetricSpace {
        FiniteMetricSpace::from_points(&[vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn quadratic_table_on_the_unit_pair() {
        let x = two_point_line();
        let cost = CostModel::quadratic(&x, &x, 2.0).unwrap();
        assert_eq!(cost.table()[[0, 0]], 0.0);
        assert_eq!(cost.table()[[0, 1]], 0.5);
        assert_eq!(cost.table()[[1, 0]], 0.5);
        assert_eq!(cost.table()[[1, 1]], 0.0);
        assert_eq!(cost.sup_norm(), 0.5);
        assert_eq!(cost.lip().provenance, LipProvenance::Analytic);
    }

    #[test]
    fn quadratic_analytic_constant_dominates_the_grid_estimate() {
        let x = two_point_line();
        let cost = CostModel::quadratic(&x, &x, 1.0).unwrap();
        let estimate = discrete_lipschitz(&x, &x, cost.table()).unwrap();
        assert_eq!(estimate, 1.0);
        assert_eq!(cost.lip().value, 4.0);
        assert!(cost.lip().value >= estimate);
    }

    #[test]
    fn absolute_cost_is_one_lipschitz() {
        let x = two_point_line();
        let cost = CostModel::absolute(&x, &x, 1.0).unwrap();
        assert_eq!(cost.table()[[0, 1]], 1.0);
        assert_eq!(cost.lip().value, 1.0);
        let estimate = discrete_lipschitz(&x, &x, cost.table()).unwrap();
        assert!(estimate <= cost.lip().value + 1e-15);
    }

    #[test]
    fn table_mode_estimates_and_validates_overrides() {
        let x = two_point_line();
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let cost = CostModel::from_table(&x, &x, &rows, None).unwrap();
        assert_eq!(cost.lip().value, 1.0);
        assert_eq!(cost.lip().provenance, LipProvenance::DiscreteEstimate);

        let ok = CostModel::from_table(&x, &x, &rows, Some(1.0)).unwrap();
        assert_eq!(ok.lip().provenance, LipProvenance::Analytic);
        assert!(CostModel::from_table(&x, &x, &rows, Some(0.5)).is_err());
    }

    #[test]
    fn negative_costs_count_toward_the_sup_norm() {
        let x = two_point_line();
        let rows = vec![vec![-2.0, 0.5], vec![0.5, 0.0]];
        let cost = CostModel::from_table(&x, &x, &rows, None).unwrap();
        assert_eq!(cost.sup_norm(), 2.0);
    }

    #[test]
    fn coincident_grid_has_no_lipschitz_ratio() {
        let x = FiniteMetricSpace::from_points(&[vec![1.0], vec![1.0]]).unwrap();
        let table = Array2::zeros((2, 2));
        assert!(matches!(
            discrete_lipschitz(&x, &x, &table),
            Err(Error::CoincidentSupport)
        ));
        // Differing cost across a zero distance is unbounded, not an error.
        let mut varying = Array2::zeros((2, 2));
        varying[[0, 0]] = 1.0;
        assert_eq!(
            discrete_lipschitz(&x, &x, &varying).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn kernel_integrates_the_two_point_example() {
        let x = two_point_line();
        let cost = CostModel::absolute(&x, &x, 1.0).unwrap();
        let kernel = KernelTable::from_cost(&cost);
        let pi = DiscreteMeasure::uniform(Arc::new(x));
        let ones = PositiveFunction::ones(2);
        let out = kernel.apply_x(&ones, &pi).unwrap();
        let expected = (1.0 + (-1.0f64).exp()) / 2.0;
        for v in out.values() {
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_values_stay_within_the_sup_norm_band() {
        let x = two_point_line();
        let cost = CostModel::quadratic(&x, &x, 0.7).unwrap();
        let kernel = KernelTable::from_cost(&cost);
        let lo = (-cost.sup_norm()).exp();
        let hi = cost.sup_norm().exp();
        for &v in kernel.values().iter() {
            assert!(v >= lo && v <= hi);
        }
    }

    #[test]
    fn integration_respects_the_kernel_band() {
        let x = two_point_line();
        let cost = CostModel::quadratic(&x, &x, 0.7).unwrap();
        let kernel = KernelTable::from_cost(&cost);
        let pi = DiscreteMeasure::uniform(Arc::new(x));
        let f = PositiveFunction::from_values(&[0.3, 2.5]).unwrap();
        let mass: f64 = f
            .values()
            .iter()
            .zip(pi.weights())
            .map(|(a, b)| a * b)
            .sum();
        let out = kernel.apply_x(&f, &pi).unwrap();
        let lo = (-cost.sup_norm()).exp() * mass;
        let hi = cost.sup_norm().exp() * mass;
        for v in out.values() {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}
