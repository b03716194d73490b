//! Finite metric spaces: the supports on which every measure, cost, and
//! potential in this crate lives.
//!
//! A space is either a list of points in Euclidean coordinates or an
//! explicit distance table. Coordinates are the common case and the only
//! mode in which costs like the scaled squared distance can be built;
//! tables exist so that instances with a hand-crafted geometry can be fed
//! through the same pipelines.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Largest support size for which the cubic triangle-inequality check runs
/// by default when a distance table is supplied.
pub const TRIANGLE_CHECK_LIMIT: usize = 64;

/// Slack allowed when validating a distance table against the metric
/// axioms.
const METRIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
enum Geometry {
    /// `n x d` coordinates; the metric is Euclidean.
    Points(Array2<f64>),
    /// `n x n` symmetric table of pairwise distances.
    Table(Array2<f64>),
}

/// A finite set of points together with a metric on them.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    geometry: Geometry,
}

fn to_rectangular(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptySpace);
    }
    let width = rows[0].len();
    for (index, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::PointDimension {
                index,
                expected: width,
                got: row.len(),
            });
        }
        for &v in row {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: what.to_string(),
                });
            }
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), width), flat)
        .map_err(|_| Error::EmptySpace)
}

fn euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc.sqrt()
}

impl FiniteMetricSpace {
    /// Builds a space from Euclidean coordinates, one point per row.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let array = to_rectangular(points, "support coordinates")?;
        if array.ncols() == 0 {
            return Err(Error::PointDimension {
                index: 0,
                expected: 1,
                got: 0,
            });
        }
        Ok(Self {
            geometry: Geometry::Points(array),
        })
    }

    /// Builds a space from an explicit distance table, validating the
    /// metric axioms. The cubic triangle check runs for supports of at
    /// most [`TRIANGLE_CHECK_LIMIT`] points.
    pub fn from_distance_table(table: &[Vec<f64>]) -> Result<Self> {
        let n = table.len();
        Self::from_distance_table_checked(table, n <= TRIANGLE_CHECK_LIMIT)
    }

    /// Same as [`from_distance_table`](Self::from_distance_table) but with
    /// explicit control over the triangle-inequality pass, which costs
    /// `O(n^3)`.
    pub fn from_distance_table_checked(
        table: &[Vec<f64>],
        check_triangle: bool,
    ) -> Result<Self> {
        let array = to_rectangular(table, "distance table")?;
        let n = array.nrows();
        if array.ncols() != n {
            return Err(Error::NonSquareTable {
                rows: n,
                cols: array.ncols(),
            });
        }
        for i in 0..n {
            if array[[i, i]].abs() > METRIC_TOL {
                return Err(Error::MetricViolation(format!(
                    "diagonal entry ({i},{i}) is {}, expected 0",
                    array[[i, i]]
                )));
            }
            for j in 0..n {
                let d = array[[i, j]];
                if d < 0.0 {
                    return Err(Error::MetricViolation(format!(
                        "entry ({i},{j}) is negative ({d})"
                    )));
                }
                if (d - array[[j, i]]).abs() > METRIC_TOL {
                    return Err(Error::MetricViolation(format!(
                        "entries ({i},{j}) and ({j},{i}) differ by more than {METRIC_TOL}"
                    )));
                }
            }
        }
        // Store an exactly symmetric table with a zero diagonal so that
        // downstream arithmetic never sees the input's rounding slack.
        let mut sym = array.clone();
        for i in 0..n {
            sym[[i, i]] = 0.0;
            for j in (i + 1)..n {
                let d = 0.5 * (array[[i, j]] + array[[j, i]]);
                sym[[i, j]] = d;
                sym[[j, i]] = d;
            }
        }
        if check_triangle {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        if sym[[i, j]] > sym[[i, k]] + sym[[k, j]] + METRIC_TOL {
                            return Err(Error::MetricViolation(format!(
                                "triangle inequality fails on ({i},{j}) via {k}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self {
            geometry: Geometry::Table(sym),
        })
    }

    /// Number of support points.
    pub fn len(&self) -> usize {
        match &self.geometry {
            Geometry::Points(p) => p.nrows(),
            Geometry::Table(t) => t.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distance between support points `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match &self.geometry {
            Geometry::Points(p) => euclidean(p.row(i), p.row(j)),
            Geometry::Table(t) => t[[i, j]],
        }
    }

    /// Largest pairwise distance; zero for a single point.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.distance(i, j);
                if d > best {
                    best = d;
                }
            }
        }
        best
    }

    /// Coordinates, if this space was built from points.
    pub fn points(&self) -> Option<&Array2<f64>> {
        match &self.geometry {
            Geometry::Points(p) => Some(p),
            Geometry::Table(_) => None,
        }
    }

    /// Coordinate dimension, if this space was built from points.
    pub fn dim(&self) -> Option<usize> {
        self.points().map(|p| p.ncols())
    }

    /// The sub-space on the given support indices, in the given order.
    /// Indices must be valid and non-empty.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptySpace);
        }
        let geometry = match &self.geometry {
            Geometry::Points(p) => {
                let mut out = Array2::zeros((keep.len(), p.ncols()));
                for (r, &i) in keep.iter().enumerate() {
                    out.row_mut(r).assign(&p.row(i));
                }
                Geometry::Points(out)
            }
            Geometry::Table(t) => {
                let mut out = Array2::zeros((keep.len(), keep.len()));
                for (r, &i) in keep.iter().enumerate() {
                    for (c, &j) in keep.iter().enumerate() {
                        out[[r, c]] = t[[i, j]];
                    }
                }
                Geometry::Table(out)
            }
        };
        Ok(Self { geometry })
    }
}

/// Distance on a product of two spaces: the sum of the per-factor
/// distances. This is the ground metric under which couplings are compared.
pub fn product_distance(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    a: (usize, usize),
    b: (usize, usize),
) -> f64 {
    x.distance(a.0, b.0) + y.distance(a.1, b.1)
}

/// Euclidean distance between a point of `x` and a point of `y`. Both
/// spaces must be coordinate-mode and share a dimension.
pub fn cross_distance(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    i: usize,
    j: usize,
) -> Result<f64> {
    let (px, py) = match (x.points(), y.points()) {
        (Some(px), Some(py)) => (px, py),
        _ => {
            return Err(Error::CoordinatesRequired {
                context: "cross-support distance".to_string(),
            })
        }
    };
    if px.ncols() != py.ncols() {
        return Err(Error::CrossDimension {
            left: px.ncols(),
            right: py.ncols(),
        });
    }
    Ok(euclidean(px.row(i), py.row(j)))
}
