//! Low-level floating-point helpers shared by the solvers.
//!
//! Every reduction here walks its input left to right. Results therefore do
//! not depend on thread count or allocation order, which is what makes
//! repeated runs of the pipelines byte-identical.

/// Log of a sum of exponentials, stabilized by subtracting the maximum.
///
/// Terms equal to negative infinity contribute zero mass and are harmless.
/// Returns negative infinity for an empty slice or when every term is
/// negative infinity.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &t in terms {
        if t > max {
            max = t;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for &t in terms {
        sum += (t - max).exp();
    }
    max + sum.ln()
}

/// Dot product in index order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Sum in index order.
pub fn sum(values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &v in values {
        acc += v;
    }
    acc
}

/// L1 distance between two equal-length slices, in index order.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += (a[i] - b[i]).abs();
    }
    acc
}

/// Largest absolute value, zero for an empty slice.
pub fn sup_norm(values: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &v in values {
        let a = v.abs();
        if a > m {
            m = a;
        }
    }
    m
}

/// Oscillation of a finite family of reals: max minus min, zero when empty.
pub fn oscillation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    hi - lo
}
