//! Small dense-vector helpers shared by the probe and metric code.
//!
//! Everything accumulates in `f64`, regardless of the storage precision of
//! the inputs.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dot product of an `f32` row with an `f64` vector, accumulated in `f64`.
pub fn dot_f32(row: &[f32], v: &[f64]) -> f64 {
    debug_assert_eq!(row.len(), v.len());
    row.iter().zip(v).map(|(&x, y)| f64::from(x) * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Returns `a / ‖a‖`, or `None` for a zero (or non-finite) vector.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(a.iter().map(|x| x / n).collect())
    } else {
        None
    }
}

pub fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

/// Column means of a row-major `n × d` matrix.
pub fn column_means(data: &[f32], n: usize, d: usize) -> Vec<f64> {
    let mut mean = vec![0.0f64; d];
    for row in data.chunks_exact(d) {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += f64::from(x);
        }
    }
    let inv = 1.0 / n as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    mean
}

/// Mean of the selected rows of a row-major matrix.
pub fn subset_mean<'a, I>(rows: I, d: usize) -> (Vec<f64>, usize)
where
    I: IntoIterator<Item = &'a [f32]>,
{
    let mut mean = vec![0.0f64; d];
    let mut count = 0usize;
    for row in rows {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += f64::from(x);
        }
        count += 1;
    }
    if count > 0 {
        let inv = 1.0 / count as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
    }
    (mean, count)
}
