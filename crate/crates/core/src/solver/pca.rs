// SPDX-License-Identifier: MIT OR Apache-2.0

//! Row means and the first principal component of a stack of embeddings.

use super::matrix::{ensure_finite, DenseMatrix};
use crate::error::{Error, Result};

pub const PCA_MAX_ITERS: usize = 1000;
pub const PCA_STEP_TOL: f64 = 1e-9;

/// Arithmetic mean of the rows, accumulated in `f64`.
pub fn mean_rows(rows: &DenseMatrix) -> Result<Vec<f32>> {
    mean_rows_f64(rows).map(|m| m.into_iter().map(|x| x as f32).collect())
}

fn mean_rows_f64(rows: &DenseMatrix) -> Result<Vec<f64>> {
    if rows.rows() == 0 {
        return Err(Error::EmptyInput("no rows to average"));
    }
    let mut acc = vec![0.0f64; rows.cols()];
    for row in rows.row_iter() {
        for (a, &x) in acc.iter_mut().zip(row) {
            *a += f64::from(x);
        }
    }
    let k = rows.rows() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(acc)
}

/// Squarings applied to the Gram matrix before iterating; each iteration
/// then advances `2^GRAM_SQUARINGS` plain power steps.
const GRAM_SQUARINGS: u32 = 4;

/// Unit vector along the direction of largest variance of the rows.
///
/// Power iteration on the smaller of the two centered Gram forms: the
/// `K × K` matrix `XcXcᵀ` when `K ≤ d` (mapped back through `Xcᵀ`), else the
/// `d × d` covariance `XcᵀXc`. The Gram matrix is raised to the 16th power
/// by repeated squaring so that small spectral gaps still converge within
/// the iteration cap. The start is the normalized all-ones vector in row
/// space; if it lies (numerically) in the null space of `Xc`, the centered
/// row of largest norm is used instead.
///
/// The sign is chosen so that `uᵀ·mean ≥ 0`; when the mean is zero or
/// orthogonal to `u`, the first nonzero coordinate of `u` is made positive.
pub fn pca_first_component(rows: &DenseMatrix) -> Result<Vec<f32>> {
    let k = rows.rows();
    let d = rows.cols();
    if k < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: k,
        });
    }
    if d == 0 {
        return Err(Error::EmptyInput("zero-width rows"));
    }
    ensure_finite(rows.as_slice(), "embeddings")?;

    let mean = mean_rows_f64(rows)?;
    let centered: Vec<Vec<f64>> = rows
        .row_iter()
        .map(|r| r.iter().zip(&mean).map(|(&x, m)| f64::from(x) - m).collect())
        .collect();
    let total_var: f64 = centered.iter().flat_map(|r| r.iter()).map(|x| x * x).sum();
    if total_var == 0.0 {
        return Err(Error::RankDeficient);
    }

    let ones = vec![1.0 / (d as f64).sqrt(); d];
    let widest = centered
        .iter()
        .max_by(|a, b| l2(a).total_cmp(&l2(b)))
        .expect("k >= 2");
    let project = |u: &[f64]| -> Vec<f64> { centered.iter().map(|r| dot(r, u)).collect() };

    let mut u = if k <= d {
        let gram = symmetric(k, |i, j| dot(&centered[i], &centered[j]));
        let mut start = project(&ones);
        if dot(&start, &start) <= 1e-24 * total_var {
            start = project(widest);
        }
        let a = iterate(&gram, start);
        let mut u = vec![0.0f64; d];
        for (r, &ai) in centered.iter().zip(&a) {
            for (o, x) in u.iter_mut().zip(r) {
                *o += ai * x;
            }
        }
        normalized(u)
    } else {
        let cov = symmetric(d, |i, j| centered.iter().map(|r| r[i] * r[j]).sum());
        let reach = project(&ones);
        let start = if dot(&reach, &reach) <= 1e-24 * total_var {
            widest.clone()
        } else {
            ones
        };
        iterate(&cov, start)
    };

    orient(&mut u, &mean);
    Ok(u.into_iter().map(|x| x as f32).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn symmetric(n: usize, entry: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut m = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let x = entry(i, j);
            m[i * n + j] = x;
            m[j * n + i] = x;
        }
    }
    m
}

fn mat_vec(m: &[f64], x: &[f64]) -> Vec<f64> {
    m.chunks_exact(x.len()).map(|row| dot(row, x)).collect()
}

/// `m²` rescaled to unit max-abs entry.
fn square(m: &[f64], n: usize) -> Vec<f64> {
    let mut out = symmetric(n, |i, j| (0..n).map(|t| m[i * n + t] * m[t * n + j]).sum());
    let scale = out.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale > 0.0 {
        out.iter_mut().for_each(|x| *x /= scale);
    }
    out
}

/// Top eigenvector of the PSD matrix `gram` by power iteration on `gram^16`.
fn iterate(gram: &[f64], start: Vec<f64>) -> Vec<f64> {
    let n = start.len();
    let scale = gram.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut op: Vec<f64> = gram.iter().map(|x| x / scale).collect();
    for _ in 0..GRAM_SQUARINGS {
        op = square(&op, n);
    }
    let mut x = normalized(start);
    for _ in 0..PCA_MAX_ITERS {
        let next = normalized(mat_vec(&op, &x));
        let step = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        x = next;
        if step < PCA_STEP_TOL {
            break;
        }
    }
    x
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = l2(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn orient(u: &mut [f64], mean: &[f64]) {
    let along: f64 = u.iter().zip(mean).map(|(a, b)| a * b).sum();
    let flip = if along.abs() > 1e-9 * l2(mean).max(f64::MIN_POSITIVE) {
        along < 0.0
    } else {
        // 1e-12 keeps power-iteration noise from deciding the sign
        u.iter().find(|x| x.abs() > 1e-12).is_some_and(|&x| x < 0.0)
    };
    if flip {
        u.iter_mut().for_each(|x| *x = -*x);
    }
}
