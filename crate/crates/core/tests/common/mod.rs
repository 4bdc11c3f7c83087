// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent reference computations for the integration and acceptance
//! tests. Nothing here calls into the solver or the PCA code under test.

#![allow(dead_code)]

use lancet_core::DenseMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub mod scenarios;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f32> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (z * scale) as f32
        })
        .collect()
}

/// `d × n` matrix with i.i.d. `N(0, scale²)` entries.
pub fn gaussian_matrix(rng: &mut ChaCha8Rng, d: usize, n: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::new(d, n, gaussian_vec(rng, d * n, scale)).unwrap()
}

/// Columns as `f64` vectors.
pub fn columns_f64(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| f64::from(m.get(i, j))).collect())
        .collect()
}

pub fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `v − Σ w_j d_j`.
pub fn residual(v: &[f64], cols: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut r = v.to_vec();
    for (c, &wj) in cols.iter().zip(w) {
        for (ri, ci) in r.iter_mut().zip(c) {
            *ri -= wj * ci;
        }
    }
    r
}

/// `‖v − Dw‖² + λρ‖w‖₁ + λ(1−ρ)/2 ‖w‖²`.
pub fn objective(v: &[f64], cols: &[Vec<f64>], w: &[f64], lambda: f64, rho: f64) -> f64 {
    let r = residual(v, cols, w);
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    let l2: f64 = w.iter().map(|x| x * x).sum();
    dot(&r, &r) + lambda * rho * l1 + 0.5 * lambda * (1.0 - rho) * l2
}

/// Largest violation of the subgradient optimality conditions.
///
/// With `g = −2Dᵀ(v − Dw) + λ(1−ρ)w`, an optimum has `g_j = −λρ·sign(w_j)`
/// on the support and `|g_j| ≤ λρ` off it.
pub fn kkt_violation(v: &[f64], cols: &[Vec<f64>], w: &[f64], lambda: f64, rho: f64) -> f64 {
    let r = residual(v, cols, w);
    let mut worst = 0.0f64;
    for (c, &wj) in cols.iter().zip(w) {
        let g = -2.0 * dot(c, &r) + lambda * (1.0 - rho) * wj;
        let viol = if wj != 0.0 {
            (g + lambda * rho * wj.signum()).abs()
        } else {
            (g.abs() - lambda * rho).max(0.0)
        };
        worst = worst.max(viol);
    }
    worst
}

/// Quadratic model `J(w) = c0 − 2bᵀw + wᵀGw + penalty`, for fast evaluation.
pub struct Quadratic {
    pub c0: f64,
    pub b: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub lambda: f64,
    pub rho: f64,
}

impl Quadratic {
    pub fn new(v: &[f64], cols: &[Vec<f64>], lambda: f64, rho: f64) -> Self {
        Self {
            c0: dot(v, v),
            b: cols.iter().map(|c| dot(c, v)).collect(),
            g: cols.iter().map(|a| cols.iter().map(|b| dot(a, b)).collect()).collect(),
            lambda,
            rho,
        }
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        let n = w.len();
        let mut quad = 0.0;
        for i in 0..n {
            for k in 0..n {
                quad += w[i] * self.g[i][k] * w[k];
            }
        }
        let lin: f64 = self.b.iter().zip(w).map(|(b, x)| b * x).sum();
        let l1: f64 = w.iter().map(|x| x.abs()).sum();
        let l2: f64 = w.iter().map(|x| x * x).sum();
        self.c0 - 2.0 * lin + quad + self.lambda * self.rho * l1 + 0.5 * self.lambda * (1.0 - self.rho) * l2
    }

    /// Grid minimum over the last coordinate with the others fixed.
    ///
    /// `J` is convex in `w_last`, so the best grid point is one of the two
    /// grid points around the continuous minimizer (clamped to the box).
    fn best_last_on_grid(&self, w: &mut [f64], lo: f64, hi: f64, step: f64) -> f64 {
        let n = w.len();
        let j = n - 1;
        w[j] = 0.0;
        let mut lin = self.b[j];
        for k in 0..j {
            lin -= self.g[j][k] * w[k];
        }
        let a = self.g[j][j] + 0.5 * self.lambda * (1.0 - self.rho);
        let t = 0.5 * self.lambda * self.rho;
        let cont = if lin > t {
            (lin - t) / a
        } else if lin < -t {
            (lin + t) / a
        } else {
            0.0
        };
        let steps = ((hi - lo) / step).round() as i64;
        let idx = ((cont - lo) / step).floor() as i64;
        let mut best = f64::INFINITY;
        let mut best_x = 0.0;
        for cand in [idx, idx + 1] {
            let cand = cand.clamp(0, steps);
            let x = lo + cand as f64 * step;
            w[j] = x;
            let f = self.eval(w);
            if f < best {
                best = f;
                best_x = x;
            }
        }
        w[j] = best_x;
        best
    }
}

/// Minimum of `J` over the grid `{−2, −2+step, …, 2}ᴺ`, then refined by a
/// derivative-free pattern search from the best grid point.
///
/// All coordinates but the last are enumerated; the last is minimized
/// exactly over its grid line, which by convexity finds the same grid
/// minimum as full enumeration.
pub fn grid_search_oracle(q: &Quadratic, n: usize, step: f64) -> (Vec<f64>, f64) {
    assert!((1..=3).contains(&n));
    let (lo, hi) = (-2.0, 2.0);
    let steps = ((hi - lo) / step).round() as usize;
    let mut best_w = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut w = vec![0.0; n];
    let outer = steps + 1;
    let outer_dims = n - 1;
    let total = outer.pow(outer_dims as u32);
    for flat in 0..total {
        let mut rem = flat;
        for k in 0..outer_dims {
            w[k] = lo + (rem % outer) as f64 * step;
            rem /= outer;
        }
        let f = q.best_last_on_grid(&mut w, lo, hi, step);
        if f < best {
            best = f;
            best_w.copy_from_slice(&w);
        }
    }
    pattern_search(q, best_w, step)
}

fn pattern_search(q: &Quadratic, mut w: Vec<f64>, mut h: f64) -> (Vec<f64>, f64) {
    let mut f = q.eval(&w);
    while h > 1e-12 {
        let mut improved = false;
        for k in 0..w.len() {
            for dir in [h, -h] {
                let mut t = w.clone();
                t[k] += dir;
                let ft = q.eval(&t);
                if ft < f {
                    f = ft;
                    w = t;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (w, f)
}

/// `d × n` matrix with orthonormal columns (QR of a Gaussian matrix).
pub fn orthonormal_columns(rng: &mut ChaCha8Rng, d: usize, n: usize) -> DenseMatrix {
    let g = DMatrix::<f64>::from_fn(d, n, |_, _| StandardNormal.sample(&mut *rng));
    let q = g.qr().q();
    let data: Vec<f32> = (0..d)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| q[(i, j)] as f32)
        .collect();
    DenseMatrix::new(d, n, data).unwrap()
}

/// Unit-norm Gaussian columns resampled until every pair has |cos| < `max`.
pub fn incoherent_dictionary(rng: &mut ChaCha8Rng, d: usize, n: usize, max: f64) -> DenseMatrix {
    loop {
        let cols: Vec<Vec<f32>> = (0..n)
            .map(|_| {
                let c = to_f64(&gaussian_vec(rng, d, 1.0));
                let norm = norm2(&c);
                c.iter().map(|x| (x / norm) as f32).collect()
            })
            .collect();
        let m = DenseMatrix::from_columns(&cols).unwrap();
        if coherence(&m) < max {
            return m;
        }
    }
}

/// Largest |cos| between two distinct columns.
pub fn coherence(m: &DenseMatrix) -> f64 {
    let cols = columns_f64(m);
    let mut worst = 0.0f64;
    for i in 0..cols.len() {
        for k in i + 1..cols.len() {
            let c = dot(&cols[i], &cols[k]) / (norm2(&cols[i]) * norm2(&cols[k]));
            worst = worst.max(c.abs());
        }
    }
    worst
}

/// Top principal direction of the rows of `m`, from a dense symmetric
/// eigendecomposition of the smaller centered Gram form.
pub fn eigen_top_direction(m: &DenseMatrix) -> Vec<f64> {
    let (k, d) = (m.rows(), m.cols());
    let mut x = DMatrix::<f64>::from_fn(k, d, |i, j| f64::from(m.get(i, j)));
    for j in 0..d {
        let mean = x.column(j).mean();
        for i in 0..k {
            x[(i, j)] -= mean;
        }
    }
    let top = |e: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>| -> DVector<f64> {
        let i = e
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        e.eigenvectors.column(i).into_owned()
    };
    let u = if k <= d {
        let e = (&x * x.transpose()).symmetric_eigen();
        x.transpose() * top(&e)
    } else {
        top(&(x.transpose() * &x).symmetric_eigen())
    };
    let n = u.norm();
    u.iter().map(|v| v / n).collect()
}

/// Angle in radians between the lines spanned by `a` and `b`.
pub fn line_angle(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm2(a), norm2(b));
    let c = (dot(a, b) / (na * nb)).abs().min(1.0);
    // sin via the rejection, accurate for small angles
    let proj: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x / na - (dot(a, b) / (na * nb)) * y / nb)
        .collect();
    norm2(&proj).atan2(c)
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-1.0..1.0)
}

pub fn store_fixture_dir() -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/store")
}

fn clan_header(magic: &[u8; 4], version: u32, rows: u64, cols: u64, dtype: u8) -> Vec<u8> {
    let mut out = magic.to_vec();
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.push(dtype);
    out
}

/// Well-formed and corrupted matrix files, by name.
pub fn store_fixture_bytes() -> Vec<(&'static str, Vec<u8>)> {
    let one = |mut h: Vec<u8>| {
        h.extend_from_slice(&0f32.to_le_bytes());
        h
    };
    let mut trailing = one(clan_header(b"CLAN", 1, 1, 1, 1));
    trailing.extend_from_slice(&[0xAB; 3]);
    let mut truncated = clan_header(b"CLAN", 1, 2, 2, 1);
    truncated.extend_from_slice(&[0u8; 8]);
    vec![
        ("one_by_one", one(clan_header(b"CLAN", 1, 1, 1, 1))),
        ("bad_magic", one(clan_header(b"XXXX", 1, 1, 1, 1))),
        ("bad_version", one(clan_header(b"CLAN", 2, 1, 1, 1))),
        ("bad_dtype", one(clan_header(b"CLAN", 1, 1, 1, 2))),
        ("truncated", truncated),
        ("short_header", b"CLAN\x01\x00\x00\x00".to_vec()),
        ("oversize", one(clan_header(b"CLAN", 1, 1 << 20, 1 << 12, 1))),
        ("trailing", trailing),
    ]
}

pub fn write_store_fixtures() {
    let dir = store_fixture_dir();
    std::fs::create_dir_all(&dir).unwrap();
    for (name, bytes) in store_fixture_bytes() {
        std::fs::write(dir.join(format!("{name}.clan")), bytes).unwrap();
    }
}
