//! Truncated SVD of the user-item matrix via randomized subspace
//! iteration. The input is a sparse triplet list; the factorization is
//! exact (up to floating point) whenever the requested rank covers the
//! matrix rank.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linalg::{jacobi_svd, qr_q, Matrix};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TruncatedSvd {
    /// m x f left singular vectors.
    pub u: Matrix,
    /// f singular values, non-increasing.
    pub sigma: Vec<f64>,
    /// n x f right singular vectors.
    pub v: Matrix,
}

impl TruncatedSvd {
    pub fn reconstruct(&self, row: usize, col: usize) -> f64 {
        (0..self.sigma.len())
            .map(|k| self.u.get(row, k) * self.sigma[k] * self.v.get(col, k))
            .sum()
    }

    /// Full reconstructed row, `u_r * Sigma * V^T`.
    pub fn reconstruct_row(&self, row: usize, out: &mut [f64]) {
        out.fill(0.0);
        for k in 0..self.sigma.len() {
            let coef = self.u.get(row, k) * self.sigma[k];
            if coef == 0.0 {
                continue;
            }
            for (c, slot) in out.iter_mut().enumerate() {
                *slot += coef * self.v.get(c, k);
            }
        }
    }
}

fn sparse_mul(triplets: &[(u32, u32, f64)], rows: usize, x: &Matrix) -> Matrix {
    let mut y = Matrix::zeros(rows, x.cols);
    for &(r, c, v) in triplets {
        let xrow = &x.data[c as usize * x.cols..(c as usize + 1) * x.cols];
        let yrow = &mut y.data[r as usize * x.cols..(r as usize + 1) * x.cols];
        for (acc, &b) in yrow.iter_mut().zip(xrow) {
            *acc += v * b;
        }
    }
    y
}

fn sparse_mul_t(triplets: &[(u32, u32, f64)], cols: usize, x: &Matrix) -> Matrix {
    let mut y = Matrix::zeros(cols, x.cols);
    for &(r, c, v) in triplets {
        let xrow = &x.data[r as usize * x.cols..(r as usize + 1) * x.cols];
        let yrow = &mut y.data[c as usize * x.cols..(c as usize + 1) * x.cols];
        for (acc, &b) in yrow.iter_mut().zip(xrow) {
            *acc += v * b;
        }
    }
    y
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Rank-`f` truncated SVD of an `m x n` sparse matrix by randomized
/// range finding with `power_iters` subspace iterations and
/// `oversample` extra probe columns.
pub fn truncated_svd(
    triplets: &[(u32, u32, f64)],
    m: usize,
    n: usize,
    f: usize,
    power_iters: usize,
    oversample: usize,
    seed: u64,
) -> TruncatedSvd {
    let f = f.min(m).min(n).max(1);
    let l = (f + oversample).min(m).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut omega = Matrix::zeros(n, l);
    for v in omega.data.iter_mut() {
        *v = gaussian(&mut rng);
    }
    let mut q = qr_q(&sparse_mul(triplets, m, &omega));
    for _ in 0..power_iters {
        let z = qr_q(&sparse_mul_t(triplets, n, &q));
        q = qr_q(&sparse_mul(triplets, m, &z));
    }
    // B = Q^T A  (l x n); factor B^T = U~ S V~^T so that A ~= (Q V~) S U~^T
    let bt = sparse_mul_t(triplets, n, &q); // n x l
    let (ut, s, vt) = jacobi_svd(&bt);
    let u_full = q.matmul(&vt); // m x l
    let mut u = Matrix::zeros(m, f);
    let mut v = Matrix::zeros(n, f);
    for k in 0..f {
        for r in 0..m {
            u.set(r, k, u_full.get(r, k));
        }
        for r in 0..n {
            v.set(r, k, ut.get(r, k));
        }
    }
    TruncatedSvd {
        u,
        sigma: s[..f].to_vec(),
        v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let dense = [
            [1.0, 2.0, 0.0],
            [0.0, 1.0, 3.0],
            [4.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
        ];
        let mut triplets = Vec::new();
        for (r, row) in dense.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((r as u32, c as u32, v));
                }
            }
        }
        let svd = truncated_svd(&triplets, 4, 3, 3, 4, 10, 42);
        for (r, row) in dense.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                assert!((svd.reconstruct(r, c) - v).abs() < 1e-8);
            }
        }
        assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn singular_vectors_orthonormal() {
        let triplets = vec![
            (0, 0, 2.0),
            (0, 1, 1.0),
            (1, 1, 3.0),
            (2, 0, 1.0),
            (2, 2, 5.0),
            (3, 2, 1.0),
        ];
        let svd = truncated_svd(&triplets, 4, 3, 3, 4, 10, 7);
        for a in 0..3 {
            for b in 0..3 {
                let du: f64 = (0..4).map(|r| svd.u.get(r, a) * svd.u.get(r, b)).sum();
                let dv: f64 = (0..3).map(|r| svd.v.get(r, a) * svd.v.get(r, b)).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((du - expect).abs() < 1e-8);
                assert!((dv - expect).abs() < 1e-8);
            }
        }
    }
}
