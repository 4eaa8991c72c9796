//! Nonnegative matrix factorization by multiplicative updates on the
//! zero-filled user-item matrix, minimizing the Frobenius norm.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linalg::Matrix;

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct NmfModel {
    /// m x f nonnegative user factors.
    pub w: Matrix,
    /// f x n nonnegative item factors.
    pub h: Matrix,
    /// Frobenius loss after each iteration.
    pub losses: Vec<f64>,
}

impl NmfModel {
    pub fn reconstruct(&self, row: usize, col: usize) -> f64 {
        let f = self.w.cols;
        (0..f).map(|k| self.w.get(row, k) * self.h.get(k, col)).sum()
    }

    pub fn reconstruct_row(&self, row: usize, out: &mut [f64]) {
        out.fill(0.0);
        for k in 0..self.w.cols {
            let wv = self.w.get(row, k);
            if wv == 0.0 {
                continue;
            }
            let hrow = self.h.row(k);
            for (slot, &hv) in out.iter_mut().zip(hrow) {
                *slot += wv * hv;
            }
        }
    }
}

fn frobenius_loss(v: &Matrix, w: &Matrix, h: &Matrix) -> f64 {
    let wh = w.matmul(h);
    v.data
        .iter()
        .zip(&wh.data)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum()
}

/// Factorize the dense zero-filled matrix built from `triplets`.
pub fn factorize(
    triplets: &[(u32, u32, f64)],
    m: usize,
    n: usize,
    f: usize,
    iterations: usize,
    seed: u64,
) -> NmfModel {
    let f = f.min(m).min(n).max(1);
    let mut v = Matrix::zeros(m, n);
    for &(r, c, val) in triplets {
        v.set(r as usize, c as usize, val.max(0.0));
    }
    let mean = if triplets.is_empty() {
        0.0
    } else {
        v.data.iter().sum::<f64>() / (m * n) as f64
    };
    let scale = (mean / f as f64).max(EPS).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Matrix::zeros(m, f);
    let mut h = Matrix::zeros(f, n);
    for x in w.data.iter_mut().chain(h.data.iter_mut()) {
        *x = rng.gen::<f64>() * scale + EPS;
    }
    let mut losses = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        // H <- H .* (W^T V) ./ (W^T W H)
        let wt = w.transpose();
        let num = wt.matmul(&v);
        let den = wt.matmul(&w).matmul(&h);
        for i in 0..h.data.len() {
            h.data[i] *= num.data[i] / (den.data[i] + EPS);
        }
        // W <- W .* (V H^T) ./ (W H H^T)
        let ht = h.transpose();
        let num = v.matmul(&ht);
        let den = w.matmul(&h.matmul(&ht));
        for i in 0..w.data.len() {
            w.data[i] *= num.data[i] / (den.data[i] + EPS);
        }
        losses.push(frobenius_loss(&v, &w, &h));
    }
    NmfModel { w, h, losses }
}
