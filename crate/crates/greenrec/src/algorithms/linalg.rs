//! Small dense matrix helpers for the factorization algorithms:
//! row-major storage, Gram-Schmidt QR, and a one-sided Jacobi SVD for
//! the projected matrices of the randomized SVD.

use crate::par;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let cols = other.cols;
        let rows_out = par::map_indexed(self.rows, |r| {
            let mut row = vec![0.0; cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * cols..(k + 1) * cols];
                for (acc, &b) in row.iter_mut().zip(orow) {
                    *acc += a * b;
                }
            }
            row
        });
        Matrix {
            rows: self.rows,
            cols,
            data: rows_out.into_iter().flatten().collect(),
        }
    }

    fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// Thin QR by modified Gram-Schmidt; returns Q with orthonormal
/// columns (zero columns are dropped-in-place as zeros when the input
/// is rank deficient).
pub fn qr_q(a: &Matrix) -> Matrix {
    let mut q = a.clone();
    for j in 0..q.cols {
        for k in 0..j {
            let mut dot = 0.0;
            for r in 0..q.rows {
                dot += q.get(r, k) * q.get(r, j);
            }
            for r in 0..q.rows {
                let v = q.get(r, j) - dot * q.get(r, k);
                q.set(r, j, v);
            }
        }
        let norm: f64 = (0..q.rows).map(|r| q.get(r, j).powi(2)).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for r in 0..q.rows {
                let v = q.get(r, j) / norm;
                q.set(r, j, v);
            }
        } else {
            for r in 0..q.rows {
                q.set(r, j, 0.0);
            }
        }
    }
    q
}

/// One-sided Jacobi SVD of `a` (rows >= cols works best). Returns
/// (U, sigma, V) with `a = U * diag(sigma) * V^T`, singular values in
/// non-increasing order.
pub fn jacobi_svd(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let n = a.cols;
    let mut u = a.clone();
    let mut v = Matrix::identity(n);
    let eps = 1e-14;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for r in 0..u.rows {
                    let x = u.get(r, p);
                    let y = u.get(r, q);
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= eps * (app * aqq).sqrt().max(1e-300) {
                    continue;
                }
                off += apq.abs();
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..u.rows {
                    let x = u.get(r, p);
                    let y = u.get(r, q);
                    u.set(r, p, c * x - s * y);
                    u.set(r, q, s * x + c * y);
                }
                for r in 0..n {
                    let x = v.get(r, p);
                    let y = v.get(r, q);
                    v.set(r, p, c * x - s * y);
                    v.set(r, q, s * x + c * y);
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    // column norms are the singular values
    let mut order: Vec<usize> = (0..n).collect();
    let sigmas: Vec<f64> = (0..n)
        .map(|j| (0..u.rows).map(|r| u.get(r, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&a, &b| sigmas[b].partial_cmp(&sigmas[a]).unwrap());
    let mut u_sorted = Matrix::zeros(u.rows, n);
    let mut v_sorted = Matrix::zeros(n, n);
    let mut s_sorted = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = sigmas[src];
        s_sorted.push(s);
        let ucol = u.col(src);
        let vcol = v.col(src);
        for r in 0..u.rows {
            u_sorted.set(r, dst, if s > 1e-12 { ucol[r] / s } else { 0.0 });
        }
        for r in 0..n {
            v_sorted.set(r, dst, vcol[r]);
        }
    }
    (u_sorted, s_sorted, v_sorted)
}
