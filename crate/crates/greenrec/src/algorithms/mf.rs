//! SGD matrix factorization on observed ratings: plain inner-product
//! factors, optionally with global/user/item bias terms.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct MfConfig {
    pub factors: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub epochs: usize,
    pub biased: bool,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MfModel {
    pub factors: usize,
    pub biased: bool,
    pub mu: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    /// m x f, row-major.
    pub p: Vec<f64>,
    /// n x f, row-major.
    pub q: Vec<f64>,
}

impl MfModel {
    pub fn predict(&self, user: usize, item: usize) -> f64 {
        let f = self.factors;
        let dot: f64 = self.p[user * f..(user + 1) * f]
            .iter()
            .zip(&self.q[item * f..(item + 1) * f])
            .map(|(a, b)| a * b)
            .sum();
        if self.biased {
            self.mu + self.user_bias[user] + self.item_bias[item] + dot
        } else {
            dot
        }
    }
}

/// Analytic gradient of the single-observation squared loss
/// `(r - pred)^2 + reg * (|p_u|^2 + |q_i|^2 [+ b_u^2 + b_i^2])`
/// with respect to (p_u, q_i, b_u, b_i). Training applies this
/// directly, so a finite-difference check on it covers the SGD path.
pub fn point_gradient(
    model: &MfModel,
    user: usize,
    item: usize,
    rating: f64,
    reg: f64,
) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let f = model.factors;
    let err = rating - model.predict(user, item);
    let pu = &model.p[user * f..(user + 1) * f];
    let qi = &model.q[item * f..(item + 1) * f];
    let gp: Vec<f64> = pu
        .iter()
        .zip(qi)
        .map(|(&p, &q)| -2.0 * err * q + 2.0 * reg * p)
        .collect();
    let gq: Vec<f64> = pu
        .iter()
        .zip(qi)
        .map(|(&p, &q)| -2.0 * err * p + 2.0 * reg * q)
        .collect();
    if model.biased {
        let gbu = -2.0 * err + 2.0 * reg * model.user_bias[user];
        let gbi = -2.0 * err + 2.0 * reg * model.item_bias[item];
        (gp, gq, gbu, gbi)
    } else {
        (gp, gq, 0.0, 0.0)
    }
}

/// Train by SGD over the observed (user, item, rating) triplets.
pub fn train(
    triplets: &[(u32, u32, f64)],
    m: usize,
    n: usize,
    cfg: &MfConfig,
    seed: u64,
) -> MfModel {
    let f = cfg.factors.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = 0.1;
    let mut model = MfModel {
        factors: f,
        biased: cfg.biased,
        mu: if triplets.is_empty() {
            0.0
        } else {
            triplets.iter().map(|t| t.2).sum::<f64>() / triplets.len() as f64
        },
        user_bias: vec![0.0; m],
        item_bias: vec![0.0; n],
        p: (0..m * f).map(|_| (rng.gen::<f64>() - 0.5) * init).collect(),
        q: (0..n * f).map(|_| (rng.gen::<f64>() - 0.5) * init).collect(),
    };
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let lr = cfg.learning_rate;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let (u, i, r) = triplets[idx];
            let (u, i) = (u as usize, i as usize);
            let (gp, gq, gbu, gbi) = point_gradient(&model, u, i, r, cfg.regularization);
            for (k, (&dp, &dq)) in gp.iter().zip(&gq).enumerate() {
                model.p[u * f + k] -= lr * dp;
                model.q[i * f + k] -= lr * dq;
            }
            if cfg.biased {
                model.user_bias[u] -= lr * gbu;
                model.item_bias[i] -= lr * gbi;
            }
        }
    }
    model
}
