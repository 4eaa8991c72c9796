//! From-scratch recommenders behind a single train/score interface:
//! Random, Popularity, Bias, UserKNN, ItemKNN, FunkSVD, BiasedMF,
//! truncated SVD, and NMF.

pub mod knn;
pub mod linalg;
pub mod mf;
pub mod nmf;
pub mod svd;

use std::collections::{BTreeMap, HashSet};

use crate::evaluation::RankedList;
use crate::ingest::{Feedback, Interaction};
use crate::sampling::sub_seed;
use crate::{Error, Result};

use knn::SparseVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Random,
    Popularity,
    Bias,
    UserKnn,
    ItemKnn,
    FunkSvd,
    BiasedMf,
    Svd,
    Nmf,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::Random,
        Kind::Popularity,
        Kind::Bias,
        Kind::UserKnn,
        Kind::ItemKnn,
        Kind::FunkSvd,
        Kind::BiasedMf,
        Kind::Svd,
        Kind::Nmf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Kind::Random => "random",
            Kind::Popularity => "popularity",
            Kind::Bias => "bias",
            Kind::UserKnn => "user_knn",
            Kind::ItemKnn => "item_knn",
            Kind::FunkSvd => "funk_svd",
            Kind::BiasedMf => "biased_mf",
            Kind::Svd => "svd",
            Kind::Nmf => "nmf",
        }
    }

    /// Declared hyperparameter schema: (name, default).
    pub fn schema(&self) -> &'static [(&'static str, f64)] {
        match self {
            Kind::Random | Kind::Popularity => &[],
            Kind::Bias => &[("damping", 0.0)],
            Kind::UserKnn | Kind::ItemKnn => &[("neighbors", 20.0), ("binarize", 0.0)],
            Kind::FunkSvd | Kind::BiasedMf => &[
                ("factors", 50.0),
                ("learning_rate", 0.005),
                ("regularization", 0.02),
                ("epochs", 20.0),
            ],
            Kind::Svd => &[
                ("factors", 50.0),
                ("power_iters", 4.0),
                ("oversample", 10.0),
                ("binarize", 1.0),
            ],
            Kind::Nmf => &[("factors", 50.0), ("iterations", 100.0)],
        }
    }

    /// Kinds that need explicit ratings; the bias family is skipped on
    /// implicit data, where rating deviations are undefined.
    pub fn requires_explicit(&self) -> bool {
        matches!(self, Kind::Bias | Kind::FunkSvd | Kind::BiasedMf)
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Kind> {
        Kind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RecommenderSpec {
    pub kind: Kind,
    pub hyperparams: BTreeMap<String, f64>,
    pub seed: u64,
}

impl RecommenderSpec {
    pub fn new(kind: Kind, seed: u64) -> RecommenderSpec {
        RecommenderSpec {
            kind,
            hyperparams: BTreeMap::new(),
            seed,
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> RecommenderSpec {
        self.hyperparams.insert(name.to_string(), value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for key in self.hyperparams.keys() {
            if !self.kind.schema().iter().any(|(n, _)| n == key) {
                return Err(Error::Config(format!(
                    "hyperparameter '{key}' is not in the schema of {}",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    pub fn param(&self, name: &str) -> f64 {
        if let Some(&v) = self.hyperparams.get(name) {
            return v;
        }
        self.kind
            .schema()
            .iter()
            .find(|(n, _)| *n == name)
            .map(|&(_, d)| d)
            .unwrap_or_else(|| panic!("{name} is not a parameter of {}", self.kind))
    }

    /// Stable textual key of the effective hyperparameters, used for
    /// result-store uniqueness.
    pub fn hyper_key(&self) -> String {
        self.kind
            .schema()
            .iter()
            .map(|&(n, _)| format!("{n}={}", self.param(n)))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Item/user universe a model is trained against.
#[derive(Debug, Clone, Copy)]
pub struct Catalog {
    pub n_users: usize,
    pub n_items: usize,
    pub feedback: Feedback,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
enum State {
    Random {
        seed: u64,
    },
    Popularity,
    Bias {
        mu: f64,
        user_bias: Vec<f64>,
        item_bias: Vec<f64>,
    },
    UserKnn {
        /// Per-user top neighbors by cosine over mean-centered vectors.
        neighbors: Vec<Vec<(u32, f64)>>,
        /// Raw (uncentered) interaction values used for scoring.
        user_raw: Vec<SparseVec>,
    },
    ItemKnn {
        /// Per-item top neighbors by adjusted cosine.
        neighbors: Vec<Vec<(u32, f64)>>,
        user_raw: Vec<SparseVec>,
    },
    Mf(mf::MfModel),
    Svd(svd::TruncatedSvd),
    Nmf(nmf::NmfModel),
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainedModel {
    pub kind: Kind,
    pub n_users: usize,
    pub n_items: usize,
    /// Per-user sorted list of items seen in training.
    pub train_seen: Vec<Vec<u32>>,
    /// Item interaction counts, also the unknown-user fallback ranking.
    popularity: Vec<f64>,
    state: State,
}

/// Interaction value used in vectors and matrices: 1.0 for implicit or
/// binarized data, the rating otherwise.
fn value(ix: &Interaction, feedback: Feedback, binarize: bool) -> f64 {
    if feedback == Feedback::Implicit || binarize {
        1.0
    } else {
        ix.rating.unwrap_or(1.0)
    }
}

fn user_vectors(
    train: &[Interaction],
    catalog: &Catalog,
    binarize: bool,
    center: bool,
) -> Vec<SparseVec> {
    let mut vecs: Vec<SparseVec> = vec![Vec::new(); catalog.n_users];
    for ix in train {
        vecs[ix.user as usize].push((ix.item, value(ix, catalog.feedback, binarize)));
    }
    for v in &mut vecs {
        v.sort_unstable_by_key(|e| e.0);
        if center && !v.is_empty() {
            let mean = v.iter().map(|e| e.1).sum::<f64>() / v.len() as f64;
            for e in v.iter_mut() {
                e.1 -= mean;
            }
        }
    }
    vecs
}

/// Train a recommender on the given interactions.
pub fn train(spec: &RecommenderSpec, train: &[Interaction], catalog: &Catalog) -> Result<TrainedModel> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if spec.kind.requires_explicit() && catalog.feedback == Feedback::Implicit {
        return Err(Error::UnsupportedCombination {
            kind: spec.kind.to_string(),
        });
    }

    let mut popularity = vec![0.0f64; catalog.n_items];
    let mut train_seen: Vec<Vec<u32>> = vec![Vec::new(); catalog.n_users];
    for ix in train {
        popularity[ix.item as usize] += 1.0;
        train_seen[ix.user as usize].push(ix.item);
    }
    for s in &mut train_seen {
        s.sort_unstable();
        s.dedup();
    }

    let explicit = catalog.feedback == Feedback::Explicit;
    let state = match spec.kind {
        Kind::Random => State::Random { seed: spec.seed },
        Kind::Popularity => State::Popularity,
        Kind::Bias => {
            let damping = spec.param("damping");
            let mu = train.iter().map(|ix| ix.rating.unwrap_or(1.0)).sum::<f64>()
                / train.len() as f64;
            let mut item_sum = vec![0.0f64; catalog.n_items];
            let mut item_n = vec![0usize; catalog.n_items];
            for ix in train {
                item_sum[ix.item as usize] += ix.rating.unwrap_or(1.0) - mu;
                item_n[ix.item as usize] += 1;
            }
            let item_bias: Vec<f64> = item_sum
                .iter()
                .zip(&item_n)
                .map(|(&s, &n)| if n > 0 { s / (n as f64 + damping) } else { 0.0 })
                .collect();
            let mut user_sum = vec![0.0f64; catalog.n_users];
            let mut user_n = vec![0usize; catalog.n_users];
            for ix in train {
                user_sum[ix.user as usize] +=
                    ix.rating.unwrap_or(1.0) - mu - item_bias[ix.item as usize];
                user_n[ix.user as usize] += 1;
            }
            let user_bias: Vec<f64> = user_sum
                .iter()
                .zip(&user_n)
                .map(|(&s, &n)| if n > 0 { s / (n as f64 + damping) } else { 0.0 })
                .collect();
            State::Bias {
                mu,
                user_bias,
                item_bias,
            }
        }
        Kind::UserKnn => {
            let binarize = spec.param("binarize") != 0.0;
            let m = spec.param("neighbors") as usize;
            let centered = user_vectors(train, catalog, binarize, explicit && !binarize);
            let user_raw = user_vectors(train, catalog, binarize, false);
            let neighbors = knn::top_neighbors(&centered, catalog.n_items, m);
            State::UserKnn { neighbors, user_raw }
        }
        Kind::ItemKnn => {
            let binarize = spec.param("binarize") != 0.0;
            let m = spec.param("neighbors") as usize;
            let centered = user_vectors(train, catalog, binarize, explicit && !binarize);
            let user_raw = user_vectors(train, catalog, binarize, false);
            let mut item_x: Vec<SparseVec> = vec![Vec::new(); catalog.n_items];
            for (u, v) in centered.iter().enumerate() {
                for &(i, x) in v {
                    item_x[i as usize].push((u as u32, x));
                }
            }
            let neighbors = knn::top_neighbors(&item_x, catalog.n_users, m);
            State::ItemKnn { neighbors, user_raw }
        }
        Kind::FunkSvd | Kind::BiasedMf => {
            let cfg = mf::MfConfig {
                factors: spec.param("factors") as usize,
                learning_rate: spec.param("learning_rate"),
                regularization: spec.param("regularization"),
                epochs: spec.param("epochs") as usize,
                biased: spec.kind == Kind::BiasedMf,
            };
            let triplets: Vec<(u32, u32, f64)> = train
                .iter()
                .map(|ix| (ix.user, ix.item, ix.rating.unwrap_or(1.0)))
                .collect();
            State::Mf(mf::train(
                &triplets,
                catalog.n_users,
                catalog.n_items,
                &cfg,
                sub_seed(spec.seed, "mf", 0),
            ))
        }
        Kind::Svd => {
            // binary interaction matrix by default (ranks by predicted
            // interaction, which is what top-N relevance measures);
            // binarize=0 factors ratings centered by the global mean
            let binarize = spec.param("binarize") != 0.0;
            let triplets: Vec<(u32, u32, f64)> = if explicit && !binarize {
                let mu = train.iter().map(|ix| ix.rating.unwrap_or(1.0)).sum::<f64>()
                    / train.len() as f64;
                train
                    .iter()
                    .map(|ix| (ix.user, ix.item, ix.rating.unwrap_or(1.0) - mu))
                    .collect()
            } else {
                train.iter().map(|ix| (ix.user, ix.item, 1.0)).collect()
            };
            State::Svd(svd::truncated_svd(
                &triplets,
                catalog.n_users,
                catalog.n_items,
                spec.param("factors") as usize,
                spec.param("power_iters") as usize,
                spec.param("oversample") as usize,
                sub_seed(spec.seed, "svd", 0),
            ))
        }
        Kind::Nmf => {
            let triplets: Vec<(u32, u32, f64)> = train
                .iter()
                .map(|ix| (ix.user, ix.item, value(ix, catalog.feedback, false)))
                .collect();
            State::Nmf(nmf::factorize(
                &triplets,
                catalog.n_users,
                catalog.n_items,
                spec.param("factors") as usize,
                spec.param("iterations") as usize,
                sub_seed(spec.seed, "nmf", 0),
            ))
        }
    };
    Ok(TrainedModel {
        kind: spec.kind,
        n_users: catalog.n_users,
        n_items: catalog.n_items,
        train_seen,
        popularity,
        state,
    })
}

fn hash_uniform(seed: u64, user: usize, item: usize) -> f64 {
    let bits = sub_seed(seed, "score", ((user as u64) << 32) | item as u64);
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

impl TrainedModel {
    fn known_user(&self, user: usize) -> bool {
        user < self.n_users && !self.train_seen[user].is_empty()
    }

    /// Score one (user, item) pair. Unknown users fall back to the
    /// popularity ranking (mean rating for the bias family).
    pub fn score(&self, user: usize, item: usize) -> Result<f64> {
        if item >= self.n_items {
            return Err(Error::ItemNotInCatalog(item));
        }
        if !self.known_user(user) {
            return Ok(match &self.state {
                State::Bias { mu, .. } => *mu,
                _ => self.popularity[item],
            });
        }
        Ok(match &self.state {
            State::Random { seed } => hash_uniform(*seed, user, item),
            State::Popularity => self.popularity[item],
            State::Bias {
                mu,
                user_bias,
                item_bias,
            } => mu + user_bias[user] + item_bias[item],
            State::UserKnn { neighbors, user_raw } => {
                knn::weighted_sum(&neighbors[user], user_raw, item as u32)
            }
            State::ItemKnn { neighbors, user_raw } => {
                let mut acc = 0.0;
                for &(j, sim) in &neighbors[item] {
                    if let Some(x) = knn::lookup(&user_raw[user], j) {
                        acc += sim * x;
                    }
                }
                acc
            }
            State::Mf(m) => m.predict(user, item),
            State::Svd(m) => m.reconstruct(user, item),
            State::Nmf(m) => m.reconstruct(user, item),
        })
    }

    /// Scores for every catalog item at once; agrees with [`score`] and
    /// is what the top-k path uses.
    pub fn scores_for_user(&self, user: usize) -> Vec<f64> {
        if !self.known_user(user) {
            return match &self.state {
                State::Bias { mu, .. } => vec![*mu; self.n_items],
                _ => self.popularity.clone(),
            };
        }
        match &self.state {
            State::Random { seed } => (0..self.n_items)
                .map(|i| hash_uniform(*seed, user, i))
                .collect(),
            State::Popularity => self.popularity.clone(),
            State::Bias {
                mu,
                user_bias,
                item_bias,
            } => item_bias
                .iter()
                .map(|b_i| mu + user_bias[user] + b_i)
                .collect(),
            State::UserKnn { neighbors, user_raw } => {
                let mut acc = vec![0.0f64; self.n_items];
                for &(v, sim) in &neighbors[user] {
                    for &(i, x) in &user_raw[v as usize] {
                        acc[i as usize] += sim * x;
                    }
                }
                acc
            }
            State::ItemKnn { neighbors, user_raw } => (0..self.n_items)
                .map(|i| {
                    let mut acc = 0.0;
                    for &(j, sim) in &neighbors[i] {
                        if let Some(x) = knn::lookup(&user_raw[user], j) {
                            acc += sim * x;
                        }
                    }
                    acc
                })
                .collect(),
            State::Mf(m) => (0..self.n_items).map(|i| m.predict(user, i)).collect(),
            State::Svd(m) => {
                let mut out = vec![0.0; self.n_items];
                m.reconstruct_row(user, &mut out);
                out
            }
            State::Nmf(m) => {
                let mut out = vec![0.0; self.n_items];
                m.reconstruct_row(user, &mut out);
                out
            }
        }
    }

    /// Top-`k` catalog items not in `exclude`, descending score, ties
    /// broken by ascending item index.
    pub fn recommend_top_k(&self, user: usize, k: usize, exclude: &HashSet<u32>) -> RankedList {
        let scores = self.scores_for_user(user);
        let mut ranked: Vec<(u32, f64)> = scores
            .iter()
            .enumerate()
            .filter(|&(i, _)| !exclude.contains(&(i as u32)))
            .map(|(i, &s)| (i as u32, s))
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        RankedList {
            user: user as u32,
            items: ranked.into_iter().map(|(i, _)| i).collect(),
        }
    }

    /// Versioned structured-text serialization for model reuse.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "version": 1, "model": self }).to_string()
    }

    pub fn from_json(s: &str) -> Result<TrainedModel> {
        let v: serde_json::Value =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("bad model file: {e}")))?;
        if v["version"] != 1 {
            return Err(Error::Config(format!("unsupported model version {}", v["version"])));
        }
        serde_json::from_value(v["model"].clone())
            .map_err(|e| Error::Config(format!("bad model file: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::explicit;

    fn catalog(d: &crate::ingest::Dataset) -> Catalog {
        Catalog {
            n_users: d.n_users(),
            n_items: d.n_items(),
            feedback: d.feedback,
        }
    }

    #[test]
    fn popularity_counts_interactions() {
        let d = explicit(&[("u1", "i1", 1.0), ("u2", "i1", 1.0), ("u1", "i2", 1.0)]);
        let spec = RecommenderSpec::new(Kind::Popularity, 0);
        let m = train(&spec, &d.interactions, &catalog(&d)).unwrap();
        assert!(m.score(0, 0).unwrap() > m.score(0, 1).unwrap());
        assert_eq!(m.score(0, 0).unwrap(), 2.0);
    }

    #[test]
    fn bias_matches_damped_mean_formula() {
        // ratings i1: {5,5}, i2: {1}; mu = 11/3
        let d = explicit(&[("u1", "i1", 5.0), ("u2", "i1", 5.0), ("u3", "i2", 1.0)]);
        let spec = RecommenderSpec::new(Kind::Bias, 0).with_param("damping", 0.0);
        let m = train(&spec, &d.interactions, &catalog(&d)).unwrap();
        let mu = 11.0 / 3.0;
        match &m.state {
            State::Bias { item_bias, .. } => {
                assert!((item_bias[0] - 4.0 / 3.0).abs() < 1e-12);
                assert!((item_bias[1] - (-8.0 / 3.0)).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
        // score is exactly mu + b_u + b_i
        let s = m.score(0, 0).unwrap();
        let b_u = 5.0 - mu - 4.0 / 3.0;
        assert!((s - (mu + b_u + 4.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn bias_family_rejects_implicit_data() {
        let d = crate::ingest::Dataset::from_rows(
            "imp",
            Feedback::Implicit,
            vec![("u".to_string(), "i".to_string(), None, None)],
        )
        .unwrap();
        for kind in [Kind::Bias, Kind::FunkSvd, Kind::BiasedMf] {
            let err = train(&RecommenderSpec::new(kind, 0), &d.interactions, &catalog(&d))
                .unwrap_err();
            assert!(matches!(err, Error::UnsupportedCombination { .. }));
        }
    }

    #[test]
    fn item_knn_zero_similarity_scores_zero() {
        // u1 rates i1/i2, u2 rates i3/i4: no co-rated users, so i3 has
        // no similarity to anything u1 has seen
        let d = explicit(&[
            ("u1", "i1", 5.0),
            ("u1", "i2", 3.0),
            ("u2", "i3", 4.0),
            ("u2", "i4", 2.0),
        ]);
        let spec = RecommenderSpec::new(Kind::ItemKnn, 0);
        let m = train(&spec, &d.interactions, &catalog(&d)).unwrap();
        assert_eq!(m.score(0, 2).unwrap(), 0.0);
    }

    #[test]
    fn user_knn_matches_bruteforce_weighted_sum() {
        let d = explicit(&[
            ("a", "x", 5.0),
            ("a", "y", 3.0),
            ("a", "z", 1.0),
            ("b", "x", 4.0),
            ("b", "y", 3.0),
            ("b", "w", 2.0),
            ("c", "y", 1.0),
            ("c", "z", 5.0),
            ("c", "w", 3.0),
        ]);
        let spec = RecommenderSpec::new(Kind::UserKnn, 0).with_param("neighbors", 1e9);
        let m = train(&spec, &d.interactions, &catalog(&d)).unwrap();
        // brute force: similarities over centered vectors, scoring as
        // a similarity-weighted sum of raw ratings
        let centered = user_vectors(&d.interactions, &catalog(&d), false, true);
        let raw = user_vectors(&d.interactions, &catalog(&d), false, false);
        for user in 0..3usize {
            for item in 0..4usize {
                let mut expect = 0.0;
                for v in 0..3usize {
                    if v == user {
                        continue;
                    }
                    let sim = knn::cosine_sparse(&centered[user], &centered[v]);
                    if sim <= 0.0 {
                        continue; // model keeps positive similarities only
                    }
                    if let Some(x) = knn::lookup(&raw[v], item as u32) {
                        expect += sim * x;
                    }
                }
                assert!((m.score(user, item).unwrap() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn top_k_tie_breaks_by_index() {
        let d = explicit(&[
            ("u1", "i1", 1.0),
            ("u2", "i1", 1.0),
            ("u1", "i2", 1.0),
            ("u2", "i2", 1.0),
            ("u1", "i3", 1.0),
        ]);
        let spec = RecommenderSpec::new(Kind::Popularity, 0);
        let m = train(&spec, &d.interactions, &catalog(&d)).unwrap();
        // counts: i1=2, i2=2, i3=1
        let top = m.recommend_top_k(0, 2, &HashSet::new());
        assert_eq!(top.items, vec![0, 1]);
    }

    #[test]
    fn top_k_larger_than_catalog_returns_all() {
        let d = explicit(&[("u1", "i1", 1.0), ("u1", "i2", 2.0)]);
        let spec = RecommenderSpec::new(Kind::Random, 3);
        let m = train(&spec, &d.interactions, &catalog(&d)).unwrap();
        let top = m.recommend_top_k(0, 100, &HashSet::new());
        assert_eq!(top.items.len(), 2);
    }

    #[test]
    fn out_of_catalog_item_is_an_error() {
        let d = explicit(&[("u1", "i1", 1.0)]);
        let m = train(&RecommenderSpec::new(Kind::Popularity, 0), &d.interactions, &catalog(&d))
            .unwrap();
        assert!(matches!(m.score(0, 5), Err(Error::ItemNotInCatalog(5))));
    }

    #[test]
    fn scores_for_user_agrees_with_single_score() {
        let d = explicit(&[
            ("a", "x", 5.0),
            ("a", "y", 3.0),
            ("a", "z", 2.0),
            ("b", "x", 4.0),
            ("b", "y", 2.0),
            ("b", "w", 5.0),
            ("c", "z", 4.0),
            ("c", "w", 1.0),
            ("c", "x", 2.0),
        ]);
        for kind in Kind::ALL {
            let spec = RecommenderSpec::new(kind, 11);
            let m = train(&spec, &d.interactions, &catalog(&d)).unwrap();
            for u in 0..d.n_users() {
                let batch = m.scores_for_user(u);
                for i in 0..d.n_items() {
                    assert!(
                        (batch[i] - m.score(u, i).unwrap()).abs() < 1e-12,
                        "{kind} disagreed at ({u},{i})"
                    );
                }
            }
        }
    }

    #[test]
    fn determinism_across_trainings() {
        let d = explicit(&[
            ("a", "x", 5.0),
            ("a", "y", 3.0),
            ("b", "x", 4.0),
            ("b", "z", 2.0),
            ("c", "y", 1.0),
            ("c", "z", 5.0),
        ]);
        for kind in Kind::ALL {
            let spec = RecommenderSpec::new(kind, 77);
            let m1 = train(&spec, &d.interactions, &catalog(&d)).unwrap();
            let m2 = train(&spec, &d.interactions, &catalog(&d)).unwrap();
            for u in 0..d.n_users() {
                assert_eq!(
                    m1.recommend_top_k(u, 3, &HashSet::new()).items,
                    m2.recommend_top_k(u, 3, &HashSet::new()).items
                );
            }
        }
    }

    #[test]
    fn rating_scale_invariance_for_popularity_and_knn() {
        let rows = [
            ("a", "x", 5.0),
            ("a", "y", 3.0),
            ("a", "z", 2.0),
            ("b", "x", 4.0),
            ("b", "y", 2.0),
            ("b", "w", 5.0),
            ("c", "z", 4.0),
            ("c", "w", 1.0),
            ("c", "x", 2.0),
        ];
        let scaled: Vec<(&str, &str, f64)> =
            rows.iter().map(|&(u, i, r)| (u, i, r * 3.0)).collect();
        let d1 = explicit(&rows);
        let d2 = explicit(&scaled);
        for kind in [Kind::Popularity, Kind::UserKnn, Kind::ItemKnn] {
            let spec = RecommenderSpec::new(kind, 5);
            let m1 = train(&spec, &d1.interactions, &catalog(&d1)).unwrap();
            let m2 = train(&spec, &d2.interactions, &catalog(&d2)).unwrap();
            for u in 0..d1.n_users() {
                assert_eq!(
                    m1.recommend_top_k(u, 4, &HashSet::new()).items,
                    m2.recommend_top_k(u, 4, &HashSet::new()).items,
                    "{kind} ranking changed under uniform rating scaling"
                );
            }
        }
    }

    #[test]
    fn model_json_roundtrip() {
        let d = explicit(&[("a", "x", 5.0), ("b", "x", 3.0), ("b", "y", 4.0)]);
        let spec = RecommenderSpec::new(Kind::Bias, 0);
        let m = train(&spec, &d.interactions, &catalog(&d)).unwrap();
        let back = TrainedModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back.score(0, 1).unwrap(), m.score(0, 1).unwrap());
    }
}
