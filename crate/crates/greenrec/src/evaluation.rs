//! Top-N ranking evaluation: nDCG@10 with binary relevance, plus the
//! aggregations behind the result figures (relative performance,
//! per-dataset min-max normalization, group means with spread).

use std::collections::{BTreeMap, HashSet};

use crate::algorithms::{Kind, TrainedModel};
use crate::par;
use crate::sampling::{Method, SplitBundle};
use crate::{Error, Result};

/// Ordered top-K recommendations for one user.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RankedList {
    pub user: u32,
    pub items: Vec<u32>,
}

/// One experiment cell's outcome; the unit of persistence.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricRecord {
    pub dataset: String,
    pub algorithm: Kind,
    pub method: Method,
    pub portion: f64,
    pub seed: u64,
    pub ndcg_at_10: f64,
    pub runtime_s: f64,
    pub n_eval_users: usize,
}

/// nDCG@k with binary relevance: DCG sums `1/log2(i+1)` over ranks `i`
/// (1-based) holding a relevant item, IDCG over the first
/// `min(k, |relevant|)` ranks.
pub fn ndcg_at_k(ranked: &RankedList, relevant: &HashSet<u32>, k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    assert!(!relevant.is_empty(), "relevant set must be nonempty");
    let dcg: f64 = ranked
        .items
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, item)| relevant.contains(item))
        .map(|(idx, _)| 1.0 / ((idx + 2) as f64).log2())
        .sum();
    let idcg: f64 = (0..k.min(relevant.len()))
        .map(|idx| 1.0 / ((idx + 2) as f64).log2())
        .sum();
    dcg / idcg
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// When true, a user's validation items are removed from the
    /// candidate pool alongside their train items. Off by default:
    /// only train items are excluded.
    pub exclude_validation: bool,
}

impl Default for EvalOptions {
    fn default() -> EvalOptions {
        EvalOptions {
            exclude_validation: false,
        }
    }
}

/// Mean nDCG@k over every user with at least one test interaction.
/// Candidates are the full catalog minus the user's train items.
pub fn evaluate_bundle(
    model: &TrainedModel,
    bundle: &SplitBundle,
    k: usize,
) -> Result<(f64, usize)> {
    evaluate_bundle_with(model, bundle, k, EvalOptions::default())
}

pub fn evaluate_bundle_with(
    model: &TrainedModel,
    bundle: &SplitBundle,
    k: usize,
    opts: EvalOptions,
) -> Result<(f64, usize)> {
    let mut test_by_user: BTreeMap<u32, HashSet<u32>> = BTreeMap::new();
    for ix in &bundle.test {
        test_by_user.entry(ix.user).or_default().insert(ix.item);
    }
    if test_by_user.is_empty() {
        return Err(Error::NoEvaluableUsers(format!(
            "portion {} bundle has no users with test interactions",
            bundle.portion
        )));
    }
    let mut val_by_user: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    if opts.exclude_validation {
        for ix in &bundle.val {
            val_by_user.entry(ix.user).or_default().push(ix.item);
        }
    }
    let users: Vec<(&u32, &HashSet<u32>)> = test_by_user.iter().collect();
    let scores = par::map_slice(&users, |(user, relevant)| {
        let u = **user as usize;
        let mut exclude: HashSet<u32> = if u < model.train_seen.len() {
            model.train_seen[u].iter().copied().collect()
        } else {
            HashSet::new()
        };
        if let Some(val) = val_by_user.get(user) {
            exclude.extend(val.iter().copied());
        }
        let ranked = model.recommend_top_k(u, k, &exclude);
        ndcg_at_k(&ranked, relevant, k)
    });
    let n = scores.len();
    Ok((scores.iter().sum::<f64>() / n as f64, n))
}

/// Seed-mean nDCG per (algorithm, method, portion) for one dataset.
/// Portions are keyed by their bit pattern to stay ordered and exact.
pub fn seed_means(records: &[MetricRecord]) -> BTreeMap<(Kind, Method, u64), f64> {
    let mut acc: BTreeMap<(Kind, Method, u64), (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc
            .entry((r.algorithm, r.method, r.portion.to_bits()))
            .or_insert((0.0, 0));
        e.0 += r.ndcg_at_10;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

/// Seed-mean score at each portion as a percentage of the seed-mean
/// score at p = 1.0, for one (dataset, algorithm, method) slice.
/// Returns portion-sorted (portion, percent) pairs; rel(1.0) is
/// exactly 100.
pub fn relative_performance(records: &[MetricRecord]) -> Result<Vec<(f64, f64)>> {
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.portion.to_bits()).or_insert((0.0, 0));
        e.0 += r.ndcg_at_10;
        e.1 += 1;
    }
    let baseline = acc
        .get(&1.0f64.to_bits())
        .map(|&(s, n)| s / n as f64)
        .ok_or_else(|| Error::MissingBaseline("no portion 1.0 records".into()))?;
    if baseline <= 0.0 {
        return Err(Error::MissingBaseline(
            "baseline seed-mean score is zero".into(),
        ));
    }
    let mut out: Vec<(f64, f64)> = acc
        .into_iter()
        .map(|(p, (s, n))| {
            let portion = f64::from_bits(p);
            let rel = if portion == 1.0 {
                100.0
            } else {
                100.0 * (s / n as f64) / baseline
            };
            (portion, rel)
        })
        .collect();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(out)
}

/// Per-dataset min-max normalization of seed-mean cells to [0,1];
/// all-equal input maps every cell to 0.5.
pub fn normalize_scores(
    means: &BTreeMap<(Kind, Method, u64), f64>,
) -> BTreeMap<(Kind, Method, u64), f64> {
    let lo = means.values().cloned().fold(f64::INFINITY, f64::min);
    let hi = means.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    means
        .iter()
        .map(|(&k, &v)| {
            let norm = if hi - lo <= 0.0 {
                0.5
            } else {
                (v - lo) / (hi - lo)
            };
            (k, norm)
        })
        .collect()
}

/// Fixed algorithm groups used for aggregated curves. Group 1 holds
/// the neighborhood/decomposition models, Group 2 the bias-flavored
/// and popularity models; Random stays ungrouped as the baseline.
pub fn algorithm_group(kind: Kind) -> Option<u8> {
    match kind {
        Kind::UserKnn | Kind::ItemKnn | Kind::Svd | Kind::Nmf => Some(1),
        Kind::FunkSvd | Kind::Bias | Kind::Popularity | Kind::BiasedMf => Some(2),
        Kind::Random => None,
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GroupRow {
    pub group: u8,
    pub portion: f64,
    pub mean_relative_pct: f64,
    /// Population standard deviation across group members.
    pub stddev: f64,
    pub n_members: usize,
}

/// Mean and spread of per-algorithm relative performance within each
/// algorithm group, per portion, for one (dataset, method) slice.
pub fn aggregate_groups(records: &[MetricRecord]) -> Result<Vec<GroupRow>> {
    // group -> portion bits -> member relative values
    let mut cells: BTreeMap<(u8, u64), Vec<f64>> = BTreeMap::new();
    let mut by_algo: BTreeMap<Kind, Vec<MetricRecord>> = BTreeMap::new();
    for r in records {
        by_algo.entry(r.algorithm).or_default().push(r.clone());
    }
    for (kind, recs) in &by_algo {
        let Some(group) = algorithm_group(*kind) else {
            continue;
        };
        for (portion, rel) in relative_performance(recs)? {
            cells
                .entry((group, portion.to_bits()))
                .or_default()
                .push(rel);
        }
    }
    Ok(cells
        .into_iter()
        .map(|((group, pbits), vals)| {
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            GroupRow {
                group,
                portion: f64::from_bits(pbits),
                mean_relative_pct: mean,
                stddev: var.sqrt(),
                n_members: n,
            }
        })
        .collect())
}
