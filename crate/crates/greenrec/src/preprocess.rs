//! Preprocessing: exact-duplicate removal, duplicate-pair rating
//! averaging, and k-core pruning of the bipartite interaction graph.

use std::collections::HashMap;

use crate::ingest::{compute_stats, Dataset, DatasetStats, Feedback, Interaction};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PruneConfig {
    /// Core threshold: every surviving user and item keeps at least
    /// `k` interactions.
    pub k: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PreprocessReport {
    pub duplicates_removed: usize,
    pub pairs_averaged: usize,
    pub kcore_rounds: usize,
    pub before: DatasetStats,
    pub after: DatasetStats,
}

/// Remove exact duplicates: at most one copy of each (user, item,
/// rating) triple survives, first occurrence wins. Returns the pruned
/// dataset and the number of rows removed.
pub fn dedup_exact(d: &Dataset) -> (Dataset, usize) {
    let mut seen: HashMap<(u32, u32, Option<u64>), ()> = HashMap::new();
    let mut kept = Vec::with_capacity(d.interactions.len());
    for ix in &d.interactions {
        let key = (ix.user, ix.item, ix.rating.map(f64::to_bits));
        if seen.insert(key, ()).is_none() {
            kept.push(*ix);
        }
    }
    let removed = d.interactions.len() - kept.len();
    (d.reindex(&kept), removed)
}

/// Collapse each (user, item) pair to a single interaction whose rating
/// is the arithmetic mean of the pair's ratings and whose timestamp is
/// the max of the merged timestamps. No-op for implicit feedback.
/// Returns the dataset and the number of pairs merged.
pub fn average_duplicate_pairs(d: &Dataset) -> (Dataset, usize) {
    if d.feedback == Feedback::Implicit {
        return (d.clone(), 0);
    }
    // first slot per pair, accumulated mean/timestamp
    let mut slot: HashMap<(u32, u32), usize> = HashMap::new();
    let mut kept: Vec<Interaction> = Vec::with_capacity(d.interactions.len());
    let mut counts: Vec<usize> = Vec::new();
    let mut merged_pairs = 0usize;
    for ix in &d.interactions {
        match slot.get(&(ix.user, ix.item)) {
            Some(&pos) => {
                let prev = &mut kept[pos];
                if counts[pos] == 1 {
                    merged_pairs += 1;
                }
                let c = counts[pos] as f64;
                let prev_r = prev.rating.unwrap_or(0.0);
                prev.rating = Some((prev_r * c + ix.rating.unwrap_or(0.0)) / (c + 1.0));
                prev.timestamp = match (prev.timestamp, ix.timestamp) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                };
                counts[pos] += 1;
            }
            None => {
                slot.insert((ix.user, ix.item), kept.len());
                kept.push(*ix);
                counts.push(1);
            }
        }
    }
    (d.reindex(&kept), merged_pairs)
}

/// Iteratively peel users and items with fewer than `k` interactions
/// until a fixed point; all violators of both sides are removed per
/// round. The result is the unique maximal k-core of the bipartite
/// interaction graph. Returns the pruned dataset and the number of
/// peeling rounds.
pub fn kcore_prune(d: &Dataset, cfg: PruneConfig) -> (Dataset, usize) {
    let mut alive: Vec<Interaction> = d.interactions.clone();
    let mut rounds = 0usize;
    loop {
        rounds += 1;
        let mut user_deg: HashMap<u32, usize> = HashMap::new();
        let mut item_deg: HashMap<u32, usize> = HashMap::new();
        for ix in &alive {
            *user_deg.entry(ix.user).or_insert(0) += 1;
            *item_deg.entry(ix.item).or_insert(0) += 1;
        }
        let before = alive.len();
        alive.retain(|ix| user_deg[&ix.user] >= cfg.k && item_deg[&ix.item] >= cfg.k);
        if alive.len() == before {
            break;
        }
    }
    (d.reindex(&alive), rounds)
}

/// Full preprocessing chain: dedup, pair averaging, k-core.
pub fn preprocess(d: &Dataset, cfg: PruneConfig) -> (Dataset, PreprocessReport) {
    let before = compute_stats(d);
    let (d1, duplicates_removed) = dedup_exact(d);
    let (d2, pairs_averaged) = average_duplicate_pairs(&d1);
    let (d3, kcore_rounds) = kcore_prune(&d2, cfg);
    let after = compute_stats(&d3);
    let report = PreprocessReport {
        duplicates_removed,
        pairs_averaged,
        kcore_rounds,
        before,
        after,
    };
    (d3, report)
}
