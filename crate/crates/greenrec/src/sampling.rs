//! Train/validation/test splitting and the two downsampling strategies.
//!
//! User-Based keeps every user in all three subsets and thins each
//! user's training interactions per portion. User-Subset grows a seeded
//! prefix of users per portion while the validation and test sets keep
//! an exact global interaction count.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;

use crate::ingest::{Dataset, Interaction};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitConfig {
    pub fn with_seed(seed: u64) -> SplitConfig {
        SplitConfig {
            train_frac: 0.8,
            val_frac: 0.1,
            test_frac: 0.1,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.train_frac <= 0.0 || self.val_frac <= 0.0 || self.test_frac <= 0.0 {
            return Err(Error::SplitConfig("fractions must be positive".into()));
        }
        if (self.train_frac + self.val_frac + self.test_frac - 1.0).abs() > 1e-9 {
            return Err(Error::SplitConfig("fractions must sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    UserBased,
    UserSubset,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Method> {
        match s {
            "user_based" => Ok(Method::UserBased),
            "user_subset" => Ok(Method::UserSubset),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::UserBased => write!(f, "user_based"),
            Method::UserSubset => write!(f, "user_subset"),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DownsamplePlan {
    pub method: Method,
    /// Strictly increasing portions in (0, 1]; 1.0 is the full baseline.
    pub portions: Vec<f64>,
    pub seed: u64,
}

impl DownsamplePlan {
    pub fn new(method: Method, seed: u64) -> DownsamplePlan {
        DownsamplePlan {
            method,
            portions: (1..=10).map(|i| i as f64 / 10.0).collect(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.portions.is_empty() {
            return Err(Error::SplitConfig("portions must be nonempty".into()));
        }
        for w in self.portions.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::SplitConfig("portions must be strictly increasing".into()));
            }
        }
        if self.portions[0] <= 0.0 || *self.portions.last().unwrap() > 1.0 {
            return Err(Error::SplitConfig("portions must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// One (portion) cell of a downsampling run.
#[derive(Debug, Clone)]
pub struct SplitBundle {
    pub portion: f64,
    pub train: Vec<Interaction>,
    pub val: Vec<Interaction>,
    pub test: Vec<Interaction>,
    pub users_included: BTreeSet<u32>,
}

/// Derive a sub-seed from a master seed, a role tag, and extra bits.
/// Keeps parallel cell execution from perturbing any stream.
pub fn sub_seed(master: u64, tag: &str, extra: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(extra.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}

fn round(x: f64) -> usize {
    x.round() as usize
}

fn per_user_indices(d: &Dataset) -> Vec<Vec<usize>> {
    let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); d.n_users()];
    for (pos, ix) in d.interactions.iter().enumerate() {
        per_user[ix.user as usize].push(pos);
    }
    per_user
}

struct UserHoldout {
    test: Vec<usize>,
    val: Vec<usize>,
    pool: Vec<usize>,
}

/// Per-user holdout with `max(1, round(frac * n_u))` sizing for val and
/// test, drawn from a seed-shuffled permutation of the user's rows.
fn holdout_per_user(
    d: &Dataset,
    per_user: &[Vec<usize>],
    test_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<Vec<UserHoldout>> {
    let mut out = Vec::with_capacity(per_user.len());
    for (u, rows) in per_user.iter().enumerate() {
        let n_u = rows.len();
        if n_u < 3 {
            return Err(Error::UserTooSmall {
                user: d.user_id(u as u32).to_string(),
                n: n_u,
            });
        }
        let n_test = round(test_frac * n_u as f64).max(1);
        let n_val = round(val_frac * n_u as f64).max(1);
        if n_test + n_val >= n_u {
            return Err(Error::UserTooSmall {
                user: d.user_id(u as u32).to_string(),
                n: n_u,
            });
        }
        let mut perm = rows.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "holdout", u as u64));
        perm.shuffle(&mut rng);
        let test = perm[..n_test].to_vec();
        let val = perm[n_test..n_test + n_val].to_vec();
        let mut pool = perm[n_test + n_val..].to_vec();
        pool.sort_unstable();
        out.push(UserHoldout { test, val, pool });
    }
    Ok(out)
}

fn collect(d: &Dataset, rows: impl IntoIterator<Item = usize>) -> Vec<Interaction> {
    rows.into_iter().map(|pos| d.interactions[pos]).collect()
}

/// User-Based split and downsampling: every user appears in train, val,
/// and test of every bundle; the per-portion training sample is a fresh
/// seeded subsample of each user's training pool and val/test are
/// identical across portions.
pub fn split_user_based(
    d: &Dataset,
    cfg: &SplitConfig,
    plan: &DownsamplePlan,
) -> Result<Vec<SplitBundle>> {
    cfg.validate()?;
    plan.validate()?;
    if plan.method != Method::UserBased {
        return Err(Error::SplitConfig("plan method must be UserBased".into()));
    }
    let per_user = per_user_indices(d);
    let holdouts = holdout_per_user(d, &per_user, cfg.test_frac, cfg.val_frac, cfg.seed)?;

    let val: Vec<Interaction> = collect(d, holdouts.iter().flat_map(|h| h.val.iter().copied()));
    let test: Vec<Interaction> = collect(d, holdouts.iter().flat_map(|h| h.test.iter().copied()));
    let users_included: BTreeSet<u32> = (0..d.n_users() as u32).collect();

    let mut bundles = Vec::with_capacity(plan.portions.len());
    for &p in &plan.portions {
        let mut train_rows: Vec<usize> = Vec::new();
        for (u, h) in holdouts.iter().enumerate() {
            let n_tr = h.pool.len();
            let take = round(p * n_tr as f64).max(1).min(n_tr);
            if take == n_tr {
                train_rows.extend_from_slice(&h.pool);
            } else {
                let mut perm = h.pool.clone();
                let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(
                    plan.seed,
                    "portion",
                    (u as u64) ^ p.to_bits(),
                ));
                perm.shuffle(&mut rng);
                let mut chosen = perm[..take].to_vec();
                chosen.sort_unstable();
                train_rows.extend_from_slice(&chosen);
            }
        }
        bundles.push(SplitBundle {
            portion: p,
            train: collect(d, train_rows),
            val: val.clone(),
            test: test.clone(),
            users_included: users_included.clone(),
        });
    }
    Ok(bundles)
}

/// Largest-remainder apportionment of `total` units over weights
/// `exact`, with per-slot upper bounds. Assumes sum of bounds >= total.
fn apportion(exact: &[f64], total: usize, upper: &[usize]) -> Vec<usize> {
    let n = exact.len();
    let mut alloc: Vec<usize> = (0..n).map(|i| (exact[i].floor() as usize).min(upper[i])).collect();
    let mut assigned: usize = alloc.iter().sum();
    // order by descending fractional remainder, position as tie-break
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    while assigned < total {
        let mut progressed = false;
        for &i in &order {
            if assigned == total {
                break;
            }
            if alloc[i] < upper[i] {
                alloc[i] += 1;
                assigned += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    while assigned > total {
        for &i in order.iter().rev() {
            if assigned == total {
                break;
            }
            if alloc[i] > 0 {
                alloc[i] -= 1;
                assigned -= 1;
            }
        }
    }
    alloc
}

/// User-Subset split and downsampling: a seeded permutation of users is
/// shared across portions (so user sets nest); per portion, users are
/// taken from the prefix until the interaction budget is met, and the
/// global validation/test interaction counts are realized exactly by
/// largest-remainder apportionment over the selected users.
pub fn split_user_subset(
    d: &Dataset,
    cfg: &SplitConfig,
    plan: &DownsamplePlan,
) -> Result<Vec<SplitBundle>> {
    cfg.validate()?;
    plan.validate()?;
    if plan.method != Method::UserSubset {
        return Err(Error::SplitConfig("plan method must be UserSubset".into()));
    }
    let per_user = per_user_indices(d);
    let n_total = d.n_interactions();
    let v_target = round(cfg.val_frac * n_total as f64);
    let t_target = round(cfg.test_frac * n_total as f64);

    // one seeded user order shared by every portion
    let mut user_order: Vec<usize> = (0..d.n_users()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, "subset_order", 0));
    user_order.shuffle(&mut rng);

    // one per-user permutation of rows, reused across portions
    let user_perm: Vec<Vec<usize>> = per_user
        .iter()
        .enumerate()
        .map(|(u, rows)| {
            let mut perm = rows.clone();
            let mut r = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, "subset_assign", u as u64));
            perm.shuffle(&mut r);
            perm
        })
        .collect();

    let mut bundles = Vec::with_capacity(plan.portions.len());
    for &p in &plan.portions {
        let s_target = v_target + t_target + round(p * cfg.train_frac * n_total as f64);
        let mut selected: Vec<usize> = Vec::new();
        let mut s_actual = 0usize;
        for &u in &user_order {
            if s_actual >= s_target {
                break;
            }
            selected.push(u);
            s_actual += per_user[u].len();
        }
        let spare: usize = selected.iter().map(|&u| per_user[u].len() - 1).sum();
        if v_target + t_target > spare {
            return Err(Error::SplitConfig(format!(
                "portion {p}: validation+test quota {} exceeds the {} interactions \
                 available after retaining one training row per selected user",
                v_target + t_target,
                spare
            )));
        }

        let combined = v_target + t_target;
        let exact: Vec<f64> = selected
            .iter()
            .map(|&u| per_user[u].len() as f64 * combined as f64 / s_actual as f64)
            .collect();
        let upper: Vec<usize> = selected.iter().map(|&u| per_user[u].len() - 1).collect();
        let quota = apportion(&exact, combined, &upper);

        // split each user's quota between test and val, keeping both
        // nonempty when the quota allows it
        let exact_test: Vec<f64> = quota
            .iter()
            .map(|&c| c as f64 * t_target as f64 / combined as f64)
            .collect();
        let lower_test: Vec<usize> = quota.iter().map(|&c| usize::from(c >= 2)).collect();
        let upper_test: Vec<usize> = quota
            .iter()
            .map(|&c| if c >= 2 { c - 1 } else { c })
            .collect();
        let base: usize = lower_test.iter().sum();
        let headroom: Vec<usize> = upper_test
            .iter()
            .zip(&lower_test)
            .map(|(&u, &l)| u - l)
            .collect();
        let exact_above: Vec<f64> = exact_test
            .iter()
            .zip(&lower_test)
            .map(|(&e, &l)| (e - l as f64).max(0.0))
            .collect();
        let extra = apportion(&exact_above, t_target.saturating_sub(base), &headroom);
        let test_quota: Vec<usize> = lower_test.iter().zip(&extra).map(|(&l, &e)| l + e).collect();

        let mut train_rows = Vec::new();
        let mut val_rows = Vec::new();
        let mut test_rows = Vec::new();
        // iterate in dense-user order for deterministic output layout
        let mut sel_sorted: Vec<usize> = (0..selected.len()).collect();
        sel_sorted.sort_by_key(|&k| selected[k]);
        for &k in &sel_sorted {
            let u = selected[k];
            let perm = &user_perm[u];
            let t_u = test_quota[k];
            let v_u = quota[k] - t_u;
            test_rows.extend_from_slice(&perm[..t_u]);
            val_rows.extend_from_slice(&perm[t_u..t_u + v_u]);
            let mut rest = perm[t_u + v_u..].to_vec();
            rest.sort_unstable();
            train_rows.extend_from_slice(&rest);
        }
        bundles.push(SplitBundle {
            portion: p,
            train: collect(d, train_rows),
            val: collect(d, val_rows),
            test: collect(d, test_rows),
            users_included: selected.iter().map(|&u| u as u32).collect(),
        });
    }
    Ok(bundles)
}

/// Fixed-user splits across a list of (train_frac, test_frac) ratios,
/// with per-user allocation following the User-Based rounding rules.
pub fn split_fixed_users_varying_ratio(
    d: &Dataset,
    ratios: &[(f64, f64)],
    val_frac: f64,
    seed: u64,
) -> Result<Vec<SplitBundle>> {
    let per_user = per_user_indices(d);
    let users_included: BTreeSet<u32> = (0..d.n_users() as u32).collect();
    let mut bundles = Vec::with_capacity(ratios.len());
    for &(train_frac, test_frac) in ratios {
        let cfg = SplitConfig {
            train_frac,
            val_frac,
            test_frac,
            seed,
        };
        cfg.validate()?;
        let holdouts = holdout_per_user(d, &per_user, test_frac, val_frac, seed)?;
        bundles.push(SplitBundle {
            portion: train_frac,
            train: collect(d, holdouts.iter().flat_map(|h| h.pool.iter().copied())),
            val: collect(d, holdouts.iter().flat_map(|h| h.val.iter().copied())),
            test: collect(d, holdouts.iter().flat_map(|h| h.test.iter().copied())),
            users_included: users_included.clone(),
        });
    }
    Ok(bundles)
}

/// Dispatch on the plan's method.
pub fn split(d: &Dataset, cfg: &SplitConfig, plan: &DownsamplePlan) -> Result<Vec<SplitBundle>> {
    match plan.method {
        Method::UserBased => split_user_based(d, cfg, plan),
        Method::UserSubset => split_user_subset(d, cfg, plan),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Dataset, Feedback};
    use std::collections::HashSet;

    fn uniform_dataset(n_users: usize, per_user: usize) -> Dataset {
        let mut rows = Vec::new();
        for u in 0..n_users {
            for i in 0..per_user {
                rows.push((
                    format!("u{u}"),
                    format!("i{u}_{i}"),
                    Some(3.0),
                    None,
                ));
            }
        }
        Dataset::from_rows("uniform", Feedback::Explicit, rows).unwrap()
    }

    fn pairs(ixs: &[crate::ingest::Interaction]) -> HashSet<(u32, u32)> {
        ixs.iter().map(|x| (x.user, x.item)).collect()
    }

    #[test]
    fn user_based_sizes_match_rounding_rule() {
        let d = uniform_dataset(1, 20);
        let plan = DownsamplePlan {
            method: Method::UserBased,
            portions: vec![0.5, 1.0],
            seed: 7,
        };
        let bundles = split_user_based(&d, &SplitConfig::with_seed(7), &plan).unwrap();
        // 20 interactions -> 2 test, 2 val, 16 train pool
        assert_eq!(bundles[1].test.len(), 2);
        assert_eq!(bundles[1].val.len(), 2);
        assert_eq!(bundles[1].train.len(), 16);
        // p=0.5 -> 8 train
        assert_eq!(bundles[0].train.len(), 8);
    }

    #[test]
    fn user_based_full_portion_is_identity() {
        let d = uniform_dataset(4, 11);
        let plan = DownsamplePlan {
            method: Method::UserBased,
            portions: vec![1.0],
            seed: 3,
        };
        let bundles = split_user_based(&d, &SplitConfig::with_seed(3), &plan).unwrap();
        let b = &bundles[0];
        assert_eq!(b.train.len() + b.val.len() + b.test.len(), d.n_interactions());
    }

    #[test]
    fn user_based_val_test_shared_across_portions() {
        let d = uniform_dataset(5, 12);
        let plan = DownsamplePlan::new(Method::UserBased, 11);
        let bundles = split_user_based(&d, &SplitConfig::with_seed(11), &plan).unwrap();
        let last = bundles.last().unwrap();
        for b in &bundles {
            assert_eq!(pairs(&b.val), pairs(&last.val));
            assert_eq!(pairs(&b.test), pairs(&last.test));
        }
    }

    #[test]
    fn user_too_small_is_an_error() {
        let d = uniform_dataset(1, 2);
        let plan = DownsamplePlan::new(Method::UserBased, 1);
        let err = split_user_based(&d, &SplitConfig::with_seed(1), &plan).unwrap_err();
        assert!(matches!(err, crate::Error::UserTooSmall { .. }));
    }

    #[test]
    fn user_subset_toy_allocation() {
        // 10 users x 10 interactions, p=0.5: 6 users selected,
        // val=test=10 exactly, train=40
        let d = uniform_dataset(10, 10);
        let plan = DownsamplePlan {
            method: Method::UserSubset,
            portions: vec![0.5],
            seed: 5,
        };
        let bundles = split_user_subset(&d, &SplitConfig::with_seed(5), &plan).unwrap();
        let b = &bundles[0];
        assert_eq!(b.users_included.len(), 6);
        assert_eq!(b.val.len(), 10);
        assert_eq!(b.test.len(), 10);
        assert_eq!(b.train.len(), 40);
    }

    #[test]
    fn user_subset_full_portion_selects_everyone() {
        let d = uniform_dataset(10, 10);
        let plan = DownsamplePlan {
            method: Method::UserSubset,
            portions: vec![1.0],
            seed: 9,
        };
        let bundles = split_user_subset(&d, &SplitConfig::with_seed(9), &plan).unwrap();
        let b = &bundles[0];
        assert_eq!(b.users_included.len(), 10);
        assert_eq!(b.train.len(), 80);
        assert_eq!(b.val.len(), 10);
        assert_eq!(b.test.len(), 10);
    }

    #[test]
    fn user_subset_nested_users_and_exact_quotas() {
        let d = uniform_dataset(12, 9);
        let plan = DownsamplePlan::new(Method::UserSubset, 17);
        let cfg = SplitConfig::with_seed(17);
        let bundles = split_user_subset(&d, &cfg, &plan).unwrap();
        let n = d.n_interactions() as f64;
        let v = (0.1 * n).round() as usize;
        for w in bundles.windows(2) {
            assert!(w[0].users_included.is_subset(&w[1].users_included));
        }
        for b in &bundles {
            assert_eq!(b.val.len(), v);
            assert_eq!(b.test.len(), v);
        }
    }

    #[test]
    fn every_eval_user_is_in_train() {
        let d = uniform_dataset(8, 7);
        for method in [Method::UserBased, Method::UserSubset] {
            let plan = DownsamplePlan::new(method, 23);
            let bundles = split(&d, &SplitConfig::with_seed(23), &plan).unwrap();
            for b in &bundles {
                let train_users: HashSet<u32> = b.train.iter().map(|x| x.user).collect();
                for x in b.val.iter().chain(&b.test) {
                    assert!(train_users.contains(&x.user));
                }
            }
        }
    }

    #[test]
    fn splits_are_deterministic() {
        let d = uniform_dataset(9, 8);
        for method in [Method::UserBased, Method::UserSubset] {
            let plan = DownsamplePlan::new(method, 42);
            let a = split(&d, &SplitConfig::with_seed(42), &plan).unwrap();
            let b = split(&d, &SplitConfig::with_seed(42), &plan).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.train, y.train);
                assert_eq!(x.val, y.val);
                assert_eq!(x.test, y.test);
            }
        }
    }

    #[test]
    fn fixed_ratio_matches_rounding_rule() {
        let d = uniform_dataset(1, 10);
        let bundles = split_fixed_users_varying_ratio(&d, &[(0.5, 0.4)], 0.1, 2).unwrap();
        let b = &bundles[0];
        assert_eq!(b.train.len(), 5);
        assert_eq!(b.test.len(), 4);
        assert_eq!(b.val.len(), 1);
    }

    #[test]
    fn fixed_ratio_default_matches_user_based_baseline() {
        let d = uniform_dataset(6, 10);
        let bundles = split_fixed_users_varying_ratio(&d, &[(0.8, 0.1)], 0.1, 4).unwrap();
        let plan = DownsamplePlan {
            method: Method::UserBased,
            portions: vec![1.0],
            seed: 4,
        };
        let ub = split_user_based(&d, &SplitConfig::with_seed(4), &plan).unwrap();
        assert_eq!(pairs(&bundles[0].train), pairs(&ub[0].train));
        assert_eq!(pairs(&bundles[0].val), pairs(&ub[0].val));
        assert_eq!(pairs(&bundles[0].test), pairs(&ub[0].test));
    }

    #[test]
    fn fixed_ratio_monotone_in_train_frac() {
        let d = uniform_dataset(7, 20);
        let ratios: Vec<(f64, f64)> = (1..=8).map(|i| (i as f64 / 10.0, (9 - i) as f64 / 10.0)).collect();
        let bundles = split_fixed_users_varying_ratio(&d, &ratios, 0.1, 6).unwrap();
        for w in bundles.windows(2) {
            assert!(w[1].train.len() > w[0].train.len());
            assert!(w[1].test.len() < w[0].test.len());
        }
    }
}
