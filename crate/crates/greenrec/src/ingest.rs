//! Loading of raw interaction files and descriptive dataset statistics.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    Explicit,
    Implicit,
}

impl fmt::Display for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feedback::Explicit => write!(f, "explicit"),
            Feedback::Implicit => write!(f, "implicit"),
        }
    }
}

/// One (user, item) event. User and item are dense indices into the
/// owning [`Dataset`]'s id maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub rating: Option<f64>,
    pub timestamp: Option<i64>,
}

/// Indexed interaction store. Immutable after construction; dense user
/// and item indices are contiguous and assigned in first-occurrence
/// order so the pipeline stays deterministic.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub feedback: Feedback,
    pub interactions: Vec<Interaction>,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
}

impl Dataset {
    /// Build a dataset from raw (user-id, item-id, rating, timestamp)
    /// rows, assigning dense indices in first-occurrence order.
    pub fn from_rows<I>(name: &str, feedback: Feedback, rows: I) -> Result<Dataset>
    where
        I: IntoIterator<Item = (String, String, Option<f64>, Option<i64>)>,
    {
        let mut user_index: HashMap<String, u32> = HashMap::new();
        let mut item_index: HashMap<String, u32> = HashMap::new();
        let mut user_ids = Vec::new();
        let mut item_ids = Vec::new();
        let mut interactions = Vec::new();
        for (user, item, rating, timestamp) in rows {
            if user.is_empty() || item.is_empty() {
                return Err(Error::Schema("empty user or item id".into()));
            }
            if let Some(r) = rating {
                if !r.is_finite() {
                    return Err(Error::Schema(format!("non-finite rating {r}")));
                }
                if feedback == Feedback::Implicit {
                    return Err(Error::Schema(
                        "rating column present on implicit-feedback data".into(),
                    ));
                }
            }
            let u = *user_index.entry(user.clone()).or_insert_with(|| {
                user_ids.push(user);
                (user_ids.len() - 1) as u32
            });
            let i = *item_index.entry(item.clone()).or_insert_with(|| {
                item_ids.push(item);
                (item_ids.len() - 1) as u32
            });
            interactions.push(Interaction {
                user: u,
                item: i,
                rating,
                timestamp,
            });
        }
        Ok(Dataset {
            name: name.to_string(),
            feedback,
            interactions,
            user_ids,
            item_ids,
        })
    }

    /// Rebuild a dataset from a subset of this dataset's interactions,
    /// compacting the dense indices (first-occurrence order of the
    /// surviving rows) so they stay contiguous.
    pub fn reindex(&self, interactions: &[Interaction]) -> Dataset {
        let mut user_map: HashMap<u32, u32> = HashMap::new();
        let mut item_map: HashMap<u32, u32> = HashMap::new();
        let mut user_ids = Vec::new();
        let mut item_ids = Vec::new();
        let mut out = Vec::with_capacity(interactions.len());
        for ix in interactions {
            let u = *user_map.entry(ix.user).or_insert_with(|| {
                user_ids.push(self.user_ids[ix.user as usize].clone());
                (user_ids.len() - 1) as u32
            });
            let i = *item_map.entry(ix.item).or_insert_with(|| {
                item_ids.push(self.item_ids[ix.item as usize].clone());
                (item_ids.len() - 1) as u32
            });
            out.push(Interaction {
                user: u,
                item: i,
                rating: ix.rating,
                timestamp: ix.timestamp,
            });
        }
        Dataset {
            name: self.name.clone(),
            feedback: self.feedback,
            interactions: out,
            user_ids,
            item_ids,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn n_interactions(&self) -> usize {
        self.interactions.len()
    }

    pub fn user_id(&self, index: u32) -> &str {
        &self.user_ids[index as usize]
    }

    pub fn item_id(&self, index: u32) -> &str {
        &self.item_ids[index as usize]
    }
}

/// Column mapping for a delimited interaction file.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Schema {
    pub delimiter: Delimiter,
    pub has_header: bool,
    pub user_col: usize,
    pub item_col: usize,
    pub rating_col: Option<usize>,
    pub timestamp_col: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Delimiter {
    Tab,
    Comma,
}

impl Schema {
    /// Named presets accepted by the CLI.
    ///
    /// `ml100k`: tab-separated user, item, rating, timestamp.
    /// `gowalla`: tab-separated user, timestamp, lat, lon, location-id;
    /// the coordinates are discarded and the location-id is the item.
    pub fn preset(name: &str) -> Result<Schema> {
        match name {
            "ml100k" => Ok(Schema {
                delimiter: Delimiter::Tab,
                has_header: false,
                user_col: 0,
                item_col: 1,
                rating_col: Some(2),
                timestamp_col: Some(3),
            }),
            "gowalla" => Ok(Schema {
                delimiter: Delimiter::Tab,
                has_header: false,
                user_col: 0,
                item_col: 4,
                rating_col: None,
                timestamp_col: None,
            }),
            other => Err(Error::Schema(format!("unknown schema preset '{other}'"))),
        }
    }

    fn delimiter_char(&self) -> char {
        match self.delimiter {
            Delimiter::Tab => '\t',
            Delimiter::Comma => ',',
        }
    }
}

/// Parse a delimited interaction file into a [`Dataset`].
///
/// Row order is preserved and id maps are built in first-occurrence
/// order. A rating column is required exactly when the feedback type is
/// explicit.
pub fn load_dataset(path: &Path, schema: &Schema, feedback: Feedback) -> Result<Dataset> {
    if feedback == Feedback::Explicit && schema.rating_col.is_none() {
        return Err(Error::Schema(
            "explicit feedback requires a rating column".into(),
        ));
    }
    if feedback == Feedback::Implicit && schema.rating_col.is_some() {
        return Err(Error::Schema(
            "implicit feedback must not declare a rating column".into(),
        ));
    }
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let delim = schema.delimiter_char();
    let needed = [
        Some(schema.user_col),
        Some(schema.item_col),
        schema.rating_col,
        schema.timestamp_col,
    ]
    .into_iter()
    .flatten()
    .max()
    .unwrap()
        + 1;

    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if lineno == 0 && schema.has_header {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delim).collect();
        let malformed = |reason: String| Error::MalformedRow {
            path: path.to_path_buf(),
            line: lineno + 1,
            reason,
        };
        if fields.len() < needed {
            return Err(malformed(format!(
                "expected at least {needed} columns, found {}",
                fields.len()
            )));
        }
        let rating = match schema.rating_col {
            Some(c) => Some(
                fields[c]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("bad rating '{}': {e}", fields[c])))?,
            ),
            None => None,
        };
        let timestamp = match schema.timestamp_col {
            Some(c) => Some(
                fields[c]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("bad timestamp '{}': {e}", fields[c])))?
                    as i64,
            ),
            None => None,
        };
        rows.push((
            fields[schema.user_col].trim().to_string(),
            fields[schema.item_col].trim().to_string(),
            rating,
            timestamp,
        ));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Dataset::from_rows(&name, feedback, rows)
}

/// Descriptive statistics of a dataset (user/item/interaction counts,
/// sparsity, rating entropy). Sparsity and entropy are absent for the
/// empty dataset; entropy is additionally absent for implicit feedback.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    pub avg_int_per_user: f64,
    pub avg_int_per_item: f64,
    pub sparsity_pct: Option<f64>,
    pub entropy: Option<f64>,
}

pub fn compute_stats(d: &Dataset) -> DatasetStats {
    compute_stats_with_base(d, std::f64::consts::E)
}

/// Statistics with a configurable entropy log base (natural log is the
/// default used everywhere else in the toolkit).
pub fn compute_stats_with_base(d: &Dataset, entropy_log_base: f64) -> DatasetStats {
    let n_users = d.n_users();
    let n_items = d.n_items();
    let n = d.n_interactions();
    if n == 0 {
        return DatasetStats {
            n_users,
            n_items,
            n_interactions: 0,
            avg_int_per_user: 0.0,
            avg_int_per_item: 0.0,
            sparsity_pct: None,
            entropy: None,
        };
    }
    let sparsity = 100.0 * (1.0 - n as f64 / (n_users as f64 * n_items as f64));
    let entropy = match d.feedback {
        Feedback::Implicit => None,
        Feedback::Explicit => {
            let mut counts: HashMap<u64, usize> = HashMap::new();
            for ix in &d.interactions {
                let r = ix.rating.unwrap_or(1.0);
                *counts.entry(r.to_bits()).or_insert(0) += 1;
            }
            let h: f64 = counts
                .values()
                .map(|&c| {
                    let q = c as f64 / n as f64;
                    -q * q.ln()
                })
                .sum();
            Some(h / entropy_log_base.ln())
        }
    };
    DatasetStats {
        n_users,
        n_items,
        n_interactions: n,
        avg_int_per_user: n as f64 / n_users as f64,
        avg_int_per_item: n as f64 / n_items as f64,
        sparsity_pct: Some(sparsity),
        entropy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::explicit;
    use std::io::Write;

    #[test]
    fn three_line_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "u1\ti1\t5\t0").unwrap();
        writeln!(f, "u2\ti1\t4\t0").unwrap();
        writeln!(f, "u1\ti2\t3\t0").unwrap();
        let d = load_dataset(f.path(), &Schema::preset("ml100k").unwrap(), Feedback::Explicit)
            .unwrap();
        assert_eq!(d.n_users(), 2);
        assert_eq!(d.n_items(), 2);
        assert_eq!(d.n_interactions(), 3);
        // first-occurrence order
        assert_eq!(d.user_id(0), "u1");
        assert_eq!(d.item_id(1), "i2");
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let d = load_dataset(f.path(), &Schema::preset("ml100k").unwrap(), Feedback::Explicit)
            .unwrap();
        assert_eq!(d.n_users(), 0);
        assert_eq!(d.n_interactions(), 0);
        let s = compute_stats(&d);
        assert_eq!(s.n_interactions, 0);
        assert!(s.sparsity_pct.is_none());
        assert!(s.entropy.is_none());
    }

    #[test]
    fn missing_file_errors() {
        let err = load_dataset(
            Path::new("/nonexistent/u.data"),
            &Schema::preset("ml100k").unwrap(),
            Feedback::Explicit,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn malformed_row_reports_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "u1\ti1\t5\t0").unwrap();
        writeln!(f, "u2\ti1\tbad\t0").unwrap();
        let err = load_dataset(f.path(), &Schema::preset("ml100k").unwrap(), Feedback::Explicit)
            .unwrap_err();
        match err {
            Error::MalformedRow { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rating_column_rejected_for_implicit() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let err = load_dataset(f.path(), &Schema::preset("ml100k").unwrap(), Feedback::Implicit)
            .unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn uniform_ratings_have_zero_entropy() {
        let d = explicit(&[("a", "x", 5.0), ("b", "x", 5.0), ("a", "y", 5.0)]);
        let s = compute_stats(&d);
        assert_eq!(s.entropy, Some(0.0));
    }

    #[test]
    fn uniform_distribution_entropy_is_ln_levels() {
        let d = explicit(&[("a", "w", 1.0), ("a", "x", 2.0), ("a", "y", 3.0), ("a", "z", 4.0)]);
        let s = compute_stats(&d);
        assert!((s.entropy.unwrap() - 4.0f64.ln()).abs() < 1e-12);
        // log2 base for comparison
        let s2 = compute_stats_with_base(&d, 2.0);
        assert!((s2.entropy.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stats_independent_of_order() {
        let d1 = explicit(&[("a", "x", 1.0), ("b", "y", 2.0), ("c", "z", 3.0)]);
        let d2 = explicit(&[("c", "z", 3.0), ("a", "x", 1.0), ("b", "y", 2.0)]);
        let s1 = compute_stats(&d1);
        let s2 = compute_stats(&d2);
        assert_eq!(s1.n_interactions, s2.n_interactions);
        assert_eq!(s1.sparsity_pct, s2.sparsity_pct);
        assert_eq!(s1.entropy, s2.entropy);
    }

    #[test]
    fn sparsity_decreases_with_new_pair() {
        let base = explicit(&[("a", "x", 1.0), ("b", "y", 2.0)]);
        let more = explicit(&[("a", "x", 1.0), ("b", "y", 2.0), ("a", "y", 3.0)]);
        assert!(compute_stats(&more).sparsity_pct.unwrap() < compute_stats(&base).sparsity_pct.unwrap());
    }
}
