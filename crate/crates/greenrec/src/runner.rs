//! Experiment orchestration: the datasets x methods x portions x
//! algorithms x seeds grid with validation-based hyperparameter
//! selection, persistent results, resumption, and report generation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::algorithms::{train, Catalog, Kind, RecommenderSpec};
use crate::evaluation::{
    aggregate_groups, evaluate_bundle_with, normalize_scores, relative_performance, seed_means,
    EvalOptions, GroupRow, MetricRecord,
};
use crate::ingest::{load_dataset, Dataset, Feedback, Schema};
use crate::preprocess::{preprocess, PruneConfig};
use crate::sampling::{split, sub_seed, DownsamplePlan, Method, SplitBundle, SplitConfig};
use crate::sustainability::{build_runtime_profile, co2e_savings_kg, EmissionModel};
use crate::{par, Error, Result};

pub const STORE_VERSION: &str = env!("CARGO_PKG_VERSION");
const RECORD_HEADER: &str =
    "dataset\talgorithm\tmethod\tportion\tseed\tndcg_at_10\truntime_s\tn_eval_users";
const SKIP_HEADER: &str = "dataset\talgorithm\tmethod\tportion\tseed\treason";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    pub path: PathBuf,
    /// Schema preset name understood by the ingest module.
    pub schema: String,
    pub feedback: Feedback,
    /// k-core pruning threshold; 0 disables pruning.
    #[serde(default)]
    pub prune_k: usize,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AlgoConfig {
    pub kind: Kind,
    /// Hyperparameter name -> candidate values; omitted parameters use
    /// their schema defaults. An empty grid means "defaults only".
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<f64>>,
}

impl AlgoConfig {
    pub fn with_default_grid(kind: Kind) -> AlgoConfig {
        let mut grid = BTreeMap::new();
        match kind {
            Kind::UserKnn | Kind::ItemKnn => {
                grid.insert("neighbors".to_string(), vec![20.0, 50.0]);
            }
            Kind::Bias => {
                grid.insert("damping".to_string(), vec![0.0, 5.0]);
            }
            _ => {}
        }
        AlgoConfig { kind, grid }
    }

    /// All hyperparameter combinations, smallest values first so that
    /// tie-breaks during selection favor the smaller model.
    fn combinations(&self) -> Vec<BTreeMap<String, f64>> {
        let mut axes: Vec<(String, Vec<f64>)> = self
            .grid
            .iter()
            .map(|(k, vs)| {
                let mut vs = vs.clone();
                vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                (k.clone(), vs)
            })
            .collect();
        axes.retain(|(_, vs)| !vs.is_empty());
        let mut combos = vec![BTreeMap::new()];
        for (name, values) in &mut axes {
            let mut next = Vec::with_capacity(combos.len() * values.len());
            for base in &combos {
                for &v in values.iter() {
                    let mut c = base.clone();
                    c.insert(name.clone(), v);
                    next.push(c);
                }
            }
            combos = next;
        }
        combos
    }
}

fn default_seeds() -> Vec<u64> {
    vec![21, 42, 63, 84, 105]
}

fn default_portions() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

fn default_true() -> bool {
    true
}

fn default_top_k() -> usize {
    10
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetConfig>,
    pub methods: Vec<Method>,
    #[serde(default = "default_portions")]
    pub portions: Vec<f64>,
    pub algorithms: Vec<AlgoConfig>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Worker threads for cell execution; 0 means "library default".
    #[serde(default)]
    pub parallelism: usize,
    /// When false, runtime_s is recorded as 0.0 so that output files
    /// are byte-identical across repeated runs.
    #[serde(default = "default_true")]
    pub measure_runtime: bool,
    /// When false, hyperparameters are tuned once on the full-size
    /// (p = 1.0) bundle and reused for every portion.
    #[serde(default = "default_true")]
    pub tune_per_portion: bool,
    /// Remove validation items from the candidate pool at test time.
    #[serde(default)]
    pub exclude_validation: bool,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("at least one dataset is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        let unique: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if unique.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if !self.portions.contains(&1.0) {
            return Err(Error::Config(
                "portions must include 1.0 (baseline for relative metrics)".into(),
            ));
        }
        for w in self.portions.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config("portions must be strictly increasing".into()));
            }
        }
        if self.portions[0] <= 0.0 {
            return Err(Error::Config("portions must lie in (0, 1]".into()));
        }
        for a in &self.algorithms {
            for key in a.grid.keys() {
                if !a.kind.schema().iter().any(|(n, _)| n == key) {
                    return Err(Error::Config(format!(
                        "grid parameter '{key}' is not in the schema of {}",
                        a.kind
                    )));
                }
            }
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        Ok(())
    }

    /// Canonical hash of the experiment definition; resumption refuses
    /// stores produced under a different hash.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        format!("{:x}", h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SkipEntry {
    pub dataset: String,
    pub algorithm: Kind,
    pub method: Method,
    pub portion: f64,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub version: String,
    pub created_unix: u64,
}

#[derive(Debug, Clone)]
pub struct ResultStore {
    pub records: Vec<MetricRecord>,
    pub skips: Vec<SkipEntry>,
    pub manifest: Manifest,
}

type CellKey = (String, Kind, Method, u64, u64); // dataset, algo, method, portion bits, seed

fn record_key(r: &MetricRecord) -> CellKey {
    (
        r.dataset.clone(),
        r.algorithm,
        r.method,
        r.portion.to_bits(),
        r.seed,
    )
}

fn skip_key(s: &SkipEntry) -> CellKey {
    (
        s.dataset.clone(),
        s.algorithm,
        s.method,
        s.portion.to_bits(),
        s.seed,
    )
}

struct PreparedDataset {
    cfg: DatasetConfig,
    data: Dataset,
}

fn prepare_datasets(cfg: &ExperimentConfig) -> Result<Vec<PreparedDataset>> {
    cfg.datasets
        .iter()
        .map(|dc| {
            let schema = Schema::preset(&dc.schema)?;
            let raw = load_dataset(&dc.path, &schema, dc.feedback)?;
            let data = if dc.prune_k > 0 {
                preprocess(&raw, PruneConfig { k: dc.prune_k }).0
            } else {
                let (deduped, _) = crate::preprocess::dedup_exact(&raw);
                crate::preprocess::average_duplicate_pairs(&deduped).0
            };
            Ok(PreparedDataset {
                cfg: dc.clone(),
                data,
            })
        })
        .collect()
}

enum CellOutcome {
    Record(MetricRecord),
    Skip(SkipEntry),
}

struct Cell<'a> {
    dataset: &'a PreparedDataset,
    algo: &'a AlgoConfig,
    method: Method,
    portion: f64,
    seed: u64,
    bundle: &'a SplitBundle,
    tuning_bundle: &'a SplitBundle,
}

fn val_bundle(b: &SplitBundle) -> SplitBundle {
    SplitBundle {
        portion: b.portion,
        train: Vec::new(),
        val: Vec::new(),
        test: b.val.clone(),
        users_included: b.users_included.clone(),
    }
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell<'_>) -> Result<CellOutcome> {
    let d = cell.dataset;
    if cell.algo.kind.requires_explicit() && d.cfg.feedback == Feedback::Implicit {
        return Ok(CellOutcome::Skip(SkipEntry {
            dataset: d.cfg.name.clone(),
            algorithm: cell.algo.kind,
            method: cell.method,
            portion: cell.portion,
            seed: cell.seed,
            reason: "requires explicit ratings; dataset is implicit".to_string(),
        }));
    }
    let catalog = Catalog {
        n_users: d.data.n_users(),
        n_items: d.data.n_items(),
        feedback: d.cfg.feedback,
    };
    let train_seed = sub_seed(
        cell.seed,
        &format!(
            "train:{}:{}:{}:{}",
            d.cfg.name, cell.method, cell.algo.kind, cell.portion
        ),
        0,
    );
    let combos = cell.algo.combinations();
    let eval_opts = EvalOptions {
        exclude_validation: cfg.exclude_validation,
    };
    let chosen = if combos.len() == 1 {
        combos.into_iter().next().unwrap()
    } else {
        // grid search on the validation split; strict improvement
        // keeps the first (smallest) combination on ties
        let vb = val_bundle(cell.tuning_bundle);
        let mut best: Option<(f64, BTreeMap<String, f64>)> = None;
        for combo in combos {
            let spec = RecommenderSpec {
                kind: cell.algo.kind,
                hyperparams: combo.clone(),
                seed: train_seed,
            };
            let model = train(&spec, &cell.tuning_bundle.train, &catalog)?;
            let (val_ndcg, _) =
                evaluate_bundle_with(&model, &vb, cfg.top_k, EvalOptions::default())?;
            if best.as_ref().map_or(true, |(s, _)| val_ndcg > *s) {
                best = Some((val_ndcg, combo));
            }
        }
        best.unwrap().1
    };
    let spec = RecommenderSpec {
        kind: cell.algo.kind,
        hyperparams: chosen,
        seed: train_seed,
    };
    // runtime covers the selected combination's final train+evaluate
    let start = Instant::now();
    let model = train(&spec, &cell.bundle.train, &catalog)?;
    let (ndcg, n_eval_users) = evaluate_bundle_with(&model, cell.bundle, cfg.top_k, eval_opts)?;
    let runtime_s = if cfg.measure_runtime {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    Ok(CellOutcome::Record(MetricRecord {
        dataset: d.cfg.name.clone(),
        algorithm: cell.algo.kind,
        method: cell.method,
        portion: cell.portion,
        seed: cell.seed,
        ndcg_at_10: ndcg,
        runtime_s,
        n_eval_users,
    }))
}

fn run_cells(
    cfg: &ExperimentConfig,
    only: Option<&BTreeSet<CellKey>>,
) -> Result<(Vec<MetricRecord>, Vec<SkipEntry>)> {
    let prepared = prepare_datasets(cfg)?;
    // one split family per (dataset, method, seed)
    let mut bundles: HashMap<(usize, Method, u64), Vec<SplitBundle>> = HashMap::new();
    for (di, pd) in prepared.iter().enumerate() {
        for &method in &cfg.methods {
            for &seed in &cfg.seeds {
                let split_seed =
                    sub_seed(seed, &format!("split:{}:{}", pd.cfg.name, method), 0);
                let split_cfg = SplitConfig::with_seed(split_seed);
                let plan = DownsamplePlan {
                    method,
                    portions: cfg.portions.clone(),
                    seed: split_seed,
                };
                bundles.insert((di, method, seed), split(&pd.data, &split_cfg, &plan)?);
            }
        }
    }
    let mut cells: Vec<Cell<'_>> = Vec::new();
    for (di, pd) in prepared.iter().enumerate() {
        for &method in &cfg.methods {
            for &seed in &cfg.seeds {
                let family = &bundles[&(di, method, seed)];
                let full = family
                    .iter()
                    .find(|b| b.portion == 1.0)
                    .expect("portions include 1.0");
                for algo in &cfg.algorithms {
                    for bundle in family {
                        let key = (
                            pd.cfg.name.clone(),
                            algo.kind,
                            method,
                            bundle.portion.to_bits(),
                            seed,
                        );
                        if let Some(only) = only {
                            if !only.contains(&key) {
                                continue;
                            }
                        }
                        cells.push(Cell {
                            dataset: pd,
                            algo,
                            method,
                            portion: bundle.portion,
                            seed,
                            bundle,
                            tuning_bundle: if cfg.tune_per_portion { bundle } else { full },
                        });
                    }
                }
            }
        }
    }
    let outcomes: Vec<Result<CellOutcome>> = run_pool(cfg.parallelism, || {
        par::map_slice(&cells, |cell| run_cell(cfg, cell))
    });
    let mut records = Vec::new();
    let mut skips = Vec::new();
    for outcome in outcomes {
        match outcome? {
            CellOutcome::Record(r) => records.push(r),
            CellOutcome::Skip(s) => skips.push(s),
        }
    }
    records.sort_by_key(record_key);
    skips.sort_by_key(skip_key);
    Ok((records, skips))
}

#[cfg(feature = "parallel")]
fn run_pool<T: Send>(parallelism: usize, f: impl FnOnce() -> T + Send) -> T {
    if parallelism == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

#[cfg(not(feature = "parallel"))]
fn run_pool<T: Send>(_parallelism: usize, f: impl FnOnce() -> T + Send) -> T {
    f()
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Execute the full grid and persist the store to `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultStore> {
    cfg.validate()?;
    let (records, skips) = run_cells(cfg, None)?;
    let store = ResultStore {
        records,
        skips,
        manifest: Manifest {
            config_hash: cfg.hash(),
            version: STORE_VERSION.to_string(),
            created_unix: now_unix(),
        },
    };
    save_store(&store, &cfg.output_dir)?;
    Ok(store)
}

/// Execute only the cells missing from an existing store. Refuses to
/// mix configurations: the store's manifest hash must match `cfg`.
pub fn resume(cfg: &ExperimentConfig, store: &ResultStore) -> Result<ResultStore> {
    cfg.validate()?;
    let expected = cfg.hash();
    if store.manifest.config_hash != expected {
        return Err(Error::ManifestMismatch {
            expected,
            found: store.manifest.config_hash.clone(),
        });
    }
    let mut done: BTreeSet<CellKey> = store.records.iter().map(record_key).collect();
    done.extend(store.skips.iter().map(skip_key));
    let mut missing: BTreeSet<CellKey> = BTreeSet::new();
    for dc in &cfg.datasets {
        for algo in &cfg.algorithms {
            for &method in &cfg.methods {
                for &portion in &cfg.portions {
                    for &seed in &cfg.seeds {
                        let key = (dc.name.clone(), algo.kind, method, portion.to_bits(), seed);
                        if !done.contains(&key) {
                            missing.insert(key);
                        }
                    }
                }
            }
        }
    }
    if missing.is_empty() {
        return Ok(store.clone());
    }
    let (new_records, new_skips) = run_cells(cfg, Some(&missing))?;
    let mut merged = store.clone();
    merged.records.extend(new_records);
    merged.skips.extend(new_skips);
    merged.records.sort_by_key(record_key);
    merged.skips.sort_by_key(skip_key);
    save_store(&merged, &cfg.output_dir)?;
    Ok(merged)
}

fn format_record(r: &MetricRecord) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.dataset,
        r.algorithm,
        r.method,
        r.portion,
        r.seed,
        r.ndcg_at_10,
        r.runtime_s,
        r.n_eval_users
    )
}

pub fn save_store(store: &ResultStore, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut records = String::from(RECORD_HEADER);
    records.push('\n');
    for r in &store.records {
        records.push_str(&format_record(r));
        records.push('\n');
    }
    let path = dir.join("records.tsv");
    std::fs::write(&path, records).map_err(io_err(&path))?;

    let mut skips = String::from(SKIP_HEADER);
    skips.push('\n');
    for s in &store.skips {
        let _ = writeln!(
            skips,
            "{}\t{}\t{}\t{}\t{}\t{}",
            s.dataset, s.algorithm, s.method, s.portion, s.seed, s.reason
        );
    }
    let path = dir.join("skips.tsv");
    std::fs::write(&path, skips).map_err(io_err(&path))?;

    let path = dir.join("manifest.json");
    let manifest = serde_json::to_string_pretty(&store.manifest).expect("manifest serializes");
    std::fs::write(&path, manifest).map_err(io_err(&path))?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(field: &str, path: &Path, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason: format!("unparseable field '{field}'"),
    })
}

pub fn load_store(dir: &Path) -> Result<ResultStore> {
    let path = dir.join("manifest.json");
    let manifest_text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| Error::Config(format!("bad manifest: {e}")))?;

    let path = dir.join("records.tsv");
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 8 {
            return Err(Error::MalformedRow {
                path: path.clone(),
                line: i + 1,
                reason: format!("expected 8 fields, found {}", f.len()),
            });
        }
        records.push(MetricRecord {
            dataset: f[0].to_string(),
            algorithm: parse_field(f[1], &path, i + 1)?,
            method: parse_field(f[2], &path, i + 1)?,
            portion: parse_field(f[3], &path, i + 1)?,
            seed: parse_field(f[4], &path, i + 1)?,
            ndcg_at_10: parse_field(f[5], &path, i + 1)?,
            runtime_s: parse_field(f[6], &path, i + 1)?,
            n_eval_users: parse_field(f[7], &path, i + 1)?,
        });
    }

    let path = dir.join("skips.tsv");
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut skips = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(Error::MalformedRow {
                path: path.clone(),
                line: i + 1,
                reason: format!("expected 6 fields, found {}", f.len()),
            });
        }
        skips.push(SkipEntry {
            dataset: f[0].to_string(),
            algorithm: parse_field(f[1], &path, i + 1)?,
            method: parse_field(f[2], &path, i + 1)?,
            portion: parse_field(f[3], &path, i + 1)?,
            seed: parse_field(f[4], &path, i + 1)?,
            reason: f[5].to_string(),
        });
    }
    Ok(ResultStore {
        records,
        skips,
        manifest,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    NormalizedHeatmap,
    RelativeCurves,
    RuntimeProfile,
    Co2Table,
}

impl std::str::FromStr for ReportKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<ReportKind> {
        match s {
            "normalized_heatmap" => Ok(ReportKind::NormalizedHeatmap),
            "relative_curves" => Ok(ReportKind::RelativeCurves),
            "runtime_profile" => Ok(ReportKind::RuntimeProfile),
            "co2_table" => Ok(ReportKind::Co2Table),
            other => Err(Error::Config(format!("unknown report kind '{other}'"))),
        }
    }
}

/// One normalized heat-map: rows are algorithms, columns portions.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct HeatmapTable {
    pub dataset: String,
    pub method: Method,
    pub portions: Vec<f64>,
    pub rows: Vec<(Kind, Vec<f64>)>,
}

fn slices(records: &[MetricRecord]) -> BTreeMap<(String, Method), Vec<MetricRecord>> {
    let mut out: BTreeMap<(String, Method), Vec<MetricRecord>> = BTreeMap::new();
    for r in records {
        out.entry((r.dataset.clone(), r.method))
            .or_default()
            .push(r.clone());
    }
    out
}

/// Per (dataset, method) min-max-normalized seed-mean matrices.
pub fn normalized_heatmaps(store: &ResultStore) -> Vec<HeatmapTable> {
    let mut out = Vec::new();
    for ((dataset, method), recs) in slices(&store.records) {
        let norm = normalize_scores(&seed_means(&recs));
        let portions: BTreeSet<u64> = norm.keys().map(|&(_, _, p)| p).collect();
        let kinds: BTreeSet<Kind> = norm.keys().map(|&(k, _, _)| k).collect();
        let portions: Vec<f64> = portions.into_iter().map(f64::from_bits).collect();
        let rows = kinds
            .into_iter()
            .map(|k| {
                let vals = portions
                    .iter()
                    .map(|p| {
                        norm.get(&(k, method, p.to_bits()))
                            .copied()
                            .unwrap_or(f64::NAN)
                    })
                    .collect();
                (k, vals)
            })
            .collect();
        out.push(HeatmapTable {
            dataset,
            method,
            portions,
            rows,
        });
    }
    out
}

/// Long-form relative-performance curves plus group aggregates.
pub fn relative_curves(
    store: &ResultStore,
) -> Result<(Vec<(String, Method, Kind, f64, f64)>, Vec<(String, Method, GroupRow)>)> {
    let mut curves = Vec::new();
    let mut groups = Vec::new();
    for ((dataset, method), recs) in slices(&store.records) {
        let mut by_algo: BTreeMap<Kind, Vec<MetricRecord>> = BTreeMap::new();
        for r in &recs {
            by_algo.entry(r.algorithm).or_default().push(r.clone());
        }
        for (kind, rs) in by_algo {
            for (portion, pct) in relative_performance(&rs)? {
                curves.push((dataset.clone(), method, kind, portion, pct));
            }
        }
        for row in aggregate_groups(&recs)? {
            groups.push((dataset.clone(), method, row));
        }
    }
    Ok((curves, groups))
}

/// Write the requested report as delimited text under `out_dir`.
/// Returns the paths written.
pub fn report(store: &ResultStore, kind: ReportKind, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if store.records.is_empty() {
        return Err(Error::Config("result store holds no records".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    match kind {
        ReportKind::NormalizedHeatmap => {
            let mut text = String::new();
            for table in normalized_heatmaps(store) {
                let _ = write!(text, "# {} {}\nalgorithm", table.dataset, table.method);
                for p in &table.portions {
                    let _ = write!(text, "\t{p}");
                }
                text.push('\n');
                for (kind, vals) in &table.rows {
                    let _ = write!(text, "{kind}");
                    for v in vals {
                        let _ = write!(text, "\t{v}");
                    }
                    text.push('\n');
                }
            }
            let path = out_dir.join("normalized_heatmap.tsv");
            std::fs::write(&path, text).map_err(io_err(&path))?;
            written.push(path);
        }
        ReportKind::RelativeCurves => {
            let (curves, groups) = relative_curves(store)?;
            let mut text = String::from("dataset\tmethod\talgorithm\tportion\trelative_pct\n");
            for (d, m, k, p, pct) in curves {
                let _ = writeln!(text, "{d}\t{m}\t{k}\t{p}\t{pct}");
            }
            let path = out_dir.join("relative_curves.tsv");
            std::fs::write(&path, text).map_err(io_err(&path))?;
            written.push(path);

            let mut text =
                String::from("dataset\tmethod\tgroup\tportion\tmean_relative_pct\tstddev\tn_members\n");
            for (d, m, g) in groups {
                let _ = writeln!(
                    text,
                    "{d}\t{m}\t{}\t{}\t{}\t{}\t{}",
                    g.group, g.portion, g.mean_relative_pct, g.stddev, g.n_members
                );
            }
            let path = out_dir.join("group_curves.tsv");
            std::fs::write(&path, text).map_err(io_err(&path))?;
            written.push(path);
        }
        ReportKind::RuntimeProfile => {
            let profile = build_runtime_profile(&store.records)?;
            let mut text = String::from("portion\tmean_runtime_s\trelative_runtime\n");
            for ((p, mean), (_, rel)) in profile
                .mean_runtime_s
                .iter()
                .zip(&profile.relative_runtime)
            {
                let _ = writeln!(text, "{p}\t{mean}\t{rel}");
            }
            let path = out_dir.join("runtime_profile.tsv");
            std::fs::write(&path, text).map_err(io_err(&path))?;
            written.push(path);
        }
        ReportKind::Co2Table => {
            let profile = build_runtime_profile(&store.records)?;
            let model = EmissionModel::default();
            let mut text = String::from("portion\trelative_runtime\tco2e_savings_kg\n");
            for &(p, rel) in &profile.relative_runtime {
                let kg = co2e_savings_kg(rel.min(1.0), &model)?;
                let _ = writeln!(text, "{p}\t{rel}\t{kg}");
            }
            let path = out_dir.join("co2_table.tsv");
            std::fs::write(&path, text).map_err(io_err(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset_file(dir: &Path) -> PathBuf {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut text = String::new();
        for u in 0..20 {
            for i in 0..15 {
                if rng.gen::<f64>() < 0.7 {
                    let r = rng.gen_range(1..=5);
                    let _ = writeln!(text, "u{u}\ti{i}\t{r}\t0");
                }
            }
        }
        let path = dir.join("toy.tsv");
        std::fs::write(&path, text).unwrap();
        path
    }

    fn toy_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            datasets: vec![DatasetConfig {
                name: "toy".into(),
                path: toy_dataset_file(dir),
                schema: "ml100k".into(),
                feedback: Feedback::Explicit,
                prune_k: 0,
            }],
            methods: vec![Method::UserBased],
            portions: vec![0.5, 1.0],
            algorithms: vec![
                AlgoConfig::with_default_grid(Kind::Popularity),
                AlgoConfig::with_default_grid(Kind::Bias),
            ],
            seeds: vec![21, 42],
            output_dir: dir.join("out"),
            parallelism: 0,
            measure_runtime: false,
            tune_per_portion: true,
            exclude_validation: false,
            top_k: 10,
        }
    }

    #[test]
    fn grid_cardinality_produces_expected_records() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = toy_config(tmp.path());
        let store = run_experiment(&cfg).unwrap();
        // 1 dataset x 1 method x 2 portions x 2 algorithms x 2 seeds
        assert_eq!(store.records.len() + store.skips.len(), 8);
        assert_eq!(store.records.len(), 8);
        for r in &store.records {
            assert!((0.0..=1.0).contains(&r.ndcg_at_10));
        }
    }

    #[test]
    fn bias_on_implicit_is_skipped_with_reason() {
        let tmp = tempfile::tempdir().unwrap();
        // gowalla layout: user, timestamp, lat, lon, location-id
        let mut text = String::new();
        for u in 0..15 {
            for i in 0..10 {
                if (u + i) % 3 != 0 {
                    let _ = writeln!(text, "u{u}\t0\t0.0\t0.0\ti{i}");
                }
            }
        }
        let path = tmp.path().join("imp.tsv");
        std::fs::write(&path, text).unwrap();
        let cfg = ExperimentConfig {
            datasets: vec![DatasetConfig {
                name: "imp".into(),
                path,
                schema: "gowalla".into(),
                feedback: Feedback::Implicit,
                prune_k: 0,
            }],
            methods: vec![Method::UserBased],
            portions: vec![1.0],
            algorithms: vec![AlgoConfig::with_default_grid(Kind::Bias)],
            seeds: vec![21],
            output_dir: tmp.path().join("out"),
            parallelism: 0,
            measure_runtime: false,
            tune_per_portion: true,
            exclude_validation: false,
            top_k: 10,
        };
        let store = run_experiment(&cfg).unwrap();
        assert_eq!(store.records.len(), 0);
        assert_eq!(store.skips.len(), 1);
        assert!(store.skips[0].reason.contains("explicit"));
    }

    #[test]
    fn rerun_is_bit_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = toy_config(tmp.path());
        run_experiment(&cfg).unwrap();
        let first = std::fs::read(cfg.output_dir.join("records.tsv")).unwrap();
        run_experiment(&cfg).unwrap();
        let second = std::fs::read(cfg.output_dir.join("records.tsv")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn resume_is_idempotent_and_fills_gaps() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = toy_config(tmp.path());
        let store = run_experiment(&cfg).unwrap();
        let resumed = resume(&cfg, &store).unwrap();
        assert_eq!(resumed.records, store.records);

        // drop one seed's records and resume
        let mut partial = store.clone();
        partial.records.retain(|r| r.seed != 42);
        let filled = resume(&cfg, &partial).unwrap();
        assert_eq!(filled.records, store.records);
    }

    #[test]
    fn resume_refuses_mismatched_config() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = toy_config(tmp.path());
        let store = run_experiment(&cfg).unwrap();
        let mut other = cfg.clone();
        other.seeds = vec![21, 42, 63];
        assert!(matches!(
            resume(&other, &store),
            Err(Error::ManifestMismatch { .. })
        ));
    }

    #[test]
    fn store_roundtrips_through_disk() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = toy_config(tmp.path());
        let store = run_experiment(&cfg).unwrap();
        let loaded = load_store(&cfg.output_dir).unwrap();
        assert_eq!(loaded.records, store.records);
        assert_eq!(loaded.skips, store.skips);
        assert_eq!(loaded.manifest.config_hash, store.manifest.config_hash);
    }

    #[test]
    fn reports_write_expected_files() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = toy_config(tmp.path());
        cfg.measure_runtime = true;
        let store = run_experiment(&cfg).unwrap();
        let rp = tmp.path().join("reports");
        for kind in [
            ReportKind::NormalizedHeatmap,
            ReportKind::RelativeCurves,
            ReportKind::RuntimeProfile,
            ReportKind::Co2Table,
        ] {
            for path in report(&store, kind, &rp).unwrap() {
                assert!(path.exists());
            }
        }
        // heatmap values lie in [0,1]
        for table in normalized_heatmaps(&store) {
            for (_, vals) in &table.rows {
                assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn baseline_only_store_reports_100_percent() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = toy_config(tmp.path());
        cfg.portions = vec![1.0];
        let store = run_experiment(&cfg).unwrap();
        let (curves, _) = relative_curves(&store).unwrap();
        assert!(!curves.is_empty());
        assert!(curves.iter().all(|&(_, _, _, _, pct)| pct == 100.0));
    }

    #[test]
    fn config_validation_catches_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let base = toy_config(tmp.path());
        let mut c = base.clone();
        c.portions = vec![0.5];
        assert!(c.validate().is_err(), "missing 1.0 baseline");
        let mut c = base.clone();
        c.seeds = vec![21, 21];
        assert!(c.validate().is_err(), "duplicate seeds");
        let mut c = base.clone();
        c.algorithms[0].grid.insert("bogus".into(), vec![1.0]);
        assert!(c.validate().is_err(), "unknown grid parameter");
        assert!(base.validate().is_ok());
    }

    #[test]
    fn config_parses_from_toml() {
        let text = r#"
            output_dir = "out"
            methods = ["user_based", "user_subset"]
            portions = [0.5, 1.0]

            [[datasets]]
            name = "toy"
            path = "toy.tsv"
            schema = "ml100k"
            feedback = "explicit"
            prune_k = 10

            [[algorithms]]
            kind = "item_knn"
            [algorithms.grid]
            neighbors = [20, 50]

            [[algorithms]]
            kind = "funk_svd"
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.seeds, vec![21, 42, 63, 84, 105]);
        assert_eq!(cfg.algorithms[0].kind, Kind::ItemKnn);
        assert_eq!(cfg.algorithms[0].grid["neighbors"], vec![20.0, 50.0]);
        assert!(cfg.algorithms[1].grid.is_empty());
        assert!(cfg.measure_runtime && cfg.tune_per_portion);
    }
}
