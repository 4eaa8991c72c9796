//! Command-line entry point. Every subcommand is a thin adapter over
//! the library modules; exit code 2 signals usage errors, 1 signals
//! operational failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use greenrec::ingest::{compute_stats, load_dataset, Feedback, Schema};
use greenrec::preprocess::{preprocess, PruneConfig};
use greenrec::runner::{
    load_store, report, resume, run_experiment, ExperimentConfig, ReportKind,
};
use greenrec::sampling::{split, DownsamplePlan, Method, SplitConfig};
use greenrec::sustainability::{co2e_savings_kg, EmissionModel};

#[derive(Parser)]
#[command(
    name = "greenrec",
    version,
    about = "Benchmark the trade-off between training-data downsampling and top-N recommendation quality"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DatasetArgs {
    /// Path to the raw interaction file
    #[arg(long)]
    input: PathBuf,
    /// Schema preset (e.g. ml100k, gowalla)
    #[arg(long, default_value = "ml100k")]
    schema: String,
    /// Feedback type: explicit or implicit
    #[arg(long, default_value = "explicit")]
    feedback: String,
}

#[derive(Subcommand)]
enum Command {
    /// Print dataset statistics (users, items, interactions, sparsity, rating entropy)
    Stats {
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Human-readable table instead of tab-separated output
        #[arg(long)]
        pretty: bool,
    },
    /// Deduplicate, average duplicate pairs, and k-core prune a dataset
    Prep {
        #[command(flatten)]
        dataset: DatasetArgs,
        /// k-core threshold
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Write the pruned interactions to this file (TSV)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a dataset and print per-portion bundle sizes
    Split {
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Downsampling method: user_based or user_subset
        #[arg(long, default_value = "user_based")]
        method: String,
        /// Comma-separated portions in (0, 1]
        #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
        portions: String,
        /// Master random seed
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// k-core threshold applied before splitting (0 disables)
        #[arg(long, default_value_t = 0)]
        k: usize,
    },
    /// Run the full experiment grid described by a config file
    Run {
        /// TOML experiment configuration
        #[arg(long)]
        config: PathBuf,
        /// Resume an existing result store instead of starting fresh
        #[arg(long)]
        resume: bool,
        /// Override the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's worker thread count
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Generate report tables from a result store
    Report {
        /// Directory holding records.tsv / skips.tsv / manifest.json
        #[arg(long)]
        store: PathBuf,
        /// normalized_heatmap, relative_curves, runtime_profile, or co2_table
        #[arg(long)]
        kind: String,
        /// Output directory for report files
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate CO2e savings for a given relative runtime
    EstimateCo2 {
        /// Runtime as a fraction of the full-size baseline, in [0, 1]
        #[arg(long)]
        relative_runtime: f64,
        /// Energy per tuned experiment run in kWh
        #[arg(long, default_value_t = 0.51)]
        energy_per_run_kwh: f64,
        /// Hyperparameter configurations per tuned run
        #[arg(long, default_value_t = 10)]
        tuning_configs: u32,
        /// Grid carbon intensity in gCO2e per kWh
        #[arg(long, default_value_t = 481.0)]
        intensity_g_per_kwh: f64,
        /// Workflow scaling factor (number of comparable runs)
        #[arg(long, default_value_t = 40.0)]
        scale_factor: f64,
    },
}

fn parse_feedback(s: &str) -> greenrec::Result<Feedback> {
    match s {
        "explicit" => Ok(Feedback::Explicit),
        "implicit" => Ok(Feedback::Implicit),
        other => Err(greenrec::Error::Config(format!(
            "unknown feedback type '{other}' (expected explicit or implicit)"
        ))),
    }
}

fn load(args: &DatasetArgs) -> greenrec::Result<greenrec::ingest::Dataset> {
    let schema = Schema::preset(&args.schema)?;
    load_dataset(&args.input, &schema, parse_feedback(&args.feedback)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn run(cli: Cli) -> greenrec::Result<()> {
    match cli.command {
        Command::Stats { dataset, pretty } => {
            let d = load(&dataset)?;
            let s = compute_stats(&d);
            if pretty {
                println!("dataset       {}", d.name);
                println!("users         {}", s.n_users);
                println!("items         {}", s.n_items);
                println!("interactions  {}", s.n_interactions);
                println!("sparsity %    {}", fmt_opt(s.sparsity_pct));
                println!("entropy       {}", fmt_opt(s.entropy));
            } else {
                println!("dataset\tusers\titems\tinteractions\tsparsity_pct\tentropy");
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    d.name,
                    s.n_users,
                    s.n_items,
                    s.n_interactions,
                    fmt_opt(s.sparsity_pct),
                    fmt_opt(s.entropy)
                );
            }
        }
        Command::Prep { dataset, k, out } => {
            let d = load(&dataset)?;
            let (pruned, rep) = preprocess(&d, PruneConfig { k });
            println!(
                "removed_exact_duplicates\t{}\naveraged_duplicate_pairs\t{}\nprune_rounds\t{}",
                rep.duplicates_removed, rep.pairs_averaged, rep.kcore_rounds
            );
            println!(
                "users\t{}\nitems\t{}\ninteractions\t{}",
                pruned.n_users(),
                pruned.n_items(),
                pruned.n_interactions()
            );
            if let Some(path) = out {
                let mut text = String::new();
                for ix in &pruned.interactions {
                    use std::fmt::Write as _;
                    let _ = writeln!(
                        text,
                        "{}\t{}\t{}\t{}",
                        pruned.user_id(ix.user),
                        pruned.item_id(ix.item),
                        ix.rating.map(|r| r.to_string()).unwrap_or_default(),
                        ix.timestamp.map(|t| t.to_string()).unwrap_or_default()
                    );
                }
                std::fs::write(&path, text).map_err(|source| greenrec::Error::Io {
                    path,
                    source,
                })?;
            }
        }
        Command::Split {
            dataset,
            method,
            portions,
            seed,
            k,
        } => {
            let d = load(&dataset)?;
            let d = if k > 0 {
                preprocess(&d, PruneConfig { k }).0
            } else {
                d
            };
            let method: Method = method.parse()?;
            let portions: Vec<f64> = portions
                .split(',')
                .map(|p| {
                    p.trim().parse().map_err(|_| {
                        greenrec::Error::Config(format!("bad portion '{p}'"))
                    })
                })
                .collect::<greenrec::Result<_>>()?;
            let plan = DownsamplePlan {
                method,
                portions,
                seed,
            };
            let bundles = split(&d, &SplitConfig::with_seed(seed), &plan)?;
            println!("portion\tusers\ttrain\tval\ttest");
            for b in &bundles {
                println!(
                    "{}\t{}\t{}\t{}\t{}",
                    b.portion,
                    b.users_included.len(),
                    b.train.len(),
                    b.val.len(),
                    b.test.len()
                );
            }
        }
        Command::Run {
            config,
            resume: do_resume,
            out,
            parallelism,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            let store = if do_resume {
                let existing = load_store(&cfg.output_dir)?;
                resume(&cfg, &existing)?
            } else {
                run_experiment(&cfg)?
            };
            println!(
                "records\t{}\nskips\t{}\nstore\t{}",
                store.records.len(),
                store.skips.len(),
                cfg.output_dir.display()
            );
        }
        Command::Report { store, kind, out } => {
            let kind: ReportKind = kind.parse()?;
            let store = load_store(&store)?;
            for path in report(&store, kind, &out)? {
                println!("{}", path.display());
            }
        }
        Command::EstimateCo2 {
            relative_runtime,
            energy_per_run_kwh,
            tuning_configs,
            intensity_g_per_kwh,
            scale_factor,
        } => {
            let model = EmissionModel {
                energy_per_run_kwh,
                tuning_configs,
                intensity_g_per_kwh,
                scale_factor,
            };
            let kg = co2e_savings_kg(relative_runtime, &model)?;
            println!("{kg:.2} kg");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap itself exits with 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
