use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sortlab::entropy::{audit_trace, DEFAULT_AUDIT_CAP};
use sortlab::harness::{
    self, assemble_sparse_trace, parse_trace, traced_stochastic_sort, BackendChoice,
    ExperimentConfig,
};
use sortlab::instance::SortingInstance;
use sortlab::leveled_sort::SortParams;
use sortlab::poset::McmcParams;
use sortlab::sparse_sort::{sparse_generalized_sort, RankSelection, SparseParams};
use sortlab::Error;

#[derive(Parser)]
#[command(name = "sortlab", version, about = "Generalized-sorting laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sorting instance and emit it as JSON.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write to a file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sort an instance with the leveled stochastic sorter.
    SortStochastic {
        #[arg(long)]
        instance: PathBuf,
        /// Seed for the sorter's own randomness (edge-subset sampling).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Promotion look-ahead constant.
        #[arg(long)]
        c: Option<usize>,
        /// Level count override.
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        rebuild_base: Option<f64>,
        /// Write a JSON-lines trace replayable by `audit`.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Sort an instance with the sparse worst-case sorter.
    SortSparse {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = BackendArg::Fallback)]
        backend: BackendArg,
        /// Edges sampled per round.
        #[arg(long)]
        a: Option<usize>,
        /// Prediction-sorter error budget.
        #[arg(long)]
        w: Option<usize>,
        #[arg(long)]
        a_multiplier: Option<f64>,
        /// Rank-estimation sample count (default: exact for small n).
        #[arg(long)]
        rank_samples: Option<usize>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a config-driven experiment grid and write CSV or JSON results.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Output path; overrides the config's `output.path`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a query trace through the information audit.
    Audit {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Exact-enumeration cap.
        #[arg(long, default_value_t = DEFAULT_AUDIT_CAP)]
        cap: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Fallback,
    None,
}

impl From<BackendArg> for BackendChoice {
    fn from(arg: BackendArg) -> Self {
        match arg {
            BackendArg::Fallback => BackendChoice::Fallback,
            BackendArg::None => BackendChoice::None,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("sortlab: {err}");
            match err {
                Error::InvalidArgument(_) | Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load_instance(path: &Path) -> sortlab::Result<SortingInstance> {
    SortingInstance::from_json(&fs::read_to_string(path)?)
}

fn run(cli: Cli) -> sortlab::Result<ExitCode> {
    match cli.command {
        Command::Gen { n, p, seed, out } => {
            let instance = SortingInstance::generate(n, p, seed)?;
            let json = instance.to_json()?;
            match out {
                Some(path) => fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SortStochastic {
            instance,
            seed,
            c,
            q,
            rebuild_base,
            trace,
        } => {
            let inst = load_instance(&instance)?;
            let mut params = SortParams::default();
            if let Some(c) = c {
                params.c = c;
            }
            params.q = q;
            params.rebuild_base = rebuild_base;
            let (run, lines) = traced_stochastic_sort(&inst, &params, seed)?;
            if let Some(path) = trace {
                let mut file = fs::File::create(path)?;
                harness::write_trace(&lines, &mut file)?;
            }
            print_sort_result(&inst, &run.order, run.queries);
            Ok(ExitCode::SUCCESS)
        }
        Command::SortSparse {
            instance,
            seed,
            backend,
            a,
            w,
            a_multiplier,
            rank_samples,
            trace,
        } => {
            let inst = load_instance(&instance)?;
            let params = SparseParams {
                a,
                w,
                a_multiplier,
                rank_mode: match rank_samples {
                    Some(samples) => RankSelection::Sampled { samples },
                    None => RankSelection::Auto,
                },
                mcmc: McmcParams::default(),
            };
            let backend: BackendChoice = backend.into();
            let run = sparse_generalized_sort(&inst, &params, backend.as_sorter(), seed)?;
            if let Some(path) = trace {
                let mut file = fs::File::create(path)?;
                harness::write_trace(&assemble_sparse_trace(&run), &mut file)?;
            }
            print_sort_result(&inst, &run.order, run.queries);
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment { config, out } => {
            let config = ExperimentConfig::from_json(&fs::read_to_string(config)?)?;
            let records = harness::run_to_output(&config, out.as_deref())?;
            let mean = records.iter().map(|r| r.queries as f64).sum::<f64>() / records.len() as f64;
            println!(
                "{}",
                serde_json::json!({
                    "records": records.len(),
                    "mean_queries": mean,
                    "all_correct": records.iter().all(|r| r.correct),
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit {
            instance,
            trace,
            cap,
        } => {
            let inst = load_instance(&instance)?;
            let (events, claimed) = parse_trace(&fs::read_to_string(trace)?)?;
            let report = audit_trace(&inst, &events, &claimed, cap)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn print_sort_result(
    instance: &SortingInstance,
    order: &[sortlab::instance::Vertex],
    queries: usize,
) {
    let correct = order == instance.hidden_order();
    println!(
        "{}",
        serde_json::json!({
            "order": order,
            "queries": queries,
            "correct": correct,
        })
    );
}
