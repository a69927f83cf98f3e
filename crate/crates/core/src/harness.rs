//! Config-driven experiment grids and machine-readable trace logs.
//!
//! A grid runs `algorithm` over every `(n, p, trial)` cell, each cell seeded
//! by hashing `(seed, n, p-index, trial)` so results are reproducible and
//! order-independent under parallel execution. Records carry the query count
//! and its normalization by `n * log2(max(2, n*p))`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instance::{Direction, QueryEvent, SortingInstance, Vertex};
use crate::leveled_sort::{
    stochastic_sort_observed, LevelState, PassDirection, SortObserver, SortParams, SortRun,
};
use crate::pexpr::eval_p_expr;
use crate::poset::McmcParams;
use crate::rng;
use crate::sparse_sort::{
    sparse_generalized_sort, FallbackPredictionSorter, PredictionSorter, RankSelection,
    SparseParams, SparseRun,
};
use crate::{Error, Result};

/// Worker-count override for grid execution.
pub const THREADS_ENV: &str = "SORTLAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Stochastic,
    Sparse,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Stochastic => "stochastic",
            Algorithm::Sparse => "sparse",
        }
    }
}

/// Literal probability or an expression of `n` such as `"8*ln(n)/n"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PValue {
    Literal(f64),
    Expr(String),
}

impl PValue {
    pub fn resolve(&self, n: usize) -> Result<f64> {
        let p = match self {
            PValue::Literal(x) => *x,
            PValue::Expr(text) => eval_p_expr(text, n)?,
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("p = {p} out of [0, 1] at n = {n}")));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SortParamsConfig {
    pub c: Option<usize>,
    pub q: Option<usize>,
    pub rebuild_base: Option<f64>,
}

impl SortParamsConfig {
    pub fn to_params(&self) -> SortParams {
        let mut params = SortParams::default();
        if let Some(c) = self.c {
            params.c = c;
        }
        params.q = self.q;
        params.rebuild_base = self.rebuild_base;
        params
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    #[default]
    Fallback,
    None,
}

impl BackendChoice {
    pub fn as_sorter(&self) -> Option<&'static dyn PredictionSorter> {
        match self {
            BackendChoice::Fallback => Some(&FallbackPredictionSorter),
            BackendChoice::None => None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseParamsConfig {
    pub a: Option<usize>,
    pub w: Option<usize>,
    pub a_multiplier: Option<f64>,
    pub rank_samples: Option<usize>,
    pub mcmc_burn_in: Option<usize>,
    pub mcmc_thinning: Option<usize>,
    #[serde(default)]
    pub backend: BackendChoice,
}

impl SparseParamsConfig {
    pub fn to_params(&self) -> SparseParams {
        SparseParams {
            a: self.a,
            w: self.w,
            a_multiplier: self.a_multiplier,
            rank_mode: match self.rank_samples {
                Some(samples) => RankSelection::Sampled { samples },
                None => RankSelection::Auto,
            },
            mcmc: McmcParams {
                burn_in: self.mcmc_burn_in,
                thinning: self.mcmc_thinning,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: String,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_timing() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub n_values: Vec<usize>,
    pub p_values: Vec<PValue>,
    pub trials: usize,
    pub seed: u64,
    /// Report wall-clock times; disable for byte-reproducible output.
    #[serde(default = "default_timing")]
    pub timing: bool,
    #[serde(default)]
    pub sort: SortParamsConfig,
    #[serde(default)]
    pub sparse: SparseParamsConfig,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_values.is_empty() || self.p_values.is_empty() {
            return Err(Error::Config(
                "n_values and p_values must be non-empty".into(),
            ));
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("all n must be at least 2, got {n}")));
        }
        for n in &self.n_values {
            for p in &self.p_values {
                p.resolve(*n)?;
            }
        }
        Ok(())
    }
}

/// One row of the results table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
    pub algorithm: String,
    pub queries: usize,
    pub correct: bool,
    pub wall_ms: f64,
    pub normalized: f64,
}

/// `queries / (n * log2(max(2, n*p)))`.
pub fn normalized_queries(queries: usize, n: usize, p: f64) -> f64 {
    queries as f64 / (n as f64 * (n as f64 * p).max(2.0).log2())
}

/// Runs the whole grid, one record per `(n, p, trial)` in deterministic
/// order. Trials execute in parallel; any incorrect recovery is a hard error
/// because both algorithms carry always-correct contracts.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let jobs: Vec<(usize, usize, usize)> = config
        .n_values
        .iter()
        .enumerate()
        .flat_map(|(n_idx, _)| {
            config
                .p_values
                .iter()
                .enumerate()
                .flat_map(move |(p_idx, _)| {
                    (0..config.trials).map(move |trial| (n_idx, p_idx, trial))
                })
        })
        .collect();

    let run_all = || -> Result<Vec<TrialRecord>> {
        jobs.par_iter()
            .map(|&(n_idx, p_idx, trial)| run_trial(config, n_idx, p_idx, trial))
            .collect()
    };

    match std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        Some(workers) if workers >= 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run_all),
        _ => run_all(),
    }
}

fn run_trial(
    config: &ExperimentConfig,
    n_idx: usize,
    p_idx: usize,
    trial: usize,
) -> Result<TrialRecord> {
    let n = config.n_values[n_idx];
    let p = config.p_values[p_idx].resolve(n)?;
    let seed = rng::derive_seed(
        config.seed,
        &[
            "cell",
            &n.to_string(),
            &p_idx.to_string(),
            &trial.to_string(),
        ],
    );
    let instance = SortingInstance::generate(n, p, seed)?;
    let algo_seed = rng::derive_seed(seed, &["algorithm"]);
    let start = Instant::now();
    let (order, queries) = match config.algorithm {
        Algorithm::Stochastic => {
            let run = crate::leveled_sort::stochastic_sort(
                &instance,
                &config.sort.to_params(),
                algo_seed,
            )?;
            (run.order, run.queries)
        }
        Algorithm::Sparse => {
            let params = config.sparse.to_params();
            let run = sparse_generalized_sort(
                &instance,
                &params,
                config.sparse.backend.as_sorter(),
                algo_seed,
            )?;
            (run.order, run.queries)
        }
    };
    let wall_ms = if config.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let correct = order == instance.hidden_order();
    if !correct {
        return Err(Error::Internal(format!(
            "incorrect recovery at n={n}, p={p}, seed={seed}"
        )));
    }
    Ok(TrialRecord {
        n,
        p,
        seed,
        algorithm: config.algorithm.name().to_string(),
        queries,
        correct,
        wall_ms,
        normalized: normalized_queries(queries, n, p),
    })
}

pub fn write_csv<W: Write>(records: &[TrialRecord], writer: W) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    for record in records {
        csv_writer.serialize(record)?;
    }
    csv_writer.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(records: &[TrialRecord], mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, records)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Runs a grid and writes it where the config (or the override) points.
pub fn run_to_output(
    config: &ExperimentConfig,
    path_override: Option<&Path>,
) -> Result<Vec<TrialRecord>> {
    let (path, format) = match (path_override, &config.output) {
        (Some(path), out) => {
            // An explicit override path names its own format when the
            // extension is recognizable.
            let format = format_from_extension(path)
                .or_else(|| out.as_ref().map(|o| o.format))
                .unwrap_or_default();
            (path.to_path_buf(), format)
        }
        (None, Some(out)) => (Path::new(&out.path).to_path_buf(), out.format),
        (None, None) => return Err(Error::Config("no output path given".into())),
    };
    // Fail on unwritable paths before burning compute.
    let file = File::create(&path)?;
    let records = run_experiment(config)?;
    let buffered = BufWriter::new(file);
    match format {
        OutputFormat::Csv => write_csv(&records, buffered)?,
        OutputFormat::Json => write_json(&records, buffered)?,
    }
    Ok(records)
}

fn format_from_extension(path: &Path) -> Option<OutputFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Some(OutputFormat::Json),
        Some("csv") => Some(OutputFormat::Csv),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Trace logs (JSON lines)
// ---------------------------------------------------------------------------

/// One line of a run trace. Query lines carry enough to replay the
/// information audit; the rest are diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceLine {
    Pass {
        direction: String,
    },
    Query {
        u: Vertex,
        v: Vertex,
        direction: Direction,
        queries: usize,
    },
    Discover {
        l: usize,
        vertex: Vertex,
        queries: usize,
    },
    Rebuild {
        level: usize,
        l: usize,
        queries: usize,
    },
    Round {
        round: usize,
        contradictions: usize,
        known: usize,
        queries: usize,
    },
    Claim {
        order: Vec<Vertex>,
    },
}

/// Observer that records discovery/rebuild events for trace assembly.
#[derive(Default)]
pub struct TraceRecorder {
    events: Vec<RecordedEvent>,
}

enum RecordedEvent {
    Pass(PassDirection),
    Discover {
        l: usize,
        vertex: Vertex,
        queries: usize,
    },
    Rebuild {
        level: usize,
        l: usize,
        queries: usize,
    },
}

impl SortObserver for TraceRecorder {
    fn on_pass(&mut self, direction: PassDirection) {
        self.events.push(RecordedEvent::Pass(direction));
    }

    fn on_discover(&mut self, ell: usize, vertex: Vertex, queries: usize) {
        self.events.push(RecordedEvent::Discover {
            l: ell,
            vertex,
            queries,
        });
    }

    fn on_rebuild(&mut self, top_level: usize, ell: usize, _state: &LevelState, queries: usize) {
        self.events.push(RecordedEvent::Rebuild {
            level: top_level,
            l: ell,
            queries,
        });
    }
}

fn query_lines(trace: &[QueryEvent]) -> impl Iterator<Item = TraceLine> + '_ {
    trace.iter().enumerate().map(|(i, e)| TraceLine::Query {
        u: e.u,
        v: e.v,
        direction: e.direction,
        queries: i + 1,
    })
}

/// Interleaves the oracle's query log with recorded events in true order
/// (every recorded event knows how many queries preceded it).
pub fn assemble_stochastic_trace(run: &SortRun, recorder: &TraceRecorder) -> Vec<TraceLine> {
    let mut lines = Vec::with_capacity(run.trace.len() + recorder.events.len() + 1);
    let mut queries = query_lines(&run.trace).peekable();
    let mut emitted = 0usize;
    for event in &recorder.events {
        let upto = match *event {
            RecordedEvent::Pass(_) => emitted,
            RecordedEvent::Discover { queries, .. } | RecordedEvent::Rebuild { queries, .. } => {
                queries
            }
        };
        while emitted < upto {
            lines.push(queries.next().expect("query counts are monotone"));
            emitted += 1;
        }
        lines.push(match *event {
            RecordedEvent::Pass(direction) => TraceLine::Pass {
                direction: match direction {
                    PassDirection::Forward => "forward".into(),
                    PassDirection::Reverse => "reverse".into(),
                },
            },
            RecordedEvent::Discover { l, vertex, queries } => {
                TraceLine::Discover { l, vertex, queries }
            }
            RecordedEvent::Rebuild { level, l, queries } => {
                TraceLine::Rebuild { level, l, queries }
            }
        });
    }
    lines.extend(queries);
    lines.push(TraceLine::Claim {
        order: run.order.clone(),
    });
    lines
}

pub fn assemble_sparse_trace(run: &SparseRun) -> Vec<TraceLine> {
    let mut lines = Vec::with_capacity(run.trace.len() + run.rounds.len() + 1);
    let mut queries = query_lines(&run.trace).peekable();
    let mut emitted = 0usize;
    for round in &run.rounds {
        while emitted < round.queries_after {
            lines.push(queries.next().expect("query counts are monotone"));
            emitted += 1;
        }
        lines.push(TraceLine::Round {
            round: round.round,
            contradictions: round.contradictions,
            known: round.known_after,
            queries: round.queries_after,
        });
    }
    lines.extend(queries);
    lines.push(TraceLine::Claim {
        order: run.order.clone(),
    });
    lines
}

pub fn write_trace<W: Write>(lines: &[TraceLine], mut writer: W) -> Result<()> {
    for line in lines {
        serde_json::to_writer(&mut writer, line)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses a trace file back into query events and the claimed order.
pub fn parse_trace(text: &str) -> Result<(Vec<QueryEvent>, Vec<Vertex>)> {
    let mut events = Vec::new();
    let mut claimed = None;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine = serde_json::from_str(line)
            .map_err(|e| Error::Config(format!("trace line {}: {e}", idx + 1)))?;
        match parsed {
            TraceLine::Query {
                u, v, direction, ..
            } => events.push(QueryEvent { u, v, direction }),
            TraceLine::Claim { order } => claimed = Some(order),
            _ => {}
        }
    }
    let claimed = claimed.ok_or_else(|| Error::Config("trace has no claim line".into()))?;
    Ok((events, claimed))
}

/// Convenience used by the CLI: sort with tracing enabled.
pub fn traced_stochastic_sort(
    instance: &SortingInstance,
    params: &SortParams,
    seed: u64,
) -> Result<(SortRun, Vec<TraceLine>)> {
    let mut recorder = TraceRecorder::default();
    let run = stochastic_sort_observed(instance, params, seed, &mut recorder)?;
    let lines = assemble_stochastic_trace(&run, &recorder);
    Ok((run, lines))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            algorithm: Algorithm::Stochastic,
            n_values: vec![8, 12],
            p_values: vec![PValue::Literal(0.3), PValue::Expr("2*ln(n)/n".into())],
            trials: 2,
            seed: 5,
            timing: false,
            sort: SortParamsConfig::default(),
            sparse: SparseParamsConfig::default(),
            output: None,
        }
    }

    #[test]
    fn grid_shape_and_correctness() {
        let records = run_experiment(&tiny_config()).unwrap();
        assert_eq!(records.len(), 8);
        assert!(records.iter().all(|r| r.correct));
        assert!(records.iter().all(|r| r.normalized > 0.0));
        // Deterministic (cell, trial) order regardless of scheduling.
        let cells: Vec<(usize, u64)> = records.iter().map(|r| (r.n, r.seed)).collect();
        let again: Vec<(usize, u64)> = run_experiment(&tiny_config())
            .unwrap()
            .iter()
            .map(|r| (r.n, r.seed))
            .collect();
        assert_eq!(cells, again);
    }

    #[test]
    fn csv_bytes_are_reproducible_without_timing() {
        let records = run_experiment(&tiny_config()).unwrap();
        let mut a = Vec::new();
        write_csv(&records, &mut a).unwrap();
        let records2 = run_experiment(&tiny_config()).unwrap();
        let mut b = Vec::new();
        write_csv(&records2, &mut b).unwrap();
        assert_eq!(a, b);
        let header = String::from_utf8(a).unwrap();
        assert!(header.starts_with("n,p,seed,algorithm,queries,correct,wall_ms,normalized\n"));
    }

    #[test]
    fn sparse_grid_runs() {
        let config = ExperimentConfig {
            algorithm: Algorithm::Sparse,
            n_values: vec![8],
            p_values: vec![PValue::Literal(0.5)],
            trials: 3,
            seed: 1,
            timing: true,
            sort: SortParamsConfig::default(),
            sparse: SparseParamsConfig::default(),
            output: None,
        };
        let records = run_experiment(&config).unwrap();
        assert_eq!(records.len(), 3);
        assert!(records.iter().all(|r| r.correct && r.algorithm == "sparse"));
    }

    #[test]
    fn config_validation_rejects_bad_grids() {
        let mut config = tiny_config();
        config.trials = 0;
        assert!(config.validate().is_err());
        let mut config = tiny_config();
        config.n_values = vec![1];
        assert!(config.validate().is_err());
        let mut config = tiny_config();
        config.p_values = vec![PValue::Literal(1.5)];
        assert!(config.validate().is_err());
        // 8 * ln(8)/8 > 1: expression must be validated per n.
        let mut config = tiny_config();
        config.n_values = vec![8];
        config.p_values = vec![PValue::Expr("8*ln(n)/n".into())];
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_parses_from_json() {
        let text = r#"{
            "algorithm": "stochastic",
            "n_values": [16],
            "p_values": [0.25, "2*ln(n)/n"],
            "trials": 1,
            "seed": 42,
            "output": {"path": "out.csv", "format": "csv"}
        }"#;
        let config = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(config.algorithm, Algorithm::Stochastic);
        assert!(config.timing, "timing defaults to true");
        assert!(ExperimentConfig::from_json("{\"bogus\": 1}").is_err());
    }

    #[test]
    fn stochastic_trace_round_trips() {
        let inst = SortingInstance::generate(9, 0.5, 3).unwrap();
        let (run, lines) = traced_stochastic_sort(&inst, &SortParams::default(), 7).unwrap();
        assert_eq!(run.order, inst.hidden_order());
        let mut text = Vec::new();
        write_trace(&lines, &mut text).unwrap();
        let (events, claimed) = parse_trace(std::str::from_utf8(&text).unwrap()).unwrap();
        assert_eq!(events, run.trace);
        assert_eq!(claimed, run.order);
        // Query lines appear in true interleaved order: the k-th query line
        // is numbered k.
        let mut seen = 0usize;
        for line in &lines {
            if let TraceLine::Query { queries, .. } = line {
                seen += 1;
                assert_eq!(*queries, seen);
            }
        }
        assert_eq!(seen, run.queries);
    }

    #[test]
    fn sparse_trace_includes_rounds() {
        let inst = SortingInstance::generate(10, 0.4, 1).unwrap();
        let run = sparse_generalized_sort(
            &inst,
            &SparseParams::default(),
            Some(&FallbackPredictionSorter),
            3,
        )
        .unwrap();
        let lines = assemble_sparse_trace(&run);
        assert!(lines.iter().any(|l| matches!(l, TraceLine::Round { .. })));
        let mut text = Vec::new();
        write_trace(&lines, &mut text).unwrap();
        let (events, claimed) = parse_trace(std::str::from_utf8(&text).unwrap()).unwrap();
        assert_eq!(events, run.trace);
        assert_eq!(claimed, run.order);
    }
}
