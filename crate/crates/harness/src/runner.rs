//! Parallel, seed-deterministic corpus execution.
//!
//! Episode `i` draws its world, oracle noise and predictor noise from
//! separate streams derived from `(seed, i)`, so runs in different modes see
//! the same worlds and results do not depend on the thread count. Episodes
//! are processed in chunks and folded in index order; traces are hashed and
//! handed to the sink as they are produced, never held all at once.

use std::collections::BTreeMap;
use std::sync::Arc;

use aec_core::controller::{run_episode, ControllerConfig, Mode};
use aec_core::domain::{Instance, RuleSet};
use aec_core::environment::{derive_seed, sample_world, EnvInstanceConfig, OracleConfig, SimEnv};
use aec_core::predictor::{PredictionOutcome, SyntheticPredictor};
use aec_core::store::{GroundedFact, Provenance};
use aec_core::trace::{gate_violations, leakage_violations};
use aec_core::verifier::Counterexample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, ExperimentConfig, PredictorSettings};

const STREAM_WORLD: u64 = 0;
const STREAM_ORACLE: u64 = 1;
const STREAM_PREDICTOR: u64 = 2;
const CHUNK: usize = 256;

/// Everything needed to run one corpus.
#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub seed: u64,
    pub episodes: usize,
    pub mode: Mode,
    pub environment: EnvInstanceConfig,
    pub oracle: OracleConfig,
    pub predictor: PredictorSettings,
    pub controller: ControllerConfig,
    pub rules: RuleSet,
}

impl CorpusSpec {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        Ok(CorpusSpec {
            seed: cfg.seed,
            episodes: cfg.episodes,
            mode: cfg.controller.mode,
            environment: cfg.environment.clone(),
            oracle: cfg.oracle.clone(),
            predictor: cfg.predictor.clone(),
            controller: cfg.controller.clone(),
            rules: cfg.controller_rules()?,
        })
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        CorpusSpec {
            mode,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub verified: bool,
    pub feasible: bool,
    /// `prod (1 - eps(p))` over facts acquired after the initial observation.
    pub bound: f64,
    pub acquired: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub index: usize,
    pub goal: String,
    pub success: bool,
    pub replanning_rounds: u32,
    pub queries: usize,
    pub steps: u32,
    pub failure: Option<String>,
    pub commits: Vec<CommitRecord>,
    pub counterexamples: Vec<Counterexample>,
    pub prediction_outcomes: Vec<PredictionOutcome>,
    pub leakage_violations: usize,
    pub gate_violations: usize,
}

impl EpisodeRecord {
    pub fn infeasible_commits(&self) -> usize {
        self.commits.iter().filter(|c| !c.feasible).count()
    }

    /// Share of this episode's commits that were infeasible (0 without commits).
    pub fn infeasible_rate(&self) -> f64 {
        if self.commits.is_empty() {
            0.0
        } else {
            self.infeasible_commits() as f64 / self.commits.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub mode: Mode,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_replanning_rounds: f64,
    pub mean_queries: f64,
    pub mean_steps: f64,
    pub commits: usize,
    pub verified_commits: usize,
    pub infeasible_commits: usize,
    pub verified_infeasible_commits: usize,
    pub counterexamples: usize,
    pub leakage_violations: usize,
    pub gate_violations: usize,
    pub failures: BTreeMap<String, usize>,
    /// SHA-256 over all traces in episode order.
    pub trace_digest: String,
}

#[derive(Debug, Clone)]
pub struct CorpusResult {
    pub summary: CorpusSummary,
    pub episodes: Vec<EpisodeRecord>,
}

/// Error term for one grounded fact when bounding feasibility.
pub fn fact_error(oracle: &OracleConfig, f: &GroundedFact) -> f64 {
    match f.provenance {
        Provenance::QueryResult => oracle.error_for(&f.predicate),
        Provenance::QuerySideEffect if oracle.delta_errors => oracle.error_for(&f.predicate),
        _ => 0.0,
    }
}

fn run_one(
    spec: &CorpusSpec,
    world_inst: &Arc<Instance>,
    ctrl_inst: &Instance,
    index: usize,
) -> Result<(EpisodeRecord, String), String> {
    let i = index as u64;
    let world = sample_world(&spec.environment, world_inst.clone(), derive_seed(spec.seed, i, STREAM_WORLD))
        .map_err(|e| e.to_string())?;
    let goal = world.goal().clone();
    let mut env = SimEnv::new(
        world,
        &spec.environment.visibility,
        spec.oracle.clone(),
        derive_seed(spec.seed, i, STREAM_ORACLE),
    );
    let mut model = SyntheticPredictor::new(spec.predictor.with_seed(derive_seed(spec.seed, i, STREAM_PREDICTOR)));
    let cfg = ControllerConfig {
        mode: spec.mode,
        ..spec.controller.clone()
    };
    let out = run_episode(&mut env, ctrl_inst, &goal, &mut model, &cfg);
    let commits = out
        .committed
        .iter()
        .zip(env.commit_feasibility())
        .map(|(c, &feasible)| CommitRecord {
            verified: c.verified,
            feasible,
            bound: c
                .acquired
                .iter()
                .map(|f| 1.0 - fact_error(&spec.oracle, f))
                .product(),
            acquired: c.acquired.len(),
        })
        .collect();
    let record = EpisodeRecord {
        index,
        goal: goal.to_string(),
        success: out.success,
        replanning_rounds: out.replanning_rounds,
        queries: out.queries_used,
        steps: out.steps_used,
        failure: out.failure.map(|f| match serde_json::to_value(&f) {
            Ok(serde_json::Value::String(s)) => s,
            Ok(v) => v.to_string(),
            Err(_) => format!("{f:?}"),
        }),
        commits,
        counterexamples: out.counterexamples,
        prediction_outcomes: out.prediction_outcomes,
        leakage_violations: leakage_violations(&out.trace).len(),
        gate_violations: gate_violations(&out.trace).len(),
    };
    Ok((record, out.trace.to_jsonl()))
}

fn pool(parallelism: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("thread pool")
}

/// Runs the corpus; `sink` receives each episode's JSONL trace in index order.
pub fn run_corpus(
    spec: &CorpusSpec,
    parallelism: usize,
    mut sink: impl FnMut(&EpisodeRecord, &str),
) -> Result<CorpusResult, ConfigError> {
    let world_inst = Arc::new(
        spec.environment
            .instance()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?,
    );
    let ctrl_inst = world_inst
        .with_rules(spec.rules.clone())
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let pool = pool(parallelism);
    let mut hasher = Sha256::new();
    let mut episodes = Vec::with_capacity(spec.episodes);
    let mut start = 0;
    while start < spec.episodes {
        let end = (start + CHUNK).min(spec.episodes);
        let chunk: Vec<Result<(EpisodeRecord, String), String>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| run_one(spec, &world_inst, &ctrl_inst, i))
                .collect()
        });
        for r in chunk {
            let (record, trace) = r.map_err(ConfigError::Invalid)?;
            hasher.update(trace.as_bytes());
            sink(&record, &trace);
            episodes.push(record);
        }
        start = end;
    }
    let digest = hasher.finalize();
    let summary = summarize(spec.mode, &episodes, hex(&digest));
    Ok(CorpusResult { summary, episodes })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

pub fn summarize(mode: Mode, eps: &[EpisodeRecord], trace_digest: String) -> CorpusSummary {
    let n = eps.len();
    let successes = eps.iter().filter(|e| e.success).count();
    let commits = eps.iter().flat_map(|e| &e.commits);
    let mut failures = BTreeMap::new();
    for e in eps {
        if let Some(f) = &e.failure {
            *failures.entry(f.clone()).or_insert(0) += 1;
        }
    }
    CorpusSummary {
        mode,
        episodes: n,
        successes,
        success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
        mean_replanning_rounds: mean(eps.iter().map(|e| e.replanning_rounds as f64), n),
        mean_queries: mean(eps.iter().map(|e| e.queries as f64), n),
        mean_steps: mean(eps.iter().map(|e| e.steps as f64), n),
        commits: commits.clone().count(),
        verified_commits: commits.clone().filter(|c| c.verified).count(),
        infeasible_commits: commits.clone().filter(|c| !c.feasible).count(),
        verified_infeasible_commits: commits.filter(|c| c.verified && !c.feasible).count(),
        counterexamples: eps.iter().map(|e| e.counterexamples.len()).sum(),
        leakage_violations: eps.iter().map(|e| e.leakage_violations).sum(),
        gate_violations: eps.iter().map(|e| e.gate_violations).sum(),
        failures,
        trace_digest,
    }
}
