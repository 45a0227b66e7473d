//! Ablation study, bound validation and the refinement loop.

use std::collections::BTreeMap;

use aec_core::controller::Mode;
use aec_core::predictor::{calibration_gap, recalibrate, PredictionOutcome};
use aec_core::store::GroundedStore;
use aec_core::verifier::{repair, Counterexample, CounterexampleKind, RepairPolicy};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig};
use crate::runner::{run_corpus, CorpusResult, CorpusSpec, CorpusSummary, EpisodeRecord};
use crate::stats::{check_bound, paired_difference, BoundCheck, PairedDifference};
use crate::sweep::{sampled_sweep, SweepReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub summary: CorpusSummary,
    pub bound: BoundCheck,
}

/// Runs the configured corpus and checks verified-commit feasibility against
/// the oracle-error lower bound.
pub fn validate_bound(
    cfg: &ExperimentConfig,
    parallelism: usize,
    sink: impl FnMut(&EpisodeRecord, &str),
) -> Result<(BoundReport, Vec<EpisodeRecord>), ConfigError> {
    let spec = CorpusSpec::from_config(cfg)?;
    let CorpusResult { summary, episodes } = run_corpus(&spec, parallelism, sink)?;
    let bound = check_bound(&episodes, cfg.min_commits);
    Ok((BoundReport { summary, bound }, episodes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Requirement {
    /// One-sided 95% lower limit of the paired difference is above zero.
    Greater,
    /// One-sided 95% lower limit is at least zero.
    AtLeast,
    /// Point estimate of the difference is at least zero.
    MeanAtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub a: Mode,
    pub b: Mode,
    pub requirement: Requirement,
    pub difference: PairedDifference,
    pub passed: bool,
}

impl Comparison {
    fn new(metric: &str, a: Mode, b: Mode, requirement: Requirement, xa: &[f64], xb: &[f64]) -> Self {
        let difference = paired_difference(xa, xb);
        let passed = match requirement {
            Requirement::Greater => difference.lower_95 > 0.0,
            Requirement::AtLeast => difference.lower_95 >= 0.0,
            Requirement::MeanAtLeast => difference.mean_diff >= 0.0,
        };
        Comparison {
            metric: metric.into(),
            a,
            b,
            requirement,
            difference,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub summaries: Vec<CorpusSummary>,
    pub comparisons: Vec<Comparison>,
}

impl AblationReport {
    pub fn passed(&self) -> bool {
        self.comparisons.iter().all(|c| c.passed)
    }

    pub fn comparison(&self, metric: &str, a: Mode, b: Mode) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.metric == metric && c.a == a && c.b == b)
    }
}

/// Runs every configured mode on the same episode seeds and compares them
/// pairwise against the full controller.
pub fn run_ablation(
    cfg: &ExperimentConfig,
    parallelism: usize,
    mut sink: impl FnMut(Mode, &EpisodeRecord, &str),
) -> Result<(AblationReport, BTreeMap<Mode, Vec<EpisodeRecord>>), ConfigError> {
    let base = CorpusSpec::from_config(cfg)?;
    let mut summaries = Vec::new();
    let mut runs: BTreeMap<Mode, Vec<EpisodeRecord>> = BTreeMap::new();
    for &mode in &cfg.ablation.modes {
        if runs.contains_key(&mode) {
            continue;
        }
        let r = run_corpus(&base.with_mode(mode), parallelism, |e, t| sink(mode, e, t))?;
        summaries.push(r.summary);
        runs.insert(mode, r.episodes);
    }
    let metric = |mode: Mode, f: fn(&EpisodeRecord) -> f64| -> Option<Vec<f64>> {
        runs.get(&mode).map(|eps| eps.iter().map(f).collect())
    };
    let infeasible: fn(&EpisodeRecord) -> f64 = |e| e.infeasible_rate();
    let replans: fn(&EpisodeRecord) -> f64 = |e| e.replanning_rounds as f64;
    let queries: fn(&EpisodeRecord) -> f64 = |e| e.queries as f64;
    let plan = [
        ("infeasible-commit-rate", Mode::NoVerification, Mode::Aec, Requirement::Greater, infeasible),
        ("replanning-rounds", Mode::NoGating, Mode::Aec, Requirement::AtLeast, replans),
        ("queries", Mode::QueryOnly, Mode::Aec, Requirement::MeanAtLeast, queries),
        ("queries", Mode::Aec, Mode::Direct, Requirement::MeanAtLeast, queries),
    ];
    let mut comparisons = Vec::new();
    for (name, a, b, req, f) in plan {
        if let (Some(xa), Some(xb)) = (metric(a, f), metric(b, f)) {
            comparisons.push(Comparison::new(name, a, b, req, &xa, &xb));
        }
    }
    Ok((AblationReport { summaries, comparisons }, runs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub enabled_rules: Vec<String>,
    pub disabled_rules: Vec<String>,
    pub noise_scale: f64,
    pub summary: CorpusSummary,
    pub calibration_gap: f64,
    /// Entailment contradictions attributed to each rule this iteration.
    pub rule_contradictions: BTreeMap<String, usize>,
    pub sweep: SweepReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub iterations: Vec<IterationReport>,
    pub success_non_decreasing: bool,
    /// Every sweep found no violation and, with an error-free oracle, no
    /// verified commit was infeasible.
    pub sound_every_iteration: bool,
}

impl RefinementReport {
    pub fn passed(&self) -> bool {
        self.success_non_decreasing && self.sound_every_iteration
    }
}

/// Alternates corpus runs with rule repair and predictor recalibration.
/// Each iteration replays the same episode seeds.
pub fn run_refinement(cfg: &ExperimentConfig, parallelism: usize) -> Result<RefinementReport, ConfigError> {
    let mut spec = CorpusSpec::from_config(cfg)?;
    spec.episodes = cfg.refinement.episodes;
    let policy = RepairPolicy {
        disable_threshold: cfg.refinement.disable_threshold,
    };
    let oracle_exact = cfg.oracle.is_exact();
    let mut iterations = Vec::new();
    for iteration in 0..cfg.refinement.iterations {
        let result = run_corpus(&spec, parallelism, |_, _| {})?;
        let sweep = sampled_sweep(&spec.environment, &spec.rules, cfg.refinement.sweep_worlds, spec.seed)?;
        let outcomes: Vec<PredictionOutcome> = result
            .episodes
            .iter()
            .flat_map(|e| e.prediction_outcomes.iter().cloned())
            .collect();
        let cexs: Vec<Counterexample> = result
            .episodes
            .iter()
            .flat_map(|e| e.counterexamples.iter().cloned())
            .collect();
        let mut rule_contradictions = BTreeMap::new();
        for c in &cexs {
            if let (CounterexampleKind::EntailmentContradiction, Some(r)) = (c.kind, &c.rule_id) {
                *rule_contradictions.entry(r.clone()).or_insert(0) += 1;
            }
        }
        iterations.push(IterationReport {
            iteration,
            enabled_rules: spec.rules.enabled_ids(),
            disabled_rules: spec.rules.disabled_ids(),
            noise_scale: spec.predictor.noise_scale,
            summary: result.summary,
            calibration_gap: calibration_gap(&outcomes),
            rule_contradictions,
            sweep,
        });

        let (rules, _) = repair(&cexs, &spec.rules, &GroundedStore::new(), policy);
        spec.rules = rules;
        if cfg.refinement.recalibrate {
            let next = recalibrate(&spec.predictor.with_seed(0), &outcomes);
            spec.predictor.noise_scale = next.noise_scale;
        }
    }
    let success_non_decreasing = iterations
        .windows(2)
        .all(|w| w[1].summary.success_rate >= w[0].summary.success_rate);
    let sound_every_iteration = iterations
        .iter()
        .all(|it| it.sweep.sound() && (!oracle_exact || it.summary.verified_infeasible_commits == 0));
    Ok(RefinementReport {
        iterations,
        success_non_decreasing,
        sound_every_iteration,
    })
}
