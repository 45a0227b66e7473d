//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use aec_core::controller::Mode;
use aec_core::domain::DomainSchema;
use aec_core::environment::OracleConfig;
use aec_core::trace::Trace;
use aec_harness::audit::AuditReport;
use aec_harness::config::ExperimentConfig;
use aec_harness::experiments::{run_ablation, run_refinement, validate_bound};
use aec_harness::report;
use aec_harness::runner::{run_corpus, CorpusSpec, CorpusSummary};
use aec_harness::stats::check_bound;
use aec_harness::sweep::exhaustive_micro;

const SEED: u64 = 20_240_601;
const PARALLELISM: usize = 0;
const SWEEP_PLAN_LENGTH: usize = 2;
const SWEEP_BUDGET: Duration = Duration::from_secs(60);
const BOUND_EPISODES: usize = 10_000;
const NOISY_ORACLE: [f64; 2] = [0.01, 0.05];
const ACCURACIES: [f64; 4] = [0.5, 0.6, 0.8, 1.0];
const ACCURACY_EPISODES: usize = 2_500;
const ABLATION_EPISODES: usize = 2_000;
const ABLATION_ACCURACY: f64 = 0.7;
const ABLATION_ORACLE: f64 = 0.02;
const REFINEMENT_ITERATIONS: usize = 4;
const DETERMINISM_EPISODES: usize = 2_000;

struct Audit {
    summaries: Vec<CorpusSummary>,
    offline: AuditReport,
    unreadable: usize,
}

impl Audit {
    fn sink(&mut self, trace: &str) {
        match Trace::from_jsonl(trace) {
            Ok(t) => self.offline.add_trace(&t),
            Err(_) => self.unreadable += 1,
        }
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn base(episodes: usize, oracle_error: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seed: SEED,
        episodes,
        parallelism: PARALLELISM,
        ..ExperimentConfig::default()
    };
    cfg.oracle = OracleConfig::uniform(oracle_error);
    cfg.controller.mode = Mode::Aec;
    cfg
}

fn verifier_soundness() -> Outcome {
    let started = Instant::now();
    let r = exhaustive_micro(&DomainSchema::micro().rule_set(), SWEEP_PLAN_LENGTH).expect("micro sweep");
    let elapsed = started.elapsed();
    Outcome {
        passed: r.sound() && r.verified > 0 && elapsed < SWEEP_BUDGET,
        detail: format!(
            "{} worlds, {} stores, {} checked, {} verified, {} violations, {:.1}s",
            r.worlds,
            r.stores,
            r.checked,
            r.verified,
            r.violations,
            elapsed.as_secs_f64()
        ),
    }
}

fn exact_oracle(audit: &mut Audit) -> Outcome {
    let cfg = base(BOUND_EPISODES, 0.0);
    let (r, _) = validate_bound(&cfg, PARALLELISM, |_, t| audit.sink(t)).expect("corpus");
    let s = &r.summary;
    let passed = s.infeasible_commits == 0 && s.commits >= BOUND_EPISODES;
    let detail = format!("{} commits, {} infeasible", s.commits, s.infeasible_commits);
    audit.summaries.push(r.summary);
    Outcome { passed, detail }
}

fn noisy_oracle(audit: &mut Audit) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for eps in NOISY_ORACLE {
        let cfg = base(BOUND_EPISODES, eps);
        let (r, episodes) = validate_bound(&cfg, PARALLELISM, |_, t| audit.sink(t)).expect("corpus");
        let b = check_bound(&episodes, cfg.min_commits);
        passed &= b.holds == Some(true);
        parts.push(format!(
            "eps {eps}: feasibility {:.4} >= {:.4} (bound {:.4} - 3 SE) over {} commits",
            b.empirical_feasibility, b.threshold, b.mean_bound, b.verified_commits
        ));
        audit.summaries.push(r.summary);
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn predictor_accuracy(audit: &mut Audit) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for acc in ACCURACIES {
        let mut cfg = base(ACCURACY_EPISODES, 0.0);
        cfg.predictor.accuracy = acc;
        let spec = CorpusSpec::from_config(&cfg).expect("spec");
        let r = run_corpus(&spec, PARALLELISM, |_, t| audit.sink(t)).expect("corpus");
        passed &= r.summary.infeasible_commits == 0;
        parts.push(format!(
            "acc {acc}: {}/{} infeasible",
            r.summary.infeasible_commits, r.summary.commits
        ));
        audit.summaries.push(r.summary);
    }
    Outcome {
        passed,
        detail: parts.join(", "),
    }
}

fn ablation(audit: &mut Audit) -> (Outcome, Outcome) {
    let mut cfg = base(ABLATION_EPISODES, ABLATION_ORACLE);
    cfg.predictor.accuracy = ABLATION_ACCURACY;
    cfg.ablation.modes = Mode::ALL.to_vec();
    let (r, _) = run_ablation(&cfg, PARALLELISM, |_, _, t| audit.sink(t)).expect("ablation");
    audit.summaries.extend(r.summaries.iter().cloned());
    let get = |m, a, b| r.comparison(m, a, b).expect("comparison present");
    let infeasible = get("infeasible-commit-rate", Mode::NoVerification, Mode::Aec);
    let replans = get("replanning-rounds", Mode::NoGating, Mode::Aec);
    let c7 = Outcome {
        passed: infeasible.passed && replans.passed,
        detail: format!(
            "infeasible rate no-verification {:.4} vs aec {:.4} (lower {:.4}); replans no-gating {:.3} vs aec {:.3} (lower {:.3}); n {}",
            infeasible.difference.mean_a,
            infeasible.difference.mean_b,
            infeasible.difference.lower_95,
            replans.difference.mean_a,
            replans.difference.mean_b,
            replans.difference.lower_95,
            infeasible.difference.n
        ),
    };
    let q_hi = get("queries", Mode::QueryOnly, Mode::Aec);
    let q_lo = get("queries", Mode::Aec, Mode::Direct);
    let c8 = Outcome {
        passed: q_hi.passed && q_lo.passed && q_lo.difference.mean_b == 0.0,
        detail: format!(
            "mean queries query-only {:.3} >= aec {:.3} >= direct {:.3}",
            q_hi.difference.mean_a, q_hi.difference.mean_b, q_lo.difference.mean_b
        ),
    };
    (c7, c8)
}

fn refinement() -> Outcome {
    let mut cfg = base(0, 0.0);
    cfg.predictor.accuracy = 0.7;
    cfg.predictor.noise_scale = 0.0;
    cfg.rules.extra = vec!["rule sink-dirty: in(?o, ?s), ?s : sinkbasin => !clean(?o)".into()];
    cfg.refinement.iterations = REFINEMENT_ITERATIONS;
    let r = run_refinement(&cfg, PARALLELISM).expect("refinement");
    let success: Vec<String> = r
        .iterations
        .iter()
        .map(|it| format!("{:.3}", it.summary.success_rate))
        .collect();
    let sweeps: usize = r.iterations.iter().map(|it| it.sweep.violations).sum();
    Outcome {
        passed: r.passed() && r.iterations.len() == REFINEMENT_ITERATIONS,
        detail: format!(
            "success [{}], sweep violations {sweeps}, rule disabled after iteration 0: {}",
            success.join(", "),
            r.iterations.get(1).is_some_and(|it| it.disabled_rules.contains(&"sink-dirty".to_string()))
        ),
    }
}

fn determinism() -> Outcome {
    let mut cfg = base(DETERMINISM_EPISODES, ABLATION_ORACLE);
    cfg.predictor.accuracy = ABLATION_ACCURACY;
    let spec = CorpusSpec::from_config(&cfg).expect("spec");
    let run = |threads: usize| {
        let mut traces = String::new();
        let r = run_corpus(&spec, threads, |_, t| traces.push_str(t)).expect("corpus");
        let dir = tempfile::tempdir().expect("tempdir");
        let path = report::write_json(dir.path(), &r.summary).expect("report");
        (traces, r.summary.trace_digest.clone(), std::fs::read(path).expect("read report"))
    };
    let (t1, d1, j1) = run(1);
    let (t4, d4, j4) = run(4);
    let (t1b, _, j1b) = run(1);
    Outcome {
        passed: t1 == t4 && t1 == t1b && d1 == d4 && j1 == j4 && j1 == j1b,
        detail: format!(
            "{} trace bytes, digest {}..., 1 vs 4 threads identical: {}",
            t1.len(),
            &d1[..16],
            t1 == t4 && j1 == j4
        ),
    }
}

fn main() -> ExitCode {
    let mut audit = Audit {
        summaries: Vec::new(),
        offline: AuditReport::default(),
        unreadable: 0,
    };
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |n, name, o: Outcome| {
        println!("criterion {n:>2} [{}] {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    record(1, "verifier soundness, exhaustive micro sweep", verifier_soundness());
    record(2, "exact oracle, no infeasible commits", exact_oracle(&mut audit));
    record(3, "noisy oracle, feasibility bound", noisy_oracle(&mut audit));
    record(4, "predictor accuracy sweep, exact oracle", predictor_accuracy(&mut audit));
    let (c7, c8) = ablation(&mut audit);

    let leak: usize = audit.summaries.iter().map(|s| s.leakage_violations).sum();
    let gate: usize = audit.summaries.iter().map(|s| s.gate_violations).sum();
    let episodes: usize = audit.summaries.iter().map(|s| s.episodes).sum();
    record(
        5,
        "belief leakage audit",
        Outcome {
            passed: leak == 0 && audit.offline.leakage_violations == 0 && audit.unreadable == 0 && audit.offline.episodes == episodes,
            detail: format!(
                "{episodes} episodes, {} records, {leak} online / {} offline violations, {} unreadable traces",
                audit.offline.records, audit.offline.leakage_violations, audit.unreadable
            ),
        },
    );
    record(
        6,
        "gate semantics audit",
        Outcome {
            passed: gate == 0 && audit.offline.gate_violations == 0 && audit.offline.episodes == episodes,
            detail: format!(
                "{episodes} episodes, {gate} online / {} offline violations",
                audit.offline.gate_violations
            ),
        },
    );
    record(7, "ablation: verification and gating", c7);
    record(8, "ablation: query ordering", c8);
    record(9, "refinement with injected faults", refinement());
    record(10, "determinism across runs and thread counts", determinism());

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
