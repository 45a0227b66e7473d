use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aec_core::controller::Mode;
use aec_core::domain::DomainSchema;
use aec_core::trace::Trace;
use aec_harness::audit::{audit_path, AuditError, AuditReport};
use aec_harness::config::{ConfigError, ExperimentConfig};
use aec_harness::experiments::{run_ablation, run_refinement, validate_bound};
use aec_harness::report::{self, TraceWriter};
use aec_harness::runner::{run_corpus, CorpusSpec, CorpusSummary, EpisodeRecord};
use aec_harness::sweep::exhaustive_micro;
use clap::{Parser, Subcommand};

const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "aec", version, about = "Run and audit epistemic-control experiments")]
struct Cli {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override the global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Override the number of episodes.
    #[arg(long, short = 'n', global = true)]
    episodes: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, short = 'j', global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one corpus in a single controller mode.
    Run {
        /// aec, direct, query-only, no-verification or no-gating.
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Check verified-commit feasibility against the oracle-error bound.
    #[command(name = "validate-theorem1")]
    ValidateTheorem1 {
        /// Also run the exhaustive verifier sweep on the micro domain.
        #[arg(long)]
        exhaustive: bool,
        /// Longest enumerated plan in the exhaustive sweep.
        #[arg(long, default_value_t = 2)]
        plan_length: usize,
    },
    /// Alternate corpus runs with rule repair and predictor recalibration.
    Refine,
    /// Compare every configured mode on the same episodes.
    Ablate,
    /// Audit trace files for belief leakage and gate violations.
    AuditLeakage {
        /// A .jsonl file or a directory; runs a fresh corpus when omitted.
        traces: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Violation,
}

macro_rules! config_failure {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Config(e.to_string())
            }
        }
    )*};
}

config_failure!(ConfigError, AuditError, std::io::Error);

fn load(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.output {
        cfg.output_dir = o.clone();
    }
    if let Some(n) = cli.episodes {
        cfg.episodes = n;
    }
    if let Some(p) = cli.parallelism {
        cfg.parallelism = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn integrity_ok(s: &CorpusSummary, exact_oracle: bool) -> bool {
    s.leakage_violations == 0 && s.gate_violations == 0 && !(exact_oracle && s.verified_infeasible_commits > 0)
}

fn finish(dir: &Path, text: &str, ok: bool) -> Result<(), Failure> {
    report::write_text(dir, text)?;
    print!("{text}");
    eprintln!("reports written to {}", dir.display());
    if ok {
        Ok(())
    } else {
        Err(Failure::Violation)
    }
}

fn run_single(cfg: &ExperimentConfig, mode: Mode, dir: &Path) -> Result<(CorpusSummary, Vec<EpisodeRecord>), Failure> {
    let spec = CorpusSpec::from_config(cfg)?.with_mode(mode);
    let mut traces = TraceWriter::new(dir, cfg.write_traces);
    let result = run_corpus(&spec, cfg.parallelism, |_, t| traces.write(mode, t))?;
    traces.finish()?;
    report::write_csv(dir, result.episodes.iter().map(|e| (mode, e)))?;
    Ok((result.summary, result.episodes))
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = load(cli)?;
    let exact = cfg.oracle.is_exact();
    match &cli.command {
        Command::Run { mode } => {
            let dir = cfg.output_dir.join("run");
            let (summary, _) = run_single(&cfg, mode.unwrap_or(cfg.controller.mode), &dir)?;
            report::write_json(&dir, &summary)?;
            finish(&dir, &report::summary_text(&summary), integrity_ok(&summary, exact))
        }
        Command::ValidateTheorem1 { exhaustive, plan_length } => {
            let dir = cfg.output_dir.join("validate-theorem1");
            let mode = cfg.controller.mode;
            let mut traces = TraceWriter::new(&dir, cfg.write_traces);
            let (r, episodes) = validate_bound(&cfg, cfg.parallelism, |_, t| traces.write(mode, t))?;
            traces.finish()?;
            report::write_csv(&dir, episodes.iter().map(|e| (mode, e)))?;
            let mut text = report::bound_text(&r);
            let mut ok = r.bound.holds != Some(false) && integrity_ok(&r.summary, exact);
            let sweep = if *exhaustive {
                let s = exhaustive_micro(&DomainSchema::micro().rule_set(), *plan_length)?;
                text.push_str(&format!(
                    "exhaustive micro sweep: {} stores, {} checked, {} verified, {} violations\n",
                    s.stores, s.checked, s.verified, s.violations
                ));
                ok &= s.sound();
                Some(s)
            } else {
                None
            };
            report::write_json(&dir, &serde_json::json!({ "bound": r, "exhaustive_sweep": sweep }))?;
            finish(&dir, &text, ok)
        }
        Command::Refine => {
            let dir = cfg.output_dir.join("refine");
            let r = run_refinement(&cfg, cfg.parallelism)?;
            report::write_json(&dir, &r)?;
            finish(&dir, &report::refinement_text(&r), r.passed())
        }
        Command::Ablate => {
            let dir = cfg.output_dir.join("ablate");
            let mut traces = TraceWriter::new(&dir, cfg.write_traces);
            let (r, runs) = run_ablation(&cfg, cfg.parallelism, |m, _, t| traces.write(m, t))?;
            traces.finish()?;
            report::write_csv(&dir, runs.iter().flat_map(|(m, eps)| eps.iter().map(move |e| (*m, e))))?;
            report::write_json(&dir, &r)?;
            let clean = r.summaries.iter().all(|s| s.leakage_violations == 0 && s.gate_violations == 0);
            finish(&dir, &report::ablation_text(&r), r.passed() && clean)
        }
        Command::AuditLeakage { traces } => {
            let dir = cfg.output_dir.join("audit-leakage");
            let audit = match traces {
                Some(path) => audit_path(path)?,
                None => {
                    let mode = cfg.controller.mode;
                    let mut writer = TraceWriter::new(&dir, cfg.write_traces);
                    let mut audit = AuditReport::default();
                    let mut bad = None;
                    let spec = CorpusSpec::from_config(&cfg)?;
                    run_corpus(&spec, cfg.parallelism, |_, t| {
                        writer.write(mode, t);
                        match Trace::from_jsonl(t) {
                            Ok(trace) => audit.add_trace(&trace),
                            Err(e) => bad = Some(e),
                        }
                    })?;
                    writer.finish()?;
                    if let Some(e) = bad {
                        return Err(Failure::Config(format!("unreadable trace: {e}")));
                    }
                    audit.files = 0;
                    audit
                }
            };
            report::write_json(&dir, &audit)?;
            let mut text = format!(
                "audited {} files, {} episodes, {} records\nleakage violations {}\ngate violations {}\n",
                audit.files, audit.episodes, audit.records, audit.leakage_violations, audit.gate_violations
            );
            for e in &audit.examples {
                text.push_str(&format!("  {e}\n"));
            }
            finish(&dir, &text, audit.clean())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation) => {
            eprintln!("acceptance property violated");
            ExitCode::from(EXIT_VIOLATION)
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
