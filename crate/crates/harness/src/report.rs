//! Report files: `report.json`, `report.txt`, per-episode CSV and traces.
//!
//! Reports hold only seed-determined values, so reruns with the same
//! configuration produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use aec_core::controller::Mode;
use serde::Serialize;

use crate::experiments::{AblationReport, BoundReport, RefinementReport, Requirement};
use crate::runner::{CorpusSummary, EpisodeRecord};

pub fn write_json(dir: &Path, value: &impl Serialize) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

pub fn write_text(dir: &Path, text: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("report.txt");
    fs::write(&path, text)?;
    Ok(path)
}

pub const CSV_HEADER: &str =
    "mode,index,success,replanning_rounds,queries,steps,commits,verified_commits,infeasible_commits,failure";

pub fn csv_row(mode: Mode, e: &EpisodeRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        mode.name(),
        e.index,
        e.success as u8,
        e.replanning_rounds,
        e.queries,
        e.steps,
        e.commits.len(),
        e.commits.iter().filter(|c| c.verified).count(),
        e.infeasible_commits(),
        e.failure.as_deref().unwrap_or("")
    )
}

pub fn write_csv<'a>(dir: &Path, rows: impl IntoIterator<Item = (Mode, &'a EpisodeRecord)>) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("episodes.csv");
    let mut w = BufWriter::new(fs::File::create(&path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for (mode, e) in rows {
        writeln!(w, "{}", csv_row(mode, e))?;
    }
    w.flush()?;
    Ok(path)
}

/// Streams traces into `<dir>/traces/<mode>.jsonl`.
pub struct TraceWriter {
    dir: Option<PathBuf>,
    current: Option<(Mode, BufWriter<fs::File>)>,
    error: Option<io::Error>,
}

impl TraceWriter {
    pub fn new(dir: &Path, enabled: bool) -> Self {
        TraceWriter {
            dir: enabled.then(|| dir.join("traces")),
            current: None,
            error: None,
        }
    }

    pub fn write(&mut self, mode: Mode, trace: &str) {
        let Some(dir) = &self.dir else {
            return;
        };
        if self.error.is_some() {
            return;
        }
        let res = (|| -> io::Result<()> {
            if self.current.as_ref().map(|(m, _)| *m) != Some(mode) {
                if let Some((_, mut w)) = self.current.take() {
                    w.flush()?;
                }
                fs::create_dir_all(dir)?;
                let f = fs::File::create(dir.join(format!("{}.jsonl", mode.name())))?;
                self.current = Some((mode, BufWriter::new(f)));
            }
            self.current.as_mut().unwrap().1.write_all(trace.as_bytes())
        })();
        if let Err(e) = res {
            self.error = Some(e);
        }
    }

    pub fn finish(mut self) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        if let Some((_, mut w)) = self.current.take() {
            w.flush()?;
        }
        Ok(())
    }
}

pub fn summary_text(s: &CorpusSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mode {}: {} episodes", s.mode.name(), s.episodes);
    let _ = writeln!(out, "  success rate          {:.4} ({}/{})", s.success_rate, s.successes, s.episodes);
    let _ = writeln!(out, "  mean replanning       {:.4}", s.mean_replanning_rounds);
    let _ = writeln!(out, "  mean queries          {:.4}", s.mean_queries);
    let _ = writeln!(out, "  mean steps            {:.4}", s.mean_steps);
    let _ = writeln!(
        out,
        "  commits               {} ({} verified, {} infeasible, {} verified+infeasible)",
        s.commits, s.verified_commits, s.infeasible_commits, s.verified_infeasible_commits
    );
    let _ = writeln!(out, "  counterexamples       {}", s.counterexamples);
    let _ = writeln!(out, "  leakage violations    {}", s.leakage_violations);
    let _ = writeln!(out, "  gate violations       {}", s.gate_violations);
    for (reason, n) in &s.failures {
        let _ = writeln!(out, "  failure {reason:<14} {n}");
    }
    let _ = writeln!(out, "  trace digest          {}", s.trace_digest);
    out
}

pub fn bound_text(r: &BoundReport) -> String {
    let b = &r.bound;
    let mut out = summary_text(&r.summary);
    let verdict = match b.holds {
        Some(true) => "holds",
        Some(false) => "VIOLATED",
        None => "inconclusive (too few verified commits)",
    };
    let _ = writeln!(out, "feasibility bound over {} verified commits: {verdict}", b.verified_commits);
    let _ = writeln!(
        out,
        "  empirical {:.5}  mean bound {:.5}  SE {:.5}  threshold {:.5}",
        b.empirical_feasibility, b.mean_bound, b.standard_error, b.threshold
    );
    out
}

pub fn ablation_text(r: &AblationReport) -> String {
    let mut out = String::new();
    for s in &r.summaries {
        out.push_str(&summary_text(s));
    }
    for c in &r.comparisons {
        let rel = match c.requirement {
            Requirement::Greater => "> (95% one-sided)",
            Requirement::AtLeast => ">= (95% one-sided)",
            Requirement::MeanAtLeast => ">= (means)",
        };
        let d = &c.difference;
        let _ = writeln!(
            out,
            "[{}] {} {} {rel} {}: {:.4} vs {:.4}, diff {:.4}, SE {:.4}, lower {:.4}, n {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.metric,
            c.a.name(),
            c.b.name(),
            d.mean_a,
            d.mean_b,
            d.mean_diff,
            d.standard_error,
            d.lower_95,
            d.n
        );
    }
    out
}

pub fn refinement_text(r: &RefinementReport) -> String {
    let mut out = String::new();
    for it in &r.iterations {
        let _ = writeln!(
            out,
            "iteration {}: success {:.4}, steps {:.3}, queries {:.3}, calibration gap {:.4}, noise {:.3}",
            it.iteration,
            it.summary.success_rate,
            it.summary.mean_steps,
            it.summary.mean_queries,
            it.calibration_gap,
            it.noise_scale
        );
        let _ = writeln!(
            out,
            "  rules disabled [{}], contradictions {:?}",
            it.disabled_rules.join(", "),
            it.rule_contradictions
        );
        let _ = writeln!(
            out,
            "  sweep: {} worlds, {} checked, {} verified, {} violations; verified infeasible commits {}",
            it.sweep.worlds, it.sweep.checked, it.sweep.verified, it.sweep.violations, it.summary.verified_infeasible_commits
        );
    }
    let _ = writeln!(out, "success non-decreasing: {}", r.success_non_decreasing);
    let _ = writeln!(out, "sound every iteration:  {}", r.sound_every_iteration);
    out
}
