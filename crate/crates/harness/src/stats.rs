//! Bound validation and paired comparisons.

use serde::{Deserialize, Serialize};

use crate::runner::EpisodeRecord;

/// One-sided 95% normal quantile.
pub const Z_95: f64 = 1.645;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub verified_commits: usize,
    pub empirical_feasibility: f64,
    pub mean_bound: f64,
    /// `sqrt(b(1-b)/n)` for the mean bound `b`.
    pub standard_error: f64,
    /// `mean_bound - 3 * standard_error`.
    pub threshold: f64,
    /// `None` when fewer than the required number of commits were seen.
    pub holds: Option<bool>,
}

/// Compares empirical feasibility of verified commits with the mean of the
/// per-commit lower bounds.
pub fn check_bound(episodes: &[EpisodeRecord], min_commits: usize) -> BoundCheck {
    let verified: Vec<_> = episodes
        .iter()
        .flat_map(|e| &e.commits)
        .filter(|c| c.verified)
        .collect();
    let n = verified.len();
    if n == 0 {
        return BoundCheck {
            verified_commits: 0,
            empirical_feasibility: 0.0,
            mean_bound: 0.0,
            standard_error: 0.0,
            threshold: 0.0,
            holds: None,
        };
    }
    let nf = n as f64;
    let empirical = verified.iter().filter(|c| c.feasible).count() as f64 / nf;
    let b = verified.iter().map(|c| c.bound).sum::<f64>() / nf;
    let se = (b * (1.0 - b) / nf).max(0.0).sqrt();
    let threshold = b - 3.0 * se;
    BoundCheck {
        verified_commits: n,
        empirical_feasibility: empirical,
        mean_bound: b,
        standard_error: se,
        threshold,
        holds: (n >= min_commits).then_some(empirical >= threshold),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Mean of `a_i - b_i`.
    pub mean_diff: f64,
    pub standard_error: f64,
    /// One-sided 95% lower confidence limit of the mean difference.
    pub lower_95: f64,
}

pub fn paired_difference(a: &[f64], b: &[f64]) -> PairedDifference {
    assert_eq!(a.len(), b.len(), "paired samples must align");
    let n = a.len();
    if n == 0 {
        return PairedDifference {
            n,
            mean_a: 0.0,
            mean_b: 0.0,
            mean_diff: 0.0,
            standard_error: 0.0,
            lower_95: 0.0,
        };
    }
    let nf = n as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean_d = d.iter().sum::<f64>() / nf;
    let var = if n > 1 {
        d.iter().map(|x| (x - mean_d).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    let se = (var / nf).sqrt();
    PairedDifference {
        n,
        mean_a: a.iter().sum::<f64>() / nf,
        mean_b: b.iter().sum::<f64>() / nf,
        mean_diff: mean_d,
        standard_error: se,
        lower_95: mean_d - Z_95 * se,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::CommitRecord;

    fn episode(commits: Vec<(bool, bool, f64)>) -> EpisodeRecord {
        EpisodeRecord {
            index: 0,
            goal: String::new(),
            success: true,
            replanning_rounds: 0,
            queries: 0,
            steps: 0,
            failure: None,
            commits: commits
                .into_iter()
                .map(|(verified, feasible, bound)| CommitRecord {
                    verified,
                    feasible,
                    bound,
                    acquired: 1,
                })
                .collect(),
            counterexamples: vec![],
            prediction_outcomes: vec![],
            leakage_violations: 0,
            gate_violations: 0,
        }
    }

    #[test]
    fn bound_check_matches_hand_computation() {
        let eps: Vec<EpisodeRecord> = (0..200)
            .map(|i| episode(vec![(true, i % 10 != 0, 0.9), (false, false, 0.5)]))
            .collect();
        let c = check_bound(&eps, 100);
        assert_eq!(c.verified_commits, 200);
        assert!((c.empirical_feasibility - 0.9).abs() < 1e-12);
        assert!((c.mean_bound - 0.9).abs() < 1e-12);
        let se = (0.9f64 * 0.1 / 200.0).sqrt();
        assert!((c.standard_error - se).abs() < 1e-12);
        assert_eq!(c.holds, Some(true));
        assert_eq!(check_bound(&eps[..10], 100).holds, None);
    }

    #[test]
    fn paired_difference_of_constant_shift() {
        let a = [3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let p = paired_difference(&a, &b);
        assert_eq!(p.mean_diff, 2.0);
        assert_eq!(p.standard_error, 0.0);
        assert_eq!(p.lower_95, 2.0);
    }

    #[test]
    fn paired_difference_standard_error() {
        let a = [1.0, 0.0, 1.0, 0.0];
        let b = [0.0, 0.0, 0.0, 0.0];
        let p = paired_difference(&a, &b);
        // sample variance of [1,0,1,0] is 1/3
        let se = (1.0f64 / 3.0 / 4.0).sqrt();
        assert!((p.standard_error - se).abs() < 1e-12);
        assert!((p.lower_95 - (0.5 - Z_95 * se)).abs() < 1e-12);
    }
}
