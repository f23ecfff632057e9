//! Aggregates over replicated experiments.

use serde::{Deserialize, Serialize};

use super::search::{ExperimentReport, Replication};
use crate::error::{domain, Result};
use crate::tuning::Variant;

/// Per-variant means over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub mu: f64,
    pub q: f64,
    /// Accounted ε; identical in every replication.
    pub epsilon: f64,
    pub replications: usize,
    pub mean_score: f64,
    /// Standard error of the mean score; `None` for a single replication.
    pub stderr_score: Option<f64>,
    pub mean_gradient_evals: f64,
    pub expected_gradient_evals: f64,
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Groups the reports of every replication by variant, in order of first
/// appearance.
pub fn summarize(replications: &[Replication]) -> Result<Vec<VariantSummary>> {
    let all = || replications.iter().flat_map(|r| &r.reports);
    let mut variants: Vec<Variant> = Vec::new();
    for r in all() {
        if !variants.contains(&r.variant) {
            variants.push(r.variant);
        }
    }
    if variants.is_empty() {
        return Err(domain("no reports to summarize"));
    }
    Ok(variants
        .into_iter()
        .map(|v| {
            let reports: Vec<&ExperimentReport> = all().filter(|r| r.variant == v).collect();
            let scores: Vec<f64> = reports.iter().map(|r| r.final_score).collect();
            let (mean_score, stderr_score) = mean_and_stderr(&scores);
            let evals: Vec<f64> = reports.iter().map(|r| r.actual_gradient_evals as f64).collect();
            let first = reports[0];
            VariantSummary {
                variant: v,
                mu: first.mu,
                q: first.q,
                epsilon: first.final_epsilon,
                replications: reports.len(),
                mean_score,
                stderr_score,
                mean_gradient_evals: mean_and_stderr(&evals).0,
                expected_gradient_evals: first.expected_cost.gradient_evals,
            }
        })
        .collect())
}
