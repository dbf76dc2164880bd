use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::catalog::AxisName;
use crate::error::{Error, Result};

use super::filter::percentile_sorted;
use super::DemographicProportions;

/// Added to every cell before renormalizing.
pub const KL_EPSILON: f64 = 1e-9;
pub const DEFAULT_BASELINE_TRIALS: usize = 1000;
/// Baseline quantile below which an observed divergence counts as significant.
pub const SIGNIFICANCE_QUANTILE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisDivergence {
    pub axis: AxisName,
    pub kl: f64,
    /// Some estimated cell was zero where the ground truth is not.
    pub smoothed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub trials: usize,
    pub seed: u64,
    pub mean: f64,
    pub p05: f64,
    pub median: f64,
    pub p95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub axes: Vec<AxisDivergence>,
    /// Divergence summed over axes.
    pub observed_kl: f64,
    pub baseline: BaselineSummary,
    /// Fraction of baseline draws at or below the observed divergence.
    pub quantile: f64,
    pub significantly_lower: bool,
    pub verdict: String,
}

fn smooth(p: &[f64]) -> Vec<f64> {
    let total: f64 = p.iter().map(|x| x + KL_EPSILON).sum();
    p.iter().map(|x| (x + KL_EPSILON) / total).collect()
}

/// `KL(p || q)` in nats after epsilon smoothing of both arguments.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let p = smooth(p);
    let q = smooth(q);
    p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum::<f64>().max(0.0)
}

/// One draw from the uniform distribution on the `k`-simplex.
fn uniform_simplex(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Compares estimated demographic distributions with ground truth, and the
/// resulting divergence with divergences of random uniform-simplex draws.
pub fn validate_proxy(
    estimated: &[DemographicProportions],
    ground_truth: &[DemographicProportions],
    trials: usize,
    seed: u64,
) -> Result<ValidationReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("baseline needs at least one trial".into()));
    }
    if ground_truth.is_empty() {
        return Err(Error::InsufficientData("no ground-truth axes".into()));
    }
    let mut pairs = Vec::with_capacity(ground_truth.len());
    for truth in ground_truth {
        let estimate = estimated
            .iter()
            .find(|e| e.axis == truth.axis)
            .ok_or_else(|| Error::CategoryMismatch {
                axis: truth.axis.to_string(),
            })?;
        let aligned = estimate
            .aligned_to(&truth.categories)
            .ok_or_else(|| Error::CategoryMismatch {
                axis: truth.axis.to_string(),
            })?;
        pairs.push((truth, aligned));
    }
    let axes: Vec<AxisDivergence> = pairs
        .iter()
        .map(|(truth, est)| AxisDivergence {
            axis: truth.axis,
            kl: kl_divergence(est, &truth.proportions),
            smoothed: est
                .iter()
                .zip(&truth.proportions)
                .any(|(e, t)| *e == 0.0 && *t > 0.0),
        })
        .collect();
    let observed: f64 = axes.iter().map(|a| a.kl).sum();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut baseline: Vec<f64> = (0..trials)
        .map(|_| {
            pairs
                .iter()
                .map(|(truth, _)| {
                    let draw = uniform_simplex(truth.proportions.len(), &mut rng);
                    kl_divergence(&draw, &truth.proportions)
                })
                .sum()
        })
        .collect();
    baseline.sort_by(f64::total_cmp);
    let at_or_below = baseline.iter().filter(|&&b| b <= observed).count();
    let quantile = at_or_below as f64 / trials as f64;
    let p05 = percentile_sorted(&baseline, 5.0);
    let significantly_lower = observed < p05;
    Ok(ValidationReport {
        axes,
        observed_kl: observed,
        baseline: BaselineSummary {
            trials,
            seed,
            mean: baseline.iter().sum::<f64>() / trials as f64,
            p05,
            median: percentile_sorted(&baseline, 50.0),
            p95: percentile_sorted(&baseline, 95.0),
        },
        quantile,
        significantly_lower,
        verdict: if significantly_lower { "pass" } else { "fail" }.into(),
    })
}
