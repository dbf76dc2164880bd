use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::filter::percentile_sorted;
use super::{FilterReport, InterestRatioVector};

/// Fewer interests than this make the bootstrap interval degenerate.
pub const MIN_INTERESTS_FOR_CI: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArRow {
    pub interest: String,
    pub expat_ratio: f64,
    pub dest_ratio: f64,
    pub source_ratio: Option<f64>,
    pub ar: f64,
    pub log_ar: f64,
    /// The expat ratio was zero and replaced by the population's epsilon.
    pub epsilon_substituted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianCi {
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub resamples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssimilationReport {
    pub expat: String,
    pub destination: String,
    pub source: String,
    pub rows: Vec<ArRow>,
    pub median_log_ar: f64,
    /// Share substituted for zero expat ratios.
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<MedianCi>,
    pub filter: FilterReport,
}

impl AssimilationReport {
    pub fn log_ars(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.log_ar).collect()
    }

    /// Attaches a bootstrap interval for the median log AR.
    pub fn with_ci(mut self, resamples: usize, seed: u64) -> Result<Self> {
        self.ci = Some(median_ar_ci(&self, resamples, seed)?);
        Ok(self)
    }
}

/// `AR_i = I_expat,i / I_dest,i` over the filter's kept interests.
///
/// A zero expat ratio is replaced by half of the smallest nonzero share the
/// expat population can have (one declaration out of its total) and flagged.
pub fn assimilation_ratios(
    expat: &InterestRatioVector,
    dest: &InterestRatioVector,
    source: Option<&InterestRatioVector>,
    filter: &FilterReport,
) -> Result<AssimilationReport> {
    expat.same_catalog(dest)?;
    if let Some(source) = source {
        dest.same_catalog(source)?;
    }
    let epsilon = 0.5 / expat.total;
    let mut rows = Vec::with_capacity(filter.kept.len());
    for id in &filter.kept {
        let idx = dest
            .ids
            .binary_search(id)
            .map_err(|_| Error::UnknownInterest(id.clone()))?;
        let dest_ratio = dest.ratios[idx];
        if dest_ratio <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "destination ratio of kept interest {id} is zero"
            )));
        }
        let raw = expat.ratios[idx];
        let substituted = raw <= 0.0;
        let expat_ratio = if substituted { epsilon } else { raw };
        let ar = expat_ratio / dest_ratio;
        rows.push(ArRow {
            interest: id.clone(),
            expat_ratio,
            dest_ratio,
            source_ratio: source.map(|s| s.ratios[idx]),
            ar,
            log_ar: ar.ln(),
            epsilon_substituted: substituted,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyFilter);
    }
    let logs: Vec<f64> = rows.iter().map(|r| r.log_ar).collect();
    Ok(AssimilationReport {
        expat: expat.label.clone(),
        destination: dest.label.clone(),
        source: filter.source.clone(),
        median_log_ar: median(&logs)?,
        rows,
        epsilon,
        ci: None,
        filter: filter.clone(),
    })
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("median of no values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(median_sorted(&sorted))
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Percentile-bootstrap interval for the median of `values`.
///
/// Each resample draws `n` indices with `random_range(0..n)` from a ChaCha8
/// stream seeded with `seed`. The interval is widened if needed so that it
/// contains the sample median.
pub fn bootstrap_median_ci(values: &[f64], resamples: usize, seed: u64, level: f64) -> Result<MedianCi> {
    if values.is_empty() {
        return Err(Error::InsufficientData("no values to bootstrap".into()));
    }
    if resamples == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one resample".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} outside (0, 1)")));
    }
    let n = values.len();
    let center = median(values)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = vec![0.0; n];
    let mut medians = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in sample.iter_mut() {
            *slot = values[rng.random_range(0..n)];
        }
        sample.sort_by(f64::total_cmp);
        medians.push(median_sorted(&sample));
    }
    medians.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0 * 100.0;
    let lower = percentile_sorted(&medians, tail).min(center);
    let upper = percentile_sorted(&medians, 100.0 - tail).max(center);
    let warning = (n < MIN_INTERESTS_FOR_CI).then(|| {
        format!("only {n} interests; the bootstrap interval is degenerate")
    });
    Ok(MedianCi {
        median: center,
        lower,
        upper,
        level,
        resamples,
        seed,
        warning,
    })
}

/// 95% bootstrap interval for a report's median log AR.
pub fn median_ar_ci(report: &AssimilationReport, resamples: usize, seed: u64) -> Result<MedianCi> {
    bootstrap_median_ci(&report.log_ars(), resamples, seed, 0.95)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_values_give_point_interval() {
        let ci = bootstrap_median_ci(&[0.0; 7], 200, 1, 0.95).unwrap();
        assert_eq!((ci.median, ci.lower, ci.upper), (0.0, 0.0, 0.0));
        assert!(ci.warning.is_none());
    }

    #[test]
    fn translation_equivariance() {
        let values = [-1.0, 0.0, 1.0, 0.3, -0.2, 0.8];
        let shifted: Vec<f64> = values.iter().map(|v| v + 2.5).collect();
        let a = bootstrap_median_ci(&values, 500, 9, 0.95).unwrap();
        let b = bootstrap_median_ci(&shifted, 500, 9, 0.95).unwrap();
        assert!((a.median + 2.5 - b.median).abs() < 1e-12);
        assert!((a.lower + 2.5 - b.lower).abs() < 1e-12);
        assert!((a.upper + 2.5 - b.upper).abs() < 1e-12);
    }

    #[test]
    fn small_input_warns() {
        let ci = bootstrap_median_ci(&[-1.0, 0.0, 1.0], 100, 3, 0.95).unwrap();
        assert_eq!(ci.median, 0.0);
        assert!(ci.lower <= 0.0 && ci.upper >= 0.0);
        assert!(ci.warning.is_some());
    }
}
