use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::InterestRatioVector;

/// Which interests the step-2 percentile is computed over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PercentileBase {
    /// Only interests that survived step 1.
    #[default]
    Survivors,
    /// Every catalog interest (step-1 removals still stay removed).
    AllInterests,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOptions {
    pub base: PercentileBase,
}

/// Outcome of the two-step destination filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub destination: String,
    pub source: String,
    /// Surviving interests, in catalog order.
    pub kept: Vec<String>,
    /// Step 1: interests with a higher source than destination ratio.
    pub removed_step1: Vec<String>,
    /// Step 2: survivors whose difference is at or below the threshold.
    pub removed_step2: Vec<String>,
    /// Destination minus source ratio, for every catalog interest.
    pub deltas: BTreeMap<String, f64>,
    pub percentile: f64,
    pub threshold: f64,
    pub base: PercentileBase,
}

/// Linear-interpolation percentile (`p` in 0..=100) of unsorted values.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("percentile of no values".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("percentile {p} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if frac == 0.0 || lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// Keeps interests that are more associated with the destination than the
/// source and whose difference exceeds the `p`-th percentile.
pub fn filter_interests(
    dest: &InterestRatioVector,
    source: &InterestRatioVector,
    p: f64,
    options: FilterOptions,
) -> Result<FilterReport> {
    dest.same_catalog(source)?;
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("percentile {p} outside [0, 100]")));
    }
    let deltas: Vec<f64> = dest
        .ratios
        .iter()
        .zip(&source.ratios)
        .map(|(d, s)| d - s)
        .collect();
    let mut survivors = Vec::new();
    let mut removed_step1 = Vec::new();
    for (idx, id) in dest.ids.iter().enumerate() {
        if dest.ratios[idx] < source.ratios[idx] {
            removed_step1.push(id.clone());
        } else {
            survivors.push(idx);
        }
    }
    if survivors.is_empty() {
        return Err(Error::EmptyFilter);
    }
    let base: Vec<f64> = match options.base {
        PercentileBase::Survivors => survivors.iter().map(|&i| deltas[i]).collect(),
        PercentileBase::AllInterests => deltas.clone(),
    };
    let threshold = percentile(&base, p)?;
    let mut kept = Vec::new();
    let mut removed_step2 = Vec::new();
    for idx in survivors {
        let id = dest.ids[idx].clone();
        if deltas[idx] <= threshold {
            removed_step2.push(id);
        } else {
            kept.push(id);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyFilter);
    }
    Ok(FilterReport {
        destination: dest.label.clone(),
        source: source.label.clone(),
        kept,
        removed_step1,
        removed_step2,
        deltas: dest.ids.iter().cloned().zip(deltas).collect(),
        percentile: p,
        threshold,
        base: options.base,
    })
}
