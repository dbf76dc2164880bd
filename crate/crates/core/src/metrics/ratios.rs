use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{AxisName, DemographicAxis, InterestCatalog};
use crate::error::{Error, Result};

/// Within-axis category shares of one population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemographicProportions {
    pub axis: AxisName,
    /// Categories in axis order.
    pub categories: Vec<String>,
    pub proportions: Vec<f64>,
}

impl DemographicProportions {
    /// Normalizes given fractions (or any nonnegative weights) over `axis`.
    pub fn from_fractions<S: AsRef<str>>(
        axis: &DemographicAxis,
        fractions: &[(S, f64)],
    ) -> Result<Self> {
        let mut weights = vec![0.0; axis.categories.len()];
        for (category, w) in fractions {
            let idx = axis.position(category.as_ref()).ok_or_else(|| Error::UnknownCategory {
                axis: axis.name.to_string(),
                category: category.as_ref().to_string(),
            })?;
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{}: weight of {} must be finite and nonnegative",
                    axis.name,
                    category.as_ref()
                )));
            }
            weights[idx] += w;
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::AllZero(axis.name.to_string()));
        }
        Ok(Self {
            axis: axis.name,
            categories: axis.categories.clone(),
            proportions: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn get(&self, category: &str) -> Option<f64> {
        self.categories
            .iter()
            .position(|c| c == category)
            .map(|i| self.proportions[i])
    }

    /// Proportions reordered to follow `categories`, or `None` if the sets differ.
    pub fn aligned_to(&self, categories: &[String]) -> Option<Vec<f64>> {
        if categories.len() != self.categories.len() {
            return None;
        }
        categories.iter().map(|c| self.get(c)).collect()
    }
}

/// `count(c, d) / sum over c' of count(c', d)` for every category of `axis`.
///
/// Categories absent from `counts` get proportion 0.
pub fn demographic_proportions<S: AsRef<str>>(
    counts: &[(S, u64)],
    axis: &DemographicAxis,
) -> Result<DemographicProportions> {
    let weights: Vec<(&str, f64)> = counts
        .iter()
        .map(|(c, n)| (c.as_ref(), *n as f64))
        .collect();
    DemographicProportions::from_fractions(axis, &weights)
}

/// Share of a population's interest declarations per catalog interest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterestRatioVector {
    pub label: String,
    /// Catalog ids, index-aligned with `ratios`.
    pub ids: Vec<String>,
    pub ratios: Vec<f64>,
    /// Sum of the underlying counts.
    pub total: f64,
}

impl InterestRatioVector {
    /// Builds the vector from per-interest weights aligned with `catalog`.
    pub fn from_weights(label: &str, catalog: &InterestCatalog, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != catalog.len() {
            return Err(Error::InvalidArgument(format!(
                "{label}: {} weights for a catalog of {}",
                weights.len(),
                catalog.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "{label}: interest counts must be finite and nonnegative"
            )));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::AllZero(label.to_string()));
        }
        Ok(Self {
            label: label.to_string(),
            ids: catalog.ids().map(str::to_string).collect(),
            ratios: weights.into_iter().map(|w| w / total).collect(),
            total,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.ids
            .binary_search_by(|probe| probe.as_str().cmp(id))
            .ok()
            .map(|i| self.ratios[i])
    }

    pub fn as_map(&self) -> BTreeMap<&str, f64> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.ratios.iter().copied())
            .collect()
    }

    pub(crate) fn same_catalog(&self, other: &Self) -> Result<()> {
        if self.ids != other.ids {
            return Err(Error::InvalidArgument(format!(
                "{} and {} are not over the same catalog",
                self.label, other.label
            )));
        }
        Ok(())
    }
}

/// `I_{p,i} = count(p, i) / sum over i' of count(p, i')`.
///
/// Interests absent from `counts` are treated as 0; ids outside the catalog
/// are an error.
pub fn interest_ratios<S: AsRef<str>>(
    label: &str,
    counts: &[(S, u64)],
    catalog: &InterestCatalog,
) -> Result<InterestRatioVector> {
    let mut weights = vec![0.0; catalog.len()];
    for (id, n) in counts {
        let idx = catalog
            .index_of(id.as_ref())
            .ok_or_else(|| Error::UnknownInterest(id.as_ref().to_string()))?;
        weights[idx] += *n as f64;
    }
    InterestRatioVector::from_weights(label, catalog, weights)
}

/// Interests ranked by ratio, highest first, ties by id; at most `k`.
pub fn top_k_interests(vector: &InterestRatioVector, k: usize) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut ranked: Vec<(String, f64)> = vector
        .ids
        .iter()
        .cloned()
        .zip(vector.ratios.iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hip_hop_worked_example() {
        let catalog = InterestCatalog::from_ids(&["hip-hop", "rock", "rap"]).unwrap();
        let v = interest_ratios("p", &[("hip-hop", 10), ("rock", 60), ("rap", 30)], &catalog).unwrap();
        assert_eq!(v.get("hip-hop"), Some(0.10));
    }

    #[test]
    fn zero_cell_and_all_zero() {
        let axis = DemographicAxis::new(AxisName::Gender, ["A", "B"], false, None).unwrap();
        let p = demographic_proportions(&[("A", 0), ("B", 10)], &axis).unwrap();
        assert_eq!(p.proportions, vec![0.0, 1.0]);
        assert!(matches!(
            demographic_proportions(&[("A", 0)], &axis),
            Err(Error::AllZero(_))
        ));
        assert!(matches!(
            demographic_proportions(&[("C", 1)], &axis),
            Err(Error::UnknownCategory { .. })
        ));
    }

    #[test]
    fn top_k_breaks_ties_by_id() {
        let catalog = InterestCatalog::from_ids(&["a", "b", "c"]).unwrap();
        let v = InterestRatioVector::from_weights("p", &catalog, vec![0.5, 0.5, 0.0]).unwrap();
        assert_eq!(top_k_interests(&v, 1).unwrap()[0].0, "a");
        assert_eq!(top_k_interests(&v, 10).unwrap().len(), 3);
    }
}
