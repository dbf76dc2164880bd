//! Planted scenarios: populations whose true assimilation ratios are known.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{AxisName, PopulationSpec};
use crate::error::{Error, Result};

/// Default number of persons per planted population (2^53).
///
/// Counts near this size keep integer rounding of planted shares below
/// 1e-13 relative error.
pub const DEFAULT_GROUP_SIZE: u64 = 1 << 53;

/// Ground-truth labels carried by every person of a subgroup.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupTraits {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affinity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_country: Option<String>,
    /// `None` means the group lives in its origin country.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expat_origin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub demographics: BTreeMap<AxisName, String>,
}

impl GroupTraits {
    /// The spec that selects exactly the persons carrying these traits
    /// (given no other group shares them).
    pub fn to_spec(&self, label: &str) -> PopulationSpec {
        let mut spec = PopulationSpec::new(label);
        spec.targeting.ethnic_affinity = self.affinity.clone();
        spec.targeting.home_country = self.home_country.clone();
        match &self.expat_origin {
            Some(origin) => spec.targeting.expat_origin = Some(origin.clone()),
            None => spec.targeting.non_expat = true,
        }
        if let Some(location) = &self.location {
            spec.targeting.locations = Some([location.clone()].into_iter().collect());
        }
        spec.targeting.demographics = self.demographics.clone();
        spec
    }
}

/// A population with explicitly given interest shares (destination or source).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NativeGroup {
    pub label: String,
    #[serde(flatten)]
    pub traits: GroupTraits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<u64>,
    /// Share of this population's interest declarations per catalog interest.
    pub shares: BTreeMap<String, f64>,
    /// Non-catalog interests (e.g. an origin-country page) and their declaration probability.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra_interests: BTreeMap<String, f64>,
}

/// A migrant population planted relative to a destination and a source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpatGroup {
    pub label: String,
    #[serde(flatten)]
    pub traits: GroupTraits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<u64>,
    /// Label of the destination [`NativeGroup`] the targets refer to.
    pub destination: String,
    /// Label of the source [`NativeGroup`]; its shares spread the leftover mass.
    pub source: String,
    /// Planted natural-log assimilation ratio per interest.
    pub log_ar: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra_interests: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclarationMode {
    /// Exactly `round(size * p)` persons declare each interest.
    #[default]
    Quota,
    /// Independent per-person coin flips; only for small worlds.
    Stochastic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedScenario {
    #[serde(default)]
    pub name: String,
    /// Catalog interest ids, in any order.
    pub interests: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounding: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<u64>,
    #[serde(default)]
    pub mode: DeclarationMode,
    #[serde(default, rename = "native")]
    pub natives: Vec<NativeGroup>,
    #[serde(default, rename = "expat")]
    pub expats: Vec<ExpatGroup>,
}

impl PlantedScenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("scenario: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(format!("scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn native(&self, label: &str) -> Option<&NativeGroup> {
        self.natives.iter().find(|n| n.label == label)
    }

    pub fn validate(&self) -> Result<()> {
        if self.interests.is_empty() {
            return Err(Error::InvalidArgument("scenario has no interests".into()));
        }
        let mut labels = std::collections::BTreeSet::new();
        for label in self
            .natives
            .iter()
            .map(|n| &n.label)
            .chain(self.expats.iter().map(|e| &e.label))
        {
            if !labels.insert(label) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate group label {label:?}"
                )));
            }
        }
        for native in &self.natives {
            for (id, share) in &native.shares {
                if !self.interests.contains(id) {
                    return Err(Error::UnknownInterest(id.clone()));
                }
                if !(share.is_finite() && *share >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "{}: share of {id} must be finite and nonnegative",
                        native.label
                    )));
                }
            }
            if native.shares.values().sum::<f64>() <= 0.0 {
                return Err(Error::AllZero(native.label.clone()));
            }
        }
        for expat in &self.expats {
            for label in [&expat.destination, &expat.source] {
                if self.native(label).is_none() {
                    return Err(Error::InvalidArgument(format!(
                        "{}: unknown native group {label:?}",
                        expat.label
                    )));
                }
            }
            for (id, log_ar) in &expat.log_ar {
                if !self.interests.contains(id) {
                    return Err(Error::UnknownInterest(id.clone()));
                }
                if !log_ar.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "{}: planted log AR for {id} is not finite",
                        expat.label
                    )));
                }
            }
        }
        for (group, extra) in self
            .natives
            .iter()
            .map(|n| (&n.label, &n.extra_interests))
            .chain(self.expats.iter().map(|e| (&e.label, &e.extra_interests)))
        {
            for (id, p) in extra {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidArgument(format!(
                        "{group}: probability of {id} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Normalizes a share map over `ids`, treating missing entries as zero.
pub(crate) fn normalized_shares(ids: &[String], shares: &BTreeMap<String, f64>) -> Vec<f64> {
    let raw: Vec<f64> = ids
        .iter()
        .map(|id| shares.get(id).copied().unwrap_or(0.0))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|s| s / total).collect()
}

/// Interest shares an expat group must have to realize its planted ratios.
///
/// Targeted interests get `exp(log_ar) * destination share`; the leftover
/// mass is spread over untargeted interests in proportion to the source
/// shares (destination shares if the source has none there, else uniformly).
pub(crate) fn expat_shares(
    ids: &[String],
    expat: &ExpatGroup,
    destination: &[f64],
    source: &[f64],
) -> Result<Vec<f64>> {
    let mut shares = vec![0.0; ids.len()];
    let mut targeted_mass = 0.0;
    let mut untargeted = Vec::new();
    for (idx, id) in ids.iter().enumerate() {
        match expat.log_ar.get(id) {
            Some(log_ar) => {
                let share = log_ar.exp() * destination[idx];
                if share > 1.0 {
                    return Err(Error::InfeasibleScenario {
                        population: expat.label.clone(),
                        interest: id.clone(),
                        required: share,
                    });
                }
                shares[idx] = share;
                targeted_mass += share;
            }
            None => untargeted.push(idx),
        }
    }
    let leftover = 1.0 - targeted_mass;
    if leftover < -1e-12 || (untargeted.is_empty() && leftover.abs() > 1e-9) {
        return Err(Error::InfeasibleScenario {
            population: expat.label.clone(),
            interest: "(all targeted interests)".into(),
            required: targeted_mass,
        });
    }
    if !untargeted.is_empty() {
        let leftover = leftover.max(0.0);
        let weights: Vec<f64> = {
            let from_source: Vec<f64> = untargeted.iter().map(|&i| source[i]).collect();
            if from_source.iter().sum::<f64>() > 0.0 {
                from_source
            } else {
                let from_dest: Vec<f64> = untargeted.iter().map(|&i| destination[i]).collect();
                if from_dest.iter().sum::<f64>() > 0.0 {
                    from_dest
                } else {
                    vec![1.0; untargeted.len()]
                }
            }
        };
        let total: f64 = weights.iter().sum();
        for (&idx, weight) in untargeted.iter().zip(weights) {
            shares[idx] = leftover * weight / total;
        }
    }
    Ok(shares)
}
