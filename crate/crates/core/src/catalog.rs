//! Populations, demographic axes and the musical-interest catalog.
//!
//! Everything here is an immutable value once built. Queries and metrics
//! index interest vectors by catalog position, so the catalog order is part
//! of the contract: interests are always sorted by id.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default minimum worldwide audience for a genre to enter the catalog.
pub const DEFAULT_FLOOR: u64 = 100_000;

/// Lowercase, hyphen-separated id derived from a display name.
pub fn slugify(name: &str) -> String {
    let mut slug = String::with_capacity(name.len());
    let mut pending_dash = false;
    for ch in name.chars() {
        if ch.is_alphanumeric() {
            if pending_dash && !slug.is_empty() {
                slug.push('-');
            }
            pending_dash = false;
            slug.extend(ch.to_lowercase());
        } else {
            pending_dash = true;
        }
    }
    slug
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interest {
    pub id: String,
    pub name: String,
    pub worldwide_audience: u64,
}

/// The interest set over which every ratio vector is index-aligned.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterestCatalog {
    interests: Vec<Interest>,
    floor: u64,
}

/// Result of [`build_catalog`]: the catalog plus what the floor removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatalogBuild {
    pub catalog: InterestCatalog,
    pub dropped: Vec<Interest>,
}

/// Builds a catalog from raw `(name, worldwide_audience)` pairs.
///
/// Names are slugified into ids; duplicate ids keep the entry with the
/// largest audience. Entries below `floor` are dropped and reported.
pub fn build_catalog<S: AsRef<str>>(raw: &[(S, u64)], floor: u64) -> Result<CatalogBuild> {
    if raw.is_empty() {
        return Err(Error::InvalidArgument("raw interest list is empty".into()));
    }
    let mut by_id: BTreeMap<String, Interest> = BTreeMap::new();
    for (name, audience) in raw {
        let name = name.as_ref().trim();
        let id = slugify(name);
        if id.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "interest name {name:?} has no alphanumeric characters"
            )));
        }
        let candidate = Interest {
            id: id.clone(),
            name: name.to_string(),
            worldwide_audience: *audience,
        };
        match by_id.get(&id) {
            // Ties keep the lexicographically smaller name so input order never matters.
            Some(existing)
                if existing.worldwide_audience > *audience
                    || (existing.worldwide_audience == *audience
                        && existing.name <= candidate.name) => {}
            _ => {
                by_id.insert(id, candidate);
            }
        }
    }
    let (kept, dropped): (Vec<_>, Vec<_>) = by_id
        .into_values()
        .partition(|interest| interest.worldwide_audience >= floor);
    if kept.is_empty() {
        return Err(Error::EmptyCatalog {
            floor,
            dropped: dropped.len(),
        });
    }
    Ok(CatalogBuild {
        catalog: InterestCatalog {
            interests: kept,
            floor,
        },
        dropped,
    })
}

impl InterestCatalog {
    /// Catalog over already-identified interests, floor 0.
    pub fn from_interests(interests: impl IntoIterator<Item = Interest>) -> Result<Self> {
        let mut interests: Vec<Interest> = interests.into_iter().collect();
        interests.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(pair) = interests.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidArgument(format!(
                "duplicate interest id {:?}",
                pair[0].id
            )));
        }
        if interests.is_empty() {
            return Err(Error::EmptyCatalog {
                floor: 0,
                dropped: 0,
            });
        }
        Ok(Self {
            interests,
            floor: 0,
        })
    }

    /// Convenience for tests and presets: ids double as names.
    pub fn from_ids<S: AsRef<str>>(ids: &[S]) -> Result<Self> {
        Self::from_interests(ids.iter().map(|id| Interest {
            id: id.as_ref().to_string(),
            name: id.as_ref().to_string(),
            worldwide_audience: 0,
        }))
    }

    /// Reads a `name,worldwide_audience` CSV (header row required) and
    /// applies the floor.
    pub fn load_csv(path: &Path, floor: u64) -> Result<CatalogBuild> {
        #[derive(Deserialize)]
        struct Row {
            name: String,
            worldwide_audience: u64,
        }
        let mut reader = csv::Reader::from_path(path)?;
        let mut raw = Vec::new();
        for row in reader.deserialize() {
            let row: Row = row?;
            raw.push((row.name, row.worldwide_audience));
        }
        build_catalog(&raw, floor)
    }

    pub fn interests(&self) -> &[Interest] {
        &self.interests
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.interests.iter().map(|i| i.id.as_str())
    }

    pub fn floor(&self) -> u64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.interests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interests.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.interests
            .binary_search_by(|probe| probe.id.as_str().cmp(id))
            .ok()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index_of(id).is_some()
    }

    /// Sub-catalog restricted to `ids`; unknown ids are an error.
    pub fn restrict<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self> {
        let mut interests = Vec::with_capacity(ids.len());
        for id in ids {
            let idx = self
                .index_of(id.as_ref())
                .ok_or_else(|| Error::UnknownInterest(id.as_ref().to_string()))?;
            interests.push(self.interests[idx].clone());
        }
        let mut restricted = Self::from_interests(interests)?;
        restricted.floor = self.floor;
        Ok(restricted)
    }
}

/// The demographic dimensions the ad platform can target on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisName {
    Gender,
    Age,
    Education,
    Language,
    Region,
}

impl AxisName {
    pub const ALL: [AxisName; 5] = [
        AxisName::Gender,
        AxisName::Age,
        AxisName::Education,
        AxisName::Language,
        AxisName::Region,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::Gender => "gender",
            AxisName::Age => "age",
            AxisName::Education => "education",
            AxisName::Language => "language",
            AxisName::Region => "region",
        }
    }

    /// Heading used in regression tables.
    pub fn title(self) -> &'static str {
        match self {
            AxisName::Gender => "Gender",
            AxisName::Age => "Age",
            AxisName::Education => "Education",
            AxisName::Language => "Language",
            AxisName::Region => "Region",
        }
    }
}

impl fmt::Display for AxisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AxisName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AxisName::ALL
            .into_iter()
            .find(|axis| axis.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown demographic axis {s:?}")))
    }
}

/// One demographic dimension with its ordered category labels.
///
/// `ordinal` is informational; regression treats every axis as categorical.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicAxis {
    pub name: AxisName,
    pub categories: Vec<String>,
    #[serde(default)]
    pub ordinal: bool,
    /// Omitted level in dummy coding; the first category when unset.
    #[serde(default)]
    pub reference: Option<String>,
}

impl DemographicAxis {
    pub fn new<S: Into<String>>(
        name: AxisName,
        categories: impl IntoIterator<Item = S>,
        ordinal: bool,
        reference: Option<&str>,
    ) -> Result<Self> {
        let axis = Self {
            name,
            categories: categories.into_iter().map(Into::into).collect(),
            ordinal,
            reference: reference.map(str::to_string),
        };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "axis {} has no categories",
                self.name
            )));
        }
        let distinct: BTreeSet<&String> = self.categories.iter().collect();
        if distinct.len() != self.categories.len() {
            return Err(Error::InvalidArgument(format!(
                "axis {} has duplicate categories",
                self.name
            )));
        }
        if let Some(reference) = &self.reference {
            if !self.categories.contains(reference) {
                return Err(Error::UnknownCategory {
                    axis: self.name.to_string(),
                    category: reference.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn reference_level(&self) -> &str {
        self.reference.as_deref().unwrap_or(&self.categories[0])
    }

    pub fn position(&self, category: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == category)
    }

    /// The five axes used in the regression tables, with their reference levels.
    pub fn standard_axes() -> Vec<DemographicAxis> {
        let axis = |name, cats: &[&str], ordinal, reference: &str| DemographicAxis {
            name,
            categories: cats.iter().map(|c| c.to_string()).collect(),
            ordinal,
            reference: Some(reference.to_string()),
        };
        vec![
            axis(AxisName::Gender, &["Female", "Male"], false, "Female"),
            axis(
                AxisName::Education,
                &[
                    "College degree+",
                    "High school graduate",
                    "Less than high school graduate",
                    "Two-year degree, Some college",
                ],
                true,
                "College degree+",
            ),
            axis(
                AxisName::Age,
                &["13-18", "19-28", "29-38", "39-48", "49-65"],
                true,
                "13-18",
            ),
            axis(
                AxisName::Language,
                &["Bilingual", "English", "Spanish"],
                false,
                "Bilingual",
            ),
            axis(
                AxisName::Region,
                &["Midwest", "Northeast", "South", "West"],
                false,
                "Midwest",
            ),
        ]
    }
}

/// Conjunctive targeting predicate, without a display label.
///
/// Two specs with equal targeting address the same audience.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Targeting {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ethnic_affinity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_country: Option<String>,
    /// Set means "lives outside this origin country".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expat_origin: Option<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub non_expat: bool,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub interests_required: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locations: Option<BTreeSet<String>>,
    /// At most one category per axis; language lives here too.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub demographics: BTreeMap<AxisName, String>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl Targeting {
    pub fn validate(&self) -> Result<()> {
        if self.non_expat {
            if let Some(origin) = &self.expat_origin {
                return Err(Error::Contradiction {
                    predicate: "expat status".into(),
                    left: format!("expat from {origin}"),
                    right: "non-expat".into(),
                });
            }
        }
        if matches!(&self.locations, Some(set) if set.is_empty()) {
            return Err(Error::Contradiction {
                predicate: "locations".into(),
                left: "empty location set".into(),
                right: "any residence".into(),
            });
        }
        Ok(())
    }

    /// Conjunction of two predicates.
    pub fn intersect(&self, other: &Targeting) -> Result<Targeting> {
        fn merge(
            predicate: &str,
            a: &Option<String>,
            b: &Option<String>,
        ) -> Result<Option<String>> {
            match (a, b) {
                (Some(x), Some(y)) if x != y => Err(Error::Contradiction {
                    predicate: predicate.into(),
                    left: x.clone(),
                    right: y.clone(),
                }),
                (Some(x), _) | (None, Some(x)) => Ok(Some(x.clone())),
                (None, None) => Ok(None),
            }
        }
        let locations = match (&self.locations, &other.locations) {
            (Some(a), Some(b)) => {
                let both: BTreeSet<String> = a.intersection(b).cloned().collect();
                if both.is_empty() {
                    return Err(Error::Contradiction {
                        predicate: "locations".into(),
                        left: a.iter().cloned().collect::<Vec<_>>().join("|"),
                        right: b.iter().cloned().collect::<Vec<_>>().join("|"),
                    });
                }
                Some(both)
            }
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        };
        let mut demographics = self.demographics.clone();
        for (axis, category) in &other.demographics {
            match demographics.get(axis) {
                Some(existing) if existing != category => {
                    return Err(Error::Contradiction {
                        predicate: axis.to_string(),
                        left: existing.clone(),
                        right: category.clone(),
                    })
                }
                _ => {
                    demographics.insert(*axis, category.clone());
                }
            }
        }
        let merged = Targeting {
            ethnic_affinity: merge(
                "ethnic affinity",
                &self.ethnic_affinity,
                &other.ethnic_affinity,
            )?,
            home_country: merge("home country", &self.home_country, &other.home_country)?,
            expat_origin: merge("expat origin", &self.expat_origin, &other.expat_origin)?,
            non_expat: self.non_expat || other.non_expat,
            interests_required: self
                .interests_required
                .union(&other.interests_required)
                .cloned()
                .collect(),
            locations,
            demographics,
        };
        merged.validate()?;
        Ok(merged)
    }
}

/// A labelled targeting predicate: one population of the study.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub label: String,
    #[serde(flatten)]
    pub targeting: Targeting,
}

impl PopulationSpec {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            targeting: Targeting::default(),
        }
    }

    pub fn affinity(mut self, affinity: impl Into<String>) -> Self {
        self.targeting.ethnic_affinity = Some(affinity.into());
        self
    }

    pub fn home_country(mut self, country: impl Into<String>) -> Self {
        self.targeting.home_country = Some(country.into());
        self
    }

    pub fn expat_from(mut self, origin: impl Into<String>) -> Self {
        self.targeting.expat_origin = Some(origin.into());
        self.targeting.non_expat = false;
        self
    }

    pub fn non_expat(mut self) -> Self {
        self.targeting.non_expat = true;
        self.targeting.expat_origin = None;
        self
    }

    pub fn language(mut self, language: impl Into<String>) -> Self {
        self.targeting
            .demographics
            .insert(AxisName::Language, language.into());
        self
    }

    pub fn require_interest(mut self, interest_id: impl Into<String>) -> Self {
        self.targeting.interests_required.insert(interest_id.into());
        self
    }

    pub fn locations<S: Into<String>>(mut self, locations: impl IntoIterator<Item = S>) -> Self {
        self.targeting.locations = Some(locations.into_iter().map(Into::into).collect());
        self
    }

    pub fn select(mut self, axis: AxisName, category: impl Into<String>) -> Self {
        self.targeting.demographics.insert(axis, category.into());
        self
    }

    pub fn language_label(&self) -> Option<&str> {
        self.targeting
            .demographics
            .get(&AxisName::Language)
            .map(String::as_str)
    }
}

/// Conjunction of two populations, labelled `"a ∩ b"`.
pub fn intersect_specs(a: &PopulationSpec, b: &PopulationSpec) -> Result<PopulationSpec> {
    Ok(PopulationSpec {
        label: format!("{} ∩ {}", a.label, b.label),
        targeting: a.targeting.intersect(&b.targeting)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyKind {
    InterestInOrigin,
    SpeaksOriginLanguage,
    OriginCommunities,
}

impl ProxyKind {
    pub const ALL: [ProxyKind; 3] = [
        ProxyKind::InterestInOrigin,
        ProxyKind::SpeaksOriginLanguage,
        ProxyKind::OriginCommunities,
    ];
}

/// Observable stand-in for later-generation status.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationProxy {
    pub kind: ProxyKind,
    /// Overrides the study's community list for `origin_communities`.
    #[serde(default)]
    pub communities: Option<Vec<String>>,
}

impl GenerationProxy {
    pub fn new(kind: ProxyKind) -> Self {
        Self {
            kind,
            communities: None,
        }
    }
}

/// Labels and parameters that turn generation proxies into concrete specs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyConfig {
    /// Prefix of every proxy label, e.g. "Mexican Americans".
    pub group_label: String,
    pub affinity: String,
    /// Country the later generation lives in.
    pub home_country: String,
    /// Display name of the origin interest, e.g. "Mexico".
    pub origin_interest: String,
    pub origin_language: String,
    #[serde(default)]
    pub community_locations: Vec<String>,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self {
            group_label: "Mexican Americans".into(),
            affinity: "hispanic".into(),
            home_country: "US".into(),
            origin_interest: "Mexico".into(),
            origin_language: "Spanish".into(),
            community_locations: Vec::new(),
        }
    }
}

/// Maps a generation proxy to the population spec it stands for.
pub fn resolve_proxy(proxy: &GenerationProxy, config: &ProxyConfig) -> Result<PopulationSpec> {
    let base = |suffix: &str| {
        PopulationSpec::new(format!("{} ({suffix})", config.group_label))
            .affinity(&config.affinity)
            .home_country(&config.home_country)
            .non_expat()
    };
    match proxy.kind {
        ProxyKind::InterestInOrigin => Ok(base(&config.origin_interest)
            .require_interest(slugify(&config.origin_interest))),
        ProxyKind::SpeaksOriginLanguage => {
            Ok(base(&config.origin_language).language(&config.origin_language))
        }
        ProxyKind::OriginCommunities => {
            let cities = proxy
                .communities
                .as_ref()
                .unwrap_or(&config.community_locations);
            if cities.is_empty() {
                return Err(Error::MissingConfig(
                    "origin_communities proxy needs a non-empty community location list".into(),
                ));
            }
            Ok(base("communities").locations(cities.iter().cloned()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_lowercase_and_hyphenated() {
        assert_eq!(slugify("Southern hip hop"), "southern-hip-hop");
        assert_eq!(slugify("  Rock & Roll!! "), "rock-roll");
        assert_eq!(slugify("Música norteña"), "música-norteña");
    }

    #[test]
    fn floor_drops_small_genres() {
        let built = build_catalog(&[("rock", 5_000_000), ("obscure-genre", 50_000)], 100_000)
            .unwrap();
        assert_eq!(built.catalog.len(), 1);
        assert_eq!(built.catalog.interests()[0].id, "rock");
        assert_eq!(built.dropped.len(), 1);
    }

    #[test]
    fn zero_floor_keeps_deduplicated_input() {
        let raw = [("Rock", 10), ("rock", 30), ("Jazz", 0), ("Blues", 5)];
        let built = build_catalog(&raw, 0).unwrap();
        assert_eq!(built.catalog.len(), 3);
        let rock = &built.catalog.interests()[built.catalog.index_of("rock").unwrap()];
        assert_eq!(rock.worldwide_audience, 30);
        assert_eq!(rock.name, "rock");
    }

    #[test]
    fn nothing_above_floor_is_an_error() {
        let err = build_catalog(&[("a", 1), ("b", 2)], 10).unwrap_err();
        assert!(matches!(err, Error::EmptyCatalog { dropped: 2, .. }));
    }

    #[test]
    fn eight_hundred_genres_with_59_small_keep_741() {
        let raw: Vec<(String, u64)> = (0..800)
            .map(|i| {
                let audience = if i % 13 == 0 && i / 13 < 59 {
                    99_999 - i as u64
                } else {
                    100_000 + 17 * i as u64
                };
                (format!("genre {i:03}"), audience)
            })
            .collect();
        let expected = raw.iter().filter(|(_, a)| *a >= 100_000).count();
        assert_eq!(expected, 741);
        let built = build_catalog(&raw, DEFAULT_FLOOR).unwrap();
        assert_eq!(built.catalog.len(), 741);
        assert_eq!(built.dropped.len(), 59);
    }

    #[test]
    fn interest_proxy_requires_origin_interest() {
        let spec = resolve_proxy(
            &GenerationProxy::new(ProxyKind::InterestInOrigin),
            &ProxyConfig::default(),
        )
        .unwrap();
        assert_eq!(spec.label, "Mexican Americans (Mexico)");
        assert!(spec.targeting.interests_required.contains("mexico"));
        assert!(spec.targeting.non_expat);
    }

    #[test]
    fn language_proxy_sets_language() {
        let spec = resolve_proxy(
            &GenerationProxy::new(ProxyKind::SpeaksOriginLanguage),
            &ProxyConfig::default(),
        )
        .unwrap();
        assert_eq!(spec.language_label(), Some("Spanish"));
        assert_eq!(spec.label, "Mexican Americans (Spanish)");
    }

    #[test]
    fn community_proxy_without_cities_is_missing_config() {
        let err = resolve_proxy(
            &GenerationProxy::new(ProxyKind::OriginCommunities),
            &ProxyConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingConfig(_)));
        let proxy = GenerationProxy {
            kind: ProxyKind::OriginCommunities,
            communities: Some(vec!["los-angeles".into()]),
        };
        let spec = resolve_proxy(&proxy, &ProxyConfig::default()).unwrap();
        assert_eq!(spec.label, "Mexican Americans (communities)");
    }

    #[test]
    fn intersecting_proxies_combines_predicates() {
        let config = ProxyConfig {
            community_locations: vec!["los-angeles".into(), "houston".into()],
            ..ProxyConfig::default()
        };
        let interest =
            resolve_proxy(&GenerationProxy::new(ProxyKind::InterestInOrigin), &config).unwrap();
        let communities =
            resolve_proxy(&GenerationProxy::new(ProxyKind::OriginCommunities), &config).unwrap();
        let both = intersect_specs(&interest, &communities).unwrap();
        assert!(both.targeting.interests_required.contains("mexico"));
        assert_eq!(both.targeting.locations.as_ref().unwrap().len(), 2);
        assert_eq!(
            both.label,
            "Mexican Americans (Mexico) ∩ Mexican Americans (communities)"
        );
    }

    #[test]
    fn self_intersection_is_identity() {
        let a = PopulationSpec::new("a").affinity("x").language("Spanish");
        assert_eq!(intersect_specs(&a, &a).unwrap().targeting, a.targeting);
    }

    #[test]
    fn conflicting_language_is_a_contradiction() {
        let a = PopulationSpec::new("a").language("Spanish");
        let b = PopulationSpec::new("b").language("English");
        assert!(matches!(
            intersect_specs(&a, &b),
            Err(Error::Contradiction { .. })
        ));
        let expat = PopulationSpec::new("c").expat_from("MX");
        let native = PopulationSpec::new("d").non_expat();
        assert!(intersect_specs(&expat, &native).is_err());
    }

    #[test]
    fn standard_axes_have_expected_shapes() {
        let sizes: Vec<usize> = DemographicAxis::standard_axes()
            .iter()
            .map(|a| a.categories.len())
            .collect();
        assert_eq!(sizes, vec![2, 4, 5, 3, 4]);
        for axis in DemographicAxis::standard_axes() {
            axis.validate().unwrap();
        }
    }
}
