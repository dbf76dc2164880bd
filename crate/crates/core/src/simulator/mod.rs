//! Synthetic worlds with planted interest distributions.
//!
//! A world is a list of subgroups; every person of a subgroup carries the
//! subgroup's traits. Persons are virtual: in quota mode interest `i` of a
//! subgroup of size `n` is declared by the `round(n * p_i)` persons starting
//! at a seeded offset and wrapping around. Declarations of different interests
//! are independent: a conjunction is declared by `round(n * prod p_i)`
//! persons. Persons are never materialized.

pub mod presets;
mod scenario;
#[cfg(feature = "net")]
mod server;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audience::{AudienceCount, AudienceQuery, Clock, CountBackend, CountRequest, CountResponse};
use crate::catalog::{AxisName, InterestCatalog, PopulationSpec, Targeting};
use crate::error::{Error, Result};
use crate::metrics::{filter_interests, FilterOptions, FilterReport, InterestRatioVector};

pub use scenario::{
    DeclarationMode, ExpatGroup, GroupTraits, NativeGroup, PlantedScenario, DEFAULT_GROUP_SIZE,
};
#[cfg(feature = "net")]
pub use server::{serve, ServerHandle};

use scenario::{expat_shares, normalized_shares};

/// Largest subgroup the stochastic mode will scan person by person.
pub const STOCHASTIC_SIZE_LIMIT: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subgroup {
    pub label: String,
    pub traits: GroupTraits,
    pub size: u64,
    /// Probability that a person declares each interest.
    pub interests: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Declaration {
    quota: u64,
    offset: u64,
}

#[derive(Debug, Default, Clone)]
struct KnownValues {
    affinities: BTreeSet<String>,
    home_countries: BTreeSet<String>,
    expat_origins: BTreeSet<String>,
    locations: BTreeSet<String>,
    demographics: BTreeMap<AxisName, BTreeSet<String>>,
    interests: BTreeSet<String>,
}

/// Subgroups matching each non-interest targeting seen so far.
#[derive(Debug, Default)]
struct MatchCache(Mutex<HashMap<Targeting, Arc<Vec<usize>>>>);

impl Clone for MatchCache {
    fn clone(&self) -> Self {
        Self::default()
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    seed: u64,
    subgroups: Vec<Subgroup>,
    rounding: Option<u32>,
    floor: Option<u64>,
    mode: DeclarationMode,
    declarations: Vec<BTreeMap<String, Declaration>>,
    known: KnownValues,
    matches: MatchCache,
}

impl SyntheticWorld {
    pub fn new(
        seed: u64,
        subgroups: Vec<Subgroup>,
        rounding: Option<u32>,
        floor: Option<u64>,
        mode: DeclarationMode,
    ) -> Result<Self> {
        let mut known = KnownValues::default();
        let mut declarations = Vec::with_capacity(subgroups.len());
        for group in &subgroups {
            if group.size == 0 {
                return Err(Error::InvalidArgument(format!(
                    "subgroup {} has size 0",
                    group.label
                )));
            }
            if mode == DeclarationMode::Stochastic && group.size > STOCHASTIC_SIZE_LIMIT {
                return Err(Error::InvalidArgument(format!(
                    "subgroup {} is too large for stochastic mode",
                    group.label
                )));
            }
            let traits = &group.traits;
            known.affinities.extend(traits.affinity.clone());
            known.home_countries.extend(traits.home_country.clone());
            known.expat_origins.extend(traits.expat_origin.clone());
            known.locations.extend(traits.location.clone());
            for (axis, category) in &traits.demographics {
                known
                    .demographics
                    .entry(*axis)
                    .or_default()
                    .insert(category.clone());
            }
            let mut table = BTreeMap::new();
            for (interest, &p) in &group.interests {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!(
                        "subgroup {}: probability {p} for {interest} outside [0, 1]",
                        group.label
                    )));
                }
                known.interests.insert(interest.clone());
                let quota = ((group.size as f64) * p).round() as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, &group.label, interest));
                let offset = rng.random_range(0..group.size);
                table.insert(
                    interest.clone(),
                    Declaration {
                        quota: quota.min(group.size),
                        offset,
                    },
                );
            }
            declarations.push(table);
        }
        Ok(Self {
            seed,
            subgroups,
            rounding,
            floor,
            mode,
            declarations,
            known,
            matches: MatchCache::default(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn subgroups(&self) -> &[Subgroup] {
        &self.subgroups
    }

    pub fn rounding(&self) -> Option<u32> {
        self.rounding
    }

    pub fn floor(&self) -> Option<u64> {
        self.floor
    }

    pub fn total_population(&self) -> u64 {
        self.subgroups.iter().map(|g| g.size).sum()
    }

    /// Same world with different reporting options.
    pub fn with_reporting(mut self, rounding: Option<u32>, floor: Option<u64>) -> Self {
        self.rounding = rounding;
        self.floor = floor;
        self
    }

    fn check_known(&self, request: &CountRequest) -> Result<()> {
        fn check(set: &BTreeSet<String>, predicate: &str, value: &Option<String>) -> Result<()> {
            match value {
                Some(v) if !set.contains(v) => Err(Error::InvalidTargeting {
                    predicate: predicate.into(),
                    value: v.clone(),
                }),
                _ => Ok(()),
            }
        }
        let t = &request.targeting;
        check(&self.known.affinities, "ethnic_affinity", &t.ethnic_affinity)?;
        check(&self.known.home_countries, "home_country", &t.home_country)?;
        check(&self.known.expat_origins, "expat_origin", &t.expat_origin)?;
        for location in t.locations.iter().flatten() {
            check(&self.known.locations, "locations", &Some(location.clone()))?;
        }
        for (axis, category) in &t.demographics {
            let known = self.known.demographics.get(axis);
            if !known.is_some_and(|set| set.contains(category)) {
                return Err(Error::InvalidTargeting {
                    predicate: axis.to_string(),
                    value: category.clone(),
                });
            }
        }
        for interest in t.interests_required.iter().chain(request.interest.iter()) {
            check(&self.known.interests, "interest", &Some(interest.clone()))?;
        }
        Ok(())
    }

    /// Whether a subgroup's traits satisfy every non-interest predicate.
    pub fn group_matches(&self, group: usize, targeting: &Targeting) -> bool {
        matches_traits(&self.subgroups[group].traits, targeting)
    }

    fn matching_groups(&self, targeting: &Targeting) -> Arc<Vec<usize>> {
        let mut key = targeting.clone();
        key.interests_required.clear();
        let mut cache = self.matches.0.lock().expect("match cache poisoned");
        Arc::clone(cache.entry(key).or_insert_with_key(|key| {
            Arc::new(
                (0..self.subgroups.len())
                    .filter(|&g| self.group_matches(g, key))
                    .collect(),
            )
        }))
    }

    /// Ground-truth membership of one person in one interest.
    ///
    /// In quota mode this is the cyclic layout of a single interest; counts of
    /// conjunctions follow the independence rule instead.
    pub fn declares(&self, group: usize, interest: &str, person: u64) -> bool {
        let size = self.subgroups[group].size;
        match self.mode {
            DeclarationMode::Quota => self.declarations[group]
                .get(interest)
                .is_some_and(|d| (person + size - d.offset) % size < d.quota),
            DeclarationMode::Stochastic => {
                let p = self.subgroups[group]
                    .interests
                    .get(interest)
                    .copied()
                    .unwrap_or(0.0);
                let label = &self.subgroups[group].label;
                let u = splitmix64(mix(self.seed, label, interest) ^ person) as f64
                    / (u64::MAX as f64 + 1.0);
                u < p
            }
        }
    }

    fn group_count(&self, group: usize, interests: &BTreeSet<&str>) -> u64 {
        let size = self.subgroups[group].size;
        if interests.is_empty() {
            return size;
        }
        let table = &self.declarations[group];
        if interests.iter().any(|i| !table.contains_key(*i)) {
            return 0;
        }
        match self.mode {
            DeclarationMode::Quota => {
                if let [only] = interests.iter().collect::<Vec<_>>()[..] {
                    return table[*only].quota;
                }
                let p: f64 = interests
                    .iter()
                    .map(|i| table[*i].quota as f64 / size as f64)
                    .product();
                (size as f64 * p).round() as u64
            }
            DeclarationMode::Stochastic => (0..size)
                .filter(|&person| interests.iter().all(|i| self.declares(group, i, person)))
                .count() as u64,
        }
    }

    /// Exact number of matching persons, before rounding and flooring.
    pub fn raw_count(&self, request: &CountRequest) -> Result<u64> {
        request.targeting.validate()?;
        self.check_known(request)?;
        let interests: BTreeSet<&str> = request
            .targeting
            .interests_required
            .iter()
            .map(String::as_str)
            .chain(request.interest.as_deref())
            .collect();
        let total: u128 = self
            .matching_groups(&request.targeting)
            .iter()
            .map(|&g| self.group_count(g, &interests) as u128)
            .sum();
        Ok(u64::try_from(total).unwrap_or(u64::MAX))
    }

    /// Applies the world's rounding and floor to a raw count.
    pub fn report(&self, raw: u64) -> CountResponse {
        let rounded = match self.rounding {
            Some(digits) => round_significant(raw, digits),
            None => raw,
        };
        match self.floor {
            Some(floor) if rounded < floor => CountResponse {
                count: floor,
                clamped: true,
            },
            _ => CountResponse {
                count: rounded,
                clamped: false,
            },
        }
    }

    /// Expected (unsampled) count of persons matching `spec` and declaring
    /// `interest`, from the planted probabilities.
    ///
    /// Required interests are treated as independent of each other.
    pub fn expected_count(&self, targeting: &Targeting, interest: Option<&str>) -> f64 {
        let interests: BTreeSet<&str> = targeting
            .interests_required
            .iter()
            .map(String::as_str)
            .chain(interest)
            .collect();
        (0..self.subgroups.len())
            .filter(|&g| self.group_matches(g, targeting))
            .map(|g| {
                let group = &self.subgroups[g];
                let p: f64 = interests
                    .iter()
                    .map(|i| group.interests.get(*i).copied().unwrap_or(0.0))
                    .product();
                group.size as f64 * p
            })
            .sum()
    }

    /// Interest ratios computed from planted probabilities instead of counts.
    pub fn exact_ratios(
        &self,
        spec: &PopulationSpec,
        catalog: &InterestCatalog,
    ) -> Result<InterestRatioVector> {
        let expected: Vec<f64> = catalog
            .ids()
            .map(|id| self.expected_count(&spec.targeting, Some(id)))
            .collect();
        InterestRatioVector::from_weights(&spec.label, catalog, expected)
    }
}

impl CountBackend for SyntheticWorld {
    fn label(&self) -> &str {
        "sim"
    }

    fn count(&self, request: &CountRequest) -> Result<CountResponse> {
        Ok(self.report(self.raw_count(request)?))
    }
}

fn matches_traits(traits: &GroupTraits, t: &Targeting) -> bool {
    fn eq(want: &Option<String>, have: &Option<String>) -> bool {
        want.is_none() || want == have
    }
    eq(&t.ethnic_affinity, &traits.affinity)
        && eq(&t.home_country, &traits.home_country)
        && (t.expat_origin.is_none() || t.expat_origin == traits.expat_origin)
        && (!t.non_expat || traits.expat_origin.is_none())
        && t.locations.as_ref().is_none_or(|set| {
            traits
                .location
                .as_ref()
                .is_some_and(|loc| set.contains(loc))
        })
        && t
            .demographics
            .iter()
            .all(|(axis, category)| traits.demographics.get(axis) == Some(category))
}

/// Serves one query against a world, stamping it with the clock.
pub fn serve_count(
    world: &SyntheticWorld,
    query: &AudienceQuery,
    clock: &dyn Clock,
) -> Result<AudienceCount> {
    crate::audience::reach_estimate(world, query, clock)
}

/// Rounds half up to `digits` significant digits, in integer arithmetic.
pub fn round_significant(raw: u64, digits: u32) -> u64 {
    if raw == 0 || digits == 0 {
        return raw;
    }
    let width = raw.ilog10() + 1;
    if width <= digits {
        return raw;
    }
    let factor = 10u64.pow(width - digits);
    let rounded = (raw as u128 + factor as u128 / 2) / factor as u128 * factor as u128;
    u64::try_from(rounded).unwrap_or(u64::MAX)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |hash, &b| {
        (hash ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn mix(seed: u64, group: &str, interest: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(group.as_bytes()) ^ fnv1a(interest.as_bytes()).rotate_left(17)))
}

fn probabilities(size: u64, shares: &[f64], ids: &[String]) -> BTreeMap<String, f64> {
    ids.iter()
        .zip(shares)
        .map(|(id, share)| {
            // Snap to an integer count so quota declaration reproduces the share exactly.
            let count = (size as f64 * share).round();
            (id.clone(), count / size as f64)
        })
        .collect()
}

/// Builds the world for a planted scenario.
///
/// Every group declares on average one catalog interest per person, so its
/// declaration probabilities equal its planted shares (snapped to whole
/// persons).
pub fn generate_world(scenario: &PlantedScenario, seed: u64) -> Result<SyntheticWorld> {
    scenario.validate()?;
    let mut ids = scenario.interests.clone();
    ids.sort();
    ids.dedup();
    let native_shares: BTreeMap<&str, Vec<f64>> = scenario
        .natives
        .iter()
        .map(|n| (n.label.as_str(), normalized_shares(&ids, &n.shares)))
        .collect();

    let mut subgroups = Vec::with_capacity(scenario.natives.len() + scenario.expats.len());
    for native in &scenario.natives {
        let size = native.size.unwrap_or(DEFAULT_GROUP_SIZE);
        let mut interests = probabilities(size, &native_shares[native.label.as_str()], &ids);
        interests.extend(native.extra_interests.clone());
        subgroups.push(Subgroup {
            label: native.label.clone(),
            traits: native.traits.clone(),
            size,
            interests,
        });
    }
    for expat in &scenario.expats {
        let size = expat.size.unwrap_or(DEFAULT_GROUP_SIZE);
        let shares = expat_shares(
            &ids,
            expat,
            &native_shares[expat.destination.as_str()],
            &native_shares[expat.source.as_str()],
        )?;
        let mut interests = probabilities(size, &shares, &ids);
        interests.extend(expat.extra_interests.clone());
        subgroups.push(Subgroup {
            label: expat.label.clone(),
            traits: expat.traits.clone(),
            size,
            interests,
        });
    }
    SyntheticWorld::new(
        seed,
        subgroups,
        scenario.rounding,
        scenario.floor,
        scenario.mode,
    )
}

/// Ground-truth assimilation ratios from planted probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleAssimilation {
    pub filter: FilterReport,
    /// AR per kept interest.
    pub ratios: BTreeMap<String, f64>,
}

pub fn oracle_assimilation(
    world: &SyntheticWorld,
    expat: &PopulationSpec,
    dest: &PopulationSpec,
    source: &PopulationSpec,
    catalog: &InterestCatalog,
    percentile: f64,
) -> Result<OracleAssimilation> {
    let expat_ratios = world.exact_ratios(expat, catalog)?;
    let dest_ratios = world.exact_ratios(dest, catalog)?;
    let source_ratios = world.exact_ratios(source, catalog)?;
    let filter = filter_interests(
        &dest_ratios,
        &source_ratios,
        percentile,
        FilterOptions::default(),
    )?;
    let ratios = filter
        .kept
        .iter()
        .map(|id| {
            let idx = catalog.index_of(id).expect("kept ids come from the catalog");
            (id.clone(), expat_ratios.ratios[idx] / dest_ratios.ratios[idx])
        })
        .collect();
    Ok(OracleAssimilation { filter, ratios })
}
