//! Ready-made planted scenarios.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::catalog::{AxisName, DemographicAxis};

use super::scenario::{DeclarationMode, ExpatGroup, GroupTraits, NativeGroup, PlantedScenario};

fn native(label: &str, country: &str, affinity: Option<&str>, shares: BTreeMap<String, f64>) -> NativeGroup {
    NativeGroup {
        label: label.into(),
        traits: GroupTraits {
            affinity: affinity.map(str::to_string),
            home_country: Some(country.into()),
            ..GroupTraits::default()
        },
        size: None,
        shares,
        extra_interests: BTreeMap::new(),
    }
}

fn genre_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("genre-{i:03}")).collect()
}

/// Mass-`mass` weights proportional to `raw`.
fn scaled(raw: &[f64], mass: f64) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| mass * w / total).collect()
}

/// Planted AR = 1 on every interest: expats copy the destination exactly.
pub fn identity(num_interests: usize, seed: u64) -> PlantedScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = genre_ids(num_interests);
    let dest: Vec<f64> = (0..num_interests).map(|_| rng.random_range(0.5..2.0)).collect();
    let source: Vec<f64> = (0..num_interests).map(|_| rng.random_range(0.5..2.0)).collect();
    let shares = |w: &[f64]| ids.iter().cloned().zip(scaled(w, 1.0)).collect();
    PlantedScenario {
        name: "identity".into(),
        interests: ids.clone(),
        rounding: None,
        floor: None,
        mode: DeclarationMode::Quota,
        natives: vec![
            native("Destination natives", "US", None, shares(&dest)),
            native("Source natives", "MX", None, shares(&source)),
        ],
        expats: vec![ExpatGroup {
            label: "Expats".into(),
            traits: GroupTraits {
                home_country: Some("US".into()),
                expat_origin: Some("MX".into()),
                ..GroupTraits::default()
            },
            size: None,
            destination: "Destination natives".into(),
            source: "Source natives".into(),
            log_ar: ids.iter().map(|id| (id.clone(), 0.0)).collect(),
            extra_interests: BTreeMap::new(),
        }],
    }
}

/// One destination, one source and one expat group over `num_interests`
/// interests (at least 3).
///
/// About half the interests lean towards the destination and carry a
/// planted log AR drawn from U(-0.6, 0.4); the rest lean towards the source
/// and absorb the leftover expat mass.
pub fn random_planted(num_interests: usize, seed: u64) -> PlantedScenario {
    let n = num_interests.max(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = genre_ids(n);
    let leaning = (n / 2).max(2).min(n - 1);
    let dest_raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut dest = scaled(&dest_raw[..leaning], 0.5);
    dest.extend(scaled(&dest_raw[leaning..], 0.5));
    let jitter: Vec<f64> = (0..n)
        .map(|i| dest[i] * rng.random_range(0.8..1.2))
        .collect();
    let mut source = scaled(&jitter[..leaning], 0.15);
    source.extend(scaled(&jitter[leaning..], 0.85));
    let log_ar = ids[..leaning]
        .iter()
        .map(|id| (id.clone(), rng.random_range(-0.6..0.4)))
        .collect();
    let to_map = |w: &[f64]| ids.iter().cloned().zip(w.iter().copied()).collect();
    PlantedScenario {
        name: format!("random-{n}-{seed}"),
        interests: ids.clone(),
        rounding: None,
        floor: None,
        mode: DeclarationMode::Quota,
        natives: vec![
            native("Destination natives", "US", None, to_map(&dest)),
            native("Source natives", "MX", None, to_map(&source)),
        ],
        expats: vec![ExpatGroup {
            label: "Expats".into(),
            traits: GroupTraits {
                home_country: Some("US".into()),
                expat_origin: Some("MX".into()),
                ..GroupTraits::default()
            },
            size: None,
            destination: "Destination natives".into(),
            source: "Source natives".into(),
            log_ar,
            extra_interests: BTreeMap::new(),
        }],
    }
}

/// Origin countries planted with high destination matching.
pub const HIGH_BLOC: [&str; 4] = ["CA", "IN", "MX", "PH"];
/// Origin countries planted with low destination matching.
pub const LOW_BLOC: [&str; 5] = ["CN", "SV", "GT", "KR", "VN"];

pub fn bloc_labels(origin: &str) -> (String, String) {
    (
        format!("Immigrants from {origin}"),
        format!("Natives of {origin}"),
    )
}

/// Several immigrant groups in one destination, split into a high- and a
/// low-assimilation bloc (median log AR near -0.1 and -1.2).
pub fn blocs(num_interests: usize, seed: u64) -> PlantedScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let ids = genre_ids(num_interests);
    let dest_raw: Vec<f64> = (0..num_interests).map(|_| noise.sample(&mut rng)).map(f64::exp).collect();
    let dest = scaled(&dest_raw, 1.0);
    let mut natives = vec![native(
        "US natives",
        "US",
        None,
        ids.iter().cloned().zip(dest.iter().copied()).collect(),
    )];
    let mut expats = Vec::new();
    for (origin, centre) in HIGH_BLOC
        .iter()
        .map(|o| (o, -0.1))
        .chain(LOW_BLOC.iter().map(|o| (o, -1.2)))
    {
        let (expat_label, native_label) = bloc_labels(origin);
        let source_raw: Vec<f64> = dest
            .iter()
            .map(|d| d * (noise.sample(&mut rng)).exp())
            .collect();
        let source = scaled(&source_raw, 1.0);
        let log_ar = ids
            .iter()
            .enumerate()
            .filter(|&(i, _)| dest[i] > source[i])
            .map(|(_, id)| (id.clone(), centre + 0.3 * noise.sample(&mut rng)))
            .collect();
        natives.push(native(
            &native_label,
            origin,
            None,
            ids.iter().cloned().zip(source).collect(),
        ));
        expats.push(ExpatGroup {
            label: expat_label,
            traits: GroupTraits {
                home_country: Some("US".into()),
                expat_origin: Some(origin.to_string()),
                ..GroupTraits::default()
            },
            size: None,
            destination: "US natives".into(),
            source: native_label,
            log_ar,
            extra_interests: BTreeMap::new(),
        });
    }
    PlantedScenario {
        name: "blocs".into(),
        interests: ids,
        rounding: None,
        floor: None,
        mode: DeclarationMode::Quota,
        natives,
        expats,
    }
}

/// Planted additive effect of each non-reference category on log AR
/// relative to Anglos, in the study preset.
pub fn study_effects() -> BTreeMap<(AxisName, &'static str), f64> {
    [
        ((AxisName::Gender, "Male"), -0.136),
        ((AxisName::Education, "High school graduate"), 0.0),
        ((AxisName::Education, "Less than high school graduate"), -0.19),
        ((AxisName::Education, "Two-year degree, Some college"), -0.095),
        ((AxisName::Age, "19-28"), 0.584),
        ((AxisName::Age, "29-38"), 0.498),
        ((AxisName::Age, "39-48"), 0.439),
        ((AxisName::Age, "49-65"), 0.365),
        ((AxisName::Language, "English"), 0.232),
        ((AxisName::Language, "Spanish"), -0.522),
        ((AxisName::Region, "Northeast"), -0.168),
        ((AxisName::Region, "South"), 0.253),
        ((AxisName::Region, "West"), 0.184),
    ]
    .into_iter()
    .collect()
}

pub const STUDY_INTERCEPT: f64 = -0.75;
pub const STUDY_LATER_GENERATION_EFFECT: f64 = -0.461;
pub const STUDY_NOISE_SD: f64 = 0.1;

const ANGLO_GENRES: [&str; 20] = [
    "Alternative rock",
    "Americana",
    "Bluegrass",
    "Blues",
    "Classic rock",
    "Country",
    "Emo",
    "Folk",
    "Grunge",
    "Hard rock",
    "Heavy metal",
    "Indie rock",
    "Jazz",
    "New wave",
    "Pop rock",
    "Progressive rock",
    "Punk rock",
    "Rock and roll",
    "Soft rock",
    "Soul",
];
const HIP_HOP_GENRES: [&str; 5] = [
    "Gangsta rap",
    "Midwest hip hop",
    "Rhythm and blues",
    "Southern hip hop",
    "Trap music",
];
const MEXICAN_GENRES: [&str; 20] = [
    "Bachata",
    "Banda",
    "Bolero",
    "Corridos",
    "Cumbia",
    "Duranguense",
    "Grupero",
    "Huapango",
    "Latin pop",
    "Latin rock",
    "Mariachi",
    "Merengue",
    "Norteño",
    "Ranchera",
    "Reggaeton",
    "Regional Mexican",
    "Salsa",
    "Son jarocho",
    "Tejano",
    "Trova",
];

/// `(name, worldwide audience)` rows for the study preset's genre catalog,
/// including a few genres below the default floor.
pub fn study_genres() -> Vec<(String, u64)> {
    let mut rows: Vec<(String, u64)> = ANGLO_GENRES
        .iter()
        .chain(&HIP_HOP_GENRES)
        .chain(&MEXICAN_GENRES)
        .enumerate()
        .map(|(i, name)| (name.to_string(), 2_000_000 + 750_000 * i as u64))
        .collect();
    rows.push(("Vaporwave revival".into(), 40_000));
    rows.push(("Bossa nova jazz fusion".into(), 85_000));
    rows
}

const COMMUNITY_CITIES: [(&str, &str); 4] = [
    ("Midwest", "chicago"),
    ("Northeast", "new-york"),
    ("South", "houston"),
    ("West", "los-angeles"),
];

pub fn study_community_cities() -> Vec<String> {
    COMMUNITY_CITIES.iter().map(|(_, c)| c.to_string()).collect()
}

fn marginals(axis: AxisName, later_generation: bool) -> Vec<f64> {
    match (axis, later_generation) {
        (AxisName::Gender, _) => vec![0.5, 0.5],
        (AxisName::Education, false) => vec![0.12, 0.30, 0.38, 0.20],
        (AxisName::Education, true) => vec![0.18, 0.32, 0.22, 0.28],
        (AxisName::Age, false) => vec![0.08, 0.27, 0.27, 0.22, 0.16],
        (AxisName::Age, true) => vec![0.22, 0.33, 0.22, 0.14, 0.09],
        (AxisName::Language, false) => vec![0.35, 0.15, 0.50],
        (AxisName::Language, true) => vec![0.45, 0.40, 0.15],
        (AxisName::Region, _) => vec![0.10, 0.07, 0.40, 0.43],
    }
}

/// Ground-truth marginal distributions of the later generation, slightly
/// different from what the study preset plants on the platform.
pub fn study_ground_truth() -> Vec<(AxisName, Vec<(String, f64)>)> {
    let truth = [
        (AxisName::Gender, vec![0.49, 0.51]),
        (AxisName::Education, vec![0.13, 0.30, 0.30, 0.27]),
        (AxisName::Age, vec![0.27, 0.30, 0.20, 0.13, 0.10]),
        (AxisName::Region, vec![0.09, 0.06, 0.42, 0.43]),
    ];
    let axes = DemographicAxis::standard_axes();
    truth
        .into_iter()
        .map(|(name, probs)| {
            let axis = axes.iter().find(|a| a.name == name).expect("standard axis");
            (name, axis.categories.iter().cloned().zip(probs).collect())
        })
        .collect()
}

/// Demonstration world for the Mexican-origin study: Anglos, African
/// Americans and Mexicans in Mexico as natives; first-generation immigrants
/// and later-generation Mexican Americans cross-classified by gender,
/// education, age, language and region, with log AR relative to Anglos
/// planted as an additive model plus Gaussian noise.
pub fn study(seed: u64) -> PlantedScenario {
    study_scaled(seed, 1)
}

/// [`study`] with every population multiplied by `scale`, which shrinks
/// the discreteness of small cells.
pub fn study_scaled(seed: u64, scale: u64) -> PlantedScenario {
    let scale = scale.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, STUDY_NOISE_SD).expect("positive sd");
    let slug = crate::catalog::slugify;
    let anglo: Vec<String> = ANGLO_GENRES.iter().map(|g| slug(g)).collect();
    let hip_hop: Vec<String> = HIP_HOP_GENRES.iter().map(|g| slug(g)).collect();
    let mexican: Vec<String> = MEXICAN_GENRES.iter().map(|g| slug(g)).collect();
    let mut spread = |ids: &[String], mass: f64| -> Vec<(String, f64)> {
        let raw: Vec<f64> = ids.iter().map(|_| rng.random_range(0.6..1.6)).collect();
        ids.iter().cloned().zip(scaled(&raw, mass)).collect()
    };
    let mut shares_for = |masses: [f64; 3]| -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        out.extend(spread(&anglo, masses[0]));
        out.extend(spread(&hip_hop, masses[1]));
        out.extend(spread(&mexican, masses[2]));
        out
    };
    let anglo_shares = shares_for([0.45, 0.30, 0.25]);
    let black_shares = shares_for([0.10, 0.75, 0.15]);
    let mexico_shares = shares_for([0.10, 0.35, 0.55]);

    let mut natives = vec![
        native("Anglos", "US", Some("anglo"), anglo_shares.clone()),
        native("African Americans", "US", Some("african-american"), black_shares),
        native("Mexicans in Mexico", "MX", Some("hispanic"), mexico_shares.clone()),
    ];
    natives[0].size = Some(112_000_000 * scale);
    natives[1].size = Some(29_000_000 * scale);
    natives[2].size = Some(62_000_000 * scale);
    natives[0].extra_interests.insert("mexico".into(), 0.01);
    natives[2].extra_interests.insert("mexico".into(), 0.6);

    let targeted: Vec<&String> = anglo_shares
        .keys()
        .filter(|id| anglo_shares[*id] > mexico_shares[*id])
        .collect();
    let effects = study_effects();
    let axes = DemographicAxis::standard_axes();
    let mut cells: Vec<Vec<(AxisName, usize)>> = vec![Vec::new()];
    for axis in &axes {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                (0..axis.categories.len()).map(move |k| {
                    let mut next = cell.clone();
                    next.push((axis.name, k));
                    next
                })
            })
            .collect();
    }

    let mut expats = Vec::new();
    for later in [false, true] {
        let total = if later { 14_000_000.0 } else { 9_400_000.0 };
        for cell in &cells {
            let mut demographics = BTreeMap::new();
            let mut weight = 1.0;
            let mut log_ar_mean = STUDY_INTERCEPT;
            if later {
                log_ar_mean += STUDY_LATER_GENERATION_EFFECT;
            }
            for &(name, k) in cell {
                let axis = axes.iter().find(|a| a.name == name).expect("standard axis");
                let category = &axis.categories[k];
                weight *= marginals(name, later)[k];
                log_ar_mean += effects
                    .get(&(name, category.as_str()))
                    .copied()
                    .unwrap_or(0.0);
                demographics.insert(name, category.clone());
            }
            let region = &demographics[&AxisName::Region];
            let city = COMMUNITY_CITIES
                .iter()
                .find(|(r, _)| r == region)
                .map(|(_, c)| *c)
                .expect("every region has a community city");
            let tag = demographics
                .iter()
                .map(|(a, c)| format!("{a}={c}"))
                .collect::<Vec<_>>()
                .join(", ");
            let log_ar: BTreeMap<String, f64> = targeted
                .iter()
                .map(|id| ((*id).clone(), log_ar_mean + noise.sample(&mut rng)))
                .collect();
            let places: Vec<(String, f64)> = if later {
                vec![(city.to_string(), 0.4), (format!("elsewhere-{}", slug(region)), 0.6)]
            } else {
                vec![(city.to_string(), 1.0)]
            };
            for (location, fraction) in places {
                let size = ((total * weight * fraction).round() as u64).max(1) * scale;
                let (label, traits, extra) = if later {
                    (
                        format!("Mexican Americans | {tag} | {location}"),
                        GroupTraits {
                            affinity: Some("hispanic".into()),
                            home_country: Some("US".into()),
                            expat_origin: None,
                            location: Some(location.clone()),
                            demographics: demographics.clone(),
                        },
                        0.25,
                    )
                } else {
                    (
                        format!("Mexican immigrants | {tag}"),
                        GroupTraits {
                            affinity: Some("hispanic".into()),
                            home_country: Some("US".into()),
                            expat_origin: Some("MX".into()),
                            location: Some(location.clone()),
                            demographics: demographics.clone(),
                        },
                        0.5,
                    )
                };
                expats.push(ExpatGroup {
                    label,
                    traits,
                    size: Some(size),
                    destination: "Anglos".into(),
                    source: "Mexicans in Mexico".into(),
                    log_ar: log_ar.clone(),
                    extra_interests: [("mexico".to_string(), extra)].into_iter().collect(),
                });
            }
        }
    }

    let mut interests: Vec<String> = anglo_shares.keys().cloned().collect();
    interests.sort();
    PlantedScenario {
        name: "study".into(),
        interests,
        rounding: None,
        floor: None,
        mode: DeclarationMode::Quota,
        natives,
        expats,
    }
}
