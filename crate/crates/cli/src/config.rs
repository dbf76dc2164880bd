//! Study configuration (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use assimlab_core::audience::RateLimitPolicy;
use assimlab_core::catalog::{
    resolve_proxy, AxisName, DemographicAxis, GenerationProxy, InterestCatalog, PopulationSpec,
    ProxyConfig, ProxyKind,
};
use assimlab_core::metrics::{BandwidthRule, PercentileBase};
use assimlab_core::simulator::{presets, PlantedScenario};
use assimlab_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// In-process simulator.
    Sim,
    /// Remote counting API.
    Http,
    /// Counts recorded by `collect`.
    Snapshot,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogConfig {
    /// CSV with `name,worldwide_audience` columns.
    pub path: Option<PathBuf>,
    /// Use the simulator scenario's interests instead of a file.
    #[serde(default)]
    pub from_scenario: bool,
    #[serde(default = "default_floor")]
    pub floor: u64,
}

fn default_floor() -> u64 {
    100_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Built-in scenario: `study`, `blocs`, `identity` or `random`.
    pub scenario: Option<String>,
    /// Scenario TOML file; takes precedence over `scenario`.
    pub scenario_path: Option<PathBuf>,
    /// Interest count for the `blocs`, `identity` and `random` scenarios.
    pub scenario_interests: Option<usize>,
    /// Population multiplier for the `study` scenario.
    pub scenario_scale: Option<u64>,
    /// Significant digits the simulator rounds counts to.
    pub rounding: Option<u32>,
    /// Smallest count the simulator reports.
    pub floor: Option<u64>,
    pub endpoint: Option<String>,
    /// Environment variable holding `Name: value` credential header lines.
    #[serde(default = "default_credentials_env")]
    pub credentials_env: String,
    /// Snapshot file; defaults to `snapshot.ndjson` in the output directory.
    pub snapshot: Option<PathBuf>,
    pub budget: Option<usize>,
    /// Request rate such as `"200/60s"`; unlimited for the simulator when unset.
    pub rate: Option<String>,
    pub max_retries: Option<u32>,
    pub concurrency: Option<usize>,
}

fn default_credentials_env() -> String {
    "ASSIMLAB_CREDENTIALS".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxySection {
    #[serde(default = "all_proxy_kinds")]
    pub kinds: Vec<ProxyKind>,
    #[serde(flatten)]
    pub config: ProxyConfig,
}

fn all_proxy_kinds() -> Vec<ProxyKind> {
    ProxyKind::ALL.to_vec()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    /// File-name stem; derived from the labels when unset.
    pub name: Option<String>,
    pub expat: String,
    pub destination: String,
    pub source: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    #[serde(default)]
    pub percentile_base: PercentileBase,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    /// Restrict the catalog to the destination's top interests first.
    pub top_k: Option<usize>,
    #[serde(default = "default_kde_points")]
    pub kde_points: usize,
    #[serde(default)]
    pub kde_bandwidth: BandwidthRule,
}

fn default_percentile() -> f64 {
    50.0
}
fn default_bootstrap() -> usize {
    1000
}
fn default_kde_points() -> usize {
    512
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            percentile: default_percentile(),
            percentile_base: PercentileBase::default(),
            bootstrap: default_bootstrap(),
            top_k: None,
            kde_points: default_kde_points(),
            kde_bandwidth: BandwidthRule::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    /// CSV with `axis,category,proportion` columns.
    pub ground_truth: PathBuf,
    /// Population labels to validate; every generation proxy when unset.
    pub populations: Option<Vec<String>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_trials() -> usize {
    assimlab_core::metrics::DEFAULT_BASELINE_TRIALS
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    /// Pairs of factor names (`"Age"`, `"Education"`, ..., `"Generation"`).
    #[serde(default)]
    pub interactions: Vec<(String, String)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionConfig {
    pub destination: String,
    pub source: String,
    pub first_generation: String,
    /// Later-generation population labels; every generation proxy when unset.
    pub later_generations: Option<Vec<String>>,
    /// Axes to cross-tabulate; all five when unset.
    pub axes: Option<Vec<AxisName>>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Models besides the main-effects model.
    #[serde(default = "default_models", rename = "model")]
    pub models: Vec<ModelConfig>,
}

fn default_top_k() -> usize {
    20
}

fn default_models() -> Vec<ModelConfig> {
    let model = |name: &str, other: &str| ModelConfig {
        name: name.into(),
        interactions: vec![("Age".into(), other.into())],
    };
    vec![
        model("model1", "Education"),
        model("model2", "Language"),
        model("model3", "Generation"),
    ]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareGroup {
    pub label: String,
    pub pairs: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default, rename = "group")]
    pub groups: Vec<CompareGroup>,
    /// Pair whose expat population is broken down by `axes`.
    pub by_axis_pair: Option<String>,
    #[serde(default)]
    pub axes: Vec<AxisName>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub catalog: CatalogConfig,
    pub backend: BackendConfig,
    #[serde(default, rename = "population")]
    pub populations: Vec<PopulationSpec>,
    pub proxies: Option<ProxySection>,
    #[serde(default, rename = "pair")]
    pub pairs: Vec<PairConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    pub validation: Option<ValidationConfig>,
    pub regression: Option<RegressionConfig>,
    pub compare: Option<CompareConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A parsed config plus everything derived from it at load time.
#[derive(Clone, Debug)]
pub struct Study {
    pub config: StudyConfig,
    /// Directory relative paths in the config are resolved against.
    pub base_dir: PathBuf,
    /// Hex SHA-256 of the config file bytes.
    pub config_sha256: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Every named population: configured ones, then generation proxies.
    pub populations: Vec<PopulationSpec>,
    /// Labels of the generation-proxy populations.
    pub proxy_labels: Vec<String>,
}

impl Study {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let config: StudyConfig = toml::from_str(&text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let sha = Sha256::digest(&bytes);
        let config_sha256 = sha.iter().map(|b| format!("{b:02x}")).collect();
        Self::from_config(config, base_dir, config_sha256).map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::Config {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        })
    }

    pub fn from_config(config: StudyConfig, base_dir: PathBuf, config_sha256: String) -> Result<Self> {
        let mut populations = config.populations.clone();
        let mut proxy_labels = Vec::new();
        if let Some(section) = &config.proxies {
            for kind in &section.kinds {
                let spec = resolve_proxy(&GenerationProxy::new(*kind), &section.config)?;
                proxy_labels.push(spec.label.clone());
                populations.push(spec);
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &populations {
            p.targeting.validate()?;
            if !seen.insert(p.label.clone()) {
                return Err(Error::InvalidArgument(format!("duplicate population label {:?}", p.label)));
            }
        }
        let study = Self {
            output_dir: base_dir.join(&config.output_dir),
            seed: config.seed,
            config,
            base_dir,
            config_sha256,
            populations,
            proxy_labels,
        };
        study.check_references()?;
        Ok(study)
    }

    fn check_references(&self) -> Result<()> {
        let c = &self.config;
        for pair in &c.pairs {
            for label in [&pair.expat, &pair.destination, &pair.source] {
                self.population(label)?;
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for pair in &c.pairs {
            if !names.insert(pair_name(pair)) {
                return Err(Error::InvalidArgument(format!("duplicate pair name {:?}", pair_name(pair))));
            }
        }
        if let Some(v) = &c.validation {
            self.resolve(&v.ground_truth).metadata().map_err(|e| Error::Config {
                path: self.resolve(&v.ground_truth),
                message: e.to_string(),
            })?;
            for label in v.populations.iter().flatten() {
                self.population(label)?;
            }
        }
        if let Some(r) = &c.regression {
            for label in [&r.destination, &r.source, &r.first_generation] {
                self.population(label)?;
            }
            for label in r.later_generations.iter().flatten() {
                self.population(label)?;
            }
        }
        if let Some(cmp) = &c.compare {
            for name in cmp.groups.iter().flat_map(|g| &g.pairs).chain(&cmp.by_axis_pair) {
                self.pair(name)?;
            }
        }
        if let Some(path) = &c.catalog.path {
            self.resolve(path).metadata().map_err(|e| Error::Config {
                path: self.resolve(path),
                message: e.to_string(),
            })?;
        } else if !c.catalog.from_scenario {
            return Err(Error::MissingConfig("catalog.path or catalog.from_scenario".into()));
        }
        if let Some(path) = &c.backend.scenario_path {
            self.resolve(path).metadata().map_err(|e| Error::Config {
                path: self.resolve(path),
                message: e.to_string(),
            })?;
        }
        if c.analysis.bootstrap == 0 {
            return Err(Error::InvalidArgument("analysis.bootstrap must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn population(&self, label: &str) -> Result<&PopulationSpec> {
        self.populations
            .iter()
            .find(|p| p.label == label)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown population {label:?}")))
    }

    pub fn pair(&self, name: &str) -> Result<&PairConfig> {
        self.config
            .pairs
            .iter()
            .find(|p| pair_name(p) == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown pair {name:?}")))
    }

    pub fn snapshot_path(&self) -> PathBuf {
        match &self.config.backend.snapshot {
            Some(path) => self.resolve(path),
            None => self.output_dir.join("snapshot.ndjson"),
        }
    }

    /// The planted scenario behind the simulator backend.
    pub fn scenario(&self) -> Result<PlantedScenario> {
        let b = &self.config.backend;
        let mut scenario = if let Some(path) = &b.scenario_path {
            PlantedScenario::load(&self.resolve(path))?
        } else {
            let name = b
                .scenario
                .as_deref()
                .ok_or_else(|| Error::MissingConfig("backend.scenario or backend.scenario_path".into()))?;
            preset(name, b.scenario_interests, b.scenario_scale, self.seed)?
        };
        if b.rounding.is_some() {
            scenario.rounding = b.rounding;
        }
        if b.floor.is_some() {
            scenario.floor = b.floor;
        }
        Ok(scenario)
    }

    pub fn catalog(&self) -> Result<InterestCatalog> {
        let c = &self.config.catalog;
        match &c.path {
            Some(path) => Ok(InterestCatalog::load_csv(&self.resolve(path), c.floor)?.catalog),
            None => {
                let scenario = self.scenario()?;
                InterestCatalog::from_ids(&scenario.interests)
            }
        }
    }

    pub fn rate_policy(&self, kind: BackendKind) -> Result<RateLimitPolicy> {
        let b = &self.config.backend;
        let mut policy = RateLimitPolicy::default();
        match &b.rate {
            Some(rate) => {
                let (count, window) = RateLimitPolicy::parse_rate(rate)?;
                policy.max_requests_per_window = count;
                policy.window = window;
            }
            None if kind == BackendKind::Sim => {
                policy.max_requests_per_window = u32::MAX;
                policy.window = std::time::Duration::from_secs(1);
            }
            None => {}
        }
        if let Some(retries) = b.max_retries {
            policy.max_retries = retries;
        }
        if let Some(concurrency) = b.concurrency {
            policy.concurrency = concurrency;
        }
        policy.validate()?;
        Ok(policy)
    }

    pub fn regression_axes(&self) -> Vec<DemographicAxis> {
        let all = DemographicAxis::standard_axes();
        match self.config.regression.as_ref().and_then(|r| r.axes.clone()) {
            Some(names) => all.into_iter().filter(|a| names.contains(&a.name)).collect(),
            None => all,
        }
    }

    pub fn later_generations(&self) -> Vec<String> {
        self.config
            .regression
            .as_ref()
            .and_then(|r| r.later_generations.clone())
            .unwrap_or_else(|| self.proxy_labels.clone())
    }

    pub fn validated_populations(&self) -> Vec<String> {
        self.config
            .validation
            .as_ref()
            .and_then(|v| v.populations.clone())
            .unwrap_or_else(|| self.proxy_labels.clone())
    }

    /// Reads `axis,category,proportion` rows.
    pub fn ground_truth(&self) -> Result<GroundTruth> {
        let v = self
            .config
            .validation
            .as_ref()
            .ok_or_else(|| Error::MissingConfig("[validation] section".into()))?;
        read_ground_truth(&self.resolve(&v.ground_truth))
    }
}

/// Category proportions per axis.
pub type GroundTruth = Vec<(AxisName, Vec<(String, f64)>)>;

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    #[derive(Deserialize)]
    struct Row {
        axis: String,
        category: String,
        proportion: f64,
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut out: BTreeMap<AxisName, Vec<(String, f64)>> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: Row = row?;
        out.entry(row.axis.parse()?)
            .or_default()
            .push((row.category, row.proportion));
    }
    Ok(out.into_iter().collect())
}

pub fn preset(name: &str, interests: Option<usize>, scale: Option<u64>, seed: u64) -> Result<PlantedScenario> {
    Ok(match name {
        "study" => presets::study_scaled(seed, scale.unwrap_or(1)),
        "blocs" => presets::blocs(interests.unwrap_or(100), seed),
        "identity" => presets::identity(interests.unwrap_or(20), seed),
        "random" => presets::random_planted(interests.unwrap_or(20), seed),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown scenario {other:?} (expected study, blocs, identity or random)"
            )))
        }
    })
}

/// File-name stem of a pair.
pub fn pair_name(pair: &PairConfig) -> String {
    pair.name.clone().unwrap_or_else(|| {
        assimlab_core::catalog::slugify(&format!("{} to {}", pair.expat, pair.destination))
    })
}

/// Sub-seed for one named use of the root seed.
pub fn derive_seed(root: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
