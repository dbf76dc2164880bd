//! Browser demo: JSON in, JSON out.
//!
//! The `*_json` functions are plain Rust and testable natively; the
//! `#[wasm_bindgen]` wrappers expose them to the page.

use assimlab_core::audience::CountBackend;
use assimlab_core::audience::CountRequest;
use assimlab_core::catalog::{DemographicAxis, InterestCatalog, PopulationSpec};
use assimlab_core::metrics::{
    assimilation_ratios, bootstrap_median_ci, filter_interests, interest_ratios, kde_density, median,
    validate_proxy, BandwidthRule, DemographicProportions, DensityCurve, FilterOptions, Grid, InterestRatioVector,
    MedianCi,
};
use assimlab_core::simulator::{generate_world, presets, SyntheticWorld};
use assimlab_core::{Error, Result};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Deserialize)]
#[serde(default)]
pub struct PlantedRequest {
    pub interests: usize,
    pub seed: u64,
    pub percentile: f64,
    /// Significant digits of reported counts; 0 reports exact counts.
    pub rounding: u32,
    pub resamples: usize,
}

impl Default for PlantedRequest {
    fn default() -> Self {
        Self {
            interests: 30,
            seed: 1,
            percentile: 50.0,
            rounding: 0,
            resamples: 1000,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct InterestRow {
    pub id: String,
    pub dest: f64,
    pub source: f64,
    pub expat: f64,
    pub delta: f64,
    /// "kept", "step1" or "step2".
    pub status: &'static str,
    pub planted_log_ar: Option<f64>,
    pub log_ar: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct PlantedResponse {
    pub rows: Vec<InterestRow>,
    pub threshold: f64,
    pub median_log_ar: f64,
    pub planted_median: f64,
    pub ci: MedianCi,
    pub density: Option<DensityCurve>,
}

fn specs() -> [PopulationSpec; 3] {
    [
        PopulationSpec::new("Expats").home_country("US").expat_from("MX"),
        PopulationSpec::new("Destination natives").home_country("US").non_expat(),
        PopulationSpec::new("Source natives").home_country("MX").non_expat(),
    ]
}

fn ratios(world: &SyntheticWorld, spec: &PopulationSpec, catalog: &InterestCatalog) -> Result<InterestRatioVector> {
    let mut counts = Vec::with_capacity(catalog.len());
    for id in catalog.ids() {
        let request = CountRequest {
            targeting: spec.targeting.clone(),
            interest: Some(id.to_string()),
        };
        counts.push((id, world.count(&request)?.count));
    }
    interest_ratios(&spec.label, &counts, catalog)
}

/// Plants a random scenario, counts it (optionally rounded), filters and
/// scores it.
pub fn planted(request: &PlantedRequest) -> Result<PlantedResponse> {
    if !(3..=300).contains(&request.interests) {
        return Err(Error::InvalidArgument("interests must be between 3 and 300".into()));
    }
    let mut scenario = presets::random_planted(request.interests, request.seed);
    scenario.rounding = (request.rounding > 0).then_some(request.rounding);
    let world = generate_world(&scenario, request.seed)?;
    let catalog = InterestCatalog::from_ids(&scenario.interests)?;
    let [expat, dest, source] = specs();
    let e = ratios(&world, &expat, &catalog)?;
    let d = ratios(&world, &dest, &catalog)?;
    let s = ratios(&world, &source, &catalog)?;
    let filter = filter_interests(&d, &s, request.percentile, FilterOptions::default())?;
    let report = assimilation_ratios(&e, &d, Some(&s), &filter)?;
    let planted = &scenario.expats[0].log_ar;

    let rows = catalog
        .ids()
        .enumerate()
        .map(|(i, id)| {
            let status = if filter.kept.iter().any(|k| k == id) {
                "kept"
            } else if filter.removed_step1.iter().any(|k| k == id) {
                "step1"
            } else {
                "step2"
            };
            InterestRow {
                id: id.to_string(),
                dest: d.ratios[i],
                source: s.ratios[i],
                expat: e.ratios[i],
                delta: filter.deltas[id],
                status,
                planted_log_ar: planted.get(id).copied(),
                log_ar: report.rows.iter().find(|r| r.interest == id).map(|r| r.log_ar),
            }
        })
        .collect();
    let planted_kept: Vec<f64> = report
        .rows
        .iter()
        .filter_map(|r| planted.get(&r.interest).copied())
        .collect();
    let logs = report.log_ars();
    let ci = bootstrap_median_ci(&logs, request.resamples.clamp(100, 20_000), request.seed, 0.95)?;
    let density = kde_density(&logs, BandwidthRule::Silverman, Grid { points: 160, pad: 3.0 }).ok();
    Ok(PlantedResponse {
        rows,
        threshold: filter.threshold,
        median_log_ar: report.median_log_ar,
        planted_median: if planted_kept.is_empty() { f64::NAN } else { median(&planted_kept)? },
        ci,
        density,
    })
}

#[derive(Debug, Deserialize)]
#[serde(default)]
pub struct ValidationRequest {
    /// Scale of the log-normal distortion applied to the ground truth.
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ValidationRequest {
    fn default() -> Self {
        Self {
            sigma: 0.3,
            trials: 1000,
            seed: 1,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AxisView {
    pub axis: String,
    pub categories: Vec<String>,
    pub truth: Vec<f64>,
    pub estimated: Vec<f64>,
    pub kl: f64,
}

#[derive(Debug, Serialize)]
pub struct ValidationResponse {
    pub axes: Vec<AxisView>,
    pub observed_kl: f64,
    pub baseline_p05: f64,
    pub baseline_median: f64,
    pub baseline_p95: f64,
    pub quantile: f64,
    pub verdict: String,
}

/// Distorts the demo ground truth into a proxy estimate and judges it
/// against the uniform-simplex baseline.
pub fn validation(request: &ValidationRequest) -> Result<ValidationResponse> {
    if !(request.sigma.is_finite() && request.sigma >= 0.0) {
        return Err(Error::InvalidArgument("sigma must be nonnegative".into()));
    }
    let axes = DemographicAxis::standard_axes();
    let mut state = request.seed ^ 0x5851_f42d_4c95_7f2d;
    // Box-Muller on a splitmix stream keeps the demo free of extra crates.
    let mut normal = move || {
        let mut next = || {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
        };
        let (u, v) = (next().max(f64::MIN_POSITIVE), next());
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    };
    let mut truth = Vec::new();
    let mut estimated = Vec::new();
    for (name, fractions) in presets::study_ground_truth() {
        let axis = axes.iter().find(|a| a.name == name).expect("standard axis");
        let t = DemographicProportions::from_fractions(axis, &fractions)?;
        let noisy: Vec<(String, f64)> = fractions
            .iter()
            .map(|(c, p)| (c.clone(), p * (request.sigma * normal()).exp()))
            .collect();
        estimated.push(DemographicProportions::from_fractions(axis, &noisy)?);
        truth.push(t);
    }
    let report = validate_proxy(&estimated, &truth, request.trials.clamp(10, 20_000), request.seed)?;
    Ok(ValidationResponse {
        axes: truth
            .iter()
            .zip(&estimated)
            .zip(&report.axes)
            .map(|((t, e), a)| AxisView {
                axis: t.axis.to_string(),
                categories: t.categories.clone(),
                truth: t.proportions.clone(),
                estimated: e.proportions.clone(),
                kl: a.kl,
            })
            .collect(),
        observed_kl: report.observed_kl,
        baseline_p05: report.baseline.p05,
        baseline_median: report.baseline.median,
        baseline_p95: report.baseline.p95,
        quantile: report.quantile,
        verdict: report.verdict,
    })
}

#[derive(Debug, Deserialize)]
pub struct IntervalRequest {
    pub values: Vec<f64>,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_resamples() -> usize {
    1000
}

/// Bootstrap interval for the median of user-supplied values.
pub fn interval(request: &IntervalRequest) -> Result<MedianCi> {
    bootstrap_median_ci(&request.values, request.resamples.clamp(100, 50_000), request.seed, 0.95)
}

fn call<Req, Resp>(json: &str, f: impl FnOnce(&Req) -> Result<Resp>) -> std::result::Result<String, String>
where
    Req: for<'de> Deserialize<'de>,
    Resp: Serialize,
{
    let request: Req = serde_json::from_str(json).map_err(|e| format!("bad request: {e}"))?;
    let response = f(&request).map_err(|e| e.to_string())?;
    serde_json::to_string(&response).map_err(|e| e.to_string())
}

pub fn planted_json(json: &str) -> std::result::Result<String, String> {
    call(json, planted)
}

pub fn validation_json(json: &str) -> std::result::Result<String, String> {
    call(json, validation)
}

pub fn interval_json(json: &str) -> std::result::Result<String, String> {
    call(json, interval)
}

#[wasm_bindgen(js_name = explorePlanted)]
pub fn explore_planted(request: &str) -> std::result::Result<String, JsError> {
    planted_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = exploreValidation)]
pub fn explore_validation(request: &str) -> std::result::Result<String, JsError> {
    validation_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = medianInterval)]
pub fn median_interval(request: &str) -> std::result::Result<String, JsError> {
    interval_json(request).map_err(|e| JsError::new(&e))
}
