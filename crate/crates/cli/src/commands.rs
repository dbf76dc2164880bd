//! The study subcommands.

use std::collections::BTreeMap;
use std::path::PathBuf;

use assimlab_core::audience::{
    cross_sections, fetch_snapshot, CountBackend, FetchSummary, ReachClient, SnapshotFile, SnapshotSink,
};
use assimlab_core::catalog::{AxisName, DemographicAxis, InterestCatalog};
use assimlab_core::metrics::{
    ar_rows_csv, assimilation_ratios, bootstrap_median_ci, demographic_proportions, density_csv,
    kde_density, median, validate_proxy, DemographicProportions, Grid, InterestRatioVector, MedianCi,
    ValidationReport,
};
use assimlab_core::stats::{
    encode_design, kruskal_wallis, ols_fit, render_csv, render_table, FactorSpec, GroupedScores,
    KruskalWallis, Observation, RegressionFit, GENERATION_FACTOR,
};
use assimlab_core::Error;
use serde::Serialize;

use crate::analysis::{all_pairs, PairResult};
use crate::config::{derive_seed, BackendKind};
use crate::context::{
    analysis_catalog, axis, compare_axes_plan, pair_plan, regression_base_plan, regression_cell_estimate,
    regression_cell_plan, regression_groups, validation_plan, Context, RunOptions,
};
use crate::data::open_backend;
use crate::error::{CliError, CliResult};
use crate::output::{density_svg, interval_svg};

fn csv_string(rows: Vec<Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn num(x: f64) -> String {
    assimlab_core::metrics::format_number(x)
}

// ---------------------------------------------------------------- collect

#[derive(Clone, Debug, Default)]
pub struct CollectOptions {
    pub budget: Option<usize>,
    pub rate: Option<String>,
    pub resume: Option<PathBuf>,
}

#[derive(Serialize)]
struct CollectSummary {
    backend: BackendKind,
    planned_queries: usize,
    skipped_cells: usize,
    regression_interests: Vec<String>,
    phases: Vec<FetchSummary>,
    failed_total: usize,
}

pub fn collect(options: &RunOptions, collect: &CollectOptions) -> CliResult<Vec<PathBuf>> {
    if Context::requested_backend(options)? == BackendKind::Snapshot {
        return Err(CliError::Usage("collect needs the sim or http backend".into()));
    }
    let mut ctx = Context::open("collect", options)?;
    if let Some(rate) = &collect.rate {
        ctx.study.config.backend.rate = Some(rate.clone());
    }
    let budget = collect.budget.or(ctx.study.config.backend.budget);
    let policy = ctx.study.rate_policy(ctx.backend_kind)?;

    let mut base = pair_plan(&ctx.study, &ctx.catalog)?;
    base.extend(validation_plan(&ctx.study)?);
    base.extend(compare_axes_plan(&ctx.study, &ctx.catalog)?);
    base.extend(regression_base_plan(&ctx.study, &ctx.catalog)?);
    let estimate = base.len() + regression_cell_estimate(&ctx.study)?;
    if let Some(budget) = budget {
        if estimate > budget {
            return Err(Error::PlanTooLarge {
                requested: estimate,
                budget,
            }
            .into());
        }
    }

    let path = match &collect.resume {
        Some(path) => path.clone(),
        None => {
            let path = ctx.study.snapshot_path();
            if path.exists() {
                std::fs::remove_file(&path).map_err(Error::from)?;
            }
            path
        }
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    let backend_name = format!("{:?}", ctx.backend_kind).to_lowercase();
    let mut sink = SnapshotFile::open(&path, &ctx.study.config.study, &backend_name)?;
    let (backend, _) = open_backend(&ctx.study, ctx.backend_kind, options.endpoint.as_deref())?;
    let client: ReachClient<Box<dyn CountBackend>> = ReachClient::new(backend);

    let mut phases = vec![fetch_snapshot(&client, base.queries(), &policy, &mut sink)?];
    let mut planned = base.len();
    let mut skipped_cells = base.skipped_cells;
    let mut regression_interests = Vec::new();
    if let Some(r) = &ctx.study.config.regression {
        let dest = ctx.study.population(&r.destination)?;
        let snapshot = sink.snapshot();
        let mut counts = Vec::with_capacity(ctx.catalog.len());
        let mut complete = true;
        for id in ctx.catalog.ids() {
            let q = assimlab_core::audience::AudienceQuery::new(dest.clone(), Some(id.to_string()));
            match snapshot.lookup(&q.request_id) {
                Some(record) => counts.push(record.count as f64),
                None => complete = false,
            }
        }
        if complete {
            let v = InterestRatioVector::from_weights(&r.destination, &ctx.catalog, counts)?;
            let top = analysis_catalog(&ctx.catalog, &v, Some(r.top_k))?;
            regression_interests = top.ids().map(str::to_string).collect();
            let cells = regression_cell_plan(&ctx.study, &top)?;
            planned += cells.len();
            skipped_cells += cells.skipped_cells;
            phases.push(fetch_snapshot(&client, cells.queries(), &policy, &mut sink)?);
        }
    }
    let failed_total = sink.snapshot().failures().count();
    let summary = CollectSummary {
        backend: ctx.backend_kind,
        planned_queries: planned,
        skipped_cells,
        regression_interests,
        phases,
        failed_total,
    };
    ctx.writer.json("collect_summary.json", &summary)?;
    let snapshot_path = sink.path().to_path_buf();
    drop(sink);
    let mut written = ctx.finish()?;
    written.insert(0, snapshot_path);
    Ok(written)
}

// ---------------------------------------------------------------- validate

#[derive(Serialize)]
struct PopulationValidation {
    population: String,
    estimated: Vec<DemographicProportions>,
    report: ValidationReport,
}

#[derive(Serialize)]
struct ValidationOutput {
    trials: usize,
    populations: Vec<PopulationValidation>,
    incomplete: Vec<String>,
    verdict: String,
}

pub fn validate(options: &RunOptions) -> CliResult<Vec<PathBuf>> {
    let mut ctx = Context::open("validate", options)?;
    let v = ctx
        .study
        .config
        .validation
        .clone()
        .ok_or_else(|| Error::MissingConfig("[validation] section".into()))?;
    ctx.counts.require(validation_plan(&ctx.study)?.queries())?;
    let truth: Vec<DemographicProportions> = ctx
        .study
        .ground_truth()?
        .iter()
        .map(|(name, fractions)| DemographicProportions::from_fractions(&axis(*name), fractions))
        .collect::<assimlab_core::Result<_>>()?;
    let mut populations = Vec::new();
    let mut incomplete = Vec::new();
    'population: for label in ctx.study.validated_populations() {
        let spec = ctx.study.population(&label)?;
        let mut estimated = Vec::new();
        for t in &truth {
            let ax = axis(t.axis);
            let (cells, _) = cross_sections(spec, std::slice::from_ref(&ax));
            let mut counts = Vec::new();
            for cell in cells {
                let Some(n) = ctx.counts.count(&cell.spec, None)? else {
                    incomplete.push(label.clone());
                    continue 'population;
                };
                counts.push((cell.levels[&t.axis].clone(), n));
            }
            estimated.push(demographic_proportions(&counts, &ax)?);
        }
        let report = validate_proxy(&estimated, &truth, v.trials, derive_seed(ctx.seed(), &format!("kl:{label}")))?;
        populations.push(PopulationValidation {
            population: label,
            estimated,
            report,
        });
    }
    let verdict = if !populations.is_empty() && populations.iter().all(|p| p.report.verdict == "pass") {
        "pass"
    } else {
        "fail"
    };
    let mut rows = vec![["population", "axis", "kl", "observed_kl", "baseline_p05", "baseline_median", "quantile", "verdict"]
        .map(String::from)
        .to_vec()];
    for p in &populations {
        for a in &p.report.axes {
            rows.push(vec![
                p.population.clone(),
                a.axis.to_string(),
                num(a.kl),
                num(p.report.observed_kl),
                num(p.report.baseline.p05),
                num(p.report.baseline.median),
                num(p.report.quantile),
                p.report.verdict.clone(),
            ]);
        }
    }
    ctx.writer.text("validation.csv", &csv_string(rows)?)?;
    ctx.writer.json(
        "validation.json",
        &ValidationOutput {
            trials: v.trials,
            populations,
            incomplete,
            verdict: verdict.into(),
        },
    )?;
    ctx.finish()
}

// ---------------------------------------------------------------- ar

#[derive(Serialize)]
struct PairSummary {
    name: String,
    expat: String,
    destination: String,
    source: String,
    catalog_size: usize,
    kept: usize,
    removed_step1: usize,
    removed_step2: usize,
    threshold: f64,
    median_log_ar: f64,
    median_ar: f64,
    ci: Option<MedianCi>,
    epsilon: f64,
    epsilon_substituted: usize,
}

fn pair_summary(r: &PairResult) -> PairSummary {
    let report = &r.report;
    PairSummary {
        name: r.name.clone(),
        expat: report.expat.clone(),
        destination: report.destination.clone(),
        source: report.source.clone(),
        catalog_size: r.catalog.len(),
        kept: report.filter.kept.len(),
        removed_step1: report.filter.removed_step1.len(),
        removed_step2: report.filter.removed_step2.len(),
        threshold: report.filter.threshold,
        median_log_ar: report.median_log_ar,
        median_ar: report.median_log_ar.exp(),
        ci: report.ci.clone(),
        epsilon: report.epsilon,
        epsilon_substituted: report.rows.iter().filter(|r| r.epsilon_substituted).count(),
    }
}

fn ci_row(label: &str, ci: &MedianCi) -> (String, f64, f64, f64) {
    (label.to_string(), ci.median, ci.lower, ci.upper)
}

#[derive(Serialize)]
struct ArOutput {
    percentile: f64,
    bootstrap: usize,
    pairs: Vec<PairSummary>,
    incomplete: Vec<String>,
}

pub fn ar(options: &RunOptions) -> CliResult<Vec<PathBuf>> {
    let mut ctx = Context::open("ar", options)?;
    let results = all_pairs(&ctx)?;
    let mut summaries = Vec::new();
    let mut incomplete = Vec::new();
    let mut bars = Vec::new();
    for (name, result) in &results {
        let Some(r) = result else {
            incomplete.push(name.clone());
            continue;
        };
        ctx.writer.text(&format!("ar_{name}.csv"), &ar_rows_csv(&r.report)?)?;
        if let Some(ci) = &r.report.ci {
            bars.push(ci_row(name, ci));
        }
        summaries.push(pair_summary(r));
    }
    let analysis = &ctx.study.config.analysis;
    let out = ArOutput {
        percentile: analysis.percentile,
        bootstrap: analysis.bootstrap,
        pairs: summaries,
        incomplete,
    };
    ctx.writer.json("ar_summary.json", &out)?;
    ctx.writer.svg("ar.svg", &interval_svg("Median log assimilation ratio", &bars))?;
    ctx.finish()
}

// ---------------------------------------------------------------- kde

#[derive(Serialize)]
struct KdeEntry {
    name: String,
    n: usize,
    bandwidth: Option<f64>,
    skipped: Option<String>,
}

pub fn kde(options: &RunOptions) -> CliResult<Vec<PathBuf>> {
    let mut ctx = Context::open("kde", options)?;
    let results = all_pairs(&ctx)?;
    let analysis = ctx.study.config.analysis.clone();
    let grid = Grid {
        points: analysis.kde_points,
        ..Grid::default()
    };
    let mut entries = Vec::new();
    let mut curves = Vec::new();
    for (name, result) in &results {
        let Some(r) = result else {
            entries.push(KdeEntry {
                name: name.clone(),
                n: 0,
                bandwidth: None,
                skipped: Some("incomplete snapshot".into()),
            });
            continue;
        };
        let values = r.report.log_ars();
        match kde_density(&values, analysis.kde_bandwidth, grid) {
            Ok(curve) => {
                ctx.writer.text(&format!("kde_{name}.csv"), &density_csv(&curve)?)?;
                entries.push(KdeEntry {
                    name: name.clone(),
                    n: values.len(),
                    bandwidth: Some(curve.bandwidth),
                    skipped: None,
                });
                curves.push((name.clone(), curve));
            }
            Err(e @ (Error::ZeroVariance | Error::InsufficientData(_))) => entries.push(KdeEntry {
                name: name.clone(),
                n: values.len(),
                bandwidth: None,
                skipped: Some(e.to_string()),
            }),
            Err(e) => return Err(e.into()),
        }
    }
    #[derive(Serialize)]
    struct KdeOutput {
        bandwidth_rule: assimlab_core::metrics::BandwidthRule,
        grid: Grid,
        pairs: Vec<KdeEntry>,
    }
    ctx.writer.json(
        "kde.json",
        &KdeOutput {
            bandwidth_rule: analysis.kde_bandwidth,
            grid,
            pairs: entries,
        },
    )?;
    let refs: Vec<(String, &assimlab_core::metrics::DensityCurve)> =
        curves.iter().map(|(n, c)| (n.clone(), c)).collect();
    ctx.writer.svg("kde.svg", &density_svg("Density of log assimilation ratios", &refs))?;
    ctx.finish()
}

// ---------------------------------------------------------------- compare

#[derive(Serialize)]
struct GroupSummary {
    label: String,
    pairs: Vec<String>,
    n: usize,
    ci: MedianCi,
}

#[derive(Serialize)]
struct AxisCell {
    axis: AxisName,
    category: String,
    n: usize,
    ci: Option<MedianCi>,
}

#[derive(Serialize)]
struct AxisComparison {
    pair: String,
    axis: AxisName,
    cells: Vec<AxisCell>,
    kruskal: Option<KruskalWallis>,
}

#[derive(Serialize)]
struct CompareOutput {
    pairs: Vec<PairSummary>,
    groups: Vec<GroupSummary>,
    kruskal_groups: Option<KruskalWallis>,
    kruskal_pairs: Option<KruskalWallis>,
    axes: Vec<AxisComparison>,
    incomplete: Vec<String>,
}

fn kruskal_if_possible(scores: &GroupedScores) -> CliResult<Option<KruskalWallis>> {
    if scores.groups().len() < 2 {
        return Ok(None);
    }
    match kruskal_wallis(scores) {
        Ok(k) => Ok(Some(k)),
        Err(Error::InsufficientData(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn compare(options: &RunOptions) -> CliResult<Vec<PathBuf>> {
    let mut ctx = Context::open("compare", options)?;
    ctx.counts.require(compare_axes_plan(&ctx.study, &ctx.catalog)?.queries())?;
    let results = all_pairs(&ctx)?;
    let analysis = ctx.study.config.analysis.clone();
    let cmp = ctx.study.config.compare.clone().unwrap_or_default();
    let seed = ctx.seed();

    let mut incomplete = Vec::new();
    let mut by_name: BTreeMap<&str, &PairResult> = BTreeMap::new();
    let mut pair_scores = GroupedScores::new();
    for (name, result) in &results {
        match result {
            Some(r) => {
                by_name.insert(name, r);
                pair_scores.insert(name.clone(), r.report.log_ars());
            }
            None => incomplete.push(name.clone()),
        }
    }

    let mut csv_rows = vec![["level", "label", "n", "median_log_ar", "ci_lower", "ci_upper"]
        .map(String::from)
        .to_vec()];
    let mut bars = Vec::new();
    let mut groups = Vec::new();
    let mut group_scores = GroupedScores::new();
    for group in &cmp.groups {
        let members: Vec<&PairResult> = group.pairs.iter().filter_map(|p| by_name.get(p.as_str()).copied()).collect();
        let values: Vec<f64> = members.iter().flat_map(|r| r.report.log_ars()).collect();
        if values.is_empty() {
            continue;
        }
        let ci = bootstrap_median_ci(&values, analysis.bootstrap, derive_seed(seed, &format!("group:{}", group.label)), 0.95)?;
        csv_rows.push(vec![
            "group".into(),
            group.label.clone(),
            values.len().to_string(),
            num(ci.median),
            num(ci.lower),
            num(ci.upper),
        ]);
        bars.push(ci_row(&group.label, &ci));
        group_scores.insert(group.label.clone(), values.clone());
        groups.push(GroupSummary {
            label: group.label.clone(),
            pairs: members.iter().map(|r| r.name.clone()).collect(),
            n: values.len(),
            ci,
        });
    }
    let mut pairs = Vec::new();
    let mut ordered: Vec<&PairResult> = by_name.values().copied().collect();
    ordered.sort_by(|a, b| b.report.median_log_ar.total_cmp(&a.report.median_log_ar).then(a.name.cmp(&b.name)));
    for r in ordered {
        let ci = r.report.ci.as_ref().expect("pair reports carry an interval");
        csv_rows.push(vec![
            "pair".into(),
            r.name.clone(),
            r.report.rows.len().to_string(),
            num(ci.median),
            num(ci.lower),
            num(ci.upper),
        ]);
        bars.push(ci_row(&r.name, ci));
        pairs.push(pair_summary(r));
    }

    let mut axes = Vec::new();
    let mut axis_rows = vec![["pair", "axis", "category", "n", "median_log_ar", "ci_lower", "ci_upper"]
        .map(String::from)
        .to_vec()];
    if let Some(name) = &cmp.by_axis_pair {
        if let Some(r) = by_name.get(name.as_str()) {
            let expat = ctx.study.population(&r.pair.expat)?;
            for axis_name in &cmp.axes {
                let ax: DemographicAxis = axis(*axis_name);
                let (cells, _) = cross_sections(expat, std::slice::from_ref(&ax));
                let mut out_cells = Vec::new();
                let mut scores = GroupedScores::new();
                for cell in cells {
                    let category = cell.levels[axis_name].clone();
                    let Some(ratios) = ctx.counts.ratios(&cell.spec, &r.catalog).or_else(|e| match e {
                        Error::AllZero(_) => Ok(None),
                        e => Err(e),
                    })?
                    else {
                        out_cells.push(AxisCell {
                            axis: *axis_name,
                            category,
                            n: 0,
                            ci: None,
                        });
                        continue;
                    };
                    let report = assimilation_ratios(&ratios, &r.destination, None, &r.report.filter)?;
                    let values = report.log_ars();
                    let ci = bootstrap_median_ci(
                        &values,
                        analysis.bootstrap,
                        derive_seed(seed, &format!("axis:{name}:{axis_name}:{category}")),
                        0.95,
                    )?;
                    axis_rows.push(vec![
                        name.clone(),
                        axis_name.to_string(),
                        category.clone(),
                        values.len().to_string(),
                        num(ci.median),
                        num(ci.lower),
                        num(ci.upper),
                    ]);
                    scores.insert(category.clone(), values.clone());
                    out_cells.push(AxisCell {
                        axis: *axis_name,
                        category,
                        n: values.len(),
                        ci: Some(ci),
                    });
                }
                axes.push(AxisComparison {
                    pair: name.clone(),
                    axis: *axis_name,
                    cells: out_cells,
                    kruskal: kruskal_if_possible(&scores)?,
                });
            }
        } else {
            incomplete.push(name.clone());
        }
    }

    ctx.writer.text("compare.csv", &csv_string(csv_rows)?)?;
    if cmp.by_axis_pair.is_some() {
        ctx.writer.text("compare_axes.csv", &csv_string(axis_rows)?)?;
    }
    let output = CompareOutput {
        kruskal_groups: kruskal_if_possible(&group_scores)?,
        kruskal_pairs: kruskal_if_possible(&pair_scores)?,
        pairs,
        groups,
        axes,
        incomplete,
    };
    ctx.writer.json("compare.json", &output)?;
    ctx.writer.svg("compare.svg", &interval_svg("Median log AR by group and pair", &bars))?;
    ctx.finish()
}

// ---------------------------------------------------------------- regress

#[derive(Serialize)]
struct ModelOutput {
    name: String,
    title: String,
    interactions: Vec<(String, String)>,
    fit: RegressionFit,
}

#[derive(Serialize)]
struct RegressionOutput {
    destination: String,
    source: String,
    interests: Vec<String>,
    kept_interests: Vec<String>,
    observations: usize,
    cells: BTreeMap<String, usize>,
    skipped_cells: BTreeMap<String, usize>,
    kruskal_generations: Option<KruskalWallis>,
    models: Vec<ModelOutput>,
    incomplete: Vec<String>,
}

pub fn regress(options: &RunOptions) -> CliResult<Vec<PathBuf>> {
    let mut ctx = Context::open("regress", options)?;
    let r = ctx
        .study
        .config
        .regression
        .clone()
        .ok_or_else(|| Error::MissingConfig("[regression] section".into()))?;
    let analysis = ctx.study.config.analysis.clone();
    ctx.counts.require(regression_base_plan(&ctx.study, &ctx.catalog)?.queries())?;
    let dest_spec = ctx.study.population(&r.destination)?.clone();
    let source_spec = ctx.study.population(&r.source)?.clone();
    let missing = |label: &str| CliError::IncompleteSnapshot {
        missing: 1,
        planned: 1,
        first: format!("{label} / interests"),
    };
    let dest_counts = ctx
        .counts
        .interest_counts(&dest_spec, &ctx.catalog)?
        .ok_or_else(|| missing(&r.destination))?;
    let source_counts = ctx
        .counts
        .interest_counts(&source_spec, &ctx.catalog)?
        .ok_or_else(|| missing(&r.source))?;
    let dest_full = InterestRatioVector::from_weights(&r.destination, &ctx.catalog, dest_counts.clone())?;
    let top: InterestCatalog = analysis_catalog(&ctx.catalog, &dest_full, Some(r.top_k))?;
    ctx.counts.require(regression_cell_plan(&ctx.study, &top)?.queries())?;
    let dest_v = InterestRatioVector::from_weights(
        &r.destination,
        &top,
        crate::data::restrict_counts(&ctx.catalog, &dest_counts, &top),
    )?;
    let source_v = InterestRatioVector::from_weights(
        &r.source,
        &top,
        crate::data::restrict_counts(&ctx.catalog, &source_counts, &top),
    )?;
    let filter = assimlab_core::metrics::filter_interests(
        &dest_v,
        &source_v,
        analysis.percentile,
        assimlab_core::metrics::FilterOptions {
            base: analysis.percentile_base,
        },
    )?;

    let axes = ctx.study.regression_axes();
    let groups = regression_groups(&ctx.study)?;
    let generation_levels: Vec<String> = groups.iter().map(|(l, _, _)| l.clone()).collect();
    let mut observations = Vec::new();
    let mut cells_used = BTreeMap::new();
    let mut cells_skipped = BTreeMap::new();
    let mut generation_scores = GroupedScores::new();
    let mut incomplete = Vec::new();
    for (label, cells, contradictory) in &groups {
        let mut used = 0;
        let mut skipped = *contradictory;
        let mut medians = Vec::new();
        for cell in cells {
            let ratios = match ctx.counts.ratios(&cell.spec, &top) {
                Ok(Some(v)) => v,
                Ok(None) => {
                    incomplete.push(cell.spec.label.clone());
                    skipped += 1;
                    continue;
                }
                Err(Error::AllZero(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let report = assimilation_ratios(&ratios, &dest_v, Some(&source_v), &filter)?;
            let mut levels: BTreeMap<String, String> = cell
                .levels
                .iter()
                .map(|(a, c)| (a.title().to_string(), c.clone()))
                .collect();
            levels.insert(GENERATION_FACTOR.into(), label.clone());
            for row in &report.rows {
                observations.push(Observation {
                    levels: levels.clone(),
                    response: row.log_ar,
                });
            }
            medians.push(median(&report.log_ars())?);
            used += 1;
        }
        generation_scores.insert(label.clone(), medians);
        cells_used.insert(label.clone(), used);
        cells_skipped.insert(label.clone(), skipped);
    }
    if observations.is_empty() {
        return Err(Error::InsufficientData("no regression cell has nonzero counts".into()).into());
    }

    let mut factors: Vec<FactorSpec> = axes.iter().map(FactorSpec::from_axis).collect();
    factors.push(FactorSpec::new(GENERATION_FACTOR, generation_levels.clone(), &r.first_generation)?);
    let mut specs = vec![("main".to_string(), Vec::new())];
    specs.extend(r.models.iter().map(|m| (m.name.clone(), m.interactions.clone())));
    let mut models = Vec::new();
    for (name, interactions) in specs {
        let design = encode_design(&observations, &factors, &interactions)?;
        let fit = ols_fit(&design)?;
        let title = if interactions.is_empty() {
            format!("Regression on log assimilation score ({} as destination)", r.destination)
        } else {
            let terms: Vec<String> = interactions.iter().map(|(a, b)| format!("{a} * {b}")).collect();
            format!(
                "Regression on log assimilation score ({} as destination), {name}: {}",
                r.destination,
                terms.join(", ")
            )
        };
        ctx.writer.text(&format!("regression_{name}.csv"), &render_csv(&fit)?)?;
        ctx.writer.text(&format!("regression_{name}.txt"), &render_table(&fit, &title))?;
        models.push(ModelOutput {
            name,
            title,
            interactions,
            fit,
        });
    }
    let output = RegressionOutput {
        destination: r.destination.clone(),
        source: r.source.clone(),
        interests: top.ids().map(str::to_string).collect(),
        kept_interests: filter.kept.clone(),
        observations: observations.len(),
        cells: cells_used,
        skipped_cells: cells_skipped,
        kruskal_generations: kruskal_if_possible(&generation_scores)?,
        models,
        incomplete,
    };
    ctx.writer.json("regression.json", &output)?;
    ctx.finish()
}
