//! Per-run state: the loaded study, the count source and the artifact writer.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use assimlab_core::audience::{cross_sections, AudienceQuery, QueryPlan};
use assimlab_core::catalog::{DemographicAxis, InterestCatalog, PopulationSpec};
use assimlab_core::metrics::{top_k_interests, InterestRatioVector};
use serde::Serialize;

use crate::config::{BackendKind, Study};
use crate::data::{open_backend, Counts};
use crate::error::CliResult;
use crate::output::{ArtifactWriter, Provenance};

/// Command-line overrides shared by the study commands.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub allow_partial: bool,
}

pub struct Context {
    pub study: Study,
    pub backend_kind: BackendKind,
    pub catalog: InterestCatalog,
    pub counts: Counts,
    pub writer: ArtifactWriter,
    started: SystemTime,
}

impl Context {
    /// The backend a run with `options` would use, without opening it.
    pub fn requested_backend(options: &RunOptions) -> CliResult<BackendKind> {
        match options.backend {
            Some(kind) => Ok(kind),
            None => Ok(Study::load(&options.config)?.config.backend.kind),
        }
    }

    pub fn open(command: &str, options: &RunOptions) -> CliResult<Self> {
        let mut study = Study::load(&options.config)?;
        if let Some(seed) = options.seed {
            study.seed = seed;
        }
        if let Some(out) = &options.out {
            study.output_dir = out.clone();
        }
        let backend_kind = options.backend.unwrap_or(study.config.backend.kind);
        let catalog = study.catalog()?;
        let (backend, snapshot) = open_backend(&study, backend_kind, options.endpoint.as_deref())?;
        let counts = Counts::new(backend, snapshot, options.allow_partial);
        let provenance = Provenance {
            tool: "assimlab",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            study: study.config.study.clone(),
            config_sha256: study.config_sha256.clone(),
            seed: study.seed,
        };
        let writer = ArtifactWriter::new(&study.output_dir, provenance)?;
        Ok(Self {
            study,
            backend_kind,
            catalog,
            counts,
            writer,
            started: SystemTime::now(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.study.seed
    }

    /// Writes `run_metadata.json`, the only artifact holding wall-clock times.
    pub fn finish(mut self) -> CliResult<Vec<PathBuf>> {
        #[derive(Serialize)]
        struct Metadata {
            backend: BackendKind,
            started_unix_ms: u128,
            finished_unix_ms: u128,
            artifacts: Vec<String>,
            incomplete_populations: Vec<String>,
        }
        let ms = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        let artifacts = self
            .writer
            .written()
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let metadata = Metadata {
            backend: self.backend_kind,
            started_unix_ms: ms(self.started),
            finished_unix_ms: ms(SystemTime::now()),
            artifacts,
            incomplete_populations: self.counts.flagged(),
        };
        self.writer.json("run_metadata.json", &metadata)?;
        Ok(self.writer.written().to_vec())
    }
}

/// Destination vector of the analysis catalog: the full catalog, or the
/// destination's top-k interests when `top_k` is set.
pub fn analysis_catalog(
    catalog: &InterestCatalog,
    dest: &InterestRatioVector,
    top_k: Option<usize>,
) -> CliResult<InterestCatalog> {
    match top_k {
        Some(k) => {
            let ids: Vec<String> = top_k_interests(dest, k)?.into_iter().map(|(id, _)| id).collect();
            Ok(catalog.restrict(&ids)?)
        }
        None => Ok(catalog.clone()),
    }
}

/// Total plus per-interest queries for every population of every pair.
pub fn pair_plan(study: &Study, catalog: &InterestCatalog) -> CliResult<QueryPlan> {
    let mut plan = QueryPlan::new();
    for pair in &study.config.pairs {
        for label in [&pair.destination, &pair.source, &pair.expat] {
            plan.push_population(study.population(label)?, catalog);
        }
    }
    Ok(plan)
}

pub fn axis(name: assimlab_core::catalog::AxisName) -> DemographicAxis {
    DemographicAxis::standard_axes()
        .into_iter()
        .find(|a| a.name == name)
        .expect("every axis name has a standard axis")
}

/// Totals of every single-axis cell of the validated populations.
pub fn validation_plan(study: &Study) -> CliResult<QueryPlan> {
    let mut plan = QueryPlan::new();
    if study.config.validation.is_none() {
        return Ok(plan);
    }
    let truth = study.ground_truth()?;
    for label in study.validated_populations() {
        let spec = study.population(&label)?;
        for (name, _) in &truth {
            let (cells, skipped) = cross_sections(spec, &[axis(*name)]);
            plan.skipped_cells += skipped;
            for cell in cells {
                plan.push(AudienceQuery::total(cell.spec));
            }
        }
    }
    Ok(plan)
}

/// Expat cells of the by-axis comparison, over the full catalog (the pair's
/// analysis catalog is a subset).
pub fn compare_axes_plan(study: &Study, catalog: &InterestCatalog) -> CliResult<QueryPlan> {
    let mut plan = QueryPlan::new();
    let Some(cmp) = &study.config.compare else {
        return Ok(plan);
    };
    let Some(name) = &cmp.by_axis_pair else {
        return Ok(plan);
    };
    let pair = study.pair(name)?;
    let expat = study.population(&pair.expat)?;
    for name in &cmp.axes {
        let (cells, skipped) = cross_sections(expat, &[axis(*name)]);
        plan.skipped_cells += skipped;
        for cell in cells {
            plan.push_population(&cell.spec, catalog);
        }
    }
    Ok(plan)
}

/// Populations whose full-catalog counts the regression needs first.
pub fn regression_base_plan(study: &Study, catalog: &InterestCatalog) -> CliResult<QueryPlan> {
    let mut plan = QueryPlan::new();
    if let Some(r) = &study.config.regression {
        plan.push_population(study.population(&r.destination)?, catalog);
        plan.push_population(study.population(&r.source)?, catalog);
    }
    Ok(plan)
}

/// Every regression group with its cross-section cells.
pub fn regression_groups(study: &Study) -> CliResult<Vec<(String, Vec<assimlab_core::audience::CrossSection>, usize)>> {
    let Some(r) = &study.config.regression else {
        return Ok(Vec::new());
    };
    let axes = study.regression_axes();
    let mut labels = vec![r.first_generation.clone()];
    labels.extend(study.later_generations());
    labels
        .into_iter()
        .map(|label| {
            let spec: &PopulationSpec = study.population(&label)?;
            let (cells, skipped) = cross_sections(spec, &axes);
            Ok((label, cells, skipped))
        })
        .collect()
}

/// Per-interest cell queries over the regression catalog.
pub fn regression_cell_plan(study: &Study, top: &InterestCatalog) -> CliResult<QueryPlan> {
    let mut plan = QueryPlan::new();
    for (_, cells, skipped) in regression_groups(study)? {
        plan.skipped_cells += skipped;
        for cell in cells {
            for id in top.ids() {
                plan.push(AudienceQuery::new(cell.spec.clone(), Some(id.to_string())));
            }
        }
    }
    Ok(plan)
}

/// Upper bound on the cell queries before the top-k interests are known.
pub fn regression_cell_estimate(study: &Study) -> CliResult<usize> {
    let Some(r) = &study.config.regression else {
        return Ok(0);
    };
    let cells: usize = regression_groups(study)?.iter().map(|(_, c, _)| c.len()).sum();
    Ok(cells * r.top_k)
}
