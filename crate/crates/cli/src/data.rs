//! Count access shared by the analysis commands.

use std::collections::BTreeSet;
use std::sync::Mutex;

use assimlab_core::audience::{
    AudienceQuery, CountBackend, HttpBackend, ReachClient, Snapshot, SnapshotBackend,
};
use assimlab_core::catalog::{InterestCatalog, PopulationSpec};
use assimlab_core::metrics::InterestRatioVector;
use assimlab_core::simulator::generate_world;
use assimlab_core::{Error, Result};

use crate::config::{BackendKind, Study};
use crate::error::{CliError, CliResult};

/// Opens the backend of `kind`; the snapshot is returned as well when the
/// counts come from one.
pub fn open_backend(
    study: &Study,
    kind: BackendKind,
    endpoint: Option<&str>,
) -> Result<(Box<dyn CountBackend>, Option<Snapshot>)> {
    match kind {
        BackendKind::Sim => {
            let world = generate_world(&study.scenario()?, study.seed)?;
            Ok((Box::new(world), None))
        }
        BackendKind::Http => {
            let endpoint = endpoint
                .map(str::to_string)
                .or_else(|| study.config.backend.endpoint.clone())
                .ok_or_else(|| Error::MissingConfig("backend.endpoint".into()))?;
            let mut backend = HttpBackend::new(endpoint);
            if let Ok(lines) = std::env::var(&study.config.backend.credentials_env) {
                backend = backend.with_credential_lines(&lines);
            }
            Ok((Box::new(backend), None))
        }
        BackendKind::Snapshot => {
            let path = study.snapshot_path();
            let snapshot = Snapshot::load(&path).map_err(|e| match e {
                Error::Io(io) => Error::Config {
                    path: path.clone(),
                    message: format!("{io}; run `collect` first"),
                },
                other => other,
            })?;
            Ok((Box::new(SnapshotBackend::new(&snapshot)), Some(snapshot)))
        }
    }
}

/// Counts with optional tolerance for queries a snapshot lacks.
pub struct Counts {
    client: ReachClient<Box<dyn CountBackend>>,
    snapshot: Option<Snapshot>,
    partial: bool,
    flagged: Mutex<BTreeSet<String>>,
}

impl Counts {
    pub fn new(backend: Box<dyn CountBackend>, snapshot: Option<Snapshot>, partial: bool) -> Self {
        Self {
            client: ReachClient::new(backend),
            snapshot,
            partial,
            flagged: Mutex::new(BTreeSet::new()),
        }
    }

    /// Fails with an incomplete-snapshot error if the snapshot lacks any of
    /// `queries` and partial results are not allowed.
    pub fn require(&self, queries: &[AudienceQuery]) -> CliResult<()> {
        let Some(snapshot) = &self.snapshot else {
            return Ok(());
        };
        let missing = snapshot.missing(queries);
        if missing.is_empty() || self.partial {
            return Ok(());
        }
        let first = &missing[0];
        Err(CliError::IncompleteSnapshot {
            missing: missing.len(),
            planned: queries.len(),
            first: match &first.interest {
                Some(i) => format!("{} / {i}", first.spec.label),
                None => format!("{} / total", first.spec.label),
            },
        })
    }

    pub fn is_snapshot(&self) -> bool {
        self.snapshot.is_some()
    }

    pub fn count(&self, spec: &PopulationSpec, interest: Option<&str>) -> Result<Option<u64>> {
        match self.client.count(spec, interest) {
            Ok(n) => Ok(Some(n)),
            Err(Error::NotInSnapshot { .. }) if self.partial => {
                self.flagged
                    .lock()
                    .expect("flag lock poisoned")
                    .insert(spec.label.clone());
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    /// Per-interest counts over `catalog`, or `None` if any is missing.
    pub fn interest_counts(&self, spec: &PopulationSpec, catalog: &InterestCatalog) -> Result<Option<Vec<f64>>> {
        let mut out = Vec::with_capacity(catalog.len());
        for id in catalog.ids() {
            match self.count(spec, Some(id))? {
                Some(n) => out.push(n as f64),
                None => return Ok(None),
            }
        }
        Ok(Some(out))
    }

    pub fn ratios(&self, spec: &PopulationSpec, catalog: &InterestCatalog) -> Result<Option<InterestRatioVector>> {
        match self.interest_counts(spec, catalog)? {
            Some(counts) => InterestRatioVector::from_weights(&spec.label, catalog, counts).map(Some),
            None => Ok(None),
        }
    }

    /// Populations skipped because the snapshot lacked some of their counts.
    pub fn flagged(&self) -> Vec<String> {
        self.flagged
            .lock()
            .expect("flag lock poisoned")
            .iter()
            .cloned()
            .collect()
    }
}

/// Counts of `catalog` interests restricted to `subset`.
pub fn restrict_counts(catalog: &InterestCatalog, counts: &[f64], subset: &InterestCatalog) -> Vec<f64> {
    subset
        .ids()
        .map(|id| counts[catalog.index_of(id).expect("subset of catalog")])
        .collect()
}
