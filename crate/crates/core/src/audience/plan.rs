use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::catalog::{AxisName, DemographicAxis, InterestCatalog, PopulationSpec};
use crate::error::{Error, Result};

use super::AudienceQuery;

/// Deduplicated, ordered list of count queries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct QueryPlan {
    queries: Vec<AudienceQuery>,
    #[serde(skip)]
    seen: HashSet<String>,
    /// Cross-section cells dropped because their selectors contradict the population.
    pub skipped_cells: usize,
}

impl QueryPlan {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends unless an equal request is already planned. Returns whether it was added.
    pub fn push(&mut self, query: AudienceQuery) -> bool {
        if self.seen.insert(query.request_id.clone()) {
            self.queries.push(query);
            true
        } else {
            false
        }
    }

    /// Total plus one query per catalog interest.
    pub fn push_population(&mut self, spec: &PopulationSpec, catalog: &InterestCatalog) {
        self.push(AudienceQuery::total(spec.clone()));
        for id in catalog.ids() {
            self.push(AudienceQuery::new(spec.clone(), Some(id.to_string())));
        }
    }

    pub fn extend(&mut self, other: QueryPlan) {
        self.skipped_cells += other.skipped_cells;
        for query in other.queries {
            self.push(query);
        }
    }

    pub fn queries(&self) -> &[AudienceQuery] {
        &self.queries
    }

    pub fn estimated_request_count(&self) -> usize {
        self.queries.len()
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn check_budget(&self, budget: Option<usize>) -> Result<()> {
        match budget {
            Some(budget) if self.len() > budget => Err(Error::PlanTooLarge {
                requested: self.len(),
                budget,
            }),
            _ => Ok(()),
        }
    }
}

/// One cell of a demographic cross-tabulation of a population.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossSection {
    pub spec: PopulationSpec,
    pub levels: BTreeMap<AxisName, String>,
}

/// Every combination of one category per axis, intersected with `population`.
///
/// Combinations that contradict the population's own selectors are dropped;
/// the second value is how many were dropped.
pub fn cross_sections(
    population: &PopulationSpec,
    axes: &[DemographicAxis],
) -> (Vec<CrossSection>, usize) {
    let mut cells = vec![BTreeMap::new()];
    for axis in axes {
        cells = cells
            .into_iter()
            .flat_map(|cell: BTreeMap<AxisName, String>| {
                axis.categories.iter().map(move |category| {
                    let mut next = cell.clone();
                    next.insert(axis.name, category.clone());
                    next
                })
            })
            .collect();
    }
    let mut skipped = 0;
    let mut out = Vec::with_capacity(cells.len());
    for levels in cells {
        let conflicts = levels.iter().any(|(axis, category)| {
            matches!(population.targeting.demographics.get(axis), Some(own) if own != category)
        });
        if conflicts {
            skipped += 1;
            continue;
        }
        let mut spec = population.clone();
        spec.targeting.demographics.extend(levels.clone());
        if !levels.is_empty() {
            let tag = levels
                .iter()
                .map(|(axis, category)| format!("{axis}={category}"))
                .collect::<Vec<_>>()
                .join(", ");
            spec.label = format!("{} | {tag}", population.label);
        }
        out.push(CrossSection { spec, levels });
    }
    (out, skipped)
}

/// Plans every (population × cross-section cell × interest) count plus the
/// per-cell totals, deduplicated by request id.
pub fn plan_queries(
    populations: &[PopulationSpec],
    catalog: &InterestCatalog,
    cross_section_axes: Option<&[DemographicAxis]>,
    budget: Option<usize>,
) -> Result<QueryPlan> {
    if populations.is_empty() {
        return Err(Error::InvalidArgument("no populations to plan".into()));
    }
    let mut plan = QueryPlan::new();
    for population in populations {
        let (cells, skipped) = cross_sections(population, cross_section_axes.unwrap_or(&[]));
        plan.skipped_cells += skipped;
        for cell in cells {
            plan.push_population(&cell.spec, catalog);
        }
    }
    plan.check_budget(budget)?;
    Ok(plan)
}
