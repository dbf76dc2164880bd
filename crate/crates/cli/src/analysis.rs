//! Per-pair assimilation computations shared by `ar`, `kde` and `compare`.

use assimlab_core::catalog::InterestCatalog;
use assimlab_core::metrics::{
    assimilation_ratios, filter_interests, AssimilationReport, FilterOptions, InterestRatioVector,
};

use crate::config::{derive_seed, pair_name, PairConfig};
use crate::context::{analysis_catalog, pair_plan, Context};
use crate::data::restrict_counts;
use crate::error::CliResult;

pub struct PairResult {
    pub name: String,
    pub pair: PairConfig,
    /// Catalog the ratios were normalized over.
    pub catalog: InterestCatalog,
    pub destination: InterestRatioVector,
    pub report: AssimilationReport,
}

/// Every configured pair; pairs with missing counts are `None` (only with
/// `--allow-partial`).
pub fn all_pairs(ctx: &Context) -> CliResult<Vec<(String, Option<PairResult>)>> {
    if ctx.study.config.pairs.is_empty() {
        return Err(crate::error::CliError::Usage("the config declares no [[pair]]".into()));
    }
    ctx.counts.require(pair_plan(&ctx.study, &ctx.catalog)?.queries())?;
    let results: Vec<CliResult<Option<PairResult>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ctx
            .study
            .config
            .pairs
            .iter()
            .map(|pair| scope.spawn(move || pair_result(ctx, pair)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("pair worker panicked"))
            .collect()
    });
    ctx.study
        .config
        .pairs
        .iter()
        .zip(results)
        .map(|(pair, r)| Ok((pair_name(pair), r?)))
        .collect()
}

pub fn pair_result(ctx: &Context, pair: &PairConfig) -> CliResult<Option<PairResult>> {
    let study = &ctx.study;
    let analysis = &study.config.analysis;
    let name = pair_name(pair);
    let full = &ctx.catalog;
    let counts_of = |label: &str| -> CliResult<Option<Vec<f64>>> {
        Ok(ctx.counts.interest_counts(study.population(label)?, full)?)
    };
    let (Some(dest), Some(source), Some(expat)) = (
        counts_of(&pair.destination)?,
        counts_of(&pair.source)?,
        counts_of(&pair.expat)?,
    ) else {
        return Ok(None);
    };
    let dest_full = InterestRatioVector::from_weights(&pair.destination, full, dest.clone())?;
    let catalog = analysis_catalog(full, &dest_full, analysis.top_k)?;
    let vector = |label: &str, counts: &[f64]| {
        InterestRatioVector::from_weights(label, &catalog, restrict_counts(full, counts, &catalog))
    };
    let dest_v = vector(&pair.destination, &dest)?;
    let source_v = vector(&pair.source, &source)?;
    let expat_v = vector(&pair.expat, &expat)?;
    let filter = filter_interests(
        &dest_v,
        &source_v,
        analysis.percentile,
        FilterOptions {
            base: analysis.percentile_base,
        },
    )?;
    let report = assimilation_ratios(&expat_v, &dest_v, Some(&source_v), &filter)?
        .with_ci(analysis.bootstrap, derive_seed(study.seed, &format!("ci:{name}")))?;
    Ok(Some(PairResult {
        name,
        pair: pair.clone(),
        catalog,
        destination: dest_v,
        report,
    }))
}
