//! Interest ratios, the destination filter, assimilation ratios, proxy
//! validation and density export.

mod assimilation;
mod filter;
mod kde;
mod ratios;
mod validation;

pub use assimilation::{
    assimilation_ratios, bootstrap_median_ci, median, median_ar_ci, ArRow, AssimilationReport,
    MedianCi, MIN_INTERESTS_FOR_CI,
};
pub use filter::{filter_interests, percentile, FilterOptions, FilterReport, PercentileBase};
pub use kde::{kde_density, BandwidthRule, DensityCurve, Grid};
pub use ratios::{
    demographic_proportions, interest_ratios, top_k_interests, DemographicProportions,
    InterestRatioVector,
};
pub use validation::{
    kl_divergence, validate_proxy, AxisDivergence, BaselineSummary, ValidationReport,
    DEFAULT_BASELINE_TRIALS, KL_EPSILON, SIGNIFICANCE_QUANTILE,
};

use crate::error::Result;

/// Columns of the per-interest AR table.
pub const AR_CSV_HEADER: [&str; 7] = [
    "interest",
    "expat_ratio",
    "dest_ratio",
    "source_ratio",
    "ar",
    "log_ar",
    "epsilon_substituted",
];

/// One row per kept interest, columns as in [`AR_CSV_HEADER`].
pub fn ar_rows_csv(report: &AssimilationReport) -> Result<String> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(AR_CSV_HEADER)?;
    for row in &report.rows {
        out.write_record([
            row.interest.clone(),
            format_number(row.expat_ratio),
            format_number(row.dest_ratio),
            row.source_ratio.map(format_number).unwrap_or_default(),
            format_number(row.ar),
            format_number(row.log_ar),
            row.epsilon_substituted.to_string(),
        ])?;
    }
    finish(out)
}

/// Two columns `x,density`.
pub fn density_csv(curve: &DensityCurve) -> Result<String> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["x", "density"])?;
    for (x, y) in curve.x.iter().zip(&curve.y) {
        out.write_record([format_number(*x), format_number(*y)])?;
    }
    finish(out)
}

/// Shortest round-tripping text for a float; switches to exponent notation
/// for very small or large magnitudes.
pub fn format_number(x: f64) -> String {
    format!("{x:?}")
}

pub(crate) fn finish(out: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = out
        .into_inner()
        .map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
