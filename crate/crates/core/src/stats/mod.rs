//! Group comparisons and regression on assimilation scores.

mod design;
mod kruskal;
mod ols;
mod table;

pub use design::{encode_design, Column, DesignMatrix, FactorSpec, Observation, INTERCEPT};
pub use kruskal::{
    kruskal_wallis, midranks, GroupedScores, KruskalWallis, PValueMethod, EXACT_ENUMERATION_LIMIT,
};
pub use ols::{ols_fit, star_code, Coefficient, RegressionFit, RANK_TOLERANCE};
pub use table::{fit_footer, render_csv, render_table};

use crate::catalog::DemographicAxis;

pub const GENERATION_FACTOR: &str = "Generation";
pub const FIRST_GENERATION: &str = "Mexican immigrants";

/// Factors of the study regression: the five standard axes plus generation,
/// each with its usual reference level.
pub fn study_factors(later_generation_levels: &[String]) -> Vec<FactorSpec> {
    let mut factors: Vec<FactorSpec> = DemographicAxis::standard_axes()
        .iter()
        .map(FactorSpec::from_axis)
        .collect();
    if !later_generation_levels.is_empty() {
        let mut levels = vec![FIRST_GENERATION.to_string()];
        levels.extend(later_generation_levels.iter().cloned());
        factors.push(FactorSpec {
            name: GENERATION_FACTOR.into(),
            levels,
            reference: FIRST_GENERATION.into(),
        });
    }
    factors
}
