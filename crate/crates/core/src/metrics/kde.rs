use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::filter::percentile_sorted;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
    #[default]
    Silverman,
    /// `1.06 * sd * n^(-1/5)`.
    Scott,
    Fixed(f64),
}

/// Evenly spaced evaluation grid extending `pad` bandwidths past the data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
    pub pad: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self { points: 512, pad: 5.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub bandwidth: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl DensityCurve {
    /// Trapezoid-rule integral over the grid.
    pub fn mass(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.y.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum()
    }
}

fn bandwidth(sorted: &[f64], rule: BandwidthRule) -> Result<f64> {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let h = match rule {
        BandwidthRule::Silverman => {
            let iqr = percentile_sorted(sorted, 75.0) - percentile_sorted(sorted, 25.0);
            let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
            0.9 * spread * n.powf(-0.2)
        }
        BandwidthRule::Scott => 1.06 * sd * n.powf(-0.2),
        BandwidthRule::Fixed(h) => h,
    };
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth {h} must be positive")));
    }
    Ok(h)
}

/// Gaussian kernel density estimate of `values` on an even grid.
pub fn kde_density(values: &[f64], rule: BandwidthRule, grid: Grid) -> Result<DensityCurve> {
    if values.len() < 2 {
        return Err(Error::InsufficientData("density needs at least 2 values".into()));
    }
    if grid.points < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = bandwidth(&sorted, rule)?;
    let lo = sorted[0] - grid.pad * h;
    let hi = sorted[sorted.len() - 1] + grid.pad * h;
    let step = (hi - lo) / (grid.points - 1) as f64;
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let x: Vec<f64> = (0..grid.points).map(|k| lo + step * k as f64).collect();
    let y = x
        .iter()
        .map(|&at| {
            norm * sorted
                .iter()
                .map(|v| (-0.5 * ((at - v) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    Ok(DensityCurve { bandwidth: h, x, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_input_gives_symmetric_curve() {
        let curve = kde_density(&[-1.0, 1.0], BandwidthRule::Silverman, Grid::default()).unwrap();
        let n = curve.y.len();
        for k in 0..n {
            assert!((curve.y[k] - curve.y[n - 1 - k]).abs() < 1e-9);
            assert!((curve.x[k] + curve.x[n - 1 - k]).abs() < 1e-9);
        }
        assert!((curve.mass() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn identical_values_are_rejected() {
        assert!(matches!(
            kde_density(&[2.0, 2.0, 2.0], BandwidthRule::Silverman, Grid::default()),
            Err(Error::ZeroVariance)
        ));
    }
}
