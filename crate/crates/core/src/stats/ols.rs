use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

use super::design::{Column, DesignMatrix};

/// Pivot magnitude (on unit-norm columns) below which a column counts as
/// linearly dependent on the columns before it.
pub const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub column: Column,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub t: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub coefficients: Vec<Coefficient>,
    pub n: usize,
    pub df_residual: usize,
    pub r_squared: f64,
    pub f_statistic: Option<f64>,
    pub f_p_value: Option<f64>,
    /// Residual standard error.
    pub sigma: Option<f64>,
    /// Columns removed because they were zero in every row.
    pub dropped: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub fitted: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RegressionFit {
    pub fn coefficient(&self, key: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.column.key == key)
    }
}

/// `"***"` for p < 0.001, empty otherwise.
pub fn star_code(p: Option<f64>) -> &'static str {
    match p {
        Some(p) if p < 0.001 => "***",
        _ => "",
    }
}

/// Least squares via Householder QR on unit-norm columns.
///
/// All-zero columns are dropped with a warning; any other linear dependence
/// is a [`Error::RankDeficient`] naming the dependent columns. With as many
/// rows as columns the fit is exact and no inference is reported.
pub fn ols_fit(design: &DesignMatrix) -> Result<RegressionFit> {
    let n = design.rows;
    let mut warnings = design.warnings.clone();
    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for (c, column) in design.columns.iter().enumerate() {
        if (0..n).all(|r| design.get(r, c) == 0.0) && c != 0 {
            warnings.push(format!("dropped all-zero column {}", column.key));
            dropped.push(column.key.clone());
        } else {
            kept.push(c);
        }
    }
    let p = kept.len();
    if n < p || n == 0 {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {p} coefficients"
        )));
    }

    // Column-major copy, scaled to unit norm.
    let mut norms = Vec::with_capacity(p);
    let mut a: Vec<Vec<f64>> = kept
        .iter()
        .map(|&c| {
            let col = design.column_values(c);
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            norms.push(norm);
            col.into_iter().map(|v| if norm > 0.0 { v / norm } else { v }).collect()
        })
        .collect();
    let mut qty = design.response.clone();
    let mut diag = vec![0.0; p];
    let mut deficient = Vec::new();
    for k in 0..p {
        let tail = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if tail <= RANK_TOLERANCE {
            deficient.push(design.columns[kept[k]].key.clone());
            continue;
        }
        let alpha = if a[k][k] > 0.0 { -tail } else { tail };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        for col in a.iter_mut().skip(k) {
            let dot: f64 = v.iter().zip(&col[k..]).map(|(x, y)| x * y).sum();
            let scale = 2.0 * dot / vv;
            for (slot, vi) in col[k..].iter_mut().zip(&v) {
                *slot -= scale * vi;
            }
        }
        let dot: f64 = v.iter().zip(&qty[k..]).map(|(x, y)| x * y).sum();
        let scale = 2.0 * dot / vv;
        for (slot, vi) in qty[k..].iter_mut().zip(&v) {
            *slot -= scale * vi;
        }
        diag[k] = alpha;
    }
    if !deficient.is_empty() {
        return Err(Error::RankDeficient { columns: deficient });
    }
    let r = |i: usize, j: usize| if i == j { diag[i] } else { a[j][i] };

    let mut scaled_beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| r(i, j) * scaled_beta[j]).sum();
        scaled_beta[i] = (qty[i] - s) / r(i, i);
    }
    let beta: Vec<f64> = scaled_beta.iter().zip(&norms).map(|(b, n)| b / n).collect();

    let fitted: Vec<f64> = (0..n)
        .map(|row| kept.iter().zip(&beta).map(|(&c, b)| design.get(row, c) * b).sum())
        .collect();
    let residuals: Vec<f64> = design.response.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = design.response.iter().sum::<f64>() / n as f64;
    let tss: f64 = design.response.iter().map(|y| (y - mean).powi(2)).sum();
    let df = n - p;
    let exact = df == 0;
    let r_squared = if p == 1 || tss == 0.0 {
        if exact && p > 1 { 1.0 } else { 0.0 }
    } else if exact {
        1.0
    } else {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    };

    // Diagonal of (R^T R)^-1 from the inverse of the triangular factor.
    let mut rinv = vec![vec![0.0; p]; p];
    #[allow(clippy::needless_range_loop)]
    for j in 0..p {
        rinv[j][j] = 1.0 / r(j, j);
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|k| r(i, k) * rinv[k][j]).sum();
            rinv[i][j] = -s / r(i, i);
        }
    }
    let sigma = (!exact).then(|| (rss / df as f64).sqrt());
    let t_dist = (!exact).then(|| StudentsT::new(0.0, 1.0, df as f64).expect("positive df"));
    let coefficients = kept
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let se = sigma.map(|s| {
                let var: f64 = rinv[k][k..].iter().map(|v| v * v).sum();
                s * var.sqrt() / norms[k]
            });
            let t = se.map(|se| beta[k] / se);
            let p_value = t.zip(t_dist.as_ref()).map(|(t, dist)| (2.0 * dist.sf(t.abs())).min(1.0));
            Coefficient {
                column: design.columns[c].clone(),
                estimate: beta[k],
                std_error: se,
                t,
                p_value,
                stars: star_code(p_value).to_string(),
            }
        })
        .collect();
    let (f_statistic, f_p_value) = if exact || p < 2 {
        (None, None)
    } else {
        let f = ((tss - rss).max(0.0) / (p - 1) as f64) / (rss / df as f64);
        let dist = FisherSnedecor::new((p - 1) as f64, df as f64).expect("positive df");
        let pf = if f.is_finite() { dist.sf(f) } else { 0.0 };
        (Some(f), Some(pf))
    };
    Ok(RegressionFit {
        coefficients,
        n,
        df_residual: df,
        r_squared,
        f_statistic,
        f_p_value,
        sigma,
        dropped,
        warnings,
        fitted,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::design::{encode_design, FactorSpec, Observation};

    fn observations(rows: &[(&str, f64)]) -> Vec<Observation> {
        rows.iter()
            .map(|(g, y)| Observation {
                levels: [("G".to_string(), g.to_string())].into_iter().collect(),
                response: *y,
            })
            .collect()
    }

    #[test]
    fn intercept_only_is_the_mean() {
        let d = encode_design(&observations(&[("a", 1.0), ("a", 2.0), ("a", 6.0)]), &[], &[]).unwrap();
        let fit = ols_fit(&d).unwrap();
        assert!((fit.coefficients[0].estimate - 3.0).abs() < 1e-12);
        assert_eq!(fit.r_squared, 0.0);
        assert!(fit.f_statistic.is_none());
    }

    #[test]
    fn exactly_determined_system() {
        let g = FactorSpec::new("G", ["a", "b"], "a").unwrap();
        let d = encode_design(&observations(&[("a", 1.0), ("b", 4.0)]), &[g], &[]).unwrap();
        let fit = ols_fit(&d).unwrap();
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-12));
        assert_eq!(fit.r_squared, 1.0);
        assert!((fit.coefficients[1].estimate - 3.0).abs() < 1e-12);
        assert!(fit.coefficients[1].std_error.is_none());
    }

    #[test]
    fn two_groups_match_hand_computation() {
        let g = FactorSpec::new("G", ["a", "b"], "a").unwrap();
        let d = encode_design(
            &observations(&[("a", 1.0), ("a", 3.0), ("b", 4.0), ("b", 8.0)]),
            &[g],
            &[],
        )
        .unwrap();
        let fit = ols_fit(&d).unwrap();
        assert!((fit.coefficients[0].estimate - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1].estimate - 4.0).abs() < 1e-12);
        // sigma^2 = (1 + 1 + 4 + 4) / 2 = 5; se(diff) = sqrt(5 * (1/2 + 1/2)).
        assert!((fit.coefficients[1].std_error.unwrap() - 5f64.sqrt()).abs() < 1e-12);
        assert!((fit.r_squared - 16.0 / 26.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let mut d = encode_design(
            &observations(&[("a", 1.0), ("b", 2.0), ("b", 3.0), ("a", 0.0)]),
            &[FactorSpec::new("G", ["a", "b"], "a").unwrap()],
            &[],
        )
        .unwrap();
        let mut columns = d.columns.clone();
        columns.push(Column {
            key: "copy".into(),
            label: "copy".into(),
            group: None,
        });
        let x: Vec<f64> = (0..d.rows)
            .flat_map(|r| {
                let row = d.row(r).to_vec();
                let extra = row[1];
                row.into_iter().chain(std::iter::once(extra))
            })
            .collect();
        d.columns = columns;
        d.x = x;
        match ols_fit(&d) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, ["copy"]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }
}
