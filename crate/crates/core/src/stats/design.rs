use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::DemographicAxis;
use crate::error::{Error, Result};

pub const INTERCEPT: &str = "Intercept";

/// A categorical regressor with its omitted reference level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub levels: Vec<String>,
    pub reference: String,
}

impl FactorSpec {
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
        reference: impl Into<String>,
    ) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            levels: levels.into_iter().map(Into::into).collect(),
            reference: reference.into(),
        };
        if !spec.levels.contains(&spec.reference) {
            return Err(Error::UnknownCategory {
                axis: spec.name.clone(),
                category: spec.reference.clone(),
            });
        }
        Ok(spec)
    }

    /// Factor named after the axis title, with the axis's reference level.
    pub fn from_axis(axis: &DemographicAxis) -> Self {
        Self {
            name: axis.name.title().to_string(),
            levels: axis.categories.clone(),
            reference: axis.reference_level().to_string(),
        }
    }

    pub fn with_reference(mut self, reference: impl Into<String>) -> Result<Self> {
        let reference = reference.into();
        if !self.levels.contains(&reference) {
            return Err(Error::UnknownCategory {
                axis: self.name.clone(),
                category: reference,
            });
        }
        self.reference = reference;
        Ok(self)
    }

    pub fn non_reference(&self) -> impl Iterator<Item = &String> {
        self.levels.iter().filter(move |l| **l != self.reference)
    }
}

/// One scored observation: a category per factor and a response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub levels: BTreeMap<String, String>,
    pub response: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    /// Unique key, e.g. `"Age: 19-28"` or `"Age: 39-48 * Language: English"`.
    pub key: String,
    /// Row label in tables, e.g. `"19-28"` or `"39-48 * English"`.
    pub label: String,
    /// Table group heading (factor name or `"Age * Language"`); `None` for the intercept.
    pub group: Option<String>,
}

/// Dense row-major design with an intercept in column 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub columns: Vec<Column>,
    pub rows: usize,
    pub x: Vec<f64>,
    pub response: Vec<f64>,
    pub warnings: Vec<String>,
}

impl DesignMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.x[row * self.columns.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let p = self.columns.len();
        &self.x[row * p..(row + 1) * p]
    }

    pub fn column_values(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Index of the column with key `key`.
    pub fn position(&self, key: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.key == key)
    }
}

fn level_of<'a>(obs: &'a Observation, factor: &FactorSpec) -> Result<&'a str> {
    let level = obs
        .levels
        .get(&factor.name)
        .ok_or_else(|| Error::InvalidArgument(format!("observation has no {} level", factor.name)))?;
    if !factor.levels.contains(level) {
        return Err(Error::UnknownCategory {
            axis: factor.name.clone(),
            category: level.clone(),
        });
    }
    Ok(level)
}

/// Dummy-codes `observations`: an intercept, one indicator per non-reference
/// level of each factor, and the products of indicators for each pair in
/// `interactions` (factor names).
pub fn encode_design(
    observations: &[Observation],
    factors: &[FactorSpec],
    interactions: &[(String, String)],
) -> Result<DesignMatrix> {
    let mut columns = vec![Column {
        key: INTERCEPT.into(),
        label: INTERCEPT.into(),
        group: None,
    }];
    // Each column is a list of (factor index, level) that must all hold.
    let mut terms: Vec<Vec<(usize, String)>> = vec![Vec::new()];
    for (f, factor) in factors.iter().enumerate() {
        for level in factor.non_reference() {
            columns.push(Column {
                key: format!("{}: {level}", factor.name),
                label: level.clone(),
                group: Some(factor.name.clone()),
            });
            terms.push(vec![(f, level.clone())]);
        }
    }
    for (a, b) in interactions {
        let find = |name: &str| {
            factors
                .iter()
                .position(|f| f.name == name)
                .ok_or_else(|| Error::InvalidArgument(format!("interaction names unknown factor {name:?}")))
        };
        let (fa, fb) = (find(a)?, find(b)?);
        if fa == fb {
            return Err(Error::InvalidArgument(format!("factor {a} cannot interact with itself")));
        }
        for la in factors[fa].non_reference() {
            for lb in factors[fb].non_reference() {
                columns.push(Column {
                    key: format!("{a}: {la} * {b}: {lb}"),
                    label: format!("{la} * {lb}"),
                    group: Some(format!("{a} * {b}")),
                });
                terms.push(vec![(fa, la.clone()), (fb, lb.clone())]);
            }
        }
    }

    let p = columns.len();
    let mut x = Vec::with_capacity(observations.len() * p);
    let mut response = Vec::with_capacity(observations.len());
    for obs in observations {
        if !obs.response.is_finite() {
            return Err(Error::InvalidArgument("responses must be finite".into()));
        }
        let levels: Vec<&str> = factors
            .iter()
            .map(|f| level_of(obs, f))
            .collect::<Result<_>>()?;
        for term in &terms {
            let on = term.iter().all(|(f, level)| levels[*f] == level);
            x.push(if on { 1.0 } else { 0.0 });
        }
        response.push(obs.response);
    }
    let rows = observations.len();
    let mut warnings = Vec::new();
    for (c, column) in columns.iter().enumerate().skip(1) {
        let first = x.get(c).copied();
        if (0..rows).all(|r| Some(x[r * p + c]) == first) {
            warnings.push(format!("column {} is constant", column.key));
        }
    }
    Ok(DesignMatrix {
        columns,
        rows,
        x,
        response,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(pairs: &[(&str, &str)], y: f64) -> Observation {
        Observation {
            levels: pairs.iter().map(|(f, l)| (f.to_string(), l.to_string())).collect(),
            response: y,
        }
    }

    #[test]
    fn two_level_factor() {
        let gender = FactorSpec::new("Gender", ["F", "M"], "F").unwrap();
        let d = encode_design(
            &[obs(&[("Gender", "M")], 1.0), obs(&[("Gender", "F")], 0.0)],
            &[gender],
            &[],
        )
        .unwrap();
        assert_eq!(d.x, vec![1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn interaction_column_label() {
        let age = FactorSpec::new("Age", ["13-18", "39-48"], "13-18").unwrap();
        let lang = FactorSpec::new("Language", ["Bilingual", "English"], "Bilingual").unwrap();
        let d = encode_design(
            &[
                obs(&[("Age", "39-48"), ("Language", "English")], 1.0),
                obs(&[("Age", "13-18"), ("Language", "Bilingual")], 0.0),
            ],
            &[age, lang],
            &[("Age".into(), "Language".into())],
        )
        .unwrap();
        let col = d.columns.iter().position(|c| c.label == "39-48 * English").unwrap();
        assert_eq!(d.get(0, col), 1.0);
        assert_eq!(d.row(1), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn unknown_level_is_rejected() {
        let gender = FactorSpec::new("Gender", ["F", "M"], "F").unwrap();
        assert!(matches!(
            encode_design(&[obs(&[("Gender", "X")], 0.0)], &[gender], &[]),
            Err(Error::UnknownCategory { .. })
        ));
    }
}
