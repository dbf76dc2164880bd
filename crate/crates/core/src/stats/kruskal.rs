use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Largest number of distinct group assignments enumerated for the exact p-value.
pub const EXACT_ENUMERATION_LIMIT: u64 = 100_000;

/// Scores per group, in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupedScores {
    groups: Vec<(String, Vec<f64>)>,
}

impl GroupedScores {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends to an existing group of the same label or starts a new one.
    pub fn push(&mut self, label: impl Into<String>, value: f64) {
        let label = label.into();
        match self.groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, values)) => values.push(value),
            None => self.groups.push((label, vec![value])),
        }
    }

    pub fn insert(&mut self, label: impl Into<String>, values: Vec<f64>) {
        let label = label.into();
        for v in values {
            self.push(label.clone(), v);
        }
    }

    pub fn groups(&self) -> &[(String, Vec<f64>)] {
        &self.groups
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|(_, v)| v.len()).sum()
    }
}

impl<S: Into<String>> FromIterator<(S, Vec<f64>)> for GroupedScores {
    fn from_iter<I: IntoIterator<Item = (S, Vec<f64>)>>(iter: I) -> Self {
        let mut out = Self::new();
        for (label, values) in iter {
            out.insert(label, values);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Full enumeration of group assignments.
    Exact,
    ChiSquare,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    pub h: f64,
    pub df: usize,
    pub n: usize,
    /// Exact p when enumeration is feasible, else the chi-square p.
    pub p_value: f64,
    pub method: PValueMethod,
    pub p_chi_square: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_exact: Option<f64>,
}

/// Midranks (1-based) of `values` and the tie-correction factor.
pub fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut ties = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    let nf = n as f64;
    let correction = if n > 1 { 1.0 - ties / (nf * nf * nf - nf) } else { 0.0 };
    (ranks, correction)
}

/// Uncorrected statistic `12 / (N (N+1)) * sum R_i^2 / n_i - 3 (N+1)`.
fn raw_h(rank_sums: impl Iterator<Item = (f64, usize)>, n: usize) -> f64 {
    let nf = n as f64;
    let s: f64 = rank_sums.map(|(r, k)| r * r / k as f64).sum();
    12.0 / (nf * (nf + 1.0)) * s - 3.0 * (nf + 1.0)
}

fn assignments(sizes: &[usize]) -> Option<u64> {
    let mut remaining: u64 = sizes.iter().sum::<usize>() as u64;
    let mut total: u64 = 1;
    for &k in sizes {
        let mut c: u64 = 1;
        for j in 0..k as u64 {
            c = c.checked_mul(remaining - j)? / (j + 1);
        }
        total = total.checked_mul(c)?;
        if total > EXACT_ENUMERATION_LIMIT {
            return None;
        }
        remaining -= k as u64;
    }
    Some(total)
}

/// Enumerates every split of `ranks` into groups of `sizes` and counts those
/// whose statistic reaches `observed`.
fn exact_p(ranks: &[f64], sizes: &[usize], observed: f64) -> f64 {
    struct Walk<'a> {
        ranks: &'a [f64],
        sizes: &'a [usize],
        observed: f64,
        used: Vec<bool>,
        sums: Vec<f64>,
        hits: u64,
        total: u64,
    }
    impl Walk<'_> {
        fn group(&mut self, g: usize) {
            if g + 1 == self.sizes.len() {
                let last: f64 = (0..self.ranks.len())
                    .filter(|&i| !self.used[i])
                    .map(|i| self.ranks[i])
                    .sum();
                self.sums[g] = last;
                let h = raw_h(
                    self.sums.iter().copied().zip(self.sizes.iter().copied()),
                    self.ranks.len(),
                );
                self.total += 1;
                if h >= self.observed - 1e-9 {
                    self.hits += 1;
                }
                return;
            }
            self.sums[g] = 0.0;
            self.pick(g, 0, self.sizes[g]);
        }

        fn pick(&mut self, g: usize, from: usize, left: usize) {
            if left == 0 {
                self.group(g + 1);
                return;
            }
            for i in from..self.ranks.len() {
                if self.used[i] {
                    continue;
                }
                self.used[i] = true;
                self.sums[g] += self.ranks[i];
                self.pick(g, i + 1, left - 1);
                self.sums[g] -= self.ranks[i];
                self.used[i] = false;
            }
        }
    }
    let mut walk = Walk {
        ranks,
        sizes,
        observed,
        used: vec![false; ranks.len()],
        sums: vec![0.0; sizes.len()],
        hits: 0,
        total: 0,
    };
    walk.group(0);
    walk.hits as f64 / walk.total as f64
}

/// Kruskal-Wallis H test on midranks with tie correction.
///
/// The p-value is exact (full permutation distribution) when the number of
/// distinct group assignments is at most [`EXACT_ENUMERATION_LIMIT`], and the
/// chi-square approximation with `k - 1` degrees of freedom otherwise.
pub fn kruskal_wallis(scores: &GroupedScores) -> Result<KruskalWallis> {
    let groups = scores.groups();
    let k = groups.len();
    if k < 2 {
        return Err(Error::InsufficientData("Kruskal-Wallis needs at least 2 groups".into()));
    }
    if groups.iter().any(|(_, v)| v.is_empty()) {
        return Err(Error::InsufficientData("every group needs at least 1 value".into()));
    }
    let n = scores.total();
    if n < k + 1 {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {k} groups"
        )));
    }
    let values: Vec<f64> = groups.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    let sizes: Vec<usize> = groups.iter().map(|(_, v)| v.len()).collect();
    let (ranks, correction) = midranks(&values);
    if correction <= 0.0 {
        return Ok(KruskalWallis {
            h: 0.0,
            df: k - 1,
            n,
            p_value: 1.0,
            method: PValueMethod::Exact,
            p_chi_square: 1.0,
            p_exact: Some(1.0),
        });
    }
    let mut sums = Vec::with_capacity(k);
    let mut at = 0;
    for &size in &sizes {
        sums.push(ranks[at..at + size].iter().sum::<f64>());
        at += size;
    }
    let raw = raw_h(sums.into_iter().zip(sizes.iter().copied()), n);
    let h = (raw / correction).max(0.0);
    let chi = ChiSquared::new((k - 1) as f64).expect("positive degrees of freedom");
    let p_chi_square = chi.sf(h).clamp(0.0, 1.0);
    let p_exact = assignments(&sizes).map(|_| exact_p(&ranks, &sizes, raw));
    Ok(KruskalWallis {
        h,
        df: k - 1,
        n,
        p_value: p_exact.unwrap_or(p_chi_square),
        method: if p_exact.is_some() {
            PValueMethod::Exact
        } else {
            PValueMethod::ChiSquare
        },
        p_chi_square,
        p_exact,
    })
}
