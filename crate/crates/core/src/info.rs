//! Plug-in entropies over coded observations, interaction information in
//! two and three dimensions, and the signed mutual redundancy reported in
//! millibits.
//!
//! For three dimensions the interaction information is the
//! inclusion–exclusion sum
//!
//! ```text
//! T123 = H1 + H2 + H3 − H12 − H13 − H23 + H123
//! ```
//!
//! and the mutual redundancy is `R12 = −T12` for a pair and `R123 = T123`
//! for a triple. Negative `R` means the configuration reduces uncertainty.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum InfoError {
    #[error("probabilities must be nonnegative and finite, got {0}")]
    NegativeProbability(f64),
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("no cases")]
    NoCases,
    #[error("case {case} has {got} codes, expected {expected}")]
    Arity {
        case: usize,
        got: usize,
        expected: usize,
    },
    #[error("dimension {dim} out of range for {n_dims} dimensions")]
    DimOutOfRange { dim: usize, n_dims: usize },
    #[error("dimension set must be nonempty and without repeats")]
    BadDimSet,
    #[error("interaction information is implemented for 2 or 3 dimensions, got {0}")]
    UnsupportedArity(usize),
    #[error("binning needs at least 2 loading columns, got {0}")]
    TooFewColumns(usize),
    #[error("equal-width binning needs at least 2 bins, got {0}")]
    TooFewBins(usize),
}

/// Millibits per bit.
pub const MBITS_PER_BIT: f64 = 1000.0;

/// Shannon entropy in bits; `0 · log 0` is taken as 0.
pub fn shannon_entropy(dist: &[f64]) -> Result<f64, InfoError> {
    let mut total = 0.0;
    for &p in dist {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(InfoError::NegativeProbability(p));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(InfoError::NotNormalized(total));
    }
    Ok(-dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>())
}

/// Observations coded in a fixed number of dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteCases {
    cases: Vec<Vec<u32>>,
    dim_names: Vec<String>,
}

impl DiscreteCases {
    pub fn new(cases: Vec<Vec<u32>>, dim_names: Vec<String>) -> Result<Self, InfoError> {
        if cases.is_empty() {
            return Err(InfoError::NoCases);
        }
        for (i, c) in cases.iter().enumerate() {
            if c.len() != dim_names.len() {
                return Err(InfoError::Arity {
                    case: i,
                    got: c.len(),
                    expected: dim_names.len(),
                });
            }
        }
        Ok(DiscreteCases { cases, dim_names })
    }

    /// Cases with dimensions named `1..=d`.
    pub fn unnamed(cases: Vec<Vec<u32>>) -> Result<Self, InfoError> {
        let d = cases.first().map_or(0, Vec::len);
        Self::new(cases, (1..=d).map(|i| i.to_string()).collect())
    }

    pub fn cases(&self) -> &[Vec<u32>] {
        &self.cases
    }

    pub fn dim_names(&self) -> &[String] {
        &self.dim_names
    }

    pub fn n_dims(&self) -> usize {
        self.dim_names.len()
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    fn check_dims(&self, dims: &[usize]) -> Result<(), InfoError> {
        if dims.is_empty() {
            return Err(InfoError::BadDimSet);
        }
        for (k, &d) in dims.iter().enumerate() {
            if d >= self.n_dims() {
                return Err(InfoError::DimOutOfRange {
                    dim: d,
                    n_dims: self.n_dims(),
                });
            }
            if dims[..k].contains(&d) {
                return Err(InfoError::BadDimSet);
            }
        }
        Ok(())
    }
}

/// Entropy in bits of the empirical joint distribution of `dims`.
pub fn joint_entropy(cases: &DiscreteCases, dims: &[usize]) -> Result<f64, InfoError> {
    cases.check_dims(dims)?;
    let mut sorted = dims.to_vec();
    sorted.sort_unstable();
    let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    for c in &cases.cases {
        let key = sorted.iter().map(|&d| c[d]).collect();
        *counts.entry(key).or_insert(0) += 1;
    }
    let n = cases.len() as f64;
    Ok(-counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>())
}

/// Interaction information in bits: `H1 + H2 − H12` for two dimensions,
/// inclusion–exclusion over all subsets for three. May be negative for three.
pub fn mutual_information(cases: &DiscreteCases, dims: &[usize]) -> Result<f64, InfoError> {
    cases.check_dims(dims)?;
    let h = |d: &[usize]| joint_entropy(cases, d);
    match *dims {
        [a, b] => Ok(h(&[a])? + h(&[b])? - h(&[a, b])?),
        [a, b, c] => Ok(
            h(&[a])? + h(&[b])? + h(&[c])? - h(&[a, b])? - h(&[a, c])? - h(&[b, c])?
                + h(&[a, b, c])?,
        ),
        _ => Err(InfoError::UnsupportedArity(dims.len())),
    }
}

/// Mutual redundancy in millibits: `−T12` for a pair, `T123` for a triple.
pub fn mutual_redundancy(cases: &DiscreteCases, dims: &[usize]) -> Result<f64, InfoError> {
    let t = mutual_information(cases, dims)?;
    let r = if dims.len() == 2 { -t } else { t };
    Ok(r * MBITS_PER_BIT)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// Code 1 for a positive loading, 0 otherwise.
    #[default]
    Sign,
    /// `bins` equal intervals over each column's `[min, max]`, top edge inclusive.
    EqualWidth { bins: usize },
}

impl std::fmt::Display for Binning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Binning::Sign => f.write_str("sign"),
            Binning::EqualWidth { bins } => write!(f, "equal-width:{bins}"),
        }
    }
}

impl std::str::FromStr for Binning {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "sign" {
            return Ok(Binning::Sign);
        }
        let bins = s
            .strip_prefix("equal-width:")
            .or_else(|| s.strip_prefix("equal_width:"))
            .and_then(|b| b.parse().ok())
            .ok_or_else(|| format!("unknown binning {s:?}; use `sign` or `equal-width:<bins>`"))?;
        Ok(Binning::EqualWidth { bins })
    }
}

/// Codes each row of a terms × k loading matrix into one case.
/// Returns the cases and any warnings (constant columns).
#[allow(clippy::needless_range_loop)]
pub fn bin_loadings(
    loadings: &Matrix,
    scheme: Binning,
) -> Result<(DiscreteCases, Vec<String>), InfoError> {
    let (p, k) = (loadings.rows(), loadings.cols());
    if k < 2 {
        return Err(InfoError::TooFewColumns(k));
    }
    if p == 0 {
        return Err(InfoError::NoCases);
    }
    let mut warnings = Vec::new();
    let mut cases = vec![vec![0u32; k]; p];
    match scheme {
        Binning::Sign => {
            for (i, case) in cases.iter_mut().enumerate() {
                for (f, code) in case.iter_mut().enumerate() {
                    *code = u32::from(loadings[(i, f)] > 0.0);
                }
            }
        }
        Binning::EqualWidth { bins } => {
            if bins < 2 {
                return Err(InfoError::TooFewBins(bins));
            }
            for f in 0..k {
                let col = loadings.column(f);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi <= lo {
                    warnings.push(format!("factor{} is constant; all cases in one bin", f + 1));
                    continue;
                }
                let width = (hi - lo) / bins as f64;
                for (i, &v) in col.iter().enumerate() {
                    let b = ((v - lo) / width).floor() as usize;
                    cases[i][f] = b.min(bins - 1) as u32;
                }
            }
        }
    }
    let names = (1..=k).map(|f| format!("factor{f}")).collect();
    Ok((DiscreteCases::new(cases, names)?, warnings))
}

/// All entropy terms, interaction informations and redundancies for the
/// first two or three dimensions of a case set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyReport {
    pub dims: Vec<String>,
    pub n_cases: usize,
    pub binning: String,
    pub h1: f64,
    pub h2: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h3: Option<f64>,
    pub h12: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h13: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h23: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h123: Option<f64>,
    /// Pairwise `T` in bits, keyed `"12"`, `"13"`, `"23"`.
    pub t_pairs_bits: BTreeMap<String, f64>,
    /// Pairwise `R = −T` in millibits.
    pub r_pairs_mbits: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t123_bits: Option<f64>,
    /// `R123` for three dimensions, `R12` for two.
    pub r_mbits: f64,
}

impl RedundancyReport {
    /// Computes the report over the first `min(3, n_dims)` dimensions.
    pub fn compute(cases: &DiscreteCases, binning: &str) -> Result<Self, InfoError> {
        let d = cases.n_dims().min(3);
        if d < 2 {
            return Err(InfoError::UnsupportedArity(d));
        }
        let h = |dims: &[usize]| joint_entropy(cases, dims);
        let mut t_pairs = BTreeMap::new();
        let mut r_pairs = BTreeMap::new();
        let pairs: &[(usize, usize)] = if d == 3 {
            &[(0, 1), (0, 2), (1, 2)]
        } else {
            &[(0, 1)]
        };
        for &(a, b) in pairs {
            let key = format!("{}{}", a + 1, b + 1);
            let t = mutual_information(cases, &[a, b])?;
            t_pairs.insert(key.clone(), t);
            r_pairs.insert(key, -t * MBITS_PER_BIT);
        }
        let (h3, h13, h23, h123, t123) = if d == 3 {
            (
                Some(h(&[2])?),
                Some(h(&[0, 2])?),
                Some(h(&[1, 2])?),
                Some(h(&[0, 1, 2])?),
                Some(mutual_information(cases, &[0, 1, 2])?),
            )
        } else {
            (None, None, None, None, None)
        };
        let r_mbits = match t123 {
            Some(t) => t * MBITS_PER_BIT,
            None => r_pairs["12"],
        };
        Ok(RedundancyReport {
            dims: cases.dim_names()[..d].to_vec(),
            n_cases: cases.len(),
            binning: binning.to_string(),
            h1: h(&[0])?,
            h2: h(&[1])?,
            h3,
            h12: h(&[0, 1])?,
            h13,
            h23,
            h123,
            t_pairs_bits: t_pairs,
            r_pairs_mbits: r_pairs,
            t123_bits: t123,
            r_mbits,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

/// Formats millibits with an explicit sign, thousands separators and one
/// decimal, e.g. `- 1,888.9` or `+ 14.2`.
pub fn format_mbits(v: f64) -> String {
    let rounded = format!("{:.1}", v.abs());
    let (int, frac) = rounded.split_once('.').expect("one decimal");
    let mut grouped = String::new();
    for (i, ch) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    let sign = if v < 0.0 && rounded != "0.0" {
        '-'
    } else {
        '+'
    };
    format!("{sign} {grouped}.{frac}")
}

/// Two-column text table of redundancies, one row per labelled report.
pub fn format_table(rows: &[(&str, &RedundancyReport)]) -> String {
    let width = rows
        .iter()
        .map(|(l, _)| l.chars().count())
        .max()
        .unwrap_or(0)
        .max(8);
    let mut out = format!("{:<width$}  Mutual redundancy in mbits\n", "");
    for (label, rep) in rows {
        out.push_str(&format!(
            "{label:<width$}  {:>12}\n",
            format_mbits(rep.r_mbits)
        ));
    }
    out
}
