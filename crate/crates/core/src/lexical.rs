//! Title tokenization and document × term matrices.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::wos::{parse_cited_reference, DocumentRecord};

/// A general English stoplist, one lowercase word per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("no {what} survived the frequency threshold")]
    Empty { what: &'static str },
    #[error("malformed matrix CSV: {0}")]
    Csv(String),
    #[error("invalid matrix: {0}")]
    Invalid(String),
}

impl From<csv::Error> for MatrixError {
    fn from(e: csv::Error) -> Self {
        MatrixError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMode {
    Binary,
    #[default]
    Count,
}

/// Lowercases and splits a title into word tokens.
///
/// Any non-alphanumeric character separates tokens, except a hyphen with
/// alphanumerics on both sides. Tokens shorter than two characters and
/// all-digit tokens are dropped.
pub fn tokenize_title(title: &str) -> Vec<String> {
    let chars: Vec<char> = title.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();

    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if c == '-'
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push('-');
        } else {
            flush_token(&mut current, &mut tokens);
        }
    }
    flush_token(&mut current, &mut tokens);
    tokens
}

fn flush_token(current: &mut String, tokens: &mut Vec<String>) {
    if current.chars().count() >= 2 && !current.chars().all(|c| c.is_ascii_digit()) {
        tokens.push(std::mem::take(current));
    } else {
        current.clear();
    }
}

pub fn filter_stopwords(tokens: Vec<String>, stoplist: &BTreeSet<String>) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !stoplist.contains(t))
        .collect()
}

/// Reads a stoplist file: one word per line, lowercased on read.
pub fn parse_stoplist(content: &str) -> BTreeSet<String> {
    content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Sparse documents × terms matrix of nonnegative integer cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermDocumentMatrix {
    doc_ids: Vec<String>,
    terms: Vec<String>,
    /// Per document, `(term index, value)` with strictly increasing term index
    /// and nonzero value.
    rows: Vec<Vec<(usize, u32)>>,
    mode: CellMode,
}

impl TermDocumentMatrix {
    /// Validates and builds a matrix from per-document sparse rows.
    pub fn new(
        doc_ids: Vec<String>,
        terms: Vec<String>,
        rows: Vec<Vec<(usize, u32)>>,
        mode: CellMode,
    ) -> Result<Self, MatrixError> {
        if doc_ids.len() != rows.len() {
            return Err(MatrixError::Invalid(format!(
                "{} doc ids for {} rows",
                doc_ids.len(),
                rows.len()
            )));
        }
        let unique: BTreeSet<&String> = terms.iter().collect();
        if unique.len() != terms.len() {
            return Err(MatrixError::Invalid("duplicate term labels".into()));
        }
        for row in &rows {
            if row.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(MatrixError::Invalid("row entries not sorted".into()));
            }
            if row.iter().any(|&(t, v)| t >= terms.len() || v == 0) {
                return Err(MatrixError::Invalid(
                    "row entry out of range or zero".into(),
                ));
            }
            if mode == CellMode::Binary && row.iter().any(|&(_, v)| v > 1) {
                return Err(MatrixError::Invalid(
                    "binary matrix with a cell above 1".into(),
                ));
            }
        }
        let m = TermDocumentMatrix {
            doc_ids,
            terms,
            rows,
            mode,
        };
        if let Some(j) = m.column_sums().iter().position(|&s| s == 0) {
            return Err(MatrixError::Invalid(format!(
                "term {:?} has an all-zero column",
                m.terms[j]
            )));
        }
        Ok(m)
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn mode(&self) -> CellMode {
        self.mode
    }

    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn row(&self, doc: usize) -> &[(usize, u32)] {
        &self.rows[doc]
    }

    pub fn get(&self, doc: usize, term: usize) -> u32 {
        self.rows[doc]
            .binary_search_by_key(&term, |&(t, _)| t)
            .map_or(0, |k| self.rows[doc][k].1)
    }

    pub fn column_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.terms.len()];
        for row in &self.rows {
            for &(t, v) in row {
                sums[t] += u64::from(v);
            }
        }
        sums
    }

    /// Same matrix with every positive cell clamped to 1.
    pub fn to_binary(&self) -> TermDocumentMatrix {
        TermDocumentMatrix {
            doc_ids: self.doc_ids.clone(),
            terms: self.terms.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(t, _)| (t, 1)).collect())
                .collect(),
            mode: CellMode::Binary,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_docs(), self.n_terms());
        for (d, row) in self.rows.iter().enumerate() {
            for &(t, v) in row {
                m[(d, t)] = f64::from(v);
            }
        }
        m
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let header = std::iter::once("doc_id").chain(self.terms.iter().map(String::as_str));
        w.write_record(header).expect("in-memory csv write");
        for (d, id) in self.doc_ids.iter().enumerate() {
            let mut dense = vec![0u32; self.terms.len()];
            for &(t, v) in &self.rows[d] {
                dense[t] = v;
            }
            let record = std::iter::once(id.clone()).chain(dense.iter().map(|v| v.to_string()));
            w.write_record(record).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }

    /// Reads the CSV written by [`to_csv`](Self::to_csv). The cell mode is
    /// `Binary` only if requested and every cell is 0 or 1.
    pub fn from_csv(text: &str, mode: CellMode) -> Result<Self, MatrixError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = r.headers()?.clone();
        if header.get(0) != Some("doc_id") {
            return Err(MatrixError::Csv("first header cell must be doc_id".into()));
        }
        let terms: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut doc_ids = Vec::new();
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != terms.len() + 1 {
                return Err(MatrixError::Csv(format!(
                    "row {} has {} cells, expected {}",
                    line + 2,
                    rec.len(),
                    terms.len() + 1
                )));
            }
            doc_ids.push(rec[0].to_string());
            let mut row = Vec::new();
            for (t, cell) in rec.iter().skip(1).enumerate() {
                let v: u32 = cell.trim().parse().map_err(|_| {
                    MatrixError::Csv(format!("row {}: bad cell {cell:?}", line + 2))
                })?;
                if v > 0 {
                    row.push((t, v));
                }
            }
            rows.push(row);
        }
        TermDocumentMatrix::new(doc_ids, terms, rows, mode)
    }

    pub fn to_triplet_json(&self) -> String {
        let entries: Vec<(usize, usize, u32)> = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(d, r)| r.iter().map(move |&(t, v)| (d, t, v)))
            .collect();
        let doc = TripletDoc {
            doc_ids: self.doc_ids.clone(),
            terms: self.terms.clone(),
            mode: self.mode,
            entries,
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_triplet_json(text: &str) -> Result<Self, MatrixError> {
        let doc: TripletDoc =
            serde_json::from_str(text).map_err(|e| MatrixError::Invalid(e.to_string()))?;
        let mut rows = vec![Vec::new(); doc.doc_ids.len()];
        for (d, t, v) in doc.entries {
            let row = rows
                .get_mut(d)
                .ok_or_else(|| MatrixError::Invalid(format!("doc index {d} out of range")))?;
            row.push((t, v));
        }
        for row in &mut rows {
            row.sort_unstable();
        }
        TermDocumentMatrix::new(doc.doc_ids, doc.terms, rows, doc.mode)
    }
}

#[derive(Serialize, Deserialize)]
struct TripletDoc {
    doc_ids: Vec<String>,
    terms: Vec<String>,
    mode: CellMode,
    entries: Vec<(usize, usize, u32)>,
}

/// Assembles a matrix from per-document `label -> count` maps, keeping only
/// labels whose corpus total is strictly above `min_total`. Columns are
/// ordered by descending total, ties alphabetical.
fn assemble(
    doc_ids: Vec<String>,
    per_doc: Vec<BTreeMap<String, u32>>,
    min_total: u64,
    mode: CellMode,
    what: &'static str,
) -> Result<TermDocumentMatrix, MatrixError> {
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in &per_doc {
        for (label, &n) in doc {
            *totals.entry(label.as_str()).or_insert(0) += u64::from(n);
        }
    }
    let mut kept: Vec<(&str, u64)> = totals.into_iter().filter(|&(_, n)| n > min_total).collect();
    if kept.is_empty() {
        return Err(MatrixError::Empty { what });
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let index: BTreeMap<&str, usize> = kept.iter().enumerate().map(|(i, &(l, _))| (l, i)).collect();

    let rows = per_doc
        .iter()
        .map(|doc| {
            let mut row: Vec<(usize, u32)> = doc
                .iter()
                .filter_map(|(label, &n)| {
                    let v = if mode == CellMode::Binary { 1 } else { n };
                    index.get(label.as_str()).map(|&t| (t, v))
                })
                .collect();
            row.sort_unstable();
            row
        })
        .collect();
    let terms = kept.into_iter().map(|(l, _)| l.to_string()).collect();
    TermDocumentMatrix::new(doc_ids, terms, rows, mode)
}

/// Title-word matrix: a word is kept iff its total frequency in the corpus
/// is strictly greater than `min_occurrences`.
pub fn build_word_matrix(
    records: &[DocumentRecord],
    stoplist: &BTreeSet<String>,
    min_occurrences: u64,
    mode: CellMode,
) -> Result<TermDocumentMatrix, MatrixError> {
    let per_doc = records
        .iter()
        .map(|rec| {
            let mut counts = BTreeMap::new();
            for tok in filter_stopwords(tokenize_title(&rec.title), stoplist) {
                *counts.entry(tok).or_insert(0u32) += 1;
            }
            counts
        })
        .collect();
    let ids = records.iter().map(|r| r.id.clone()).collect();
    assemble(ids, per_doc, min_occurrences, mode, "terms")
}

/// Cited-source matrix: cells count references from a document to a source.
///
/// With `matched_only`, only sources in `abbrevs` are considered. A source is
/// kept iff it occurs in more than `min_source_refs` references overall.
pub fn build_source_matrix(
    records: &[DocumentRecord],
    matched_only: bool,
    abbrevs: &BTreeSet<String>,
    min_source_refs: u64,
    mode: CellMode,
) -> Result<TermDocumentMatrix, MatrixError> {
    let per_doc = records
        .iter()
        .map(|rec| {
            let mut counts = BTreeMap::new();
            for raw in &rec.cited_refs {
                let Some(source) = parse_cited_reference(raw).source else {
                    continue;
                };
                if matched_only && !abbrevs.contains(&source) {
                    continue;
                }
                *counts.entry(source).or_insert(0u32) += 1;
            }
            counts
        })
        .collect();
    let ids = records.iter().map(|r| r.id.clone()).collect();
    assemble(ids, per_doc, min_source_refs, mode, "sources")
}
