//! Ingest of tagged bibliographic export files.
//!
//! The supported dialect is the tagged plain-text export: every field line
//! starts with a two-letter tag followed by a space, continuation lines are
//! indented by exactly three spaces, `ER` closes a record and `EF` closes
//! the file. Cited references (`CR`) are listed one per line.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// One bibliographic record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub title: String,
    pub doc_type: String,
    pub pub_year: Option<i32>,
    pub times_cited: u64,
    /// Value of the `NR` field as exported; may disagree with `cited_refs.len()`.
    pub n_refs: u64,
    pub cited_refs: Vec<String>,
}

/// A record-level problem found while parsing. Parsing continues past it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    /// 1-based line where the offending block starts.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for RecordError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedExport {
    pub records: Vec<DocumentRecord>,
    pub errors: Vec<RecordError>,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct Block {
    start_line: usize,
    fields: Vec<(String, Vec<String>)>,
}

impl Block {
    fn get(&self, tag: &str) -> Option<&[String]> {
        self.fields
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, v)| v.as_slice())
    }

    fn joined(&self, tag: &str) -> Option<String> {
        self.get(tag).map(|v| v.join(" "))
    }

    fn into_record(self, ordinal: usize, warnings: &mut Vec<String>) -> DocumentRecord {
        let id = self
            .joined("UT")
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| format!("rec-{ordinal}"));
        let title = self.joined("TI").unwrap_or_default();
        let doc_type = self.joined("DT").unwrap_or_default();

        let mut number = |tag: &str| -> Option<u64> {
            match self.joined(tag) {
                None => {
                    warnings.push(format!("record {id}: missing {tag}, using 0"));
                    None
                }
                Some(v) => match v.trim().parse::<u64>() {
                    Ok(n) => Some(n),
                    Err(_) => {
                        warnings.push(format!(
                            "record {id}: unreadable {tag} value {v:?}, using 0"
                        ));
                        None
                    }
                },
            }
        };
        let times_cited = number("TC").unwrap_or(0);
        let n_refs = number("NR").unwrap_or(0);

        let pub_year = match self.joined("PY") {
            Some(v) => match v.trim().parse::<i32>() {
                Ok(y) => Some(y),
                Err(_) => {
                    warnings.push(format!("record {id}: unreadable PY value {v:?}"));
                    None
                }
            },
            None => {
                warnings.push(format!("record {id}: missing PY"));
                None
            }
        };

        let cited_refs = self
            .get("CR")
            .map(|v| v.iter().filter(|s| !s.is_empty()).cloned().collect())
            .unwrap_or_default();

        DocumentRecord {
            id,
            title,
            doc_type,
            pub_year,
            times_cited,
            n_refs,
            cited_refs,
        }
    }
}

fn split_tag(line: &str) -> Option<(&str, &str)> {
    let bytes = line.as_bytes();
    if bytes.len() < 2 || !bytes[0].is_ascii_alphabetic() || !bytes[1].is_ascii_alphanumeric() {
        return None;
    }
    match bytes.get(2) {
        None => Some((&line[..2], "")),
        Some(b' ') => Some((&line[..2], line[3..].trim())),
        Some(_) => None,
    }
}

/// Parses a tagged export into records.
///
/// Blocks that are not closed by `ER` are reported in
/// [`ParsedExport::errors`] and skipped; parsing resumes at the next block.
pub fn parse_export(content: &str) -> ParsedExport {
    let content = content.strip_prefix('\u{feff}').unwrap_or(content);
    let mut out = ParsedExport::default();
    let mut current: Option<Block> = None;
    let mut ordinal = 0usize;

    for (idx, raw_line) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }

        if let Some(rest) = line.strip_prefix("   ") {
            match current.as_mut().and_then(|b| b.fields.last_mut()) {
                Some((_, values)) => values.push(rest.trim().to_string()),
                None => out
                    .warnings
                    .push(format!("line {line_no}: continuation line outside a field")),
            }
            continue;
        }

        let Some((tag, value)) = split_tag(line) else {
            out.warnings
                .push(format!("line {line_no}: unrecognised line ignored"));
            continue;
        };

        match tag {
            "FN" | "VR" if current.is_none() => {}
            "EF" => {
                if let Some(block) = current.take() {
                    out.errors.push(RecordError {
                        line: block.start_line,
                        message: "record not terminated by ER".into(),
                    });
                }
            }
            "ER" => match current.take() {
                Some(block) => {
                    ordinal += 1;
                    out.records
                        .push(block.into_record(ordinal, &mut out.warnings));
                }
                None => out
                    .warnings
                    .push(format!("line {line_no}: ER without an open record")),
            },
            _ => {
                if tag == "PT" {
                    if let Some(block) = current.take() {
                        out.errors.push(RecordError {
                            line: block.start_line,
                            message: "record not terminated by ER".into(),
                        });
                    }
                }
                let block = current.get_or_insert_with(|| Block {
                    start_line: line_no,
                    ..Block::default()
                });
                block
                    .fields
                    .push((tag.to_string(), vec![value.to_string()]));
            }
        }
    }

    if let Some(block) = current {
        out.errors.push(RecordError {
            line: block.start_line,
            message: "record not terminated by ER".into(),
        });
    }
    out
}

/// Writes records back out in the tagged dialect accepted by [`parse_export`].
pub fn write_export(records: &[DocumentRecord]) -> String {
    let mut out = String::from("FN Clarivate Analytics Web of Science\nVR 1.0\n");
    for rec in records {
        out.push_str("PT J\n");
        push_field(&mut out, "TI", std::slice::from_ref(&rec.title));
        push_field(&mut out, "DT", std::slice::from_ref(&rec.doc_type));
        if !rec.cited_refs.is_empty() {
            push_field(&mut out, "CR", &rec.cited_refs);
        }
        out.push_str(&format!("NR {}\n", rec.n_refs));
        out.push_str(&format!("TC {}\n", rec.times_cited));
        if let Some(year) = rec.pub_year {
            out.push_str(&format!("PY {year}\n"));
        }
        out.push_str(&format!("UT {}\n", rec.id));
        out.push_str("ER\n\n");
    }
    out.push_str("EF\n");
    out
}

fn push_field(out: &mut String, tag: &str, values: &[String]) {
    for (i, v) in values.iter().enumerate() {
        if i == 0 {
            out.push_str(tag);
            out.push(' ');
        } else {
            out.push_str("   ");
        }
        out.push_str(v);
        out.push('\n');
    }
}

/// Subfields of one cited-reference string.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CitedRef {
    pub raw: String,
    pub author: Option<String>,
    pub year: Option<i32>,
    /// Abbreviated source title, uppercased.
    pub source: Option<String>,
    pub volume: Option<String>,
    pub page: Option<String>,
    pub doi: Option<String>,
}

fn prefixed_by_digit(s: &str, prefix: char) -> bool {
    let mut chars = s.chars();
    chars.next() == Some(prefix) && chars.next().is_some_and(|c| c.is_ascii_digit())
}

fn is_volume(s: &str) -> bool {
    prefixed_by_digit(s, 'V')
}

fn is_page(s: &str) -> bool {
    prefixed_by_digit(s, 'P')
}

fn doi_value(s: &str) -> Option<&str> {
    let upper = s.get(..4)?;
    if upper.eq_ignore_ascii_case("DOI ") {
        Some(s[4..].trim())
    } else {
        None
    }
}

fn is_article_number(s: &str) -> bool {
    s.get(..5).is_some_and(|p| p.eq_ignore_ascii_case("ARTN "))
}

/// Splits a cited-reference string into positional subfields.
///
/// Never fails: subfields that do not fit the usual
/// `AUTHOR, YEAR, SOURCE, Vnn, Pnn, DOI x` layout are left empty.
pub fn parse_cited_reference(raw: &str) -> CitedRef {
    let mut parsed = CitedRef {
        raw: raw.to_string(),
        ..CitedRef::default()
    };
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let mut rest = parts.as_slice();

    if let Some((first, tail)) = rest.split_first() {
        if !first.is_empty() {
            parsed.author = Some(first.to_string());
        }
        rest = tail;
    }
    if let Some((second, tail)) = rest.split_first() {
        if !second.is_empty() && second.bytes().all(|b| b.is_ascii_digit()) {
            parsed.year = second.parse().ok();
            rest = tail;
        }
    }

    for part in rest {
        if part.is_empty() {
            continue;
        }
        if let Some(doi) = doi_value(part) {
            parsed.doi.get_or_insert_with(|| doi.to_string());
        } else if is_volume(part) {
            parsed.volume.get_or_insert_with(|| part.to_string());
        } else if is_page(part) {
            parsed.page.get_or_insert_with(|| part.to_string());
        } else if is_article_number(part) {
        } else if parsed.source.is_none() {
            parsed.source = Some(part.to_uppercase());
        }
    }
    parsed
}

/// Reads a journal-abbreviation list: one entry per line, `#` starts a comment.
pub fn parse_abbreviation_list(content: &str) -> BTreeSet<String> {
    content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_uppercase)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SourceMatch {
    pub matched: BTreeMap<String, usize>,
    pub unmatched: BTreeMap<String, usize>,
}

impl SourceMatch {
    pub fn matched_total(&self) -> usize {
        self.matched.values().sum()
    }

    pub fn unmatched_total(&self) -> usize {
        self.unmatched.values().sum()
    }
}

/// Classifies every reference with a source against the abbreviation list.
pub fn match_sources(refs: &[CitedRef], abbrevs: &BTreeSet<String>) -> SourceMatch {
    let mut out = SourceMatch::default();
    for source in refs.iter().filter_map(|r| r.source.as_deref()) {
        let key = source.trim().to_uppercase();
        if key.is_empty() {
            continue;
        }
        let bucket = if abbrevs.contains(&key) {
            &mut out.matched
        } else {
            &mut out.unmatched
        };
        *bucket.entry(key).or_insert(0) += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StatsRow {
    pub count: u64,
    pub times_cited_sum: u64,
    /// Parsed `CR` entries.
    pub cited_refs_sum: u64,
    /// Sum of the exported `NR` field.
    pub n_refs_sum: u64,
}

impl StatsRow {
    fn add(&mut self, other: &StatsRow) {
        self.count += other.count;
        self.times_cited_sum += other.times_cited_sum;
        self.cited_refs_sum += other.cited_refs_sum;
        self.n_refs_sum += other.n_refs_sum;
    }
}

/// Counts per document type plus a totals row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StatsTable {
    pub rows: BTreeMap<String, StatsRow>,
    pub totals: StatsRow,
}

impl StatsTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let row = |w: &mut csv::Writer<Vec<u8>>, label: &str, r: &StatsRow| {
            w.write_record([
                label.to_string(),
                r.count.to_string(),
                r.times_cited_sum.to_string(),
                r.cited_refs_sum.to_string(),
                r.n_refs_sum.to_string(),
            ])
            .expect("in-memory csv write");
        };
        w.write_record([
            "doc_type",
            "n",
            "times_cited",
            "cited_references_parsed",
            "cited_references_nr",
        ])
        .expect("in-memory csv write");
        for (label, r) in &self.rows {
            row(&mut w, label, r);
        }
        row(&mut w, "TOTAL", &self.totals);
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }
}

pub fn descriptive_stats(records: &[DocumentRecord]) -> StatsTable {
    let mut table = StatsTable::default();
    for rec in records {
        let r = StatsRow {
            count: 1,
            times_cited_sum: rec.times_cited,
            cited_refs_sum: rec.cited_refs.len() as u64,
            n_refs_sum: rec.n_refs,
        };
        table.rows.entry(rec.doc_type.clone()).or_default().add(&r);
        table.totals.add(&r);
    }
    table
}
