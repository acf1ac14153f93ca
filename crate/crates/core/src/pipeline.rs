//! Stage-by-stage orchestration. Every stage reads the previous stage's
//! artifact from the output directory and writes its own, so the stages can
//! be run one at a time or chained by [`run_pipeline`] with identical results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::factor::{
    self, bipartite_factor_network, correlation_matrix, principal_components, read_factor_csv,
    FactorError, FactorSolution,
};
use crate::info::{bin_loadings, Binning, InfoError, RedundancyReport};
use crate::lexical::{
    build_source_matrix, build_word_matrix, parse_stoplist, CellMode, MatrixError,
    TermDocumentMatrix, DEFAULT_STOPWORDS,
};
use crate::linalg::Matrix;
use crate::network::{
    cooccurrence, cosine_matrix, export_clu, export_pajek, giant_component, louvain,
    threshold_network, NetworkError, WeightedNetwork,
};
use crate::wos::{descriptive_stats, parse_abbreviation_list, parse_export, DocumentRecord};

pub const RECORDS_FILE: &str = "records.json";
pub const STATS_FILE: &str = "stats.csv";
pub const MATRIX_FILE: &str = "matrix.csv";
pub const COOCCURRENCE_NET: &str = "cooccurrence.net";
pub const COOCCURRENCE_CLU: &str = "cooccurrence.clu";
pub const COSINE_NET: &str = "cosine.net";
pub const COSINE_CLU: &str = "cosine.clu";
pub const FACTORS_FILE: &str = "factors.csv";
pub const FACTOR_MAP_NET: &str = "factor_map.net";
pub const REDUNDANCY_FILE: &str = "redundancy.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Which document × variable matrix the downstream stages analyse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// Title words.
    #[default]
    Words,
    /// All cited sources.
    Sources,
    /// Cited sources found in the abbreviation list.
    MatchedSources,
}

impl std::str::FromStr for MatrixKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "words" => Ok(MatrixKind::Words),
            "sources" => Ok(MatrixKind::Sources),
            "matched-sources" | "matched_sources" => Ok(MatrixKind::MatchedSources),
            _ => Err(format!(
                "unknown matrix kind {s:?}; use words, sources or matched-sources"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_path: Option<PathBuf>,
    /// Falls back to the bundled English stoplist.
    pub stopword_path: Option<PathBuf>,
    pub abbrev_path: Option<PathBuf>,
    /// A word is kept iff it occurs strictly more often than this.
    pub word_min_occurrences: u64,
    /// A source is kept iff it is cited strictly more often than this.
    pub source_min_docs: u64,
    /// Cosine edges are kept iff strictly above this.
    pub cosine_threshold: f64,
    pub k_factors: usize,
    pub binning: Binning,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub matrix_kind: MatrixKind,
    pub cell_mode: CellMode,
    pub kaiser_normalization: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input_path: None,
            stopword_path: None,
            abbrev_path: None,
            word_min_occurrences: 2,
            source_min_docs: 1,
            cosine_threshold: 0.2,
            k_factors: 3,
            binning: Binning::Sign,
            seed: 0,
            output_dir: PathBuf::from("coword-out"),
            matrix_kind: MatrixKind::Words,
            cell_mode: CellMode::Count,
            kaiser_normalization: true,
        }
    }
}

impl PipelineConfig {
    /// Parses a JSON config. Relative paths are resolved against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, String> {
        let mut cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| format!("invalid config: {e}"))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        for p in [
            &mut cfg.input_path,
            &mut cfg.stopword_path,
            &mut cfg.abbrev_path,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(-1.0..=1.0).contains(&self.cosine_threshold) {
            return Err(format!(
                "cosine_threshold must lie in [-1, 1], got {}",
                self.cosine_threshold
            ));
        }
        if self.k_factors < 2 {
            return Err(format!(
                "k_factors must be at least 2, got {}",
                self.k_factors
            ));
        }
        if let Binning::EqualWidth { bins } = self.binning {
            if bins < 2 {
                return Err(format!(
                    "equal-width binning needs at least 2 bins, got {bins}"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Stats,
    Matrix,
    Network,
    Factors,
    Redundancy,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Stats,
        Stage::Matrix,
        Stage::Network,
        Stage::Factors,
        Stage::Redundancy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Stats => "stats",
            Stage::Matrix => "matrix",
            Stage::Network => "network",
            Stage::Factors => "factors",
            Stage::Redundancy => "redundancy",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing {file}: run stage `{producer}` first")]
    MissingUpstream { file: String, producer: Stage },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("the input contains no records")]
    EmptyCorpus,
    #[error("{file}: {message}")]
    Artifact { file: String, message: String },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Info(#[from] InfoError),
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

/// Files written and warnings raised by one stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageOutput {
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

fn read_text(path: &Path) -> Result<String, StageError> {
    fs::read_to_string(path).map_err(|source| StageError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_upstream(cfg: &PipelineConfig, file: &str, producer: Stage) -> Result<String, StageError> {
    let path = cfg.output_dir.join(file);
    if !path.exists() {
        return Err(StageError::MissingUpstream {
            file: file.to_string(),
            producer,
        });
    }
    read_text(&path)
}

fn write_artifact(
    cfg: &PipelineConfig,
    out: &mut StageOutput,
    file: &str,
    content: &str,
) -> Result<(), StageError> {
    let io = |source| StageError::Io {
        path: cfg.output_dir.join(file),
        source,
    };
    fs::create_dir_all(&cfg.output_dir).map_err(io)?;
    fs::write(cfg.output_dir.join(file), content).map_err(io)?;
    out.files.push(file.to_string());
    Ok(())
}

fn remove_stale(cfg: &PipelineConfig, file: &str) {
    let _ = fs::remove_file(cfg.output_dir.join(file));
}

fn load_records(cfg: &PipelineConfig) -> Result<Vec<DocumentRecord>, StageError> {
    let text = read_upstream(cfg, RECORDS_FILE, Stage::Ingest)?;
    serde_json::from_str(&text).map_err(|e| StageError::Artifact {
        file: RECORDS_FILE.into(),
        message: e.to_string(),
    })
}

pub fn load_stoplist(cfg: &PipelineConfig) -> Result<BTreeSet<String>, StageError> {
    Ok(match &cfg.stopword_path {
        Some(p) => parse_stoplist(&read_text(p)?),
        None => parse_stoplist(DEFAULT_STOPWORDS),
    })
}

fn load_abbreviations(cfg: &PipelineConfig) -> Result<BTreeSet<String>, StageError> {
    match &cfg.abbrev_path {
        Some(p) => Ok(parse_abbreviation_list(&read_text(p)?)),
        None => Ok(BTreeSet::new()),
    }
}

fn load_matrix(cfg: &PipelineConfig) -> Result<TermDocumentMatrix, StageError> {
    let text = read_upstream(cfg, MATRIX_FILE, Stage::Matrix)?;
    Ok(TermDocumentMatrix::from_csv(&text, cfg.cell_mode)?)
}

/// Runs one stage against the artifacts already in `cfg.output_dir`.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<StageOutput, PipelineError> {
    let result = cfg
        .validate()
        .map_err(StageError::Config)
        .and_then(|()| match stage {
            Stage::Ingest => ingest_stage(cfg),
            Stage::Stats => stats_stage(cfg),
            Stage::Matrix => matrix_stage(cfg),
            Stage::Network => network_stage(cfg),
            Stage::Factors => factors_stage(cfg),
            Stage::Redundancy => redundancy_stage(cfg),
        });
    result.map_err(|source| PipelineError { stage, source })
}

fn ingest_stage(cfg: &PipelineConfig) -> Result<StageOutput, StageError> {
    let path = cfg
        .input_path
        .as_ref()
        .ok_or_else(|| StageError::Config("input_path is not set".into()))?;
    let parsed = parse_export(&read_text(path)?);
    if parsed.records.is_empty() {
        return Err(StageError::EmptyCorpus);
    }
    let mut out = StageOutput {
        warnings: parsed.warnings,
        ..StageOutput::default()
    };
    out.warnings.extend(
        parsed
            .errors
            .iter()
            .map(|e| format!("skipped record at {e}")),
    );
    let mut json = serde_json::to_string_pretty(&parsed.records).expect("serializable");
    json.push('\n');
    write_artifact(cfg, &mut out, RECORDS_FILE, &json)?;
    Ok(out)
}

fn stats_stage(cfg: &PipelineConfig) -> Result<StageOutput, StageError> {
    let records = load_records(cfg)?;
    let mut out = StageOutput::default();
    write_artifact(
        cfg,
        &mut out,
        STATS_FILE,
        &descriptive_stats(&records).to_csv(),
    )?;
    Ok(out)
}

fn matrix_stage(cfg: &PipelineConfig) -> Result<StageOutput, StageError> {
    let records = load_records(cfg)?;
    let matrix = match cfg.matrix_kind {
        MatrixKind::Words => build_word_matrix(
            &records,
            &load_stoplist(cfg)?,
            cfg.word_min_occurrences,
            cfg.cell_mode,
        )?,
        MatrixKind::Sources | MatrixKind::MatchedSources => {
            let abbrevs = load_abbreviations(cfg)?;
            let matched_only = cfg.matrix_kind == MatrixKind::MatchedSources;
            if matched_only && abbrevs.is_empty() {
                return Err(StageError::Config(
                    "matched-sources needs a non-empty abbreviation list (abbrev_path)".into(),
                ));
            }
            build_source_matrix(
                &records,
                matched_only,
                &abbrevs,
                cfg.source_min_docs,
                cfg.cell_mode,
            )?
        }
    };
    let mut out = StageOutput::default();
    write_artifact(cfg, &mut out, MATRIX_FILE, &matrix.to_csv())?;
    Ok(out)
}

/// Thresholds a similarity matrix, keeps the giant component and attaches a
/// Louvain partition when the component has edges.
pub fn community_network(
    sim: &Matrix,
    labels: &[String],
    threshold: f64,
    seed: u64,
    what: &str,
    warnings: &mut Vec<String>,
) -> Result<WeightedNetwork, NetworkError> {
    let full = threshold_network(sim, labels, threshold);
    let giant = giant_component(&full);
    if giant.n_nodes() < full.n_nodes() {
        warnings.push(format!(
            "{what} network: giant component keeps {} of {} nodes",
            giant.n_nodes(),
            full.n_nodes()
        ));
    }
    if giant.edges().is_empty() {
        warnings.push(format!(
            "{what} network has no edges; no partition computed"
        ));
        return Ok(giant);
    }
    let (partition, _) = louvain(&giant, seed)?;
    giant.with_partition(partition)
}

fn write_network(
    cfg: &PipelineConfig,
    out: &mut StageOutput,
    net: &WeightedNetwork,
    net_file: &str,
    clu_file: &str,
) -> Result<(), StageError> {
    write_artifact(cfg, out, net_file, &export_pajek(net))?;
    match export_clu(net) {
        Some(clu) => write_artifact(cfg, out, clu_file, &clu)?,
        None => remove_stale(cfg, clu_file),
    }
    Ok(())
}

fn network_stage(cfg: &PipelineConfig) -> Result<StageOutput, StageError> {
    let m = load_matrix(cfg)?;
    let mut out = StageOutput::default();
    let cooc = community_network(
        &cooccurrence(&m),
        m.terms(),
        0.0,
        cfg.seed,
        "co-occurrence",
        &mut out.warnings,
    )?;
    write_network(cfg, &mut out, &cooc, COOCCURRENCE_NET, COOCCURRENCE_CLU)?;
    let cos = community_network(
        &cosine_matrix(&m),
        m.terms(),
        cfg.cosine_threshold,
        cfg.seed,
        "cosine",
        &mut out.warnings,
    )?;
    write_network(cfg, &mut out, &cos, COSINE_NET, COSINE_CLU)?;
    Ok(out)
}

/// Correlation, principal components and Varimax for a matrix.
pub fn factor_solution(
    m: &TermDocumentMatrix,
    k: usize,
    kaiser: bool,
    warnings: &mut Vec<String>,
) -> Result<FactorSolution, FactorError> {
    let (r, w) = correlation_matrix(m)?;
    warnings.extend(w);
    let unrotated = principal_components(&r, m.terms(), k)?;
    Ok(factor::rotate(&unrotated, kaiser).0)
}

/// Redundancy among the first three columns of a loading matrix.
pub fn loading_redundancy(
    loadings: &Matrix,
    binning: Binning,
    warnings: &mut Vec<String>,
) -> Result<RedundancyReport, InfoError> {
    let (cases, w) = bin_loadings(loadings, binning)?;
    warnings.extend(w);
    RedundancyReport::compute(&cases, &binning.to_string())
}

/// In-memory word analysis: matrix, rotated factors and redundancy report.
#[derive(Debug, Clone)]
pub struct WordAnalysis {
    pub matrix: TermDocumentMatrix,
    pub solution: FactorSolution,
    pub report: RedundancyReport,
    pub warnings: Vec<String>,
}

/// Runs the word-matrix, factor and redundancy steps without touching disk.
/// Unlike the file-based stages, loadings are binned at full precision.
pub fn analyze_titles(
    records: &[DocumentRecord],
    stoplist: &BTreeSet<String>,
    cfg: &PipelineConfig,
) -> Result<WordAnalysis, StageError> {
    cfg.validate().map_err(StageError::Config)?;
    let matrix = build_word_matrix(records, stoplist, cfg.word_min_occurrences, cfg.cell_mode)?;
    let mut warnings = Vec::new();
    let solution = factor_solution(
        &matrix,
        cfg.k_factors,
        cfg.kaiser_normalization,
        &mut warnings,
    )?;
    let report = loading_redundancy(&solution.loadings, cfg.binning, &mut warnings)?;
    Ok(WordAnalysis {
        matrix,
        solution,
        report,
        warnings,
    })
}

fn factors_stage(cfg: &PipelineConfig) -> Result<StageOutput, StageError> {
    let m = load_matrix(cfg)?;
    let mut out = StageOutput::default();
    let sol = factor_solution(
        &m,
        cfg.k_factors,
        cfg.kaiser_normalization,
        &mut out.warnings,
    )?;
    write_artifact(cfg, &mut out, FACTORS_FILE, &sol.to_csv())?;
    let map = bipartite_factor_network(&sol, true);
    let dropped = sol.terms.len() + sol.k() - map.n_nodes();
    if dropped > 0 {
        out.warnings.push(format!(
            "factor map omits {dropped} terms without positive loadings"
        ));
    }
    write_artifact(cfg, &mut out, FACTOR_MAP_NET, &export_pajek(&map))?;
    Ok(out)
}

fn redundancy_stage(cfg: &PipelineConfig) -> Result<StageOutput, StageError> {
    let text = read_upstream(cfg, FACTORS_FILE, Stage::Factors)?;
    let (_, loadings) = read_factor_csv(&text)?;
    let mut out = StageOutput::default();
    let report = loading_redundancy(&loadings, cfg.binning, &mut out.warnings)?;
    write_artifact(cfg, &mut out, REDUNDANCY_FILE, &report.to_json())?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: String,
    pub file: String,
    /// SHA-256 of the file; absent for the manifest itself.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub config: PipelineConfig,
    /// SHA-256 of each input, keyed by role.
    pub input_digests: BTreeMap<String, String>,
    pub outputs: Vec<ManifestEntry>,
    /// Wall-clock milliseconds per stage. The only run-dependent field.
    pub timings_ms: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn input_digests(cfg: &PipelineConfig) -> Result<BTreeMap<String, String>, StageError> {
    let mut digests = BTreeMap::new();
    let mut add = |role: &str, path: &Option<PathBuf>| -> Result<(), StageError> {
        if let Some(p) = path {
            let bytes = fs::read(p).map_err(|source| StageError::Io {
                path: p.clone(),
                source,
            })?;
            digests.insert(role.to_string(), sha256_hex(&bytes));
        }
        Ok(())
    };
    add("input", &cfg.input_path)?;
    add("stopwords", &cfg.stopword_path)?;
    add("abbreviations", &cfg.abbrev_path)?;
    if cfg.stopword_path.is_none() {
        digests.insert(
            "stopwords".into(),
            format!("builtin:{}", sha256_hex(DEFAULT_STOPWORDS.as_bytes())),
        );
    }
    Ok(digests)
}

/// Runs every stage in order and writes `manifest.json`.
///
/// On failure, files written during this run are removed and the error
/// names the failing stage.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    let mut written: Vec<(Stage, String)> = Vec::new();
    let mut warnings = Vec::new();
    let mut timings = BTreeMap::new();

    let cleanup = |written: &[(Stage, String)]| {
        for (_, f) in written {
            remove_stale(cfg, f);
        }
    };

    for stage in Stage::ALL {
        let start = Instant::now();
        match run_stage(stage, cfg) {
            Ok(out) => {
                timings.insert(
                    stage.name().to_string(),
                    start.elapsed().as_secs_f64() * 1e3,
                );
                warnings.extend(out.warnings.into_iter().map(|w| format!("{stage}: {w}")));
                written.extend(out.files.into_iter().map(|f| (stage, f)));
            }
            Err(e) => {
                cleanup(&written);
                return Err(e);
            }
        }
    }

    let finish = || -> Result<RunManifest, StageError> {
        let mut outputs = Vec::with_capacity(written.len() + 1);
        for (stage, file) in &written {
            let path = cfg.output_dir.join(file);
            let bytes = fs::read(&path).map_err(|source| StageError::Io { path, source })?;
            outputs.push(ManifestEntry {
                stage: stage.name().into(),
                file: file.clone(),
                sha256: Some(sha256_hex(&bytes)),
            });
        }
        outputs.push(ManifestEntry {
            stage: "manifest".into(),
            file: MANIFEST_FILE.into(),
            sha256: None,
        });
        let manifest = RunManifest {
            tool: concat!("coword ", env!("CARGO_PKG_VERSION")).into(),
            config: cfg.clone(),
            input_digests: input_digests(cfg)?,
            outputs,
            timings_ms: timings.clone(),
            warnings: warnings.clone(),
        };
        let mut json = serde_json::to_string_pretty(&manifest).expect("serializable");
        json.push('\n');
        let path = cfg.output_dir.join(MANIFEST_FILE);
        fs::write(&path, json).map_err(|source| StageError::Io { path, source })?;
        Ok(manifest)
    };
    finish().map_err(|source| {
        cleanup(&written);
        PipelineError {
            stage: Stage::Redundancy,
            source,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.word_min_occurrences, 2);
        assert_eq!(cfg.cosine_threshold, 0.2);
        assert_eq!(cfg.k_factors, 3);
        assert!(cfg.validate().is_ok());
        assert!(PipelineConfig {
            cosine_threshold: 1.5,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(PipelineConfig {
            k_factors: 1,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(PipelineConfig {
            binning: Binning::EqualWidth { bins: 1 },
            ..cfg
        }
        .validate()
        .is_err());
    }

    #[test]
    fn config_json_resolves_relative_paths() {
        let cfg = PipelineConfig::from_json(
            r#"{"input_path": "data/savedrecs.txt", "output_dir": "/tmp/out", "binning": {"equal_width": {"bins": 4}}, "matrix_kind": "matched_sources"}"#,
            Path::new("/work"),
        )
        .unwrap();
        assert_eq!(
            cfg.input_path.as_deref(),
            Some(Path::new("/work/data/savedrecs.txt"))
        );
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/out"));
        assert_eq!(cfg.binning, Binning::EqualWidth { bins: 4 });
        assert_eq!(cfg.matrix_kind, MatrixKind::MatchedSources);
        assert!(PipelineConfig::from_json(r#"{"k": 3}"#, Path::new(".")).is_err());
    }

    #[test]
    fn missing_upstream_names_the_producer() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            output_dir: dir.path().to_path_buf(),
            ..PipelineConfig::default()
        };
        let err = run_stage(Stage::Redundancy, &cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Redundancy);
        assert!(matches!(
            err.source,
            StageError::MissingUpstream {
                producer: Stage::Factors,
                ..
            }
        ));
        assert_eq!(
            err.to_string(),
            "redundancy stage failed: missing factors.csv: run stage `factors` first"
        );
        let err = run_stage(Stage::Matrix, &cfg).unwrap_err();
        assert!(matches!(
            err.source,
            StageError::MissingUpstream {
                producer: Stage::Ingest,
                ..
            }
        ));
    }
}
