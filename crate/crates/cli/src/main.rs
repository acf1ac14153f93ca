use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coword::info::{format_table, Binning, RedundancyReport};
use coword::lexical::CellMode;
use coword::pipeline::{self, MatrixKind, PipelineConfig, PipelineError, Stage};
use coword::synthetic::{shuffle_title_tokens, PlantedCorpus};
use coword::wos::write_export;
use log::{error, info, warn};

#[derive(Parser)]
#[command(
    name = "coword",
    version,
    about = "Co-word networks, factor maps and mutual redundancy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a tagged export into records.json
    Ingest(StageArgs),
    /// Descriptive statistics per document type
    Stats(StageArgs),
    /// Build the document × term (or source) matrix
    Matrix(StageArgs),
    /// Co-occurrence and cosine networks with Louvain partitions
    Network(StageArgs),
    /// Varimax-rotated principal components and the factor map
    Factors(StageArgs),
    /// Mutual redundancy among the three main factors
    Redundancy(StageArgs),
    /// Run every stage and write manifest.json
    Run(StageArgs),
    /// Write a synthetic planted-topic corpus in the tagged export format
    Synth(SynthArgs),
}

#[derive(Args)]
struct StageArgs {
    /// JSON configuration file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    abbrev: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Keep words occurring strictly more often than this
    #[arg(long)]
    min_occurrences: Option<u64>,
    /// Keep sources cited strictly more often than this
    #[arg(long)]
    source_min_docs: Option<u64>,
    /// Cosine threshold (strict)
    #[arg(long)]
    threshold: Option<f64>,
    /// Number of factors
    #[arg(long)]
    k: Option<usize>,
    /// `sign` or `equal-width:<bins>`
    #[arg(long)]
    binning: Option<Binning>,
    #[arg(long)]
    seed: Option<u64>,
    /// `words`, `sources` or `matched-sources`
    #[arg(long)]
    matrix_kind: Option<MatrixKind>,
    /// Use 0/1 cells instead of counts
    #[arg(long)]
    binary: bool,
    /// Rotate without Kaiser row normalization
    #[arg(long)]
    no_kaiser: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 150)]
    docs: usize,
    #[arg(long, default_value_t = 3)]
    topics: usize,
    #[arg(long, default_value_t = 15)]
    words_per_topic: usize,
    #[arg(long, default_value_t = 15)]
    shared_words: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shuffle title tokens across documents with this seed (null corpus)
    #[arg(long)]
    shuffle: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

impl StageArgs {
    fn config(&self) -> Result<PipelineConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text =
                    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                let base = path.parent().unwrap_or(Path::new("."));
                PipelineConfig::from_json(&text, base)?
            }
            None => PipelineConfig::default(),
        };
        if let Some(p) = &self.input {
            cfg.input_path = Some(p.clone());
        }
        if let Some(p) = &self.stopwords {
            cfg.stopword_path = Some(p.clone());
        }
        if let Some(p) = &self.abbrev {
            cfg.abbrev_path = Some(p.clone());
        }
        if let Some(p) = &self.output_dir {
            cfg.output_dir = p.clone();
        }
        if let Some(v) = self.min_occurrences {
            cfg.word_min_occurrences = v;
        }
        if let Some(v) = self.source_min_docs {
            cfg.source_min_docs = v;
        }
        if let Some(v) = self.threshold {
            cfg.cosine_threshold = v;
        }
        if let Some(v) = self.k {
            cfg.k_factors = v;
        }
        if let Some(v) = self.binning {
            cfg.binning = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.matrix_kind {
            cfg.matrix_kind = v;
        }
        if self.binary {
            cfg.cell_mode = CellMode::Binary;
        }
        if self.no_kaiser {
            cfg.kaiser_normalization = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(stage: Stage) -> ExitCode {
    ExitCode::from(10 + Stage::ALL.iter().position(|&s| s == stage).unwrap_or(0) as u8)
}

fn report_failure(e: &PipelineError) -> ExitCode {
    error!("{e}");
    exit_code(e.stage)
}

fn log_redundancy(cfg: &PipelineConfig) {
    let path = cfg.output_dir.join(pipeline::REDUNDANCY_FILE);
    if let Some(rep) = fs::read_to_string(path)
        .ok()
        .and_then(|t| serde_json::from_str::<RedundancyReport>(&t).ok())
    {
        for line in format_table(&[("redundancy", &rep)]).lines() {
            info!("{line}");
        }
    }
}

fn run_one(stage: Stage, args: &StageArgs) -> ExitCode {
    let cfg = match args.config() {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(2);
        }
    };
    match pipeline::run_stage(stage, &cfg) {
        Ok(out) => {
            for w in &out.warnings {
                warn!("{stage}: {w}");
            }
            for f in &out.files {
                info!("wrote {}", cfg.output_dir.join(f).display());
            }
            if stage == Stage::Redundancy {
                log_redundancy(&cfg);
            }
            ExitCode::SUCCESS
        }
        Err(e) => report_failure(&e),
    }
}

fn run_all(args: &StageArgs) -> ExitCode {
    let cfg = match args.config() {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(2);
        }
    };
    match pipeline::run_pipeline(&cfg) {
        Ok(manifest) => {
            for w in &manifest.warnings {
                warn!("{w}");
            }
            info!(
                "wrote {} files to {}",
                manifest.outputs.len(),
                cfg.output_dir.display()
            );
            log_redundancy(&cfg);
            ExitCode::SUCCESS
        }
        Err(e) => report_failure(&e),
    }
}

fn synth(args: &SynthArgs) -> ExitCode {
    let shape = PlantedCorpus {
        n_docs: args.docs,
        n_topics: args.topics.max(1),
        words_per_topic: args.words_per_topic.max(1),
        shared_words: args.shared_words,
        ..PlantedCorpus::default()
    };
    let mut records = shape.generate(args.seed);
    if let Some(s) = args.shuffle {
        records = shuffle_title_tokens(&records, s);
    }
    match fs::write(&args.out, write_export(&records)) {
        Ok(()) => {
            info!("wrote {} records to {}", records.len(), args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{}: {e}", args.out.display());
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Ingest(a) => run_one(Stage::Ingest, a),
        Command::Stats(a) => run_one(Stage::Stats, a),
        Command::Matrix(a) => run_one(Stage::Matrix, a),
        Command::Network(a) => run_one(Stage::Network, a),
        Command::Factors(a) => run_one(Stage::Factors, a),
        Command::Redundancy(a) => run_one(Stage::Redundancy, a),
        Command::Run(a) => run_all(a),
        Command::Synth(a) => synth(a),
    }
}
