use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};
use vocadapt_cli::error::{EXIT_DATA, EXIT_OK, EXIT_USAGE};
use vocadapt_cli::files::{read_anchor_tokens, read_lines, write_file};
use vocadapt_cli::{run_pipeline, CbowSettings, CliError, PipelineConfig, ProjectionSettings};
use vocadapt_core::checkpoint::{import_checkpoint, with_source_specials};
use vocadapt_core::projection::project_with_anchors;
use vocadapt_core::vocab::{read_vocab, write_vocab};
use vocadapt_core::{
    build_vocab, compute_shared, load_embeddings, nearest_neighbors_report, read_checkpoint,
    save_embeddings, semantic_shift_report, swap_embeddings, train_cbow, validate_checkpoint,
    vocab_overlap_stats, write_checkpoint, CbowConfig, SharedAnchorSet, Side,
};

/// Adapt the vocabulary and embeddings of a pre-trained translation model
/// to a new domain using monolingual target-domain text.
#[derive(Debug, Parser)]
#[command(name = "vocadapt", version)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count tokens of a corpus into a frequency-ranked vocabulary file
    BuildVocab(BuildVocabArgs),
    /// Train CBOW embeddings on a tokenized corpus
    TrainCbow(TrainCbowArgs),
    /// Project target-domain embeddings into a source embedding space
    Project(ProjectArgs),
    /// Replace one side's embedding layer and vocabulary in a checkpoint
    Swap(SwapArgs),
    /// Nearest-neighbor and semantic-shift reports
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Vocabulary overlap and corpus coverage statistics
    Stats(StatsArgs),
    /// Run vocabulary building, CBOW, projection and swap for both sides
    Pipeline(PipelineArgs),
    /// Check a checkpoint's embedding roles, shapes and values
    Validate(ValidateArgs),
    /// Write one side's embedding layer as a word2vec text file
    Export(ExportArgs),
    /// Build a checkpoint from a JSON manifest of raw little-endian f32 tensor files
    Import(ImportArgs),
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Table,
    Jsonl,
}

#[derive(Debug, Args)]
struct BuildVocabArgs {
    /// Tokenized corpus, one sentence per line
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    #[arg(long, default_value_t = vocadapt_core::cbow::DEFAULT_MAX_VOCAB)]
    max_vocab: usize,
    /// Output vocabulary file (`token count` per line)
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct TrainCbowArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Vocabulary file; built from the corpus when omitted
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Output word2vec text file
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    cbow: CbowSettings,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    /// Target-domain embeddings (word2vec text)
    #[arg(long)]
    target: PathBuf,
    /// Source-domain embeddings (word2vec text), e.g. from `export`
    #[arg(long)]
    source: PathBuf,
    /// Anchor token list replacing the shared vocabulary
    #[arg(long)]
    anchors: Option<PathBuf>,
    /// Output word2vec text file over the target vocabulary
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    projection: ProjectionSettings,
}

#[derive(Debug, Args)]
struct SwapArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    side: Side,
    /// Projected embeddings (word2vec text) over the new vocabulary
    #[arg(long)]
    embeddings: PathBuf,
    /// Vocabulary of the checkpoint's current embedding rows
    #[arg(long)]
    source_vocab: PathBuf,
    /// Output checkpoint
    #[arg(long)]
    output: PathBuf,
    /// Output vocabulary file for the new embedding rows
    #[arg(long)]
    vocab_out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum AnalyzeCommand {
    /// Nearest neighbors of tokens by cosine similarity
    Neighbors(NeighborsArgs),
    /// Shared tokens ranked by 1 - cos(source, projected)
    Shift(ShiftArgs),
}

#[derive(Debug, Args)]
struct NeighborsArgs {
    /// Embeddings to search (word2vec text)
    #[arg(long)]
    embeddings: PathBuf,
    /// Query token; repeatable
    #[arg(long = "token", required = true)]
    tokens: Vec<String>,
    /// Neighbors per query
    #[arg(short = 'n', long, default_value_t = 10)]
    top: usize,
    /// Restrict candidates to tokens also in this vocabulary file
    #[arg(long)]
    shared_with: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Write the report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ShiftArgs {
    /// Source-domain embeddings (word2vec text)
    #[arg(long)]
    source: PathBuf,
    /// Projected target-domain embeddings (word2vec text)
    #[arg(long)]
    projected: PathBuf,
    /// Anchor token list replacing the shared vocabulary
    #[arg(long)]
    anchors: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    vocab_a: PathBuf,
    #[arg(long)]
    vocab_b: PathBuf,
    /// Corpus whose token types are checked against vocabulary A
    #[arg(long)]
    corpus_b: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Pipeline config (TOML); relative paths resolve against its directory
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config's output_dir
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    cbow: CbowSettings,
    #[command(flatten)]
    projection: ProjectionSettings,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    side: Side,
    /// Vocabulary of the side's embedding rows
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ImportArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            });
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::BuildVocab(a) => {
            let corpus = read_lines(&a.corpus)?;
            let vocab = build_vocab(&corpus, a.min_count, a.max_vocab)?;
            write_vocab(&vocab, &a.output)?;
            info!("{} tokens written to {}", vocab.len(), a.output.display());
        }
        Command::TrainCbow(a) => {
            let cfg = a.cbow.resolve(&CbowConfig::default());
            let corpus = read_lines(&a.corpus)?;
            let vocab = match &a.vocab {
                Some(p) => read_vocab(p)?,
                None => build_vocab(&corpus, cfg.min_count, cfg.max_vocab)?,
            };
            let emb = train_cbow(&corpus, &vocab, &cfg)?;
            save_embeddings(&emb, &a.output)?;
        }
        Command::Project(a) => {
            let cfg = a.projection.resolve();
            let target = load_embeddings(&a.target)?;
            let source = load_embeddings(&a.source)?;
            let anchors = anchor_set(a.anchors.as_deref(), &target, &source)?;
            let projected = project_with_anchors(&target, &source, anchors.as_ref(), &cfg)?;
            save_embeddings(&projected, &a.output)?;
        }
        Command::Swap(a) => {
            let cp = read_checkpoint(&a.checkpoint)?;
            let source_vocab = read_vocab(&a.source_vocab)?;
            let emb = load_embeddings(&a.embeddings)?;
            let adapted = with_source_specials(&source_vocab, &emb)?;
            let vocab_file = a
                .vocab_out
                .file_name()
                .ok_or_else(|| CliError::Usage("--vocab-out must name a file".into()))?
                .to_string_lossy()
                .into_owned();
            let out = swap_embeddings(&cp, a.side, adapted.vocab(), &adapted, &source_vocab, &vocab_file)?;
            write_vocab(adapted.vocab(), &a.vocab_out)?;
            write_checkpoint(&out, &a.output)?;
        }
        Command::Analyze(AnalyzeCommand::Neighbors(a)) => {
            let emb = load_embeddings(&a.embeddings)?;
            let restrict = match &a.shared_with {
                Some(p) => Some(compute_shared(emb.vocab(), &read_vocab(p)?)?),
                None => None,
            };
            let mut text = String::new();
            for token in &a.tokens {
                let report = nearest_neighbors_report(token, &emb, restrict.as_ref(), a.top)?;
                text.push_str(&match a.format {
                    Format::Table => report.to_table(),
                    Format::Jsonl => report.to_jsonl(),
                });
            }
            emit(a.output.as_deref(), &text)?;
        }
        Command::Analyze(AnalyzeCommand::Shift(a)) => {
            let source = load_embeddings(&a.source)?;
            let projected = load_embeddings(&a.projected)?;
            let shared = match anchor_set(a.anchors.as_deref(), &projected, &source)? {
                Some(s) => s,
                None => compute_shared(projected.vocab(), source.vocab())?,
            };
            let report = semantic_shift_report(&shared, &source, &projected)?;
            let text = match a.format {
                Format::Table => report.to_table(),
                Format::Jsonl => report.to_jsonl(),
            };
            emit(a.output.as_deref(), &text)?;
        }
        Command::Stats(a) => {
            let va = read_vocab(&a.vocab_a)?;
            let vb = read_vocab(&a.vocab_b)?;
            let corpus = a.corpus_b.as_deref().map(read_lines).transpose()?;
            let stats = vocab_overlap_stats(&va, &vb, corpus.as_ref());
            let text = match a.format {
                Format::Table => stats.to_table(),
                Format::Jsonl => stats.to_jsonl(),
            };
            emit(a.output.as_deref(), &text)?;
        }
        Command::Pipeline(a) => {
            let mut config = PipelineConfig::load(&a.config)?;
            // --seed replaces the run seed as well as any per-side CBOW seed.
            if let Some(seed) = a.cbow.seed {
                config.seed = seed;
            }
            config.apply_overrides(&a.cbow, &a.projection);
            let base = a.config.parent().unwrap_or(Path::new("")).to_owned();
            let output_dir = match (&a.output_dir, &config.output_dir) {
                (Some(flag), _) => flag.clone(),
                (None, Some(dir)) => base.join(dir),
                (None, None) => {
                    return Err(CliError::Usage(
                        "no output directory: pass --output-dir or set output_dir".into(),
                    ))
                }
            };
            let manifest = run_pipeline(&config, &base, &output_dir)?;
            println!(
                "wrote {} files to {}",
                manifest.outputs.len() + 1,
                output_dir.display()
            );
        }
        Command::Validate(a) => {
            let cp = read_checkpoint(&a.checkpoint)?;
            let report = validate_checkpoint(&cp);
            print!("{report}");
            if !report.passed() {
                return Ok(EXIT_DATA);
            }
        }
        Command::Export(a) => {
            let cp = read_checkpoint(&a.checkpoint)?;
            let vocab = read_vocab(&a.vocab)?;
            save_embeddings(&cp.embedding_matrix(a.side, &vocab)?, &a.output)?;
        }
        Command::Import(a) => {
            let cp = import_checkpoint(&a.manifest)?;
            write_checkpoint(&cp, &a.output)?;
        }
    }
    Ok(EXIT_OK)
}

fn anchor_set(
    path: Option<&Path>,
    target: &vocadapt_core::EmbeddingMatrix,
    source: &vocadapt_core::EmbeddingMatrix,
) -> Result<Option<SharedAnchorSet>, CliError> {
    match path {
        Some(p) => {
            let tokens = read_anchor_tokens(p)?;
            Ok(Some(SharedAnchorSet::from_tokens(tokens, target.vocab(), source.vocab())?))
        }
        None => Ok(None),
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}
