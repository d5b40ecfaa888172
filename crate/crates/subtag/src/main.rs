//! Command-line interface: training, tagging, evaluation, the ablation
//! experiment runner, and vocabulary reporting.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numerical
//! failure.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use subtag::ablate::{run_ablation, standard_grid};
use subtag::artifact::{load_model, save_model};
use subtag::config_io::{apply_key, read_config};
use subtag::corpus_io::{read_corpus, with_labels, write_corpus};
use subtag::error::FormatError;
use subtag::lexicon_io::read_lexicon;
use subtag::report::{
    ablation_to_string, epoch_log_to_string, eval_report_to_string, vocab_report_to_string,
};
use subtag::vectors::read_word_vectors;
use subtag_core::corpus::Split;
use subtag_core::crf::TagSet;
use subtag_core::eval::{evaluate, oov_slice, vocab_report, vocab_report_for};
use subtag_core::featurize::{Featurizer, PhonemeLexicon};
use subtag_core::model::VocabSizes;
use subtag_core::train::{train_with_vectors, TrainConfig};

#[derive(Parser)]
#[command(
    name = "subtag",
    about = "Subword-unit BiLSTM-CRF sequence tagger",
    long_about = "Subword-unit BiLSTM-CRF sequence tagger.\n\n\
        Command-line flags override values from --config files; config files\n\
        override built-in defaults. Every run is fully determined by\n\
        (command, flags, config, seed).",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tagger and write the model plus a per-epoch log.
    Train(TrainArgs),
    /// Label a corpus file or whitespace-tokenized lines from stdin.
    Tag(TagArgs),
    /// Score predictions against gold labels.
    Eval(EvalArgs),
    /// Train the full ablation grid and emit the results matrix.
    Ablate(AblateArgs),
    /// Print vocabulary sizes and parameter counts.
    VocabStats(VocabStatsArgs),
}

#[derive(Args)]
struct CommonTrainArgs {
    /// Training corpus (token<TAB>label lines, blank-line separated).
    #[arg(long)]
    train: PathBuf,
    /// Development corpus for model selection.
    #[arg(long)]
    dev: PathBuf,
    /// Pronunciation lexicon (word<TAB>phonemes); omitted means every word
    /// maps to the UNK phoneme.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Configuration file with key = value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master random seed (overrides config).
    #[arg(long)]
    seed: Option<u64>,
    /// Subword units, e.g. "char,phoneme,byte" or "none" (overrides config).
    #[arg(long)]
    units: Option<String>,
    /// Enable or disable dedicated word embeddings (overrides config).
    #[arg(long)]
    word_embeddings: Option<bool>,
    /// Number of training epochs (overrides config).
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size in utterances (overrides config).
    #[arg(long)]
    batch_size: Option<usize>,
}

impl CommonTrainArgs {
    fn config(&self) -> anyhow::Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => read_config(path)?,
            None => TrainConfig::default(),
        };
        let over = |cfg: &mut TrainConfig, key: &str, value: String| -> anyhow::Result<()> {
            apply_key(cfg, key, &value).map_err(|msg| anyhow::anyhow!(UsageError(msg)))
        };
        if let Some(seed) = self.seed {
            over(&mut cfg, "seed", seed.to_string())?;
        }
        if let Some(units) = &self.units {
            over(&mut cfg, "units", units.clone())?;
        }
        if let Some(w) = self.word_embeddings {
            over(&mut cfg, "word_embeddings", w.to_string())?;
        }
        if let Some(e) = self.epochs {
            over(&mut cfg, "max_epochs", e.to_string())?;
        }
        if let Some(b) = self.batch_size {
            over(&mut cfg, "batch_size", b.to_string())?;
        }
        Ok(cfg)
    }

    fn lexicon(&self) -> anyhow::Result<PhonemeLexicon> {
        match &self.lexicon {
            Some(path) => Ok(read_lexicon(path)?),
            None => Ok(PhonemeLexicon::empty()),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonTrainArgs,
    /// Pre-trained word vectors ("word v1 .. v_dim" lines).
    #[arg(long)]
    word_vectors: Option<PathBuf>,
    /// Where to write the trained model.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the per-epoch log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct TagArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Corpus to re-label; without it, stdin lines are tagged.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Gold corpus.
    #[arg(long)]
    gold: PathBuf,
    /// Predicted corpus (same tokens, predicted labels).
    #[arg(long)]
    pred: PathBuf,
    /// Model whose frozen training vocabulary defines the OOV slice;
    /// appends the OOV report.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonTrainArgs,
    /// Independent seeds per configuration.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VocabStatsArgs {
    /// Report the vocabularies frozen inside a trained model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Build vocabularies from a training corpus instead.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    fn core_code(e: &subtag_core::Error) -> i32 {
        use subtag_core::Error::*;
        match e {
            Divergence { .. } | NonFinite { .. } | NonDeterministicLoss => 4,
            _ => 3,
        }
    }
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<subtag_core::Error>() {
            return core_code(e);
        }
        if let Some(e) = cause.downcast_ref::<FormatError>() {
            return match e {
                FormatError::Core(inner) => core_code(inner),
                _ => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    3
}

fn write_output(path: Option<&Path>, content: &str) -> anyhow::Result<()> {
    match path {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Tag(args) => cmd_tag(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::VocabStats(args) => cmd_vocab_stats(args),
    }
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let cfg = args.common.config()?;
    let train_corpus = read_corpus(&args.common.train, Split::Train)?;
    let dev_corpus = read_corpus(&args.common.dev, Split::Dev)?;
    let lexicon = args.common.lexicon()?;
    if cfg.units.phonemes && lexicon.is_empty() {
        eprintln!("warning: phoneme unit enabled without --lexicon; every word maps to UNK");
    }
    let vectors = match &args.word_vectors {
        Some(path) => Some(read_word_vectors(path, cfg.word_embed_dim)?),
        None => None,
    };
    let outcome = train_with_vectors(&cfg, lexicon, &train_corpus, &dev_corpus, vectors.as_ref())?;
    save_model(&outcome.best.model, &args.out)?;
    if let Some(log_path) = &args.log {
        std::fs::write(log_path, epoch_log_to_string(&outcome.log))
            .with_context(|| format!("writing {}", log_path.display()))?;
    }
    println!(
        "best_epoch\t{}\nbest_dev_f1\t{:.2}\nmodel\t{}",
        outcome.best.epoch,
        outcome.best.dev_f1,
        args.out.display()
    );
    Ok(())
}

fn cmd_tag(args: TagArgs) -> anyhow::Result<()> {
    let model = load_model(&args.model)?;
    match &args.input {
        Some(input) => {
            let corpus = read_corpus(input, Split::Test)?;
            let labels = model.tag_corpus(&corpus)?;
            let tagged = with_labels(&corpus, &labels)?;
            match &args.out {
                Some(path) => write_corpus(&tagged, path)?,
                None => print!("{}", subtag::corpus_io::corpus_to_string(&tagged)),
            }
        }
        None => {
            let stdin = std::io::stdin();
            let mut out: Box<dyn Write> = match &args.out {
                Some(path) => Box::new(std::fs::File::create(path)?),
                None => Box::new(std::io::stdout()),
            };
            for line in stdin.lock().lines() {
                let line = line?;
                let tokens: Vec<String> = line
                    .split_whitespace()
                    .map(|t| t.to_lowercase())
                    .collect();
                if tokens.is_empty() {
                    writeln!(out)?;
                    continue;
                }
                let labels = model.tag_tokens(&tokens)?;
                let pairs: Vec<String> = tokens
                    .iter()
                    .zip(&labels)
                    .map(|(t, l)| format!("{t}/{l}"))
                    .collect();
                writeln!(out, "{}", pairs.join(" "))?;
            }
        }
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let gold = read_corpus(&args.gold, Split::Test)?;
    let pred = read_corpus(&args.pred, Split::Test)?;
    if gold.len() != pred.len() {
        anyhow::bail!(
            "gold has {} utterances but predictions have {}",
            gold.len(),
            pred.len()
        );
    }
    for (i, (g, p)) in gold.utterances.iter().zip(&pred.utterances).enumerate() {
        if g.tokens != p.tokens {
            anyhow::bail!("utterance {}: tokens differ between gold and predictions", i + 1);
        }
    }
    let labels: Vec<Vec<String>> = pred.utterances.iter().map(|u| u.labels.clone()).collect();
    let report = evaluate(&gold, &labels)?;
    let oov = match &args.model {
        Some(path) => {
            let model = load_model(path)?;
            Some(oov_slice(&gold, &labels, &model.featurizer.words)?)
        }
        None => None,
    };
    write_output(args.out.as_deref(), &eval_report_to_string(&report, oov.as_ref()))
}

fn cmd_ablate(args: AblateArgs) -> anyhow::Result<()> {
    if args.seeds == 0 {
        anyhow::bail!(UsageError(String::from("--seeds must be >= 1")));
    }
    let cfg = args.common.config()?;
    let train_corpus = read_corpus(&args.common.train, Split::Train)?;
    let dev_corpus = read_corpus(&args.common.dev, Split::Dev)?;
    let lexicon = args.common.lexicon()?;
    let rows = run_ablation(
        &cfg,
        &standard_grid(),
        args.seeds,
        &lexicon,
        &train_corpus,
        &dev_corpus,
    )?;
    write_output(args.out.as_deref(), &ablation_to_string(&rows))
}

fn cmd_vocab_stats(args: VocabStatsArgs) -> anyhow::Result<()> {
    let report = match (&args.model, &args.train) {
        (Some(model_path), None) => vocab_report(&load_model(model_path)?),
        (None, Some(train_path)) => {
            let corpus = read_corpus(train_path, Split::Train)?;
            let lexicon = match &args.lexicon {
                Some(path) => read_lexicon(path)?,
                None => PhonemeLexicon::empty(),
            };
            let cfg = match &args.config {
                Some(path) => read_config(path)?,
                None => TrainConfig::default(),
            };
            let featurizer = Featurizer::build(&corpus, lexicon).map_err(FormatError::from)?;
            let tags = TagSet::from_labels(corpus.labels()).map_err(FormatError::from)?;
            vocab_report_for(&VocabSizes::of(&featurizer), &cfg.model_config(), tags.len())
        }
        _ => anyhow::bail!(UsageError(String::from(
            "vocab-stats needs exactly one of --model or --train"
        ))),
    };
    write_output(None, &vocab_report_to_string(&report))
}
