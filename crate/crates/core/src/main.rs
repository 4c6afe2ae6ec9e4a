use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use singleton_detect::corpus::{Corpus, SplitSpec};
use singleton_detect::embeddings::EmbeddingTable;
use singleton_detect::features::{encode_corpus, Branches, ContextMode};
use singleton_detect::metrics::{report, ClassReport};
use singleton_detect::model::{argmax, ModelConfig, SingletonModel};
use singleton_detect::synthetic;
use singleton_detect::tensor::OptimizerKind;
use singleton_detect::training::sweep::{self, Experiment, SweepAxis};
use singleton_detect::training::{evaluate, gold_labels, TrainConfig};
use singleton_detect::{Error, Result};

#[derive(Parser)]
#[command(
    name = "singleton-detect",
    version,
    about = "Singleton mention detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print corpus statistics as JSON.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Train a model and report test-partition metrics.
    Train(TrainArgs),
    /// Score a checkpoint on a labelled corpus.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Emit one JSON line of class probabilities per mention.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train once per value of one hyperparameter and tabulate the results.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// optimizer, epochs, context_mode or features.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values; defaults depend on the axis.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Write a synthetic corpus and matching embeddings.
    Generate {
        #[arg(long, value_enum, default_value_t = Task::Separable)]
        task: Task,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Documents (separable) or mentions (memorize).
        #[arg(long, default_value_t = 100)]
        size: usize,
        #[arg(long, default_value_t = 300)]
        dim: usize,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Separable,
    Memorize,
    Scale,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Load at most this many vectors.
    #[arg(long)]
    max_words: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = OptimizerKind::Adam)]
    optimizer: OptimizerKind,
    /// Seeds the split, the weight initialization and the shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// two (two words either side) or all (whole sentence).
    #[arg(long, default_value_t = ContextMode::TwoByTwo)]
    context_mode: ContextMode,
    /// Enabled branches, e.g. words+context+syntactic.
    #[arg(long, default_value_t = Branches::ALL)]
    features: Branches,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    /// Disable dropout during training.
    #[arg(long)]
    no_dropout: bool,
    /// Use the wider 64-32-16 head instead of 32-8.
    #[arg(long)]
    wide_head: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Checkpoint output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch history CSV output path.
    #[arg(long)]
    history: Option<PathBuf>,
}

fn load_table(data: &DataArgs) -> Result<Arc<EmbeddingTable>> {
    Ok(Arc::new(EmbeddingTable::load(
        &data.embeddings,
        data.max_words,
    )?))
}

fn experiment(run: &RunArgs) -> Result<Experiment> {
    let corpus = Corpus::load(&run.data.corpus)?;
    let embedding = load_table(&run.data)?;
    let split = corpus.split(&SplitSpec {
        test_fraction: run.test_fraction,
        validation_fraction_of_train: run.val_fraction,
        seed: run.seed,
    })?;
    let mut model = ModelConfig {
        embed_dim: embedding.dim(),
        seed: run.seed,
        ..ModelConfig::default()
    };
    model.features.context_mode = run.context_mode;
    model.features.branches = run.features;
    if run.wide_head {
        model.final_hidden = singleton_detect::model::ALTERNATIVE_FINAL_HIDDEN.to_vec();
    }
    let train = TrainConfig {
        epochs: run.epochs,
        batch_size: run.batch_size,
        learning_rate: run.lr,
        optimizer: run.optimizer,
        shuffle_seed: run.seed,
        dropout_enabled: !run.no_dropout,
    };
    Ok(Experiment {
        corpus,
        split,
        embedding,
        model,
        train,
    })
}

fn print_report(report: &ClassReport, label: &str, format: Format) -> Result<()> {
    match format {
        Format::Table => println!("{}", report.render_table(label)),
        Format::Json | Format::Csv => {
            let v = json!({ "features": label, "report": report });
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
    }
    Ok(())
}

fn write_json_line(out: &mut impl Write, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n").map_err(|e| Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats { corpus } => {
            let c = Corpus::load(&corpus)?;
            println!("{}", serde_json::to_string(&c.stats())?);
        }
        Command::Train(args) => {
            let exp = experiment(&args.run)?;
            let outcome = exp.run()?;
            if let Some(path) = &args.out {
                outcome.model.save(path)?;
                log::info!("checkpoint written to {}", path.display());
            }
            if let Some(path) = &args.history {
                outcome.history.save_csv(path)?;
            }
            print_report(
                &outcome.test,
                &exp.model.features.branches.to_string(),
                Format::Table,
            )?;
        }
        Command::Eval {
            data,
            model,
            beta,
            format,
        } => {
            let table = load_table(&data)?;
            let model = SingletonModel::load(&model, table.clone())?;
            let corpus = Corpus::load(&data.corpus)?;
            let examples = encode_corpus(corpus.mentions(), &corpus, &table, model.features())?;
            let gold = gold_labels(&examples)?;
            let eval = evaluate(&model, &examples)?;
            let r = report(&eval.predictions, &gold, beta)?;
            print_report(&r, &model.features().branches.to_string(), format)?;
        }
        Command::Predict { data, model } => {
            let table = load_table(&data)?;
            let model = SingletonModel::load(&model, table.clone())?;
            let corpus = Corpus::load(&data.corpus)?;
            let examples = encode_corpus(corpus.mentions(), &corpus, &table, model.features())?;
            let stdout = io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            for (m, ex) in corpus.mentions().iter().zip(&examples) {
                let probs = model.probabilities(ex)?;
                let doc = corpus.document(&m.doc_id).expect("validated corpus");
                let line = json!({
                    "mention": {
                        "doc": m.doc_id,
                        "sent": m.sentence_index,
                        "start": m.start,
                        "end": m.end,
                        "text": m.tokens(doc).join(" "),
                    },
                    "p_singleton": probs.data()[1],
                    "label": argmax(probs.data()),
                });
                write_json_line(&mut out, &line)?;
            }
            out.flush().map_err(|e| Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            })?;
        }
        Command::Sweep {
            run,
            axis,
            values,
            format,
        } => {
            let exp = experiment(&run)?;
            let values = if values.is_empty() {
                axis.default_values()
            } else {
                values
            };
            let rows = sweep::sweep(&exp, axis, &values)?;
            match format {
                Format::Table => print!("{}", sweep::render_table(axis, &rows)),
                Format::Csv => sweep::write_csv(&rows, io::stdout())?,
                Format::Json => println!("{}", serde_json::to_string_pretty(&rows)?),
            }
        }
        Command::Generate {
            task,
            seed,
            size,
            dim,
            corpus,
            embeddings,
        } => {
            let generated = match task {
                Task::Separable => synthetic::separable_task(seed, size, 5, dim)?,
                Task::Memorize => synthetic::memorization_task(seed, size, dim)?,
                Task::Scale => synthetic::Task {
                    corpus: synthetic::scale_corpus(seed)?,
                    embedding: synthetic::random_embeddings(
                        (0..2000).map(|i| format!("w{i:04}")),
                        dim,
                        seed,
                    )?,
                },
            };
            generated.corpus.save(&corpus)?;
            if let Some(path) = embeddings.as_deref() {
                generated.embedding.save(path)?;
            }
            let stats = generated.corpus.stats();
            log::info!(
                "wrote {} mentions in {} documents to {}",
                stats.mentions,
                stats.documents,
                display(&corpus)
            );
        }
    }
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
