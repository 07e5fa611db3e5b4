//! Command-line surface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use mmhate_core::bow::{self, BowVocab};
use mmhate_core::corpus::{self, Split, Task, TaskSchema};
use mmhate_core::ensemble::{self, EnsembleWeights, PredictionSet};
use mmhate_core::entfeat::{self, Gazetteer};
use mmhate_core::fusion::{self, EmbeddingStore, LabeledMatrix};
use mmhate_core::gbdt::{self, GbdtConfig, GbdtModel};
use mmhate_core::metrics::{self, Averaging};
use mmhate_core::table::FeatureTable;
use mmhate_core::Error;

use crate::config::{PipelineConfig, RUN_A_KEYS, RUN_B_KEYS};
use crate::error::{CliError, StageExt};
use crate::features::{self, EntitySource};
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(
    name = "mmhate",
    version,
    about = "Multimodal hate-speech feature extraction, training and ensembling"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic corpora.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Feature extraction.
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// Model training.
    #[command(subcommand)]
    Train(TrainCmd),
    /// Class probabilities from a saved model.
    Predict(PredictArgs),
    /// Greedy ensemble selection.
    #[command(subcommand)]
    Ensemble(EnsembleCmd),
    /// Builds the embedding + entity-count table for a dataset.
    Fuse(FuseArgs),
    /// Scores predictions against gold labels.
    Evaluate(EvaluateArgs),
    /// Full detection pipeline (task A).
    RunA(RunArgs),
    /// Full target pipeline (task B).
    RunB(RunArgs),
}

#[derive(Debug, Subcommand)]
pub enum CorpusCmd {
    /// Writes PREFIX.jsonl and PREFIX.emb.jsonl.
    Synth {
        #[arg(long)]
        task: Task,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Examples per class, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 16)]
        embed_dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum FeaturesCmd {
    /// 33 character-level statistics per text.
    Syntactic {
        #[arg(long = "in", alias = "data")]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Unigram + bigram counts.
    #[command(subcommand)]
    Bow(BowCmd),
    /// PER / NORP / ORG counts.
    Ner {
        #[arg(long = "in", alias = "data")]
        data: PathBuf,
        /// Gazetteer JSON; the built-in one when neither source is given.
        #[arg(long, conflicts_with = "annotations")]
        gazetteer: Option<PathBuf>,
        /// Precomputed span file (JSONL).
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum BowCmd {
    Fit {
        #[arg(long = "in", alias = "data")]
        data: PathBuf,
        #[arg(long, default_value_t = bow::DEFAULT_MIN_COUNT)]
        min_count: usize,
        #[arg(long, default_value_t = bow::DEFAULT_MAX_SIZE)]
        max_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    Transform {
        #[arg(long = "in", alias = "data")]
        data: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum TrainCmd {
    /// One boosted-tree model on a feature table.
    Gbdt {
        #[arg(long)]
        features: PathBuf,
        /// Extra tables joined to `--features` by id.
        #[arg(long, num_args = 1..)]
        features2: Vec<PathBuf>,
        /// Labeled dataset supplying the targets.
        #[arg(long)]
        data: PathBuf,
        /// Inferred from the label names when omitted.
        #[arg(long)]
        task: Option<Task>,
        #[arg(long, default_value = "default")]
        preset: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Preset sweep on fusion tables, keeping the best on eval.
    Fusion {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        eval: PathBuf,
        #[arg(long)]
        train_data: PathBuf,
        #[arg(long)]
        eval_data: PathBuf,
        #[arg(long)]
        task: Option<Task>,
        #[arg(long, default_value = "default,deep,light")]
        presets: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, num_args = 1..)]
    pub features2: Vec<PathBuf>,
    /// Model name recorded in the output; defaults to the model file stem.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EnsembleCmd {
    Fit {
        /// Prediction files, one per model (named by file stem).
        #[arg(long, num_args = 1.., required = true)]
        preds: Vec<PathBuf>,
        /// Labeled dataset.
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = ensemble::DEFAULT_ROUNDS)]
        rounds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    Predict {
        #[arg(long, num_args = 1.., required = true)]
        preds: Vec<PathBuf>,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub embeddings: Vec<PathBuf>,
    /// Entity table from `features ner`; the built-in gazetteer otherwise.
    #[arg(long)]
    pub ner: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub task: Option<Task>,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value`, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

fn joined_table(first: &Path, rest: &[PathBuf]) -> Result<FeatureTable, Error> {
    let mut parts = vec![FeatureTable::read_csv(first)?];
    for p in rest {
        parts.push(FeatureTable::read_csv(p)?);
    }
    if parts.len() == 1 {
        return Ok(parts.pop().expect("one table"));
    }
    FeatureTable::hconcat(&parts)
}

fn load_any(path: &Path, task: Option<Task>) -> Result<corpus::Dataset, Error> {
    features::load_dataset(path, task, Split::Train)
}

fn load_preds(paths: &[PathBuf]) -> Result<Vec<PredictionSet>, Error> {
    paths.iter().map(PredictionSet::load).collect()
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Corpus(CorpusCmd::Synth {
            task,
            seed,
            counts,
            embed_dim,
            out,
        }) => {
            let stage = "corpus";
            let (ds, store) =
                corpus::generate_synthetic(seed, &TaskSchema::for_task(task), &counts, embed_dim)
                    .stage(stage)?;
            let data = out.with_extension("jsonl");
            let emb = out.with_extension("emb.jsonl");
            ds.write(&data).stage(stage)?;
            store.write(&emb).stage(stage)?;
            info!(
                "wrote {} examples to {} and {}",
                ds.len(),
                data.display(),
                emb.display()
            );
        }
        Command::Features(cmd) => features_cmd(cmd)?,
        Command::Train(cmd) => train_cmd(cmd)?,
        Command::Predict(a) => {
            let stage = "predict";
            let model = GbdtModel::load(&a.model).stage(stage)?;
            let table = joined_table(&a.features, &a.features2).stage(stage)?;
            if table.names != model.feature_names {
                return Err(Error::Shape(format!(
                    "{} columns do not match the model's {} features",
                    table.names.len(),
                    model.feature_names.len()
                )))
                .stage(stage);
            }
            let name = a.name.unwrap_or_else(|| {
                a.model
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "model".into())
            });
            let rows = model.predict_proba(&table.values).stage(stage)?;
            PredictionSet::from_rows(name, &table.ids, rows)
                .and_then(|p| p.write(&a.out))
                .stage(stage)?;
        }
        Command::Ensemble(EnsembleCmd::Fit {
            preds,
            gold,
            rounds,
            out,
        }) => {
            let stage = "ensemble-fit";
            let sets = load_preds(&preds).stage(stage)?;
            let gold = load_any(&gold, None).and_then(|d| d.gold()).stage(stage)?;
            let ids: Vec<String> = gold.keys().cloned().collect();
            let sets = sets
                .iter()
                .map(|s| s.select(&ids))
                .collect::<Result<Vec<_>, _>>()
                .stage(stage)?;
            let w = ensemble::fit_weights(&sets, &gold, rounds).stage(stage)?;
            w.save(&out).stage(stage)?;
        }
        Command::Ensemble(EnsembleCmd::Predict {
            preds,
            weights,
            out,
        }) => {
            let stage = "ensemble-predict";
            let sets = load_preds(&preds).stage(stage)?;
            let w = EnsembleWeights::load(&weights).stage(stage)?;
            ensemble::ensemble_predict(&sets, &w)
                .and_then(|p| p.write(&out))
                .stage(stage)?;
        }
        Command::Fuse(a) => {
            let stage = "fusion";
            let ds = load_any(&a.data, None).stage(stage)?;
            let mut store = EmbeddingStore::load(&a.embeddings[0]).stage(stage)?;
            for p in &a.embeddings[1..] {
                store
                    .merge(EmbeddingStore::load(p).stage(stage)?)
                    .stage(stage)?;
            }
            let counts = match &a.ner {
                Some(p) => FeatureTable::read_csv(p)
                    .and_then(|t| features::counts_from_table(&t))
                    .stage(stage)?,
                None => EntitySource::Gazetteer(Gazetteer::synthetic()).counts(&ds),
            };
            fusion::fusion_table(&ds, &store, &counts)
                .and_then(|t| t.write_csv(&a.out))
                .stage(stage)?;
        }
        Command::Evaluate(a) => {
            let stage = "evaluate";
            let ds = load_any(&a.gold, a.task).stage(stage)?;
            let gold = ds.gold().stage(stage)?;
            let pred = PredictionSet::load(&a.pred).stage(stage)?;
            let ids: Vec<String> = gold.keys().cloned().collect();
            let pred = pred.select(&ids).stage(stage)?.predicted_classes();
            let averaging = if ds.schema.positive_class.is_some() {
                Averaging::Binary
            } else {
                Averaging::Weighted
            };
            let report = metrics::confusion(&gold, &pred, ds.schema.n_classes())
                .and_then(|cm| metrics::score(&cm, averaging, ds.schema.positive_class))
                .stage(stage)?;
            let mut text =
                serde_json::to_string_pretty(&report.to_json_repr()).expect("report serializes");
            text.push('\n');
            print!("{text}");
            if let Some(out) = a.out {
                write_text(&out, &text).stage(stage)?;
            }
        }
        Command::RunA(a) => {
            let config = PipelineConfig::resolve(RUN_A_KEYS, a.config.as_deref(), &a.overrides)?;
            let outcome = pipeline::run_a(&config)?;
            println!("{}", outcome.manifest.display());
        }
        Command::RunB(a) => {
            let config = PipelineConfig::resolve(RUN_B_KEYS, a.config.as_deref(), &a.overrides)?;
            let outcome = pipeline::run_b(&config)?;
            println!("{}", outcome.manifest.display());
        }
    }
    Ok(())
}

fn features_cmd(cmd: FeaturesCmd) -> Result<(), CliError> {
    let stage = "features";
    match cmd {
        FeaturesCmd::Syntactic { data, out } => {
            let ds = load_any(&data, None).stage(stage)?;
            features::syntactic_table(&ds)
                .and_then(|t| t.write_csv(&out))
                .stage(stage)?;
        }
        FeaturesCmd::Bow(BowCmd::Fit {
            data,
            min_count,
            max_size,
            out,
        }) => {
            let ds = load_any(&data, None).stage(stage)?;
            bow::fit_vocab(&ds.texts(), min_count, max_size)
                .and_then(|v| v.save(&out))
                .stage(stage)?;
        }
        FeaturesCmd::Bow(BowCmd::Transform { data, vocab, out }) => {
            let ds = load_any(&data, None).stage(stage)?;
            let vocab = BowVocab::load(&vocab).stage(stage)?;
            features::bow_table(&ds, &vocab)
                .and_then(|t| t.write_csv(&out))
                .stage(stage)?;
        }
        FeaturesCmd::Ner {
            data,
            gazetteer,
            annotations,
            out,
        } => {
            let stage = "entities";
            let ds = load_any(&data, None).stage(stage)?;
            let source = match (gazetteer, annotations) {
                (_, Some(p)) => {
                    EntitySource::Annotations(entfeat::load_annotations(&p).stage(stage)?)
                }
                (Some(p), None) => EntitySource::Gazetteer(Gazetteer::load(&p).stage(stage)?),
                (None, None) => EntitySource::Gazetteer(Gazetteer::synthetic()),
            };
            features::ner_table(&source.counts(&ds))
                .and_then(|t| t.write_csv(&out))
                .stage(stage)?;
        }
    }
    Ok(())
}

fn train_cmd(cmd: TrainCmd) -> Result<(), CliError> {
    let stage = "train";
    match cmd {
        TrainCmd::Gbdt {
            features,
            features2,
            data,
            task,
            preset,
            out,
        } => {
            let cfg = GbdtConfig::preset(&preset).map_err(|e| CliError::Config(e.to_string()))?;
            let ds = load_any(&data, task).stage(stage)?;
            let table = joined_table(&features, &features2)
                .and_then(|t| t.select_ids(&ds.ids()))
                .stage(stage)?;
            let y = ds.labels().stage(stage)?;
            gbdt::train(&table.values, &y, &cfg, ds.schema.n_classes(), table.names)
                .and_then(|m| m.save(&out))
                .stage(stage)?;
        }
        TrainCmd::Fusion {
            train,
            eval,
            train_data,
            eval_data,
            task,
            presets,
            out,
            report,
        } => {
            let presets =
                GbdtConfig::presets(&presets).map_err(|e| CliError::Config(e.to_string()))?;
            let train_ds = load_any(&train_data, task).stage(stage)?;
            let eval_ds =
                load_any(&eval_data, Some(task.unwrap_or(train_ds.schema.task))).stage(stage)?;
            let train_t = FeatureTable::read_csv(&train)
                .and_then(|t| t.select_ids(&train_ds.ids()))
                .stage(stage)?;
            let eval_t = FeatureTable::read_csv(&eval)
                .and_then(|t| t.select_ids(&eval_ds.ids()))
                .stage(stage)?;
            if train_t.names != eval_t.names {
                return Err(Error::Shape(
                    "train and eval tables have different columns".into(),
                ))
                .stage(stage);
            }
            let train_y = train_ds.labels().stage(stage)?;
            let eval_y = eval_ds.labels().stage(stage)?;
            let (model, sel) = fusion::train_and_select(
                LabeledMatrix {
                    x: &train_t.values,
                    y: &train_y,
                },
                LabeledMatrix {
                    x: &eval_t.values,
                    y: &eval_y,
                },
                &presets,
                train_ds.schema.n_classes(),
                &train_t.names,
            )
            .stage(stage)?;
            model.save(&out).stage(stage)?;
            info!(
                "selected preset {} (eval accuracy {:.4})",
                sel.selected, sel.eval_accuracy
            );
            if let Some(p) = report {
                let mut text = serde_json::to_string_pretty(&sel).expect("report serializes");
                text.push('\n');
                write_text(&p, &text).stage(stage)?;
            }
        }
    }
    Ok(())
}
