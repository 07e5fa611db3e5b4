//! End-to-end pipelines for both tasks.
//!
//! Each run writes every artifact under `out_dir` and finishes with a
//! manifest. Stages run in order; a failing stage aborts the run and its name
//! is carried in the error.

use std::path::{Path, PathBuf};

use log::info;
use mmhate_core::bow::{self, BowVocab};
use mmhate_core::corpus::{Dataset, Split, Task, TaskSchema};
use mmhate_core::ensemble::{self, EnsembleWeights, PredictionSet};
use mmhate_core::entfeat::Gazetteer;
use mmhate_core::fusion::{self, EmbeddingStore, LabeledMatrix, SelectionReport};
use mmhate_core::gbdt::{self, GbdtConfig, GbdtModel};
use mmhate_core::metrics::{self, Averaging, MetricReport, ReportJson};
use mmhate_core::table::FeatureTable;
use mmhate_core::{entfeat, par, Error};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{CliError, StageExt};
use crate::features::{self, EntitySource};
use crate::manifest::{ArtifactKind, RunDir};

fn log_config(command: &str, config: &PipelineConfig) {
    info!("{command}: resolved configuration");
    for (k, v) in config.entries() {
        info!("  {k} = {v}");
    }
}

fn presets(config: &PipelineConfig) -> Result<Vec<GbdtConfig>, CliError> {
    let list =
        GbdtConfig::presets(config.get("presets")).map_err(|e| CliError::Config(e.to_string()))?;
    if list.is_empty() {
        return Err(CliError::Config(
            "presets must name at least one preset".into(),
        ));
    }
    Ok(list)
}

fn load(
    run: &mut RunDir,
    key: &str,
    path: &Path,
    task: Task,
    split: Split,
    stage: &'static str,
) -> Result<Dataset, CliError> {
    let ds = features::load_dataset(path, Some(task), split).stage(stage)?;
    run.input(key, path).stage(stage)?;
    Ok(ds)
}

fn write_table(
    run: &mut RunDir,
    name: &str,
    rel: &str,
    table: &FeatureTable,
    stage: &'static str,
) -> Result<(), CliError> {
    table.write_csv(run.path(rel)?).stage(stage)?;
    run.artifact(name, ArtifactKind::Features, rel).stage(stage)
}

fn write_preds(
    run: &mut RunDir,
    name: &str,
    rel: &str,
    set: &PredictionSet,
    stage: &'static str,
) -> Result<(), CliError> {
    set.write(run.path(rel)?).stage(stage)?;
    run.artifact(name, ArtifactKind::Predictions, rel)
        .stage(stage)
}

fn write_json<T: Serialize>(
    run: &mut RunDir,
    name: &str,
    kind: ArtifactKind,
    rel: &str,
    value: &T,
    stage: &'static str,
) -> Result<(), CliError> {
    let path = run.path(rel)?;
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(&path, text)
        .map_err(|e| Error::io(&path, e))
        .stage(stage)?;
    run.artifact(name, kind, rel).stage(stage)
}

fn predict_set(
    model: &GbdtModel,
    name: &str,
    table: &FeatureTable,
) -> Result<PredictionSet, Error> {
    let rows = model.predict_proba(&table.values)?;
    PredictionSet::from_rows(name, &table.ids, rows)
}

fn evaluate(
    set: &PredictionSet,
    gold: &indexmap::IndexMap<String, usize>,
    schema: &TaskSchema,
) -> Result<MetricReport, Error> {
    let pred = set
        .select(&gold.keys().cloned().collect::<Vec<_>>())?
        .predicted_classes();
    let cm = metrics::confusion(gold, &pred, schema.n_classes())?;
    let averaging = if schema.positive_class.is_some() {
        Averaging::Binary
    } else {
        Averaging::Weighted
    };
    metrics::score(&cm, averaging, schema.positive_class)
}

#[derive(Debug, Clone)]
pub struct RunAOutcome {
    pub report: MetricReport,
    pub ensemble_accuracy: f64,
    /// Eval accuracy of every ensemble member, in member order.
    pub members: Vec<(String, f64)>,
    pub weights: EnsembleWeights,
    pub manifest: PathBuf,
}

#[derive(Serialize)]
struct MemberScore {
    model: String,
    weight: f64,
    eval_accuracy: f64,
}

#[derive(Serialize)]
struct RunAReport {
    task: &'static str,
    eval: ReportJson,
    members: Vec<MemberScore>,
}

fn design_table(ds: &Dataset, vocab: &BowVocab) -> Result<(FeatureTable, FeatureTable), Error> {
    Ok((
        features::syntactic_table(ds)?,
        features::bow_table(ds, vocab)?,
    ))
}

/// Syntactic + n-gram tabular models, greedily ensembled with any external
/// prediction files on the evaluation set.
pub fn run_a(config: &PipelineConfig) -> Result<RunAOutcome, CliError> {
    log_config("run-a", config);
    let presets = presets(config)?;
    let rounds = config.usize("ensemble_rounds")?;
    let min_count = config.usize("min_count")?;
    let max_size = config.usize("max_size")?;
    let schema = TaskSchema::for_task(Task::A);
    let mut run = RunDir::create("run-a", config)?;

    let stage = "load-train";
    let train = load(
        &mut run,
        "train",
        &config.path("train"),
        Task::A,
        Split::Train,
        stage,
    )?;
    let y = train.labels().stage(stage)?;

    let stage = "features";
    let vocab = bow::fit_vocab(&train.texts(), min_count, max_size).stage(stage)?;
    vocab.save(run.path("vocab.json")?).stage(stage)?;
    run.artifact("vocab", ArtifactKind::Vocab, "vocab.json")
        .stage(stage)?;
    let (syn, bow_t) = design_table(&train, &vocab).stage(stage)?;
    write_table(
        &mut run,
        "train-syntactic",
        "features/train_syntactic.csv",
        &syn,
        stage,
    )?;
    write_table(
        &mut run,
        "train-bow",
        "features/train_bow.csv",
        &bow_t,
        stage,
    )?;
    let train_x = FeatureTable::hconcat(&[syn, bow_t]).stage(stage)?;
    info!(
        "features: {} rows x {} columns",
        train_x.ids.len(),
        train_x.names.len()
    );

    let stage = "train-models";
    let models: Vec<(String, GbdtModel)> = par::map(&presets, |cfg| {
        gbdt::train(&train_x.values, &y, cfg, 2, train_x.names.clone())
            .map(|m| (format!("gbdt-{}", cfg.preset_name), m))
    })
    .into_iter()
    .collect::<Result<_, _>>()
    .stage(stage)?;
    for (name, m) in &models {
        let rel = format!("models/{name}.json");
        m.save(run.path(&rel)?).stage(stage)?;
        run.artifact(name, ArtifactKind::Model, &rel).stage(stage)?;
    }

    let stage = "ensemble-fit";
    let eval = load(
        &mut run,
        "eval",
        &config.path("eval"),
        Task::A,
        Split::Eval,
        stage,
    )?;
    let gold = eval.gold().stage(stage)?;
    let eval_ids = eval.ids();
    let (syn, bow_t) = design_table(&eval, &vocab).stage(stage)?;
    let eval_x = FeatureTable::hconcat(&[syn, bow_t]).stage(stage)?;
    let mut members = Vec::new();
    for (name, m) in &models {
        let set = predict_set(m, name, &eval_x).stage(stage)?;
        write_preds(
            &mut run,
            name,
            &format!("preds/eval/{name}.jsonl"),
            &set,
            stage,
        )?;
        members.push(set);
    }
    let mut external = Vec::new();
    for (i, path) in config.paths("external_preds").iter().enumerate() {
        let set = PredictionSet::load(path).stage(stage)?;
        if set.n_classes() != schema.n_classes() {
            return Err(Error::Shape(format!(
                "{} is not a two-class prediction file",
                path.display()
            )))
            .stage(stage);
        }
        run.input(&format!("external_preds[{i}]"), path)
            .stage(stage)?;
        if members
            .iter()
            .chain(&external)
            .any(|m: &PredictionSet| m.model_name == set.model_name)
        {
            return Err(CliError::Config(format!(
                "duplicate ensemble member name {:?}",
                set.model_name
            )));
        }
        external.push(set.clone());
        members.push(set.select(&eval_ids).stage(stage)?);
    }
    let weights = ensemble::fit_weights(&members, &gold, rounds).stage(stage)?;
    weights.save(run.path("weights.json")?).stage(stage)?;
    run.artifact("weights", ArtifactKind::Weights, "weights.json")
        .stage(stage)?;
    for (m, w) in &weights.members {
        info!("ensemble weight {m}: {w}");
    }

    let stage = "ensemble-predict";
    let final_eval = ensemble::ensemble_predict(&members, &weights).stage(stage)?;
    write_preds(
        &mut run,
        "final-eval",
        "final_eval.jsonl",
        &final_eval,
        stage,
    )?;
    if let Some(test_path) = config.optional_path("test") {
        let test = load(&mut run, "test", &test_path, Task::A, Split::Test, stage)?;
        let (syn, bow_t) = design_table(&test, &vocab).stage(stage)?;
        let test_x = FeatureTable::hconcat(&[syn, bow_t]).stage(stage)?;
        let mut test_members = Vec::new();
        for (name, m) in &models {
            test_members.push(predict_set(m, name, &test_x).stage(stage)?);
        }
        for set in &external {
            test_members.push(set.select(&test.ids()).stage(stage)?);
        }
        let final_test = ensemble::ensemble_predict(&test_members, &weights).stage(stage)?;
        write_preds(
            &mut run,
            "final-test",
            "final_test.jsonl",
            &final_test,
            stage,
        )?;
    }

    let stage = "evaluate";
    let report = evaluate(&final_eval, &gold, &schema).stage(stage)?;
    let mut member_scores = Vec::new();
    for (set, (_, w)) in members.iter().zip(&weights.members) {
        let acc = ensemble::set_accuracy(set, &gold).stage(stage)?;
        member_scores.push((set.model_name.clone(), acc, *w));
    }
    let summary = RunAReport {
        task: "a",
        eval: report.to_json_repr(),
        members: member_scores
            .iter()
            .map(|(m, acc, w)| MemberScore {
                model: m.clone(),
                weight: *w,
                eval_accuracy: metrics::percent(*acc),
            })
            .collect(),
    };
    write_json(
        &mut run,
        "report",
        ArtifactKind::Report,
        "report.json",
        &summary,
        stage,
    )?;
    info!(
        "run-a: eval accuracy {:.4}, F1 {:.4}",
        report.accuracy, report.f1
    );

    Ok(RunAOutcome {
        ensemble_accuracy: report.accuracy,
        report,
        members: member_scores.into_iter().map(|(m, a, _)| (m, a)).collect(),
        weights,
        manifest: run.finish()?,
    })
}

#[derive(Debug, Clone)]
pub struct RunBOutcome {
    pub report: MetricReport,
    pub selection: SelectionReport,
    pub embeddings_only: Option<SelectionReport>,
    pub manifest: PathBuf,
}

#[derive(Serialize)]
struct RunBReport<'a> {
    task: &'static str,
    eval: ReportJson,
    selection: &'a SelectionReport,
    embeddings_only: Option<&'a SelectionReport>,
}

fn entity_source(config: &PipelineConfig, run: &mut RunDir) -> Result<EntitySource, CliError> {
    let stage = "entities";
    match config.get("entity_source") {
        "gazetteer" => match config.optional_path("gazetteer") {
            Some(p) => {
                let gaz = Gazetteer::load(&p).stage(stage)?;
                run.input("gazetteer", &p).stage(stage)?;
                Ok(EntitySource::Gazetteer(gaz))
            }
            None => Ok(EntitySource::Gazetteer(Gazetteer::synthetic())),
        },
        "annotations" => {
            let p = config.optional_path("annotations").ok_or_else(|| {
                CliError::Config("entity_source = annotations needs `annotations`".into())
            })?;
            let spans = entfeat::load_annotations(&p).stage(stage)?;
            run.input("annotations", &p).stage(stage)?;
            Ok(EntitySource::Annotations(spans))
        }
        other => Err(CliError::Config(format!(
            "entity_source must be `gazetteer` or `annotations`, got {other:?}"
        ))),
    }
}

/// Embedding + entity-count fusion with preset selection on the eval set.
pub fn run_b(config: &PipelineConfig) -> Result<RunBOutcome, CliError> {
    log_config("run-b", config);
    let presets = presets(config)?;
    let compare = config.bool("compare_embeddings_only")?;
    let schema = TaskSchema::for_task(Task::B);
    let k = schema.n_classes();
    let mut run = RunDir::create("run-b", config)?;

    let stage = "load-data";
    let train = load(
        &mut run,
        "train",
        &config.path("train"),
        Task::B,
        Split::Train,
        stage,
    )?;
    let eval = load(
        &mut run,
        "eval",
        &config.path("eval"),
        Task::B,
        Split::Eval,
        stage,
    )?;
    let train_y = train.labels().stage(stage)?;
    let eval_y = eval.labels().stage(stage)?;
    let gold = eval.gold().stage(stage)?;
    let test = match config.optional_path("test") {
        Some(p) => Some(load(&mut run, "test", &p, Task::B, Split::Test, stage)?),
        None => None,
    };

    let stage = "entities";
    let source = entity_source(config, &mut run)?;
    let train_counts = source.counts(&train);
    let eval_counts = source.counts(&eval);
    let ner_train = features::ner_table(&train_counts).stage(stage)?;
    write_table(&mut run, "ner-train", "ner/train.csv", &ner_train, stage)?;
    write_table(
        &mut run,
        "ner-eval",
        "ner/eval.csv",
        &features::ner_table(&eval_counts).stage(stage)?,
        stage,
    )?;

    let stage = "fusion";
    let paths = config.paths("embeddings");
    if paths.is_empty() {
        return Err(CliError::Config("`embeddings` names no files".into()));
    }
    let mut store: Option<EmbeddingStore> = None;
    for (i, p) in paths.iter().enumerate() {
        let s = EmbeddingStore::load(p).stage(stage)?;
        run.input(&format!("embeddings[{i}]"), p).stage(stage)?;
        match store.as_mut() {
            None => store = Some(s),
            Some(acc) => acc.merge(s).stage(stage)?,
        }
    }
    let store = store.expect("at least one embedding file");
    let fusion_train = fusion::fusion_table(&train, &store, &train_counts).stage(stage)?;
    let fusion_eval = fusion::fusion_table(&eval, &store, &eval_counts).stage(stage)?;
    write_table(
        &mut run,
        "fusion-train",
        "features/fusion_train.csv",
        &fusion_train,
        stage,
    )?;
    write_table(
        &mut run,
        "fusion-eval",
        "features/fusion_eval.csv",
        &fusion_eval,
        stage,
    )?;

    let stage = "train-select";
    let (model, selection) = fusion::train_and_select(
        LabeledMatrix {
            x: &fusion_train.values,
            y: &train_y,
        },
        LabeledMatrix {
            x: &fusion_eval.values,
            y: &eval_y,
        },
        &presets,
        k,
        &fusion_train.names,
    )
    .stage(stage)?;
    model.save(run.path("models/fusion.json")?).stage(stage)?;
    run.artifact("fusion-model", ArtifactKind::Model, "models/fusion.json")
        .stage(stage)?;
    write_json(
        &mut run,
        "selection",
        ArtifactKind::Selection,
        "selection.json",
        &selection,
        stage,
    )?;
    for c in &selection.candidates {
        info!(
            "fusion preset {}: eval accuracy {:.4}",
            c.preset, c.eval_accuracy
        );
    }
    let embeddings_only = if compare {
        let cols: Vec<usize> = (0..store.dim()).collect();
        let (m, sel) = fusion::train_and_select(
            LabeledMatrix {
                x: &fusion_train.values.select_columns(&cols),
                y: &train_y,
            },
            LabeledMatrix {
                x: &fusion_eval.values.select_columns(&cols),
                y: &eval_y,
            },
            &presets,
            k,
            &fusion::embedding_column_names(store.dim()),
        )
        .stage(stage)?;
        m.save(run.path("models/embeddings_only.json")?)
            .stage(stage)?;
        run.artifact(
            "embeddings-only-model",
            ArtifactKind::Model,
            "models/embeddings_only.json",
        )
        .stage(stage)?;
        write_json(
            &mut run,
            "selection-embeddings-only",
            ArtifactKind::Selection,
            "selection_embeddings_only.json",
            &sel,
            stage,
        )?;
        info!("embeddings-only eval accuracy {:.4}", sel.eval_accuracy);
        Some(sel)
    } else {
        None
    };

    let stage = "predict";
    let final_eval = predict_set(&model, "fusion", &fusion_eval).stage(stage)?;
    write_preds(
        &mut run,
        "final-eval",
        "final_eval.jsonl",
        &final_eval,
        stage,
    )?;
    if let Some(test) = &test {
        let counts = source.counts(test);
        let table = fusion::fusion_table(test, &store, &counts).stage(stage)?;
        let final_test = predict_set(&model, "fusion", &table).stage(stage)?;
        write_preds(
            &mut run,
            "final-test",
            "final_test.jsonl",
            &final_test,
            stage,
        )?;
    }

    let stage = "evaluate";
    let report = evaluate(&final_eval, &gold, &schema).stage(stage)?;
    let summary = RunBReport {
        task: "b",
        eval: report.to_json_repr(),
        selection: &selection,
        embeddings_only: embeddings_only.as_ref(),
    };
    write_json(
        &mut run,
        "report",
        ArtifactKind::Report,
        "report.json",
        &summary,
        stage,
    )?;
    info!(
        "run-b: eval accuracy {:.4}, weighted F1 {:.4}",
        report.accuracy, report.f1
    );

    Ok(RunBOutcome {
        report,
        selection,
        embeddings_only,
        manifest: run.finish()?,
    })
}
