//! Dataset-level feature builders shared by the subcommands and pipelines.

use std::path::Path;

use indexmap::IndexMap;
use mmhate_core::bow::{self, BowVocab};
use mmhate_core::corpus::{Dataset, Split, Task, TaskSchema};
use mmhate_core::entfeat::{self, EntityCountVector, EntitySpan, Gazetteer};
use mmhate_core::matrix::Matrix;
use mmhate_core::synfeat;
use mmhate_core::table::FeatureTable;
use mmhate_core::{par, Error, Result};

/// Loads a dataset under `task`, or under whichever task's label names fit
/// when `task` is `None`.
pub fn load_dataset(path: &Path, task: Option<Task>, split: Split) -> Result<Dataset> {
    match task {
        Some(t) => Dataset::load(path, &TaskSchema::for_task(t), split),
        None => Dataset::load(path, &TaskSchema::for_task(Task::A), split).or_else(|first| {
            Dataset::load(path, &TaskSchema::for_task(Task::B), split).map_err(|_| first)
        }),
    }
}

pub fn syntactic_table(ds: &Dataset) -> Result<FeatureTable> {
    let vecs = synfeat::extract_batch(&ds.texts());
    let rows: Vec<&[f64]> = vecs.iter().map(|v| v.values().as_slice()).collect();
    FeatureTable::new(
        ds.ids(),
        synfeat::FEATURE_NAMES.clone(),
        Matrix::from_rows(&rows, synfeat::DIM)?,
    )
}

pub fn bow_table(ds: &Dataset, vocab: &BowVocab) -> Result<FeatureTable> {
    let vecs = bow::vectorize_batch(&ds.texts(), vocab);
    let rows: Vec<Vec<f64>> = vecs.iter().map(|v| v.to_dense(vocab.len())).collect();
    FeatureTable::new(
        ds.ids(),
        vocab.column_names(),
        Matrix::from_rows(&rows, vocab.len())?,
    )
}

pub enum EntitySource {
    Gazetteer(Gazetteer),
    Annotations(std::collections::BTreeMap<String, Vec<EntitySpan>>),
}

impl EntitySource {
    pub fn counts(&self, ds: &Dataset) -> IndexMap<String, EntityCountVector> {
        match self {
            EntitySource::Gazetteer(gaz) => {
                let counts = par::map(&ds.examples, |ex| {
                    entfeat::count_entities(&entfeat::gazetteer_recognize(&ex.id, &ex.text, gaz))
                });
                ds.ids().into_iter().zip(counts).collect()
            }
            EntitySource::Annotations(map) => ds
                .examples
                .iter()
                .map(|ex| {
                    let spans = map.get(&ex.id).map(Vec::as_slice).unwrap_or(&[]);
                    (ex.id.clone(), entfeat::count_entities(spans))
                })
                .collect(),
        }
    }
}

pub fn ner_table(counts: &IndexMap<String, EntityCountVector>) -> Result<FeatureTable> {
    let rows: Vec<[f64; 3]> = counts.values().map(|c| c.to_f64()).collect();
    FeatureTable::new(
        counts.keys().cloned().collect(),
        entfeat::COLUMN_NAMES
            .iter()
            .map(|s| s.to_string())
            .collect(),
        Matrix::from_rows(&rows, 3)?,
    )
}

/// Reads entity counts back from an `id,per,norp,org` table.
pub fn counts_from_table(table: &FeatureTable) -> Result<IndexMap<String, EntityCountVector>> {
    if table.names != entfeat::COLUMN_NAMES {
        return Err(Error::Shape(format!(
            "entity table columns {:?}, expected {:?}",
            table.names,
            entfeat::COLUMN_NAMES
        )));
    }
    let to_count = |v: f64| {
        (v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64)
            .then_some(v as u32)
            .ok_or_else(|| Error::InvalidArgument(format!("entity count {v} is not a count")))
    };
    table
        .ids
        .iter()
        .zip(table.values.rows())
        .map(|(id, r)| {
            Ok((
                id.clone(),
                EntityCountVector {
                    per: to_count(r[0])?,
                    norp: to_count(r[1])?,
                    org: to_count(r[2])?,
                },
            ))
        })
        .collect()
}
