//! Fusion of multimodal embeddings with entity counts, and preset selection
//! by validation accuracy.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Example};
use crate::entfeat::{EntityCountVector, COLUMN_NAMES};
use crate::gbdt::{self, GbdtConfig, GbdtModel};
use crate::matrix::Matrix;
use crate::table::FeatureTable;
use crate::{Error, Result};

/// Precomputed embeddings keyed by embedding id.
///
/// File format: a header line `{"dim": D}` followed by one
/// `{"id": str, "vector": [D floats]}` line per embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    rows: IndexMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingRecord {
    id: String,
    vector: Vec<f64>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            rows: IndexMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.rows.get(id).map(Vec::as_slice)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn insert(&mut self, id: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Shape(format!(
                "embedding {id:?} has dimension {}, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding {id:?}")));
        }
        if self.rows.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.rows.insert(id, vector);
        Ok(())
    }

    /// Adds every entry of `other`; dimensions must agree and ids must not
    /// collide.
    pub fn merge(&mut self, other: EmbeddingStore) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::Shape(format!(
                "cannot merge dimension {} into {}",
                other.dim, self.dim
            )));
        }
        for (id, v) in other.rows {
            self.insert(id, v)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let Some((i, first)) = lines.next() else {
            return Err(Error::parse(path, 1, "missing {\"dim\": D} header"));
        };
        let header: Header = serde_json::from_str(first)
            .map_err(|_| Error::parse(path, i + 1, "missing {\"dim\": D} header"))?;
        let mut store = EmbeddingStore::new(header.dim);
        for (i, line) in lines {
            let rec: EmbeddingRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e))?;
            store
                .insert(rec.id, rec.vector)
                .map_err(|e| Error::parse(path, i + 1, e))?;
        }
        Ok(store)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        serde_json::to_writer(&mut *out, &Header { dim: self.dim })?;
        out.write_all(b"\n")?;
        for (id, vector) in &self.rows {
            serde_json::to_writer(
                &mut *out,
                &EmbeddingRecord {
                    id: id.clone(),
                    vector: vector.clone(),
                },
            )?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Embedding followed by `[per, norp, org]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionVector(pub Vec<f64>);

pub fn build_fusion(
    example: &Example,
    store: &EmbeddingStore,
    counts: EntityCountVector,
) -> Result<FusionVector> {
    let key = example.embedding_id.as_deref().unwrap_or(&example.id);
    let emb = store.get(key).ok_or_else(|| Error::MissingEmbedding {
        example: example.id.clone(),
        embedding: key.to_owned(),
    })?;
    let mut v = Vec::with_capacity(emb.len() + 3);
    v.extend_from_slice(emb);
    v.extend(counts.to_f64());
    Ok(FusionVector(v))
}

pub fn embedding_column_names(dim: usize) -> Vec<String> {
    (0..dim).map(|j| format!("emb_{j}")).collect()
}

pub fn fusion_column_names(dim: usize) -> Vec<String> {
    let mut names = embedding_column_names(dim);
    names.extend(COLUMN_NAMES.iter().map(|s| s.to_string()));
    names
}

/// Fusion vectors for every example of `dataset`, in dataset order.
/// `counts` must hold a vector for each example id.
pub fn fusion_table(
    dataset: &Dataset,
    store: &EmbeddingStore,
    counts: &IndexMap<String, EntityCountVector>,
) -> Result<FeatureTable> {
    let mut rows = Vec::with_capacity(dataset.len());
    for ex in &dataset.examples {
        let c = counts
            .get(&ex.id)
            .copied()
            .ok_or_else(|| Error::IdMismatch(format!("no entity counts for {:?}", ex.id)))?;
        rows.push(build_fusion(ex, store, c)?.0);
    }
    let values = Matrix::from_rows(&rows, store.dim() + 3)?;
    FeatureTable::new(dataset.ids(), fusion_column_names(store.dim()), values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub preset: String,
    pub eval_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub candidates: Vec<CandidateScore>,
    pub selected: String,
    pub selected_index: usize,
    pub eval_accuracy: f64,
}

/// A labeled design matrix.
pub struct LabeledMatrix<'a> {
    pub x: &'a Matrix,
    pub y: &'a [usize],
}

/// Trains one model per preset on `train` and keeps the one with the best
/// accuracy on `eval` (earliest preset on ties).
pub fn train_and_select(
    train: LabeledMatrix<'_>,
    eval: LabeledMatrix<'_>,
    presets: &[GbdtConfig],
    n_classes: usize,
    feature_names: &[String],
) -> Result<(GbdtModel, SelectionReport)> {
    if presets.is_empty() {
        return Err(Error::InvalidArgument("no presets to sweep".into()));
    }
    if eval.x.n_rows() == 0 {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    if eval.x.n_rows() != eval.y.len() {
        return Err(Error::Shape("evaluation labels do not match rows".into()));
    }
    let fitted: Vec<Result<(GbdtModel, f64)>> = crate::par::map(presets, |cfg| {
        let model = gbdt::train(train.x, train.y, cfg, n_classes, feature_names.to_vec())?;
        let pred = model.predict_class(eval.x)?;
        let hits = pred.iter().zip(eval.y).filter(|(p, g)| p == g).count();
        Ok((model, hits as f64 / eval.y.len() as f64))
    });
    let mut models = Vec::with_capacity(presets.len());
    let mut candidates = Vec::with_capacity(presets.len());
    for (cfg, r) in presets.iter().zip(fitted) {
        let (m, acc) = r?;
        candidates.push(CandidateScore {
            preset: cfg.preset_name.clone(),
            eval_accuracy: acc,
        });
        models.push(m);
    }
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.eval_accuracy > candidates[best].eval_accuracy {
            best = i;
        }
    }
    let report = SelectionReport {
        selected: candidates[best].preset.clone(),
        selected_index: best,
        eval_accuracy: candidates[best].eval_accuracy,
        candidates,
    };
    Ok((models.swap_remove(best), report))
}
