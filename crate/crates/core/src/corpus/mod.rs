//! Examples, label schemas and dataset files.
//!
//! Datasets are JSONL, one record per line:
//! `{"id": str, "text": str, "label": str|null, "embedding_id": str|null}`.
//! Labels are class names; they are mapped to ids through [`TaskSchema`].

mod synth;

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use synth::{generate_synthetic, NORP_NAMES, ORG_NAMES, PERSON_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Hate speech detection (binary).
    A,
    /// Hate speech target detection (three classes).
    B,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Task::A),
            "b" | "B" => Ok(Task::B),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

/// Ordered class names for a task. Class ids are positions in `class_names`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSchema {
    pub task: Task,
    pub class_names: Vec<String>,
    pub positive_class: Option<usize>,
}

impl TaskSchema {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::A => TaskSchema {
                task,
                class_names: vec!["No Hate Speech".into(), "Hate Speech".into()],
                positive_class: Some(1),
            },
            Task::B => TaskSchema {
                task,
                class_names: vec![
                    "Individual".into(),
                    "Community".into(),
                    "Organization".into(),
                ],
                positive_class: None,
            },
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn class_name(&self, id: usize) -> Option<&str> {
        self.class_names.get(id).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub label: Option<usize>,
    pub embedding_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: TaskSchema,
    pub examples: Vec<Example>,
    pub split: Split,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    text: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    embedding_id: Option<String>,
}

impl Dataset {
    /// Reads a JSONL dataset. Blank lines are skipped; errors carry the
    /// 1-based line number.
    pub fn load(path: impl AsRef<Path>, schema: &TaskSchema, split: Split) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, path, schema, split)
    }

    pub(crate) fn parse(
        content: &str,
        path: &Path,
        schema: &TaskSchema,
        split: Split,
    ) -> Result<Self> {
        let mut examples = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = i + 1;
            let rec: Record =
                serde_json::from_str(line).map_err(|e| Error::parse(path, lineno, e))?;
            if rec.id.is_empty() {
                return Err(Error::parse(path, lineno, "empty id"));
            }
            let label = match rec.label {
                None => None,
                Some(name) => Some(schema.class_id(&name).ok_or_else(|| {
                    Error::parse(path, lineno, format!("unknown class name {name:?}"))
                })?),
            };
            if !seen.insert(rec.id.clone()) {
                return Err(Error::parse(
                    path,
                    lineno,
                    Error::DuplicateId(rec.id).to_string(),
                ));
            }
            examples.push(Example {
                id: rec.id,
                text: rec.text,
                label,
                embedding_id: rec.embedding_id,
            });
        }
        Ok(Dataset {
            schema: schema.clone(),
            examples,
            split,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        for ex in &self.examples {
            let rec = Record {
                id: ex.id.clone(),
                text: ex.text.clone(),
                label: ex
                    .label
                    .and_then(|l| self.schema.class_name(l))
                    .map(str::to_owned),
                embedding_id: ex.embedding_id.clone(),
            };
            serde_json::to_writer(&mut *out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.examples.iter().map(|e| e.id.clone()).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.examples.iter().map(|e| e.text.as_str()).collect()
    }

    /// Class ids of every example, failing on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.examples
            .iter()
            .map(|e| e.label.ok_or_else(|| Error::MissingLabel(e.id.clone())))
            .collect()
    }

    /// `id -> class` for a fully labeled dataset, in file order.
    pub fn gold(&self) -> Result<indexmap::IndexMap<String, usize>> {
        self.examples
            .iter()
            .map(|e| {
                e.label
                    .map(|l| (e.id.clone(), l))
                    .ok_or_else(|| Error::MissingLabel(e.id.clone()))
            })
            .collect()
    }
}
