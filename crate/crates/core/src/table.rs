//! Named feature tables: an id column followed by numeric columns, stored as
//! CSV with a header row. Values are written in shortest round-trip form.

use std::fs;
use std::path::Path;

use crate::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    pub values: Matrix,
}

impl FeatureTable {
    pub fn new(ids: Vec<String>, names: Vec<String>, values: Matrix) -> Result<Self> {
        if ids.len() != values.n_rows() || names.len() != values.n_cols() {
            return Err(Error::Shape(format!(
                "{} ids and {} names for a {}x{} matrix",
                ids.len(),
                names.len(),
                values.n_rows(),
                values.n_cols()
            )));
        }
        Ok(FeatureTable { ids, names, values })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(file);
        let header = reader
            .headers()
            .map_err(|e| Error::parse(path, 1, e))?
            .clone();
        if header.get(0) != Some("id") {
            return Err(Error::parse(path, 1, "first column must be `id`"));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::parse(path, line, e))?;
            if rec.len() != names.len() + 1 {
                return Err(Error::parse(path, line, "wrong number of fields"));
            }
            ids.push(rec[0].to_owned());
            for field in rec.iter().skip(1) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::parse(path, line, format!("bad number {field:?}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(path, line, "non-finite value"));
                }
                data.push(v);
            }
        }
        let values = Matrix::new(ids.len(), names.len(), data)?;
        FeatureTable::new(ids, names, values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e: csv::Error| Error::io(path, e.into());
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(std::iter::once("id").chain(self.names.iter().map(String::as_str)))
            .map_err(io)?;
        let mut buf = Vec::with_capacity(self.names.len() + 1);
        for (id, row) in self.ids.iter().zip(self.values.rows()) {
            buf.clear();
            buf.push(id.clone());
            buf.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&buf).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Joins tables column-wise. Row ids must agree in order.
    pub fn hconcat(parts: &[FeatureTable]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidArgument("no feature tables".into()));
        };
        for p in &parts[1..] {
            if p.ids != first.ids {
                return Err(Error::IdMismatch(
                    "feature tables list different ids or a different row order".into(),
                ));
            }
        }
        let names = parts.iter().flat_map(|p| p.names.iter().cloned()).collect();
        let mats: Vec<&Matrix> = parts.iter().map(|p| &p.values).collect();
        FeatureTable::new(first.ids.clone(), names, Matrix::hconcat(&mats)?)
    }

    /// Returns the rows for `ids`, in that order.
    pub fn select_ids(&self, ids: &[String]) -> Result<Self> {
        let pos: std::collections::HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(ids.len());
        for id in ids {
            let &i = pos
                .get(id.as_str())
                .ok_or_else(|| Error::IdMismatch(format!("no feature row for {id:?}")))?;
            rows.push(self.values.row(i));
        }
        let values = Matrix::from_rows(&rows, self.values.n_cols())?;
        FeatureTable::new(ids.to_vec(), self.names.clone(), values)
    }
}
