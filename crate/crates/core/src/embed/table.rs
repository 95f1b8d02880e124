use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::ConceptId;

const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub alpha: f64,
    pub dim: usize,
    pub centered: bool,
    pub renormalized: bool,
    pub method: String,
}

/// One concept vector per row; row `i` belongs to `ConceptId(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    labels: Vec<String>,
    index: HashMap<String, ConceptId>,
    dim: usize,
    data: Vec<f64>,
    meta: EmbeddingMeta,
}

impl EmbeddingTable {
    pub fn new(
        labels: Vec<String>,
        dim: usize,
        data: Vec<f64>,
        meta: EmbeddingMeta,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension(
                "embedding dimension must be positive".into(),
            ));
        }
        if dim > labels.len() {
            return Err(Error::Dimension(format!(
                "dimension {dim} exceeds concept count {}",
                labels.len()
            )));
        }
        if data.len() != labels.len() * dim {
            return Err(Error::Dimension(format!(
                "{} values for {} concepts of dimension {dim}",
                data.len(),
                labels.len()
            )));
        }
        if meta.dim != dim {
            return Err(Error::Dimension(format!(
                "meta reports dimension {}, data has {dim}",
                meta.dim
            )));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), ConceptId::from(i)).is_some() {
                return Err(Error::Precondition(format!(
                    "duplicate concept label `{l}`"
                )));
            }
        }
        let table = Self {
            labels,
            index,
            dim,
            data,
            meta,
        };
        if table.meta.renormalized {
            for (i, row) in table.data.chunks(dim).enumerate() {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                    return Err(Error::DegenerateRow {
                        concept: table.labels[i].clone(),
                    });
                }
            }
        }
        Ok(table)
    }

    /// Rescales every row to unit length and sets the `renormalized` flag.
    pub fn renormalized(mut self) -> Result<Self> {
        for (i, row) in self.data.chunks_mut(self.dim).enumerate() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::DegenerateRow {
                    concept: self.labels[i].clone(),
                });
            }
            row.iter_mut().for_each(|v| *v /= norm);
        }
        self.meta.renormalized = true;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn meta(&self) -> &EmbeddingMeta {
        &self.meta
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: ConceptId) -> &str {
        &self.labels[id.index()]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn id(&self, label: &str) -> Result<ConceptId> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        id.index() < self.labels.len()
    }

    pub fn vector(&self, id: ConceptId) -> Option<&[f64]> {
        let i = id.index();
        (i < self.labels.len()).then(|| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn vector_by_label(&self, label: &str) -> Option<&[f64]> {
        self.index.get(label).and_then(|&id| self.vector(id))
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.data.chunks(self.dim))
    }
}
