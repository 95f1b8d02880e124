//! Exact cosine ranking of candidate concepts for a projected query, and Hit@k.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::taxonomy::ConceptId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    name: String,
    members: Vec<ConceptId>,
}

impl CandidateSet {
    /// Validates membership against `table`: non-empty, no duplicates, every id resolvable.
    pub fn new(
        name: impl Into<String>,
        members: Vec<ConceptId>,
        table: &EmbeddingTable,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyInput("candidate set is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for &m in &members {
            if !table.contains(m) {
                return Err(Error::UnknownConcept(m.to_string()));
            }
            if !seen.insert(m) {
                return Err(Error::Precondition(format!(
                    "duplicate candidate `{}`",
                    table.label(m)
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            members,
        })
    }

    pub fn from_labels<S: AsRef<str>>(
        name: impl Into<String>,
        labels: &[S],
        table: &EmbeddingTable,
    ) -> Result<Self> {
        let members = labels
            .iter()
            .map(|l| table.id(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, members, table)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &[ConceptId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        self.members.contains(&id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedPrediction {
    pub query_id: String,
    /// Sorted by descending similarity, ties by ascending concept id.
    pub ranking: Vec<(ConceptId, f64)>,
}

impl RankedPrediction {
    pub fn position(&self, id: ConceptId) -> Option<usize> {
        self.ranking.iter().position(|&(c, _)| c == id)
    }

    pub fn top(&self) -> Option<ConceptId> {
        self.ranking.first().map(|&(c, _)| c)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (norm(a) * norm(b))
}

/// Scores every candidate by cosine similarity and sorts the full list.
pub fn rank(
    query_id: &str,
    query: &[f64],
    table: &EmbeddingTable,
    candidates: &CandidateSet,
) -> Result<RankedPrediction> {
    if query.len() != table.dim() {
        return Err(Error::Dimension(format!(
            "query has {} entries, embedding dimension is {}",
            query.len(),
            table.dim()
        )));
    }
    let qn = norm(query);
    if qn == 0.0 || !qn.is_finite() {
        return Err(Error::DegenerateVector(format!(
            "query `{query_id}` has zero norm"
        )));
    }
    let mut ranking = candidates
        .members()
        .iter()
        .map(|&c| {
            let v = table
                .vector(c)
                .ok_or_else(|| Error::UnknownConcept(c.to_string()))?;
            let dot: f64 = query.iter().zip(v).map(|(x, y)| x * y).sum();
            Ok((c, dot / (qn * norm(v))))
        })
        .collect::<Result<Vec<_>>>()?;
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(RankedPrediction {
        query_id: query_id.to_string(),
        ranking,
    })
}

/// True iff any member of `correct` is among the first `k` ranked concepts.
pub fn hit_at_k(prediction: &RankedPrediction, correct: &BTreeSet<ConceptId>, k: usize) -> bool {
    prediction
        .ranking
        .iter()
        .take(k)
        .any(|(c, _)| correct.contains(c))
}
