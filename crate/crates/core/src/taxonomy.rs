//! Concept graph with typed edges, plus the subsumption and sibling queries
//! that drive both embedding construction and evaluation.
//!
//! Is-a edges point from the specific concept (child) to the general one
//! (parent). The is-a subgraph may have multiple inheritance but must be
//! acyclic; other relation kinds are kept as opaque tags.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Relation token that marks an is-a edge in edge-list documents.
pub const ISA_TOKEN: &str = "isa";

/// Default depth within which two classes must share a subsumer to count as siblings.
pub const DEFAULT_SHARE_DEPTH: usize = 2;

/// Dense handle of a concept inside one [`ConceptGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConceptId(pub u32);

impl ConceptId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ConceptId {
    fn from(i: usize) -> Self {
        ConceptId(i as u32)
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    IsA,
    Other(String),
}

impl EdgeKind {
    pub fn from_token(token: &str) -> Self {
        if token == ISA_TOKEN {
            EdgeKind::IsA
        } else {
            EdgeKind::Other(token.to_string())
        }
    }

    pub fn token(&self) -> &str {
        match self {
            EdgeKind::IsA => ISA_TOKEN,
            EdgeKind::Other(tag) => tag,
        }
    }

    pub fn is_isa(&self) -> bool {
        matches!(self, EdgeKind::IsA)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: ConceptId,
    pub target: ConceptId,
    pub kind: EdgeKind,
}

/// Subsumers of one concept grouped by their minimum is-a distance.
///
/// `by_depth[0]` holds the 1-step subsumers (direct parents), `by_depth[1]`
/// the 2-step ones, and so on. A concept reachable at several distances is
/// recorded only at the smallest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsumerClosure {
    pub concept: ConceptId,
    pub by_depth: Vec<BTreeSet<ConceptId>>,
}

impl SubsumerClosure {
    pub fn max_depth(&self) -> usize {
        self.by_depth.len()
    }

    /// Subsumers at exactly `step` is-a steps (1-based). Empty beyond the closure.
    pub fn at_step(&self, step: usize) -> &BTreeSet<ConceptId> {
        static EMPTY: BTreeSet<ConceptId> = BTreeSet::new();
        if step == 0 {
            return &EMPTY;
        }
        self.by_depth.get(step - 1).unwrap_or(&EMPTY)
    }

    /// All subsumers at distance `1..=step`.
    pub fn up_to(&self, step: usize) -> BTreeSet<ConceptId> {
        self.by_depth
            .iter()
            .take(step)
            .flat_map(|s| s.iter().copied())
            .collect()
    }

    pub fn all(&self) -> BTreeSet<ConceptId> {
        self.up_to(self.by_depth.len())
    }
}

/// Incremental constructor used by the edge-list parser and the synthetic generator.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    labels: Vec<String>,
    index: HashMap<String, ConceptId>,
    edges: Vec<Edge>,
    seen: HashSet<(ConceptId, ConceptId, EdgeKind)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a concept, returning the existing handle when the label is known.
    pub fn add_concept(&mut self, label: &str) -> Result<ConceptId> {
        if label.is_empty() {
            return Err(Error::Precondition(
                "concept labels must be non-empty".into(),
            ));
        }
        if let Some(&id) = self.index.get(label) {
            return Ok(id);
        }
        let id = ConceptId::from(self.labels.len());
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        Ok(id)
    }

    /// Adds `child -[kind]-> parent`. Returns `Ok(false)` for a duplicate triple.
    pub fn add_edge(&mut self, child: &str, kind: EdgeKind, parent: &str) -> Result<bool> {
        if child == parent {
            return Err(Error::Precondition(format!("self-edge on `{child}`")));
        }
        let source = self.add_concept(child)?;
        let target = self.add_concept(parent)?;
        if !self.seen.insert((source, target, kind.clone())) {
            return Ok(false);
        }
        self.edges.push(Edge {
            source,
            target,
            kind,
        });
        Ok(true)
    }

    pub fn build(self) -> Result<ConceptGraph> {
        let n = self.labels.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for e in self.edges.iter().filter(|e| e.kind.is_isa()) {
            parents[e.source.index()].push(e.target);
            children[e.target.index()].push(e.source);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        let graph = ConceptGraph {
            labels: self.labels,
            index: self.index,
            edges: self.edges,
            parents,
            children,
        };
        if let Some(member) = graph.find_isa_cycle() {
            return Err(Error::Cycle {
                concept: graph.label(member).to_string(),
            });
        }
        Ok(graph)
    }
}

/// Immutable concept graph. All queries take `&self` and are safe to share across threads.
#[derive(Debug, Clone)]
pub struct ConceptGraph {
    labels: Vec<String>,
    index: HashMap<String, ConceptId>,
    edges: Vec<Edge>,
    parents: Vec<Vec<ConceptId>>,
    children: Vec<Vec<ConceptId>>,
}

impl ConceptGraph {
    /// Parses a `child<TAB>relation<TAB>parent` document. `#` lines and blank lines are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut builder = GraphBuilder::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let (child, relation, parent) = (fields[0], fields[1], fields[2]);
            if child.is_empty() || relation.is_empty() || parent.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "empty field".into(),
                });
            }
            if child == parent {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("self-edge on `{child}`"),
                });
            }
            if !builder.add_edge(child, EdgeKind::from_token(relation), parent)? {
                return Err(Error::DuplicateEdge {
                    line: line_no,
                    source_label: child.to_string(),
                    relation: relation.to_string(),
                    target_label: parent.to_string(),
                });
            }
        }
        builder.build()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text).map_err(|e| match e {
            Error::Parse { line, message } => {
                Error::format(path, format!("line {line}: {message}"))
            }
            Error::DuplicateEdge { .. } => Error::format(path, e.to_string()),
            other => other,
        })
    }

    /// Serializes back to the edge-list format, in insertion order.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            out.push_str(self.label(e.source));
            out.push('\t');
            out.push_str(e.kind.token());
            out.push('\t');
            out.push_str(self.label(e.target));
            out.push('\n');
        }
        out
    }

    /// SHA-256 over the sorted edge lines; independent of edge order in the source.
    pub fn content_hash(&self) -> String {
        let mut lines: Vec<String> = self
            .edges
            .iter()
            .map(|e| {
                format!(
                    "{}\t{}\t{}",
                    self.label(e.source),
                    e.kind.token(),
                    self.label(e.target)
                )
            })
            .collect();
        lines.sort();
        let mut hasher = Sha256::new();
        for l in &lines {
            hasher.update(l.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: ConceptId) -> &str {
        &self.labels[id.index()]
    }

    pub fn id(&self, label: &str) -> Result<ConceptId> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownConcept(label.to_string()))
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        id.index() < self.labels.len()
    }

    pub fn concepts(&self) -> impl Iterator<Item = ConceptId> + '_ {
        (0..self.labels.len()).map(ConceptId::from)
    }

    pub fn isa_parents(&self, id: ConceptId) -> &[ConceptId] {
        &self.parents[id.index()]
    }

    pub fn isa_children(&self, id: ConceptId) -> &[ConceptId] {
        &self.children[id.index()]
    }

    /// Concepts with no is-a children. Isolated nodes count as leaves.
    pub fn isa_leaves(&self) -> Vec<ConceptId> {
        self.concepts()
            .filter(|c| self.children[c.index()].is_empty())
            .collect()
    }

    fn check(&self, id: ConceptId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::UnknownConcept(id.to_string()))
        }
    }

    /// Breadth-first upward walk over is-a edges, recording each subsumer at its minimum depth.
    pub fn subsumers(&self, concept: ConceptId, max_depth: usize) -> Result<SubsumerClosure> {
        self.check(concept)?;
        if max_depth == 0 {
            return Err(Error::Precondition("max_depth must be at least 1".into()));
        }
        let mut visited = HashSet::from([concept]);
        let mut frontier = vec![concept];
        let mut by_depth = Vec::with_capacity(max_depth);
        for _ in 0..max_depth {
            let mut level = BTreeSet::new();
            for &c in &frontier {
                for &p in &self.parents[c.index()] {
                    if visited.insert(p) {
                        level.insert(p);
                    }
                }
            }
            frontier = level.iter().copied().collect();
            by_depth.push(level);
        }
        Ok(SubsumerClosure { concept, by_depth })
    }

    /// Partitions `zero_shot` into classes that share a subsumer (within
    /// `share_depth` steps of both sides) with some training class, and the rest.
    pub fn sibling_split(
        &self,
        zero_shot: &BTreeSet<ConceptId>,
        training: &BTreeSet<ConceptId>,
        share_depth: usize,
    ) -> Result<(BTreeSet<ConceptId>, BTreeSet<ConceptId>)> {
        if share_depth == 0 {
            return Err(Error::Precondition("share_depth must be at least 1".into()));
        }
        if let Some(c) = zero_shot.intersection(training).next() {
            return Err(Error::Precondition(format!(
                "concept `{}` is both zero-shot and training",
                self.label(*c)
            )));
        }
        let mut training_subsumers = HashSet::new();
        for &t in training {
            training_subsumers.extend(self.subsumers(t, share_depth)?.all());
        }
        let mut sibling = BTreeSet::new();
        let mut non_sibling = BTreeSet::new();
        for &z in zero_shot {
            let shared = self
                .subsumers(z, share_depth)?
                .all()
                .iter()
                .any(|s| training_subsumers.contains(s));
            if shared {
                sibling.insert(z);
            } else {
                non_sibling.insert(z);
            }
        }
        Ok((sibling, non_sibling))
    }

    /// Returns a member of some is-a cycle, if any (Kahn's algorithm on the is-a subgraph).
    fn find_isa_cycle(&self) -> Option<ConceptId> {
        let n = self.labels.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut removed = 0;
        while let Some(i) = queue.pop_front() {
            removed += 1;
            for &c in &self.children[i] {
                indegree[c.index()] -= 1;
                if indegree[c.index()] == 0 {
                    queue.push_back(c.index());
                }
            }
        }
        if removed == n {
            return None;
        }
        // Nodes left with positive indegree are on a cycle or downstream of one;
        // walking parents inside that set must revisit a node.
        let mut cur = (0..n).find(|&i| indegree[i] > 0)?;
        let mut seen = HashSet::new();
        loop {
            if !seen.insert(cur) {
                return Some(ConceptId::from(cur));
            }
            cur = self.parents[cur]
                .iter()
                .map(|p| p.index())
                .find(|&p| indegree[p] > 0)?;
        }
    }
}
