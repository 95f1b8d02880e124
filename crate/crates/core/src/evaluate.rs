//! Hit@k evaluation protocols: standard closed-set, taxonomy-aware (TAME),
//! zero-shot with a sibling/non-sibling split, and TAME on zero-shot.
//!
//! Every protocol reduces to the same step: rank a query against a candidate
//! set and test whether any member of a correct-set lands in the top k. The
//! protocols differ only in how those two sets are built, so each is a
//! [`Protocol`] strategy registered by name in a [`ProtocolRegistry`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{rank, CandidateSet};
use crate::embed::{EmbeddingMeta, EmbeddingTable};
use crate::error::{Error, Result};
use crate::project::{embed_items, FeatureSet, ProjectionModel, VisualEmbeddingStore};
use crate::taxonomy::{ConceptGraph, ConceptId, DEFAULT_SHARE_DEPTH};

pub const STANDARD: &str = "standard";
pub const TAME: &str = "tame";
pub const ZERO_SHOT: &str = "zeroshot";
pub const ZERO_SHOT_TAME: &str = "zeroshot-tame";

pub const SUBSET_ALL: &str = "all";
pub const SUBSET_SIBLING: &str = "sibling";
pub const SUBSET_NON_SIBLING: &str = "non-sibling";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ZeroShotVariant {
    #[default]
    #[serde(rename = "zeroshot-only")]
    ZeroShotOnly,
    #[serde(rename = "zeroshot+train")]
    ZeroShotPlusTraining,
}

impl ZeroShotVariant {
    pub fn tag(self) -> &'static str {
        match self {
            ZeroShotVariant::ZeroShotOnly => "zeroshot-only",
            ZeroShotVariant::ZeroShotPlusTraining => "zeroshot+train",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zeroshot-only" | "zs-only" | "only" => Ok(ZeroShotVariant::ZeroShotOnly),
            "zeroshot+train" | "zs+train" | "plus-training" => {
                Ok(ZeroShotVariant::ZeroShotPlusTraining)
            }
            other => Err(Error::InvalidConfig(format!(
                "unknown zero-shot variant `{other}`"
            ))),
        }
    }
}

/// Knobs shared by all protocols; each protocol reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolSettings {
    pub ks: Vec<usize>,
    pub max_step: usize,
    pub variant: ZeroShotVariant,
    pub inject_subsumers_into_candidates: bool,
    pub share_depth: usize,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        Self {
            ks: vec![1, 2, 5, 10],
            max_step: 3,
            variant: ZeroShotVariant::ZeroShotOnly,
            inject_subsumers_into_candidates: true,
            share_depth: DEFAULT_SHARE_DEPTH,
        }
    }
}

impl ProtocolSettings {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::InvalidConfig(
                "ks must be non-empty and positive".into(),
            ));
        }
        if self.ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "ks must be sorted ascending without repeats".into(),
            ));
        }
        if self.share_depth == 0 {
            return Err(Error::InvalidConfig("share_depth must be positive".into()));
        }
        Ok(())
    }
}

/// A projected query with its ground-truth concept (a row of the embedding table).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledQuery {
    pub id: String,
    pub vector: Vec<f64>,
    pub label: ConceptId,
}

pub fn queries_from_store(
    store: &VisualEmbeddingStore,
    table: &EmbeddingTable,
) -> Result<Vec<LabeledQuery>> {
    store
        .entries
        .iter()
        .map(|e| {
            let label = e
                .label
                .as_deref()
                .ok_or_else(|| Error::Precondition(format!("item `{}` has no label", e.id)))?;
            Ok(LabeledQuery {
                id: e.id.clone(),
                vector: e.vector.clone(),
                label: table.id(label)?,
            })
        })
        .collect()
}

/// Projects features with `model` and resolves their labels against `table`.
pub fn project_queries(
    model: &ProjectionModel,
    features: &FeatureSet,
    table: &EmbeddingTable,
) -> Result<Vec<LabeledQuery>> {
    if model.output_dim() != table.dim() {
        return Err(Error::Dimension(format!(
            "model outputs {} dimensions, embeddings have {}",
            model.output_dim(),
            table.dim()
        )));
    }
    queries_from_store(&embed_items(model, features)?, table)
}

/// Inputs shared by every protocol. All ids are rows of `table`; the graph is
/// consulted through labels, so the two need not share id order.
pub struct EvalContext<'a> {
    pub graph: &'a ConceptGraph,
    pub table: &'a EmbeddingTable,
    pub training: BTreeSet<ConceptId>,
    pub zero_shot: BTreeSet<ConceptId>,
    /// Replaces the protocol's default base candidate set when present.
    pub base_candidates: Option<Vec<ConceptId>>,
}

impl<'a> EvalContext<'a> {
    pub fn new(graph: &'a ConceptGraph, table: &'a EmbeddingTable) -> Self {
        Self {
            graph,
            table,
            training: BTreeSet::new(),
            zero_shot: BTreeSet::new(),
            base_candidates: None,
        }
    }

    pub fn with_training<S: AsRef<str>>(mut self, labels: &[S]) -> Result<Self> {
        self.training = self.resolve(labels)?;
        Ok(self)
    }

    pub fn with_zero_shot<S: AsRef<str>>(mut self, labels: &[S]) -> Result<Self> {
        self.zero_shot = self.resolve(labels)?;
        Ok(self)
    }

    pub fn with_base_candidates(mut self, members: Vec<ConceptId>) -> Self {
        self.base_candidates = Some(members);
        self
    }

    fn resolve<S: AsRef<str>>(&self, labels: &[S]) -> Result<BTreeSet<ConceptId>> {
        labels.iter().map(|l| self.table.id(l.as_ref())).collect()
    }

    fn graph_id(&self, id: ConceptId) -> Result<ConceptId> {
        self.graph.id(self.table.label(id))
    }

    /// Subsumers of `id` at distance `1..=step`, as table rows. Subsumers without
    /// a vector are skipped when `strict` is false and reported otherwise.
    pub fn subsumers_up_to(
        &self,
        id: ConceptId,
        step: usize,
        strict: bool,
    ) -> Result<BTreeSet<ConceptId>> {
        if step == 0 {
            return Ok(BTreeSet::new());
        }
        let closure = self.graph.subsumers(self.graph_id(id)?, step)?;
        let mut out = BTreeSet::new();
        for g in closure.all() {
            match self.table.id(self.graph.label(g)) {
                Ok(t) => {
                    out.insert(t);
                }
                Err(e) if strict => return Err(e),
                Err(_) => {}
            }
        }
        Ok(out)
    }

    /// `base` plus, when `inject` is set, every subsumer up to `step` of every base member.
    pub fn candidates(
        &self,
        name: &str,
        base: &[ConceptId],
        step: usize,
        inject: bool,
    ) -> Result<CandidateSet> {
        let mut members = base.to_vec();
        if inject && step > 0 {
            let present: BTreeSet<ConceptId> = base.iter().copied().collect();
            let mut extra = BTreeSet::new();
            for &b in base {
                extra.extend(self.subsumers_up_to(b, step, true)?);
            }
            members.extend(extra.difference(&present));
        }
        CandidateSet::new(name, members, self.table)
    }

    /// Ground truth plus its subsumers up to `step`.
    pub fn correct_set(&self, label: ConceptId, step: usize) -> Result<BTreeSet<ConceptId>> {
        let mut set = self.subsumers_up_to(label, step, false)?;
        set.insert(label);
        Ok(set)
    }

    fn training_base(&self) -> Vec<ConceptId> {
        self.base_candidates
            .clone()
            .unwrap_or_else(|| self.training.iter().copied().collect())
    }

    fn zero_shot_base(&self, variant: ZeroShotVariant) -> Vec<ConceptId> {
        if let Some(b) = &self.base_candidates {
            return b.clone();
        }
        let mut base: BTreeSet<ConceptId> = self.zero_shot.clone();
        if variant == ZeroShotVariant::ZeroShotPlusTraining {
            base.extend(&self.training);
        }
        base.into_iter().collect()
    }

    /// Sibling / non-sibling partition of the zero-shot classes, in table ids.
    pub fn sibling_split(
        &self,
        share_depth: usize,
    ) -> Result<(BTreeSet<ConceptId>, BTreeSet<ConceptId>)> {
        let to_graph = |s: &BTreeSet<ConceptId>| -> Result<BTreeSet<ConceptId>> {
            s.iter().map(|&c| self.graph_id(c)).collect()
        };
        let (sib, non) = self.graph.sibling_split(
            &to_graph(&self.zero_shot)?,
            &to_graph(&self.training)?,
            share_depth,
        )?;
        let to_table = |s: BTreeSet<ConceptId>| -> Result<BTreeSet<ConceptId>> {
            s.into_iter()
                .map(|g| self.table.id(self.graph.label(g)))
                .collect()
        };
        Ok((to_table(sib)?, to_table(non)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub protocol: String,
    pub subset: String,
    pub step: usize,
    pub k: usize,
    /// `hits / support`; absent when `support` is 0.
    pub accuracy: Option<f64>,
    pub hits: usize,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub graph_hash: Option<String>,
    pub embedding: Option<EmbeddingMeta>,
    pub model_hash: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

impl EvalReport {
    pub fn new(rows: Vec<ReportRow>) -> Self {
        Self {
            rows,
            provenance: Provenance::default(),
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Accuracy of the row matching (subset, step, k).
    pub fn accuracy(&self, subset: &str, step: usize, k: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.subset == subset && r.step == step && r.k == k)
            .and_then(|r| r.accuracy)
    }

    /// `protocol,subset,step,k,accuracy,support` with 4-decimal accuracies.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("protocol,subset,step,k,accuracy,support\n");
        for r in &self.rows {
            let acc = r.accuracy.map(|a| format!("{a:.4}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.protocol, r.subset, r.step, r.k, acc, r.support
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// For each query, the 0-based rank of its first correct concept (None when absent).
fn first_hits(
    ctx: &EvalContext<'_>,
    queries: &[&LabeledQuery],
    candidates: &CandidateSet,
    step: usize,
) -> Result<Vec<Option<usize>>> {
    queries
        .par_iter()
        .map(|q| {
            let prediction = rank(&q.id, &q.vector, ctx.table, candidates)?;
            let correct = ctx.correct_set(q.label, step)?;
            Ok(prediction
                .ranking
                .iter()
                .position(|(c, _)| correct.contains(c)))
        })
        .collect()
}

fn rows_for(
    protocol: &str,
    subset: &str,
    step: usize,
    ks: &[usize],
    positions: &[Option<usize>],
) -> Vec<ReportRow> {
    ks.iter()
        .map(|&k| {
            let hits = positions
                .iter()
                .filter(|p| matches!(p, Some(i) if *i < k))
                .count();
            let support = positions.len();
            ReportRow {
                protocol: protocol.to_string(),
                subset: subset.to_string(),
                step,
                k,
                accuracy: (support > 0).then(|| hits as f64 / support as f64),
                hits,
                support,
            }
        })
        .collect()
}

/// Rows for closed-set evaluation at one subsumer step. Step 0 is the standard protocol.
pub fn tame_rows_at_step(
    ctx: &EvalContext<'_>,
    queries: &[LabeledQuery],
    descriptor: &str,
    base: &[ConceptId],
    step: usize,
    settings: &ProtocolSettings,
) -> Result<Vec<ReportRow>> {
    let candidates = ctx.candidates(
        descriptor,
        base,
        step,
        settings.inject_subsumers_into_candidates,
    )?;
    let refs: Vec<&LabeledQuery> = queries.iter().collect();
    let positions = first_hits(ctx, &refs, &candidates, step)?;
    Ok(rows_for(
        descriptor,
        SUBSET_ALL,
        step,
        &settings.ks,
        &positions,
    ))
}

pub trait Protocol: Send + Sync {
    fn name(&self) -> &'static str;

    /// Row label identifying the protocol and the settings that change its meaning.
    fn descriptor(&self, _settings: &ProtocolSettings) -> String {
        self.name().to_string()
    }

    fn evaluate(
        &self,
        ctx: &EvalContext<'_>,
        queries: &[LabeledQuery],
        settings: &ProtocolSettings,
    ) -> Result<Vec<ReportRow>>;
}

/// Closed-set Hit@k: correct-set is the ground truth alone.
#[derive(Debug, Default, Clone, Copy)]
pub struct StandardProtocol;

impl Protocol for StandardProtocol {
    fn name(&self) -> &'static str {
        STANDARD
    }

    fn evaluate(
        &self,
        ctx: &EvalContext<'_>,
        queries: &[LabeledQuery],
        settings: &ProtocolSettings,
    ) -> Result<Vec<ReportRow>> {
        let base = ctx.training_base();
        let members: BTreeSet<ConceptId> = base.iter().copied().collect();
        if let Some(q) = queries.iter().find(|q| !members.contains(&q.label)) {
            return Err(Error::Protocol(format!(
                "ground truth `{}` of item `{}` is not a candidate",
                ctx.table.label(q.label),
                q.id
            )));
        }
        let plain = ProtocolSettings {
            inject_subsumers_into_candidates: false,
            ..settings.clone()
        };
        tame_rows_at_step(ctx, queries, &self.descriptor(settings), &base, 0, &plain)
    }
}

/// Taxonomy-aware measure: predicting a subsumer of the ground truth within
/// `s` steps counts as correct. One block of rows per step `1..=max_step`.
#[derive(Debug, Default, Clone, Copy)]
pub struct TameProtocol;

impl Protocol for TameProtocol {
    fn name(&self) -> &'static str {
        TAME
    }

    fn descriptor(&self, settings: &ProtocolSettings) -> String {
        if settings.inject_subsumers_into_candidates {
            format!("{TAME}+inject")
        } else {
            TAME.to_string()
        }
    }

    fn evaluate(
        &self,
        ctx: &EvalContext<'_>,
        queries: &[LabeledQuery],
        settings: &ProtocolSettings,
    ) -> Result<Vec<ReportRow>> {
        let base = ctx.training_base();
        let descriptor = self.descriptor(settings);
        let mut rows = Vec::new();
        for step in 1..=settings.max_step {
            rows.extend(tame_rows_at_step(
                ctx,
                queries,
                &descriptor,
                &base,
                step,
                settings,
            )?);
        }
        Ok(rows)
    }
}

fn zero_shot_rows(
    ctx: &EvalContext<'_>,
    queries: &[LabeledQuery],
    descriptor: &str,
    steps: &[usize],
    settings: &ProtocolSettings,
) -> Result<Vec<ReportRow>> {
    if ctx.zero_shot.is_empty() {
        return Err(Error::Protocol("no zero-shot classes given".into()));
    }
    if let Some(q) = queries.iter().find(|q| !ctx.zero_shot.contains(&q.label)) {
        return Err(Error::Protocol(format!(
            "item `{}` is labelled `{}`, which is not a zero-shot class",
            q.id,
            ctx.table.label(q.label)
        )));
    }
    let (sibling, _) = ctx.sibling_split(settings.share_depth)?;
    let (sib_q, non_q): (Vec<&LabeledQuery>, Vec<&LabeledQuery>) =
        queries.iter().partition(|q| sibling.contains(&q.label));
    let base = ctx.zero_shot_base(settings.variant);

    let mut rows = Vec::new();
    for (subset, group) in [(SUBSET_SIBLING, &sib_q), (SUBSET_NON_SIBLING, &non_q)] {
        for &step in steps {
            let candidates = ctx.candidates(
                descriptor,
                &base,
                step,
                settings.inject_subsumers_into_candidates,
            )?;
            let positions = first_hits(ctx, group, &candidates, step)?;
            rows.extend(rows_for(descriptor, subset, step, &settings.ks, &positions));
        }
    }
    Ok(rows)
}

/// Zero-shot Hit@k, reported separately for sibling and non-sibling classes.
#[derive(Debug, Default, Clone, Copy)]
pub struct ZeroShotProtocol;

impl Protocol for ZeroShotProtocol {
    fn name(&self) -> &'static str {
        ZERO_SHOT
    }

    fn descriptor(&self, settings: &ProtocolSettings) -> String {
        format!("{ZERO_SHOT}:{}", settings.variant.tag())
    }

    fn evaluate(
        &self,
        ctx: &EvalContext<'_>,
        queries: &[LabeledQuery],
        settings: &ProtocolSettings,
    ) -> Result<Vec<ReportRow>> {
        zero_shot_rows(ctx, queries, &self.descriptor(settings), &[0], settings)
    }
}

/// Zero-shot split combined with TAME correct-sets (and, by default, subsumer-augmented candidates).
#[derive(Debug, Default, Clone, Copy)]
pub struct ZeroShotTameProtocol;

impl Protocol for ZeroShotTameProtocol {
    fn name(&self) -> &'static str {
        ZERO_SHOT_TAME
    }

    fn descriptor(&self, settings: &ProtocolSettings) -> String {
        let inject = if settings.inject_subsumers_into_candidates {
            "+inject"
        } else {
            ""
        };
        format!("{ZERO_SHOT_TAME}{inject}:{}", settings.variant.tag())
    }

    fn evaluate(
        &self,
        ctx: &EvalContext<'_>,
        queries: &[LabeledQuery],
        settings: &ProtocolSettings,
    ) -> Result<Vec<ReportRow>> {
        let steps: Vec<usize> = (1..=settings.max_step).collect();
        zero_shot_rows(ctx, queries, &self.descriptor(settings), &steps, settings)
    }
}

#[derive(Clone)]
pub struct ProtocolRegistry {
    protocols: BTreeMap<&'static str, Arc<dyn Protocol>>,
}

impl ProtocolRegistry {
    pub fn empty() -> Self {
        Self {
            protocols: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, protocol: Arc<dyn Protocol>) {
        self.protocols.insert(protocol.name(), protocol);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Protocol>> {
        self.protocols
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "evaluation protocol",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.protocols.keys().copied().collect()
    }

    pub fn run(
        &self,
        name: &str,
        ctx: &EvalContext<'_>,
        queries: &[LabeledQuery],
        settings: &ProtocolSettings,
    ) -> Result<EvalReport> {
        settings.validate()?;
        let protocol = self.get(name)?;
        Ok(EvalReport::new(protocol.evaluate(ctx, queries, settings)?))
    }
}

impl Default for ProtocolRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(StandardProtocol));
        r.register(Arc::new(TameProtocol));
        r.register(Arc::new(ZeroShotProtocol));
        r.register(Arc::new(ZeroShotTameProtocol));
        r
    }
}

pub fn eval_standard(
    ctx: &EvalContext<'_>,
    queries: &[LabeledQuery],
    ks: &[usize],
) -> Result<EvalReport> {
    let settings = ProtocolSettings {
        ks: ks.to_vec(),
        ..ProtocolSettings::default()
    };
    ProtocolRegistry::default().run(STANDARD, ctx, queries, &settings)
}

pub fn eval_tame(
    ctx: &EvalContext<'_>,
    queries: &[LabeledQuery],
    max_step: usize,
    ks: &[usize],
    inject: bool,
) -> Result<EvalReport> {
    let settings = ProtocolSettings {
        ks: ks.to_vec(),
        max_step,
        inject_subsumers_into_candidates: inject,
        ..ProtocolSettings::default()
    };
    ProtocolRegistry::default().run(TAME, ctx, queries, &settings)
}

pub fn eval_zero_shot(
    ctx: &EvalContext<'_>,
    queries: &[LabeledQuery],
    variant: ZeroShotVariant,
    share_depth: usize,
    ks: &[usize],
) -> Result<EvalReport> {
    let settings = ProtocolSettings {
        ks: ks.to_vec(),
        variant,
        share_depth,
        inject_subsumers_into_candidates: false,
        ..ProtocolSettings::default()
    };
    ProtocolRegistry::default().run(ZERO_SHOT, ctx, queries, &settings)
}

pub fn eval_zero_shot_tame(
    ctx: &EvalContext<'_>,
    queries: &[LabeledQuery],
    variant: ZeroShotVariant,
    share_depth: usize,
    max_step: usize,
    ks: &[usize],
    inject: bool,
) -> Result<EvalReport> {
    let settings = ProtocolSettings {
        ks: ks.to_vec(),
        max_step,
        variant,
        share_depth,
        inject_subsumers_into_candidates: inject,
    };
    ProtocolRegistry::default().run(ZERO_SHOT_TAME, ctx, queries, &settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{embed_graph, EnrichmentConfig};

    const FIG6: &str = "barrel\tisa\tvessel\n\
        vessel\tisa\tcontainer\n\
        backpack\tisa\tbag\n\
        bag\tisa\tcontainer\n\
        container\tisa\tinstrumentality\n\
        lion\tisa\tfeline\n\
        feline\tisa\tanimal\n\
        tiger\tisa\tfeline\n";

    fn setup() -> (ConceptGraph, EmbeddingTable) {
        let g = ConceptGraph::parse_edge_list(FIG6).unwrap();
        let t = embed_graph(&g, &EnrichmentConfig::with_alpha(0.3), 6).unwrap();
        (g, t)
    }

    fn query_at(t: &EmbeddingTable, id: &str, label: &str, at: &str) -> LabeledQuery {
        LabeledQuery {
            id: id.into(),
            vector: t.vector_by_label(at).unwrap().to_vec(),
            label: t.id(label).unwrap(),
        }
    }

    #[test]
    fn perfect_queries_score_one() {
        let (g, t) = setup();
        let ctx = EvalContext::new(&g, &t)
            .with_training(&["barrel", "backpack", "lion"])
            .unwrap();
        let qs = vec![
            query_at(&t, "q1", "barrel", "barrel"),
            query_at(&t, "q2", "lion", "lion"),
        ];
        let r = eval_standard(&ctx, &qs, &[1, 2]).unwrap();
        assert!(r.rows.iter().all(|row| row.accuracy == Some(1.0)));
        assert_eq!(r.rows.len(), 2);
    }

    #[test]
    fn standard_requires_closed_set() {
        let (g, t) = setup();
        let ctx = EvalContext::new(&g, &t).with_training(&["barrel"]).unwrap();
        let qs = vec![query_at(&t, "q", "lion", "lion")];
        assert!(matches!(
            eval_standard(&ctx, &qs, &[1]),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn barrel_predicted_as_vessel_is_tame_correct() {
        let (g, t) = setup();
        let training = ["barrel", "backpack", "lion", "tiger"];
        let ctx = EvalContext::new(&g, &t).with_training(&training).unwrap();
        // query sits on vessel's vector; vessel is injected at step >= 1
        let qs = vec![query_at(&t, "q", "barrel", "vessel")];
        let tame = eval_tame(&ctx, &qs, 2, &[1], true).unwrap();
        assert_eq!(tame.accuracy(SUBSET_ALL, 1, 1), Some(1.0));
        assert_eq!(tame.accuracy(SUBSET_ALL, 2, 1), Some(1.0));
        // standard protocol over the same injected candidates: vessel is wrong
        let base: Vec<ConceptId> = ["barrel", "backpack", "lion", "tiger", "vessel"]
            .iter()
            .map(|l| t.id(l).unwrap())
            .collect();
        let fixed = EvalContext::new(&g, &t)
            .with_training(&training)
            .unwrap()
            .with_base_candidates(base);
        let std_rows = tame_rows_at_step(
            &fixed,
            &qs,
            "standard",
            &fixed.training_base(),
            0,
            &ProtocolSettings {
                ks: vec![1],
                inject_subsumers_into_candidates: false,
                ..ProtocolSettings::default()
            },
        )
        .unwrap();
        assert_eq!(std_rows[0].accuracy, Some(0.0));
    }

    #[test]
    fn missing_subsumer_vector_is_a_lookup_error_when_injecting() {
        let g = ConceptGraph::parse_edge_list("a\tisa\tp\nb\tisa\tp\nc\tisa\tq\n").unwrap();
        // table covers only the leaves
        let full = embed_graph(&g, &EnrichmentConfig::with_alpha(0.3), 3).unwrap();
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let data = labels
            .iter()
            .flat_map(|l| full.vector_by_label(l).unwrap().to_vec())
            .collect();
        let mut meta = full.meta().clone();
        meta.renormalized = false;
        let t = EmbeddingTable::new(labels, 3, data, meta).unwrap();
        let ctx = EvalContext::new(&g, &t)
            .with_training(&["a", "b", "c"])
            .unwrap();
        let qs = vec![LabeledQuery {
            id: "q".into(),
            vector: t.vector_by_label("a").unwrap().to_vec(),
            label: t.id("a").unwrap(),
        }];
        match eval_tame(&ctx, &qs, 1, &[1], true) {
            Err(Error::UnknownLabel(l)) => assert!(l == "p" || l == "q"),
            other => panic!("expected lookup error, got {other:?}"),
        }
        // without injection the missing vectors are simply never predicted
        assert_eq!(
            eval_tame(&ctx, &qs, 1, &[1], false)
                .unwrap()
                .accuracy(SUBSET_ALL, 1, 1),
            Some(1.0)
        );
    }

    #[test]
    fn zero_shot_rows_and_support() {
        let (g, t) = setup();
        let ctx = EvalContext::new(&g, &t)
            .with_training(&["barrel", "lion"])
            .unwrap()
            .with_zero_shot(&["backpack", "tiger"])
            .unwrap();
        let qs = vec![
            query_at(&t, "z1", "backpack", "backpack"),
            query_at(&t, "z2", "tiger", "tiger"),
            query_at(&t, "z3", "tiger", "lion"),
        ];
        let r = eval_zero_shot(&ctx, &qs, ZeroShotVariant::ZeroShotOnly, 2, &[1, 2]).unwrap();
        assert_eq!(r.rows.len(), 4);
        let support: usize = r
            .rows
            .iter()
            .filter(|row| row.k == 1)
            .map(|row| row.support)
            .sum();
        assert_eq!(support, 3);
        // with training classes as candidates, z3 now hits lion instead of tiger
        let r = eval_zero_shot(&ctx, &qs, ZeroShotVariant::ZeroShotPlusTraining, 2, &[1]).unwrap();
        let hits: usize = r.rows.iter().map(|row| row.hits).sum();
        assert_eq!(hits, 2);
    }

    #[test]
    fn empty_subset_is_reported_without_accuracy() {
        let (g, t) = setup();
        let ctx = EvalContext::new(&g, &t)
            .with_training(&["barrel"])
            .unwrap()
            .with_zero_shot(&["backpack"])
            .unwrap();
        let qs = vec![query_at(&t, "z", "backpack", "backpack")];
        let r = eval_zero_shot(&ctx, &qs, ZeroShotVariant::ZeroShotOnly, 2, &[1]).unwrap();
        let non = r
            .rows
            .iter()
            .find(|row| row.subset == SUBSET_NON_SIBLING)
            .unwrap();
        assert_eq!(non.support, 0);
        assert_eq!(non.accuracy, None);
        // singleton candidate set forces the right answer
        assert_eq!(r.accuracy(SUBSET_SIBLING, 0, 1), Some(1.0));
        assert!(r.to_csv().contains("non-sibling,0,1,,0\n"));
    }

    #[test]
    fn zero_shot_queries_must_be_zero_shot_classes() {
        let (g, t) = setup();
        let ctx = EvalContext::new(&g, &t)
            .with_training(&["barrel"])
            .unwrap()
            .with_zero_shot(&["backpack"])
            .unwrap();
        let qs = vec![query_at(&t, "z", "barrel", "barrel")];
        assert!(eval_zero_shot(&ctx, &qs, ZeroShotVariant::ZeroShotOnly, 2, &[1]).is_err());
    }

    #[test]
    fn settings_validation() {
        let bad = ProtocolSettings {
            ks: vec![5, 1],
            ..ProtocolSettings::default()
        };
        assert!(bad.validate().is_err());
        let bad = ProtocolSettings {
            ks: vec![0],
            ..ProtocolSettings::default()
        };
        assert!(bad.validate().is_err());
        assert!(ProtocolRegistry::default().get("margin-rank").is_err());
        assert_eq!(
            ProtocolRegistry::default().names(),
            vec![STANDARD, TAME, ZERO_SHOT, ZERO_SHOT_TAME]
        );
    }

    #[test]
    fn csv_uses_four_decimals() {
        let r = EvalReport::new(vec![ReportRow {
            protocol: "standard".into(),
            subset: "all".into(),
            step: 0,
            k: 5,
            accuracy: Some(2.0 / 3.0),
            hits: 2,
            support: 3,
        }]);
        assert_eq!(
            r.to_csv(),
            "protocol,subset,step,k,accuracy,support\nstandard,all,0,5,0.6667,3\n"
        );
    }
}
