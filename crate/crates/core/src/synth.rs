//! Seeded synthetic taxonomies and class-conditional Gaussian feature clouds.
//!
//! Class means drift down the tree (each child's mean is its parent's plus
//! Gaussian noise), so distance in feature space follows distance in the taxonomy.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::project::{FeatureItem, FeatureSet};
use crate::taxonomy::{ConceptGraph, ConceptId, EdgeKind, GraphBuilder};

pub const ROOT_LABEL: &str = "root";
pub const CROSS_LINK_TAG: &str = "related";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Children per node at each level, root outward.
    pub branching: Vec<usize>,
    pub feature_dim: usize,
    pub items_per_class: usize,
    pub within_class_noise: f64,
    pub level_drift: f64,
    pub parent_confusion: f64,
    pub seed: u64,
    pub zero_shot_fraction: f64,
    /// Seeded non-is-a links between leaves in different top-level subtrees.
    pub cross_links: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            branching: vec![3, 3, 3],
            feature_dim: 16,
            items_per_class: 20,
            within_class_noise: 0.1,
            level_drift: 1.0,
            parent_confusion: 0.0,
            seed: 42,
            zero_shot_fraction: 7.0 / 27.0,
            cross_links: 4,
        }
    }
}

impl SynthSpec {
    pub fn leaf_count(&self) -> usize {
        self.branching.iter().product()
    }

    /// Number of leaves withheld as zero-shot classes: rounded, kept in `1..leaves`.
    pub fn zero_shot_count(&self) -> usize {
        let leaves = self.leaf_count();
        ((self.zero_shot_fraction * leaves as f64).round() as usize).clamp(1, leaves - 1)
    }

    /// Test items per class that are resampled around the parent's mean.
    pub fn confused_per_class(&self) -> usize {
        (self.parent_confusion * self.items_per_class as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.branching.is_empty() || self.branching.contains(&0) {
            return Err(Error::InvalidConfig(
                "branching factors must be positive".into(),
            ));
        }
        if self.leaf_count() < 2 {
            return Err(Error::InvalidConfig("need at least 2 leaf classes".into()));
        }
        if self.feature_dim == 0 || self.items_per_class == 0 {
            return Err(Error::InvalidConfig(
                "feature_dim and items_per_class must be positive".into(),
            ));
        }
        if [self.within_class_noise, self.level_drift]
            .iter()
            .any(|v| v.is_nan() || *v <= 0.0)
        {
            return Err(Error::InvalidConfig("noise scales must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.parent_confusion) {
            return Err(Error::InvalidConfig(
                "parent_confusion must lie in [0, 1)".into(),
            ));
        }
        if !(self.zero_shot_fraction > 0.0 && self.zero_shot_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "zero_shot_fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

fn child_label(parent: &str, index: usize) -> String {
    if parent == ROOT_LABEL {
        format!("n{index}")
    } else {
        format!("{parent}.{index}")
    }
}

fn top_subtree(label: &str) -> &str {
    label.split('.').next().unwrap_or(label)
}

/// Rooted is-a tree with the given branching profile, plus `cross_links` seeded
/// non-is-a edges between leaves of different top-level subtrees. Leaves are the
/// label classes.
///
/// A perfectly symmetric tree places the root at the centroid of every principal
/// axis that is not symmetric under subtree swaps, so low-dimensional PCA maps it
/// to zero. The cross-links break that symmetry without touching the is-a structure.
pub fn generate_taxonomy(spec: &SynthSpec) -> Result<ConceptGraph> {
    spec.validate()?;
    let mut builder = GraphBuilder::new();
    builder.add_concept(ROOT_LABEL)?;
    let mut level = vec![ROOT_LABEL.to_string()];
    for &fanout in &spec.branching {
        let mut next = Vec::with_capacity(level.len() * fanout);
        for parent in &level {
            for i in 0..fanout {
                let child = child_label(parent, i);
                builder.add_edge(&child, EdgeKind::IsA, parent)?;
                next.push(child);
            }
        }
        level = next;
    }

    let mut pairs: Vec<(usize, usize)> = (0..level.len())
        .flat_map(|a| (a + 1..level.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| top_subtree(&level[a]) != top_subtree(&level[b]))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    pairs.shuffle(&mut rng);
    let tag = EdgeKind::Other(CROSS_LINK_TAG.to_string());
    for &(a, b) in pairs.iter().take(spec.cross_links) {
        builder.add_edge(&level[a], tag.clone(), &level[b])?;
    }
    builder.build()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SynthSpec,
    pub training_classes: Vec<String>,
    pub zero_shot_classes: Vec<String>,
    /// Test item ids resampled around their parent's mean.
    pub planted_confusions: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: FeatureSet,
    pub test: FeatureSet,
    pub zero_shot: FeatureSet,
    pub manifest: SynthManifest,
    /// Class mean of every graph concept, indexed by concept id.
    pub means: Vec<Vec<f64>>,
}

fn gaussian(rng: &mut ChaCha8Rng, center: &[f64], sigma: f64) -> Vec<f64> {
    center
        .iter()
        .map(|c| {
            let z: f64 = StandardNormal.sample(rng);
            c + sigma * z
        })
        .collect()
}

/// Hierarchical class means: root at the origin, each child = parent + N(0, drift^2 I).
pub fn class_means(
    graph: &ConceptGraph,
    spec: &SynthSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let root = graph.id(ROOT_LABEL)?;
    let mut means = vec![Vec::new(); graph.len()];
    means[root.index()] = vec![0.0; spec.feature_dim];
    let mut frontier = vec![root];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &p in &frontier {
            for &c in graph.isa_children(p) {
                let m = gaussian(rng, &means[p.index()], spec.level_drift);
                means[c.index()] = m;
                next.push(c);
            }
        }
        frontier = next;
    }
    Ok(means)
}

/// Samples train, test and zero-shot items for a graph built by [`generate_taxonomy`].
pub fn generate_features(spec: &SynthSpec, graph: &ConceptGraph) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means = class_means(graph, spec, &mut rng)?;

    let mut leaves = graph.isa_leaves();
    if leaves.len() != spec.leaf_count() {
        return Err(Error::Precondition(format!(
            "graph has {} leaves, spec expects {}",
            leaves.len(),
            spec.leaf_count()
        )));
    }
    leaves.shuffle(&mut rng);
    let zero_count = spec.zero_shot_count();
    let zero_shot: BTreeSet<ConceptId> = leaves[..zero_count].iter().copied().collect();
    let training: BTreeSet<ConceptId> = leaves[zero_count..].iter().copied().collect();

    let sample =
        |rng: &mut ChaCha8Rng, prefix: &str, class: ConceptId, i: usize, center: &[f64]| {
            FeatureItem {
                id: format!("{prefix}-{}-{i}", graph.label(class)),
                label: Some(graph.label(class).to_string()),
                values: gaussian(rng, center, spec.within_class_noise),
            }
        };

    let mut train = Vec::new();
    for &c in &training {
        for i in 0..spec.items_per_class {
            train.push(sample(&mut rng, "train", c, i, &means[c.index()]));
        }
    }

    let confused = spec.confused_per_class();
    let mut test = Vec::new();
    let mut planted = Vec::new();
    for &c in &training {
        let parent = graph.isa_parents(c)[0];
        let mut slots: Vec<usize> = (0..spec.items_per_class).collect();
        slots.shuffle(&mut rng);
        let chosen: BTreeSet<usize> = slots[..confused].iter().copied().collect();
        for i in 0..spec.items_per_class {
            let center = if chosen.contains(&i) {
                &means[parent.index()]
            } else {
                &means[c.index()]
            };
            let item = sample(&mut rng, "test", c, i, center);
            if chosen.contains(&i) {
                planted.push(item.id.clone());
            }
            test.push(item);
        }
    }

    let mut zs = Vec::new();
    for &c in &zero_shot {
        for i in 0..spec.items_per_class {
            zs.push(sample(&mut rng, "zs", c, i, &means[c.index()]));
        }
    }

    let labels = |s: &BTreeSet<ConceptId>| s.iter().map(|&c| graph.label(c).to_string()).collect();
    Ok(SynthData {
        train: FeatureSet::new(spec.feature_dim, train)?,
        test: FeatureSet::new(spec.feature_dim, test)?,
        zero_shot: FeatureSet::new(spec.feature_dim, zs)?,
        manifest: SynthManifest {
            spec: spec.clone(),
            training_classes: labels(&training),
            zero_shot_classes: labels(&zero_shot),
            planted_confusions: planted,
        },
        means,
    })
}

/// Items per class label, in label order.
pub fn class_counts(features: &FeatureSet) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for item in features.items() {
        if let Some(l) = &item.label {
            *out.entry(l.clone()).or_insert(0) += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(branching: &[usize]) -> SynthSpec {
        SynthSpec {
            branching: branching.to_vec(),
            ..SynthSpec::default()
        }
    }

    #[test]
    fn three_level_ternary_tree() {
        let g = generate_taxonomy(&spec(&[3, 3, 3])).unwrap();
        assert_eq!(g.isa_leaves().len(), 27);
        assert_eq!(g.len() - 27, 13);
        assert_eq!(g.edges().iter().filter(|e| e.kind.is_isa()).count(), 39);
        assert_eq!(g.edges().len(), 39 + 4);
    }

    #[test]
    fn binary_root() {
        let g = generate_taxonomy(&SynthSpec {
            cross_links: 0,
            ..spec(&[2])
        })
        .unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.len(), 3);
        assert_eq!(g.isa_children(g.id(ROOT_LABEL).unwrap()).len(), 2);
    }

    #[test]
    fn taxonomy_is_deterministic() {
        let a = generate_taxonomy(&spec(&[2, 4])).unwrap();
        let b = generate_taxonomy(&spec(&[2, 4])).unwrap();
        assert_eq!(a.to_edge_list(), b.to_edge_list());
        let c = generate_taxonomy(&SynthSpec {
            seed: 7,
            ..spec(&[2, 4])
        })
        .unwrap();
        assert_ne!(a.to_edge_list(), c.to_edge_list());
    }

    #[test]
    fn cross_links_join_different_subtrees() {
        let g = generate_taxonomy(&spec(&[3, 3, 3])).unwrap();
        for e in g.edges().iter().filter(|e| !e.kind.is_isa()) {
            let (a, b) = (g.label(e.source), g.label(e.target));
            assert_ne!(top_subtree(a), top_subtree(b));
            assert!(g.isa_children(e.source).is_empty() && g.isa_children(e.target).is_empty());
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_taxonomy(&spec(&[1])).is_err());
        assert!(generate_taxonomy(&spec(&[])).is_err());
        let mut s = spec(&[3]);
        s.parent_confusion = 1.0;
        assert!(s.validate().is_err());
        s.parent_confusion = 0.0;
        s.zero_shot_fraction = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn noiseless_items_equal_class_means() {
        let s = SynthSpec {
            within_class_noise: 1e-300,
            items_per_class: 4,
            ..spec(&[2, 3])
        };
        let g = generate_taxonomy(&s).unwrap();
        let data = generate_features(&s, &g).unwrap();
        for set in [&data.train, &data.test, &data.zero_shot] {
            for item in set.items() {
                let c = g.id(item.label.as_deref().unwrap()).unwrap();
                assert_eq!(item.values, data.means[c.index()]);
            }
        }
    }

    #[test]
    fn planted_confusions_have_exact_counts() {
        let s = SynthSpec {
            parent_confusion: 0.2,
            items_per_class: 100,
            ..spec(&[3, 3])
        };
        let g = generate_taxonomy(&s).unwrap();
        let data = generate_features(&s, &g).unwrap();
        let n_train = data.manifest.training_classes.len();
        assert_eq!(data.manifest.planted_confusions.len(), 20 * n_train);
        let mut per_class = BTreeMap::new();
        for id in &data.manifest.planted_confusions {
            let item = data.test.items().iter().find(|i| &i.id == id).unwrap();
            *per_class.entry(item.label.clone().unwrap()).or_insert(0) += 1;
        }
        assert!(per_class.values().all(|&n| n == 20));
    }

    #[test]
    fn split_is_disjoint_and_sized() {
        let s = spec(&[3, 3, 3]);
        let g = generate_taxonomy(&s).unwrap();
        let data = generate_features(&s, &g).unwrap();
        assert_eq!(data.manifest.zero_shot_classes.len(), 7);
        assert_eq!(data.manifest.training_classes.len(), 20);
        let zs: BTreeSet<_> = data.manifest.zero_shot_classes.iter().collect();
        assert!(data
            .train
            .items()
            .iter()
            .all(|i| !zs.contains(i.label.as_ref().unwrap())));
        assert_eq!(class_counts(&data.zero_shot).len(), 7);
        assert_eq!(class_counts(&data.train).len(), 20);
    }
}
