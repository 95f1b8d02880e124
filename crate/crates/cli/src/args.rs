use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::config::Overlay;

#[derive(Debug, Parser)]
#[command(
    name = "taxembed",
    version,
    about = "Taxonomy-aware concept embeddings and evaluation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice the command makes
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap; results do not depend on it
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory, created if missing
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// JSON file layered between the defaults and explicit flags
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// error, warn, info, debug or trace
    #[arg(long, global = true, value_name = "LEVEL")]
    pub log_level: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Concept vectors from an edge-list graph
    Embed(EmbedArgs),
    /// Fit a linear projection from features to concept vectors
    Train(TrainArgs),
    /// Rank candidate concepts for each query item
    Classify(ClassifyArgs),
    /// Hit@k report under a named protocol
    Eval(EvalArgs),
    /// Write a seeded synthetic taxonomy and feature sets
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Edge list: child, relation, parent per tab-separated line
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Enrichment solver: direct or series
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub series_terms: Option<usize>,
    #[arg(long)]
    pub series_tolerance: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labelled feature file (.json header or .tsv)
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub init_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Query feature file
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Candidate labels, one per line (default: every concept)
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Labelled query features
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// standard, tame, zeroshot or zeroshot-tame
    #[arg(long)]
    pub protocol: Option<String>,
    /// manifest.json from `synth`, supplying both class lists
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Training class labels, one per line
    #[arg(long)]
    pub training: Option<PathBuf>,
    /// Zero-shot class labels, one per line
    #[arg(long)]
    pub zero_shot: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long)]
    pub max_step: Option<usize>,
    /// zeroshot-only or zeroshot+train
    #[arg(long)]
    pub variant: Option<String>,
    /// Add subsumers of the base candidates to the candidate set
    #[arg(long)]
    pub inject: Option<bool>,
    #[arg(long)]
    pub share_depth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Children per level, root outward, e.g. 3,3,3
    #[arg(long, value_delimiter = ',')]
    pub branching: Option<Vec<usize>>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub items_per_class: Option<usize>,
    #[arg(long)]
    pub within_class_noise: Option<f64>,
    #[arg(long)]
    pub level_drift: Option<f64>,
    #[arg(long)]
    pub parent_confusion: Option<f64>,
    #[arg(long)]
    pub zero_shot_fraction: Option<f64>,
    #[arg(long)]
    pub cross_links: Option<usize>,
}

impl GlobalArgs {
    pub fn overlay(&self) -> Overlay {
        let mut o = Overlay::default();
        o.global("seed", self.seed)
            .global("threads", self.threads)
            .global("out_dir", self.out_dir.clone())
            .global("log_level", self.log_level.clone());
        o
    }
}

impl EmbedArgs {
    pub fn flags(&self, global: &GlobalArgs) -> Value {
        let mut o = global.overlay();
        o.param("graph", self.graph.clone())
            .param("alpha", self.alpha)
            .param("method", self.method.clone())
            .param("series_terms", self.series_terms)
            .param("series_tolerance", self.series_tolerance)
            .param("dim", self.dim);
        o.into_value()
    }
}

impl TrainArgs {
    pub fn flags(&self, global: &GlobalArgs) -> Value {
        let mut o = global.overlay();
        o.param("features", self.features.clone())
            .param("embeddings", self.embeddings.clone())
            .param("training.learning_rate", self.learning_rate)
            .param("training.epochs", self.epochs)
            .param("training.batch_size", self.batch_size)
            .param("training.init_scale", self.init_scale);
        o.into_value()
    }
}

impl ClassifyArgs {
    pub fn flags(&self, global: &GlobalArgs) -> Value {
        let mut o = global.overlay();
        o.param("model", self.model.clone())
            .param("embeddings", self.embeddings.clone())
            .param("queries", self.queries.clone())
            .param("candidates", self.candidates.clone())
            .param("k", self.k);
        o.into_value()
    }
}

impl EvalArgs {
    pub fn flags(&self, global: &GlobalArgs) -> Value {
        let mut o = global.overlay();
        o.param("graph", self.graph.clone())
            .param("embeddings", self.embeddings.clone())
            .param("model", self.model.clone())
            .param("features", self.features.clone())
            .param("protocol", self.protocol.clone())
            .param("manifest", self.manifest.clone())
            .param("training", self.training.clone())
            .param("zero_shot", self.zero_shot.clone())
            .param("ks", self.ks.clone())
            .param("max_step", self.max_step)
            .param("variant", self.variant.clone())
            .param("inject", self.inject)
            .param("share_depth", self.share_depth);
        o.into_value()
    }
}

impl SynthArgs {
    pub fn flags(&self, global: &GlobalArgs) -> Value {
        let mut o = global.overlay();
        o.param("branching", self.branching.clone())
            .param("feature_dim", self.feature_dim)
            .param("items_per_class", self.items_per_class)
            .param("within_class_noise", self.within_class_noise)
            .param("level_drift", self.level_drift)
            .param("parent_confusion", self.parent_confusion)
            .param("zero_shot_fraction", self.zero_shot_fraction)
            .param("cross_links", self.cross_links);
        o.into_value()
    }
}
