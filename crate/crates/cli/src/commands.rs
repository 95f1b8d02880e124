use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use taxembed_core::classify::{rank, CandidateSet, RankedPrediction};
use taxembed_core::embed::embed_graph;
use taxembed_core::evaluate::{
    project_queries, EvalContext, EvalReport, ProtocolRegistry, Provenance, ZERO_SHOT,
    ZERO_SHOT_TAME,
};
use taxembed_core::io;
use taxembed_core::project::{embed_items, train};
use taxembed_core::synth::{generate_features, generate_taxonomy, SynthManifest, SynthSpec};
use taxembed_core::taxonomy::ConceptGraph;

use crate::config::{
    ClassifyParams, EmbedParams, EvalParams, Params, RunConfig, TrainParams, RUN_FILE,
};
use crate::CliError;

pub const EMBEDDINGS_FILE: &str = "embeddings.json";
pub const MODEL_FILE: &str = "model.json";
pub const LOSS_FILE: &str = "loss.csv";
pub const RANKED_FILE: &str = "ranked.tsv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const GRAPH_FILE: &str = "graph.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAIN_FEATURES: &str = "train.json";
pub const TEST_FEATURES: &str = "test.json";
pub const ZERO_SHOT_FEATURES: &str = "zeroshot.json";
pub const TRAINING_CLASSES: &str = "training_classes.txt";
pub const ZERO_SHOT_CLASSES: &str = "zero_shot_classes.txt";

/// Files a command wrote, in write order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

impl Written {
    fn push(&mut self, p: PathBuf) {
        info!("wrote {}", p.display());
        self.files.push(p);
    }

    /// Adds a header path together with its binary sidecar.
    fn push_pair(&mut self, header: PathBuf) {
        let (_, bin) = io::sidecar_paths(&header);
        self.push(header);
        self.push(bin);
    }
}

fn write_run_json<P: Params>(config: &RunConfig<P>, out: &mut Written) -> Result<(), CliError> {
    let path = config.out(RUN_FILE);
    io::write_text(&path, &config.to_json())?;
    out.push(path);
    Ok(())
}

pub fn cmd_embed(config: &RunConfig<EmbedParams>) -> Result<Written, CliError> {
    let p = &config.params;
    let mut out = Written::default();
    write_run_json(config, &mut out)?;
    let graph = ConceptGraph::load(p.graph()?)?;
    info!(
        "loaded {} concepts, {} edges",
        graph.len(),
        graph.edges().len()
    );
    let table = embed_graph(&graph, &p.enrichment(), p.dim)?;
    out.push_pair(io::write_embeddings(&table, &config.out(EMBEDDINGS_FILE))?);
    Ok(out)
}

pub fn cmd_train(config: &RunConfig<TrainParams>) -> Result<Written, CliError> {
    let p = &config.params;
    let mut out = Written::default();
    write_run_json(config, &mut out)?;
    let features = io::read_features(p.features()?)?;
    let table = io::read_embeddings(p.embeddings()?)?;
    let trained = train(&features, &table, &p.training)?;
    info!(
        "loss {} -> {}",
        trained.loss_trajectory[0],
        trained.loss_trajectory.last().copied().unwrap_or(f64::NAN)
    );
    let header = serde_json::to_value(&p.training).expect("training config serializes");
    out.push_pair(io::write_model(
        &trained.model,
        header,
        &config.out(MODEL_FILE),
    )?);

    let mut csv = String::from("epoch,loss\n");
    for (epoch, loss) in trained.loss_trajectory.iter().enumerate() {
        csv.push_str(&format!("{epoch},{loss}\n"));
    }
    let loss_path = config.out(LOSS_FILE);
    io::write_text(&loss_path, &csv)?;
    out.push(loss_path);
    Ok(out)
}

pub fn cmd_classify(config: &RunConfig<ClassifyParams>) -> Result<Written, CliError> {
    let p = &config.params;
    let mut out = Written::default();
    write_run_json(config, &mut out)?;
    let model = io::read_model(p.model()?)?;
    let table = io::read_embeddings(p.embeddings()?)?;
    let queries = io::read_features(p.queries()?)?;
    let candidates = match &p.candidates {
        Some(path) => CandidateSet::from_labels("candidates", &io::read_label_list(path)?, &table)?,
        None => CandidateSet::from_labels("all", table.labels(), &table)?,
    };
    let store = embed_items(&model, &queries)?;
    let predictions = store
        .entries
        .par_iter()
        .map(|e| rank(&e.id, &e.vector, &table, &candidates))
        .collect::<Result<Vec<RankedPrediction>, _>>()?;
    let path = config.out(RANKED_FILE);
    io::write_text(&path, &io::ranked_to_tsv(&predictions, &table, p.k))?;
    out.push(path);
    Ok(out)
}

fn read_manifest(path: &Path) -> Result<SynthManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| taxembed_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Core(taxembed_core::Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    })
}

pub fn cmd_eval(config: &RunConfig<EvalParams>) -> Result<Written, CliError> {
    let p = &config.params;
    let mut out = Written::default();
    write_run_json(config, &mut out)?;
    let graph = ConceptGraph::load(p.graph()?)?;
    let table = io::read_embeddings(p.embeddings()?)?;
    let model = io::read_model(p.model()?)?;
    let features = io::read_features(p.features()?)?;

    let manifest = p.manifest.as_deref().map(read_manifest).transpose()?;
    let mut training = manifest.as_ref().map(|m| m.training_classes.clone());
    let mut zero_shot = manifest.as_ref().map(|m| m.zero_shot_classes.clone());
    if let Some(path) = &p.training {
        training = Some(io::read_label_list(path)?);
    }
    if let Some(path) = &p.zero_shot {
        zero_shot = Some(io::read_label_list(path)?);
    }
    let zero_shot_protocol = p.protocol == ZERO_SHOT || p.protocol == ZERO_SHOT_TAME;
    let training = match training {
        Some(t) => t,
        None if zero_shot_protocol => {
            return Err(CliError::Usage(format!(
                "protocol `{}` needs training classes (`--training` or `--manifest`)",
                p.protocol
            )))
        }
        // closed-set protocols fall back to the labels present in the queries
        None => features
            .items()
            .iter()
            .filter_map(|i| i.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let zero_shot = match zero_shot {
        Some(z) => z,
        None if zero_shot_protocol => {
            return Err(CliError::Usage(format!(
                "protocol `{}` needs zero-shot classes (`--zero-shot` or `--manifest`)",
                p.protocol
            )))
        }
        None => Vec::new(),
    };

    let ctx = EvalContext::new(&graph, &table)
        .with_training(&training)?
        .with_zero_shot(&zero_shot)?;
    let queries = project_queries(&model, &features, &table)?;
    let report = ProtocolRegistry::default()
        .run(&p.protocol, &ctx, &queries, &p.settings())?
        .with_provenance(Provenance {
            graph_hash: Some(graph.content_hash()),
            embedding: Some(table.meta().clone()),
            model_hash: Some(model.content_hash()),
            seed: Some(config.seed),
        });
    write_report(&report, config, &mut out)?;
    Ok(out)
}

fn write_report<P: Params>(
    report: &EvalReport,
    config: &RunConfig<P>,
    out: &mut Written,
) -> Result<(), CliError> {
    let json = config.out(REPORT_JSON);
    io::write_text(&json, &report.to_json()?)?;
    out.push(json);
    let csv = config.out(REPORT_CSV);
    io::write_text(&csv, &report.to_csv())?;
    out.push(csv);
    Ok(())
}

pub fn cmd_synth(config: &RunConfig<SynthSpec>) -> Result<Written, CliError> {
    let spec = &config.params;
    let mut out = Written::default();
    write_run_json(config, &mut out)?;
    let graph = generate_taxonomy(spec)?;
    let data = generate_features(spec, &graph)?;

    let graph_path = config.out(GRAPH_FILE);
    io::write_text(&graph_path, &graph.to_edge_list())?;
    out.push(graph_path);
    for (name, set) in [
        (TRAIN_FEATURES, &data.train),
        (TEST_FEATURES, &data.test),
        (ZERO_SHOT_FEATURES, &data.zero_shot),
    ] {
        out.push_pair(io::write_features(set, &config.out(name))?);
    }
    let manifest_path = config.out(MANIFEST_FILE);
    let mut text =
        serde_json::to_string_pretty(&data.manifest).map_err(taxembed_core::Error::from)?;
    text.push('\n');
    io::write_text(&manifest_path, &text)?;
    out.push(manifest_path);
    for (name, labels) in [
        (TRAINING_CLASSES, &data.manifest.training_classes),
        (ZERO_SHOT_CLASSES, &data.manifest.zero_shot_classes),
    ] {
        let path = config.out(name);
        io::write_text(&path, &(labels.join("\n") + "\n"))?;
        out.push(path);
    }
    Ok(out)
}
