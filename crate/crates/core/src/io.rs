//! On-disk formats.
//!
//! Embedding tables, feature sets and projection models share one layout: a
//! JSON header next to a sidecar of little-endian `f32` values in row-major
//! order. Text exports (TSV) print floats with 9 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::RankedPrediction;
use crate::embed::{EmbeddingMeta, EmbeddingTable};
use crate::error::{Error, Result};
use crate::project::{FeatureItem, FeatureSet, ProjectionModel};

pub const EMBEDDINGS_FORMAT: &str = "taxembed-embeddings";
pub const FEATURES_FORMAT: &str = "taxembed-features";
pub const MODEL_FORMAT: &str = "taxembed-model";
pub const DTYPE: &str = "f32le";

/// Formats like C's `%.{digits}g`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn encode_f32(values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    values
        .into_iter()
        .flat_map(|v| (v as f32).to_le_bytes())
        .collect()
}

fn decode_f32(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected * 4 {
        return Err(Error::format(
            path,
            format!("expected {} bytes, found {}", expected * 4, bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// `<stem>.json` and `<stem>.bin` for a header path or stem.
pub fn sidecar_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("bin"))
}

fn sidecar_name(bin: &Path) -> String {
    bin.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn resolve_sidecar(header: &Path, name: &str) -> PathBuf {
    header
        .parent()
        .map(|d| d.join(name))
        .unwrap_or_else(|| PathBuf::from(name))
}

fn check_format(path: &Path, found: &str, want: &str, dtype: &str) -> Result<()> {
    if found != want {
        return Err(Error::format(
            path,
            format!("expected format `{want}`, found `{found}`"),
        ));
    }
    if dtype != DTYPE {
        return Err(Error::format(path, format!("unsupported dtype `{dtype}`")));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingHeader {
    format: String,
    count: usize,
    dim: usize,
    labels: Vec<String>,
    meta: EmbeddingMeta,
    dtype: String,
    data_file: String,
}

pub fn write_embeddings(table: &EmbeddingTable, path: &Path) -> Result<PathBuf> {
    let (json, bin) = sidecar_paths(path);
    let header = EmbeddingHeader {
        format: EMBEDDINGS_FORMAT.into(),
        count: table.len(),
        dim: table.dim(),
        labels: table.labels().to_vec(),
        meta: table.meta().clone(),
        dtype: DTYPE.into(),
        data_file: sidecar_name(&bin),
    };
    write_file(&bin, &encode_f32(table.data().iter().copied()))?;
    let mut text = serde_json::to_string_pretty(&header)?;
    text.push('\n');
    write_file(&json, text.as_bytes())?;
    Ok(json)
}

/// Loads a table. Unit-norm tables are re-normalized in `f64` after the `f32` round trip.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let json = path.with_extension("json");
    let header: EmbeddingHeader = serde_json::from_str(&read_text(&json)?)
        .map_err(|e| Error::format(&json, e.to_string()))?;
    check_format(&json, &header.format, EMBEDDINGS_FORMAT, &header.dtype)?;
    if header.count != header.labels.len() {
        return Err(Error::format(&json, "count does not match label list"));
    }
    let data = decode_f32(
        &resolve_sidecar(&json, &header.data_file),
        header.count * header.dim,
    )?;
    let renormalize = header.meta.renormalized;
    let mut meta = header.meta;
    meta.renormalized = false;
    let table = EmbeddingTable::new(header.labels, header.dim, data, meta)?;
    if renormalize {
        table.renormalized()
    } else {
        Ok(table)
    }
}

pub fn embeddings_to_tsv(table: &EmbeddingTable) -> String {
    let mut out = String::new();
    for (label, v) in table.rows() {
        out.push_str(label);
        for x in v {
            out.push('\t');
            out.push_str(&format_sig(*x, 9));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureHeader {
    format: String,
    count: usize,
    dim: usize,
    has_labels: bool,
    ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    dtype: String,
    data_file: String,
}

pub fn write_features(features: &FeatureSet, path: &Path) -> Result<PathBuf> {
    let (json, bin) = sidecar_paths(path);
    let has_labels = features.has_labels();
    let header = FeatureHeader {
        format: FEATURES_FORMAT.into(),
        count: features.len(),
        dim: features.dim(),
        has_labels,
        ids: features.items().iter().map(|i| i.id.clone()).collect(),
        labels: has_labels.then(|| {
            features
                .items()
                .iter()
                .map(|i| i.label.clone().unwrap_or_default())
                .collect()
        }),
        dtype: DTYPE.into(),
        data_file: sidecar_name(&bin),
    };
    write_file(
        &bin,
        &encode_f32(
            features
                .items()
                .iter()
                .flat_map(|i| i.values.iter().copied()),
        ),
    )?;
    let mut text = serde_json::to_string_pretty(&header)?;
    text.push('\n');
    write_file(&json, text.as_bytes())?;
    Ok(json)
}

/// Reads a feature file: a JSON header with binary sidecar, or a `.tsv` text file.
pub fn read_features(path: &Path) -> Result<FeatureSet> {
    if path.extension().is_some_and(|e| e == "tsv" || e == "txt") {
        return parse_features_tsv(path, &read_text(path)?);
    }
    let json = path.with_extension("json");
    let header: FeatureHeader = serde_json::from_str(&read_text(&json)?)
        .map_err(|e| Error::format(&json, e.to_string()))?;
    check_format(&json, &header.format, FEATURES_FORMAT, &header.dtype)?;
    if header.ids.len() != header.count {
        return Err(Error::format(&json, "count does not match id list"));
    }
    let labels = match (header.has_labels, header.labels) {
        (true, Some(l)) if l.len() == header.count => l.into_iter().map(Some).collect(),
        (true, _) => return Err(Error::format(&json, "label list missing or wrong length")),
        (false, _) => vec![None; header.count],
    };
    let data = decode_f32(
        &resolve_sidecar(&json, &header.data_file),
        header.count * header.dim,
    )?;
    let items = header
        .ids
        .into_iter()
        .zip(labels)
        .zip(data.chunks(header.dim.max(1)))
        .map(|((id, label), values)| FeatureItem {
            id,
            label,
            values: values.to_vec(),
        })
        .collect();
    FeatureSet::new(header.dim, items)
}

/// `item_id<TAB>label<TAB>v1..vf`; an empty label field means unlabeled.
pub fn parse_features_tsv(path: &Path, text: &str) -> Result<FeatureSet> {
    let mut items = Vec::new();
    let mut dim = None;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 || fields[0].is_empty() {
            return Err(Error::format(
                path,
                format!("line {}: expected id, label and values", n + 1),
            ));
        }
        let values = fields[2..]
            .iter()
            .map(|v| {
                v.trim().parse::<f64>().map_err(|e| {
                    Error::format(path, format!("line {}: bad value `{v}`: {e}", n + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if *dim.get_or_insert(values.len()) != values.len() {
            return Err(Error::format(
                path,
                format!("line {}: inconsistent dimension", n + 1),
            ));
        }
        items.push(FeatureItem {
            id: fields[0].to_string(),
            label: (!fields[1].is_empty()).then(|| fields[1].to_string()),
            values,
        });
    }
    let dim = dim.ok_or_else(|| Error::format(path, "no feature rows"))?;
    FeatureSet::new(dim, items)
}

pub fn features_to_tsv(features: &FeatureSet) -> String {
    let mut out = String::new();
    for item in features.items() {
        out.push_str(&item.id);
        out.push('\t');
        out.push_str(item.label.as_deref().unwrap_or(""));
        for v in &item.values {
            out.push('\t');
            out.push_str(&format_sig(*v, 9));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    input_dim: usize,
    output_dim: usize,
    config: serde_json::Value,
    dtype: String,
    data_file: String,
}

pub fn write_model(
    model: &ProjectionModel,
    config: serde_json::Value,
    path: &Path,
) -> Result<PathBuf> {
    let (json, bin) = sidecar_paths(path);
    let header = ModelHeader {
        format: MODEL_FORMAT.into(),
        input_dim: model.input_dim(),
        output_dim: model.output_dim(),
        config,
        dtype: DTYPE.into(),
        data_file: sidecar_name(&bin),
    };
    write_file(&bin, &encode_f32(model.weights().iter().copied()))?;
    let mut text = serde_json::to_string_pretty(&header)?;
    text.push('\n');
    write_file(&json, text.as_bytes())?;
    Ok(json)
}

pub fn read_model(path: &Path) -> Result<ProjectionModel> {
    let json = path.with_extension("json");
    let header: ModelHeader = serde_json::from_str(&read_text(&json)?)
        .map_err(|e| Error::format(&json, e.to_string()))?;
    check_format(&json, &header.format, MODEL_FORMAT, &header.dtype)?;
    let data = decode_f32(
        &resolve_sidecar(&json, &header.data_file),
        header.input_dim * header.output_dim,
    )?;
    ProjectionModel::new(header.input_dim, header.output_dim, data)
}

/// `query_id<TAB>rank<TAB>label<TAB>similarity`, ranks starting at 1.
pub fn ranked_to_tsv(predictions: &[RankedPrediction], table: &EmbeddingTable, k: usize) -> String {
    let mut out = String::new();
    for p in predictions {
        for (i, (c, sim)) in p.ranking.iter().take(k).enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                p.query_id,
                i + 1,
                table.label(*c),
                format_sig(*sim, 9)
            ));
        }
    }
    out
}

/// One label per line; blank and `#` lines skipped.
pub fn read_label_list(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, text.as_bytes())
}
