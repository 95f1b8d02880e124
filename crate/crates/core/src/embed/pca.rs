use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::table::{EmbeddingMeta, EmbeddingTable};
use super::EnrichedMatrix;
use crate::error::{Error, Result};

/// A projected row shorter than this fraction of the longest row is treated as zero.
const DEGENERATE_RELATIVE_NORM: f64 = 1e-9;

/// Centered data projected onto the leading principal axes, before re-normalization.
#[derive(Debug, Clone)]
pub struct PcaProjection {
    /// n x d projected rows.
    pub scores: DMatrix<f64>,
    /// n x d principal axes as columns, descending eigenvalue order.
    pub components: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub mean: DVector<f64>,
}

/// Centers rows, eigendecomposes the scatter matrix and keeps the top `dim` axes.
///
/// Each axis is flipped so its largest-magnitude coordinate is positive (first index
/// wins ties), which makes the output reproducible.
pub fn pca_project(data: &DMatrix<f64>, dim: usize) -> Result<PcaProjection> {
    let (n, cols) = data.shape();
    if dim == 0 || dim > n || dim > cols {
        return Err(Error::Dimension(format!(
            "requested {dim} components from a {n}x{cols} matrix"
        )));
    }
    let mean = data.row_mean().transpose();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let scatter = centered.transpose() * &centered;
    let eig = SymmetricEigen::new(scatter);

    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = DMatrix::<f64>::zeros(cols, dim);
    for (k, &src) in order.iter().take(dim).enumerate() {
        let mut axis = eig.eigenvectors.column(src).clone_owned();
        let pivot = axis
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |best, (i, v)| {
                if v.abs() > best.1 {
                    (i, v.abs())
                } else {
                    best
                }
            })
            .0;
        if axis[pivot] < 0.0 {
            axis.neg_mut();
        }
        components.set_column(k, &axis);
    }
    let eigenvalues = order
        .iter()
        .take(dim)
        .map(|&i| eig.eigenvalues[i])
        .collect();
    Ok(PcaProjection {
        scores: &centered * &components,
        components,
        eigenvalues,
        mean,
    })
}

/// Reduces a row-normalized enriched matrix to `dim` unit-length concept vectors.
pub fn pca_reduce(m: &EnrichedMatrix, dim: usize, labels: &[String]) -> Result<EmbeddingTable> {
    if labels.len() != m.n() {
        return Err(Error::Dimension(format!(
            "{} labels for {} matrix rows",
            labels.len(),
            m.n()
        )));
    }
    if dim > m.n() {
        return Err(Error::Dimension(format!(
            "dimension {dim} exceeds node count {}",
            m.n()
        )));
    }
    let proj = pca_project(&m.values, dim)?;
    let norms: Vec<f64> = proj.scores.row_iter().map(|r| r.norm()).collect();
    let floor = DEGENERATE_RELATIVE_NORM * norms.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut data = Vec::with_capacity(m.n() * dim);
    for (i, row) in proj.scores.row_iter().enumerate() {
        let norm = norms[i];
        if norm == 0.0 || norm <= floor {
            return Err(Error::DegenerateRow {
                concept: labels[i].clone(),
            });
        }
        data.extend(row.iter().map(|v| v / norm));
    }
    let meta = EmbeddingMeta {
        alpha: m.config.alpha,
        dim,
        centered: true,
        renormalized: true,
        method: m.config.method.clone(),
    };
    EmbeddingTable::new(labels.to_vec(), dim, data, meta)
}
