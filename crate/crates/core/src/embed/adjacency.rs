use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::taxonomy::ConceptGraph;

/// Power-iteration budget for the spectral-radius estimate.
pub const POWER_ITERATIONS: usize = 50;
pub const POWER_TOLERANCE: f64 = 1e-10;

/// Symmetric 0/1 adjacency with an empty diagonal, stored as sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyMatrix {
    /// Builds an adjacency from undirected edges. Self-loops are dropped, duplicates collapse.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for (a, b) in edges {
            if a == b {
                continue;
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self { neighbors }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.neighbors[i].binary_search(&j).is_ok() {
            1.0
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }

    /// `scale * M * rhs`, one column per rayon task; each column is summed in a fixed order.
    pub fn scaled_mul(&self, scale: f64, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n();
        assert_eq!(rhs.nrows(), n, "row count mismatch in sparse product");
        let mut out = DMatrix::<f64>::zeros(n, rhs.ncols());
        out.as_mut_slice()
            .par_chunks_mut(n.max(1))
            .zip(rhs.as_slice().par_chunks(n.max(1)))
            .for_each(|(dst, src)| {
                for (i, d) in dst.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for &j in &self.neighbors[i] {
                        acc += src[j];
                    }
                    *d = scale * acc;
                }
            });
        out
    }

    /// Connected components, each as a sorted list of node indices.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut head = 0;
            while head < members.len() {
                let v = members[head];
                head += 1;
                for &w in &self.neighbors[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        members.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Estimates the spectral radius by power iteration, run per connected component on
    /// the shifted matrix `M + I` so bipartite components do not oscillate. The
    /// estimate is the largest Rayleigh quotient of `M` over components.
    pub fn spectral_radius(&self) -> f64 {
        let mut best = 0.0f64;
        for members in self.components() {
            if members.len() < 2 {
                continue;
            }
            let mut local = vec![usize::MAX; self.n()];
            for (k, &v) in members.iter().enumerate() {
                local[v] = k;
            }
            let m = members.len();
            let mut x = vec![1.0 / (m as f64).sqrt(); m];
            let mut y = vec![0.0; m];
            let mut rq = 0.0;
            for _ in 0..POWER_ITERATIONS {
                for (k, &v) in members.iter().enumerate() {
                    y[k] = self.neighbors[v].iter().map(|&w| x[local[w]]).sum();
                }
                // x is unit, so x.y is the Rayleigh quotient of M
                let next: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
                for (yk, xk) in y.iter_mut().zip(&x) {
                    *yk += xk;
                }
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (xk, yk) in x.iter_mut().zip(&y) {
                    *xk = yk / norm;
                }
                let done = (next - rq).abs() < POWER_TOLERANCE;
                rq = next;
                if done {
                    break;
                }
            }
            best = best.max(rq);
        }
        best
    }
}

/// `M[i][j] = 1` iff an edge of any kind joins i and j in either direction.
pub fn build_adjacency(graph: &ConceptGraph) -> Result<AdjacencyMatrix> {
    if graph.is_empty() {
        return Err(Error::EmptyInput("graph has no concepts".into()));
    }
    Ok(AdjacencyMatrix::from_edges(
        graph.len(),
        graph
            .edges()
            .iter()
            .map(|e| (e.source.index(), e.target.index())),
    ))
}
