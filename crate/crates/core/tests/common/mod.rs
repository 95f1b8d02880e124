//! Independent reference implementations used as test oracles.
//!
//! Everything here works on plain `Vec<Vec<f64>>` and raw edge lists so it
//! shares no code path with the library.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Undirected random graph on `n` nodes: each pair is joined with probability `density`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn dense_adjacency(n: usize, edges: &[(usize, usize)]) -> Dense {
    let mut m = vec![vec![0.0; n]; n];
    for &(a, b) in edges {
        if a != b {
            m[a][b] = 1.0;
            m[b][a] = 1.0;
        }
    }
    m
}

pub fn identity(n: usize) -> Dense {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            let x = a[i][l];
            if x != 0.0 {
                for j in 0..m {
                    out[i][j] += x * b[l][j];
                }
            }
        }
    }
    out
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut aug: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
            .unwrap();
        aug.swap(col, pivot);
        let p = aug[col][col];
        assert!(p.abs() > 1e-14, "singular matrix in oracle");
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// `(I - alpha M)^-1` by dense elimination.
pub fn closure_oracle(adj: &Dense, alpha: f64) -> Dense {
    let n = adj.len();
    let system: Dense = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (if i == j { 1.0 } else { 0.0 }) - alpha * adj[i][j])
                .collect()
        })
        .collect();
    gauss_jordan_inverse(&system)
}

/// One-sided Jacobi SVD of an `n x m` matrix. Returns singular values (descending)
/// and the matching columns of `X V` (the principal scores), one `Vec` per component.
pub fn jacobi_svd_scores(x: &Dense) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = x.len();
    let m = x[0].len();
    let mut cols: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| x[i][j]).collect()).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let alpha: f64 = cols[p].iter().map(|v| v * v).sum();
                let beta: f64 = cols[q].iter().map(|v| v * v).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a * b).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let (a, b) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * a - s * b;
                    cols[q][i] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut comps: Vec<(f64, Vec<f64>)> = cols
        .into_iter()
        .map(|c| (c.iter().map(|v| v * v).sum::<f64>().sqrt(), c))
        .collect();
    comps.sort_by(|a, b| b.0.total_cmp(&a.0));
    comps.into_iter().unzip()
}

pub fn center_rows(x: &Dense) -> Dense {
    let n = x.len() as f64;
    let m = x[0].len();
    let mean: Vec<f64> = (0..m)
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    x.iter()
        .map(|r| r.iter().zip(&mean).map(|(v, mu)| v - mu).collect())
        .collect()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Random DAG over `n` nodes: every edge points from a higher to a lower index.
/// Each node past the first gets up to `max_parents` is-a parents.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, max_parents: usize) -> Vec<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for child in 1..n {
        let k = rng.random_range(0..=max_parents);
        for _ in 0..k {
            edges.insert((child, rng.random_range(0..child)));
        }
    }
    edges.into_iter().collect()
}

pub fn dag_edge_list(edges: &[(usize, usize)]) -> String {
    edges
        .iter()
        .map(|(c, p)| format!("c{c}\tisa\tc{p}\n"))
        .collect()
}

/// Minimum is-a distance to every ancestor within `max_depth`, by enumerating all paths.
pub fn ancestors_by_paths(
    edges: &[(usize, usize)],
    node: usize,
    max_depth: usize,
) -> BTreeMap<usize, usize> {
    fn walk(
        edges: &[(usize, usize)],
        at: usize,
        depth: usize,
        max_depth: usize,
        out: &mut BTreeMap<usize, usize>,
    ) {
        if depth == max_depth {
            return;
        }
        for &(c, p) in edges {
            if c == at {
                let d = depth + 1;
                let e = out.entry(p).or_insert(d);
                *e = (*e).min(d);
                walk(edges, p, d, max_depth, out);
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(edges, node, 0, max_depth, &mut out);
    out
}

/// Zero-shot classes whose ancestor sets (within `depth`) meet the training classes' ancestors.
pub fn sibling_oracle(
    edges: &[(usize, usize)],
    zero_shot: &BTreeSet<usize>,
    training: &BTreeSet<usize>,
    depth: usize,
) -> BTreeSet<usize> {
    let mut train_anc = BTreeSet::new();
    for &t in training {
        train_anc.extend(ancestors_by_paths(edges, t, depth).into_keys());
    }
    zero_shot
        .iter()
        .copied()
        .filter(|&z| {
            ancestors_by_paths(edges, z, depth)
                .keys()
                .any(|a| train_anc.contains(a))
        })
        .collect()
}

/// Candidates sorted by descending cosine, ties by ascending id.
pub fn brute_force_rank(query: &[f64], candidates: &[(u32, Vec<f64>)]) -> Vec<(u32, f64)> {
    let unit = |v: &[f64]| -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    };
    let q = unit(query);
    let mut scored: Vec<(u32, f64)> = candidates
        .iter()
        .map(|(id, v)| (*id, unit(v).iter().zip(&q).map(|(a, b)| a * b).sum()))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored
}

pub fn cosine_loss_ref(p: &[f64], t: &[f64]) -> f64 {
    let dot: f64 = p.iter().zip(t).map(|(a, b)| a * b).sum();
    let np = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nt = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (np * nt)
}

/// Central differences of `cosine_loss_ref` in `p`.
pub fn finite_difference_gradient(p: &[f64], t: &[f64], h: f64) -> Vec<f64> {
    (0..p.len())
        .map(|i| {
            let mut hi = p.to_vec();
            let mut lo = p.to_vec();
            hi[i] += h;
            lo[i] -= h;
            (cosine_loss_ref(&hi, t) - cosine_loss_ref(&lo, t)) / (2.0 * h)
        })
        .collect()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}
