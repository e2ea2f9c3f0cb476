//! Weighted undirected graphs and their normalized walks.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Undirected graph with nonnegative edge weights summing to one.
///
/// `vertex_measure(v)` is half the weight incident to `v`, which makes it
/// the stationary distribution of the walk `P(u→v) = w(uv) / (2 μ(u))`.
#[derive(Clone, Debug, Serialize)]
pub struct WeightedGraph {
    labels: Vec<String>,
    edges: Vec<(usize, usize, f64)>,
    vertex_measure: Vec<f64>,
}

#[derive(Deserialize)]
struct GraphFile {
    vertices: Vec<String>,
    edges: Vec<EdgeEntry>,
}

#[derive(Deserialize)]
struct EdgeEntry {
    u: usize,
    v: usize,
    #[serde(default = "one")]
    weight: f64,
}

fn one() -> f64 {
    1.0
}

impl WeightedGraph {
    /// Build from labels and `(u, v, weight)` triples. Parallel edges are merged.
    pub fn new(labels: Vec<String>, edges: Vec<(usize, usize, f64)>) -> Result<WeightedGraph> {
        let n = labels.len();
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Invalid(format!("edge ({u},{v}) out of range for {n} vertices")));
            }
            if u == v {
                return Err(Error::Invalid(format!("self-loop at vertex {u}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Invalid(format!("edge weight {w} must be finite and nonnegative")));
            }
            *merged.entry((u.min(v), u.max(v))).or_insert(0.0) += w;
        }
        let total: f64 = merged.values().sum();
        if !(total > 0.0) {
            return Err(Error::Empty("graph has no positive edge weight".into()));
        }
        let edges: Vec<(usize, usize, f64)> = merged
            .into_iter()
            .map(|((u, v), w)| (u, v, w / total))
            .collect();
        let mut vertex_measure = vec![0.0; n];
        for &(u, v, w) in &edges {
            vertex_measure[u] += w / 2.0;
            vertex_measure[v] += w / 2.0;
        }
        Ok(WeightedGraph {
            labels,
            edges,
            vertex_measure,
        })
    }

    /// Complete graph on `n` vertices with uniform weights.
    pub fn complete(n: usize) -> Result<WeightedGraph> {
        let labels = (0..n).map(|i| i.to_string()).collect();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v, 1.0));
            }
        }
        WeightedGraph::new(labels, edges)
    }

    /// Parse `{"vertices": [...], "edges": [{"u","v","weight"}]}`.
    pub fn from_json(text: &str) -> Result<WeightedGraph> {
        let file: GraphFile = serde_json::from_str(text)?;
        WeightedGraph::new(
            file.vertices,
            file.edges.into_iter().map(|e| (e.u, e.v, e.weight)).collect(),
        )
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Edges `(u, v, w)` with `u < v`, weights normalized.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn vertex_measure(&self) -> &[f64] {
        &self.vertex_measure
    }

    /// Row-stochastic walk matrix (rows of isolated vertices are zero).
    pub fn walk_matrix(&self) -> DMatrix<f64> {
        let n = self.num_vertices();
        let mut p = DMatrix::zeros(n, n);
        for &(u, v, w) in &self.edges {
            if self.vertex_measure[u] > 0.0 {
                p[(u, v)] += w / (2.0 * self.vertex_measure[u]);
            }
            if self.vertex_measure[v] > 0.0 {
                p[(v, u)] += w / (2.0 * self.vertex_measure[v]);
            }
        }
        p
    }

    /// `D^{-1/2} A D^{-1/2}` restricted to vertices of positive measure.
    pub fn symmetrized_walk(&self) -> DMatrix<f64> {
        let live: Vec<usize> = (0..self.num_vertices())
            .filter(|&v| self.vertex_measure[v] > 0.0)
            .collect();
        let mut pos = vec![usize::MAX; self.num_vertices()];
        for (i, &v) in live.iter().enumerate() {
            pos[v] = i;
        }
        let mut m = DMatrix::zeros(live.len(), live.len());
        for &(u, v, w) in &self.edges {
            if w == 0.0 {
                continue;
            }
            let x = w / (2.0 * (self.vertex_measure[u] * self.vertex_measure[v]).sqrt());
            m[(pos[u], pos[v])] += x;
            m[(pos[v], pos[u])] += x;
        }
        m
    }

    /// Signed walk eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::sym_eigenvalues_desc(&self.symmetrized_walk())
    }

    /// Second largest singular value of the walk (0 for a single vertex).
    pub fn sigma2(&self) -> f64 {
        let mut abs: Vec<f64> = self.eigenvalues().iter().map(|x| x.abs()).collect();
        abs.sort_by(|a, b| b.total_cmp(a));
        abs.get(1).copied().unwrap_or(0.0)
    }

    /// Connectivity over vertices of positive measure.
    pub fn is_connected(&self) -> bool {
        let n = self.num_vertices();
        let live: Vec<bool> = self.vertex_measure.iter().map(|&m| m > 0.0).collect();
        let Some(start) = live.iter().position(|&x| x) else {
            return true;
        };
        let mut adj = vec![Vec::new(); n];
        for &(u, v, w) in &self.edges {
            if w > 0.0 {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        (0..n).all(|v| !live[v] || seen[v])
    }
}
