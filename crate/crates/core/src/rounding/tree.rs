//! Splitting trees and the high-dimensional threshold rank.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::swap_graph::swap_graph;
use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::spectra::threshold_rank;

/// Largest leaf count for which all trees are enumerated.
pub const MAX_ENUMERATED_LEAVES: usize = 6;

/// Binary tree whose nodes are labelled by their leaf counts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SplittingTree {
    Leaf,
    Node(Box<SplittingTree>, Box<SplittingTree>),
}

impl SplittingTree {
    pub fn node(left: SplittingTree, right: SplittingTree) -> SplittingTree {
        SplittingTree::Node(Box::new(left), Box::new(right))
    }

    /// Leaf count of the subtree, i.e. its label.
    pub fn label(&self) -> usize {
        match self {
            SplittingTree::Leaf => 1,
            SplittingTree::Node(l, r) => l.label() + r.label(),
        }
    }

    /// `(ℓ1, ℓ2)` with `ℓ1 ≥ ℓ2` for every internal node, in pre-order.
    pub fn splits(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        self.collect_splits(&mut out);
        out
    }

    fn collect_splits(&self, out: &mut Vec<(usize, usize)>) {
        if let SplittingTree::Node(l, r) = self {
            let (a, b) = (l.label(), r.label());
            out.push((a.max(b), a.min(b)));
            l.collect_splits(out);
            r.collect_splits(out);
        }
    }

    /// All binary trees with `k` leaves (Catalan many), for `k ≤ 6`.
    pub fn enumerate(k: usize) -> Result<Vec<SplittingTree>> {
        if k == 0 || k > MAX_ENUMERATED_LEAVES {
            return Err(Error::Parameter(format!(
                "tree enumeration needs 1 ≤ k ≤ {MAX_ENUMERATED_LEAVES}, got {k}"
            )));
        }
        Ok(Self::all(k))
    }

    fn all(k: usize) -> Vec<SplittingTree> {
        if k == 1 {
            return vec![SplittingTree::Leaf];
        }
        let mut out = Vec::new();
        for a in 1..k {
            for l in Self::all(a) {
                for r in Self::all(k - a) {
                    out.push(SplittingTree::node(l.clone(), r));
                }
            }
        }
        out
    }
}

impl fmt::Display for SplittingTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplittingTree::Leaf => write!(f, "1"),
            SplittingTree::Node(l, r) => write!(f, "({l},{r})"),
        }
    }
}

impl FromStr for SplittingTree {
    type Err = Error;

    /// Parse trees written as `1` or `(T,T)`, e.g. `((1,1),(1,1))`.
    fn from_str(s: &str) -> Result<SplittingTree> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let tree = parse(&chars, &mut pos)?;
        if pos != chars.len() {
            return Err(Error::Invalid(format!("trailing input in tree {s:?}")));
        }
        Ok(tree)
    }
}

fn parse(c: &[char], pos: &mut usize) -> Result<SplittingTree> {
    let bad = |p: usize| Error::Invalid(format!("malformed splitting tree at position {p}"));
    match c.get(*pos) {
        Some('1') => {
            *pos += 1;
            Ok(SplittingTree::Leaf)
        }
        Some('(') => {
            *pos += 1;
            let l = parse(c, pos)?;
            if c.get(*pos) != Some(&',') {
                return Err(bad(*pos));
            }
            *pos += 1;
            let r = parse(c, pos)?;
            if c.get(*pos) != Some(&')') {
                return Err(bad(*pos));
            }
            *pos += 1;
            Ok(SplittingTree::node(l, r))
        }
        _ => Err(bad(*pos)),
    }
}

impl Serialize for SplittingTree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SplittingTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Largest threshold rank among the swap graphs of the tree's internal nodes.
pub fn splittable_rank(x: &SimplicialComplex, tree: &SplittingTree, tau: f64) -> Result<usize> {
    let mut cache = HashMap::new();
    splittable_rank_cached(x, tree, tau, &mut cache)
}

fn splittable_rank_cached(
    x: &SimplicialComplex,
    tree: &SplittingTree,
    tau: f64,
    cache: &mut HashMap<(usize, usize), usize>,
) -> Result<usize> {
    if tree.label() != x.d() {
        return Err(Error::Invalid(format!(
            "tree {tree} has {} leaves but the complex has top level {}",
            tree.label(),
            x.d()
        )));
    }
    let mut rank = 0;
    for split in tree.splits() {
        let r = match cache.get(&split) {
            Some(&r) => r,
            None => {
                let r = threshold_rank(&swap_graph(x, split.0, split.1)?.graph, tau)?;
                cache.insert(split, r);
                r
            }
        };
        rank = rank.max(r);
    }
    Ok(rank)
}

/// Splittable rank of every enumerated tree with `d` leaves.
pub fn tree_ranks(x: &SimplicialComplex, tau: f64) -> Result<Vec<(SplittingTree, usize)>> {
    let mut cache = HashMap::new();
    SplittingTree::enumerate(x.d())?
        .into_iter()
        .map(|t| {
            let r = splittable_rank_cached(x, &t, tau, &mut cache)?;
            Ok((t, r))
        })
        .collect()
}

/// Minimum splittable rank over all enumerated splitting trees.
pub fn hd_threshold_rank(x: &SimplicialComplex, tau: f64) -> Result<usize> {
    Ok(tree_ranks(x, tau)?.into_iter().map(|(_, r)| r).min().unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::complete_complex;

    #[test]
    fn catalan_counts_and_labels() {
        let counts: Vec<usize> = (1..=6).map(|k| SplittingTree::enumerate(k).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 14, 42]);
        for t in SplittingTree::enumerate(5).unwrap() {
            assert_eq!(t.label(), 5);
            assert_eq!(t.splits().len(), 4);
            for (a, b) in t.splits() {
                assert!(a >= b && b >= 1);
            }
        }
        assert!(SplittingTree::enumerate(7).is_err());
    }

    #[test]
    fn parse_and_print() {
        let t: SplittingTree = "((1,1),(1,1))".parse().unwrap();
        assert_eq!(t.splits(), vec![(2, 2), (1, 1), (1, 1)]);
        assert_eq!(t.to_string(), "((1,1),(1,1))");
        let c: SplittingTree = "(1, (1, (1,1)))".parse().unwrap();
        assert_eq!(c.splits(), vec![(3, 1), (2, 1), (1, 1)]);
        for bad in ["", "(1,1", "(1)", "2", "(1,1))", "((1,1),)"] {
            assert!(bad.parse::<SplittingTree>().is_err(), "{bad}");
        }
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<SplittingTree>(&json).unwrap(), t);
    }

    #[test]
    fn complete_complex_has_rank_one() {
        let x = complete_complex(12, 4).unwrap();
        let balanced: SplittingTree = "((1,1),(1,1))".parse().unwrap();
        let caterpillar: SplittingTree = "(((1,1),1),1)".parse().unwrap();
        assert_eq!(splittable_rank(&x, &balanced, 0.5).unwrap(), 1);
        assert_eq!(splittable_rank(&x, &caterpillar, 0.5).unwrap(), 1);
        assert_eq!(hd_threshold_rank(&x, 0.5).unwrap(), 1);
        for (_, r) in tree_ranks(&x, 0.5).unwrap() {
            assert_eq!(r, 1);
        }
        assert!(splittable_rank(&x, &"((1,1),1)".parse().unwrap(), 0.5).is_err());
    }

    #[test]
    fn small_tau_counts_positive_eigenvalues() {
        let x = complete_complex(8, 3).unwrap();
        let g = swap_graph(&x, 2, 1).unwrap();
        let positive = g.graph.eigenvalues().iter().filter(|&&l| l >= 1e-9).count();
        assert_eq!(threshold_rank(&g.graph, 1e-9).unwrap(), positive);
        assert!(positive < g.num_vertices());
        let tree: SplittingTree = "((1,1),1)".parse().unwrap();
        let r = splittable_rank(&x, &tree, 1e-9).unwrap();
        assert!(r >= positive && r <= g.num_vertices());
    }
}
