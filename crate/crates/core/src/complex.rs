//! Pure simplicial complexes with their level measures, links and skeletons.
//!
//! Faces are indexed by cardinality: `X(0) = {∅}` and `X(d)` holds the top
//! faces. The level measure `Π_i` is the law of a uniformly random `i`-subset
//! of a top face drawn from `Π_d`.

use std::collections::{BTreeSet, HashMap};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binom_u, unrank_combination};
use crate::error::{Error, Result};
use crate::face::{Face, MAX_VERTICES};
use crate::graph::WeightedGraph;

#[derive(Clone, Debug)]
struct Level {
    faces: Vec<Face>,
    index: HashMap<Face, usize>,
    measure: Vec<f64>,
}

impl Level {
    fn new(faces: Vec<Face>, measure: Vec<f64>) -> Level {
        let index = faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();
        Level {
            faces,
            index,
            measure,
        }
    }
}

/// A pure, downward-closed weighted face family on vertices `0..n`.
#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    n: usize,
    d: usize,
    levels: Vec<Level>,
}

/// JSON form: `{"n", "d", "top_faces": [{"vertices", "weight"}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexFile {
    pub n: usize,
    pub d: usize,
    pub top_faces: Vec<TopFace>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopFace {
    pub vertices: Face,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl SimplicialComplex {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Faces of cardinality `i`, sorted lexicographically.
    pub fn faces(&self, i: usize) -> &[Face] {
        &self.levels[i].faces
    }

    /// `Π_i`, aligned with [`faces`](Self::faces).
    pub fn measure(&self, i: usize) -> &[f64] {
        &self.levels[i].measure
    }

    pub fn level_size(&self, i: usize) -> usize {
        self.levels[i].faces.len()
    }

    /// Position of `f` inside its level.
    pub fn index_of(&self, f: Face) -> Option<usize> {
        self.levels.get(f.len())?.index.get(&f).copied()
    }

    pub fn contains(&self, f: Face) -> bool {
        self.index_of(f).is_some()
    }

    /// `Π_{|f|}(f)`, or 0 when `f` is not a face.
    pub fn pi(&self, f: Face) -> f64 {
        self.index_of(f)
            .map(|i| self.levels[f.len()].measure[i])
            .unwrap_or(0.0)
    }

    /// Indices in `X(level)` of the faces containing `s`.
    pub fn supersets(&self, s: Face, level: usize) -> Vec<usize> {
        if level > self.d || level < s.len() {
            return Vec::new();
        }
        self.levels[level]
            .faces
            .iter()
            .enumerate()
            .filter(|(_, f)| s.is_subset(**f))
            .map(|(i, _)| i)
            .collect()
    }

    /// Union of all faces.
    pub fn vertex_set(&self) -> Face {
        self.levels[1]
            .faces
            .iter()
            .fold(Face::EMPTY, |acc, f| acc.union(*f))
    }

    pub fn to_file(&self) -> ComplexFile {
        ComplexFile {
            n: self.n,
            d: self.d,
            top_faces: self.levels[self.d]
                .faces
                .iter()
                .zip(&self.levels[self.d].measure)
                .map(|(&f, &w)| TopFace {
                    vertices: f,
                    weight: Some(w),
                })
                .collect(),
        }
    }

    pub fn from_file(file: &ComplexFile) -> Result<SimplicialComplex> {
        let mut top = Vec::with_capacity(file.top_faces.len());
        for tf in &file.top_faces {
            if tf.vertices.len() != file.d {
                return Err(Error::Invalid(format!(
                    "face {} has cardinality {} but d = {}",
                    tf.vertices,
                    tf.vertices.len(),
                    file.d
                )));
            }
            top.push((tf.vertices, tf.weight.unwrap_or(1.0)));
        }
        build_pure_complex_on(file.n, &top)
    }

    pub fn from_json(text: &str) -> Result<SimplicialComplex> {
        SimplicialComplex::from_file(&serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("complex serializes")
    }
}

/// Build a pure complex from weighted top faces; `n` is one past the largest vertex.
pub fn build_pure_complex(top_faces: &[(Face, f64)]) -> Result<SimplicialComplex> {
    let n = top_faces
        .iter()
        .filter_map(|(f, _)| f.max_vertex())
        .max()
        .map_or(0, |v| v + 1);
    build_pure_complex_on(n, top_faces)
}

/// Build a pure complex on the vertex range `0..n`.
pub fn build_pure_complex_on(n: usize, top_faces: &[(Face, f64)]) -> Result<SimplicialComplex> {
    if top_faces.is_empty() {
        return Err(Error::Empty("no top faces".into()));
    }
    if n > MAX_VERTICES {
        return Err(Error::TooLarge(format!("n = {n} exceeds {MAX_VERTICES}")));
    }
    let d = top_faces[0].0.len();
    if d == 0 {
        return Err(Error::Invalid("top faces must be nonempty".into()));
    }
    let mut seen = BTreeSet::new();
    for &(f, w) in top_faces {
        if f.len() != d {
            return Err(Error::Invalid(format!(
                "mixed cardinalities: {} has {} vertices, expected {d}",
                f,
                f.len()
            )));
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::Invalid(format!("face {f} has nonpositive weight {w}")));
        }
        if f.max_vertex().is_some_and(|v| v >= n) {
            return Err(Error::Invalid(format!("face {f} has a vertex outside 0..{n}")));
        }
        if !seen.insert(f) {
            return Err(Error::Invalid(format!("duplicate face {f}")));
        }
    }
    let total: f64 = top_faces.iter().map(|(_, w)| w).sum();
    let mut sorted: Vec<(Face, f64)> = top_faces.iter().map(|&(f, w)| (f, w / total)).collect();
    sorted.sort_by_key(|a| a.0);

    let mut levels = vec![Level::new(
        sorted.iter().map(|p| p.0).collect(),
        sorted.iter().map(|p| p.1).collect(),
    )];
    for i in (1..=d).rev() {
        let upper = levels.last().unwrap();
        let mut acc: HashMap<Face, f64> = HashMap::new();
        for (&t, &p) in upper.faces.iter().zip(&upper.measure) {
            for v in t.iter() {
                *acc.entry(t.without(v)).or_insert(0.0) += p / i as f64;
            }
        }
        let mut faces: Vec<Face> = acc.keys().copied().collect();
        faces.sort();
        let measure = faces.iter().map(|f| acc[f]).collect();
        levels.push(Level::new(faces, measure));
    }
    levels.reverse();
    Ok(SimplicialComplex { n, d, levels })
}

/// The complete complex `Δ_d(n)`: all `d`-subsets of `0..n`, uniform.
pub fn complete_complex(n: usize, d: usize) -> Result<SimplicialComplex> {
    if d == 0 || d > n {
        return Err(Error::Parameter(format!("need 0 < d ≤ n, got d = {d}, n = {n}")));
    }
    if n > MAX_VERTICES {
        return Err(Error::TooLarge(format!("n = {n} exceeds {MAX_VERTICES}")));
    }
    let top: Vec<(Face, f64)> = Face::from_bits(full_mask(n))
        .subsets_of_size(d)
        .into_iter()
        .map(|f| (f, 1.0))
        .collect();
    build_pure_complex_on(n, &top)
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// `m` distinct uniformly chosen `d`-subsets of `0..n` with weights in `[0.5, 1.5)`.
pub fn random_pure_complex(n: usize, d: usize, m: usize, seed: u64) -> Result<SimplicialComplex> {
    if d == 0 || d > n || n > MAX_VERTICES {
        return Err(Error::Parameter(format!("need 0 < d ≤ n ≤ 64, got d = {d}, n = {n}")));
    }
    let total = binom_u(n, d);
    if m == 0 || m as u128 > total || total > usize::MAX as u128 {
        return Err(Error::Parameter(format!("cannot choose {m} of {total} faces")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ranks: Vec<usize> = sample(&mut rng, total as usize, m).into_vec();
    ranks.sort_unstable();
    let top: Vec<(Face, f64)> = ranks
        .into_iter()
        .map(|r| {
            let verts = unrank_combination(n, d, r as u128);
            (Face::new(&verts).unwrap(), rng.gen_range(0.5..1.5))
        })
        .collect();
    build_pure_complex_on(n, &top)
}

/// The link `X_s = {t ∖ s : s ⊆ t ∈ X}` with top weights `∝ Π_d(t)`.
pub fn link(x: &SimplicialComplex, s: Face) -> Result<SimplicialComplex> {
    if !x.contains(s) {
        return Err(Error::NotAFace(s));
    }
    if s.len() >= x.d {
        return Err(Error::Parameter(format!(
            "link of {s} is empty: |s| = {} = d",
            s.len()
        )));
    }
    let top: Vec<(Face, f64)> = x
        .supersets(s, x.d)
        .into_iter()
        .map(|i| (x.faces(x.d)[i].difference(s), x.measure(x.d)[i]))
        .collect();
    build_pure_complex_on(x.n, &top)
}

/// Graph on `X(1)` with edge weights `Π_2`.
pub fn skeleton_graph(x: &SimplicialComplex) -> Result<WeightedGraph> {
    if x.d < 2 {
        return Err(Error::Parameter(format!("skeleton needs d ≥ 2, got {}", x.d)));
    }
    let verts: Vec<usize> = x.faces(1).iter().map(|f| f.iter().next().unwrap()).collect();
    let labels = verts.iter().map(|v| v.to_string()).collect();
    let edges = x
        .faces(2)
        .iter()
        .zip(x.measure(2))
        .map(|(e, &w)| {
            let ends: Vec<usize> = e.iter().collect();
            let u = x.index_of(Face::singleton(ends[0])).unwrap();
            let v = x.index_of(Face::singleton(ends[1])).unwrap();
            (u, v, w)
        })
        .collect();
    WeightedGraph::new(labels, edges)
}

/// Skeleton of the link of `s`, built directly from `Π_{|s|+2}`.
pub fn link_skeleton(x: &SimplicialComplex, s: Face) -> Result<WeightedGraph> {
    let i = s.len();
    if i + 2 > x.d {
        return Err(Error::Parameter(format!("link of {s} has no edges")));
    }
    let mut verts: Vec<usize> = x
        .supersets(s, i + 1)
        .into_iter()
        .map(|j| x.faces(i + 1)[j].difference(s).iter().next().unwrap())
        .collect();
    verts.sort_unstable();
    let pos: HashMap<usize, usize> = verts.iter().enumerate().map(|(p, &v)| (v, p)).collect();
    let edges = x
        .supersets(s, i + 2)
        .into_iter()
        .map(|j| {
            let e: Vec<usize> = x.faces(i + 2)[j].difference(s).iter().collect();
            (pos[&e[0]], pos[&e[1]], x.measure(i + 2)[j])
        })
        .collect();
    WeightedGraph::new(verts.iter().map(|v| v.to_string()).collect(), edges)
}

/// Result of [`hdx_parameter`].
#[derive(Clone, Debug, Serialize)]
pub struct HdxParameter {
    pub gamma: f64,
    /// Face whose link attains `gamma`.
    pub worst_face: Face,
    /// Faces whose link skeleton is disconnected (each forces `gamma = 1`).
    pub disconnected_links: Vec<Face>,
}

/// Largest `σ2` over link skeletons of faces of size at most `d − 2`.
pub fn hdx_parameter(x: &SimplicialComplex) -> Result<HdxParameter> {
    if x.d < 2 {
        return Err(Error::Parameter(format!("γ needs d ≥ 2, got {}", x.d)));
    }
    let mut best = HdxParameter {
        gamma: -1.0,
        worst_face: Face::EMPTY,
        disconnected_links: Vec::new(),
    };
    for i in 0..=x.d - 2 {
        for &s in x.faces(i) {
            let g = link_skeleton(x, s)?;
            let sigma = if g.is_connected() {
                g.sigma2()
            } else {
                best.disconnected_links.push(s);
                1.0
            };
            if sigma > best.gamma {
                best.gamma = sigma;
                best.worst_face = s;
            }
        }
    }
    Ok(best)
}
