//! Faces as sets of at most 64 vertices.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported vertex count.
pub const MAX_VERTICES: usize = 64;

/// A finite vertex set, stored as a bit mask.
///
/// Ordering is lexicographic on the sorted vertex list, so `{0,3} < {1,2}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Face(u64);

impl Face {
    pub const EMPTY: Face = Face(0);

    /// Build a face from distinct vertices in any order.
    pub fn new(vertices: &[usize]) -> Result<Face> {
        let mut bits = 0u64;
        for &v in vertices {
            if v >= MAX_VERTICES {
                return Err(Error::Invalid(format!(
                    "vertex {v} exceeds the supported maximum {}",
                    MAX_VERTICES - 1
                )));
            }
            if bits & (1 << v) != 0 {
                return Err(Error::Invalid(format!("repeated vertex {v}")));
            }
            bits |= 1 << v;
        }
        Ok(Face(bits))
    }

    pub fn from_bits(bits: u64) -> Face {
        Face(bits)
    }

    pub fn singleton(v: usize) -> Face {
        Face(1 << v)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, v: usize) -> bool {
        v < MAX_VERTICES && self.0 & (1 << v) != 0
    }

    pub fn is_subset(self, other: Face) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Face) -> bool {
        self.0 & other.0 == 0
    }

    pub fn union(self, other: Face) -> Face {
        Face(self.0 | other.0)
    }

    pub fn intersection(self, other: Face) -> Face {
        Face(self.0 & other.0)
    }

    pub fn difference(self, other: Face) -> Face {
        Face(self.0 & !other.0)
    }

    pub fn with(self, v: usize) -> Face {
        Face(self.0 | (1 << v))
    }

    pub fn without(self, v: usize) -> Face {
        Face(self.0 & !(1 << v))
    }

    /// Largest vertex, if any.
    pub fn max_vertex(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(63 - self.0.leading_zeros() as usize)
        }
    }

    /// Vertices in ascending order.
    pub fn iter(self) -> FaceIter {
        FaceIter(self.0)
    }

    pub fn vertices(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Position of `v` within the sorted vertex list.
    pub fn position(self, v: usize) -> Option<usize> {
        if !self.contains(v) {
            return None;
        }
        Some((self.0 & ((1u64 << v) - 1)).count_ones() as usize)
    }

    /// All subsets of cardinality `r`, in lexicographic order.
    pub fn subsets_of_size(self, r: usize) -> Vec<Face> {
        let verts = self.vertices();
        crate::combinatorics::combinations(verts.len(), r)
            .into_iter()
            .map(|c| Face(c.iter().fold(0u64, |acc, &i| acc | (1 << verts[i]))))
            .collect()
    }

    /// All subsets, any size.
    pub fn all_subsets(self) -> Vec<Face> {
        let mut out = Vec::with_capacity(1 << self.len());
        let mut sub = self.0;
        loop {
            out.push(Face(sub));
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & self.0;
        }
        out
    }
}

pub struct FaceIter(u64);

impl Iterator for FaceIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            let v = self.0.trailing_zeros() as usize;
            self.0 &= self.0 - 1;
            Some(v)
        }
    }
}

impl DoubleEndedIterator for FaceIter {
    fn next_back(&mut self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            let v = 63 - self.0.leading_zeros() as usize;
            self.0 &= !(1 << v);
            Some(v)
        }
    }
}

impl Ord for Face {
    fn cmp(&self, other: &Face) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for Face {
    fn partial_cmp(&self, other: &Face) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Face {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for Face {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Face, D::Error> {
        let verts = Vec::<usize>::deserialize(deserializer)?;
        if verts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(serde::de::Error::custom(
                "face vertices must be strictly increasing",
            ));
        }
        Face::new(&verts).map_err(serde::de::Error::custom)
    }
}
