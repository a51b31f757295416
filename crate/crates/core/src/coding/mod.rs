//! Strongly Markov codings: the directed graph whose labeled paths from the
//! start vertex enumerate group elements, one path per element, with path
//! length equal to word length.

mod analysis;
mod growth;
pub mod synthetic;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analysis::{component_period, decompose_components, Component, ComponentDecomposition};
pub use growth::{
    count_words, growth_rate, validate_coding, BijectionFailure, GrowthReport, OracleCount,
    ValidationReport,
};

/// Reserved name of the start vertex.
pub const START: &str = "*";
/// Reserved name of the absorbing vertex added by augmentation.
pub const ZERO: &str = "0";

/// Where a coding came from. Synthetic graphs are not group codings, so
/// checks that only hold for groups report instead of failing on them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CodingOrigin {
    FreeGroup { rank: usize },
    File,
    Synthetic { name: String },
}

/// A labeled edge. `label == None` is the identity label carried by the
/// augmentation edges into the zero vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub label: Option<usize>,
}

/// An augmented strongly Markov coding.
#[derive(Debug, Clone)]
pub struct MarkovCoding {
    generators: Vec<String>,
    vertices: Vec<String>,
    edges: Vec<Edge>,
    start: usize,
    zero: usize,
    origin: CodingOrigin,
    /// Non-augmentation out-edges per vertex, in edge order.
    word_out: Vec<Vec<usize>>,
    elementary: bool,
}

/// Edge record of the on-disk format. The identity label is `""`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    pub label: String,
}

/// JSON coding document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodingDocument {
    pub generators: Vec<String>,
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeRecord>,
    #[serde(default)]
    pub augmented: bool,
    /// Marks graphs that are not codings of a group.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
}

impl MarkovCoding {
    /// Builds and validates a coding, adding the zero vertex and its
    /// identity-labeled in-edges unless `augmented` says they are present.
    pub fn from_parts(
        generators: Vec<String>,
        vertices: Vec<String>,
        edges: Vec<EdgeRecord>,
        augmented: bool,
        origin: CodingOrigin,
    ) -> Result<Self> {
        let mut gen_index = HashMap::new();
        for (i, g) in generators.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::Validation(
                    "generator names must be non-empty (\"\" is the identity label)".into(),
                ));
            }
            if gen_index.insert(g.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate generator \"{g}\"")));
            }
        }

        let mut vertices = vertices;
        let mut vertex_index = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if vertex_index.insert(v.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate vertex \"{v}\"")));
            }
        }
        let start = *vertex_index
            .get(START)
            .ok_or_else(|| Error::Validation("missing start vertex \"*\"".into()))?;
        if !augmented && vertex_index.contains_key(ZERO) {
            return Err(Error::Validation(
                "vertex name \"0\" is reserved for augmentation".into(),
            ));
        }
        if augmented && !vertex_index.contains_key(ZERO) {
            return Err(Error::Validation(
                "augmented coding has no zero vertex \"0\"".into(),
            ));
        }

        let mut resolved = Vec::with_capacity(edges.len());
        let mut pairs = HashSet::new();
        for e in &edges {
            let from = *vertex_index
                .get(&e.from)
                .ok_or_else(|| Error::Validation(format!("edge from unknown vertex \"{}\"", e.from)))?;
            let to = *vertex_index
                .get(&e.to)
                .ok_or_else(|| Error::Validation(format!("edge to unknown vertex \"{}\"", e.to)))?;
            let label = if e.label.is_empty() {
                None
            } else {
                Some(*gen_index.get(&e.label).ok_or_else(|| {
                    Error::Validation(format!("label \"{}\" is not a generator", e.label))
                })?)
            };
            if to == start {
                return Err(Error::Validation(format!(
                    "edge into start vertex (from \"{}\")",
                    e.from
                )));
            }
            if !pairs.insert((from, to)) {
                return Err(Error::Validation(format!(
                    "duplicate edge \"{}\" -> \"{}\"",
                    e.from, e.to
                )));
            }
            resolved.push(Edge { from, to, label });
        }

        let zero = if augmented {
            let zero = vertex_index[ZERO];
            check_augmentation(&vertices, &resolved, start, zero)?;
            zero
        } else {
            if let Some(e) = resolved.iter().find(|e| e.label.is_none()) {
                return Err(Error::Validation(format!(
                    "identity label on non-augmentation edge \"{}\" -> \"{}\"",
                    vertices[e.from], vertices[e.to]
                )));
            }
            let zero = vertices.len();
            vertices.push(ZERO.to_string());
            for v in 0..vertices.len() {
                if v != start {
                    resolved.push(Edge {
                        from: v,
                        to: zero,
                        label: None,
                    });
                }
            }
            zero
        };

        let mut word_out = vec![Vec::new(); vertices.len()];
        for (i, e) in resolved.iter().enumerate() {
            if e.to != zero {
                word_out[e.from].push(i);
            }
        }

        Ok(MarkovCoding {
            generators,
            vertices,
            edges: resolved,
            start,
            zero,
            origin,
            word_out,
            elementary: false,
        })
    }

    pub fn generators(&self) -> &[String] {
        &self.generators
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn zero(&self) -> usize {
        self.zero
    }

    pub fn origin(&self) -> &CodingOrigin {
        &self.origin
    }

    /// Every coding held by this type carries its zero vertex.
    pub fn augmented(&self) -> bool {
        true
    }

    /// Group codings are everything except the synthetic test graphs.
    pub fn is_group(&self) -> bool {
        !matches!(self.origin, CodingOrigin::Synthetic { .. })
    }

    /// Set for codings known to describe an elementary (virtually cyclic)
    /// group, e.g. the rank-one free group.
    pub fn elementary(&self) -> bool {
        self.elementary
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g == name)
    }

    pub fn edge_index(&self, from: usize, to: usize) -> Option<usize> {
        self.edges.iter().position(|e| e.from == from && e.to == to)
    }

    /// Vertices other than `*` and `0`, in coding order.
    pub fn inner_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| v != self.start && v != self.zero)
            .collect()
    }

    /// Out-edges of `v` that do not enter the zero vertex.
    pub fn word_edges(&self, v: usize) -> &[usize] {
        &self.word_out[v]
    }

    /// Indices of all edges that do not enter the zero vertex.
    pub fn word_edge_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.to != self.zero)
            .map(|(i, _)| i)
    }

    pub fn is_augmentation_edge(&self, edge: usize) -> bool {
        self.edges[edge].to == self.zero
    }

    /// Label of an edge; the identity label is `""`.
    pub fn label(&self, edge: usize) -> &str {
        match self.edges[edge].label {
            Some(g) => &self.generators[g],
            None => "",
        }
    }

    /// The 0/1 transition matrix `A` in vertex order.
    pub fn transition_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.vertices.len();
        let mut a = vec![vec![0u8; n]; n];
        for e in &self.edges {
            a[e.from][e.to] = 1;
        }
        a
    }

    /// Inverse of generator `g` under the naming conventions `a`/`A` and
    /// `x`/`x^-1`, when that generator is present.
    pub fn inverse_of(&self, g: usize) -> Option<usize> {
        let name = &self.generators[g];
        if let Some(base) = name.strip_suffix("^-1") {
            return self.generator_index(base);
        }
        if let Some(i) = self.generator_index(&format!("{name}^-1")) {
            return Some(i);
        }
        let mut chars = name.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_ascii_alphabetic() => {
                let swapped = if c.is_ascii_lowercase() {
                    c.to_ascii_uppercase()
                } else {
                    c.to_ascii_lowercase()
                };
                self.generator_index(&swapped.to_string())
            }
            _ => None,
        }
    }

    /// Renders a generator sequence as a word.
    pub fn word_string(&self, labels: &[usize]) -> String {
        let single = labels.iter().all(|&g| self.generators[g].chars().count() == 1);
        let parts: Vec<&str> = labels.iter().map(|&g| self.generators[g].as_str()).collect();
        if single {
            parts.concat()
        } else {
            parts.join(".")
        }
    }

    /// Follows labels from the start vertex; returns the edge path.
    pub fn path_for_word(&self, labels: &[&str]) -> Option<Vec<usize>> {
        let mut v = self.start;
        let mut path = Vec::with_capacity(labels.len());
        for l in labels {
            let e = *self.word_out[v].iter().find(|&&e| self.label(e) == *l)?;
            path.push(e);
            v = self.edges[e].to;
        }
        Some(path)
    }

    /// Document form, always augmented, for saving.
    pub fn to_document(&self) -> CodingDocument {
        CodingDocument {
            generators: self.generators.clone(),
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .map(|(i, e)| EdgeRecord {
                    from: self.vertices[e.from].clone(),
                    to: self.vertices[e.to].clone(),
                    label: self.label(i).to_string(),
                })
                .collect(),
            augmented: true,
            synthetic: !self.is_group(),
        }
    }
}

fn check_augmentation(vertices: &[String], edges: &[Edge], start: usize, zero: usize) -> Result<()> {
    let mut into_zero: BTreeMap<usize, usize> = BTreeMap::new();
    for e in edges {
        if e.to == zero {
            if e.label.is_some() {
                return Err(Error::Validation(format!(
                    "augmentation edge \"{}\" -> \"0\" must carry the identity label",
                    vertices[e.from]
                )));
            }
            *into_zero.entry(e.from).or_default() += 1;
        } else {
            if e.label.is_none() {
                return Err(Error::Validation(format!(
                    "identity label on non-augmentation edge \"{}\" -> \"{}\"",
                    vertices[e.from], vertices[e.to]
                )));
            }
            if e.from == zero {
                return Err(Error::Validation(
                    "zero vertex must be absorbing (edge out of \"0\")".into(),
                ));
            }
        }
    }
    if !into_zero.contains_key(&zero) {
        return Err(Error::Validation("missing zero self-loop".into()));
    }
    if into_zero.contains_key(&start) {
        return Err(Error::Validation("start vertex has an edge to zero".into()));
    }
    for (v, name) in vertices.iter().enumerate() {
        if v != start && !into_zero.contains_key(&v) {
            return Err(Error::Validation(format!(
                "vertex \"{name}\" has no edge to the zero vertex"
            )));
        }
    }
    Ok(())
}

/// Canonical coding of the free group of the given rank: one vertex per
/// letter, and an edge `x -> y` labeled `y` unless `y` is the inverse of `x`.
/// Letters are `a, b, c, ...` with inverses `A, B, C, ...`.
pub fn build_free_group_coding(rank: usize) -> Result<MarkovCoding> {
    if rank == 0 {
        return Err(Error::invalid("free group rank must be at least 1"));
    }
    if rank > 26 {
        return Err(Error::invalid("free group rank is limited to 26 letters"));
    }
    let mut letters = Vec::with_capacity(2 * rank);
    for i in 0..rank {
        let c = (b'a' + i as u8) as char;
        letters.push(c.to_string());
        letters.push(c.to_ascii_uppercase().to_string());
    }
    let inverse = |i: usize| i ^ 1;

    let mut vertices = vec![START.to_string(), ZERO.to_string()];
    vertices.extend(letters.iter().cloned());
    let edge = |from: &str, to: &str, label: &str| EdgeRecord {
        from: from.into(),
        to: to.into(),
        label: label.into(),
    };
    let mut edges = Vec::new();
    for l in &letters {
        edges.push(edge(START, l, l));
    }
    for (i, x) in letters.iter().enumerate() {
        for (j, y) in letters.iter().enumerate() {
            if j != inverse(i) {
                edges.push(edge(x, y, y));
            }
        }
    }
    for l in &letters {
        edges.push(edge(l, ZERO, ""));
    }
    edges.push(edge(ZERO, ZERO, ""));
    let mut coding = MarkovCoding::from_parts(
        letters,
        vertices,
        edges,
        true,
        CodingOrigin::FreeGroup { rank },
    )?;
    coding.elementary = rank == 1;
    Ok(coding)
}

/// Parses and validates a JSON coding document.
pub fn load_coding(document: &str) -> Result<MarkovCoding> {
    let doc: CodingDocument = serde_json::from_str(document).map_err(|e| Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let origin = if doc.synthetic {
        CodingOrigin::Synthetic {
            name: "file".into(),
        }
    } else {
        CodingOrigin::File
    };
    MarkovCoding::from_parts(doc.generators, doc.vertices, doc.edges, doc.augmented, origin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_two_shape() {
        let c = build_free_group_coding(2).unwrap();
        assert_eq!(c.vertices(), &["*", "0", "a", "A", "b", "B"]);
        let word_edges = c.word_edge_indices().count();
        assert_eq!(word_edges, 4 + 12);
        // five augmentation edges: four letters plus the zero self-loop
        assert_eq!(c.edges().len(), 16 + 5);
        assert!(!c.elementary());
        let a = c.vertex_index("a").unwrap();
        let big_a = c.vertex_index("A").unwrap();
        assert!(c.edge_index(a, big_a).is_none());
        assert!(c.edge_index(a, a).is_some());
    }

    #[test]
    fn rank_one_is_elementary() {
        let c = build_free_group_coding(1).unwrap();
        assert_eq!(c.vertices().len(), 4);
        assert_eq!(c.word_edge_indices().count(), 2 + 2);
        assert!(c.elementary());
    }

    #[test]
    fn rank_zero_rejected() {
        assert!(matches!(
            build_free_group_coding(0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn path_labels_give_word() {
        let c = build_free_group_coding(2).unwrap();
        let path = c.path_for_word(&["a", "b"]).unwrap();
        let labels: Vec<usize> = path.iter().map(|&e| c.edges()[e].label.unwrap()).collect();
        assert_eq!(c.word_string(&labels), "ab");
        assert_eq!(path.len(), 2);
    }

    #[test]
    fn inverse_naming_conventions() {
        let c = build_free_group_coding(2).unwrap();
        let a = c.generator_index("a").unwrap();
        let big_a = c.generator_index("A").unwrap();
        assert_eq!(c.inverse_of(a), Some(big_a));
        assert_eq!(c.inverse_of(big_a), Some(a));

        let doc = r#"{"generators":["x","x^-1"],"vertices":["*","p","q"],
            "edges":[{"from":"*","to":"p","label":"x"},{"from":"*","to":"q","label":"x^-1"},
                     {"from":"p","to":"p","label":"x"},{"from":"q","to":"q","label":"x^-1"}]}"#;
        let c = load_coding(doc).unwrap();
        assert_eq!(c.inverse_of(0), Some(1));
        assert_eq!(c.inverse_of(1), Some(0));
    }

    #[test]
    fn document_round_trip_matches_builtin() {
        let c = build_free_group_coding(2).unwrap();
        let text = serde_json::to_string(&c.to_document()).unwrap();
        let back = load_coding(&text).unwrap();
        assert_eq!(back.vertices(), c.vertices());
        assert_eq!(back.edges(), c.edges());
        assert_eq!(back.generators(), c.generators());
    }

    #[test]
    fn unaugmented_document_is_augmented_on_load() {
        let doc = r#"{"generators":["a","A"],"vertices":["*","a","A"],
            "edges":[{"from":"*","to":"a","label":"a"},{"from":"*","to":"A","label":"A"},
                     {"from":"a","to":"a","label":"a"},{"from":"A","to":"A","label":"A"}]}"#;
        let c = load_coding(doc).unwrap();
        let z = c.zero();
        assert_eq!(c.vertices()[z], "0");
        assert!(c.edge_index(z, z).is_some());
        for v in c.inner_vertices() {
            let e = c.edge_index(v, z).unwrap();
            assert_eq!(c.label(e), "");
        }
        assert!(c.edge_index(c.start(), z).is_none());
    }

    #[test]
    fn edge_into_start_rejected() {
        let doc = r#"{"generators":["a"],"vertices":["*","a"],
            "edges":[{"from":"*","to":"a","label":"a"},{"from":"a","to":"*","label":"a"}]}"#;
        match load_coding(doc) {
            Err(Error::Validation(m)) => assert!(m.contains("edge into start vertex"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn augmented_without_zero_loop_rejected() {
        let doc = r#"{"generators":["a"],"vertices":["*","a","0"],"augmented":true,
            "edges":[{"from":"*","to":"a","label":"a"},{"from":"a","to":"a","label":"a"},
                     {"from":"a","to":"0","label":""}]}"#;
        match load_coding(doc) {
            Err(Error::Validation(m)) => assert!(m.contains("zero self-loop"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_document_reports_location() {
        match load_coding("{\"generators\": [\"a\"], \"vertices\": 3}") {
            Err(Error::Parse { location, .. }) => assert!(location.starts_with("line 1")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load_coding("{}"), Err(Error::Parse { .. })));
    }

    #[test]
    fn unknown_label_and_duplicates_rejected() {
        let bad_label = r#"{"generators":["a"],"vertices":["*","a"],
            "edges":[{"from":"*","to":"a","label":"z"}]}"#;
        assert!(matches!(load_coding(bad_label), Err(Error::Validation(_))));
        let dup = r#"{"generators":["a"],"vertices":["*","a","a"],"edges":[]}"#;
        assert!(matches!(load_coding(dup), Err(Error::Validation(_))));
        let reserved = r#"{"generators":["a"],"vertices":["*","0"],"edges":[]}"#;
        assert!(matches!(load_coding(reserved), Err(Error::Validation(_))));
    }
}
