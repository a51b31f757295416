//! Edge weights `dφ` of edge-combable functions.
//!
//! The value of `φ` on a group element is the sum of the weights along its
//! coding path. Edges into the zero vertex always weigh zero.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::coding::MarkovCoding;
use crate::error::{Error, Result};

/// Largest denominator tried when looking for a rational lattice scale.
pub const MAX_LATTICE_DENOMINATOR: u64 = 1000;
const LATTICE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightOrigin {
    Homomorphism,
    EdgeTable,
    WordLength,
    Recentered,
}

/// Vector-valued edge weights for one coding.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightAssignment {
    dim: usize,
    /// Indexed by edge index; augmentation edges hold zeros.
    values: Vec<Vec<f64>>,
    integer_valued: bool,
    origin: WeightOrigin,
}

impl WeightAssignment {
    fn new(dim: usize, values: Vec<Vec<f64>>, origin: WeightOrigin) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("weight dimension must be at least 1"));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("edge weights must be finite"));
        }
        let integer_valued = values.iter().flatten().all(|x| x.fract() == 0.0);
        Ok(WeightAssignment {
            dim,
            values,
            integer_valued,
            origin,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> WeightOrigin {
        self.origin
    }

    pub fn integer_valued(&self) -> bool {
        self.integer_valued
    }

    /// Weight of edge `e`.
    pub fn value(&self, e: usize) -> &[f64] {
        &self.values[e]
    }

    /// Coordinate `c` of the weight of edge `e`.
    pub fn scalar(&self, e: usize, c: usize) -> f64 {
        self.values[e][c]
    }

    pub fn edge_count(&self) -> usize {
        self.values.len()
    }

    /// Smallest `q ≤ 1000` with `q·w` integral (to 1e-9) for every weight
    /// component, if any.
    pub fn lattice_scale(&self) -> Option<u64> {
        lattice_denominator(self.values.iter().flatten().copied())
    }

    /// Weights multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(|v| v.iter().map(|x| x * c).collect())
            .collect();
        WeightAssignment::new(self.dim, values, self.origin)
    }

    /// The scalar weights formed by coordinate `c`.
    pub fn coordinate(&self, c: usize) -> Result<Self> {
        if c >= self.dim {
            return Err(Error::invalid(format!(
                "coordinate {c} out of range for dimension {}",
                self.dim
            )));
        }
        let values = self.values.iter().map(|v| vec![v[c]]).collect();
        WeightAssignment::new(1, values, self.origin)
    }
}

/// Smallest denominator `q ≤ 1000` making every value an integer multiple
/// of `1/q` within 1e-9.
pub fn lattice_denominator(values: impl Iterator<Item = f64> + Clone) -> Option<u64> {
    (1..=MAX_LATTICE_DENOMINATOR).find(|&q| {
        values.clone().all(|x| {
            let y = x * q as f64;
            (y - y.round()).abs() <= LATTICE_TOLERANCE * y.abs().max(1.0)
        })
    })
}

/// Scalar weights rewritten over rationally independent classes.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalLift {
    /// One representative value per class.
    pub basis: Vec<f64>,
    /// Coordinate `k` of an edge holds its weight divided by `basis[k]`
    /// (a fraction with denominator at most 1000).
    pub lifted: WeightAssignment,
}

impl RationalLift {
    /// Real value of a lifted point.
    pub fn value(&self, point: &[f64]) -> f64 {
        point.iter().zip(&self.basis).map(|(x, b)| x * b).sum()
    }
}

/// Groups scalar weights into classes of rational multiples of a common
/// value, so an irrational weight set becomes a rational vector weight set
/// with `φ = Σ_k x_k·basis[k]`.
pub fn rational_lift(weights: &WeightAssignment) -> Result<RationalLift> {
    if weights.dim() != 1 {
        return Err(Error::invalid("only scalar weights can be lifted"));
    }
    let mut basis: Vec<f64> = Vec::new();
    let mut coords: Vec<(usize, f64)> = Vec::with_capacity(weights.edge_count());
    for e in 0..weights.edge_count() {
        let v = weights.scalar(e, 0);
        if v == 0.0 {
            coords.push((0, 0.0));
            continue;
        }
        let k = match basis
            .iter()
            .position(|&b| lattice_denominator(std::iter::once(v / b)).is_some())
        {
            Some(k) => k,
            None => {
                basis.push(v);
                basis.len() - 1
            }
        };
        coords.push((k, v / basis[k]));
    }
    if basis.is_empty() {
        basis.push(1.0);
    }
    let dim = basis.len();
    let values = coords
        .into_iter()
        .map(|(k, r)| {
            let mut row = vec![0.0; dim];
            row[k] = r;
            row
        })
        .collect();
    Ok(RationalLift {
        basis,
        lifted: WeightAssignment::new(dim, values, weights.origin)?,
    })
}

fn check_zero_edges(coding: &MarkovCoding, values: &mut [Vec<f64>], dim: usize) {
    for (e, v) in values.iter_mut().enumerate() {
        if coding.is_augmentation_edge(e) {
            *v = vec![0.0; dim];
        }
    }
}

/// Resolves a generator key: a generator name, or `x^-1` for the inverse of
/// generator `x` when the coding names that inverse differently.
fn resolve_generator(coding: &MarkovCoding, key: &str) -> Option<usize> {
    if let Some(g) = coding.generator_index(key) {
        return Some(g);
    }
    let base = key.strip_suffix("^-1")?;
    let g = coding.generator_index(base)?;
    coding.inverse_of(g)
}

/// Lifts a homomorphism given on generators: each edge labeled `g` weighs
/// `values[g]`. Values for inverse letters are derived as negatives when not
/// given, and checked for consistency when given.
pub fn weights_from_homomorphism(
    coding: &MarkovCoding,
    values: &BTreeMap<String, Vec<f64>>,
) -> Result<WeightAssignment> {
    let dim = values
        .values()
        .next()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("homomorphism needs at least one generator value"))?;
    if dim == 0 {
        return Err(Error::invalid("generator values must be non-empty vectors"));
    }
    let ngen = coding.generators().len();
    let mut by_gen: Vec<Option<Vec<f64>>> = vec![None; ngen];
    for (key, v) in values {
        if v.len() != dim {
            return Err(Error::invalid(format!(
                "value of \"{key}\" has dimension {}, expected {dim}",
                v.len()
            )));
        }
        let g = resolve_generator(coding, key)
            .ok_or_else(|| Error::invalid(format!("unknown generator \"{key}\"")))?;
        if let Some(prev) = &by_gen[g] {
            if prev != v {
                return Err(Error::invalid(format!(
                    "conflicting values for generator \"{}\"",
                    coding.generators()[g]
                )));
            }
        }
        by_gen[g] = Some(v.clone());
    }
    let given = by_gen.clone();
    for g in 0..ngen {
        let Some(inv) = coding.inverse_of(g) else {
            continue;
        };
        match (&given[g], &given[inv]) {
            (Some(x), Some(y)) => {
                if x.iter().zip(y).any(|(a, b)| *a != -*b) {
                    return Err(Error::invalid(format!(
                        "values of \"{}\" and its inverse \"{}\" are not negatives",
                        coding.generators()[g],
                        coding.generators()[inv]
                    )));
                }
            }
            (None, Some(y)) => by_gen[g] = Some(y.iter().map(|x| -x).collect()),
            _ => {}
        }
    }
    let missing: Vec<&str> = (0..ngen)
        .filter(|&g| by_gen[g].is_none())
        .map(|g| coding.generators()[g].as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "missing generator values: {}",
            missing.join(", ")
        )));
    }
    let mut edge_values: Vec<Vec<f64>> = coding
        .edges()
        .iter()
        .map(|e| match e.label {
            Some(g) => by_gen[g].clone().unwrap(),
            None => vec![0.0; dim],
        })
        .collect();
    check_zero_edges(coding, &mut edge_values, dim);
    WeightAssignment::new(dim, edge_values, WeightOrigin::Homomorphism)
}

/// Word length: every non-augmentation edge weighs 1.
pub fn weights_word_length(coding: &MarkovCoding) -> WeightAssignment {
    let values = (0..coding.edges().len())
        .map(|e| vec![if coding.is_augmentation_edge(e) { 0.0 } else { 1.0 }])
        .collect();
    WeightAssignment::new(1, values, WeightOrigin::WordLength).expect("word length weights are valid")
}

/// One row of an edge table, addressed by vertex names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeValue {
    pub from: String,
    pub to: String,
    pub value: Vec<f64>,
}

/// Arbitrary edge-combable weights from a table covering every
/// non-augmentation edge.
pub fn weights_from_edge_table(coding: &MarkovCoding, table: &[EdgeValue]) -> Result<WeightAssignment> {
    let dim = table
        .first()
        .map(|r| r.value.len())
        .ok_or_else(|| Error::invalid("edge table is empty"))?;
    let mut values: Vec<Option<Vec<f64>>> = vec![None; coding.edges().len()];
    for row in table {
        if row.value.len() != dim {
            return Err(Error::invalid(format!(
                "edge {} -> {} has dimension {}, expected {dim}",
                row.from,
                row.to,
                row.value.len()
            )));
        }
        let e = coding
            .vertex_index(&row.from)
            .zip(coding.vertex_index(&row.to))
            .and_then(|(u, v)| coding.edge_index(u, v))
            .ok_or_else(|| Error::invalid(format!("no edge {} -> {}", row.from, row.to)))?;
        if coding.is_augmentation_edge(e) {
            if row.value.iter().any(|&x| x != 0.0) {
                return Err(Error::invalid(format!(
                    "edge {} -> {} enters the zero vertex and must weigh zero",
                    row.from, row.to
                )));
            }
            continue;
        }
        if values[e].is_some() {
            return Err(Error::invalid(format!("duplicate entry for edge {} -> {}", row.from, row.to)));
        }
        values[e] = Some(row.value.clone());
    }
    let missing: Vec<String> = coding
        .word_edge_indices()
        .filter(|&e| values[e].is_none())
        .map(|e| {
            let edge = &coding.edges()[e];
            format!("{} -> {}", coding.vertices()[edge.from], coding.vertices()[edge.to])
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!("edge table misses edges: {}", missing.join(", "))));
    }
    let values = values
        .into_iter()
        .map(|v| v.unwrap_or_else(|| vec![0.0; dim]))
        .collect();
    WeightAssignment::new(dim, values, WeightOrigin::EdgeTable)
}

/// Scalar edge table with weight 1 on every edge entering `vertex`, the
/// vertex-to-edge recoding of the indicator of that vertex.
pub fn weights_vertex_indicator(coding: &MarkovCoding, vertex: &str) -> Result<WeightAssignment> {
    let target = coding
        .vertex_index(vertex)
        .filter(|&v| v != coding.zero() && v != coding.start())
        .ok_or_else(|| Error::invalid(format!("no inner vertex \"{vertex}\"")))?;
    let values = coding
        .edges()
        .iter()
        .map(|e| vec![if e.to == target { 1.0 } else { 0.0 }])
        .collect();
    WeightAssignment::new(1, values, WeightOrigin::EdgeTable)
}

/// Subtracts `drift` from every non-augmentation edge, turning `φ` into
/// `φ − |g|·drift`.
pub fn recenter(weights: &WeightAssignment, drift: &[f64], coding: &MarkovCoding) -> Result<WeightAssignment> {
    if drift.len() != weights.dim {
        return Err(Error::invalid(format!(
            "drift has dimension {}, weights have {}",
            drift.len(),
            weights.dim
        )));
    }
    if drift.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("drift must be finite"));
    }
    if weights.values.len() != coding.edges().len() {
        return Err(Error::invalid("weights do not belong to this coding"));
    }
    let values = weights
        .values
        .iter()
        .enumerate()
        .map(|(e, v)| {
            if coding.is_augmentation_edge(e) {
                v.clone()
            } else {
                v.iter().zip(drift).map(|(x, d)| x - d).collect()
            }
        })
        .collect();
    WeightAssignment::new(weights.dim, values, WeightOrigin::Recentered)
}

/// Sum of the weights along an edge path.
pub fn path_sum(weights: &WeightAssignment, path: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0; weights.dim];
    for &e in path {
        for (a, x) in acc.iter_mut().zip(&weights.values[e]) {
            *a += x;
        }
    }
    acc
}

/// JSON weights document: exactly one of `by_generator` and `by_edge`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDocument {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub by_generator: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub by_edge: Option<Vec<EdgeValue>>,
}

/// Parses a weights document against a coding.
pub fn load_weights(coding: &MarkovCoding, document: &str) -> Result<WeightAssignment> {
    let doc: WeightsDocument = serde_json::from_str(document).map_err(|e| Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let w = match (&doc.by_generator, &doc.by_edge) {
        (Some(g), None) => weights_from_homomorphism(coding, g)?,
        (None, Some(t)) => weights_from_edge_table(coding, t)?,
        _ => {
            return Err(Error::Parse {
                location: "top level".into(),
                message: "exactly one of \"by_generator\" and \"by_edge\" is required".into(),
            })
        }
    };
    if w.dim != doc.dim {
        return Err(Error::Validation(format!(
            "declared dim {} but values have dimension {}",
            doc.dim, w.dim
        )));
    }
    Ok(w)
}

/// Edges whose values differ between two assignments, for diagnostics.
pub fn differing_edges(a: &WeightAssignment, b: &WeightAssignment) -> BTreeSet<usize> {
    a.values
        .iter()
        .zip(&b.values)
        .enumerate()
        .filter(|(_, (x, y))| x != y)
        .map(|(e, _)| e)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{build_free_group_coding, synthetic};

    fn hom(pairs: &[(&str, &[f64])]) -> BTreeMap<String, Vec<f64>> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()
    }

    fn edge_into(c: &MarkovCoding, from: &str, to: &str) -> usize {
        c.edge_index(c.vertex_index(from).unwrap(), c.vertex_index(to).unwrap()).unwrap()
    }

    #[test]
    fn lift_separates_irrational_classes() {
        let c = build_free_group_coding(2).unwrap();
        let r = 2f64.sqrt();
        let w = weights_from_homomorphism(&c, &hom(&[("a", &[1.0]), ("b", &[r])])).unwrap();
        let lift = rational_lift(&w).unwrap();
        assert_eq!(lift.basis.len(), 2);
        assert_eq!(lift.lifted.dim(), 2);
        assert!(lift.lifted.lattice_scale().is_some());
        let e = edge_into(&c, "a", "B");
        assert_eq!(lift.value(lift.lifted.value(e)), w.scalar(e, 0));
        let half = weights_from_homomorphism(&c, &hom(&[("a", &[0.5]), ("b", &[1.5])])).unwrap();
        assert_eq!(rational_lift(&half).unwrap().basis.len(), 1);
        assert!(rational_lift(&lift.lifted).is_err());
    }

    #[test]
    fn a_exponent_edges() {
        let c = build_free_group_coding(2).unwrap();
        let w = weights_from_homomorphism(&c, &hom(&[("a", &[1.0]), ("b", &[0.0])])).unwrap();
        assert_eq!(w.value(edge_into(&c, "*", "a")), &[1.0]);
        assert_eq!(w.value(edge_into(&c, "b", "A")), &[-1.0]);
        assert_eq!(w.value(edge_into(&c, "a", "B")), &[0.0]);
        assert_eq!(w.value(edge_into(&c, "a", "0")), &[0.0]);
        assert!(w.integer_valued());
        assert_eq!(w.lattice_scale(), Some(1));
        assert_eq!(w.origin(), WeightOrigin::Homomorphism);
    }

    #[test]
    fn explicit_inverse_keys() {
        let c = build_free_group_coding(2).unwrap();
        let w1 = weights_from_homomorphism(&c, &hom(&[("a^-1", &[-1.0]), ("b", &[2.0])])).unwrap();
        let w2 = weights_from_homomorphism(&c, &hom(&[("a", &[1.0]), ("B", &[-2.0])])).unwrap();
        assert_eq!(w1, w2);
        let bad = weights_from_homomorphism(&c, &hom(&[("a", &[1.0]), ("A", &[1.0]), ("b", &[0.0])]));
        assert!(matches!(bad, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn missing_and_unknown_generators() {
        let c = build_free_group_coding(2).unwrap();
        let e = weights_from_homomorphism(&c, &hom(&[("a", &[1.0])])).unwrap_err();
        assert!(e.to_string().contains("b"), "{e}");
        assert!(weights_from_homomorphism(&c, &hom(&[("a", &[1.0]), ("b", &[0.0]), ("z", &[0.0])])).is_err());
        assert!(weights_from_homomorphism(&c, &hom(&[("a", &[1.0]), ("b", &[0.0, 1.0])])).is_err());
    }

    #[test]
    fn abelianization_and_irrational() {
        let c = build_free_group_coding(2).unwrap();
        let w = weights_from_homomorphism(&c, &hom(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])])).unwrap();
        assert_eq!(w.dim(), 2);
        assert_eq!(w.value(edge_into(&c, "a", "B")), &[0.0, -1.0]);
        let w = weights_from_homomorphism(&c, &hom(&[("a", &[1.0]), ("b", &[2f64.sqrt()])])).unwrap();
        assert!(!w.integer_valued());
        assert_eq!(w.lattice_scale(), None);
    }

    #[test]
    fn word_length_path_sums() {
        let c = build_free_group_coding(2).unwrap();
        let w = weights_word_length(&c);
        let p = c.path_for_word(&["a", "b"]).unwrap();
        assert_eq!(path_sum(&w, &p), vec![2.0]);
        assert_eq!(path_sum(&w, &[]), vec![0.0]);
    }

    #[test]
    fn edge_table_coverage() {
        let c = synthetic::two_cycles();
        let mut table: Vec<EdgeValue> = c
            .word_edge_indices()
            .map(|e| {
                let edge = &c.edges()[e];
                EdgeValue {
                    from: c.vertices()[edge.from].clone(),
                    to: c.vertices()[edge.to].clone(),
                    value: vec![0.5],
                }
            })
            .collect();
        let w = weights_from_edge_table(&c, &table).unwrap();
        assert_eq!(w.lattice_scale(), Some(2));
        assert!(!w.integer_valued());
        let removed = table.pop().unwrap();
        let e = weights_from_edge_table(&c, &table).unwrap_err().to_string();
        assert!(e.contains(&format!("{} -> {}", removed.from, removed.to)), "{e}");
    }

    #[test]
    fn recenter_word_length_is_zero() {
        let c = build_free_group_coding(2).unwrap();
        let w = weights_word_length(&c);
        let r = recenter(&w, &[1.0], &c).unwrap();
        assert!((0..r.edge_count()).all(|e| r.value(e) == [0.0]));
        assert_eq!(r.origin(), WeightOrigin::Recentered);
        assert!(recenter(&w, &[1.0, 2.0], &c).is_err());
        let back = recenter(&r, &[-1.0], &c).unwrap();
        assert!(differing_edges(&back, &w).is_empty());
    }

    #[test]
    fn indicator_weights() {
        let c = build_free_group_coding(2).unwrap();
        let w = weights_vertex_indicator(&c, "a").unwrap();
        let p = c.path_for_word(&["a", "a", "b", "a"]).unwrap();
        assert_eq!(path_sum(&w, &p), vec![3.0]);
        assert!(weights_vertex_indicator(&c, "0").is_err());
    }

    #[test]
    fn weights_document() {
        let c = build_free_group_coding(2).unwrap();
        let w = load_weights(&c, r#"{"dim":1,"by_generator":{"a":[1],"b":[0]}}"#).unwrap();
        assert_eq!(w.value(edge_into(&c, "*", "A")), &[-1.0]);
        let t = r#"{"dim":1,"by_edge":[{"from":"*","to":"a","value":[1]}]}"#;
        assert!(matches!(load_weights(&c, t), Err(Error::InvalidArgument(_))));
        assert!(matches!(load_weights(&c, r#"{"dim":1}"#), Err(Error::Parse { .. })));
        assert!(matches!(
            load_weights(&c, r#"{"dim":2,"by_generator":{"a":[1],"b":[0]}}"#),
            Err(Error::Validation(_))
        ));
    }
}
