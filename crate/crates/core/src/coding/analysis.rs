//! Irreducible components of the coding graph, their Perron roots,
//! periods and maximality.

use nalgebra::DMatrix;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use super::MarkovCoding;
use crate::error::{Error, Result};
use crate::perron::perron_right;

/// Relative tolerance for calling a component maximal.
pub const MAXIMAL_TOLERANCE: f64 = 1e-9;

/// One strongly connected component of `B` (the graph without `*` and `0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Vertex indices of the coding, ascending.
    pub vertices: Vec<usize>,
    /// Perron root of the component's 0/1 matrix; 0 for a trivial component.
    pub spectral_radius: f64,
    pub maximal: bool,
    /// gcd of cycle lengths; `None` for a trivial component (no cycle).
    pub period: Option<usize>,
}

impl Component {
    pub fn is_trivial(&self) -> bool {
        self.period.is_none()
    }
}

/// Components in reverse topological order of the condensation (edges only
/// run from later components to earlier ones), plus the growth data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDecomposition {
    pub components: Vec<Component>,
    pub lambda: f64,
    pub entropy: f64,
    pub elementary: bool,
    /// For each maximal component (by component index), the vertex set of
    /// `C_i`: all reachable inner vertices except those of the other maximal
    /// components.
    pub masks: Vec<(usize, Vec<usize>)>,
    /// Reachable inner vertices outside every maximal component.
    pub outside_maximal: Vec<usize>,
}

impl ComponentDecomposition {
    pub fn maximal_indices(&self) -> Vec<usize> {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.maximal)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn maximal_count(&self) -> usize {
        self.components.iter().filter(|c| c.maximal).count()
    }

    /// Vertex mask of `C_i` for maximal component `i`.
    pub fn mask(&self, component: usize) -> Result<&[usize]> {
        self.masks
            .iter()
            .find(|(i, _)| *i == component)
            .map(|(_, m)| m.as_slice())
            .ok_or_else(|| {
                Error::invalid(format!("component {component} is not a maximal component"))
            })
    }
}

/// Tarjan's algorithm restricted to `allowed` vertices.
struct Tarjan<'a> {
    succ: &'a [Vec<usize>],
    index: Vec<Option<usize>>,
    low: Vec<usize>,
    on_stack: Vec<bool>,
    stack: Vec<usize>,
    next: usize,
    out: Vec<Vec<usize>>,
}

impl Tarjan<'_> {
    fn visit(&mut self, v: usize) {
        self.index[v] = Some(self.next);
        self.low[v] = self.next;
        self.next += 1;
        self.stack.push(v);
        self.on_stack[v] = true;
        for &w in &self.succ[v] {
            match self.index[w] {
                None => {
                    self.visit(w);
                    self.low[v] = self.low[v].min(self.low[w]);
                }
                Some(iw) if self.on_stack[w] => self.low[v] = self.low[v].min(iw),
                _ => {}
            }
        }
        if Some(self.low[v]) == self.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = self.stack.pop().unwrap();
                self.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            self.out.push(comp);
        }
    }
}

fn reachable_inner(coding: &MarkovCoding) -> Vec<bool> {
    let n = coding.vertices().len();
    let mut seen = vec![false; n];
    let mut stack = vec![coding.start()];
    seen[coding.start()] = true;
    while let Some(v) = stack.pop() {
        for &e in coding.word_edges(v) {
            let w = coding.edges()[e].to;
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen[coding.start()] = false;
    seen[coding.zero()] = false;
    seen
}

/// Period by BFS levels: the gcd of `level(u) + 1 - level(v)` over the
/// component's internal edges.
fn bfs_period(succ: &[Vec<usize>], members: &[usize], in_comp: &[bool]) -> Option<usize> {
    let root = members[0];
    let mut level = vec![usize::MAX; succ.len()];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    let mut g = 0usize;
    let mut has_edge = false;
    while let Some(u) = queue.pop_front() {
        for &v in &succ[u] {
            if !in_comp[v] {
                continue;
            }
            has_edge = true;
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                let d = (level[u] + 1).abs_diff(level[v]);
                g = g.gcd(&d);
            }
        }
    }
    if !has_edge {
        return None;
    }
    Some(g)
}

/// Decomposes `B` into irreducible components and classifies them.
pub fn decompose_components(coding: &MarkovCoding) -> Result<ComponentDecomposition> {
    let n = coding.vertices().len();
    let reach = reachable_inner(coding);
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            if !reach[v] {
                return Vec::new();
            }
            coding
                .word_edges(v)
                .iter()
                .map(|&e| coding.edges()[e].to)
                .filter(|&w| reach[w])
                .collect()
        })
        .collect();

    let mut tarjan = Tarjan {
        succ: &succ,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if reach[v] && tarjan.index[v].is_none() {
            tarjan.visit(v);
        }
    }
    let sccs = tarjan.out;

    let mut comp_of = vec![usize::MAX; n];
    for (c, members) in sccs.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let k = sccs.len();
    let mut cond_succ = vec![Vec::new(); k];
    for v in 0..n {
        if !reach[v] {
            continue;
        }
        for &w in &succ[v] {
            let (a, b) = (comp_of[v], comp_of[w]);
            if a != b && !cond_succ[a].contains(&b) {
                cond_succ[a].push(b);
            }
        }
    }

    // Sinks first; among ready components the smallest vertex wins.
    let mut order = Vec::with_capacity(k);
    let mut placed = vec![false; k];
    while order.len() < k {
        let next = (0..k)
            .filter(|&c| !placed[c] && cond_succ[c].iter().all(|&d| placed[d]))
            .min_by_key(|&c| sccs[c][0])
            .expect("condensation is acyclic");
        placed[next] = true;
        order.push(next);
    }

    let mut components = Vec::with_capacity(k);
    for &c in &order {
        let members = &sccs[c];
        let mut in_comp = vec![false; n];
        for &v in members {
            in_comp[v] = true;
        }
        let period = bfs_period(&succ, members, &in_comp);
        let spectral_radius = if period.is_some() {
            let m = members.len();
            let mut mat = DMatrix::zeros(m, m);
            for (i, &u) in members.iter().enumerate() {
                for &w in &succ[u] {
                    if let Some(j) = members.iter().position(|&x| x == w) {
                        mat[(i, j)] = 1.0;
                    }
                }
            }
            perron_right(&mat)?.root
        } else {
            0.0
        };
        components.push(Component {
            vertices: members.clone(),
            spectral_radius,
            maximal: false,
            period,
        });
    }

    let lambda = components
        .iter()
        .map(|c| c.spectral_radius)
        .fold(0.0, f64::max);
    if lambda <= 0.0 {
        return Err(Error::DegenerateCoding(
            "no cycle is reachable from the start vertex, so no component is maximal".into(),
        ));
    }
    for c in &mut components {
        c.maximal = c.spectral_radius >= lambda * (1.0 - MAXIMAL_TOLERANCE);
    }

    // Maximal components must be pairwise unreachable.
    let position: Vec<usize> = {
        let mut p = vec![0; k];
        for (i, &c) in order.iter().enumerate() {
            p[c] = i;
        }
        p
    };
    for (i, &c) in order.iter().enumerate() {
        if !components[i].maximal {
            continue;
        }
        let mut seen = vec![false; k];
        let mut stack = cond_succ[c].clone();
        while let Some(d) = stack.pop() {
            if seen[d] {
                continue;
            }
            seen[d] = true;
            let j = position[d];
            if components[j].maximal {
                return Err(Error::Structure(format!(
                    "a path joins maximal component {i} to maximal component {j}; \
                     maximal components of a group coding are pairwise unreachable"
                )));
            }
            stack.extend(cond_succ[d].iter().copied());
        }
    }

    let reachable: Vec<usize> = (0..n).filter(|&v| reach[v]).collect();
    let mut masks = Vec::new();
    for (i, c) in components.iter().enumerate() {
        if !c.maximal {
            continue;
        }
        let mask = reachable
            .iter()
            .copied()
            .filter(|&v| {
                let owner = &components[position[comp_of[v]]];
                !owner.maximal || position[comp_of[v]] == i
            })
            .collect();
        masks.push((i, mask));
    }
    let outside_maximal = reachable
        .iter()
        .copied()
        .filter(|&v| !components[position[comp_of[v]]].maximal)
        .collect();

    Ok(ComponentDecomposition {
        components,
        lambda,
        entropy: lambda.ln(),
        elementary: lambda <= 1.0 + MAXIMAL_TOLERANCE,
        masks,
        outside_maximal,
    })
}

/// Period of component `index`.
pub fn component_period(decomposition: &ComponentDecomposition, index: usize) -> Result<usize> {
    let c = decomposition
        .components
        .get(index)
        .ok_or_else(|| Error::invalid(format!("no component with index {index}")))?;
    c.period.ok_or(Error::UndefinedPeriod(index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{build_free_group_coding, load_coding, synthetic};

    #[test]
    fn free_two_single_maximal_component() {
        let c = build_free_group_coding(2).unwrap();
        let d = decompose_components(&c).unwrap();
        assert_eq!(d.components.len(), 1);
        let comp = &d.components[0];
        assert_eq!(comp.vertices.len(), 4);
        assert!(comp.maximal);
        assert_eq!(comp.period, Some(1));
        assert!((comp.spectral_radius - 3.0).abs() < 1e-12);
        assert!((d.lambda - 3.0).abs() < 1e-12);
        assert!((d.entropy - 3f64.ln()).abs() < 1e-12);
        assert_eq!(component_period(&d, 0).unwrap(), 1);
        assert!(d.outside_maximal.is_empty());
    }

    #[test]
    fn two_disjoint_two_cycles() {
        let c = synthetic::two_cycles();
        let d = decompose_components(&c).unwrap();
        let max: Vec<_> = d.components.iter().filter(|c| c.maximal).collect();
        assert_eq!(max.len(), 2);
        for m in max {
            assert!((m.spectral_radius - 1.0).abs() < 1e-12);
            assert_eq!(m.period, Some(2));
        }
        assert!(d.elementary);
    }

    #[test]
    fn acyclic_chain_is_degenerate() {
        let doc = r#"{"generators":["a"],"vertices":["*","v"],
            "edges":[{"from":"*","to":"v","label":"a"}]}"#;
        let c = load_coding(doc).unwrap();
        assert!(matches!(
            decompose_components(&c),
            Err(Error::DegenerateCoding(_))
        ));
    }

    #[test]
    fn six_cycle_with_chord_has_period_two() {
        let doc = r#"{"generators":["a"],"vertices":["*","v1","v2","v3","v4","v5","v6"],
            "edges":[{"from":"*","to":"v1","label":"a"},
                     {"from":"v1","to":"v2","label":"a"},{"from":"v2","to":"v3","label":"a"},
                     {"from":"v3","to":"v4","label":"a"},{"from":"v4","to":"v5","label":"a"},
                     {"from":"v5","to":"v6","label":"a"},{"from":"v6","to":"v1","label":"a"},
                     {"from":"v4","to":"v1","label":"a"}]}"#;
        let c = load_coding(doc).unwrap();
        let d = decompose_components(&c).unwrap();
        assert_eq!(d.components.len(), 1);
        assert_eq!(component_period(&d, 0).unwrap(), 2);
    }

    #[test]
    fn trivial_component_has_no_period() {
        let c = synthetic::tail();
        let d = decompose_components(&c).unwrap();
        let trivial = d
            .components
            .iter()
            .position(|c| c.is_trivial())
            .expect("tail vertices are trivial components");
        assert_eq!(component_period(&d, trivial), Err(Error::UndefinedPeriod(trivial)));
    }

    #[test]
    fn reverse_topological_order() {
        // tail: t1 -> t2 -> t3 -> {p, q}; sinks must come first.
        let c = synthetic::tail();
        let d = decompose_components(&c).unwrap();
        let pos = |name: &str| {
            let v = c.vertex_index(name).unwrap();
            d.components.iter().position(|k| k.vertices.contains(&v)).unwrap()
        };
        assert!(pos("p") < pos("t3"));
        assert!(pos("t3") < pos("t2"));
        assert!(pos("t2") < pos("t1"));
    }

    #[test]
    fn connected_maximal_components_rejected() {
        // Two self-loop components joined by an edge.
        let doc = r#"{"generators":["a","b"],"vertices":["*","p","q"],
            "edges":[{"from":"*","to":"p","label":"a"},
                     {"from":"p","to":"p","label":"a"},
                     {"from":"p","to":"q","label":"b"},
                     {"from":"q","to":"q","label":"b"}]}"#;
        let c = load_coding(doc).unwrap();
        assert!(matches!(decompose_components(&c), Err(Error::Structure(_))));
    }

    #[test]
    fn mirror_masks_exclude_other_component() {
        let c = synthetic::mirror();
        let d = decompose_components(&c).unwrap();
        let maxes = d.maximal_indices();
        assert_eq!(maxes.len(), 2);
        let m0 = d.mask(maxes[0]).unwrap();
        let m1 = d.mask(maxes[1]).unwrap();
        let t = c.vertex_index("t").unwrap();
        assert!(m0.contains(&t) && m1.contains(&t));
        for v in &d.components[maxes[1]].vertices {
            assert!(!m0.contains(v));
        }
        assert_eq!(d.outside_maximal, vec![t]);
        assert!(d.mask(d.components.iter().position(|c| !c.maximal).unwrap()).is_err());
    }
}
