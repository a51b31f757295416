//! Small non-group graphs that exercise situations free-group codings never
//! reach: several maximal components, periodic components, transient tails.

use super::{CodingOrigin, EdgeRecord, MarkovCoding};

fn build(name: &str, generators: &[&str], vertices: &[&str], edges: &[(&str, &str, &str)]) -> MarkovCoding {
    MarkovCoding::from_parts(
        generators.iter().map(|s| s.to_string()).collect(),
        vertices.iter().map(|s| s.to_string()).collect(),
        edges
            .iter()
            .map(|(f, t, l)| EdgeRecord {
                from: f.to_string(),
                to: t.to_string(),
                label: l.to_string(),
            })
            .collect(),
        false,
        CodingOrigin::Synthetic { name: name.into() },
    )
    .expect("synthetic coding is well formed")
}

/// Two disjoint 2-cycles `u1 <-> v1` and `u2 <-> v2`, both entered from `*`.
/// Two maximal components of spectral radius 1 and period 2.
pub fn two_cycles() -> MarkovCoding {
    build(
        "two-cycles",
        &["a", "b", "c", "d", "e", "f"],
        &["*", "u1", "v1", "u2", "v2"],
        &[
            ("*", "u1", "a"),
            ("*", "u2", "b"),
            ("u1", "v1", "c"),
            ("v1", "u1", "d"),
            ("u2", "v2", "e"),
            ("v2", "u2", "f"),
        ],
    )
}

/// Two isomorphic maximal components `{p1, q1}` and `{p2, q2}` (complete
/// graphs with loops, spectral radius 2) fed by a transient self-looping
/// vertex `t`. Exactly one length-n path (`x^n`) avoids both components.
pub fn mirror() -> MarkovCoding {
    build(
        "mirror",
        &["x", "a", "b", "c", "d"],
        &["*", "t", "p1", "q1", "p2", "q2"],
        &[
            ("*", "t", "x"),
            ("*", "p1", "a"),
            ("*", "p2", "b"),
            ("t", "t", "x"),
            ("t", "p1", "a"),
            ("t", "p2", "b"),
            ("p1", "p1", "a"),
            ("p1", "q1", "c"),
            ("q1", "p1", "a"),
            ("q1", "q1", "c"),
            ("p2", "p2", "b"),
            ("p2", "q2", "d"),
            ("q2", "p2", "b"),
            ("q2", "q2", "d"),
        ],
    )
}

/// A transient tail `* -> t1 -> t2 -> t3` feeding one maximal component
/// `{p, q}` (complete with loops). Paths avoiding the component exist only
/// up to length 3.
pub fn tail() -> MarkovCoding {
    build(
        "tail",
        &["x", "a", "b"],
        &["*", "t1", "t2", "t3", "p", "q"],
        &[
            ("*", "t1", "x"),
            ("*", "p", "a"),
            ("*", "q", "b"),
            ("t1", "t2", "x"),
            ("t2", "t3", "x"),
            ("t3", "p", "a"),
            ("p", "p", "a"),
            ("p", "q", "b"),
            ("q", "p", "a"),
            ("q", "q", "b"),
        ],
    )
}

/// Looks up a synthetic coding by name.
pub fn by_name(name: &str) -> Option<MarkovCoding> {
    match name {
        "two-cycles" => Some(two_cycles()),
        "mirror" => Some(mirror()),
        "tail" => Some(tail()),
        _ => None,
    }
}
