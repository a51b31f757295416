//! Word counts, growth rate and path-to-word injectivity checks.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{decompose_components, CodingOrigin, MarkovCoding};
use crate::bigutil::ratio;
use crate::error::{Error, Result};

/// Largest number of label paths the direct enumerations will visit.
pub const PATH_LIMIT: u64 = 10_000_000;
/// Agreement required between the spectral and count-ratio growth rates.
pub const GROWTH_AGREEMENT: f64 = 1e-6;

/// `#W_n` for `n = 0..=max_n`: the number of length-n paths from `*`
/// avoiding the zero vertex.
pub(crate) fn word_counts(coding: &MarkovCoding, max_n: usize) -> Vec<BigUint> {
    let nv = coding.vertices().len();
    let mut cur = vec![BigUint::zero(); nv];
    cur[coding.start()] = BigUint::one();
    let mut out = Vec::with_capacity(max_n + 1);
    out.push(BigUint::one());
    for _ in 0..max_n {
        let mut next = vec![BigUint::zero(); nv];
        for (v, c) in cur.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for &e in coding.word_edges(v) {
                next[coding.edges()[e].to] += c;
            }
        }
        out.push(next.iter().sum());
        cur = next;
    }
    out
}

/// Exact `#W_n`.
pub fn count_words(coding: &MarkovCoding, n: usize) -> BigUint {
    word_counts(coding, n).pop().unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// Spectral radius of `B`.
    pub lambda: f64,
    /// `(#W_H / #W_{H-p})^{1/p}` with `p` the lcm of the maximal periods.
    pub lambda_from_counts: f64,
    pub entropy: f64,
    pub elementary: bool,
    pub horizon: usize,
    /// `#W_{n+1} / #W_n` for `n = 1..horizon`.
    pub ratio_trace: Vec<f64>,
    /// `#W_n^{1/n}` for `n = 1..=horizon`.
    pub root_trace: Vec<f64>,
}

/// Growth rate of `#W_n` estimated spectrally and from exact counts.
pub fn growth_rate(coding: &MarkovCoding, horizon: usize) -> Result<GrowthReport> {
    if horizon < 8 {
        return Err(Error::invalid("growth horizon must be at least 8"));
    }
    let dec = decompose_components(coding)?;
    let period = dec
        .components
        .iter()
        .filter(|c| c.maximal)
        .filter_map(|c| c.period)
        .fold(1usize, |acc, p| acc.lcm(&p));
    let counts = word_counts(coding, horizon);
    let ratio_trace: Vec<f64> = (1..horizon)
        .map(|n| ratio(&counts[n + 1], &counts[n]))
        .collect();
    let root_trace = (1..=horizon)
        .map(|n| {
            let bits = counts[n].bits();
            // log of a big integer through its top 64 bits
            let shift = bits.saturating_sub(64);
            let top = (&counts[n] >> shift).to_f64().unwrap_or(0.0);
            ((top.ln() + shift as f64 * std::f64::consts::LN_2) / n as f64).exp()
        })
        .collect();
    let lambda_from_counts = if period <= horizon {
        ratio(&counts[horizon], &counts[horizon - period]).powf(1.0 / period as f64)
    } else {
        f64::NAN
    };
    let elementary = dec.elementary || coding.elementary();
    if coding.is_group()
        && (lambda_from_counts - dec.lambda).abs() > GROWTH_AGREEMENT * dec.lambda
    {
        return Err(Error::Inconsistent {
            spectral: dec.lambda,
            ratio: lambda_from_counts,
        });
    }
    Ok(GrowthReport {
        lambda: dec.lambda,
        lambda_from_counts,
        entropy: dec.entropy,
        elementary,
        horizon,
        ratio_trace,
        root_trace,
    })
}

/// Two distinct paths with the same label string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BijectionFailure {
    pub depth: usize,
    pub word: String,
    pub first: Vec<String>,
    pub second: Vec<String>,
}

/// Path count versus an independent reduced-word enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCount {
    pub n: usize,
    pub paths: u64,
    pub reduced_words: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub depth: usize,
    /// Number of label paths from `*` at each depth `0..=depth`.
    pub path_counts: Vec<u64>,
    pub failure: Option<BijectionFailure>,
    pub oracle: Vec<OracleCount>,
    pub passed: bool,
}

struct Injectivity<'a> {
    coding: &'a MarkovCoding,
    seen: HashMap<Vec<usize>, Vec<usize>>,
    labels: Vec<usize>,
    vertices: Vec<usize>,
    counts: Vec<u64>,
    failure: Option<BijectionFailure>,
}

impl Injectivity<'_> {
    fn walk(&mut self, v: usize, depth: usize, max_depth: usize) {
        if self.failure.is_some() {
            return;
        }
        self.counts[depth] += 1;
        if depth > 0 {
            if let Some(prev) = self.seen.get(&self.labels) {
                let names = |p: &[usize]| {
                    p.iter()
                        .map(|&x| self.coding.vertices()[x].clone())
                        .collect::<Vec<_>>()
                };
                self.failure = Some(BijectionFailure {
                    depth,
                    word: self.coding.word_string(&self.labels),
                    first: names(prev),
                    second: names(&self.vertices),
                });
                return;
            }
            self.seen.insert(self.labels.clone(), self.vertices.clone());
        }
        if depth == max_depth {
            return;
        }
        let coding = self.coding;
        for &e in coding.word_edges(v) {
            let edge = &coding.edges()[e];
            self.labels.push(edge.label.expect("word edges are labeled"));
            self.vertices.push(edge.to);
            self.walk(edge.to, depth + 1, max_depth);
            self.labels.pop();
            self.vertices.pop();
        }
    }
}

/// Counts freely reduced words of length `n` over `rank` letter pairs by
/// scanning every string; independent of any coding.
fn reduced_word_count(rank: usize, n: usize) -> Option<u64> {
    let letters = 2 * rank as u64;
    let total = letters.checked_pow(n as u32)?;
    if total > PATH_LIMIT {
        return None;
    }
    let mut count = 0;
    let mut digits = vec![0u64; n];
    for _ in 0..total {
        if digits.windows(2).all(|w| w[0] / 2 != w[1] / 2 || w[0] == w[1]) {
            count += 1;
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < letters {
                break;
            }
            *d = 0;
        }
    }
    Some(count)
}

/// Checks that distinct paths from `*` carry distinct label strings up to
/// `depth`, and for built-in free-group codings that path counts match an
/// enumeration of reduced words.
pub fn validate_coding(coding: &MarkovCoding, depth: usize) -> Result<ValidationReport> {
    let counts = word_counts(coding, depth);
    let total: BigUint = counts.iter().sum();
    if total > BigUint::from(PATH_LIMIT) {
        return Err(Error::Resource(format!(
            "{total} label paths up to depth {depth} exceed the enumeration limit {PATH_LIMIT}"
        )));
    }
    let mut inj = Injectivity {
        coding,
        seen: HashMap::new(),
        labels: Vec::new(),
        vertices: vec![coding.start()],
        counts: vec![0; depth + 1],
        failure: None,
    };
    inj.walk(coding.start(), 0, depth);

    let mut oracle = Vec::new();
    if let CodingOrigin::FreeGroup { rank } = coding.origin() {
        for n in 1..=depth {
            if let Some(words) = reduced_word_count(*rank, n) {
                oracle.push(OracleCount {
                    n,
                    paths: counts[n].to_u64().unwrap_or(u64::MAX),
                    reduced_words: words,
                });
            }
        }
    }
    let passed = inj.failure.is_none() && oracle.iter().all(|o| o.paths == o.reduced_words);
    Ok(ValidationReport {
        depth,
        path_counts: counts.iter().map(|c| c.to_u64().unwrap_or(u64::MAX)).collect(),
        failure: inj.failure,
        oracle,
        passed,
    })
}
