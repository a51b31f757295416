//! Parsers for coding, weight, grid and cell specs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use hypstat_core::coding::{build_free_group_coding, load_coding, synthetic, MarkovCoding};
use hypstat_core::limits::Cell;
use hypstat_core::weights::{
    load_weights, weights_from_edge_table, weights_from_homomorphism, weights_vertex_indicator, weights_word_length,
    EdgeValue, WeightAssignment,
};

use crate::CliError;

/// Largest free-group rank accepted by `free:N`.
const MAX_RANK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum CodingSource {
    Free(usize),
    Synthetic(String),
    File(PathBuf),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

impl CodingSource {
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        if let Some(rank) = spec.strip_prefix("free:") {
            let r: usize = rank
                .parse()
                .map_err(|_| usage(format!("free-group rank \"{rank}\" is not a positive integer")))?;
            if r == 0 || r > MAX_RANK {
                return Err(usage(format!("free-group rank must be in 1..={MAX_RANK}")));
            }
            return Ok(CodingSource::Free(r));
        }
        if let Some(name) = spec.strip_prefix("synthetic:") {
            if synthetic::by_name(name).is_none() {
                return Err(usage(format!("unknown synthetic coding \"{name}\"")));
            }
            return Ok(CodingSource::Synthetic(name.to_string()));
        }
        if spec.is_empty() {
            return Err(usage("empty coding spec"));
        }
        Ok(CodingSource::File(PathBuf::from(spec)))
    }

    pub fn load(&self) -> Result<MarkovCoding, CliError> {
        match self {
            CodingSource::Free(r) => Ok(build_free_group_coding(*r)?),
            CodingSource::Synthetic(name) => Ok(synthetic::by_name(name).expect("checked at parse time")),
            CodingSource::File(path) => Ok(load_coding(&read(path)?)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightsSource {
    Homomorphism(BTreeMap<String, Vec<f64>>),
    WordLength,
    Indicator(String),
    EdgeTable(PathBuf),
    File(PathBuf),
}

fn parse_real(s: &str) -> Result<f64, CliError> {
    let x: f64 = s
        .trim()
        .parse()
        .map_err(|_| usage(format!("\"{s}\" is not a number")))?;
    Ok(x)
}

fn parse_finite(s: &str) -> Result<f64, CliError> {
    let x = parse_real(s)?;
    if !x.is_finite() {
        return Err(usage(format!("\"{s}\" is not finite")));
    }
    Ok(x)
}

impl WeightsSource {
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        if spec == "wordlen" {
            return Ok(WeightsSource::WordLength);
        }
        if let Some(body) = spec.strip_prefix("hom:") {
            let mut map = BTreeMap::new();
            let mut dim = None;
            for part in body.split(',') {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| usage(format!("\"{part}\" is not generator=value")))?;
                let k = k.trim();
                if k.is_empty() {
                    return Err(usage("empty generator name"));
                }
                let vals = v.split('|').map(parse_finite).collect::<Result<Vec<_>, _>>()?;
                if *dim.get_or_insert(vals.len()) != vals.len() {
                    return Err(usage("all generator values need the same dimension"));
                }
                if map.insert(k.to_string(), vals).is_some() {
                    return Err(usage(format!("generator \"{k}\" given twice")));
                }
            }
            return Ok(WeightsSource::Homomorphism(map));
        }
        if let Some(v) = spec.strip_prefix("indicator:") {
            if v.is_empty() {
                return Err(usage("indicator needs a vertex name"));
            }
            return Ok(WeightsSource::Indicator(v.to_string()));
        }
        if let Some(p) = spec.strip_prefix("edges:") {
            let p = p
                .strip_prefix('@')
                .ok_or_else(|| usage("edge tables are given as edges:@PATH"))?;
            return Ok(WeightsSource::EdgeTable(PathBuf::from(p)));
        }
        if spec.is_empty() || spec.contains(':') && !std::path::Path::new(spec).exists() {
            return Err(usage(format!("unrecognized weight spec \"{spec}\"")));
        }
        Ok(WeightsSource::File(PathBuf::from(spec)))
    }

    pub fn load(&self, coding: &MarkovCoding) -> Result<WeightAssignment, CliError> {
        match self {
            WeightsSource::Homomorphism(map) => Ok(weights_from_homomorphism(coding, map)?),
            WeightsSource::WordLength => Ok(weights_word_length(coding)),
            WeightsSource::Indicator(v) => Ok(weights_vertex_indicator(coding, v)?),
            WeightsSource::EdgeTable(path) => {
                let table: Vec<EdgeValue> = serde_json::from_str(&read(path)?).map_err(|e| {
                    CliError::Core(hypstat_core::Error::Parse {
                        location: format!("{} line {} column {}", path.display(), e.line(), e.column()),
                        message: e.to_string(),
                    })
                })?;
                Ok(weights_from_edge_table(coding, &table)?)
            }
            WeightsSource::File(path) => Ok(load_weights(coding, &read(path)?)?),
        }
    }
}

fn increasing<T: PartialOrd + Copy>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// `16,36,64`, `25..200` or `10..200:10`; inclusive, strictly increasing,
/// positive.
pub fn parse_grid(spec: &str) -> Result<Vec<usize>, CliError> {
    let int = |s: &str| -> Result<usize, CliError> {
        s.trim()
            .parse()
            .map_err(|_| usage(format!("\"{s}\" is not a nonnegative integer")))
    };
    let grid: Vec<usize> = if let Some((lo, rest)) = spec.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((h, s)) => (int(h)?, int(s)?),
            None => (int(rest)?, 1),
        };
        let lo = int(lo)?;
        if step == 0 || hi < lo {
            return Err(usage(format!("empty or invalid range \"{spec}\"")));
        }
        (lo..=hi).step_by(step).collect()
    } else {
        spec.split(',').map(int).collect::<Result<_, _>>()?
    };
    if grid.is_empty() || grid[0] == 0 || !increasing(&grid) {
        return Err(usage(format!(
            "n-grid \"{spec}\" must be strictly increasing positive integers"
        )));
    }
    Ok(grid)
}

/// A list of reals or `START..STOP:STEP` (inclusive of STOP up to rounding).
pub fn parse_real_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let grid: Vec<f64> = if let Some((lo, rest)) = spec.split_once("..") {
        let (hi, step) = rest
            .split_once(':')
            .ok_or_else(|| usage("real ranges need a step: START..STOP:STEP"))?;
        let (lo, hi, step) = (parse_finite(lo)?, parse_finite(hi)?, parse_finite(step)?);
        if step <= 0.0 || hi < lo {
            return Err(usage(format!("empty or invalid range \"{spec}\"")));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=count).map(|k| lo + step * k as f64).collect()
    } else {
        spec.split(',').map(parse_finite).collect::<Result<_, _>>()?
    };
    if grid.is_empty() || !increasing(&grid) {
        return Err(usage(format!("grid \"{spec}\" must be strictly increasing")));
    }
    Ok(grid)
}

/// Comma-separated points; vector coordinates separated by `|`.
pub fn parse_points(spec: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let pts: Vec<Vec<f64>> = spec
        .split(',')
        .map(|p| p.split('|').map(parse_finite).collect())
        .collect::<Result<_, _>>()?;
    if pts.iter().any(|p| p.len() != pts[0].len()) {
        return Err(usage("all points need the same dimension"));
    }
    Ok(pts)
}

/// `a,b` with `a <= b`.
pub fn parse_interval(spec: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = spec
        .split_once(',')
        .ok_or_else(|| usage(format!("interval \"{spec}\" is not a,b")))?;
    let (a, b) = (parse_finite(a)?, parse_finite(b)?);
    if a > b {
        return Err(usage("interval needs a <= b"));
    }
    Ok((a, b))
}

/// Cells `lo1,lo2,hi1,hi2` separated by `;`; `inf` and `-inf` allowed.
pub fn parse_cells(spec: &str) -> Result<Vec<Cell>, CliError> {
    spec.split(';')
        .map(|c| {
            let v = c.split(',').map(parse_real).collect::<Result<Vec<_>, _>>()?;
            if v.len() != 4 || v.iter().any(|x| x.is_nan()) {
                return Err(usage(format!("cell \"{c}\" is not lo1,lo2,hi1,hi2")));
            }
            if v[0] > v[2] || v[1] > v[3] {
                return Err(usage(format!("cell \"{c}\" has lo > hi")));
            }
            Ok(Cell::new([v[0], v[1]], [v[2], v[3]]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("16,36,64").unwrap(), vec![16, 36, 64]);
        assert_eq!(parse_grid("3..6").unwrap(), vec![3, 4, 5, 6]);
        assert_eq!(parse_grid("10..40:10").unwrap(), vec![10, 20, 30, 40]);
        assert!(parse_grid("5,4").is_err());
        assert!(parse_grid("0,4").is_err());
        assert!(parse_grid("4,4").is_err());
        assert!(parse_grid("x").is_err());
        let g = parse_real_grid("0..2:0.01").unwrap();
        assert_eq!(g.len(), 201);
        assert!((g[200] - 2.0).abs() < 1e-12);
        assert!(parse_real_grid("0..2").is_err());
    }

    #[test]
    fn sources() {
        assert_eq!(CodingSource::parse("free:2").unwrap(), CodingSource::Free(2));
        assert!(CodingSource::parse("free:0").is_err());
        assert!(CodingSource::parse("synthetic:nope").is_err());
        let w = WeightsSource::parse("hom:a=1,b=0").unwrap();
        let WeightsSource::Homomorphism(m) = w else { panic!() };
        assert_eq!(m["a"], vec![1.0]);
        let WeightsSource::Homomorphism(m) = WeightsSource::parse("hom:a=1|0,b=0|1").unwrap() else { panic!() };
        assert_eq!(m["b"], vec![0.0, 1.0]);
        assert!(WeightsSource::parse("hom:a=1|0,b=0").is_err());
        assert!(WeightsSource::parse("hom:a").is_err());
        assert!(WeightsSource::parse("hom:a=x").is_err());
        assert!(WeightsSource::parse("bogus:1").is_err());
        assert_eq!(WeightsSource::parse("wordlen").unwrap(), WeightsSource::WordLength);
    }

    #[test]
    fn cells_and_intervals() {
        assert_eq!(parse_interval("-0.5,0.5").unwrap(), (-0.5, 0.5));
        assert!(parse_interval("1,0").is_err());
        let c = parse_cells("-inf,-inf,0,0;0,0,1,2").unwrap();
        assert_eq!(c.len(), 2);
        assert!(c[0].lo[0].is_infinite());
        assert!(parse_cells("1,2,3").is_err());
    }
}
