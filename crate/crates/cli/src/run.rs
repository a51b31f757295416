//! Executes a validated configuration.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use hypstat_core::coding::{decompose_components, growth_rate, validate_coding, ComponentDecomposition, MarkovCoding};
use hypstat_core::enumerate::{distribution, distribution_overcounted};
use hypstat_core::limits::{
    averaging_table, berry_esseen_bound, clt_distance, default_cells, degeneracy_check, fmt_float, ldt_rate,
    llt_check, mclt_check, LimitLawReport,
};
use hypstat_core::spectral::{
    component_consistency, default_lattice_grid, lattice_scan, pressure_curve, statistics, LimitStatistics,
};
use hypstat_core::weights::WeightAssignment;

use crate::args::{RunConfig, Task};
use crate::CliError;

/// Result of one command in every output format.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub json: Value,
    pub csv: String,
    pub text: String,
    pub passed: bool,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result serializes")
}

fn envelope(task: &Task, result: Value) -> Value {
    json!({
        "command": task.name(),
        "result": result,
        "meta": {
            "tool": "hypstat",
            "version": env!("CARGO_PKG_VERSION"),
        },
    })
}

fn from_report(task: &Task, report: &LimitLawReport) -> Outcome {
    Outcome {
        json: envelope(task, to_value(report)),
        csv: report.to_csv(),
        text: report.to_text(),
        passed: report.passed,
    }
}

struct Loaded {
    coding: MarkovCoding,
    dec: ComponentDecomposition,
    weights: WeightAssignment,
}

fn load(config: &RunConfig) -> Result<Loaded, CliError> {
    let coding = config.coding.load()?;
    let dec = decompose_components(&coding)?;
    let weights = config
        .weights
        .as_ref()
        .ok_or_else(|| CliError::Usage("this command needs --weights".into()))?
        .load(&coding)?;
    Ok(Loaded { coding, dec, weights })
}

fn stats(l: &Loaded) -> Result<LimitStatistics, CliError> {
    Ok(statistics(&l.coding, &l.dec, &l.weights)?)
}

fn component(dec: &ComponentDecomposition, requested: Option<usize>) -> Result<usize, CliError> {
    let maximal = dec.maximal_indices();
    match requested {
        None => maximal
            .first()
            .copied()
            .ok_or_else(|| CliError::Core(hypstat_core::Error::DegenerateCoding("no maximal component".into()))),
        Some(i) if maximal.contains(&i) => Ok(i),
        Some(i) => Err(CliError::Usage(format!(
            "component {i} is not maximal (maximal: {maximal:?})"
        ))),
    }
}

/// Runs the configured command.
pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    let task = &config.task;
    match task {
        Task::Growth { horizon } => {
            let coding = config.coding.load()?;
            let g = growth_rate(&coding, *horizon)?;
            let mut csv = String::from("n,ratio,root\n");
            for (i, (r, q)) in g.ratio_trace.iter().zip(&g.root_trace).enumerate() {
                let _ = writeln!(csv, "{},{},{}", i + 1, fmt_float(*r), fmt_float(*q));
            }
            let text = format!(
                "lambda             {}\nlambda from counts {}\nentropy            {}\nelementary         {}\nhorizon            {}\n",
                fmt_float(g.lambda),
                fmt_float(g.lambda_from_counts),
                fmt_float(g.entropy),
                g.elementary,
                g.horizon
            );
            Ok(Outcome {
                json: envelope(task, to_value(&g)),
                csv,
                text,
                passed: true,
            })
        }
        Task::Validate { depth } => {
            let coding = config.coding.load()?;
            let v = validate_coding(&coding, *depth)?;
            let mut csv = String::from("n,paths\n");
            for (n, c) in v.path_counts.iter().enumerate() {
                let _ = writeln!(csv, "{n},{c}");
            }
            let mut text = format!("depth  {}\npassed {}\n", v.depth, v.passed);
            if let Some(f) = &v.failure {
                let _ = writeln!(text, "failure {}", serde_json::to_string(f).expect("serializes"));
            }
            Ok(Outcome {
                json: envelope(task, to_value(&v)),
                csv,
                text,
                passed: v.passed,
            })
        }
        Task::Pressure { grid, component: requested } => {
            let l = load(config)?;
            let comp = component(&l.dec, *requested)?;
            let values = pressure_curve(&l.coding, &l.dec, &l.weights, comp, grid)?;
            let mut csv = String::from("s,pressure\n");
            let mut text = format!("component {comp}\n{:>24} {:>24}\n", "s", "pressure");
            for (s, p) in grid.iter().zip(&values) {
                let s: Vec<String> = s.iter().map(|x| fmt_float(*x)).collect();
                let _ = writeln!(csv, "{},{}", s.join("|"), fmt_float(*p));
                let _ = writeln!(text, "{:>24} {:>24}", s.join("|"), fmt_float(*p));
            }
            let points: Vec<Value> = grid
                .iter()
                .zip(&values)
                .map(|(s, p)| json!({ "s": s, "pressure": p }))
                .collect();
            Ok(Outcome {
                json: envelope(task, json!({ "component": comp, "points": points })),
                csv,
                text,
                passed: true,
            })
        }
        Task::Stats => {
            let l = load(config)?;
            let st = stats(&l)?;
            let consistency = component_consistency(&l.coding, &l.dec, &l.weights)?;
            let mut text = format!(
                "lambda      {}\nentropy     {}\ndrift       {:?}\ncovariance  {:?}\npositive definite {}\ndegenerate  {}\nconsistent  {}\n",
                fmt_float(st.lambda),
                fmt_float(st.entropy),
                st.drift,
                st.covariance,
                st.positive_definite,
                st.degenerate,
                consistency.consistent
            );
            if let Some(v) = st.variance {
                let _ = writeln!(text, "variance    {}", fmt_float(v));
            }
            let mut csv = String::from("coordinate,drift,drift_finite_difference\n");
            for (i, (d, f)) in st.drift.iter().zip(&st.drift_finite_difference).enumerate() {
                let _ = writeln!(csv, "{},{},{}", i + 1, fmt_float(*d), fmt_float(*f));
            }
            Ok(Outcome {
                json: envelope(task, json!({ "statistics": to_value(&st), "consistency": to_value(&consistency) })),
                csv,
                text,
                passed: consistency.consistent,
            })
        }
        Task::Dist { n, bin, overcount } => {
            let l = load(config)?;
            let d = if *overcount {
                distribution_overcounted(&l.coding, &l.dec, &l.weights, *n, *bin)?
            } else {
                distribution(&l.coding, &l.weights, *n, *bin)?
            };
            let csv = d.to_csv();
            Ok(Outcome {
                json: envelope(task, to_value(&d)),
                text: csv.clone(),
                csv,
                passed: true,
            })
        }
        Task::Averaging { ngrid } => {
            let l = load(config)?;
            let st = stats(&l)?;
            Ok(from_report(task, &averaging_table(&l.coding, &l.weights, &st, ngrid)?))
        }
        Task::Clt { ngrid } => {
            let l = load(config)?;
            let st = stats(&l)?;
            Ok(from_report(task, &clt_distance(&l.coding, &l.dec, &l.weights, &st, ngrid)?))
        }
        Task::BerryEsseen { n, t_max } => {
            let l = load(config)?;
            let st = stats(&l)?;
            let b = berry_esseen_bound(&l.coding, &l.dec, &l.weights, &st, *n, *t_max)?;
            let report = b.to_report(&st);
            let mut out = from_report(task, &report);
            out.json = envelope(task, json!({ "bound": to_value(&b), "report": to_value(&report) }));
            Ok(out)
        }
        Task::Ldt { epsilon, ngrid, tgrid } => {
            let l = load(config)?;
            let st = stats(&l)?;
            let r = ldt_rate(&l.coding, &l.dec, &l.weights, &st, *epsilon, ngrid, tgrid.as_deref())?;
            Ok(from_report(task, &r))
        }
        Task::Mclt { ngrid, cells } => {
            let l = load(config)?;
            let st = stats(&l)?;
            let cells = cells.clone().unwrap_or_else(default_cells);
            Ok(from_report(task, &mclt_check(&l.coding, &l.dec, &l.weights, &st, ngrid, &cells)?))
        }
        Task::Llt { a, b, ngrid } => {
            let l = load(config)?;
            let st = stats(&l)?;
            Ok(from_report(task, &llt_check(&l.coding, &l.dec, &l.weights, &st, *a, *b, ngrid)?))
        }
        Task::Degeneracy { ncap } => {
            let l = load(config)?;
            let st = stats(&l)?;
            Ok(from_report(task, &degeneracy_check(&l.coding, &l.dec, &l.weights, &st, *ncap)?))
        }
        Task::ScanLattice { tgrid, component: requested } => {
            let l = load(config)?;
            let comp = component(&l.dec, *requested)?;
            let grid = tgrid.clone().unwrap_or_else(default_lattice_grid);
            let scan = lattice_scan(&l.coding, &l.dec, &l.weights, comp, &grid)?;
            let mut csv = String::from("t,radius,gap\n");
            for p in &scan.grid {
                let _ = writeln!(csv, "{},{},{}", fmt_float(p.t), fmt_float(p.radius), fmt_float(p.gap));
            }
            let text = format!(
                "component {comp}\nlattice   {}\nmin gap   {} at t = {}\n{}",
                scan.is_lattice(),
                fmt_float(scan.min_gap),
                fmt_float(scan.min_gap_t),
                match &scan.witness {
                    Some(w) => format!("witness   t = {} gap = {}\n", fmt_float(w.t), fmt_float(w.gap)),
                    None => String::new(),
                }
            );
            Ok(Outcome {
                json: envelope(task, json!({ "component": comp, "lattice": scan.is_lattice(), "scan": to_value(&scan) })),
                csv,
                text,
                passed: true,
            })
        }
    }
}
