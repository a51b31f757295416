//! Command-line grammar and validated run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::specs::{parse_cells, parse_grid, parse_interval, parse_points, parse_real_grid, CodingSource, WeightsSource};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "hypstat",
    version,
    about = "Exact statistics of word-sphere distributions on Markov codings",
    after_help = "Coding specs: free:N | synthetic:NAME (two-cycles, mirror, tail) | PATH to a coding JSON file.\n\
Weight specs: hom:a=1,b=0 (vector values as a=1|0) | wordlen | indicator:VERTEX | edges:@PATH (JSON edge table) | PATH to a weights JSON file.\n\
Grids: 16,36,64 | 25..200 | 10..200:10 (inclusive, strictly increasing).\n\
Exit codes: 0 all criteria passed, 1 some criterion failed, 2 usage error, 3 numerical or validation error.\n\
HYPSTAT_THREADS caps the worker threads."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Coding spec.
    #[arg(long)]
    pub coding: String,
    /// Weight spec.
    #[arg(long)]
    pub weights: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Growth rate and entropy of the word spheres.
    Growth {
        /// Coding spec.
        #[arg(long)]
        coding: String,
        /// Largest sphere used for the count-ratio estimate.
        #[arg(long, default_value_t = 40)]
        horizon: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Pressure of a maximal component along a parameter grid.
    Pressure {
        #[command(flatten)]
        source: Source,
        /// Parameter points, comma separated; vector points as 1|0.
        #[arg(long, default_value = "0")]
        grid: String,
        /// Maximal component index (default: the first).
        #[arg(long)]
        component: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Drift, variance or covariance, and the component consistency check.
    Stats {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        output: Output,
    },
    /// Exact distribution of the weight over the sphere of radius n.
    Dist {
        #[command(flatten)]
        source: Source,
        /// Sphere radius.
        #[arg(long)]
        n: usize,
        /// Bin width for weights not on a rational lattice.
        #[arg(long)]
        bin: Option<f64>,
        /// Overcount paths that avoid every maximal component.
        #[arg(long)]
        overcount: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Exact means against the drift.
    Averaging {
        #[command(flatten)]
        source: Source,
        /// Sphere radii.
        #[arg(long, default_value = "1..100")]
        ngrid: String,
        #[command(flatten)]
        output: Output,
    },
    /// Kolmogorov distance to the Gaussian limit.
    Clt {
        #[command(flatten)]
        source: Source,
        /// Sphere radii.
        #[arg(long, default_value = "16,36,64,100,144,196")]
        ngrid: String,
        #[command(flatten)]
        output: Output,
    },
    /// Smoothing bound on the overcounted distribution.
    BerryEsseen {
        #[command(flatten)]
        source: Source,
        /// Sphere radius.
        #[arg(long)]
        n: usize,
        /// Fourier cutoff T.
        #[arg(long = "t-max")]
        t_max: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Exact tails against the Chernoff bound and the rate function.
    Ldt {
        #[command(flatten)]
        source: Source,
        /// Tail threshold ε on |φ/n − Λ|.
        #[arg(long)]
        epsilon: f64,
        /// Sphere radii.
        #[arg(long, default_value = "1..200")]
        ngrid: String,
        /// Chernoff parameter grid, START..STOP:STEP or a list (default 0..max(2, 2ε/σ²):0.01).
        #[arg(long)]
        tgrid: Option<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Multidimensional central limit check.
    Mclt {
        #[command(flatten)]
        source: Source,
        /// Sphere radii.
        #[arg(long, default_value = "50,100,200")]
        ngrid: String,
        /// Cells as lo1,lo2,hi1,hi2 separated by ';' (inf allowed).
        #[arg(long)]
        cells: Option<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Local limit check on an interval.
    Llt {
        #[command(flatten)]
        source: Source,
        /// Interval a,b (use --interval=-0.5,0.5 for negative bounds).
        #[arg(long)]
        interval: String,
        /// Sphere radii.
        #[arg(long, default_value = "100,200,300")]
        ngrid: String,
        #[command(flatten)]
        output: Output,
    },
    /// Spectral and exact-range degeneracy verdicts.
    Degeneracy {
        #[command(flatten)]
        source: Source,
        /// Largest radius of the exact range sweep.
        #[arg(long, default_value_t = 100)]
        ncap: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Spectral gap of the twisted transfer operator over a frequency grid.
    ScanLattice {
        #[command(flatten)]
        source: Source,
        /// Frequency grid (default 0.1..20:0.05).
        #[arg(long)]
        tgrid: Option<String>,
        /// Maximal component index (default: the first).
        #[arg(long)]
        component: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Bijection check of a coding against word enumeration.
    Validate {
        /// Coding spec.
        #[arg(long)]
        coding: String,
        /// Largest word length enumerated.
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[command(flatten)]
        output: Output,
    },
}

/// Validated parameters of one command.
#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Growth { horizon: usize },
    Pressure { grid: Vec<Vec<f64>>, component: Option<usize> },
    Stats,
    Dist { n: usize, bin: Option<f64>, overcount: bool },
    Averaging { ngrid: Vec<usize> },
    Clt { ngrid: Vec<usize> },
    BerryEsseen { n: usize, t_max: f64 },
    Ldt { epsilon: f64, ngrid: Vec<usize>, tgrid: Option<Vec<f64>> },
    Mclt { ngrid: Vec<usize>, cells: Option<Vec<hypstat_core::limits::Cell>> },
    Llt { a: f64, b: f64, ngrid: Vec<usize> },
    Degeneracy { ncap: usize },
    ScanLattice { tgrid: Option<Vec<f64>>, component: Option<usize> },
    Validate { depth: usize },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Growth { .. } => "growth",
            Task::Pressure { .. } => "pressure",
            Task::Stats => "stats",
            Task::Dist { .. } => "dist",
            Task::Averaging { .. } => "averaging",
            Task::Clt { .. } => "clt",
            Task::BerryEsseen { .. } => "berry-esseen",
            Task::Ldt { .. } => "ldt",
            Task::Mclt { .. } => "mclt",
            Task::Llt { .. } => "llt",
            Task::Degeneracy { .. } => "degeneracy",
            Task::ScanLattice { .. } => "scan-lattice",
            Task::Validate { .. } => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub coding: CodingSource,
    pub weights: Option<WeightsSource>,
    pub task: Task,
    pub format: Format,
    pub out: Option<PathBuf>,
}

fn positive(x: f64, what: &str) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Usage(format!("{what} must be positive and finite")))
    }
}

/// Parses and validates an argument vector (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Clap)?;
    let with_source = |source: Source, task: Task, output: Output| -> Result<RunConfig, CliError> {
        Ok(RunConfig {
            coding: CodingSource::parse(&source.coding)?,
            weights: Some(WeightsSource::parse(&source.weights)?),
            task,
            format: output.format,
            out: output.out,
        })
    };
    match cli.command {
        Command::Growth { coding, horizon, output } => Ok(RunConfig {
            coding: CodingSource::parse(&coding)?,
            weights: None,
            task: Task::Growth { horizon },
            format: output.format,
            out: output.out,
        }),
        Command::Validate { coding, depth, output } => Ok(RunConfig {
            coding: CodingSource::parse(&coding)?,
            weights: None,
            task: Task::Validate { depth },
            format: output.format,
            out: output.out,
        }),
        Command::Pressure { source, grid, component, output } => {
            let grid = parse_points(&grid)?;
            with_source(source, Task::Pressure { grid, component }, output)
        }
        Command::Stats { source, output } => with_source(source, Task::Stats, output),
        Command::Dist { source, n, bin, overcount, output } => {
            let bin = bin.map(|b| positive(b, "bin width")).transpose()?;
            with_source(source, Task::Dist { n, bin, overcount }, output)
        }
        Command::Averaging { source, ngrid, output } => {
            with_source(source, Task::Averaging { ngrid: parse_grid(&ngrid)? }, output)
        }
        Command::Clt { source, ngrid, output } => with_source(source, Task::Clt { ngrid: parse_grid(&ngrid)? }, output),
        Command::BerryEsseen { source, n, t_max, output } => {
            if n == 0 {
                return Err(CliError::Usage("n must be positive".into()));
            }
            let t_max = positive(t_max, "T")?;
            with_source(source, Task::BerryEsseen { n, t_max }, output)
        }
        Command::Ldt { source, epsilon, ngrid, tgrid, output } => {
            let epsilon = positive(epsilon, "epsilon")?;
            let tgrid = tgrid.map(|g| parse_real_grid(&g)).transpose()?;
            with_source(source, Task::Ldt { epsilon, ngrid: parse_grid(&ngrid)?, tgrid }, output)
        }
        Command::Mclt { source, ngrid, cells, output } => {
            let cells = cells.map(|c| parse_cells(&c)).transpose()?;
            with_source(source, Task::Mclt { ngrid: parse_grid(&ngrid)?, cells }, output)
        }
        Command::Llt { source, interval, ngrid, output } => {
            let (a, b) = parse_interval(&interval)?;
            with_source(source, Task::Llt { a, b, ngrid: parse_grid(&ngrid)? }, output)
        }
        Command::Degeneracy { source, ncap, output } => {
            if ncap < 2 {
                return Err(CliError::Usage("ncap must be at least 2".into()));
            }
            with_source(source, Task::Degeneracy { ncap }, output)
        }
        Command::ScanLattice { source, tgrid, component, output } => {
            let tgrid = tgrid.map(|g| parse_real_grid(&g)).transpose()?;
            with_source(source, Task::ScanLattice { tgrid, component }, output)
        }
    }
}
