use std::path::{Path, PathBuf};

use clap::Args;

use cdfbound::bounds_engine::{default_grid, DEFAULT_GRID_POINTS};
use cdfbound::model::{FeedforwardNetwork, InputDistribution};
use cdfbound::pdf_bounds::DEFAULT_VERTEX_BUDGET;

use crate::Failure;

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Network JSON file.
    #[arg(long)]
    pub net: PathBuf,
    /// Input distribution JSON file.
    #[arg(long)]
    pub dist: PathBuf,
    /// Output component to analyse (required for multi-output networks).
    #[arg(long)]
    pub component: Option<usize>,
    /// Number of evenly spaced grid points across the IBP output range.
    #[arg(long, conflicts_with = "grid_file")]
    pub grid: Option<usize>,
    /// File with one grid value per line.
    #[arg(long)]
    pub grid_file: Option<PathBuf>,
    /// Segments per curvature region of every smooth activation.
    #[arg(long, default_value_t = 5)]
    pub segments: usize,
    /// Maximum number of partition vertices for pdf bounds.
    #[arg(long, default_value_t = DEFAULT_VERTEX_BUDGET)]
    pub vertex_budget: usize,
    /// Initial Kuhn grid cells per axis for pdf bounds.
    #[arg(long)]
    pub cells_per_axis: Option<usize>,
    /// Monte-Carlo sample count for a reference column.
    #[arg(long)]
    pub mc: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path (CSV, or prefix for approx-net); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct PdfCurveArgs {
    /// CSV with a `y` column and a cdf column.
    #[arg(long)]
    pub cdf: PathBuf,
    /// Name of the cdf column; defaults to `cdf`, else the second column.
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub struct RunConfig {
    pub net: FeedforwardNetwork,
    pub dist: InputDistribution,
    pub component: usize,
    pub grid: Vec<f64>,
}

pub fn init_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Internal(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn read_grid_file(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let grid = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::Config(format!("grid value `{l}` is not a finite number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if grid.is_empty() || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Failure::Config("grid file must list nondecreasing values".into()));
    }
    Ok(grid)
}

pub fn load(args: &CommonArgs) -> Result<RunConfig, Failure> {
    init_threads(args.threads)?;
    if args.segments == 0 {
        return Err(Failure::Config("--segments must be positive".into()));
    }
    if args.mc == Some(0) {
        return Err(Failure::Config("--mc must be positive".into()));
    }
    let net = FeedforwardNetwork::load(&args.net)?;
    let dist = InputDistribution::load(&args.dist)?;
    if dist.dim() != net.input_dim() {
        return Err(Failure::Config(format!(
            "distribution has dimension {}, network expects {}",
            dist.dim(),
            net.input_dim()
        )));
    }
    let component = match args.component {
        Some(k) if k < net.output_dim() => k,
        Some(k) => {
            return Err(Failure::Config(format!(
                "component {k} out of range for {} outputs",
                net.output_dim()
            )))
        }
        None if net.output_dim() == 1 => 0,
        None => {
            return Err(Failure::Config(format!(
                "network has {} outputs; pass --component",
                net.output_dim()
            )))
        }
    };
    let grid = match (&args.grid_file, args.grid) {
        (Some(path), _) => read_grid_file(path)?,
        (None, Some(0)) => return Err(Failure::Config("--grid must be positive".into())),
        (None, n) => default_grid(&net, &dist.support(), component, n.unwrap_or(DEFAULT_GRID_POINTS))?,
    };
    Ok(RunConfig {
        net,
        dist,
        component,
        grid,
    })
}
