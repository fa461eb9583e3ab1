use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use serde_json::json;

use cdfbound::bounds_engine::{cdf_bounds, mc_samples, oob_tally_with_margin, BoundsOptions, EmpiricalCdf};
use cdfbound::exact_cdf::PieceSet;
use cdfbound::regions::{PlNetwork, DEFAULT_CELL_BUDGET};
use cdfbound::relu_bounding::bound_network;

use crate::config::{init_threads, load, CommonArgs, PdfCurveArgs, RunConfig};
use crate::Failure;

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p).map_err(|e| io_failure(p, e))?)),
        None => Box::new(io::BufWriter::new(io::stdout())),
    })
}

fn write_rows(path: Option<&Path>, header: &[&str], rows: &[Vec<f64>]) -> Result<(), Failure> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(output(path)?);
    let fail = |e: csv::Error| Failure::Config(format!("writing csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string())).map_err(fail)?;
    }
    w.flush().map_err(|e| Failure::Config(format!("writing csv: {e}")))
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn mc_reference(cfg: &RunConfig, n: Option<usize>, seed: u64) -> Result<Option<EmpiricalCdf>, Failure> {
    n.map(|n| mc_samples(&cfg.net, &cfg.dist, n, seed, cfg.component))
        .transpose()
        .map_err(Failure::from)
}

pub fn exact_cdf(args: &CommonArgs) -> Result<(), Failure> {
    let cfg = load(args)?;
    if !cfg.net.is_piecewise_linear() {
        return Err(Failure::Config(
            "exact-cdf needs a ReLU/identity network: non-ReLU activation found".into(),
        ));
    }
    let pdf = cfg.dist.pdf_as_piecewise_polynomial().ok_or_else(|| {
        Failure::Config("exact-cdf needs a piecewise-polynomial input density".into())
    })?;
    let net = cfg.net.select_outputs(&[cfg.component])?;
    let pl = PlNetwork::from_feedforward(&net)?;
    let set = PieceSet::from_network(&pl, &pdf, 10 * DEFAULT_CELL_BUDGET)?;
    let ys: Vec<Vec<f64>> = cfg.grid.iter().map(|&y| vec![y]).collect();
    let values = set.cdf_curve(&ys)?;
    let mc = mc_reference(&cfg, args.mc, args.seed)?;
    let rows: Vec<Vec<f64>> = cfg
        .grid
        .iter()
        .zip(&values)
        .map(|(&y, &f)| {
            let mut r = vec![y, f];
            if let Some(m) = &mc {
                r.push(m.eval(y));
            }
            r
        })
        .collect();
    let header: &[&str] = if mc.is_some() { &["y", "cdf", "mc"] } else { &["y", "cdf"] };
    write_rows(args.out.as_deref(), header, &rows)
}

pub fn bound_cdf(args: &CommonArgs) -> Result<(), Failure> {
    let cfg = load(args)?;
    let opts = BoundsOptions {
        segments_per_region: args.segments,
        vertex_budget: args.vertex_budget,
        cells_per_axis: args.cells_per_axis,
        output: Some(cfg.component),
        ..Default::default()
    };
    let bounds = cdf_bounds(&cfg.net, &cfg.dist, &cfg.grid, &opts)?;
    check_bounds(&bounds.lower, &bounds.upper)?;
    let mc = mc_reference(&cfg, args.mc, args.seed)?;
    let mc_values = mc.as_ref().map(|m| m.eval_grid(&cfg.grid));
    let (mean, std) = bounds.gap_stats();
    let mut meta = json!({
        "network": args.net.display().to_string(),
        "distribution": args.dist.display().to_string(),
        "grid_points": cfg.grid.len(),
        "gap_mean": mean,
        "gap_std": std,
        "gap_max": bounds.max_gap(),
        "ul_dist": format!("{mean:.4} ({std:.4})"),
        "bounds": bounds.metadata,
    });
    if let (Some(m), Some(values)) = (&mc, &mc_values) {
        let est: Vec<(f64, f64)> = cfg.grid.iter().copied().zip(values.iter().copied()).collect();
        let strict = oob_tally_with_margin(&bounds, &est, 0.0)?;
        let dkw = oob_tally_with_margin(&bounds, &est, m.half_width())?;
        meta["mc"] = json!({
            "samples": m.len(),
            "seed": args.seed,
            "dkw_half_width": m.half_width(),
            "oob": strict,
            "oob_beyond_dkw": dkw,
        });
    }
    let mut sink = output(args.out.as_deref())?;
    bounds.write_csv(&mut sink, mc_values.as_deref())?;
    sink.flush().map_err(|e| Failure::Config(format!("writing csv: {e}")))?;
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Failure::Internal(e.to_string()))?;
    match &args.out {
        Some(p) => {
            let side = sidecar(p);
            std::fs::write(&side, text).map_err(|e| io_failure(&side, e))?;
        }
        None => eprintln!("{text}"),
    }
    Ok(())
}

fn check_bounds(lower: &[f64], upper: &[f64]) -> Result<(), Failure> {
    for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
        if !(0.0 <= *l && l <= u && *u <= 1.0) {
            return Err(Failure::Internal(format!(
                "bounds out of order at grid point {i}: lower {l}, upper {u}"
            )));
        }
    }
    Ok(())
}

pub fn approx_net(args: &CommonArgs) -> Result<(), Failure> {
    init_threads(args.threads)?;
    if args.segments == 0 {
        return Err(Failure::Config("--segments must be positive".into()));
    }
    let net = cdfbound::model::FeedforwardNetwork::load(&args.net)?;
    let dist = cdfbound::model::InputDistribution::load(&args.dist)?;
    let domain = dist.support();
    let pair = bound_network(&net, &domain, args.segments)?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..domain.dim())
            .map(|i| rng.random_range(domain.lower[i]..=domain.upper[i]))
            .collect();
        let y = net.eval(&x);
        let (u, l) = (pair.upper.eval(&x), pair.lower.eval(&x));
        for k in 0..y.len() {
            let tol = 1e-9 * (1.0 + y[k].abs());
            if !(l[k] <= y[k] + tol && y[k] <= u[k] + tol) {
                return Err(Failure::Internal(format!(
                    "sandwich violated at {x:?}, output {k}: {} ≤ {} ≤ {}",
                    l[k], y[k], u[k]
                )));
            }
        }
    }

    let prefix = args.out.clone().unwrap_or_else(|| PathBuf::from("approx"));
    let stem = prefix.display().to_string();
    for (suffix, network) in [("upper", &pair.upper), ("lower", &pair.lower)] {
        let path = PathBuf::from(format!("{stem}_{suffix}.json"));
        network.save(&path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

pub fn pdf_curve(args: &PdfCurveArgs) -> Result<(), Failure> {
    let mut reader = csv::Reader::from_path(&args.cdf).map_err(|e| io_failure(&args.cdf, e))?;
    let headers = reader.headers().map_err(|e| io_failure(&args.cdf, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let y_col = find("y").ok_or_else(|| Failure::Config("cdf csv has no `y` column".into()))?;
    let f_col = match &args.column {
        Some(c) => find(c).ok_or_else(|| Failure::Config(format!("cdf csv has no `{c}` column")))?,
        None => find("cdf").unwrap_or(1),
    };
    let mut ys = Vec::new();
    let mut fs = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| io_failure(&args.cdf, e))?;
        let parse = |i: usize| -> Result<f64, Failure> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Failure::Config(format!("malformed row {:?}", rec)))
        };
        ys.push(parse(y_col)?);
        fs.push(parse(f_col)?);
    }
    let rows = finite_difference(&ys, &fs)?;
    write_rows(args.out.as_deref(), &["y", "pdf"], &rows)
}

/// Central differences inside, one-sided at the ends.
pub fn finite_difference(ys: &[f64], fs: &[f64]) -> Result<Vec<Vec<f64>>, Failure> {
    let n = ys.len();
    if n < 3 {
        return Err(Failure::Config(format!("need at least 3 grid points, got {n}")));
    }
    if ys.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Failure::Config("grid must increase strictly".into()));
    }
    Ok((0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            vec![ys[i], (fs[b] - fs[a]) / (ys[b] - ys[a])]
        })
        .collect())
}
