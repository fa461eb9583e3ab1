//! Guaranteed lower and upper cdf bounds from bounding networks and bounding
//! densities, plus a Monte-Carlo reference and an out-of-bounds tally.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_cdf::{PieceSet, PieceView};
use crate::geometry::{Polynomial, Simplex};
use crate::model::{propagate_box, AxisBox, FeedforwardNetwork, InputDistribution};
use crate::pdf_bounds::{bound_pdf, max_cells_per_axis, partition_box, refine, DEFAULT_VERTEX_BUDGET};
use crate::regions::DEFAULT_CELL_BUDGET;
use crate::relu_bounding::bound_network;

/// Confidence level `1 − α` of the DKW band used for comparisons.
pub const DKW_ALPHA: f64 = 0.001;
pub const DEFAULT_GRID_POINTS: usize = 1000;

/// Tolerance when comparing an estimate against bounds.
pub const OOB_TOL: f64 = 1e-12;

const MC_CHUNK: usize = 1 << 13;

#[derive(Clone, Debug)]
pub struct BoundsOptions {
    pub segments_per_region: usize,
    pub vertex_budget: usize,
    /// Initial Kuhn grid resolution; defaults to half the vertex budget.
    pub cells_per_axis: Option<usize>,
    /// Spend the remaining vertex budget on greedy refinement.
    pub refine: bool,
    pub piece_budget: usize,
    /// Output component; required when the network has several outputs.
    pub output: Option<usize>,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            segments_per_region: 5,
            vertex_budget: DEFAULT_VERTEX_BUDGET,
            cells_per_axis: None,
            refine: true,
            piece_budget: 10 * DEFAULT_CELL_BUDGET,
            output: None,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Runtimes {
    pub network_bounds_s: f64,
    pub pdf_bounds_s: f64,
    pub enumeration_s: f64,
    pub evaluation_s: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BoundsMetadata {
    pub output: usize,
    pub segments_per_region: usize,
    pub vertex_budget: usize,
    pub vertex_count: usize,
    pub pdf_simplices: usize,
    pub exact_network: bool,
    pub exact_pdf: bool,
    pub breakpoints_per_layer: Vec<usize>,
    pub upper_cells: usize,
    pub lower_cells: usize,
    pub upper_simplices: usize,
    pub lower_simplices: usize,
    pub pdf_lower_mass: f64,
    pub pdf_upper_mass: f64,
    pub mass_deficit: Option<f64>,
    pub runtimes: Runtimes,
}

/// `F̲(y) ≤ F(y) ≤ F̄(y)` on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct CdfBounds {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub metadata: BoundsMetadata,
}

impl CdfBounds {
    pub fn gaps(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }

    pub fn max_gap(&self) -> f64 {
        self.gaps().into_iter().fold(0.0, f64::max)
    }

    /// Mean and standard deviation of `F̄ − F̲` over the grid.
    pub fn gap_stats(&self) -> (f64, f64) {
        let g = self.gaps();
        let n = g.len().max(1) as f64;
        let mean = g.iter().sum::<f64>() / n;
        let var = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    pub fn write_csv<W: Write>(&self, out: W, mc: Option<&[f64]>) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let io = |e: csv::Error| Error::Invalid(format!("csv output: {e}"));
        if mc.is_some() {
            w.write_record(["y", "lower", "upper", "mc"]).map_err(io)?;
        } else {
            w.write_record(["y", "lower", "upper"]).map_err(io)?;
        }
        for i in 0..self.grid.len() {
            let mut rec = vec![
                self.grid[i].to_string(),
                self.lower[i].to_string(),
                self.upper[i].to_string(),
            ];
            if let Some(m) = mc {
                rec.push(m[i].to_string());
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "csv output".into(),
            source,
        })
    }
}

fn resolve_output(net: &FeedforwardNetwork, output: Option<usize>) -> Result<usize> {
    match output {
        Some(k) if k < net.output_dim() => Ok(k),
        Some(k) => Err(Error::Dimension {
            expected: net.output_dim(),
            got: k + 1,
        }),
        None if net.output_dim() == 1 => Ok(0),
        None => Err(Error::Invalid(format!(
            "network has {} outputs; select one",
            net.output_dim()
        ))),
    }
}

/// `points` evenly spaced values across the IBP range of one output.
pub fn default_grid(net: &FeedforwardNetwork, domain: &AxisBox, output: usize, points: usize) -> Result<Vec<f64>> {
    let ibp = propagate_box(net, domain)?;
    let iv = ibp.output.axis(output);
    Ok(linspace(iv.lo, iv.hi, points))
}

pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..points)
            .map(|i| {
                if i + 1 == points {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (points - 1) as f64
                }
            })
            .collect(),
    }
}

/// Guaranteed cdf bounds of one network output under `dist`.
pub fn cdf_bounds(
    net: &FeedforwardNetwork,
    dist: &InputDistribution,
    grid: &[f64],
    opts: &BoundsOptions,
) -> Result<CdfBounds> {
    let domain = dist.support();
    if domain.dim() != net.input_dim() {
        return Err(Error::Dimension {
            expected: net.input_dim(),
            got: domain.dim(),
        });
    }
    let output = resolve_output(net, opts.output)?;
    let source = net.select_outputs(&[output])?;
    let mut meta = BoundsMetadata {
        output,
        segments_per_region: opts.segments_per_region,
        vertex_budget: opts.vertex_budget,
        exact_network: source.is_piecewise_linear(),
        mass_deficit: dist.mass_deficit(),
        ..Default::default()
    };

    let t = Instant::now();
    let pair = bound_network(&source, &domain, opts.segments_per_region)?;
    meta.breakpoints_per_layer = pair.breakpoint_counts();
    meta.runtimes.network_bounds_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (simplices, lower_pdf, upper_pdf): (Vec<Simplex>, Vec<Polynomial>, Vec<Polynomial>) =
        match dist.pdf_as_piecewise_polynomial() {
            Some(pdf) => {
                meta.exact_pdf = true;
                meta.vertex_count = pdf.pieces.len() * (domain.dim() + 1);
                let polys: Vec<Polynomial> = pdf.pieces.iter().map(|p| p.poly.clone()).collect();
                let mass = pdf.total_mass();
                meta.pdf_lower_mass = mass;
                meta.pdf_upper_mass = mass;
                (
                    pdf.pieces.into_iter().map(|p| p.simplex).collect(),
                    polys.clone(),
                    polys,
                )
            }
            None => {
                let n = domain.dim();
                let k = opts
                    .cells_per_axis
                    .unwrap_or_else(|| max_cells_per_axis(n, opts.vertex_budget / 2).max(1));
                let part = partition_box(&domain, k, opts.vertex_budget)?;
                let mut pair = bound_pdf(dist, &part)?;
                if opts.refine {
                    pair = refine(dist, &pair, opts.vertex_budget)?;
                }
                meta.vertex_count = pair.partition.vertex_count;
                meta.pdf_lower_mass = pair.lower_mass();
                meta.pdf_upper_mass = pair.upper_mass();
                (
                    pair.partition.simplices,
                    pair.lo.iter().map(|&c| Polynomial::constant(n, c)).collect(),
                    pair.hi.iter().map(|&c| Polynomial::constant(n, c)).collect(),
                )
            }
        };
    meta.pdf_simplices = simplices.len();
    meta.runtimes.pdf_bounds_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let shared = meta.exact_network && meta.exact_pdf;
    let mut views = vec![PieceView {
        outputs: vec![0],
        densities: lower_pdf,
    }];
    if !shared {
        views.push(PieceView {
            outputs: vec![1],
            densities: upper_pdf,
        });
    }
    let mut sets = PieceSet::from_network_views(&pair.joint, &simplices, &views, opts.piece_budget)?;
    let lower_set = if shared { sets[0].clone() } else { sets.pop().expect("two views") };
    let upper_set = sets.pop().expect("one view");
    meta.upper_cells = upper_set.num_cells();
    meta.lower_cells = lower_set.num_cells();
    meta.upper_simplices = upper_set.len();
    meta.lower_simplices = lower_set.len();
    meta.runtimes.enumeration_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let ys: Vec<Vec<f64>> = grid.iter().map(|&y| vec![y]).collect();
    let (lower, upper) = if shared {
        let raw = upper_set.cdf_curve_raw(&ys)?;
        let l: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        (l.clone(), l)
    } else {
        let (l, u) = rayon::join(|| upper_set.cdf_curve_raw(&ys), || lower_set.cdf_curve_raw(&ys));
        (
            l?.into_iter().map(|v| v.max(0.0)).collect::<Vec<_>>(),
            u?.into_iter().map(|v| v.min(1.0)).collect::<Vec<_>>(),
        )
    };
    meta.runtimes.evaluation_s = t.elapsed().as_secs_f64();
    Ok(CdfBounds {
        grid: grid.to_vec(),
        lower,
        upper,
        metadata: meta,
    })
}

/// Half-width `√(ln(2/α)/(2n))` of the DKW band.
pub fn dkw_half_width(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Empirical cdf of one network output. Draws that fall outside the support
/// box are kept as `+∞`, so they never count as `≤ y`.
#[derive(Clone, Debug)]
pub struct EmpiricalCdf {
    pub values: Vec<f64>,
    pub alpha: f64,
}

impl EmpiricalCdf {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn half_width(&self) -> f64 {
        dkw_half_width(self.values.len(), self.alpha)
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.values.partition_point(|v| *v <= y) as f64 / self.values.len() as f64
    }

    pub fn eval_grid(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&y| self.eval(y)).collect()
    }
}

/// Draws `n_samples` inputs with a seeded generator and records the chosen
/// output. Results do not depend on the thread count.
pub fn mc_samples(
    net: &FeedforwardNetwork,
    dist: &InputDistribution,
    n_samples: usize,
    seed: u64,
    output: usize,
) -> Result<EmpiricalCdf> {
    if n_samples == 0 {
        return Err(Error::Invalid("at least one sample is required".into()));
    }
    if dist.dim() != net.input_dim() {
        return Err(Error::Dimension {
            expected: net.input_dim(),
            got: dist.dim(),
        });
    }
    let output = resolve_output(net, Some(output))?;
    let sampler = dist.sampler()?;
    let support = dist.support();
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let mut values: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = MC_CHUNK.min(n_samples - c * MC_CHUNK);
            let mut x = vec![0.0; support.dim()];
            let (mut a, mut z) = (Vec::new(), Vec::new());
            (0..len)
                .map(|_| {
                    if sampler.sample_into(&mut rng, &mut x) && support.contains(&x) {
                        net.eval_with(&x, &mut a, &mut z)[output]
                    } else {
                        f64::INFINITY
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(EmpiricalCdf {
        values,
        alpha: DKW_ALPHA,
    })
}

/// Empirical cdf of the first (or only) output on a grid.
pub fn mc_cdf(
    net: &FeedforwardNetwork,
    dist: &InputDistribution,
    n_samples: usize,
    grid: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(mc_samples(net, dist, n_samples, seed, 0)?.eval_grid(grid))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OobTally {
    pub below: usize,
    pub above: usize,
    pub total: usize,
}

/// Counts estimates outside `[F̲ − margin, F̄ + margin]`.
pub fn oob_tally_with_margin(bounds: &CdfBounds, estimate: &[(f64, f64)], margin: f64) -> Result<OobTally> {
    let mut tally = OobTally {
        below: 0,
        above: 0,
        total: estimate.len(),
    };
    for &(y, p) in estimate {
        let i = bounds.grid.partition_point(|g| *g < y);
        if bounds.grid.get(i) != Some(&y) {
            return Err(Error::Invalid(format!("estimate point {y} is not on the bounds grid")));
        }
        tally_point(&mut tally, bounds, i, p, margin);
    }
    Ok(tally)
}

fn tally_point(t: &mut OobTally, b: &CdfBounds, i: usize, p: f64, margin: f64) {
    if p < b.lower[i] - margin - OOB_TOL {
        t.below += 1;
    } else if p > b.upper[i] + margin + OOB_TOL {
        t.above += 1;
    }
}

pub fn oob_tally(bounds: &CdfBounds, estimate: &[(f64, f64)]) -> Result<OobTally> {
    oob_tally_with_margin(bounds, estimate, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, Layer};

    fn identity_net() -> FeedforwardNetwork {
        FeedforwardNetwork::new(vec![Layer::new(vec![vec![1.0]], vec![0.0], Activation::Identity)]).unwrap()
    }

    #[test]
    fn identity_uniform_bounds_are_exact() {
        let d = InputDistribution::uniform(AxisBox::unit(1));
        let grid = linspace(0.0, 1.0, 11);
        let b = cdf_bounds(&identity_net(), &d, &grid, &BoundsOptions::default()).unwrap();
        for (y, (l, u)) in grid.iter().zip(b.lower.iter().zip(&b.upper)) {
            assert!((l - y).abs() < 1e-12 && (u - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mc_is_deterministic() {
        let d = InputDistribution::uniform(AxisBox::unit(1));
        let a = mc_cdf(&identity_net(), &d, 20_000, &[0.5], 3).unwrap();
        let b = mc_cdf(&identity_net(), &d, 20_000, &[0.5], 3).unwrap();
        assert_eq!(a, b);
        assert!((a[0] - 0.5).abs() < dkw_half_width(20_000, DKW_ALPHA));
    }

    #[test]
    fn tally_counts() {
        let b = CdfBounds {
            grid: vec![0.0, 1.0],
            lower: vec![0.1, 0.5],
            upper: vec![0.3, 0.7],
            metadata: BoundsMetadata::default(),
        };
        let mid = oob_tally(&b, &[(0.0, 0.2), (1.0, 0.6)]).unwrap();
        assert_eq!((mid.below, mid.above, mid.total), (0, 0, 2));
        let high = oob_tally(&b, &[(0.0, 0.31), (1.0, 0.71)]).unwrap();
        assert_eq!((high.below, high.above), (0, 2));
        assert!(oob_tally(&b, &[(0.5, 0.2)]).is_err());
    }

    #[test]
    fn dkw_width() {
        assert!((dkw_half_width(1_000_000, 0.001) - 0.001949).abs() < 1e-6);
    }
}
