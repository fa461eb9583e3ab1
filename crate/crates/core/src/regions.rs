//! Linear regions of piecewise-linear networks.
//!
//! A ReLU network is enumerated through its piecewise-linear form: every
//! neuron is a monotone piecewise-linear scalar map (ReLU has one breakpoint
//! at 0, identity none). The bounding networks built by
//! [`crate::relu_bounding`] are handled the same way, so a neuron with `k`
//! slope changes is split once per breakpoint instead of once per ReLU unit
//! of its ReLU-equivalent form; both forms have the same linear regions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolytope, HPolytope, Halfspace};
use crate::model::{Activation, AxisBox, FeedforwardNetwork};

/// Default cap on the number of enumerated cells.
pub const DEFAULT_CELL_BUDGET: usize = 1_000_000;

/// Monotone continuous piecewise-linear map `ℝ → ℝ`.
///
/// Piece `k` covers `[breaks[k-1], breaks[k]]`; a point on a breakpoint is
/// assigned to the piece on its right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlUnit {
    pub breaks: Vec<f64>,
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
}

impl PlUnit {
    pub fn identity() -> Self {
        Self {
            breaks: Vec::new(),
            slopes: vec![1.0],
            intercepts: vec![0.0],
        }
    }

    pub fn relu() -> Self {
        Self {
            breaks: vec![0.0],
            slopes: vec![0.0, 1.0],
            intercepts: vec![0.0, 0.0],
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            breaks: Vec::new(),
            slopes: vec![0.0],
            intercepts: vec![c],
        }
    }

    pub fn piece_at(&self, t: f64) -> usize {
        self.breaks.partition_point(|b| *b <= t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.piece_at(t);
        self.slopes[k] * t + self.intercepts[k]
    }

    pub fn num_pieces(&self) -> usize {
        self.slopes.len()
    }
}

/// Affine layer followed by one [`PlUnit`] per neuron.
#[derive(Clone, Debug, PartialEq)]
pub struct PlLayer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub units: Vec<PlUnit>,
}

/// Network whose neurons are monotone piecewise-linear maps.
#[derive(Clone, Debug, PartialEq)]
pub struct PlNetwork {
    pub layers: Vec<PlLayer>,
}

impl PlNetwork {
    /// Piecewise-linear view of a ReLU/identity network.
    pub fn from_feedforward(net: &FeedforwardNetwork) -> Result<Self> {
        let layers = net
            .layers()
            .iter()
            .map(|l| {
                let unit = match l.activation {
                    Activation::Relu => PlUnit::relu(),
                    Activation::Identity => PlUnit::identity(),
                    other => return Err(Error::UnsupportedActivation(other.tag().into())),
                };
                Ok(PlLayer {
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                    units: vec![unit; l.bias.len()],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].bias.len()
    }

    /// Same network with the final layer restricted to the given outputs.
    pub fn select_outputs(&self, outputs: &[usize]) -> Self {
        let mut layers = self.layers.clone();
        let last = layers.last_mut().expect("at least one layer");
        last.weights = outputs.iter().map(|&k| last.weights[k].clone()).collect();
        last.bias = outputs.iter().map(|&k| last.bias[k]).collect();
        last.units = outputs.iter().map(|&k| last.units[k].clone()).collect();
        Self { layers }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for layer in &self.layers {
            a = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .zip(&layer.units)
                .map(|((row, b), u)| u.eval(row.iter().zip(&a).fold(*b, |s, (w, v)| s + w * v)))
                .collect();
        }
        a
    }
}

/// `x ↦ matrix·x + offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, c)| row.iter().zip(x).fold(*c, |s, (a, b)| s + a * b))
            .collect()
    }

    pub fn output_dim(&self) -> usize {
        self.offset.len()
    }
}

/// Polytope on which the network is affine.
#[derive(Clone, Debug)]
pub struct ActivationCell {
    pub polytope: ConvexPolytope,
    pub map: AffineMap,
    /// Active piece per neuron, layer by layer (`0`/`1` = off/on for ReLU).
    pub pattern: Vec<u16>,
}

impl ActivationCell {
    pub fn hpolytope(&self) -> HPolytope {
        self.polytope.to_hpolytope()
    }

    pub fn pattern_string(&self) -> String {
        self.pattern
            .iter()
            .map(|p| char::from_digit(*p as u32 % 36, 36).unwrap())
            .collect()
    }
}

/// Row `[a_1, …, a_n, c]` of an affine function of the input.
type Row = Vec<f64>;

struct Enumerator<'a, F: FnMut(ActivationCell) -> Result<()>> {
    net: &'a PlNetwork,
    n0: usize,
    sink: F,
}

impl<F: FnMut(ActivationCell) -> Result<()>> Enumerator<'_, F> {
    fn pre_maps(&self, layer: usize, post: &[Row]) -> Vec<Row> {
        let l = &self.net.layers[layer];
        l.weights
            .iter()
            .zip(&l.bias)
            .map(|(w, b)| {
                let mut row = vec![0.0; self.n0 + 1];
                row[self.n0] = *b;
                for (wj, pj) in w.iter().zip(post) {
                    if *wj != 0.0 {
                        for (r, p) in row.iter_mut().zip(pj) {
                            *r += wj * p;
                        }
                    }
                }
                row
            })
            .collect()
    }

    fn emit(&mut self, poly: ConvexPolytope, post: Vec<Row>, pattern: Vec<u16>) -> Result<()> {
        let n0 = self.n0;
        let map = AffineMap {
            matrix: post.iter().map(|r| r[..n0].to_vec()).collect(),
            offset: post.iter().map(|r| r[n0]).collect(),
        };
        (self.sink)(ActivationCell {
            polytope: poly,
            map,
            pattern,
        })
    }

    fn run(
        &mut self,
        poly: ConvexPolytope,
        mut layer: usize,
        mut neuron: usize,
        mut pre: Vec<Row>,
        mut post: Vec<Row>,
        mut pattern: Vec<u16>,
    ) -> Result<()> {
        let n0 = self.n0;
        loop {
            let units = &self.net.layers[layer].units;
            while neuron < units.len() {
                let unit = &units[neuron];
                let row = &pre[neuron];
                let (lo, hi) = poly.affine_range(&row[..n0], row[n0]);
                let first = unit.breaks.partition_point(|b| *b <= lo);
                let last = unit.breaks.partition_point(|b| *b < hi);
                if first >= last {
                    let k = unit.piece_at(0.5 * (lo + hi));
                    post.push(post_row(row, unit, k));
                    pattern.push(k as u16);
                    neuron += 1;
                    continue;
                }
                // Multi-way split along parallel hyperplanes row·x = break.
                let mut remaining = Some(poly);
                let mut pieces: Vec<(ConvexPolytope, usize)> = Vec::new();
                for k in first..last {
                    let Some(rem) = remaining.take() else { break };
                    let r = rem.split(&row[..n0], unit.breaks[k] - row[n0]);
                    if let Some(b) = r.below {
                        pieces.push((b, k));
                    }
                    remaining = r.above;
                }
                if let Some(rem) = remaining {
                    pieces.push((rem, last));
                }
                for (piece, k) in pieces {
                    let mut post2 = post.clone();
                    post2.push(post_row(row, unit, k));
                    let mut pat2 = pattern.clone();
                    pat2.push(k as u16);
                    self.run(piece, layer, neuron + 1, pre.clone(), post2, pat2)?;
                }
                return Ok(());
            }
            if layer + 1 == self.net.layers.len() {
                return self.emit(poly, post, pattern);
            }
            layer += 1;
            neuron = 0;
            pre = self.pre_maps(layer, &post);
            post = Vec::with_capacity(pre.len());
        }
    }
}

fn post_row(pre: &[f64], unit: &PlUnit, k: usize) -> Row {
    let s = unit.slopes[k];
    let mut r: Row = pre.iter().map(|v| s * v).collect();
    let last = r.len() - 1;
    r[last] += unit.intercepts[k];
    r
}

/// Enumerates the linear regions of `net` inside `region` in depth-first
/// order, passing each to `sink`.
pub fn for_each_cell(
    net: &PlNetwork,
    region: ConvexPolytope,
    sink: impl FnMut(ActivationCell) -> Result<()>,
) -> Result<()> {
    let n0 = net.input_dim();
    if region.dim() != n0 {
        return Err(Error::Dimension {
            expected: n0,
            got: region.dim(),
        });
    }
    let identity: Vec<Row> = (0..n0)
        .map(|i| {
            let mut r = vec![0.0; n0 + 1];
            r[i] = 1.0;
            r
        })
        .collect();
    let mut e = Enumerator { net, n0, sink };
    let pre = e.pre_maps(0, &identity);
    e.run(region, 0, 0, pre, Vec::new(), Vec::new())
}

/// Cells of a piecewise-linear network over a box, sorted by pattern.
pub fn enumerate_pl_cells(net: &PlNetwork, domain: &AxisBox, budget: usize) -> Result<Vec<ActivationCell>> {
    let mut cells = Vec::new();
    for_each_cell(net, ConvexPolytope::from_box(domain), |c| {
        if cells.len() >= budget {
            return Err(Error::Budget {
                what: "activation cells".into(),
                limit: budget,
            });
        }
        cells.push(c);
        Ok(())
    })?;
    cells.sort_by(|a, b| a.pattern.cmp(&b.pattern));
    Ok(cells)
}

/// Activation cells of a ReLU/identity network over a box.
pub fn enumerate_cells(net: &FeedforwardNetwork, domain: &AxisBox) -> Result<Vec<ActivationCell>> {
    enumerate_cells_with_budget(net, domain, DEFAULT_CELL_BUDGET)
}

pub fn enumerate_cells_with_budget(
    net: &FeedforwardNetwork,
    domain: &AxisBox,
    budget: usize,
) -> Result<Vec<ActivationCell>> {
    let pl = PlNetwork::from_feedforward(net)?;
    if domain.dim() != net.input_dim() {
        return Err(Error::Dimension {
            expected: net.input_dim(),
            got: domain.dim(),
        });
    }
    enumerate_pl_cells(&pl, domain, budget)
}

fn binomial(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Upper bound on the number of activation cells.
///
/// Returns the larger of `(max_l n_l)^(n_0·L)` and the hyperplane-arrangement
/// bound `∏_l Σ_{j ≤ d_l} C(n_l, j)` over ReLU layers, `d_l = min(n_0, …, n_l)`;
/// the first is only an order of growth and undercounts tiny networks.
pub fn cell_count_bound(net: &FeedforwardNetwork, _domain: &AxisBox) -> u64 {
    let n0 = net.input_dim() as u64;
    let depth = net.layers().len() as u64;
    let width = net.layers().iter().map(|l| l.output_dim() as u64).max().unwrap_or(1);
    let growth = (width as u128)
        .checked_pow((n0 * depth).min(u32::MAX as u64) as u32)
        .unwrap_or(u128::MAX);
    let mut arrangement: u128 = 1;
    let mut d = n0;
    for layer in net.layers() {
        let n = layer.output_dim() as u64;
        d = d.min(n);
        if layer.activation == Activation::Relu {
            let regions: u128 = (0..=d).map(|j| binomial(n, j)).sum();
            arrangement = arrangement.saturating_mul(regions);
        }
    }
    growth.max(arrangement).min(u64::MAX as u128) as u64
}

/// JSON-friendly view of a cell for debugging dumps.
#[derive(Serialize)]
pub struct CellDump<'a> {
    pub pattern: String,
    pub halfspaces: Vec<Halfspace>,
    pub vertices: &'a [Vec<f64>],
    pub map: &'a AffineMap,
}

pub fn dump_cells(cells: &[ActivationCell]) -> String {
    let dumps: Vec<CellDump> = cells
        .iter()
        .map(|c| CellDump {
            pattern: c.pattern_string(),
            halfspaces: c.polytope.facet_halfspaces(),
            vertices: c.polytope.vertices(),
            map: &c.map,
        })
        .collect();
    serde_json::to_string_pretty(&dumps).expect("cells serialize")
}
