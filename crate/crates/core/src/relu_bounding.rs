//! Piecewise-linear upper and lower bounds of smooth monotone activations and
//! their assembly into ReLU bounding networks.
//!
//! Every neuron's IBP interval is split at inflection and kink points into
//! regions of constant curvature, and each region into equal segments. On a
//! segment the chord through the endpoints and the midpoint lies above a
//! convex function; the two endpoint tangents, cut where they meet, lie below
//! it. Concave segments swap the roles.

use crate::error::{Error, Result};
use crate::model::{propagate_box, Activation, AxisBox, Curvature, FeedforwardNetwork, Interval, Layer};
use crate::regions::{PlLayer, PlNetwork, PlUnit};

/// Breakpoints `a_1 < … < a_{m+1}` and the curvature of each segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentPlan {
    pub breakpoints: Vec<f64>,
    pub curvature: Vec<Curvature>,
}

impl SegmentPlan {
    pub fn num_segments(&self) -> usize {
        self.curvature.len()
    }

    pub fn segment(&self, k: usize) -> (f64, f64) {
        (self.breakpoints[k], self.breakpoints[k + 1])
    }
}

pub fn plan_segments(act: Activation, iv: Interval, n_per_region: usize) -> Result<SegmentPlan> {
    if n_per_region == 0 {
        return Err(Error::Invalid("segments per region must be at least 1".into()));
    }
    if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo <= iv.hi) {
        return Err(Error::Invalid(format!("interval [{}, {}]", iv.lo, iv.hi)));
    }
    if iv.lo <= act.domain_lower() {
        return Err(Error::Invalid(format!(
            "{} needs arguments above {}, interval starts at {}",
            act.tag(),
            act.domain_lower(),
            iv.lo
        )));
    }
    if iv.lo == iv.hi {
        return Ok(SegmentPlan {
            breakpoints: vec![iv.lo],
            curvature: Vec::new(),
        });
    }
    let mut cuts = vec![iv.lo];
    let mut inner: Vec<f64> = act
        .inflection_points()
        .iter()
        .chain(act.kink_points())
        .copied()
        .filter(|&p| iv.lo < p && p < iv.hi)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(iv.hi);

    let mut breakpoints = vec![iv.lo];
    let mut curvature = Vec::new();
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let c = act.curvature_at(0.5 * (p + q));
        let m = if c == Curvature::Linear { 1 } else { n_per_region };
        for i in 1..=m {
            breakpoints.push(if i == m {
                q
            } else {
                p + (q - p) * i as f64 / m as f64
            });
            curvature.push(c);
        }
    }
    Ok(SegmentPlan {
        breakpoints,
        curvature,
    })
}

/// One ReLU unit `ξ·ReLU(scale·(τ − shift))` of the ReLU-equivalent form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReluTerm {
    pub shift: f64,
    pub scale: f64,
    pub sign: f64,
}

/// Continuous monotone piecewise-linear function on `[x_0, x_n]`, stored by
/// its values at the breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearScalar {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl PiecewiseLinearScalar {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Invalid("breakpoints and values differ in length".into()));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Invalid("breakpoints must increase strictly".into()));
        }
        if ys.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Invalid("piecewise-linear bound is not monotone".into()));
        }
        Ok(Self { xs, ys })
    }

    /// Builds from a point list, dropping repeated abscissae.
    fn from_points(points: Vec<(f64, f64)>) -> Self {
        let mut xs: Vec<f64> = Vec::with_capacity(points.len());
        let mut ys: Vec<f64> = Vec::with_capacity(points.len());
        for (x, y) in points {
            if let Some(&last) = xs.last() {
                if x <= last {
                    continue;
                }
            }
            let y = ys.last().map_or(y, |&p: &f64| y.max(p));
            xs.push(x);
            ys.push(y);
        }
        Self { xs, ys }
    }

    pub fn num_pieces(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn domain(&self) -> Interval {
        Interval::new(self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Slopes `v_1, …, v_n`.
    pub fn slopes(&self) -> Vec<f64> {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect()
    }

    /// Intercepts `c_1, …, c_n` so that piece `i` is `v_i τ + c_i`.
    pub fn intercepts(&self) -> Vec<f64> {
        self.slopes()
            .iter()
            .enumerate()
            .map(|(i, v)| self.ys[i] - v * self.xs[i])
            .collect()
    }

    /// Value at `t`: constant left of `x_0`, last slope right of `x_n`,
    /// matching the ReLU-equivalent form.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || t <= self.xs[0] {
            return self.ys[0];
        }
        let k = self.xs.partition_point(|x| *x <= t).clamp(1, n - 1);
        let (x0, x1, y0, y1) = (self.xs[k - 1], self.xs[k], self.ys[k - 1], self.ys[k]);
        if t == x1 {
            return y1;
        }
        y0 + (y1 - y0) / (x1 - x0) * (t - x0)
    }

    /// Constant `x_0 v_1 + c_1` and one unit per slope change, `v_0 = 0`.
    pub fn relu_form(&self) -> (f64, Vec<ReluTerm>) {
        let v = self.slopes();
        let mut terms = Vec::new();
        let mut prev = 0.0;
        for (i, &vi) in v.iter().enumerate() {
            let dv = vi - prev;
            if dv != 0.0 {
                terms.push(ReluTerm {
                    shift: self.xs[i],
                    scale: dv.abs(),
                    sign: dv.signum(),
                });
            }
            prev = vi;
        }
        (self.ys[0], terms)
    }

    pub fn eval_relu_form(&self, t: f64) -> f64 {
        let (base, terms) = self.relu_form();
        terms
            .iter()
            .fold(base, |acc, r| acc + r.sign * (r.scale * (t - r.shift)).max(0.0))
    }

    /// Compressed form used for region enumeration.
    pub fn to_pl_unit(&self) -> PlUnit {
        let v = self.slopes();
        if v.is_empty() {
            return PlUnit::constant(self.ys[0]);
        }
        let c = self.intercepts();
        let mut breaks = vec![self.xs[0]];
        let mut slopes = vec![0.0, v[0]];
        let mut intercepts = vec![self.ys[0], c[0]];
        for i in 1..v.len() {
            breaks.push(self.xs[i]);
            slopes.push(v[i]);
            intercepts.push(c[i]);
        }
        PlUnit {
            breaks,
            slopes,
            intercepts,
        }
    }
}

/// Chord through `a`, the midpoint and `b`.
pub fn chord_bound(act: Activation, a: f64, b: f64) -> [(f64, f64); 3] {
    let m = 0.5 * (a + b);
    [(a, act.eval(a)), (m, act.eval(m)), (b, act.eval(b))]
}

/// Tangents at `a` and `b`, joined where they intersect. Falls back to the
/// chord when the one-sided derivatives coincide.
pub fn tangent_bound(act: Activation, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (fa, fb) = (act.eval(a), act.eval(b));
    let (da, db) = (act.deriv_right(a), act.deriv_left(b));
    let den = db - da;
    if den == 0.0 {
        return vec![(a, fa), (b, fb)];
    }
    let k = (fa - fb - (da * a - db * b)) / den;
    let k = k.clamp(a, b);
    let yk = (fa + da * (k - a)).clamp(fa.min(fb), fa.max(fb));
    vec![(a, fa), (k, yk), (b, fb)]
}

/// Upper and lower piecewise-linear bounds of `act` on `iv`.
pub fn bound_activation(
    act: Activation,
    iv: Interval,
    n_per_region: usize,
) -> Result<(PiecewiseLinearScalar, PiecewiseLinearScalar)> {
    let plan = plan_segments(act, iv, n_per_region)?;
    let start = (plan.breakpoints[0], act.eval(plan.breakpoints[0]));
    let mut upper = vec![start];
    let mut lower = vec![start];
    for k in 0..plan.num_segments() {
        let (a, b) = plan.segment(k);
        match plan.curvature[k] {
            Curvature::Linear => {
                upper.push((b, act.eval(b)));
                lower.push((b, act.eval(b)));
            }
            Curvature::Convex => {
                upper.extend_from_slice(&chord_bound(act, a, b)[1..]);
                lower.extend(tangent_bound(act, a, b).into_iter().skip(1));
            }
            Curvature::Concave => {
                lower.extend_from_slice(&chord_bound(act, a, b)[1..]);
                upper.extend(tangent_bound(act, a, b).into_iter().skip(1));
            }
        }
    }
    Ok((
        PiecewiseLinearScalar::from_points(upper),
        PiecewiseLinearScalar::from_points(lower),
    ))
}

/// Upper/lower ReLU networks sandwiching a source network on a box.
///
/// Both bounds are evaluated by one joint network that carries an upper and
/// a lower copy of every neuron: the upper copy of a neuron reads the upper
/// copies of positively weighted inputs and the lower copies of negatively
/// weighted ones, and the lower copy the reverse.
#[derive(Clone, Debug)]
pub struct BoundedNetworkPair {
    pub source: FeedforwardNetwork,
    pub upper: FeedforwardNetwork,
    pub lower: FeedforwardNetwork,
    /// Outputs `[upper_1 … upper_m, lower_1 … lower_m]`.
    pub joint: PlNetwork,
    pub segments_per_region: usize,
    /// `(upper, lower)` activation bound of every neuron; `None` for identity.
    pub neuron_bounds: Vec<Vec<Option<(PiecewiseLinearScalar, PiecewiseLinearScalar)>>>,
    pub domain: AxisBox,
}

impl BoundedNetworkPair {
    pub fn output_dim(&self) -> usize {
        self.source.output_dim()
    }

    pub fn is_exact(&self) -> bool {
        self.source.is_piecewise_linear()
    }

    /// `(upper, lower)` outputs at `x`.
    pub fn eval(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut out = self.joint.eval(x);
        let lower = out.split_off(self.output_dim());
        (out, lower)
    }

    pub fn upper_pl(&self) -> PlNetwork {
        let m = self.output_dim();
        self.joint.select_outputs(&(0..m).collect::<Vec<_>>())
    }

    pub fn lower_pl(&self) -> PlNetwork {
        let m = self.output_dim();
        self.joint.select_outputs(&(m..2 * m).collect::<Vec<_>>())
    }

    /// Breakpoint count of the joint network, layer by layer.
    pub fn breakpoint_counts(&self) -> Vec<usize> {
        self.joint
            .layers
            .iter()
            .map(|l| l.units.iter().map(|u| u.breaks.len()).sum())
            .collect()
    }
}

fn split_signs(row: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        row.iter().map(|w| w.max(0.0)).collect(),
        row.iter().map(|w| w.min(0.0)).collect(),
    )
}

/// Affine expressions of the upper and lower neuron values in terms of the
/// current ReLU-form layer output.
struct Repr {
    upper: Vec<(Vec<f64>, f64)>,
    lower: Vec<(Vec<f64>, f64)>,
}

/// `w⁺·pos + w⁻·neg + b` for every row.
fn compose(
    w: &[Vec<f64>],
    b: &[f64],
    pos: &[(Vec<f64>, f64)],
    neg: &[(Vec<f64>, f64)],
    width: usize,
) -> Vec<(Vec<f64>, f64)> {
    w.iter()
        .zip(b)
        .map(|(row, bj)| {
            let mut coeffs = vec![0.0; width];
            let mut c = *bj;
            for (k, &wk) in row.iter().enumerate() {
                if wk == 0.0 {
                    continue;
                }
                let src = if wk > 0.0 { &pos[k] } else { &neg[k] };
                for (o, s) in coeffs.iter_mut().zip(&src.0) {
                    *o += wk * s;
                }
                c += wk * src.1;
            }
            (coeffs, c)
        })
        .collect()
}

/// Sandwiching ReLU networks of `net` on `domain`, `n_per_region` segments
/// per curvature region of every neuron.
pub fn bound_network(net: &FeedforwardNetwork, domain: &AxisBox, n_per_region: usize) -> Result<BoundedNetworkPair> {
    let ibp = propagate_box(net, domain)?;
    let m = net.output_dim();
    if net.is_piecewise_linear() {
        let mut joint = PlNetwork::from_feedforward(net)?;
        let twice: Vec<usize> = (0..m).chain(0..m).collect();
        joint = joint.select_outputs(&twice);
        return Ok(BoundedNetworkPair {
            source: net.clone(),
            upper: net.clone(),
            lower: net.clone(),
            joint,
            segments_per_region: n_per_region,
            neuron_bounds: net.layers().iter().map(|l| vec![None; l.output_dim()]).collect(),
            domain: domain.clone(),
        });
    }

    let n0 = net.input_dim();
    let identity: Vec<(Vec<f64>, f64)> = (0..n0)
        .map(|i| {
            let mut r = vec![0.0; n0];
            r[i] = 1.0;
            (r, 0.0)
        })
        .collect();
    let mut repr = Repr {
        upper: identity.clone(),
        lower: identity,
    };
    let mut width = n0;
    let mut relu_layers: Vec<Layer> = Vec::new();
    let mut pl_layers: Vec<PlLayer> = Vec::new();
    let mut neuron_bounds = Vec::new();

    for (l, layer) in net.layers().iter().enumerate() {
        let act = layer.activation;
        let bounds: Vec<Option<(PiecewiseLinearScalar, PiecewiseLinearScalar)>> = ibp.pre[l]
            .iter()
            .map(|iv| {
                if act == Activation::Identity {
                    Ok(None)
                } else {
                    bound_activation(act, *iv, n_per_region).map(Some)
                }
            })
            .collect::<Result<_>>()?;

        // Joint compressed layer.
        let (mut weights, mut bias, mut units) = (Vec::new(), Vec::new(), Vec::new());
        let prev = if l == 0 { 0 } else { net.layers()[l - 1].output_dim() };
        for side in 0..2 {
            for (j, row) in layer.weights.iter().enumerate() {
                if l == 0 {
                    weights.push(row.clone());
                } else {
                    let (p, q) = split_signs(row);
                    let (first, second) = if side == 0 { (p, q) } else { (q, p) };
                    let mut w = first;
                    w.extend(second);
                    debug_assert_eq!(w.len(), 2 * prev);
                    weights.push(w);
                }
                bias.push(layer.bias[j]);
                units.push(match &bounds[j] {
                    None => PlUnit::identity(),
                    Some((u, lo)) => {
                        if side == 0 {
                            u.to_pl_unit()
                        } else {
                            lo.to_pl_unit()
                        }
                    }
                });
            }
        }
        pl_layers.push(PlLayer {
            weights,
            bias,
            units,
        });

        // ReLU-equivalent layers.
        let zu = compose(&layer.weights, &layer.bias, &repr.upper, &repr.lower, width);
        let zl = compose(&layer.weights, &layer.bias, &repr.lower, &repr.upper, width);
        if act == Activation::Identity {
            repr = Repr { upper: zu, lower: zl };
        } else {
            let (mut rows, mut rbias) = (Vec::new(), Vec::new());
            let mut next = Repr {
                upper: Vec::new(),
                lower: Vec::new(),
            };
            let mut plan: Vec<(usize, bool, f64, Vec<(usize, f64)>)> = Vec::new();
            for (side, z) in [(true, &zu), (false, &zl)] {
                for (j, (coeffs, c)) in z.iter().enumerate() {
                    let (ub, lb) = bounds[j].as_ref().expect("non-identity neuron has bounds");
                    let pl = if side { ub } else { lb };
                    let (base, terms) = pl.relu_form();
                    let mut outs = Vec::with_capacity(terms.len());
                    for t in terms {
                        rows.push(coeffs.iter().map(|a| t.scale * a).collect::<Vec<f64>>());
                        rbias.push(t.scale * (c - t.shift));
                        outs.push((rows.len() - 1, t.sign));
                    }
                    plan.push((j, side, base, outs));
                }
            }
            let new_width = rows.len();
            for (_, side, base, outs) in plan {
                let mut coeffs = vec![0.0; new_width];
                for (idx, sign) in outs {
                    coeffs[idx] = sign;
                }
                if side {
                    next.upper.push((coeffs, base));
                } else {
                    next.lower.push((coeffs, base));
                }
            }
            let rows = if rows.is_empty() {
                // Every neuron is constant; keep one inert unit so the layer is valid.
                rbias.push(0.0);
                vec![vec![0.0; width]]
            } else {
                rows
            };
            let fixed_width = rows.len();
            for e in next.upper.iter_mut().chain(next.lower.iter_mut()) {
                e.0.resize(fixed_width, 0.0);
            }
            relu_layers.push(Layer::new(rows, rbias, Activation::Relu));
            width = fixed_width;
            repr = next;
        }
        neuron_bounds.push(bounds);
    }

    let out_rows: Vec<Vec<f64>> = repr.upper.iter().chain(&repr.lower).map(|e| e.0.clone()).collect();
    let out_bias: Vec<f64> = repr.upper.iter().chain(&repr.lower).map(|e| e.1).collect();
    relu_layers.push(Layer::new(out_rows, out_bias, Activation::Identity));
    let joint_relu = FeedforwardNetwork::new(relu_layers)?;
    let upper = joint_relu.select_outputs(&(0..m).collect::<Vec<_>>())?;
    let lower = joint_relu.select_outputs(&(m..2 * m).collect::<Vec<_>>())?;
    Ok(BoundedNetworkPair {
        source: net.clone(),
        upper,
        lower,
        joint: PlNetwork {
            layers: pl_layers,
        },
        segments_per_region: n_per_region,
        neuron_bounds,
        domain: domain.clone(),
    })
}

/// Subnetwork constructions for non-monotone operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GadgetKind {
    Abs,
    Square,
    Product,
    Max,
    SoftmaxLog,
}

impl GadgetKind {
    pub fn from_tag(tag: &str) -> Result<Self> {
        Ok(match tag {
            "abs" => GadgetKind::Abs,
            "square" => GadgetKind::Square,
            "product" => GadgetKind::Product,
            "max" => GadgetKind::Max,
            "softmax_log" => GadgetKind::SoftmaxLog,
            other => return Err(Error::Invalid(format!("unknown gadget `{other}`"))),
        })
    }
}

/// A network fragment; `exact` is true when it only uses ReLU and identity.
#[derive(Clone, Debug)]
pub struct Gadget {
    pub network: FeedforwardNetwork,
    pub exact: bool,
}

fn plus_minus(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .flat_map(|r| [r.clone(), r.iter().map(|v| -v).collect()])
        .collect()
}

pub fn gadget(kind: GadgetKind, arity: usize) -> Result<Gadget> {
    let expected = match kind {
        GadgetKind::Abs | GadgetKind::Square => Some(1),
        GadgetKind::Product | GadgetKind::Max => Some(2),
        GadgetKind::SoftmaxLog => None,
    };
    if expected.is_some_and(|e| e != arity) || arity == 0 {
        return Err(Error::Invalid(format!("{kind:?} gadget does not take {arity} inputs")));
    }
    let layers = match kind {
        GadgetKind::Abs => vec![
            Layer::new(plus_minus(&[vec![1.0]]), vec![0.0; 2], Activation::Relu),
            Layer::new(vec![vec![1.0, 1.0]], vec![0.0], Activation::Identity),
        ],
        GadgetKind::Max => vec![
            Layer::new(
                plus_minus(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, -1.0]]),
                vec![0.0; 6],
                Activation::Relu,
            ),
            Layer::new(
                vec![vec![0.5, -0.5, 0.5, -0.5, 0.5, 0.5]],
                vec![0.0],
                Activation::Identity,
            ),
        ],
        GadgetKind::Square => vec![
            Layer::new(plus_minus(&[vec![1.0]]), vec![0.0; 2], Activation::Relu),
            Layer::new(vec![vec![1.0, 1.0]], vec![0.0], Activation::Square),
            Layer::new(vec![vec![1.0]], vec![0.0], Activation::Identity),
        ],
        GadgetKind::Product => vec![
            Layer::new(
                plus_minus(&[vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]),
                vec![0.0; 6],
                Activation::Relu,
            ),
            Layer::new(
                vec![
                    vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
                    vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
                    vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0],
                ],
                vec![0.0; 3],
                Activation::Square,
            ),
            Layer::new(vec![vec![0.5, -0.5, -0.5]], vec![0.0], Activation::Identity),
        ],
        GadgetKind::SoftmaxLog => {
            let n = arity;
            let eye: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let mut logs = vec![vec![1.0; n]];
            logs.extend(eye.iter().cloned());
            let out: Vec<Vec<f64>> = (0..n)
                .map(|k| {
                    let mut r = vec![0.0; n + 1];
                    r[0] = -1.0;
                    r[k + 1] = 1.0;
                    r
                })
                .collect();
            vec![
                Layer::new(eye, vec![0.0; n], Activation::Exp),
                Layer::new(logs, vec![0.0; n + 1], Activation::Log),
                Layer::new(out, vec![0.0; n], Activation::Identity),
            ]
        }
    };
    let network = FeedforwardNetwork::new(layers)?;
    Ok(Gadget {
        exact: network.is_piecewise_linear(),
        network,
    })
}
