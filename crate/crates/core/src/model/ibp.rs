use super::{AxisBox, FeedforwardNetwork, Interval};
use crate::error::{Error, Result};

/// Per-neuron ranges produced by interval bound propagation.
#[derive(Clone, Debug, PartialEq)]
pub struct IbpBounds {
    /// `pre[l][i]` encloses the pre-activation of neuron `i` in layer `l`.
    pub pre: Vec<Vec<Interval>>,
    /// `post[l][i]` encloses the post-activation of the same neuron.
    pub post: Vec<Vec<Interval>>,
    pub output: AxisBox,
}

/// Interval image of `w·x + b` for `x` in the given intervals.
///
/// The result is widened by a bound on the floating-point error of the dot
/// product so that it also encloses values computed by [`Layer::affine`].
///
/// [`Layer::affine`]: super::Layer::affine
pub fn affine_interval(row: &[f64], bias: f64, inputs: &[Interval]) -> Interval {
    let mut lo = bias;
    let mut hi = bias;
    let mut mag = bias.abs();
    for (w, iv) in row.iter().zip(inputs) {
        if *w >= 0.0 {
            lo += w * iv.lo;
            hi += w * iv.hi;
        } else {
            lo += w * iv.hi;
            hi += w * iv.lo;
        }
        mag += w.abs() * iv.lo.abs().max(iv.hi.abs());
    }
    let slack = 2.0 * (row.len() as f64 + 2.0) * f64::EPSILON * mag;
    Interval::new(lo - slack, hi + slack)
}

pub fn propagate_box(net: &FeedforwardNetwork, domain: &AxisBox) -> Result<IbpBounds> {
    if domain.dim() != net.input_dim() {
        return Err(Error::Dimension {
            expected: net.input_dim(),
            got: domain.dim(),
        });
    }
    let mut current = domain.intervals();
    let mut pre = Vec::with_capacity(net.layers().len());
    let mut post = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let z: Vec<Interval> = layer
            .weights
            .iter()
            .zip(&layer.bias)
            .map(|(row, b)| affine_interval(row, *b, &current))
            .collect();
        let act = layer.activation;
        let a: Vec<Interval> = z
            .iter()
            .map(|iv| {
                let lo = act.eval(iv.lo);
                let hi = act.eval(iv.hi);
                if act == super::Activation::Identity {
                    Interval::new(lo, hi)
                } else {
                    Interval::new(lo.next_down(), hi.next_up())
                }
            })
            .collect();
        pre.push(z);
        post.push(a.clone());
        current = a;
    }
    let output = AxisBox {
        lower: current.iter().map(|iv| iv.lo).collect(),
        upper: current.iter().map(|iv| iv.hi).collect(),
    };
    Ok(IbpBounds { pre, post, output })
}
