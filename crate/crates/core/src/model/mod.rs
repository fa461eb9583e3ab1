//! Networks, boxes, input distributions and interval bound propagation.

mod activation;
mod distribution;
mod domain;
mod ibp;
mod network;

pub use activation::{Activation, Curvature};
pub use distribution::{polynomial_range, GaussianComponent, InputDistribution, Sampler};
pub use domain::{AxisBox, Interval};
pub use ibp::{affine_interval, propagate_box, IbpBounds};
pub use network::{FeedforwardNetwork, Layer};
