use serde::{Deserialize, Serialize};

/// Scalar activation applied per neuron.
///
/// All kinds are continuous and monotone nondecreasing on their domain. `Log`
/// is only defined for positive arguments. `Square` is `t²` for `t ≥ 0` and
/// `0` below, which keeps it monotone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Logistic,
    Square,
    Exp,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    Linear,
    Convex,
    Concave,
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn tag(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Logistic => "logistic",
            Activation::Square => "square",
            Activation::Exp => "exp",
            Activation::Log => "log",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "identity" | "linear" => Activation::Identity,
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            "logistic" | "sigmoid" => Activation::Logistic,
            "square" => Activation::Square,
            "exp" => Activation::Exp,
            "log" => Activation::Log,
            _ => return None,
        })
    }

    /// True for the kinds whose networks are handled by exact region enumeration.
    pub fn is_piecewise_linear(self) -> bool {
        matches!(self, Activation::Identity | Activation::Relu)
    }

    pub fn eval(self, t: f64) -> f64 {
        match self {
            Activation::Identity => t,
            Activation::Relu => t.max(0.0),
            Activation::Tanh => t.tanh(),
            Activation::Logistic => logistic(t),
            Activation::Square => {
                if t > 0.0 {
                    t * t
                } else {
                    0.0
                }
            }
            Activation::Exp => t.exp(),
            Activation::Log => {
                if t > 0.0 {
                    t.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Derivative from the right.
    pub fn deriv_right(self, t: f64) -> f64 {
        match self {
            Activation::Relu => {
                if t >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Square => {
                if t >= 0.0 {
                    2.0 * t
                } else {
                    0.0
                }
            }
            _ => self.deriv(t),
        }
    }

    /// Derivative from the left.
    pub fn deriv_left(self, t: f64) -> f64 {
        match self {
            Activation::Relu => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Square => {
                if t > 0.0 {
                    2.0 * t
                } else {
                    0.0
                }
            }
            _ => self.deriv(t),
        }
    }

    fn deriv(self, t: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => self.deriv_right(t),
            Activation::Tanh => {
                let th = t.tanh();
                1.0 - th * th
            }
            Activation::Logistic => {
                let s = logistic(t);
                s * (1.0 - s)
            }
            Activation::Square => self.deriv_right(t),
            Activation::Exp => t.exp(),
            Activation::Log => 1.0 / t,
        }
    }

    /// Second derivative away from kinks.
    pub fn second_deriv(self, t: f64) -> f64 {
        match self {
            Activation::Identity | Activation::Relu => 0.0,
            Activation::Tanh => {
                let th = t.tanh();
                -2.0 * th * (1.0 - th * th)
            }
            Activation::Logistic => {
                let s = logistic(t);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::Square => {
                if t > 0.0 {
                    2.0
                } else {
                    0.0
                }
            }
            Activation::Exp => t.exp(),
            Activation::Log => -1.0 / (t * t),
        }
    }

    /// Points where the second derivative changes sign.
    pub fn inflection_points(self) -> &'static [f64] {
        match self {
            Activation::Tanh | Activation::Logistic => &[0.0],
            _ => &[],
        }
    }

    /// Points where the first or second derivative is discontinuous.
    pub fn kink_points(self) -> &'static [f64] {
        match self {
            Activation::Relu | Activation::Square => &[0.0],
            _ => &[],
        }
    }

    /// Curvature on an open interval free of inflection and kink points.
    pub fn curvature_at(self, t: f64) -> Curvature {
        match self {
            Activation::Identity | Activation::Relu => Curvature::Linear,
            Activation::Square => {
                if t > 0.0 {
                    Curvature::Convex
                } else {
                    Curvature::Linear
                }
            }
            Activation::Exp => Curvature::Convex,
            Activation::Log => Curvature::Concave,
            Activation::Tanh | Activation::Logistic => {
                if t < 0.0 {
                    Curvature::Convex
                } else {
                    Curvature::Concave
                }
            }
        }
    }

    /// Smallest argument where the activation is defined.
    pub fn domain_lower(self) -> f64 {
        match self {
            Activation::Log => 0.0,
            _ => f64::NEG_INFINITY,
        }
    }
}
