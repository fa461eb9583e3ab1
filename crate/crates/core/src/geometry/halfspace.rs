use serde::{Deserialize, Serialize};

use super::linalg::{dot, norm};
use crate::error::{Error, Result};
use crate::model::AxisBox;

/// `{x : normal·x ≤ offset}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.iter().all(|v| *v == 0.0) {
            return Err(Error::Invalid("halfspace with zero normal".into()));
        }
        Ok(Self { normal, offset })
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// Signed slack `normal·x − offset` (negative inside).
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.eval(x) <= tol * norm(&self.normal)
    }

    /// The complementary closed halfspace `normal·x ≥ offset`.
    pub fn flipped(&self) -> Self {
        Self {
            normal: self.normal.iter().map(|v| -v).collect(),
            offset: -self.offset,
        }
    }

    /// Same set with a unit normal.
    pub fn normalized(&self) -> Self {
        let n = norm(&self.normal);
        Self {
            normal: self.normal.iter().map(|v| v / n).collect(),
            offset: self.offset / n,
        }
    }
}

/// Intersection of finitely many closed halfspaces. Empty list = whole space.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HPolytope {
    pub halfspaces: Vec<Halfspace>,
}

impl HPolytope {
    pub fn new(halfspaces: Vec<Halfspace>) -> Self {
        Self { halfspaces }
    }

    pub fn from_box(b: &AxisBox) -> Self {
        let n = b.dim();
        let mut hs = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = -1.0;
            hs.push(Halfspace {
                normal: e.clone(),
                offset: -b.lower[i],
            });
            e[i] = 1.0;
            hs.push(Halfspace {
                normal: e,
                offset: b.upper[i],
            });
        }
        Self { halfspaces: hs }
    }

    pub fn len(&self) -> usize {
        self.halfspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.halfspaces.is_empty()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.contains(x, tol))
    }
}
