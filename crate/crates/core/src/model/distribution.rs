use rand::Rng;
use rand_distr::{Beta as BetaSampler, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta as BetaDensity, Continuous, ContinuousCDF, Normal};

use super::{AxisBox, Interval};
use crate::error::{Error, Result};
use crate::exact_cdf::PiecewisePolynomialPdf;
use crate::geometry::Polynomial;

/// Relative widening applied to floating-point density ranges.
const RANGE_SLACK: f64 = 1e-12;

/// Gaussian component with cached factorisation.
#[derive(Clone, Debug)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
    precision: Vec<Vec<f64>>,
    norm: f64,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let n = mean.len();
        if covariance.len() != n || covariance.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("covariance shape does not match mean".into()));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::Invalid(format!("mixture weight {weight}")));
        }
        let chol = cholesky(&covariance)
            .ok_or_else(|| Error::Invalid("covariance is not positive definite".into()))?;
        let det: f64 = (0..n).map(|i| chol[i][i] * chol[i][i]).product();
        let precision = spd_inverse(&chol);
        let norm = (2.0 * std::f64::consts::PI).powf(-(n as f64) / 2.0) / det.sqrt();
        Ok(Self {
            weight,
            mean,
            covariance,
            chol,
            precision,
            norm,
        })
    }

    fn is_diagonal(&self) -> bool {
        let n = self.mean.len();
        (0..n).all(|i| (0..n).all(|j| i == j || self.covariance[i][j] == 0.0))
    }

    fn density(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let mut q = 0.0;
        for (i, di) in d.iter().enumerate() {
            for (j, dj) in d.iter().enumerate() {
                q += self.precision[i][j] * di * dj;
            }
        }
        self.norm * (-0.5 * q).exp()
    }

    /// Enclosure of the density over a box via interval arithmetic on the
    /// quadratic form.
    fn density_range(&self, b: &AxisBox) -> Interval {
        let n = self.mean.len();
        let d: Vec<Interval> = (0..n)
            .map(|i| Interval::new(b.lower[i] - self.mean[i], b.upper[i] - self.mean[i]))
            .collect();
        let (mut qlo, mut qhi) = (0.0, 0.0);
        for i in 0..n {
            let sq = interval_square(d[i]);
            qlo += self.precision[i][i] * sq.lo;
            qhi += self.precision[i][i] * sq.hi;
            for j in i + 1..n {
                let p = 2.0 * self.precision[i][j];
                if p != 0.0 {
                    let prod = interval_mul(d[i], d[j]);
                    let (a, c) = (p * prod.lo, p * prod.hi);
                    qlo += a.min(c);
                    qhi += a.max(c);
                }
            }
        }
        let qlo = qlo.max(0.0);
        Interval::new(
            self.norm * (-0.5 * qhi).exp() * (1.0 - RANGE_SLACK),
            self.norm * (-0.5 * qlo).exp() * (1.0 + RANGE_SLACK),
        )
    }

    fn box_mass(&self, b: &AxisBox) -> Option<f64> {
        if !self.is_diagonal() {
            return None;
        }
        let mut m = 1.0;
        for i in 0..self.mean.len() {
            let nd = Normal::new(self.mean[i], self.covariance[i][i].sqrt()).ok()?;
            m *= nd.cdf(b.upper[i]) - nd.cdf(b.lower[i]);
        }
        Some(m)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.mean.len();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..n {
            out[i] = self.mean[i] + (0..=i).map(|j| self.chol[i][j] * z[j]).sum::<f64>();
        }
    }
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn spd_inverse(l: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = l.len();
    let mut inv = vec![vec![0.0; n]; n];
    for col in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let rhs = if i == col { 1.0 } else { 0.0 };
            y[i] = (rhs - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
        }
        for i in 0..n {
            inv[i][col] = x[i];
        }
    }
    inv
}

fn interval_square(d: Interval) -> Interval {
    if d.lo >= 0.0 {
        Interval::new(d.lo * d.lo, d.hi * d.hi)
    } else if d.hi <= 0.0 {
        Interval::new(d.hi * d.hi, d.lo * d.lo)
    } else {
        Interval::new(0.0, (d.lo * d.lo).max(d.hi * d.hi))
    }
}

fn interval_mul(a: Interval, b: Interval) -> Interval {
    let c = [a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi];
    Interval::new(
        c.iter().cloned().fold(f64::INFINITY, f64::min),
        c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn interval_pow(d: Interval, e: u32) -> Interval {
    if e == 0 {
        return Interval::point(1.0);
    }
    if e.is_multiple_of(2) {
        let s = interval_square(d);
        Interval::new(s.lo.powi(e as i32 / 2), s.hi.powi(e as i32 / 2))
    } else {
        Interval::new(d.lo.powi(e as i32), d.hi.powi(e as i32))
    }
}

/// Enclosure of a polynomial over a box by termwise interval arithmetic.
pub fn polynomial_range(p: &Polynomial, b: &AxisBox) -> Interval {
    let (mut lo, mut hi) = (0.0, 0.0);
    for (e, c) in p.terms() {
        let mut t = Interval::point(c);
        for (i, &k) in e.iter().enumerate() {
            t = interval_mul(t, interval_pow(b.axis(i), k));
        }
        lo += t.lo;
        hi += t.hi;
    }
    let pad = RANGE_SLACK * (lo.abs().max(hi.abs()) + 1e-300);
    Interval::new(lo - pad, hi + pad)
}

/// Input distribution on a compact box.
#[derive(Clone, Debug)]
pub enum InputDistribution {
    Uniform(AxisBox),
    /// Independent Beta factors on `[0,1]^n`.
    BetaProduct(Vec<(f64, f64)>),
    /// Gaussian mixture restricted to a box, without renormalisation.
    GaussianMixture {
        components: Vec<GaussianComponent>,
        support: AxisBox,
    },
    Explicit(PiecewisePolynomialPdf),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawDistribution {
    Uniform {
        #[serde(rename = "box")]
        support: AxisBox,
    },
    BetaProduct {
        shapes: Vec<(f64, f64)>,
        #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
        support: Option<AxisBox>,
    },
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
        #[serde(rename = "box")]
        support: AxisBox,
    },
    Explicit {
        pieces: serde_json::Value,
        #[serde(rename = "box")]
        support: AxisBox,
    },
}

fn beta_factor(a: f64, b: f64) -> Result<BetaDensity> {
    if !(a >= 1.0 && b >= 1.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::UnsupportedDensity(format!(
            "Beta({a}, {b}): shapes below 1 give an unbounded density"
        )));
    }
    BetaDensity::new(a, b).map_err(|e| Error::Invalid(format!("Beta({a}, {b}): {e}")))
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

impl InputDistribution {
    pub fn uniform(support: AxisBox) -> Self {
        Self::Uniform(support)
    }

    pub fn beta_product(shapes: Vec<(f64, f64)>) -> Result<Self> {
        if shapes.is_empty() {
            return Err(Error::Invalid("beta product needs at least one factor".into()));
        }
        for &(a, b) in &shapes {
            beta_factor(a, b)?;
        }
        Ok(Self::BetaProduct(shapes))
    }

    pub fn gaussian_mixture(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
        support: AxisBox,
    ) -> Result<Self> {
        if weights.len() != means.len() || weights.len() != covariances.len() || weights.is_empty() {
            return Err(Error::Invalid("mixture weights, means and covariances differ in length".into()));
        }
        let components = weights
            .into_iter()
            .zip(means)
            .zip(covariances)
            .map(|((w, m), c)| {
                if m.len() != support.dim() {
                    return Err(Error::Dimension {
                        expected: support.dim(),
                        got: m.len(),
                    });
                }
                GaussianComponent::new(w, m, c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::GaussianMixture {
            components,
            support,
        })
    }

    pub fn support(&self) -> AxisBox {
        match self {
            Self::Uniform(b) => b.clone(),
            Self::BetaProduct(s) => AxisBox::unit(s.len()),
            Self::GaussianMixture { support, .. } => support.clone(),
            Self::Explicit(p) => p.support.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.support().dim()
    }

    /// Density at `x`; zero outside the support box.
    pub fn density(&self, x: &[f64]) -> f64 {
        let support = self.support();
        if !support.contains(x) {
            return 0.0;
        }
        match self {
            Self::Uniform(b) => 1.0 / b.volume(),
            Self::BetaProduct(shapes) => shapes
                .iter()
                .zip(x)
                .map(|(&(a, b), &v)| beta_factor(a, b).map_or(0.0, |d| d.pdf(v)))
                .product(),
            Self::GaussianMixture { components, .. } => {
                components.iter().map(|c| c.weight * c.density(x)).sum()
            }
            Self::Explicit(p) => p.density(x),
        }
    }

    /// Guaranteed enclosure of the density over a sub-box of the support.
    pub fn density_range(&self, b: &AxisBox) -> Result<Interval> {
        if b.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: b.dim(),
            });
        }
        Ok(match self {
            Self::Uniform(s) => Interval::point(1.0 / s.volume()),
            Self::BetaProduct(shapes) => {
                let (mut lo, mut hi) = (1.0, 1.0);
                for (i, &(a, bb)) in shapes.iter().enumerate() {
                    let d = beta_factor(a, bb)?;
                    let (l, u) = (b.lower[i].max(0.0), b.upper[i].min(1.0));
                    let mode = if a + bb > 2.0 { (a - 1.0) / (a + bb - 2.0) } else { 0.5 };
                    let peak = d.pdf(mode.clamp(l, u));
                    let (dl, du) = (d.pdf(l), d.pdf(u));
                    lo *= dl.min(du);
                    hi *= peak.max(dl).max(du);
                }
                Interval::new(lo * (1.0 - RANGE_SLACK), hi * (1.0 + RANGE_SLACK))
            }
            Self::GaussianMixture { components, .. } => {
                components.iter().fold(Interval::point(0.0), |acc, c| {
                    let r = c.density_range(b);
                    Interval::new(acc.lo + c.weight * r.lo, acc.hi + c.weight * r.hi)
                })
            }
            Self::Explicit(p) => {
                let mut out: Option<Interval> = None;
                for piece in &p.pieces {
                    let (slo, shi) = piece.simplex.bounding_box();
                    if (0..b.dim()).any(|i| slo[i] > b.upper[i] || shi[i] < b.lower[i]) {
                        continue;
                    }
                    let lower: Vec<f64> = (0..b.dim()).map(|i| slo[i].max(b.lower[i])).collect();
                    let upper: Vec<f64> = (0..b.dim()).map(|i| shi[i].min(b.upper[i])).collect();
                    let r = polynomial_range(&piece.poly, &AxisBox { lower, upper });
                    out = Some(out.map_or(r, |o| o.hull(&r)));
                }
                let r = out.unwrap_or(Interval::point(0.0));
                Interval::new(r.lo.max(0.0), r.hi.max(0.0))
            }
        })
    }

    /// Exact piecewise-polynomial form of the density, if it has one.
    pub fn pdf_as_piecewise_polynomial(&self) -> Option<PiecewisePolynomialPdf> {
        match self {
            Self::Uniform(b) => {
                let p = Polynomial::constant(b.dim(), 1.0 / b.volume());
                PiecewisePolynomialPdf::global(b.clone(), p).ok()
            }
            Self::BetaProduct(shapes) => {
                let n = shapes.len();
                let mut poly = Polynomial::constant(n, 1.0);
                for (i, &(a, b)) in shapes.iter().enumerate() {
                    if a.fract() != 0.0 || b.fract() != 0.0 {
                        return None;
                    }
                    let (ka, kb) = (a as u32 - 1, b as u32 - 1);
                    let norm = factorial(ka + kb + 1) / (factorial(ka) * factorial(kb));
                    let x = Polynomial::variable(n, i);
                    let one_minus = Polynomial::constant(n, 1.0).add(&x.scale(-1.0));
                    let factor = x.pow(ka).mul(&one_minus.pow(kb)).scale(norm);
                    poly = poly.mul(&factor);
                }
                PiecewisePolynomialPdf::global(AxisBox::unit(n), poly).ok()
            }
            Self::GaussianMixture { .. } => None,
            Self::Explicit(p) => Some(p.clone()),
        }
    }

    /// Probability mass inside the support box, when available in closed form.
    pub fn mass(&self) -> Option<f64> {
        match self {
            Self::Uniform(_) | Self::BetaProduct(_) => Some(1.0),
            Self::GaussianMixture {
                components,
                support,
            } => components
                .iter()
                .map(|c| c.box_mass(support).map(|m| c.weight * m))
                .sum(),
            Self::Explicit(p) => Some(p.total_mass()),
        }
    }

    /// `1 − mass` for truncated mixtures.
    pub fn mass_deficit(&self) -> Option<f64> {
        self.mass().map(|m| 1.0 - m)
    }

    /// Per-axis samplers for the variants that can be drawn from directly.
    pub fn sampler(&self) -> Result<Sampler> {
        Ok(match self {
            Self::Uniform(b) => Sampler::Uniform(b.clone()),
            Self::BetaProduct(shapes) => Sampler::Beta(
                shapes
                    .iter()
                    .map(|&(a, b)| {
                        BetaSampler::new(a, b)
                            .map_err(|e| Error::Invalid(format!("Beta({a}, {b}): {e}")))
                    })
                    .collect::<Result<_>>()?,
            ),
            Self::GaussianMixture { components, .. } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mut acc = 0.0;
                let cumulative = components
                    .iter()
                    .map(|c| {
                        acc += c.weight / total;
                        acc
                    })
                    .collect();
                Sampler::Mixture {
                    components: components.clone(),
                    cumulative,
                    total,
                }
            }
            Self::Explicit(_) => {
                return Err(Error::UnsupportedDensity(
                    "sampling from explicit piecewise-polynomial densities".into(),
                ))
            }
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawDistribution =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        match raw {
            RawDistribution::Uniform { support } => Ok(Self::Uniform(support)),
            RawDistribution::BetaProduct { shapes, support } => {
                if let Some(b) = support {
                    if b != AxisBox::unit(shapes.len()) {
                        return Err(Error::Invalid("beta product box must be [0,1]^n".into()));
                    }
                }
                Self::beta_product(shapes)
            }
            RawDistribution::GaussianMixture {
                weights,
                means,
                covariances,
                support,
            } => Self::gaussian_mixture(weights, means, covariances, support),
            RawDistribution::Explicit { pieces, support } => {
                let v = serde_json::json!({ "pieces": pieces });
                Ok(Self::Explicit(PiecewisePolynomialPdf::from_json_value(support, &v)?))
            }
        }
    }

    pub fn to_json_string(&self) -> String {
        let raw = match self {
            Self::Uniform(b) => RawDistribution::Uniform { support: b.clone() },
            Self::BetaProduct(shapes) => RawDistribution::BetaProduct {
                shapes: shapes.clone(),
                support: Some(AxisBox::unit(shapes.len())),
            },
            Self::GaussianMixture {
                components,
                support,
            } => RawDistribution::GaussianMixture {
                weights: components.iter().map(|c| c.weight).collect(),
                means: components.iter().map(|c| c.mean.clone()).collect(),
                covariances: components.iter().map(|c| c.covariance.clone()).collect(),
                support: support.clone(),
            },
            Self::Explicit(p) => RawDistribution::Explicit {
                pieces: p.to_json_value()["pieces"].clone(),
                support: p.support.clone(),
            },
        };
        serde_json::to_string(&raw).expect("distribution serialises")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&s)
    }
}

/// Draws points from an [`InputDistribution`]. Mixture draws are not
/// truncated, so they may fall outside the support box.
#[derive(Clone, Debug)]
pub enum Sampler {
    Uniform(AxisBox),
    Beta(Vec<BetaSampler<f64>>),
    Mixture {
        components: Vec<GaussianComponent>,
        cumulative: Vec<f64>,
        total: f64,
    },
}

impl Sampler {
    /// Fills `out` with one draw. Mixture draws are scaled so that the
    /// weights need not sum to one: a draw is discarded (returns `false`)
    /// with probability `1 − Σw` when `Σw < 1`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> bool {
        match self {
            Sampler::Uniform(b) => {
                for i in 0..b.dim() {
                    out[i] = rng.random_range(b.lower[i]..=b.upper[i]);
                }
                true
            }
            Sampler::Beta(factors) => {
                for (o, d) in out.iter_mut().zip(factors) {
                    *o = d.sample(rng);
                }
                true
            }
            Sampler::Mixture {
                components,
                cumulative,
                total,
            } => {
                if *total < 1.0 && rng.random::<f64>() >= *total {
                    return false;
                }
                let u: f64 = rng.random();
                let k = cumulative.partition_point(|&c| c <= u).min(components.len() - 1);
                components[k].sample(rng, out);
                true
            }
        }
    }
}
