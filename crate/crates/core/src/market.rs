//! Market and investor parameters, jump-size laws and their truncated moments.
//!
//! The Lévy measure of the jump part is `ν(dq) = λ · law(Q)(dq)`. Methods on
//! [`JumpDistribution`] work with the unit-mass law; the `MarketParams`
//! methods multiply by the intensity.
//!
//! Truncation conventions: "below" integrals include the point (`Q ≤ x`),
//! the tail mass excludes it (`Q > x`).

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Tolerance on the trapezoidal mass of a tabulated density.
pub const TABULATED_MASS_TOL: f64 = 1e-9;

/// Law of the relative jump size `Q`, supported in `[-1, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JumpSpec", into = "JumpSpec")]
pub enum JumpDistribution {
    /// Point mass at `q0`.
    Constant { q0: f64 },
    /// Uniform on `[qd, qu]`.
    Uniform { qd: f64, qu: f64 },
    /// Shifted exponential: density `θ e^{-θ(q - qd)}` on `[qd, ∞)`.
    Exponential { theta: f64, qd: f64 },
    /// Piecewise-linear density on a strictly increasing grid.
    Tabulated(TabulatedLaw),
}

/// Serialized form of a jump law: `{"type": "...", ...parameters}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum JumpSpec {
    Constant {
        q0: f64,
    },
    Uniform {
        qd: f64,
        qu: f64,
    },
    Exponential {
        theta: f64,
        qd: f64,
    },
    /// `points` is a list of `[q, density]` pairs.
    Tabulated {
        points: Vec<(f64, f64)>,
    },
}

impl TryFrom<JumpSpec> for JumpDistribution {
    type Error = Error;

    fn try_from(spec: JumpSpec) -> Result<Self> {
        match spec {
            JumpSpec::Constant { q0 } => JumpDistribution::constant(q0),
            JumpSpec::Uniform { qd, qu } => JumpDistribution::uniform(qd, qu),
            JumpSpec::Exponential { theta, qd } => JumpDistribution::exponential(theta, qd),
            JumpSpec::Tabulated { points } => JumpDistribution::tabulated(points),
        }
    }
}

impl From<JumpDistribution> for JumpSpec {
    fn from(law: JumpDistribution) -> Self {
        match law {
            JumpDistribution::Constant { q0 } => JumpSpec::Constant { q0 },
            JumpDistribution::Uniform { qd, qu } => JumpSpec::Uniform { qd, qu },
            JumpDistribution::Exponential { theta, qd } => JumpSpec::Exponential { theta, qd },
            JumpDistribution::Tabulated(t) => JumpSpec::Tabulated {
                points: t.grid.iter().copied().zip(t.density.iter().copied()).collect(),
            },
        }
    }
}

/// A tabulated density, normalised to unit trapezoidal mass at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedLaw {
    grid: Vec<f64>,
    density: Vec<f64>,
    // cumulative trapezoid integrals of p, q·p and q²·p at the grid points
    cum0: Vec<f64>,
    cum1: Vec<f64>,
    cum2: Vec<f64>,
}

impl TabulatedLaw {
    fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(param("points", "tabulated law needs at least two grid points"));
        }
        for (i, &(q, p)) in points.iter().enumerate() {
            if !q.is_finite() || !p.is_finite() {
                return Err(param("points", format!("non-finite entry at index {i}")));
            }
            if q < -1.0 {
                return Err(param("points", format!("q = {q} below -1 at index {i}")));
            }
            if p < 0.0 {
                return Err(param("points", format!("negative density at index {i}")));
            }
            if i > 0 && q <= points[i - 1].0 {
                return Err(param("points", format!("grid not strictly increasing at index {i}")));
            }
        }
        let grid: Vec<f64> = points.iter().map(|p| p.0).collect();
        let raw: Vec<f64> = points.iter().map(|p| p.1).collect();
        let mass = trapezoid_cumulative(&grid, &raw, |_| 1.0)
            .last()
            .copied()
            .unwrap_or(0.0);
        if (mass - 1.0).abs() > TABULATED_MASS_TOL {
            return Err(param(
                "points",
                format!("density integrates to {mass}, expected 1 within {TABULATED_MASS_TOL:e}"),
            ));
        }
        let density: Vec<f64> = raw.iter().map(|p| p / mass).collect();
        let cum0 = trapezoid_cumulative(&grid, &density, |_| 1.0);
        let cum1 = trapezoid_cumulative(&grid, &density, |q| q);
        let cum2 = trapezoid_cumulative(&grid, &density, |q| q * q);
        Ok(TabulatedLaw {
            grid,
            density,
            cum0,
            cum1,
            cum2,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    fn density_at(&self, k: usize, x: f64) -> f64 {
        let (a, b) = (self.grid[k], self.grid[k + 1]);
        let w = (x - a) / (b - a);
        self.density[k] * (1.0 - w) + self.density[k + 1] * w
    }

    /// Trapezoidal `∫_{grid_0}^{x} g(q) p(q) dq`, with the last partial
    /// segment integrated against the interpolated density.
    fn integral_below(&self, x: f64, cum: &[f64], g: impl Fn(f64) -> f64) -> f64 {
        let n = self.grid.len();
        if x < self.grid[0] {
            return 0.0;
        }
        if x >= self.grid[n - 1] {
            return cum[n - 1];
        }
        // largest k with grid[k] <= x
        let k = self.grid.partition_point(|&q| q <= x) - 1;
        let a = self.grid[k];
        let pa = self.density[k];
        let px = self.density_at(k, x);
        cum[k] + 0.5 * (x - a) * (g(a) * pa + g(x) * px)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cum0.last().unwrap();
        let target = rng.random::<f64>() * total;
        let n = self.grid.len();
        let k = self.cum0.partition_point(|&c| c <= target).clamp(1, n - 1) - 1;
        let (a, b) = (self.grid[k], self.grid[k + 1]);
        let h = b - a;
        let (pa, pb) = (self.density[k], self.density[k + 1]);
        let m = (target - self.cum0[k]).max(0.0);
        // solve pa·t + (pb - pa)·t²/(2h) = m for t in [0, h]
        let slope = (pb - pa) / h;
        let t = if slope.abs() < 1e-14 * (pa.abs() + pb.abs()).max(1e-300) {
            if pa > 0.0 {
                m / pa
            } else {
                0.0
            }
        } else {
            let disc = (pa * pa + 2.0 * slope * m).max(0.0);
            (disc.sqrt() - pa) / slope
        };
        (a + t.clamp(0.0, h)).min(b)
    }
}

fn trapezoid_cumulative(grid: &[f64], density: &[f64], g: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..grid.len() {
        let h = grid[k] - grid[k - 1];
        acc += 0.5 * h * (g(grid[k - 1]) * density[k - 1] + g(grid[k]) * density[k]);
        out.push(acc);
    }
    out
}

impl JumpDistribution {
    pub fn constant(q0: f64) -> Result<Self> {
        if !q0.is_finite() || q0 < -1.0 {
            return Err(param("q0", format!("must be finite and >= -1, got {q0}")));
        }
        Ok(JumpDistribution::Constant { q0 })
    }

    pub fn uniform(qd: f64, qu: f64) -> Result<Self> {
        if !qd.is_finite() || !qu.is_finite() {
            return Err(param("qd/qu", "must be finite"));
        }
        if qd < -1.0 {
            return Err(param("qd", format!("must be >= -1, got {qd}")));
        }
        if qu <= qd {
            return Err(param("qu", format!("must exceed qd = {qd}, got {qu}")));
        }
        Ok(JumpDistribution::Uniform { qd, qu })
    }

    pub fn exponential(theta: f64, qd: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(param("theta", format!("must be > 0, got {theta}")));
        }
        if !qd.is_finite() || qd < -1.0 {
            return Err(param("qd", format!("must be finite and >= -1, got {qd}")));
        }
        Ok(JumpDistribution::Exponential { theta, qd })
    }

    /// Builds a tabulated law from `(q, density)` pairs. The grid must be
    /// strictly increasing and the trapezoidal mass must be 1 within
    /// [`TABULATED_MASS_TOL`]; the density is then rescaled to exact unit mass.
    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        TabulatedLaw::new(points).map(JumpDistribution::Tabulated)
    }

    /// Re-checks the support and parameter constraints.
    pub fn validate(&self) -> Result<()> {
        match *self {
            JumpDistribution::Constant { q0 } => Self::constant(q0).map(|_| ()),
            JumpDistribution::Uniform { qd, qu } => Self::uniform(qd, qu).map(|_| ()),
            JumpDistribution::Exponential { theta, qd } => Self::exponential(theta, qd).map(|_| ()),
            JumpDistribution::Tabulated(_) => Ok(()),
        }
    }

    /// `(E[Q], E[Q²])`.
    pub fn moments(&self) -> (f64, f64) {
        match self {
            JumpDistribution::Constant { q0 } => (*q0, q0 * q0),
            JumpDistribution::Uniform { qd, qu } => ((qd + qu) / 2.0, (qd * qd + qd * qu + qu * qu) / 3.0),
            JumpDistribution::Exponential { theta, qd } => {
                let m = qd + 1.0 / theta;
                (m, m * m + 1.0 / (theta * theta))
            }
            JumpDistribution::Tabulated(t) => (*t.cum1.last().unwrap(), *t.cum2.last().unwrap()),
        }
    }

    /// `E[Q · 1{Q ≤ x}]`.
    pub fn mean_below(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return self.moments().0;
        }
        match self {
            JumpDistribution::Constant { q0 } => {
                if *q0 <= x {
                    *q0
                } else {
                    0.0
                }
            }
            JumpDistribution::Uniform { qd, qu } => {
                let c = x.clamp(*qd, *qu);
                (c * c - qd * qd) / (2.0 * (qu - qd))
            }
            JumpDistribution::Exponential { theta, qd } => {
                if x < *qd {
                    return 0.0;
                }
                let e = (-theta * (x - qd)).exp();
                (qd + 1.0 / theta) - (x + 1.0 / theta) * e
            }
            JumpDistribution::Tabulated(t) => t.integral_below(x, &t.cum1, |q| q),
        }
    }

    /// `E[Q² · 1{Q ≤ x}]`.
    pub fn second_below(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return self.moments().1;
        }
        match self {
            JumpDistribution::Constant { q0 } => {
                if *q0 <= x {
                    q0 * q0
                } else {
                    0.0
                }
            }
            JumpDistribution::Uniform { qd, qu } => {
                let c = x.clamp(*qd, *qu);
                (c * c * c - qd * qd * qd) / (3.0 * (qu - qd))
            }
            JumpDistribution::Exponential { theta, qd } => {
                if x < *qd {
                    return 0.0;
                }
                let g = |q: f64| q * q + 2.0 * q / theta + 2.0 / (theta * theta);
                let e = (-theta * (x - qd)).exp();
                g(*qd) - g(x) * e
            }
            JumpDistribution::Tabulated(t) => t.integral_below(x, &t.cum2, |q| q * q),
        }
    }

    /// `P(Q > x)`, strict at the truncation point.
    pub fn prob_above(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 0.0;
        }
        match self {
            JumpDistribution::Constant { q0 } => {
                if *q0 > x {
                    1.0
                } else {
                    0.0
                }
            }
            JumpDistribution::Uniform { qd, qu } => {
                let c = x.clamp(*qd, *qu);
                (qu - c) / (qu - qd)
            }
            JumpDistribution::Exponential { theta, qd } => {
                if x < *qd {
                    1.0
                } else {
                    (-theta * (x - qd)).exp()
                }
            }
            JumpDistribution::Tabulated(t) => {
                let total = *t.cum0.last().unwrap();
                (total - t.integral_below(x, &t.cum0, |_| 1.0)).max(0.0)
            }
        }
    }

    /// Smallest and largest points of the support (upper may be infinite).
    pub fn support(&self) -> (f64, f64) {
        match self {
            JumpDistribution::Constant { q0 } => (*q0, *q0),
            JumpDistribution::Uniform { qd, qu } => (*qd, *qu),
            JumpDistribution::Exponential { qd, .. } => (*qd, f64::INFINITY),
            JumpDistribution::Tabulated(t) => (t.grid[0], *t.grid.last().unwrap()),
        }
    }

    /// Draws one jump size.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpDistribution::Constant { q0 } => *q0,
            JumpDistribution::Uniform { qd, qu } => qd + (qu - qd) * rng.random::<f64>(),
            JumpDistribution::Exponential { theta, qd } => {
                qd + Exp::new(*theta).expect("theta validated > 0").sample(rng)
            }
            JumpDistribution::Tabulated(t) => t.sample(rng),
        }
    }
}

/// Single risky asset market: `dS/S = μ dt + σ dB + dL`, risk-free rate `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub jump: JumpDistribution,
}

impl MarketParams {
    pub fn new(r: f64, mu: f64, sigma: f64, lambda: f64, jump: JumpDistribution) -> Result<Self> {
        let m = MarketParams {
            r,
            mu,
            sigma,
            lambda,
            jump,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r", self.r),
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("lambda", self.lambda),
        ] {
            if !v.is_finite() {
                return Err(param(name, "must be finite"));
            }
        }
        if self.sigma <= 0.0 {
            return Err(param("sigma", format!("must be > 0, got {}", self.sigma)));
        }
        if self.lambda < 0.0 {
            return Err(param("lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        self.jump.validate()?;
        let premium = self.risk_premium();
        if premium <= 0.0 {
            return Err(Error::Market(format!(
                "risk premium mu - r + lambda*xi1 = {premium} must be positive"
            )));
        }
        Ok(())
    }

    /// `μ − r + λ ξ1`.
    pub fn risk_premium(&self) -> f64 {
        self.mu - self.r + self.lambda * self.jump.moments().0
    }

    /// `(ξ1, ξ2²)` of the jump law.
    pub fn moments(&self) -> (f64, f64) {
        self.jump.moments()
    }

    /// `∫_{-1}^{x} q ν(dq)`.
    pub fn truncated_first(&self, x: f64) -> f64 {
        self.lambda * self.jump.mean_below(x)
    }

    /// `∫_{-1}^{x} q² ν(dq)`.
    pub fn truncated_second(&self, x: f64) -> f64 {
        self.lambda * self.jump.second_below(x)
    }

    /// `∫_{x+}^{∞} ν(dq)`.
    pub fn tail_mass(&self, x: f64) -> f64 {
        self.lambda * self.jump.prob_above(x)
    }
}

/// Investor and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestorParams {
    /// Uncertainty aversion.
    pub gamma: f64,
    pub x0: f64,
    pub t0: f64,
    /// Terminal time `T`.
    pub horizon: f64,
}

impl InvestorParams {
    pub fn new(gamma: f64, x0: f64, t0: f64, horizon: f64) -> Result<Self> {
        let p = InvestorParams { gamma, x0, t0, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(param("gamma", format!("must be > 0, got {}", self.gamma)));
        }
        if !self.x0.is_finite() || !self.t0.is_finite() || !self.horizon.is_finite() {
            return Err(param("x0/t0/horizon", "must be finite"));
        }
        if self.horizon <= self.t0 {
            return Err(param(
                "horizon",
                format!("must exceed t0 = {}, got {}", self.t0, self.horizon),
            ));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.horizon - self.t0
    }
}
