//! MV and MMV preference constants for a single risky asset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{JumpDistribution, MarketParams};

/// Default tolerance of the `q_mmv` bisection.
pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_BISECTIONS: usize = 400;

/// Constants that drive the MV and MMV strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolvedPreferences {
    pub q_mv: f64,
    pub q_mmv: f64,
    pub c_mv: f64,
    pub c_mmv: f64,
    /// `σ / q_mmv`.
    pub phi1_star: f64,
    /// `|f(q_mmv)|`.
    pub residual: f64,
    /// No jump can exceed `q_mv`, so MV and MMV coincide.
    pub consistent: bool,
}

impl SolvedPreferences {
    /// `φ2*(q) = min(q / q_mmv, 1)`.
    pub fn phi2_star(&self, q: f64) -> f64 {
        (q / self.q_mmv).min(1.0)
    }
}

/// `(σ² + λξ2²) / (μ − r + λξ1)`.
pub fn q_mv(market: &MarketParams) -> Result<f64> {
    let premium = checked_premium(market)?;
    let (_, xi2_sq) = market.moments();
    Ok((market.sigma * market.sigma + market.lambda * xi2_sq) / premium)
}

/// `(μ − r + λξ1)² / (σ² + λξ2²)`.
pub fn c_mv(market: &MarketParams) -> Result<f64> {
    let premium = checked_premium(market)?;
    let (_, xi2_sq) = market.moments();
    Ok(premium * premium / (market.sigma * market.sigma + market.lambda * xi2_sq))
}

fn checked_premium(market: &MarketParams) -> Result<f64> {
    let premium = market.risk_premium();
    if premium > 0.0 {
        Ok(premium)
    } else {
        Err(Error::Market(format!(
            "risk premium mu - r + lambda*xi1 = {premium} must be positive"
        )))
    }
}

/// The function whose unique positive zero is `q_mmv`:
/// `f(x) = σ² − x(μ − r + λξ1 − ∫ q·min(q/x, 1) ν(dq))`.
///
/// `f(0)` is defined as `σ² + λξ2²`.
pub fn f_objective(market: &MarketParams, x: f64) -> f64 {
    let s2 = market.sigma * market.sigma;
    let excess = market.mu - market.r;
    if x > 0.0 {
        s2 + market.truncated_second(x) - x * (excess + market.truncated_first(x))
    } else if x < 0.0 {
        // min(q/x, 1) = q/x exactly when q ≥ x; the integrand q² − xq vanishes at q = x
        let (xi1, xi2_sq) = market.moments();
        let upper_second = market.lambda * xi2_sq - market.truncated_second(x);
        let upper_first = market.lambda * xi1 - market.truncated_first(x);
        s2 - x * excess + upper_second - x * upper_first
    } else {
        s2 + market.lambda * market.moments().1
    }
}

/// Bisection for the zero of [`f_objective`] on `[0, q_mv]`.
///
/// Returns `q_mv` itself when `|f(q_mv)| < tol`.
pub fn solve_q_mmv(market: &MarketParams, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(crate::error::param("tol", format!("must be > 0, got {tol}")));
    }
    let hi0 = q_mv(market)?;
    let f_hi = f_objective(market, hi0);
    if f_hi.abs() < tol {
        return Ok(hi0);
    }
    if f_hi > 0.0 {
        return Err(Error::InternalConsistency(format!(
            "f(q_mv) = {f_hi:e} > 0; the bracket [0, q_mv] does not contain a root"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, hi0);
    let mut best = (hi0, f_hi.abs());
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f_objective(market, mid);
        if fm.abs() < best.1 {
            best = (mid, fm.abs());
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < tol && best.1 < tol {
            break;
        }
    }
    Ok(best.0)
}

/// `(μ − r + T1(q))² / (σ² + T2(q)) + tail(q)` with truncated moments at `q`.
pub fn c_mmv(market: &MarketParams, q_mmv: f64) -> f64 {
    let num = market.mu - market.r + market.truncated_first(q_mmv);
    let den = market.sigma * market.sigma + market.truncated_second(q_mmv);
    num * num / den + market.tail_mass(q_mmv)
}

/// Whether the jump support lies at or below `q_mv`.
fn is_consistent(market: &MarketParams, q_mv: f64) -> bool {
    let tail = market.tail_mass(q_mv);
    match market.jump {
        JumpDistribution::Tabulated(_) => tail < 1e-12,
        _ => tail == 0.0,
    }
}

/// Assembles every preference constant for `market`.
pub fn solve(market: &MarketParams, tol: f64) -> Result<SolvedPreferences> {
    market.validate()?;
    let qmv = q_mv(market)?;
    let cmv = c_mv(market)?;
    let consistent = market.lambda == 0.0 || is_consistent(market, qmv);
    let (qmmv, cmmv) = if consistent {
        (qmv, cmv)
    } else {
        let q = solve_q_mmv(market, tol)?;
        (q, c_mmv(market, q))
    };
    if qmmv <= 0.0 {
        return Err(Error::InternalConsistency(format!("q_mmv = {qmmv} is not positive")));
    }
    Ok(SolvedPreferences {
        q_mv: qmv,
        q_mmv: qmmv,
        c_mv: cmv,
        c_mmv: cmmv,
        phi1_star: market.sigma / qmmv,
        residual: f_objective(market, qmmv).abs(),
        consistent,
    })
}
