//! Multi-asset MMV: the fixed-point system for the vector of thresholds,
//! two-fund separation and CAPM betas against the MMV pricing operator.
//!
//! Asset `i` has jump intensity `λ_i` and jump law `Q_i`. Jumps of different
//! assets never share a time: each asset's compound Poisson process is drawn
//! independently.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::market::{InvestorParams, JumpDistribution};
use crate::montecarlo::{mean, MCConfig};
use crate::simulate::{draw_jump_times, TimeGrid};
use crate::strategy::{StrategyKind, TargetCurve};

pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Damping of the fixed-point update.
const DAMPING: f64 = 0.5;

/// `n` risky assets driven by a `d`-dimensional Brownian motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiMarket {
    pub r: f64,
    pub mu: Vec<f64>,
    /// `n × d` loadings, one row per asset.
    pub sigma: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    pub jumps: Vec<JumpDistribution>,
}

impl MultiMarket {
    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }

    pub fn n_factors(&self) -> usize {
        self.sigma.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_assets();
        if n == 0 {
            return Err(param("mu", "need at least one asset"));
        }
        if self.sigma.len() != n || self.lambdas.len() != n || self.jumps.len() != n {
            return Err(param(
                "sigma/lambdas/jumps",
                format!(
                    "lengths {}, {}, {} must all equal the asset count {n}",
                    self.sigma.len(),
                    self.lambdas.len(),
                    self.jumps.len()
                ),
            ));
        }
        let d = self.n_factors();
        if d == 0 || self.sigma.iter().any(|row| row.len() != d) {
            return Err(param("sigma", "rows must be non-empty and of equal length"));
        }
        if !self.r.is_finite()
            || self
                .mu
                .iter()
                .chain(self.sigma.iter().flatten())
                .any(|v| !v.is_finite())
        {
            return Err(param("mu/sigma/r", "must be finite"));
        }
        for (i, &l) in self.lambdas.iter().enumerate() {
            if !(l.is_finite() && l >= 0.0) {
                return Err(param(&format!("lambdas[{i}]"), format!("must be >= 0, got {l}")));
            }
        }
        for j in &self.jumps {
            j.validate()?;
        }
        let omega = self.omega_bar();
        let scale = omega.diagonal().max();
        // pivots below 1e-12 of the largest diagonal entry are rounding noise, not rank
        let definite = omega
            .cholesky()
            .is_some_and(|c| c.l_dirty().diagonal().iter().all(|p| p * p > 1e-12 * scale));
        if !definite {
            return Err(Error::Market(
                "sigma sigma^T + Diag(lambda_i xi_i2^2) is not positive definite".into(),
            ));
        }
        Ok(())
    }

    fn sigma_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_assets(), self.n_factors(), |i, k| self.sigma[i][k])
    }

    fn excess(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_assets(), self.mu.iter().map(|m| m - self.r))
    }

    pub fn truncated_first(&self, i: usize, x: f64) -> f64 {
        self.lambdas[i] * self.jumps[i].mean_below(x)
    }

    pub fn truncated_second(&self, i: usize, x: f64) -> f64 {
        self.lambdas[i] * self.jumps[i].second_below(x)
    }

    pub fn tail_mass(&self, i: usize, x: f64) -> f64 {
        self.lambdas[i] * self.jumps[i].prob_above(x)
    }

    /// `Ω̄ = σσᵀ + Diag(λ_i ξ_i2²)`.
    pub fn omega_bar(&self) -> DMatrix<f64> {
        let s = self.sigma_matrix();
        let mut o = &s * s.transpose();
        for i in 0..self.n_assets() {
            o[(i, i)] += self.lambdas[i] * self.jumps[i].moments().1;
        }
        o
    }

    /// `(Ω̂(q), ω̂(q))` with per-asset truncation at `q_i`.
    pub fn omega_hat(&self, q: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let s = self.sigma_matrix();
        let mut o = &s * s.transpose();
        let mut w = DVector::zeros(self.n_assets());
        for i in 0..self.n_assets() {
            o[(i, i)] += self.truncated_second(i, q[i]);
            w[i] = self.truncated_first(i, q[i]);
        }
        (o, w)
    }
}

fn solve_linear(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Market("singular covariance matrix".into()))
}

/// `q_i^mv = 1 / [Ω̄⁻¹(μ − r + ω̄)]_i`.
pub fn solve_q_mv_vector(market: &MultiMarket) -> Result<Vec<f64>> {
    market.validate()?;
    let omega_bar_vec = DVector::from_iterator(
        market.n_assets(),
        (0..market.n_assets()).map(|i| market.lambdas[i] * market.jumps[i].moments().0),
    );
    let coeff = solve_linear(market.omega_bar(), &(market.excess() + omega_bar_vec))?;
    coeff
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if c > 0.0 {
                Ok(1.0 / c)
            } else {
                Err(Error::Market(format!(
                    "component {i} of the MV coefficient vector is {c}; no positive threshold exists"
                )))
            }
        })
        .collect()
}

/// Solution of the multi-asset threshold system and derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSolved {
    pub q_mmv: Vec<f64>,
    pub q_mv: Vec<f64>,
    /// `ω̂` at `q_mmv`.
    pub omega_hat: Vec<f64>,
    /// `Ω̂` at `q_mmv`, row-major.
    pub omega_matrix: Vec<Vec<f64>>,
    /// `Ω̂⁻¹(μ − r + ω̂)`.
    pub coeff: Vec<f64>,
    pub c_ma: f64,
    pub market_portfolio: Vec<f64>,
    /// `max_i |q_i coeff_i − 1|`.
    pub residual: f64,
    pub iterations: usize,
    /// Monitored only; not guaranteed for correlated loadings.
    pub q_mmv_below_q_mv: bool,
}

impl MultiSolved {
    /// Target curve of the multi-asset MMV investor, built with `c_ma`.
    pub fn target_curve(&self, investor: &InvestorParams, r: f64) -> TargetCurve {
        TargetCurve {
            kind: StrategyKind::MMV,
            x0: investor.x0,
            t0: investor.t0,
            horizon: investor.horizon,
            r,
            gamma: investor.gamma,
            c: self.c_ma,
        }
    }
}

fn coeff_at(market: &MultiMarket, q: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>)> {
    let (o, w) = market.omega_hat(q);
    let coeff = solve_linear(o.clone(), &(market.excess() + &w))?;
    Ok((o, w, coeff))
}

/// Damped fixed point `q ← (1 − α) q + α / coeff(q)` from the MV thresholds.
pub fn solve_q_mmv_vector(market: &MultiMarket, tol: f64, max_iter: usize) -> Result<MultiSolved> {
    if !(tol > 0.0) {
        return Err(param("tol", format!("must be > 0, got {tol}")));
    }
    let q_mv = solve_q_mv_vector(market)?;
    let mut q = q_mv.clone();
    let mut residual = f64::INFINITY;
    for iter in 0..=max_iter {
        let (o, w, coeff) = coeff_at(market, &q)?;
        residual = q
            .iter()
            .zip(coeff.iter())
            .map(|(qi, ci)| (qi * ci - 1.0).abs())
            .fold(0.0, f64::max);
        if residual < tol {
            return finish(market, q, q_mv, o, w, coeff, residual, iter);
        }
        if iter == max_iter {
            break;
        }
        for (i, qi) in q.iter_mut().enumerate() {
            let next = (1.0 - DAMPING) * *qi + DAMPING / coeff[i];
            if !next.is_finite() || next < -1.0 {
                return Err(Error::Domain(format!(
                    "fixed-point iterate q[{i}] = {next} left [-1, inf) at iteration {iter}"
                )));
            }
            *qi = next;
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    market: &MultiMarket,
    q: Vec<f64>,
    q_mv: Vec<f64>,
    o: DMatrix<f64>,
    w: DVector<f64>,
    coeff: DVector<f64>,
    residual: f64,
    iterations: usize,
) -> Result<MultiSolved> {
    let n = market.n_assets();
    let below = q.iter().zip(&q_mv).all(|(a, b)| *a <= b + 1e-9);
    let mut solved = MultiSolved {
        q_mmv: q,
        q_mv,
        omega_hat: w.iter().copied().collect(),
        omega_matrix: (0..n).map(|i| (0..n).map(|j| o[(i, j)]).collect()).collect(),
        coeff: coeff.iter().copied().collect(),
        c_ma: 0.0,
        market_portfolio: Vec::new(),
        residual,
        iterations,
        q_mmv_below_q_mv: below,
    };
    solved.c_ma = c_ma(&solved, market);
    solved.market_portfolio = market_portfolio(&solved)?;
    Ok(solved)
}

/// `(μ − r + ω̂)ᵀ Ω̂⁻¹ (μ − r + ω̂) + Σ_i tail_i(q_i)`.
pub fn c_ma(solved: &MultiSolved, market: &MultiMarket) -> f64 {
    let quad: f64 = (0..market.n_assets())
        .map(|i| (market.mu[i] - market.r + solved.omega_hat[i]) * solved.coeff[i])
        .sum();
    let tails: f64 = (0..market.n_assets())
        .map(|i| market.tail_mass(i, solved.q_mmv[i]))
        .sum();
    quad + tails
}

/// `coeff / Σ coeff`.
pub fn market_portfolio(solved: &MultiSolved) -> Result<Vec<f64>> {
    let total: f64 = solved.coeff.iter().sum();
    let scale = solved.coeff.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if !(total.abs() > 1e-14 * scale) {
        return Err(Error::DegenerateMarket(format!(
            "coefficients sum to {total}; the market portfolio is undefined"
        )));
    }
    Ok(solved.coeff.iter().map(|c| c / total).collect())
}

/// `coeff · max(target(s) − X, 0)`.
pub fn multi_allocation(solved: &MultiSolved, curve: &TargetCurve, s: f64, wealth_left_limit: f64) -> Vec<f64> {
    let gap = (curve.eval(s) - wealth_left_limit).max(0.0);
    solved.coeff.iter().map(|c| c * gap).collect()
}

/// Terminal quantities of one joint path of all assets, the market
/// portfolio and the pricing operator.
struct PathTerminals {
    /// Gross returns `S_i(T)/S_i(t0)`.
    returns: Vec<f64>,
    market_return: f64,
    pricing: f64,
}

fn simulate_terminals(market: &MultiMarket, solved: &MultiSolved, grid: &TimeGrid, seed: u64) -> PathTerminals {
    let n = market.n_assets();
    let d = market.n_factors();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut jumps: Vec<(f64, usize, f64)> = Vec::new();
    for i in 0..n {
        let times = draw_jump_times(market.lambdas[i], grid, &mut rng);
        for t in times {
            jumps.push((t, i, market.jumps[i].sample(&mut rng)));
        }
    }
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let w = &solved.market_portfolio;
    let coeff = &solved.coeff;
    // per-asset log drift and market-portfolio loadings
    let asset_drift: Vec<f64> = (0..n)
        .map(|i| market.mu[i] - 0.5 * market.sigma[i].iter().map(|s| s * s).sum::<f64>())
        .collect();
    let mkt_load: Vec<f64> = (0..d)
        .map(|k| (0..n).map(|i| w[i] * market.sigma[i][k]).sum())
        .collect();
    let mkt_mu: f64 = (0..n).map(|i| w[i] * market.mu[i]).sum();
    let mkt_drift = mkt_mu - 0.5 * mkt_load.iter().map(|s| s * s).sum::<f64>();
    let phi1: Vec<f64> = (0..d)
        .map(|k| (0..n).map(|i| coeff[i] * market.sigma[i][k]).sum())
        .collect();
    let kappa: f64 = (0..n)
        .map(|i| coeff[i] * market.truncated_first(i, solved.q_mmv[i]) + market.tail_mass(i, solved.q_mmv[i]))
        .sum();
    let m_drift = -0.5 * phi1.iter().map(|p| p * p).sum::<f64>() + kappa - market.r;

    let mut log_s = vec![0.0; n];
    let mut jump_factor = vec![1.0; n];
    let mut log_x = 0.0;
    let mut x_factor = 1.0;
    let mut log_m = 0.0;
    let mut m_factor = 1.0;
    let mut db = vec![0.0; d];

    let mut advance = |h: f64, rng: &mut ChaCha8Rng, db: &mut Vec<f64>| {
        let sq = h.sqrt();
        for v in db.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = sq * z;
        }
        for i in 0..n {
            log_s[i] += asset_drift[i] * h + dot(&market.sigma[i], db);
        }
        log_x += mkt_drift * h + dot(&mkt_load, db);
        log_m += m_drift * h - dot(&phi1, db);
    };

    let mut t = grid.t0;
    let mut j = 0;
    for k in 1..=grid.n_steps {
        let g = grid.point(k);
        while j < jumps.len() && jumps[j].0 <= g {
            let (tj, i, q) = jumps[j];
            advance(tj - t, &mut rng, &mut db);
            t = tj;
            jump_factor[i] *= 1.0 + q;
            x_factor *= 1.0 + w[i] * q;
            m_factor *= 1.0 - (coeff[i] * q).min(1.0);
            j += 1;
        }
        if g > t {
            advance(g - t, &mut rng, &mut db);
            t = g;
        }
    }
    PathTerminals {
        returns: (0..n).map(|i| log_s[i].exp() * jump_factor[i]).collect(),
        market_return: log_x.exp() * x_factor,
        pricing: log_m.exp() * m_factor,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Beta estimates of one asset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssetBeta {
    pub asset: usize,
    /// `Cov(M, R_i) / Cov(M, R_mkt)`.
    pub beta_cov: f64,
    pub beta_cov_se: f64,
    /// `(E R_i − R_f) / (E R_mkt − R_f)`.
    pub beta_excess: f64,
    pub beta_excess_se: f64,
    /// `sqrt(se_cov² + se_excess²)`.
    pub se: f64,
    /// `|beta_cov − beta_excess| ≤ 3·se`.
    pub agrees: bool,
    pub cov_m_r: f64,
    pub cov_m_r_se: f64,
    /// Sample mean of `M(T) R_i` (expected 1).
    pub pricing_mean: f64,
    pub pricing_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapmReport {
    pub n_paths: usize,
    pub risk_free_return: f64,
    pub assets: Vec<AssetBeta>,
    pub market_pricing_mean: f64,
    pub market_pricing_se: f64,
    pub cov_m_market: f64,
    pub cov_m_market_se: f64,
}

/// Mean and standard error of per-path influence values.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = mean(values).unwrap_or(f64::NAN);
    let ss = crate::montecarlo::compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    (m, (ss / (n - 1.0) / n).sqrt())
}

/// Sample covariance and its standard error.
fn covariance(a: &[f64], b: &[f64], ma: f64, mb: f64) -> (f64, f64, Vec<f64>) {
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let n = a.len() as f64;
    let (m, se) = mean_se(&prods);
    let cov = m * n / (n - 1.0);
    let infl: Vec<f64> = prods.iter().map(|p| p - m).collect();
    (cov, se, infl)
}

/// Monte Carlo CAPM betas over `[t0, T]` of `investor`.
pub fn capm_beta_mc(
    market: &MultiMarket,
    solved: &MultiSolved,
    investor: &InvestorParams,
    mc: &MCConfig,
) -> Result<CapmReport> {
    mc.validate()?;
    if mc.n_paths < 1000 {
        return Err(Error::InsufficientSamples {
            needed: 1000,
            got: mc.n_paths,
        });
    }
    let grid = TimeGrid::for_investor(investor, mc.n_steps)?;
    let rows: Vec<PathTerminals> = (0..mc.n_paths)
        .into_par_iter()
        .map(|p| simulate_terminals(market, solved, &grid, mc.path_seed(p)))
        .collect();
    let n = market.n_assets();
    let rf = (market.r * investor.duration()).exp();
    let m: Vec<f64> = rows.iter().map(|r| r.pricing).collect();
    let rm: Vec<f64> = rows.iter().map(|r| r.market_return).collect();
    let (mean_m, _) = mean_se(&m);
    let (mean_rm, se_rm) = mean_se(&rm);
    let (cov_mm, cov_mm_se, infl_mm) = covariance(&m, &rm, mean_m, mean_rm);
    if cov_mm.abs() <= 3.0 * cov_mm_se {
        return Err(Error::IllConditioned(format!(
            "Cov(M, R_mkt) = {cov_mm:e} is within 3 standard errors ({cov_mm_se:e}) of zero"
        )));
    }
    let excess_m = mean_rm - rf;
    if excess_m.abs() <= 3.0 * se_rm {
        return Err(Error::IllConditioned(format!(
            "market excess return {excess_m:e} is within 3 standard errors ({se_rm:e}) of zero"
        )));
    }
    let priced_m: Vec<f64> = m.iter().zip(&rm).map(|(a, b)| a * b).collect();
    let (market_pricing_mean, market_pricing_se) = mean_se(&priced_m);

    let mut assets = Vec::with_capacity(n);
    for i in 0..n {
        let ri: Vec<f64> = rows.iter().map(|r| r.returns[i]).collect();
        let (mean_ri, _) = mean_se(&ri);
        let (cov_i, cov_i_se, infl_i) = covariance(&m, &ri, mean_m, mean_ri);
        let beta_cov = cov_i / cov_mm;
        let ratio_infl: Vec<f64> = infl_i
            .iter()
            .zip(&infl_mm)
            .map(|(a, b)| (a - beta_cov * b) / cov_mm)
            .collect();
        let beta_cov_se = mean_se(&ratio_infl).1;
        let beta_excess = (mean_ri - rf) / excess_m;
        let ex_infl: Vec<f64> = ri
            .iter()
            .zip(&rm)
            .map(|(a, b)| ((a - mean_ri) - beta_excess * (b - mean_rm)) / excess_m)
            .collect();
        let beta_excess_se = mean_se(&ex_infl).1;
        let se = beta_cov_se.hypot(beta_excess_se);
        let priced: Vec<f64> = m.iter().zip(&ri).map(|(a, b)| a * b).collect();
        let (pricing_mean, pricing_se) = mean_se(&priced);
        assets.push(AssetBeta {
            asset: i,
            beta_cov,
            beta_cov_se,
            beta_excess,
            beta_excess_se,
            se,
            agrees: (beta_cov - beta_excess).abs() <= 3.0 * se,
            cov_m_r: cov_i,
            cov_m_r_se: cov_i_se,
            pricing_mean,
            pricing_se,
        });
    }
    Ok(CapmReport {
        n_paths: mc.n_paths,
        risk_free_return: rf,
        assets,
        market_pricing_mean,
        market_pricing_se,
        cov_m_market: cov_mm,
        cov_m_market_se: cov_mm_se,
    })
}
