//! Batched path experiments and terminal-wealth statistics.
//!
//! Path `i` of an experiment is seeded with `root_seed ^ i`, so every
//! strategy sees the same market realisation and the result does not depend
//! on how paths are scheduled across threads. Results are collected in path
//! order and reduced with compensated sums.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::market::{InvestorParams, MarketParams};
use crate::preferences::{solve, SolvedPreferences, DEFAULT_TOL};
use crate::simulate::{
    m_mmv_terminal, simulate_market_path, stock_terminal, terminal_wealth, y_star_terminal, TimeGrid,
};
use crate::strategy::StrategyKind;

/// Largest tolerated share of overflowed paths.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub root_seed: u64,
    #[serde(default)]
    pub scenario: String,
}

impl MCConfig {
    pub fn new(n_paths: usize, n_steps: usize, root_seed: u64, scenario: impl Into<String>) -> Result<Self> {
        let c = MCConfig {
            n_paths,
            n_steps,
            root_seed,
            scenario: scenario.into(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(param("n_paths", format!("must be >= 2, got {}", self.n_paths)));
        }
        if self.n_steps == 0 {
            return Err(param("n_steps", "must be positive"));
        }
        Ok(())
    }

    /// Seed of path `index`.
    pub fn path_seed(&self, index: usize) -> u64 {
        self.root_seed ^ index as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

/// Summary of one strategy's terminal wealth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalStats {
    pub n_paths: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub std_error_mean: f64,
    pub u_gamma: f64,
    pub u_gamma_se: f64,
    /// Dual value at the analytic optimiser `Y = 2γ Y*(T)`.
    pub v_gamma_dual: f64,
    pub v_gamma_se: f64,
    pub closed_form_u: f64,
    pub closed_form_v: f64,
    pub domain_exceed_fraction: f64,
    pub p99: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Per-path samples and their summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub solved: SolvedPreferences,
    pub stats: BTreeMap<StrategyKind, TerminalStats>,
    /// Terminal wealth per strategy, aligned by path.
    pub samples: BTreeMap<StrategyKind, Vec<f64>>,
    /// `2γ Y*(T)` per path.
    pub dual_y: Vec<f64>,
    /// Jump count per path.
    pub jump_counts: Vec<usize>,
    /// Paths dropped because some strategy overflowed.
    pub excluded: usize,
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn require(n: usize, needed: usize) -> Result<()> {
    if n < needed {
        Err(Error::InsufficientSamples { needed, got: n })
    } else {
        Ok(())
    }
}

/// Sample mean.
pub fn mean(samples: &[f64]) -> Result<f64> {
    require(samples.len(), 1)?;
    Ok(compensated_sum(samples.iter().copied()) / samples.len() as f64)
}

/// Unbiased sample variance, two-pass.
pub fn variance(samples: &[f64]) -> Result<f64> {
    require(samples.len(), 2)?;
    let m = mean(samples)?;
    let ss = compensated_sum(samples.iter().map(|x| (x - m) * (x - m)));
    Ok(ss / (samples.len() - 1) as f64)
}

/// `(mean, standard error)` of a sample.
pub fn mean_and_se(samples: &[f64]) -> Result<(f64, f64)> {
    let m = mean(samples)?;
    let v = variance(samples)?;
    Ok((m, (v / samples.len() as f64).sqrt()))
}

/// `mean − (γ/2)·variance`.
pub fn evaluate_u_gamma(samples: &[f64], gamma: f64) -> Result<f64> {
    Ok(mean(samples)? - 0.5 * gamma * variance(samples)?)
}

/// Standard error of [`evaluate_u_gamma`] from its influence function
/// `x − (γ/2)(x − m)²`.
pub fn u_gamma_se(samples: &[f64], gamma: f64) -> Result<f64> {
    Ok(mean_and_se(&u_gamma_influence(samples, gamma)?)?.1)
}

pub fn u_gamma_influence(samples: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let m = mean(samples)?;
    Ok(samples.iter().map(|x| x - 0.5 * gamma * (x - m) * (x - m)).collect())
}

fn check_aligned(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    require(x.len(), 1)
}

/// `mean(XY) + mean(Y²)/(2γ) − 1/(2γ)`.
pub fn evaluate_v_gamma_dual(samples_x: &[f64], samples_y: &[f64], gamma: f64) -> Result<f64> {
    let inf = v_gamma_influence(samples_x, samples_y, gamma)?;
    Ok(mean(&inf)? - 1.0 / (2.0 * gamma))
}

pub fn v_gamma_se(samples_x: &[f64], samples_y: &[f64], gamma: f64) -> Result<f64> {
    Ok(mean_and_se(&v_gamma_influence(samples_x, samples_y, gamma)?)?.1)
}

pub fn v_gamma_influence(samples_x: &[f64], samples_y: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_aligned(samples_x, samples_y)?;
    Ok(samples_x
        .iter()
        .zip(samples_y)
        .map(|(x, y)| x * y + y * y / (2.0 * gamma))
        .collect())
}

/// `(u_star, v_star)`: the MV and MMV optimal values from `(t0, x0)`.
pub fn closed_form_values(solved: &SolvedPreferences, investor: &InvestorParams, r: f64) -> (f64, f64) {
    let d = investor.duration();
    let base = (d * r).exp() * investor.x0;
    let scale = 2.0 * investor.gamma;
    (
        base + ((d * solved.c_mv).exp() - 1.0) / scale,
        base + ((d * solved.c_mmv).exp() - 1.0) / scale,
    )
}

/// `E[X^mv(T)] = e^{(T−t0)r} x0 + (e^{(T−t0)c_mv} − 1)/γ`.
pub fn mv_terminal_mean(solved: &SolvedPreferences, investor: &InvestorParams, r: f64) -> f64 {
    let d = investor.duration();
    (d * r).exp() * investor.x0 + ((d * solved.c_mv).exp() - 1.0) / investor.gamma
}

/// Share of samples with `X − mean > 1/γ`, using the sample mean.
pub fn domain_exceed_fraction(samples: &[f64], gamma: f64) -> Result<f64> {
    let m = mean(samples)?;
    require(samples.len(), 2)?;
    domain_exceed_fraction_about(samples, gamma, m)
}

/// Share of samples with `X − center > 1/γ` for a caller-supplied mean.
pub fn domain_exceed_fraction_about(samples: &[f64], gamma: f64, center: f64) -> Result<f64> {
    require(samples.len(), 1)?;
    let bound = 1.0 / gamma;
    let n = samples.iter().filter(|&&x| x - center > bound).count();
    Ok(n as f64 / samples.len() as f64)
}

/// Nearest-rank empirical quantile, `p ∈ (0, 1]`.
pub fn quantile(samples: &[f64], p: f64) -> Result<f64> {
    require(samples.len(), 1)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("quantile level {p} outside (0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (p * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Equal-width bins over `[min, max]`; a zero range yields one bin.
pub fn density_histogram(samples: &[f64], n_bins: usize) -> Result<Vec<HistogramBin>> {
    require(samples.len(), 1)?;
    if n_bins == 0 {
        return Err(param("n_bins", "must be >= 1"));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Ok(vec![HistogramBin {
            left: lo,
            right: hi,
            count: samples.len(),
        }]);
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &x in samples {
        let k = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            left: lo + width * k as f64,
            right: if k + 1 == n_bins {
                hi
            } else {
                lo + width * (k + 1) as f64
            },
            count,
        })
        .collect())
}

/// Summary statistics for one strategy.
pub fn terminal_stats(
    samples: &[f64],
    dual_y: &[f64],
    gamma: f64,
    closed_form: (f64, f64),
    n_bins: usize,
) -> Result<TerminalStats> {
    let (m, se) = mean_and_se(samples)?;
    Ok(TerminalStats {
        n_paths: samples.len(),
        mean: m,
        variance: variance(samples)?,
        std_error_mean: se,
        u_gamma: evaluate_u_gamma(samples, gamma)?,
        u_gamma_se: u_gamma_se(samples, gamma)?,
        v_gamma_dual: evaluate_v_gamma_dual(samples, dual_y, gamma)?,
        v_gamma_se: v_gamma_se(samples, dual_y, gamma)?,
        closed_form_u: closed_form.0,
        closed_form_v: closed_form.1,
        domain_exceed_fraction: domain_exceed_fraction(samples, gamma)?,
        p99: quantile(samples, 0.99)?,
        histogram: density_histogram(samples, n_bins)?,
    })
}

struct PathOutcome {
    wealth: Vec<f64>,
    dual_y: f64,
    jumps: usize,
}

/// Simulates `mc.n_paths` shared market paths and evolves every requested
/// strategy on each of them.
pub fn run_experiment(
    market: &MarketParams,
    investor: &InvestorParams,
    kinds: &[StrategyKind],
    mc: &MCConfig,
) -> Result<ExperimentResult> {
    mc.validate()?;
    investor.validate()?;
    if kinds.is_empty() {
        return Err(Error::Configuration("no strategies requested".into()));
    }
    let solved = solve(market, DEFAULT_TOL)?;
    let grid = TimeGrid::for_investor(investor, mc.n_steps)?;
    let y0 = 1.0 / (2.0 * investor.gamma);
    let scale = 2.0 * investor.gamma;
    let outcomes: Vec<Option<PathOutcome>> = (0..mc.n_paths)
        .into_par_iter()
        .map(|i| {
            let path = simulate_market_path(market, &grid, mc.path_seed(i));
            let mut wealth = Vec::with_capacity(kinds.len());
            for &kind in kinds {
                match terminal_wealth(&path, market, kind, &solved, investor) {
                    Ok(x) => wealth.push(x),
                    Err(Error::Overflow { .. }) => return None,
                    Err(_) => unreachable!("terminal_wealth only fails on overflow"),
                }
            }
            Some(PathOutcome {
                wealth,
                dual_y: scale * y_star_terminal(&path, market, &solved, y0),
                jumps: path.jump_events.len(),
            })
        })
        .collect();

    let excluded = outcomes.iter().filter(|o| o.is_none()).count();
    if excluded as f64 > MAX_EXCLUDED_FRACTION * mc.n_paths as f64 {
        return Err(Error::ExclusionThreshold {
            excluded,
            total: mc.n_paths,
        });
    }
    let kept: Vec<PathOutcome> = outcomes.into_iter().flatten().collect();
    let dual_y: Vec<f64> = kept.iter().map(|o| o.dual_y).collect();
    let jump_counts: Vec<usize> = kept.iter().map(|o| o.jumps).collect();
    let closed = closed_form_values(&solved, investor, market.r);
    let mut samples = BTreeMap::new();
    let mut stats = BTreeMap::new();
    for (j, &kind) in kinds.iter().enumerate() {
        let xs: Vec<f64> = kept.iter().map(|o| o.wealth[j]).collect();
        stats.insert(
            kind,
            terminal_stats(&xs, &dual_y, investor.gamma, closed, DEFAULT_BINS)?,
        );
        samples.insert(kind, xs);
    }
    Ok(ExperimentResult {
        solved,
        stats,
        samples,
        dual_y,
        jump_counts,
        excluded,
    })
}

/// Terminal values of the three martingales `2γY*(T)`, `M^mmv(T)e^{r(T−t0)}`
/// and `M^mmv(T)S1(T)/S1(t0)`, each with mean 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleSamples {
    pub dual_y: Vec<f64>,
    pub discounted_m: Vec<f64>,
    pub priced_stock: Vec<f64>,
}

pub fn martingale_samples(
    market: &MarketParams,
    investor: &InvestorParams,
    mc: &MCConfig,
) -> Result<MartingaleSamples> {
    mc.validate()?;
    let solved = solve(market, DEFAULT_TOL)?;
    let grid = TimeGrid::for_investor(investor, mc.n_steps)?;
    let growth = (market.r * investor.duration()).exp();
    let rows: Vec<(f64, f64, f64)> = (0..mc.n_paths)
        .into_par_iter()
        .map(|i| {
            let path = simulate_market_path(market, &grid, mc.path_seed(i));
            let y = y_star_terminal(&path, market, &solved, 1.0);
            let m = m_mmv_terminal(&path, market, &solved);
            let s = stock_terminal(&path, market);
            (y, m * growth, m * s)
        })
        .collect();
    Ok(MartingaleSamples {
        dual_y: rows.iter().map(|r| r.0).collect(),
        discounted_m: rows.iter().map(|r| r.1).collect(),
        priced_stock: rows.iter().map(|r| r.2).collect(),
    })
}
