//! Sample paths of the market drivers, the wealth under a feedback strategy,
//! the dual process `Y*` and the MV/MMV pricing operators.
//!
//! Event times are the uniform grid merged with the exact jump times. Every
//! per-interval quantity at index `k` refers to `(t_k, t_{k+1}]`; a jump
//! attached to event `k+1` happens at the right end of that interval.
//!
//! Wealth is advanced in uncompensated form. Expanding `Ñ = N − ν dt` in the
//! wealth equation cancels the `λξ1` drift against the compensator, leaving
//! `dX = rX dt + π(μ − r) dt + πσ dB + π q dN`. The risk-free part uses the
//! exact factor `e^{rh}` so that `X e^{−rt}` is constant while `π = 0`; the
//! risky part is Euler.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::market::{InvestorParams, MarketParams};
use crate::preferences::SolvedPreferences;
use crate::strategy::{allocation_at, StrategyKind, TargetCurve};

/// Wealth magnitude beyond which a path is aborted.
pub const OVERFLOW_LIMIT: f64 = 1e12;

/// Uniform grid on `[t0, T]` with `n_steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, horizon: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(param("n_steps", "must be positive"));
        }
        if !(t0.is_finite() && horizon.is_finite() && horizon > t0) {
            return Err(param("horizon", format!("need finite t0 < T, got [{t0}, {horizon}]")));
        }
        Ok(TimeGrid { t0, horizon, n_steps })
    }

    pub fn for_investor(investor: &InvestorParams, n_steps: usize) -> Result<Self> {
        TimeGrid::new(investor.t0, investor.horizon, n_steps)
    }

    /// Grid point `k`; the last point is exactly `T`.
    pub fn point(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.horizon
        } else {
            self.t0 + (self.horizon - self.t0) * (k as f64) / (self.n_steps as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub size: f64,
}

/// One realisation of the Brownian motion and the compound Poisson process.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    pub seed: u64,
    pub grid: TimeGrid,
    /// Strictly increasing, first `t0`, last `T`.
    pub event_times: Vec<f64>,
    /// `ΔB` over each interval; one shorter than `event_times`.
    pub brownian_increments: Vec<f64>,
    pub jump_events: Vec<JumpEvent>,
    /// Jump size attached to each event time.
    pub event_jumps: Vec<Option<f64>>,
    on_grid: Vec<bool>,
}

impl MarketPath {
    pub fn n_intervals(&self) -> usize {
        self.brownian_increments.len()
    }

    /// `B(T) − B(t0)`.
    pub fn brownian_total(&self) -> f64 {
        self.brownian_increments.iter().sum()
    }

    /// The same realisation on a grid `factor` times coarser: Brownian
    /// increments are summed between kept events, and every jump time is kept.
    pub fn coarsen(&self, factor: usize) -> Result<MarketPath> {
        if factor == 0 || !self.grid.n_steps.is_multiple_of(factor) {
            return Err(param(
                "factor",
                format!("must divide n_steps = {}, got {factor}", self.grid.n_steps),
            ));
        }
        let grid = TimeGrid {
            n_steps: self.grid.n_steps / factor,
            ..self.grid
        };
        let mut out = MarketPath {
            seed: self.seed,
            grid,
            event_times: vec![self.event_times[0]],
            brownian_increments: Vec::new(),
            jump_events: self.jump_events.clone(),
            event_jumps: vec![self.event_jumps[0]],
            on_grid: vec![true],
        };
        let mut grid_count = 0usize;
        let mut acc = 0.0;
        for i in 1..self.event_times.len() {
            acc += self.brownian_increments[i - 1];
            let mut keep_grid = false;
            if self.on_grid[i] {
                grid_count += 1;
                keep_grid = grid_count.is_multiple_of(factor);
            }
            if keep_grid || self.event_jumps[i].is_some() {
                out.event_times.push(self.event_times[i]);
                out.brownian_increments.push(acc);
                out.event_jumps.push(self.event_jumps[i]);
                out.on_grid.push(keep_grid);
                acc = 0.0;
            }
        }
        Ok(out)
    }
}

/// Draws jump times by exponential inter-arrivals, then jump sizes, then one
/// Brownian increment per merged interval. Deterministic in `seed`.
pub fn simulate_market_path(market: &MarketParams, grid: &TimeGrid, seed: u64) -> MarketPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jump_times = draw_jump_times(market.lambda, grid, &mut rng);
    let jump_events: Vec<JumpEvent> = jump_times
        .into_iter()
        .map(|time| JumpEvent {
            time,
            size: market.jump.sample(&mut rng),
        })
        .collect();
    let (event_times, event_jumps, on_grid) = merge_events(grid, &jump_events);
    let brownian_increments = brownian_increments(&event_times, &mut rng);
    MarketPath {
        seed,
        grid: *grid,
        event_times,
        brownian_increments,
        jump_events,
        event_jumps,
        on_grid,
    }
}

pub(crate) fn draw_jump_times(lambda: f64, grid: &TimeGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut times = Vec::new();
    if lambda > 0.0 {
        let exp = Exp::new(lambda).expect("lambda > 0");
        let mut t = grid.t0;
        loop {
            t += exp.sample(rng);
            if t >= grid.horizon {
                break;
            }
            if t > grid.t0 {
                times.push(t);
            }
        }
    }
    times
}

pub(crate) fn brownian_increments(times: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    times
        .windows(2)
        .map(|w| {
            let z: f64 = StandardNormal.sample(rng);
            (w[1] - w[0]).sqrt() * z
        })
        .collect()
}

/// Merges sorted jump times into the grid. A jump landing exactly on a grid
/// point is attached to that point.
fn merge_events(grid: &TimeGrid, jumps: &[JumpEvent]) -> (Vec<f64>, Vec<Option<f64>>, Vec<bool>) {
    let cap = grid.n_steps + 1 + jumps.len();
    let mut times = Vec::with_capacity(cap);
    let mut sizes = Vec::with_capacity(cap);
    let mut on_grid = Vec::with_capacity(cap);
    let mut j = 0;
    for k in 0..=grid.n_steps {
        let g = grid.point(k);
        while j < jumps.len() && jumps[j].time < g {
            times.push(jumps[j].time);
            sizes.push(Some(jumps[j].size));
            on_grid.push(false);
            j += 1;
        }
        let mut size = None;
        if j < jumps.len() && jumps[j].time == g {
            size = Some(jumps[j].size);
            j += 1;
        }
        times.push(g);
        sizes.push(size);
        on_grid.push(true);
    }
    (times, sizes, on_grid)
}

/// First jump time with size `≥ threshold`.
pub fn detect_stopping_time(path: &MarketPath, threshold: f64) -> Option<f64> {
    path.jump_events.iter().find(|e| e.size >= threshold).map(|e| e.time)
}

/// Wealth and allocation at every event time of a path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WealthPath {
    pub times: Vec<f64>,
    /// `X(t_k)` after any jump at `t_k`.
    pub wealth: Vec<f64>,
    /// `π` held over `(t_k, t_{k+1}]`, from the post-event wealth at `t_k`.
    /// The final entry is the allocation evaluated at `T`.
    pub allocations: Vec<f64>,
}

/// Integrates wealth under an arbitrary feedback `policy(s, X(s⁻))`.
///
/// At a jump the exposure is the policy re-evaluated on the pre-jump wealth,
/// which is the left limit of the allocation process.
pub fn integrate_wealth<F>(
    path: &MarketPath,
    market: &MarketParams,
    x0: f64,
    mut policy: F,
    mut record: Option<&mut WealthPath>,
) -> Result<f64>
where
    F: FnMut(f64, f64) -> f64,
{
    let t = &path.event_times;
    let excess = market.mu - market.r;
    let mut x = x0;
    let mut pi = policy(t[0], x);
    if let Some(rec) = record.as_deref_mut() {
        rec.times.clear();
        rec.wealth.clear();
        rec.allocations.clear();
        rec.times.push(t[0]);
        rec.wealth.push(x);
        rec.allocations.push(pi);
    }
    for k in 0..path.n_intervals() {
        let h = t[k + 1] - t[k];
        let mut next = x * (market.r * h).exp() + pi * (excess * h + market.sigma * path.brownian_increments[k]);
        if let Some(q) = path.event_jumps[k + 1] {
            let pi_left = policy(t[k + 1], next);
            next += pi_left * q;
        }
        if !next.is_finite() || next.abs() > OVERFLOW_LIMIT {
            return Err(Error::Overflow {
                path: path.seed,
                time: t[k + 1],
                wealth: next,
            });
        }
        x = next;
        pi = policy(t[k + 1], x);
        if let Some(rec) = record.as_deref_mut() {
            rec.times.push(t[k + 1]);
            rec.wealth.push(x);
            rec.allocations.push(pi);
        }
    }
    Ok(x)
}

/// The feedback rule of `kind`, carrying its own no-short latch.
pub fn strategy_policy(
    kind: StrategyKind,
    solved: &SolvedPreferences,
    investor: &InvestorParams,
    r: f64,
) -> impl FnMut(f64, f64) -> f64 {
    let solved = *solved;
    let curve = TargetCurve::new(kind, &solved, investor, r);
    let mut halted = false;
    move |s, x| {
        let (pi, h) = allocation_at(kind, &solved, curve.eval(s), x, halted);
        halted = h;
        pi
    }
}

/// Wealth path of `kind` on `path`.
pub fn evolve_wealth(
    path: &MarketPath,
    market: &MarketParams,
    kind: StrategyKind,
    solved: &SolvedPreferences,
    investor: &InvestorParams,
) -> Result<WealthPath> {
    let mut out = WealthPath::default();
    integrate_wealth(
        path,
        market,
        investor.x0,
        strategy_policy(kind, solved, investor, market.r),
        Some(&mut out),
    )?;
    Ok(out)
}

/// `X(T)` of `kind` on `path` without storing the trajectory.
pub fn terminal_wealth(
    path: &MarketPath,
    market: &MarketParams,
    kind: StrategyKind,
    solved: &SolvedPreferences,
    investor: &InvestorParams,
) -> Result<f64> {
    integrate_wealth(
        path,
        market,
        investor.x0,
        strategy_policy(kind, solved, investor, market.r),
        None,
    )
}

/// Loads of a stochastic exponential `dZ = Z⁻(−a dB − ∫φ2 Ñ − d ds)`.
#[derive(Debug, Clone, Copy)]
struct Loads {
    diffusion: f64,
    /// `∫ φ2 ν(dq)`.
    compensator: f64,
    discount: f64,
}

/// Exact per-interval update; returns the terminal value and fills `record`
/// with the value at every event. `jump_factor(q)` is `1 − φ2(q)`.
fn doleans<J: Fn(f64) -> f64>(
    path: &MarketPath,
    init: f64,
    loads: Loads,
    jump_factor: J,
    mut record: Option<&mut Vec<f64>>,
) -> f64 {
    let t = &path.event_times;
    let a = loads.diffusion;
    let drift = -0.5 * a * a + loads.compensator - loads.discount;
    let mut v = init;
    if let Some(rec) = record.as_deref_mut() {
        rec.clear();
        rec.reserve(t.len());
        rec.push(v);
    }
    for k in 0..path.n_intervals() {
        let h = t[k + 1] - t[k];
        if v != 0.0 {
            v *= (-a * path.brownian_increments[k] + drift * h).exp();
            if let Some(q) = path.event_jumps[k + 1] {
                v *= jump_factor(q);
            }
        }
        if let Some(rec) = record.as_deref_mut() {
            rec.push(v);
        }
    }
    v
}

/// `∫ φ2*(q) ν(dq) = T1(q_mmv)/q_mmv + tail(q_mmv)`.
pub fn mmv_compensator(market: &MarketParams, solved: &SolvedPreferences) -> f64 {
    market.truncated_first(solved.q_mmv) / solved.q_mmv + market.tail_mass(solved.q_mmv)
}

fn mmv_loads(market: &MarketParams, solved: &SolvedPreferences, discount: f64) -> Loads {
    Loads {
        diffusion: solved.phi1_star,
        compensator: mmv_compensator(market, solved),
        discount,
    }
}

fn mv_loads(market: &MarketParams, solved: &SolvedPreferences, discount: f64) -> Loads {
    Loads {
        diffusion: market.sigma / solved.q_mv,
        compensator: market.lambda * market.moments().0 / solved.q_mv,
        discount,
    }
}

/// `Y^{φ*}` at every event time, started from `y0`.
pub fn evolve_y_star(path: &MarketPath, market: &MarketParams, solved: &SolvedPreferences, y0: f64) -> Vec<f64> {
    let mut out = Vec::new();
    y_star_into(path, market, solved, y0, Some(&mut out));
    out
}

/// `Y^{φ*}(T)` only.
pub fn y_star_terminal(path: &MarketPath, market: &MarketParams, solved: &SolvedPreferences, y0: f64) -> f64 {
    y_star_into(path, market, solved, y0, None)
}

fn y_star_into(
    path: &MarketPath,
    market: &MarketParams,
    solved: &SolvedPreferences,
    y0: f64,
    record: Option<&mut Vec<f64>>,
) -> f64 {
    let q = solved.q_mmv;
    doleans(
        path,
        y0,
        mmv_loads(market, solved, 0.0),
        |j| 1.0 - (j / q).min(1.0),
        record,
    )
}

/// `(M^mv, M^mmv)` at every event time, both starting at 1.
pub fn evolve_pricing_operators(
    path: &MarketPath,
    market: &MarketParams,
    solved: &SolvedPreferences,
) -> (Vec<f64>, Vec<f64>) {
    let (mut m_mv, mut m_mmv) = (Vec::new(), Vec::new());
    let (qmv, qmmv) = (solved.q_mv, solved.q_mmv);
    doleans(
        path,
        1.0,
        mv_loads(market, solved, market.r),
        |j| 1.0 - j / qmv,
        Some(&mut m_mv),
    );
    doleans(
        path,
        1.0,
        mmv_loads(market, solved, market.r),
        |j| 1.0 - (j / qmmv).min(1.0),
        Some(&mut m_mmv),
    );
    (m_mv, m_mmv)
}

/// `M^mmv(T)` only.
pub fn m_mmv_terminal(path: &MarketPath, market: &MarketParams, solved: &SolvedPreferences) -> f64 {
    let q = solved.q_mmv;
    doleans(
        path,
        1.0,
        mmv_loads(market, solved, market.r),
        |j| 1.0 - (j / q).min(1.0),
        None,
    )
}

/// `S1(s) / S1(t0)` at every event time, exact in the increments.
pub fn evolve_stock(path: &MarketPath, market: &MarketParams) -> Vec<f64> {
    let mut out = Vec::new();
    stock_into(path, market, Some(&mut out));
    out
}

/// `S1(T) / S1(t0)`.
pub fn stock_terminal(path: &MarketPath, market: &MarketParams) -> f64 {
    stock_into(path, market, None)
}

fn stock_into(path: &MarketPath, market: &MarketParams, record: Option<&mut Vec<f64>>) -> f64 {
    // S1 = exp((μ − σ²/2)t + σB) Π(1 + q): the stochastic exponential with
    // diffusion load −σ, drift μ and jump factor 1 + q.
    let loads = Loads {
        diffusion: -market.sigma,
        compensator: 0.0,
        discount: -market.mu,
    };
    doleans(path, 1.0, loads, |j| 1.0 + j, record)
}

/// Closed-form MMV wealth at every event time:
/// `target(s) − 2e^{(T−s)(C−r)} Y(s)` before the first jump `≥ q_mmv` at `τ`,
/// and `target(s) + 2e^{(T−τ)C − (T−s)r}(ΔL(τ)/q_mmv − 1) Y(τ⁻)` afterwards.
pub fn exact_mmv_wealth(
    path: &MarketPath,
    market: &MarketParams,
    solved: &SolvedPreferences,
    investor: &InvestorParams,
) -> Vec<f64> {
    let curve = TargetCurve::new(StrategyKind::MMV, solved, investor, market.r);
    let (c, r, big_t, q) = (solved.c_mmv, market.r, investor.horizon, solved.q_mmv);
    let loads = mmv_loads(market, solved, 0.0);
    let drift = -0.5 * loads.diffusion * loads.diffusion + loads.compensator;
    let t = &path.event_times;
    let mut y = 1.0 / (2.0 * investor.gamma);
    let mut stopped: Option<(f64, f64, f64)> = None; // (τ, ΔL, Y(τ⁻))
    let mut out = Vec::with_capacity(t.len());
    let value = |s: f64, y: f64, stopped: Option<(f64, f64, f64)>| match stopped {
        None => curve.eval(s) - 2.0 * ((big_t - s) * (c - r)).exp() * y,
        Some((tau, jump, y_left)) => {
            curve.eval(s) + 2.0 * ((big_t - tau) * c - (big_t - s) * r).exp() * (jump / q - 1.0) * y_left
        }
    };
    out.push(value(t[0], y, None));
    for k in 0..path.n_intervals() {
        let h = t[k + 1] - t[k];
        y *= (-loads.diffusion * path.brownian_increments[k] + drift * h).exp();
        if let Some(j) = path.event_jumps[k + 1] {
            if stopped.is_none() && j >= q {
                stopped = Some((t[k + 1], j, y));
            }
            y *= 1.0 - (j / q).min(1.0);
        }
        out.push(value(t[k + 1], y, stopped));
    }
    out
}

/// Closed-form MV wealth `target(s) − e^{(T−s)(C^mv−r)} Z(s) / γ`, where `Z`
/// is the stochastic exponential with loads `σ/q_mv` and `q/q_mv`.
pub fn exact_mv_wealth(
    path: &MarketPath,
    market: &MarketParams,
    solved: &SolvedPreferences,
    investor: &InvestorParams,
) -> Vec<f64> {
    let curve = TargetCurve::new(StrategyKind::MV, solved, investor, market.r);
    let qmv = solved.q_mv;
    let mut z = Vec::new();
    doleans(
        path,
        1.0,
        mv_loads(market, solved, 0.0),
        |j| 1.0 - j / qmv,
        Some(&mut z),
    );
    let (c, r, big_t) = (solved.c_mv, market.r, investor.horizon);
    path.event_times
        .iter()
        .zip(&z)
        .map(|(&s, &zs)| curve.eval(s) - ((big_t - s) * (c - r)).exp() * zs / investor.gamma)
        .collect()
}

/// Every per-event series written by a path dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDump {
    pub times: Vec<f64>,
    pub wealth_mv: Vec<f64>,
    pub wealth_mvns: Vec<f64>,
    pub wealth_mmv: Vec<f64>,
    pub pi_mv: Vec<f64>,
    pub pi_mvns: Vec<f64>,
    pub pi_mmv: Vec<f64>,
    pub y_star: Vec<f64>,
    pub m_mv: Vec<f64>,
    pub m_mmv: Vec<f64>,
    /// 0 where no jump occurs.
    pub jump_size: Vec<f64>,
    pub target_mv: Vec<f64>,
    pub target_mmv: Vec<f64>,
}

/// Evolves all three strategies and the dual processes on one shared path.
pub fn simulate_path_dump(
    market: &MarketParams,
    solved: &SolvedPreferences,
    investor: &InvestorParams,
    grid: &TimeGrid,
    seed: u64,
) -> Result<PathDump> {
    let path = simulate_market_path(market, grid, seed);
    let mv = evolve_wealth(&path, market, StrategyKind::MV, solved, investor)?;
    let mvns = evolve_wealth(&path, market, StrategyKind::MVNoShort, solved, investor)?;
    let mmv = evolve_wealth(&path, market, StrategyKind::MMV, solved, investor)?;
    let y_star = evolve_y_star(&path, market, solved, 1.0 / (2.0 * investor.gamma));
    let (m_mv, m_mmv) = evolve_pricing_operators(&path, market, solved);
    let curve_mv = TargetCurve::new(StrategyKind::MV, solved, investor, market.r);
    let curve_mmv = TargetCurve::new(StrategyKind::MMV, solved, investor, market.r);
    Ok(PathDump {
        target_mv: path.event_times.iter().map(|&s| curve_mv.eval(s)).collect(),
        target_mmv: path.event_times.iter().map(|&s| curve_mmv.eval(s)).collect(),
        jump_size: path.event_jumps.iter().map(|j| j.unwrap_or(0.0)).collect(),
        times: path.event_times,
        wealth_mv: mv.wealth,
        wealth_mvns: mvns.wealth,
        wealth_mmv: mmv.wealth,
        pi_mv: mv.allocations,
        pi_mvns: mvns.allocations,
        pi_mmv: mmv.allocations,
        y_star,
        m_mv,
        m_mmv,
    })
}
