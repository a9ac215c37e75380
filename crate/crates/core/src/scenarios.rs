//! Built-in scenarios.
//!
//! Every single-asset scenario shares the base block `x0 = 1, t0 = 0, T = 1,
//! γ = 2, μ = 0.25, r = 0.05, σ = 0.15, λ = 2` and differs only in the jump law.

use crate::error::{Error, Result};
use crate::market::{InvestorParams, JumpDistribution, MarketParams};
use crate::multi::MultiMarket;

pub const BASE_R: f64 = 0.05;
pub const BASE_MU: f64 = 0.25;
pub const BASE_SIGMA: f64 = 0.15;
pub const BASE_LAMBDA: f64 = 2.0;

/// A named market.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Single {
        market: MarketParams,
        investor: InvestorParams,
    },
    Multi {
        market: MultiMarket,
        investor: InvestorParams,
    },
}

impl Scenario {
    pub fn investor(&self) -> &InvestorParams {
        match self {
            Scenario::Single { investor, .. } | Scenario::Multi { investor, .. } => investor,
        }
    }
}

/// `(name, description)` of every built-in scenario.
pub const SCENARIOS: &[(&str, &str)] = &[
    ("constant-0.2", "constant jump size 0.2 (inconsistent: 0.2 > q_mv)"),
    ("uniform", "jump size uniform on [-0.1, 0.5]"),
    ("exponential", "shifted exponential jumps, theta = 2, lower end -0.3"),
    ("constant-0.1", "constant jump size 0.1 (consistent: 0.1 <= q_mv)"),
    ("no-jump", "pure diffusion, lambda = 0"),
    ("multi-single", "one-asset multi market with constant-0.2 jumps"),
    (
        "multi-diagonal",
        "two independent assets with constant-0.2 and uniform jumps",
    ),
    (
        "multi-symmetric",
        "two exchangeable correlated assets with constant-0.2 jumps",
    ),
    (
        "multi-asymmetric",
        "two correlated assets with different drifts and jump laws",
    ),
];

pub fn base_investor() -> InvestorParams {
    InvestorParams {
        gamma: 2.0,
        x0: 1.0,
        t0: 0.0,
        horizon: 1.0,
    }
}

/// Base market with the given jump law.
pub fn base_market(jump: JumpDistribution) -> MarketParams {
    MarketParams {
        r: BASE_R,
        mu: BASE_MU,
        sigma: BASE_SIGMA,
        lambda: BASE_LAMBDA,
        jump,
    }
}

fn constant(q0: f64) -> JumpDistribution {
    JumpDistribution::Constant { q0 }
}

fn uniform() -> JumpDistribution {
    JumpDistribution::Uniform { qd: -0.1, qu: 0.5 }
}

fn exponential() -> JumpDistribution {
    JumpDistribution::Exponential { theta: 2.0, qd: -0.3 }
}

/// Looks up a built-in scenario by name.
pub fn builtin(name: &str) -> Result<Scenario> {
    let investor = base_investor();
    let single = |market| Ok(Scenario::Single { market, investor });
    let multi = |market| Ok(Scenario::Multi { market, investor });
    match name {
        "constant-0.2" => single(base_market(constant(0.2))),
        "uniform" => single(base_market(uniform())),
        "exponential" => single(base_market(exponential())),
        "constant-0.1" => single(base_market(constant(0.1))),
        "no-jump" => single(MarketParams {
            lambda: 0.0,
            ..base_market(constant(0.2))
        }),
        "multi-single" => multi(MultiMarket {
            r: BASE_R,
            mu: vec![BASE_MU],
            sigma: vec![vec![BASE_SIGMA]],
            lambdas: vec![BASE_LAMBDA],
            jumps: vec![constant(0.2)],
        }),
        "multi-diagonal" => multi(MultiMarket {
            r: BASE_R,
            mu: vec![BASE_MU, BASE_MU],
            sigma: vec![vec![BASE_SIGMA, 0.0], vec![0.0, BASE_SIGMA]],
            lambdas: vec![BASE_LAMBDA, BASE_LAMBDA],
            jumps: vec![constant(0.2), uniform()],
        }),
        "multi-symmetric" => multi(MultiMarket {
            r: BASE_R,
            mu: vec![BASE_MU, BASE_MU],
            sigma: vec![vec![0.15, 0.05], vec![0.05, 0.15]],
            lambdas: vec![BASE_LAMBDA, BASE_LAMBDA],
            jumps: vec![constant(0.2), constant(0.2)],
        }),
        "multi-asymmetric" => multi(MultiMarket {
            r: BASE_R,
            mu: vec![0.25, 0.18],
            sigma: vec![vec![0.15, 0.0], vec![0.06, 0.2]],
            lambdas: vec![BASE_LAMBDA, 1.0],
            jumps: vec![constant(0.2), uniform()],
        }),
        other => Err(Error::Configuration(format!(
            "unknown scenario `{other}`; known: {}",
            SCENARIOS.iter().map(|s| s.0).collect::<Vec<_>>().join(", ")
        ))),
    }
}
