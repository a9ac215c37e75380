//! Criterion benchmarks for `mmv-core`; see `benches/`.

use mmv_core::scenarios::{base_market, builtin};
use mmv_core::{JumpDistribution, MarketParams, Scenario};

/// Single-asset built-in scenarios, by name.
pub fn single_markets() -> Vec<(&'static str, MarketParams)> {
    ["constant-0.2", "uniform", "exponential"]
        .into_iter()
        .map(|name| match builtin(name) {
            Ok(Scenario::Single { market, .. }) => (name, market),
            _ => unreachable!("{name} is a single-asset built-in"),
        })
        .collect()
}

/// The base market with a smooth tabulated law, to price the grid lookups.
pub fn tabulated_market(points: usize) -> MarketParams {
    // triangular density on [-0.1, 0.3] peaking at 0.1
    let grid: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let q = -0.1 + 0.4 * i as f64 / (points - 1) as f64;
            (q, (5.0 - 25.0 * (q - 0.1).abs()).max(0.0))
        })
        .collect();
    base_market(JumpDistribution::tabulated(grid).expect("triangle has unit mass"))
}
