//! Feedback strategies and their pre-determined wealth targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::InvestorParams;
use crate::preferences::SolvedPreferences;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "mv")]
    MV,
    #[serde(rename = "mv-no-short")]
    MVNoShort,
    #[serde(rename = "mmv")]
    MMV,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::MV, StrategyKind::MVNoShort, StrategyKind::MMV];

    /// Short label used in file columns.
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::MV => "mv",
            StrategyKind::MVNoShort => "mvns",
            StrategyKind::MMV => "mmv",
        }
    }

    /// The growth constant the strategy's target is built with.
    pub fn constant(self, solved: &SolvedPreferences) -> f64 {
        match self {
            StrategyKind::MV | StrategyKind::MVNoShort => solved.c_mv,
            StrategyKind::MMV => solved.c_mmv,
        }
    }

    /// Risk threshold dividing the wealth gap.
    pub fn threshold(self, solved: &SolvedPreferences) -> f64 {
        match self {
            StrategyKind::MV | StrategyKind::MVNoShort => solved.q_mv,
            StrategyKind::MMV => solved.q_mmv,
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mv" => Ok(StrategyKind::MV),
            "mvns" | "mv-no-short" | "mvnoshort" => Ok(StrategyKind::MVNoShort),
            "mmv" => Ok(StrategyKind::MMV),
            other => Err(Error::Configuration(format!("unknown strategy `{other}`"))),
        }
    }
}

/// `target(s) = e^{(s−t0)r} x0 + e^{(T−t0)c − (T−s)r} / γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetCurve {
    pub kind: StrategyKind,
    pub x0: f64,
    pub t0: f64,
    pub horizon: f64,
    pub r: f64,
    pub gamma: f64,
    pub c: f64,
}

impl TargetCurve {
    pub fn new(kind: StrategyKind, solved: &SolvedPreferences, investor: &InvestorParams, r: f64) -> Self {
        TargetCurve {
            kind,
            x0: investor.x0,
            t0: investor.t0,
            horizon: investor.horizon,
            r,
            gamma: investor.gamma,
            c: kind.constant(solved),
        }
    }

    /// Unchecked evaluation; callers guarantee `t0 ≤ s ≤ T`.
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.r * (s - self.t0)).exp() * self.x0
            + ((self.horizon - self.t0) * self.c - (self.horizon - s) * self.r).exp() / self.gamma
    }
}

/// Target wealth at time `s`.
pub fn target_wealth(curve: &TargetCurve, s: f64) -> Result<f64> {
    let slack = 1e-12 * (curve.horizon - curve.t0).abs().max(1.0);
    if !(s >= curve.t0 - slack && s <= curve.horizon + slack) {
        return Err(Error::Domain(format!(
            "time {s} outside [{}, {}]",
            curve.t0, curve.horizon
        )));
    }
    Ok(curve.eval(s))
}

/// Allocation from the left-limit wealth. Returns `(π, halted')`.
///
/// `halted` only matters for [`StrategyKind::MVNoShort`]: it latches once
/// wealth reaches the target and forces `π = 0` from then on.
pub fn allocation(
    kind: StrategyKind,
    solved: &SolvedPreferences,
    curve: &TargetCurve,
    s: f64,
    wealth_left_limit: f64,
    halted: bool,
) -> Result<(f64, bool)> {
    check_curve(kind, solved, curve)?;
    let target = target_wealth(curve, s)?;
    Ok(allocation_at(kind, solved, target, wealth_left_limit, halted))
}

pub(crate) fn check_curve(kind: StrategyKind, solved: &SolvedPreferences, curve: &TargetCurve) -> Result<()> {
    let expected = kind.constant(solved);
    if curve.kind != kind || curve.c != expected {
        return Err(Error::Configuration(format!(
            "target curve built for {} with c = {}, strategy {} needs c = {}",
            curve.kind, curve.c, kind, expected
        )));
    }
    Ok(())
}

/// Allocation given an already-evaluated target.
#[inline]
pub(crate) fn allocation_at(
    kind: StrategyKind,
    solved: &SolvedPreferences,
    target: f64,
    wealth: f64,
    halted: bool,
) -> (f64, bool) {
    let gap = target - wealth;
    match kind {
        StrategyKind::MV => (gap / solved.q_mv, halted),
        StrategyKind::MMV => (gap.max(0.0) / solved.q_mmv, halted),
        StrategyKind::MVNoShort => {
            let halted = halted || wealth >= target;
            if halted {
                (0.0, true)
            } else {
                (gap / solved.q_mv, false)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{JumpDistribution, MarketParams};
    use crate::preferences::{solve, DEFAULT_TOL};

    fn setup() -> (SolvedPreferences, InvestorParams) {
        let m = MarketParams::new(0.05, 0.25, 0.15, 2.0, JumpDistribution::constant(0.2).unwrap()).unwrap();
        (
            solve(&m, DEFAULT_TOL).unwrap(),
            InvestorParams::new(2.0, 1.0, 0.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn target_at_horizon_and_start() {
        let (s, inv) = setup();
        let c = TargetCurve::new(StrategyKind::MMV, &s, &inv, 0.05);
        let at_t = target_wealth(&c, 1.0).unwrap();
        assert!((at_t - (0.05f64.exp() + s.c_mmv.exp() / 2.0)).abs() < 1e-12);
        let at_0 = target_wealth(&c, 0.0).unwrap();
        assert!((at_0 - (1.0 + (s.c_mmv - 0.05).exp() / 2.0)).abs() < 1e-12);
        assert!(target_wealth(&c, 1.5).is_err());
        assert!(target_wealth(&c, -0.1).is_err());
    }

    #[test]
    fn flat_target_without_growth() {
        let c = TargetCurve {
            kind: StrategyKind::MV,
            x0: 1.0,
            t0: 0.0,
            horizon: 1.0,
            r: 0.0,
            gamma: 2.0,
            c: 0.0,
        };
        for s in [0.0, 0.3, 1.0] {
            assert_eq!(target_wealth(&c, s).unwrap(), 1.5);
        }
    }

    #[test]
    fn boundary_and_sign_cases() {
        let (s, inv) = setup();
        for kind in StrategyKind::ALL {
            let c = TargetCurve::new(kind, &s, &inv, 0.05);
            let t = target_wealth(&c, 0.4).unwrap();
            let (pi, halted) = allocation(kind, &s, &c, 0.4, t, false).unwrap();
            assert_eq!(pi, 0.0);
            assert_eq!(halted, kind == StrategyKind::MVNoShort);
        }
        let c = TargetCurve::new(StrategyKind::MV, &s, &inv, 0.05);
        let t = target_wealth(&c, 0.4).unwrap();
        let (pi, _) = allocation(StrategyKind::MV, &s, &c, 0.4, t + 1.0, false).unwrap();
        assert!((pi + 1.0 / s.q_mv).abs() < 1e-12);
        let c = TargetCurve::new(StrategyKind::MMV, &s, &inv, 0.05);
        let t = target_wealth(&c, 0.4).unwrap();
        let (pi, _) = allocation(StrategyKind::MMV, &s, &c, 0.4, t + 1.0, false).unwrap();
        assert_eq!(pi, 0.0);
    }

    #[test]
    fn initial_allocations_match_hand_arithmetic() {
        let (s, inv) = setup();
        let mv = TargetCurve::new(StrategyKind::MV, &s, &inv, 0.05);
        let (pi, _) = allocation(StrategyKind::MV, &s, &mv, 0.0, 1.0, false).unwrap();
        let t_mv = 1.0 + (s.c_mv - 0.05).exp() / 2.0;
        assert!((t_mv - 16.9435).abs() < 1e-3);
        assert!((pi - (t_mv - 1.0) / s.q_mv).abs() < 1e-10);
        let mmv = TargetCurve::new(StrategyKind::MMV, &s, &inv, 0.05);
        let (pi, _) = allocation(StrategyKind::MMV, &s, &mmv, 0.0, 1.0, false).unwrap();
        let t_mmv = 1.0 + (s.c_mmv - 0.05).exp() / 2.0;
        assert!((t_mmv - 21.7933).abs() < 1e-3);
        assert!((pi - (t_mmv - 1.0) / s.q_mmv).abs() < 1e-10);
    }

    #[test]
    fn mismatched_curve_is_a_configuration_error() {
        let (s, inv) = setup();
        let mv = TargetCurve::new(StrategyKind::MV, &s, &inv, 0.05);
        let err = allocation(StrategyKind::MMV, &s, &mv, 0.0, 1.0, false).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn no_short_halts_and_stays_halted() {
        let (s, inv) = setup();
        let c = TargetCurve::new(StrategyKind::MVNoShort, &s, &inv, 0.05);
        let t = target_wealth(&c, 0.5).unwrap();
        let (pi, h) = allocation(StrategyKind::MVNoShort, &s, &c, 0.5, t + 0.3, false).unwrap();
        assert_eq!((pi, h), (0.0, true));
        let (pi, h) = allocation(StrategyKind::MVNoShort, &s, &c, 0.6, 0.0, true).unwrap();
        assert_eq!((pi, h), (0.0, true));
    }

    #[test]
    fn kind_parses_from_labels() {
        for k in StrategyKind::ALL {
            assert_eq!(k.label().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("foo".parse::<StrategyKind>().is_err());
    }
}
