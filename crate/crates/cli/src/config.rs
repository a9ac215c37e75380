//! Scenario files: one TOML document holding the market, the investor, the
//! Monte Carlo sizes, the strategies and the output settings.
//!
//! ```toml
//! name = "my-scenario"
//! strategies = ["mv", "mv-no-short", "mmv"]
//!
//! [market]
//! r = 0.05
//! mu = 0.25
//! sigma = 0.15
//! lambda = 2.0
//! jump = { type = "uniform", qd = -0.1, qu = 0.5 }
//!
//! [investor]
//! gamma = 2.0
//! x0 = 1.0
//! t0 = 0.0
//! horizon = 1.0
//!
//! [mc]
//! paths = 1000
//! steps = 1000
//! seed = 42
//!
//! [output]
//! dir = "out"
//! format = "both"
//! ```
//!
//! A multi-asset file replaces `[market]` with `[multi_market]`, whose `mu`,
//! `lambdas` and `jumps` are arrays and `sigma` is an array of rows.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mmv_core::scenarios::{builtin, SCENARIOS};
use mmv_core::{Error, InvestorParams, MCConfig, MarketParams, MultiMarket, Scenario, StrategyKind};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_PATHS: usize = 1000;
pub const DEFAULT_STEPS: usize = 1000;
pub const MULTI_DEFAULT_PATHS: usize = 10_000;
pub const MULTI_DEFAULT_STEPS: usize = 50;
/// Environment variable overriding the root seed; `--seed` still wins.
pub const SEED_ENV: &str = "MMV_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            paths: DEFAULT_PATHS,
            steps: DEFAULT_STEPS,
            seed: None,
        }
    }
}

fn default_paths() -> usize {
    DEFAULT_PATHS
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            format: OutputFormat::default(),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multi_market: Option<MultiMarket>,
    pub investor: InvestorParams,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// The market block of a validated config.
pub enum MarketKind<'a> {
    Single(&'a MarketParams),
    Multi(&'a MultiMarket),
}

impl ScenarioConfig {
    /// Config of a built-in scenario with default Monte Carlo and output settings.
    pub fn builtin(name: &str) -> anyhow::Result<Self> {
        let (market, multi_market, investor) = match builtin(name)? {
            Scenario::Single { market, investor } => (Some(market), None, investor),
            Scenario::Multi { market, investor } => (None, Some(market), investor),
        };
        // beta estimates need many paths but resolve the market on a coarse grid
        let mc = if multi_market.is_some() {
            McSection {
                paths: MULTI_DEFAULT_PATHS,
                steps: MULTI_DEFAULT_STEPS,
                seed: None,
            }
        } else {
            McSection::default()
        };
        Ok(ScenarioConfig {
            name: name.to_string(),
            strategies: default_strategies(),
            market,
            multi_market,
            investor,
            mc,
            output: OutputSection::default(),
        })
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("in scenario file {}", path.display()))?;
        if cfg.name.is_empty() {
            cfg.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(cfg)
    }

    /// A built-in name, or otherwise a path to a TOML file.
    pub fn resolve(name_or_path: &str) -> anyhow::Result<Self> {
        if SCENARIOS.iter().any(|(n, _)| *n == name_or_path) {
            return Self::builtin(name_or_path);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            bail!(
                "`{name_or_path}` is neither a built-in scenario ({}) nor an existing file",
                SCENARIOS.iter().map(|s| s.0).collect::<Vec<_>>().join(", ")
            );
        }
        Self::load(path)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match (&self.market, &self.multi_market) {
            (Some(m), None) => m.validate().map_err(|e| at("market", e))?,
            (None, Some(m)) => m.validate().map_err(|e| at("multi_market", e))?,
            (Some(_), Some(_)) => bail!("give either [market] or [multi_market], not both"),
            (None, None) => bail!("missing [market] or [multi_market] table"),
        }
        self.investor.validate().map_err(|e| at("investor", e))?;
        self.mc_config(DEFAULT_SEED).map_err(|e| at("mc", e))?;
        if self.strategies.is_empty() {
            bail!("strategies: at least one strategy is required");
        }
        Ok(())
    }

    pub fn market_kind(&self) -> MarketKind<'_> {
        match (&self.market, &self.multi_market) {
            (Some(m), _) => MarketKind::Single(m),
            (None, Some(m)) => MarketKind::Multi(m),
            (None, None) => unreachable!("validated configs carry a market"),
        }
    }

    pub fn mc_config(&self, seed: u64) -> mmv_core::Result<MCConfig> {
        MCConfig::new(self.mc.paths, self.mc.steps, seed, self.name.clone())
    }
}

fn at(section: &str, e: Error) -> anyhow::Error {
    match e {
        Error::Parameter { field, reason } => anyhow::anyhow!("{section}.{field}: {reason}"),
        other => anyhow::anyhow!("{section}: {other}"),
    }
}

/// Flag, then environment, then the config file, then [`DEFAULT_SEED`].
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: Option<u64>) -> anyhow::Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(v) = env {
        return v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}=`{v}` is not an unsigned integer"));
    }
    Ok(config.unwrap_or(DEFAULT_SEED))
}
