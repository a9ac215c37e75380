//! Subcommand bodies. Each returns the console text and writes its files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mmv_core::montecarlo::run_experiment;
use mmv_core::multi::{capm_beta_mc, solve_q_mmv_vector, DEFAULT_MAX_ITER};
use mmv_core::preferences::solve;
use mmv_core::simulate::simulate_path_dump;
use mmv_core::{
    CapmReport, ExperimentResult, MultiSolved, PathDump, SolvedPreferences, StrategyKind, TerminalStats, TimeGrid,
    DEFAULT_TOL,
};
use serde::Serialize;

use crate::config::{MarketKind, OutputFormat, ScenarioConfig};

/// Where and how results are written.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn prepare(opts: &RunOptions) -> anyhow::Result<()> {
    fs::create_dir_all(&opts.out_dir).with_context(|| format!("creating {}", opts.out_dir.display()))
}

#[derive(Serialize)]
#[serde(untagged)]
enum Solved<'a> {
    Single(&'a SolvedPreferences),
    Multi(&'a MultiSolved),
}

#[derive(Serialize)]
struct SolveReport<'a> {
    scenario: &'a str,
    solved: Solved<'a>,
}

pub fn cmd_solve(cfg: &ScenarioConfig, opts: &RunOptions) -> anyhow::Result<String> {
    prepare(opts)?;
    let mut out = String::new();
    writeln!(out, "scenario {}", cfg.name)?;
    match cfg.market_kind() {
        MarketKind::Single(m) => {
            let s = solve(m, DEFAULT_TOL)?;
            writeln!(out, "q_mv    {:.4}", s.q_mv)?;
            writeln!(out, "q_mmv   {:.4}", s.q_mmv)?;
            writeln!(out, "c_mv    {:.4}", s.c_mv)?;
            writeln!(out, "c_mmv   {:.4}", s.c_mmv)?;
            writeln!(out, "consistent {}", s.consistent)?;
            if opts.format.csv() {
                write_csv(
                    &opts.out_dir.join("solve.csv"),
                    &[
                        "scenario",
                        "q_mv",
                        "q_mmv",
                        "c_mv",
                        "c_mmv",
                        "phi1_star",
                        "residual",
                        "consistent",
                    ],
                    [vec![
                        cfg.name.clone(),
                        f6(s.q_mv),
                        f6(s.q_mmv),
                        f6(s.c_mv),
                        f6(s.c_mmv),
                        f6(s.phi1_star),
                        format!("{:.6e}", s.residual),
                        s.consistent.to_string(),
                    ]],
                )?;
            }
            if opts.format.json() {
                let report = SolveReport {
                    scenario: &cfg.name,
                    solved: Solved::Single(&s),
                };
                write_json(&opts.out_dir.join("solve.json"), &report)?;
            }
        }
        MarketKind::Multi(m) => {
            let s = solve_q_mmv_vector(m, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            writeln!(out, "asset  q_mv     q_mmv    coeff    weight")?;
            for i in 0..m.n_assets() {
                writeln!(
                    out,
                    "{i:<5}  {:.4}   {:.4}   {:.4}   {:.4}",
                    s.q_mv[i], s.q_mmv[i], s.coeff[i], s.market_portfolio[i]
                )?;
            }
            writeln!(out, "c_ma   {:.4}", s.c_ma)?;
            writeln!(out, "iterations {} residual {:.2e}", s.iterations, s.residual)?;
            if !s.q_mmv_below_q_mv {
                writeln!(out, "note: some q_mmv exceeds its q_mv")?;
            }
            if opts.format.csv() {
                write_csv(
                    &opts.out_dir.join("solve.csv"),
                    &["asset", "q_mv", "q_mmv", "omega_hat", "coeff", "market_weight", "c_ma"],
                    (0..m.n_assets()).map(|i| {
                        vec![
                            i.to_string(),
                            f6(s.q_mv[i]),
                            f6(s.q_mmv[i]),
                            f6(s.omega_hat[i]),
                            f6(s.coeff[i]),
                            f6(s.market_portfolio[i]),
                            f6(s.c_ma),
                        ]
                    }),
                )?;
            }
            if opts.format.json() {
                let report = SolveReport {
                    scenario: &cfg.name,
                    solved: Solved::Multi(&s),
                };
                write_json(&opts.out_dir.join("solve.json"), &report)?;
            }
        }
    }
    Ok(out)
}

pub const PATH_COLUMNS: [&str; 13] = [
    "time",
    "wealth_mv",
    "wealth_mvns",
    "wealth_mmv",
    "pi_mv",
    "pi_mvns",
    "pi_mmv",
    "y_star",
    "m_mv",
    "m_mmv",
    "jump_size",
    "target_mv",
    "target_mmv",
];

fn path_rows(d: &PathDump) -> impl Iterator<Item = Vec<String>> + '_ {
    (0..d.times.len()).map(move |k| {
        [
            d.times[k],
            d.wealth_mv[k],
            d.wealth_mvns[k],
            d.wealth_mmv[k],
            d.pi_mv[k],
            d.pi_mvns[k],
            d.pi_mmv[k],
            d.y_star[k],
            d.m_mv[k],
            d.m_mmv[k],
            d.jump_size[k],
            d.target_mv[k],
            d.target_mmv[k],
        ]
        .iter()
        .map(|v| f6(*v))
        .collect()
    })
}

pub fn cmd_simulate(cfg: &ScenarioConfig, opts: &RunOptions) -> anyhow::Result<String> {
    let MarketKind::Single(m) = cfg.market_kind() else {
        bail!("simulate needs a single-asset scenario; `{}` is multi-asset", cfg.name);
    };
    prepare(opts)?;
    let s = solve(m, DEFAULT_TOL)?;
    let grid = TimeGrid::for_investor(&cfg.investor, cfg.mc.steps)?;
    let dump = simulate_path_dump(m, &s, &cfg.investor, &grid, opts.seed)?;
    let jumps: Vec<(f64, f64)> = dump
        .times
        .iter()
        .zip(&dump.jump_size)
        .filter(|(_, &q)| q != 0.0)
        .map(|(&t, &q)| (t, q))
        .collect();
    let last = dump.times.len() - 1;
    let mut out = String::new();
    writeln!(
        out,
        "scenario {} seed {} events {}",
        cfg.name,
        opts.seed,
        dump.times.len()
    )?;
    for (t, q) in &jumps {
        writeln!(out, "jump at t = {t:.4}, size {q:.4}")?;
    }
    writeln!(
        out,
        "X(T): mv {:.4}  mvns {:.4}  mmv {:.4}",
        dump.wealth_mv[last], dump.wealth_mvns[last], dump.wealth_mmv[last]
    )?;
    if opts.format.csv() {
        write_csv(&opts.out_dir.join("path.csv"), &PATH_COLUMNS, path_rows(&dump))?;
    }
    if opts.format.json() {
        write_json(&opts.out_dir.join("path.json"), &dump)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct MonteCarloReport<'a> {
    scenario: &'a str,
    seed: u64,
    n_paths: usize,
    n_steps: usize,
    excluded: usize,
    solved: &'a SolvedPreferences,
    stats: Vec<(StrategyKind, &'a TerminalStats)>,
}

const SUMMARY_COLUMNS: [&str; 17] = [
    "strategy",
    "n_paths",
    "mean",
    "variance",
    "std_error_mean",
    "u_gamma",
    "u_gamma_se",
    "v_gamma_dual",
    "v_gamma_se",
    "closed_form_u",
    "closed_form_v",
    "domain_exceed_fraction",
    "p99",
    "q_mv",
    "q_mmv",
    "c_mv",
    "c_mmv",
];

fn summary_row(kind: StrategyKind, st: &TerminalStats, s: &SolvedPreferences) -> Vec<String> {
    let mut row = vec![kind.label().to_string(), st.n_paths.to_string()];
    row.extend(
        [
            st.mean,
            st.variance,
            st.std_error_mean,
            st.u_gamma,
            st.u_gamma_se,
            st.v_gamma_dual,
            st.v_gamma_se,
            st.closed_form_u,
            st.closed_form_v,
            st.domain_exceed_fraction,
            st.p99,
            s.q_mv,
            s.q_mmv,
            s.c_mv,
            s.c_mmv,
        ]
        .iter()
        .map(|v| f6(*v)),
    );
    row
}

pub fn cmd_montecarlo(cfg: &ScenarioConfig, opts: &RunOptions) -> anyhow::Result<String> {
    let MarketKind::Single(m) = cfg.market_kind() else {
        bail!(
            "montecarlo needs a single-asset scenario; use `capm` for `{}`",
            cfg.name
        );
    };
    prepare(opts)?;
    let mc = cfg.mc_config(opts.seed)?;
    let res: ExperimentResult = run_experiment(m, &cfg.investor, &cfg.strategies, &mc)?;
    let mut out = String::new();
    writeln!(
        out,
        "scenario {} seed {} paths {} steps {} excluded {}",
        cfg.name, opts.seed, mc.n_paths, mc.n_steps, res.excluded
    )?;
    writeln!(
        out,
        "strategy  mean       p99        U_γ (±SE)            V_γ dual (±SE)       exceed"
    )?;
    for (kind, st) in &res.stats {
        writeln!(
            out,
            "{:<8}  {:<9.4}  {:<9.4}  {:.4} (±{:.4})  {:.4} (±{:.4})  {:.4}",
            kind.label(),
            st.mean,
            st.p99,
            st.u_gamma,
            st.u_gamma_se,
            st.v_gamma_dual,
            st.v_gamma_se,
            st.domain_exceed_fraction
        )?;
    }
    if let Some(st) = res.stats.values().next() {
        writeln!(
            out,
            "closed form: u* = {:.4}  v* = {:.4}",
            st.closed_form_u, st.closed_form_v
        )?;
    }
    for (kind, st) in &res.stats {
        let (reference, est, se) = match kind {
            StrategyKind::MMV => (st.closed_form_v, st.v_gamma_dual, st.v_gamma_se),
            _ => (st.closed_form_u, st.u_gamma, st.u_gamma_se),
        };
        writeln!(
            out,
            "{:<8}  empirical − closed form = {:.4} ({:.2} SE)",
            kind.label(),
            est - reference,
            (est - reference) / se
        )?;
    }
    if opts.format.csv() {
        write_csv(
            &opts.out_dir.join("summary.csv"),
            &SUMMARY_COLUMNS,
            res.stats.iter().map(|(k, st)| summary_row(*k, st, &res.solved)),
        )?;
        write_csv(
            &opts.out_dir.join("histogram.csv"),
            &["strategy", "bin_left", "bin_right", "count"],
            res.stats.iter().flat_map(|(k, st)| {
                st.histogram
                    .iter()
                    .map(move |b| vec![k.label().to_string(), f6(b.left), f6(b.right), b.count.to_string()])
            }),
        )?;
    }
    if opts.format.json() {
        let report = MonteCarloReport {
            scenario: &cfg.name,
            seed: opts.seed,
            n_paths: mc.n_paths,
            n_steps: mc.n_steps,
            excluded: res.excluded,
            solved: &res.solved,
            stats: res.stats.iter().map(|(k, st)| (*k, st)).collect(),
        };
        write_json(&opts.out_dir.join("montecarlo.json"), &report)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct CapmOutput<'a> {
    scenario: &'a str,
    seed: u64,
    solved: &'a MultiSolved,
    report: &'a CapmReport,
}

pub fn cmd_capm(cfg: &ScenarioConfig, opts: &RunOptions) -> anyhow::Result<String> {
    let MarketKind::Multi(m) = cfg.market_kind() else {
        bail!("capm needs a multi-asset scenario; `{}` is single-asset", cfg.name);
    };
    prepare(opts)?;
    let s = solve_q_mmv_vector(m, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let mc = cfg.mc_config(opts.seed)?;
    let rep = capm_beta_mc(m, &s, &cfg.investor, &mc)?;
    let mut out = String::new();
    writeln!(
        out,
        "scenario {} seed {} paths {} steps {}",
        cfg.name, opts.seed, mc.n_paths, mc.n_steps
    )?;
    writeln!(out, "asset  beta_cov  beta_excess  se      agrees")?;
    for a in &rep.assets {
        writeln!(
            out,
            "{:<5}  {:<8.4}  {:<11.4}  {:.4}  {}",
            a.asset, a.beta_cov, a.beta_excess, a.se, a.agrees
        )?;
    }
    writeln!(
        out,
        "E[M R_mkt] = {:.4} (±{:.4})",
        rep.market_pricing_mean, rep.market_pricing_se
    )?;
    if opts.format.csv() {
        write_csv(
            &opts.out_dir.join("beta.csv"),
            &["asset", "beta_cov", "beta_excess", "se"],
            rep.assets
                .iter()
                .map(|a| vec![a.asset.to_string(), f6(a.beta_cov), f6(a.beta_excess), f6(a.se)]),
        )?;
    }
    if opts.format.json() {
        let output = CapmOutput {
            scenario: &cfg.name,
            seed: opts.seed,
            solved: &s,
            report: &rep,
        };
        write_json(&opts.out_dir.join("capm.json"), &output)?;
    }
    Ok(out)
}

pub fn cmd_list_scenarios() -> String {
    let mut out = String::new();
    for (name, desc) in mmv_core::scenarios::SCENARIOS {
        let _ = writeln!(out, "{name:<18} {desc}");
    }
    out
}
