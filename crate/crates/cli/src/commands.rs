use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use serde::Serialize;
use serde_json::json;
use yieldopt::engine::{simulate as run_policy, RunReport};
use yieldopt::experiments::{run_named, NAMES};
use yieldopt::instances::{gen_complete_bipartite, gen_upper_triangular, supply_factor};
use yieldopt::matching::{matching_trials, mean_stderr, surplus_ratio};
use yieldopt::oracle::{
    adversary_lp_tight, lp_slack, offline_opt_exact, offline_opt_formula, offline_opt_upper_bound,
    online_opt_bruteforce, RealizedInstance,
};
use yieldopt::policy::{beta_closed_form, best_reward, binary_threshold, ub_continuous, Grid, ObjectiveParams};
use yieldopt::ratio::{binary_alg_bound, binary_ratio, worst_case_distribution};
use yieldopt::{Error, Instance, RewardDistributionF64, ThresholdPolicyF64};

use crate::config::{
    either, exactly_one, load_dist, load_instance, parse_dist_arg, read_json, DistSource, ExperimentConfig,
    InstanceSource, SCHEMA_VERSION,
};
use crate::error::CliError;
use crate::{
    GenArgs, InstanceKind, MatchingArgs, OracleArgs, OracleMode, RatioArgs, ReproArgs, SimulateArgs,
    ThresholdsArgs, WorstcaseArgs,
};

type CmdResult = Result<ExitCode, CliError>;

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes)?,
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn csv_writer() -> csv::WriterBuilder {
    let mut b = csv::WriterBuilder::new();
    b.terminator(csv::Terminator::Any(b'\n'));
    b
}

fn emit_csv<R: Serialize>(out: Option<&Path>, rows: &[R]) -> Result<(), CliError> {
    let mut w = csv_writer().from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(anyhow::anyhow!("{e}")))?;
    emit(out, &bytes)
}

fn require<T>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::validation(format!("missing {what}")))
}

fn load_config(path: Option<&Path>) -> Result<Option<ExperimentConfig>, CliError> {
    path.map(ExperimentConfig::load).transpose()
}

fn dist_source(flag: Option<&str>, cfg: Option<&ExperimentConfig>) -> Result<DistSource, CliError> {
    let flag = flag.map(parse_dist_arg).transpose()?;
    exactly_one(flag, cfg.and_then(|c| c.dist.clone()), "distribution")
}

fn checked_supply(f: f64) -> Result<f64, CliError> {
    if !(f >= 1.0 && f.is_finite()) {
        return Err(CliError::validation(format!("supply factor {f} must be at least 1")));
    }
    Ok(f)
}

pub fn thresholds(a: ThresholdsArgs) -> CmdResult {
    let cfg = load_config(a.config.as_deref())?;
    let cfg = cfg.as_ref();
    let dist = load_dist(&dist_source(a.dist.as_deref(), cfg)?)?;
    let penalty = require(either(a.penalty, cfg.and_then(|c| c.penalty)), "--penalty")?;
    let supply = checked_supply(require(either(a.supply, cfg.and_then(|c| c.supply)), "--supply")?)?;
    let eps = either(a.grid, cfg.and_then(|c| c.grid));
    let grid = eps.map(Grid::from_eps).transpose()?.unwrap_or_default();
    let dist = dist.validate(penalty)?;
    let (policy, value) = best_reward(&dist, &ObjectiveParams::unit(supply, penalty), grid);
    let closed = (dist.len() == 2 && dist.support()[0] == 0.0)
        .then(|| binary_threshold(supply, dist.cum_mass()[0], dist.support()[1], penalty).ok())
        .flatten();
    let reserves: Vec<f64> = (0..policy.len()).map(|k| policy.reserve(k)).collect();
    let out = either(a.out, cfg.and_then(|c| c.output.clone()));
    emit_json(
        out.as_deref(),
        &json!({
            "schema": SCHEMA_VERSION,
            "thresholds": policy.thresholds(),
            "reserves": reserves,
            "objective_per_unit_demand": value,
            "grid_eps": grid.eps(),
            "binary_closed_form": closed,
        }),
    )?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SeedRow {
    seed: u64,
    reward: f64,
    exchange_revenue: f64,
    penalty_paid: f64,
    fill_rate: f64,
}

impl From<&RunReport<f64>> for SeedRow {
    fn from(r: &RunReport<f64>) -> Self {
        SeedRow {
            seed: r.seed.unwrap_or_default(),
            reward: r.reward,
            exchange_revenue: r.exchange_revenue,
            penalty_paid: r.penalty_paid,
            fill_rate: r.fill_rate(),
        }
    }
}

pub fn simulate(a: SimulateArgs) -> CmdResult {
    let cfg = load_config(a.config.as_deref())?;
    let cfg = cfg.as_ref();
    let dist = load_dist(&dist_source(a.dist.as_deref(), cfg)?)?;
    let penalty = require(either(a.penalty, cfg.and_then(|c| c.penalty)), "--penalty")?;
    let dist = dist.validate(penalty)?;
    let supply_arg = either(a.supply, cfg.and_then(|c| c.supply));
    let flag_instance = a.instance.clone().map(|path| InstanceSource::Path { path });
    let source = exactly_one(flag_instance, cfg.and_then(|c| c.instance.clone()), "instance")?;
    let instance: Instance = load_instance(&source, supply_arg)?;

    let seeds: Vec<u64> = match (a.seed, cfg.map(|c| c.seeds.clone()).unwrap_or_default()) {
        (Some(root), cfg_seeds) if cfg_seeds.is_empty() => (root..root + a.seeds.unwrap_or(1)).collect(),
        (Some(_), _) => return Err(CliError::validation("seeds given both as a flag and in the config")),
        (None, cfg_seeds) if !cfg_seeds.is_empty() => cfg_seeds,
        (None, _) => return Err(CliError::validation("simulation needs an explicit --seed")),
    };

    let supply = match instance.declared_supply_factor().or(supply_arg) {
        Some(f) => checked_supply(f)?,
        None => supply_factor(&instance).max(1.0),
    };
    let eps = either(a.grid, cfg.and_then(|c| c.grid));
    let grid = match eps {
        Some(e) => Grid::from_eps(e)?,
        None => Grid::for_advertisers(instance.advertisers()),
    };
    let unit = ObjectiveParams::unit(supply, penalty);
    let policy = match a.thresholds.clone() {
        Some(s) => ThresholdPolicyF64::new(dist.clone(), s)?,
        None => best_reward(&dist, &unit, grid).0,
    };

    let reports: Vec<RunReport<f64>> = seeds
        .iter()
        .map(|&seed| run_policy(&instance, &policy, penalty, seed))
        .collect::<Result<_, Error>>()?;
    let rows: Vec<SeedRow> = reports.iter().map(SeedRow::from).collect();
    let out = either(a.out.clone(), cfg.and_then(|c| c.output.clone()));
    emit_csv(out.as_deref(), &rows)?;

    if let Some(path) = &a.report {
        let n = instance.total_demand() as f64;
        let rewards: Vec<f64> = reports.iter().map(|r| r.reward).collect();
        let (mean, stderr) = mean_stderr(&rewards);
        let ub = ub_continuous(&dist, policy.thresholds(), &ObjectiveParams::new(supply, penalty, n));
        let opt = offline_opt_formula(&dist, supply, n);
        let echo = ExperimentConfig {
            schema: SCHEMA_VERSION,
            dist: Some(DistSource::Inline(dist.clone())),
            penalty: Some(penalty),
            supply: Some(supply),
            instance: Some(source),
            grid: Some(grid.eps()),
            seeds: seeds.clone(),
            output: out,
        };
        emit_json(
            Some(path),
            &json!({
                "tool_version": env!("CARGO_PKG_VERSION"),
                "config": echo,
                "thresholds": policy.thresholds(),
                "per_seed": reports,
                "aggregate": {
                    "mean_reward": mean,
                    "stderr_reward": stderr,
                    "mean_reward_per_unit_demand": mean / n,
                },
                "references": {
                    "continuous_objective": ub,
                    "offline_opt_formula": opt,
                    "ratio_to_offline_formula": if opt > 0.0 { Some(mean / opt) } else { None },
                },
            }),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn gen(a: GenArgs) -> CmdResult {
    let inst = match a.kind {
        InstanceKind::Triangular => {
            let seed = require(a.seed, "--seed for a triangular instance")?;
            gen_upper_triangular(a.m, a.n, a.supply, seed)?
        }
        InstanceKind::Complete => gen_complete_bipartite(a.m, a.n, a.supply, a.groups)?,
    };
    emit_json(a.out.as_deref(), &inst)?;
    Ok(ExitCode::SUCCESS)
}

pub fn oracle(a: OracleArgs) -> CmdResult {
    let dist = || -> Result<RewardDistributionF64, CliError> {
        load_dist(&parse_dist_arg(&require(a.dist.clone(), "--dist")?)?)
    };
    let instance = || -> Result<Instance, CliError> { read_json(&require(a.instance.clone(), "--instance")?) };
    let value = match a.mode {
        OracleMode::OptFormula => {
            let f = checked_supply(require(a.supply, "--supply")?)?;
            let n = require(a.demand, "--demand")?;
            json!({ "mode": "opt-formula", "value": offline_opt_formula(&dist()?, f, n) })
        }
        OracleMode::OptExact => {
            let penalty = require(a.penalty, "--penalty")?;
            let inst = instance()?;
            let realized = match (&a.rewards, a.seed) {
                (Some(path), None) => RealizedInstance::new(inst, read_json(path)?)?,
                (None, Some(seed)) => RealizedInstance::sample(inst, &dist()?.validate(penalty)?, seed),
                _ => return Err(CliError::validation("opt-exact needs exactly one of --rewards and --seed")),
            };
            json!({
                "mode": "opt-exact",
                "value": offline_opt_exact(&realized, penalty)?,
                "upper_bound": offline_opt_upper_bound(&realized),
            })
        }
        OracleMode::OnlineExact => {
            let penalty = require(a.penalty, "--penalty")?;
            let d = dist()?.validate(penalty)?;
            json!({ "mode": "online-exact", "value": online_opt_bruteforce(&instance()?, &d, penalty)? })
        }
        OracleMode::Beta => {
            let f = checked_supply(require(a.supply, "--supply")?)?;
            let n = a.demand.unwrap_or(1.0);
            let t = require(a.t, "--t")?;
            if t < 2 {
                return Err(CliError::validation("--t must be at least 2"));
            }
            let policy = ThresholdPolicyF64::new(dist()?, require(a.thresholds.clone(), "--thresholds")?)?;
            let closed = beta_closed_form(&policy, f, n, t)?;
            let tight = adversary_lp_tight(&policy, f, n, t);
            let diff = closed.beta.iter().zip(&tight.beta).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let slack = lp_slack(&policy, &tight, f).into_iter().map(f64::abs).fold(0.0, f64::max);
            json!({
                "mode": "beta",
                "t": t,
                "beta_closed_form": closed.beta,
                "beta_tight": tight.beta,
                "alpha": closed.alpha(),
                "max_abs_difference": diff,
                "max_constraint_slack": slack,
            })
        }
    };
    emit_json(a.out.as_deref(), &value)?;
    Ok(ExitCode::SUCCESS)
}

pub fn ratio(a: RatioArgs) -> CmdResult {
    let value = match binary_ratio(a.supply, a.q, a.r, a.penalty) {
        Ok(rep) => serde_json::to_value(rep)?,
        Err(Error::UndefinedRatio { alg_bound, opt }) => {
            let (_, case) = binary_alg_bound(a.supply, a.q, a.r, a.penalty);
            json!({ "alg_bound": alg_bound, "opt": opt, "ratio": null, "threshold_case": case })
        }
        Err(e) => return Err(e.into()),
    };
    emit_json(a.out.as_deref(), &value)?;
    Ok(ExitCode::SUCCESS)
}

pub fn worstcase(a: WorstcaseArgs) -> CmdResult {
    let grid = a.grid.map(Grid::from_eps).transpose()?.unwrap_or_default();
    let wc = worst_case_distribution(a.mean, a.penalty, a.supply, grid)?;
    emit_json(a.out.as_deref(), &wc)?;
    Ok(ExitCode::SUCCESS)
}

pub fn matching(a: MatchingArgs) -> CmdResult {
    let seed = require(a.seed, "--seed")?;
    let weights: Option<Vec<f64>> = a.weights.as_deref().map(read_json).transpose()?;
    let rows = matching_trials(a.m, a.n, a.supply, weights.as_deref(), a.trials, seed)?;
    emit_csv(a.out.as_deref(), &rows)?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let (mean, se) = mean_stderr(&ratios);
    eprintln!(
        "{}",
        json!({ "mean_ratio": mean, "stderr": se, "reference": surplus_ratio(a.supply as f64) })
    );
    Ok(ExitCode::SUCCESS)
}

pub fn repro(a: ReproArgs) -> CmdResult {
    let names: Vec<&str> = if a.name == "all" {
        NAMES.to_vec()
    } else if NAMES.contains(&a.name.as_str()) {
        vec![a.name.as_str()]
    } else {
        return Err(CliError::validation(format!(
            "unknown experiment {:?}; expected one of {} or all",
            a.name,
            NAMES.join(", ")
        )));
    };
    let mut all_pass = true;
    for name in names {
        let report = run_named(name).expect("listed name")?;
        println!("{report}");
        all_pass &= report.passed;
    }
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
