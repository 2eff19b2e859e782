use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use alphapot::alpha_bounds::{asymmetry_index, lq_alpha_bound, lq_pair_bounds, regime_decay_fit, theorem_alpha_bound};
use alphapot::game_model::{make_regime_weights, parse_config_file, spec_from_config, GeneralGameSpec, Regime};
use alphapot::ne_verify::{
    check_alpha_potential, check_epsilon_ne, gradient_deviations, sample_deviations, time_bump, AlphaCheckOptions,
    DeviationKind, NeBudget, PhiEstimator, Verdict,
};
use alphapot::ode_solvers::{default_steps, solve_riccati};
use alphapot::potential_eval::{estimate_potential_lq, estimate_potential_sensitivity, estimate_value};
use alphapot::sde_sim::{simulate_f_process, RMode};
use alphapot::{FeedbackLaw, LqGameSpec, NoiseBatch, StrategyProfile, TimeGrid};

use crate::artifacts::{OutDir, Provenance};
use crate::{Args, Command, ConfigError};

/// Paths written to the CSV exports of `simulate`.
const CSV_PATHS: usize = 16;
/// Paths kept in the binary store of `simulate`.
const STORE_PATHS: usize = 256;

pub enum Status {
    Ok,
    Violated,
}

pub fn run(args: &Args) -> Result<(Status, Value)> {
    match args.command {
        Command::RegimeSweep => regime_sweep(args),
        cmd => {
            let (spec, bytes) = load_spec(args)?;
            let grid = TimeGrid::uniform(spec.horizon, args.steps.unwrap_or_else(|| default_steps(spec.horizon)))?;
            let prov = Provenance::new(cmd.name(), &bytes, args.seed, grid_json(&grid, args));
            let mut out = OutDir::create(&args.out, prov)?;
            let res = match cmd {
                Command::AlphaBound => alpha_bound(args, &spec, &mut out),
                Command::Solve => solve(&spec, &grid, &mut out),
                Command::Simulate => simulate(args, &spec, &grid, &mut out),
                Command::Potential => potential(args, &spec, &grid, &mut out),
                Command::VerifyNe => verify_ne(args, &spec, &grid, &mut out),
                Command::CheckPotential => check_potential(args, &spec, &grid, &mut out),
                Command::RegimeSweep => unreachable!("handled above"),
            }?;
            out.finish()?;
            Ok(res)
        }
    }
}

fn load_spec(args: &Args) -> Result<(LqGameSpec, Vec<u8>)> {
    let path = args.config.as_deref().ok_or_else(|| ConfigError("--config is required for this command".into()))?;
    let bytes = read_config(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| ConfigError(format!("{} is not UTF-8", path.display())))?;
    Ok((spec_from_config(&parse_config_file(&text)?)?, bytes))
}

fn read_config(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())).into())
}

fn grid_json(grid: &TimeGrid, args: &Args) -> Value {
    json!({ "n_steps": grid.n_steps, "horizon": grid.horizon(), "paths": args.paths, "r_nodes": args.r_nodes })
}

fn r_mode(args: &Args) -> RMode {
    if args.r_nodes == 0 {
        RMode::Sampled
    } else {
        RMode::Quadrature(args.r_nodes)
    }
}

fn noise(args: &Args, grid: &TimeGrid, n: usize) -> Result<NoiseBatch> {
    Ok(NoiseBatch::new(args.seed, args.paths, grid.clone(), n, r_mode(args))?)
}

fn status(v: Verdict) -> Status {
    if v == Verdict::Violated {
        Status::Violated
    } else {
        Status::Ok
    }
}

fn alpha_bound(args: &Args, spec: &LqGameSpec, out: &mut OutDir) -> Result<(Status, Value)> {
    let drift = GeneralGameSpec::from_lq(spec).drift_bounds;
    let breakdown = theorem_alpha_bound(&lq_pair_bounds(spec), &drift, spec.n_players, args.envelope_c)?;
    let res = json!({
        "breakdown": breakdown,
        "asymmetry_index": asymmetry_index(&spec.q)?,
        "lq_bound": lq_alpha_bound(spec, args.envelope_c)?,
    });
    out.json("alpha_bound.json", &res)?;
    Ok((Status::Ok, res))
}

fn solve(spec: &LqGameSpec, grid: &TimeGrid, out: &mut OutDir) -> Result<(Status, Value)> {
    let ric = solve_riccati(spec, grid)?;
    let header = out.prov.header();
    ric.write_store(&out.path("riccati.bin"), header)?;
    ric.write_csv(&out.root.join("riccati.csv"))?;
    out.stamp_csv("riccati.csv")?;
    let res = json!({
        "residuals": ric.residual_report,
        "m3_at_0": ric.m3[0],
        "potential_minimum": ric.potential_minimum(&spec.x0),
    });
    out.json("residuals.json", &res)?;
    Ok((Status::Ok, res))
}

fn simulate(args: &Args, spec: &LqGameSpec, grid: &TimeGrid, out: &mut OutDir) -> Result<(Status, Value)> {
    let ric = solve_riccati(spec, grid)?;
    let noise = noise(args, grid, spec.n_players)?;
    let bundle = simulate_f_process(spec, &ric, &noise)?;
    let n = spec.n_players;
    let last = grid.n_steps;
    let mean_terminal: Vec<f64> =
        (0..n).map(|i| (0..bundle.n_paths()).map(|p| bundle.x_at(p, last, i)).sum::<f64>() / bundle.n_paths() as f64).collect();
    bundle.write_store(&out.path("paths.bin"), STORE_PATHS, out.prov.header())?;
    bundle.write_csv(&out.root.join("paths.csv"), CSV_PATHS)?;
    out.stamp_csv("paths.csv")?;
    let res = json!({ "bundle": bundle.describe(), "mean_terminal_state": mean_terminal });
    out.json("simulate.json", &res)?;
    Ok((Status::Ok, res))
}

fn potential(args: &Args, spec: &LqGameSpec, grid: &TimeGrid, out: &mut OutDir) -> Result<(Status, Value)> {
    let ric = solve_riccati(spec, grid)?;
    let noise = noise(args, grid, spec.n_players)?;
    let profile = StrategyProfile::feedback(FeedbackLaw::new(spec, &ric, grid)?);
    let values = (0..spec.n_players).map(|i| estimate_value(spec, &profile, &noise, i)).collect::<Result<Vec<_>, _>>()?;
    let res = json!({
        "control": "feedback",
        "phi_lifted": estimate_potential_lq(spec, &profile, &noise)?,
        "phi_sensitivity": estimate_potential_sensitivity(spec, &profile, &noise)?,
        "phi_minimum_riccati": ric.potential_minimum(&spec.x0),
        "values": values,
    });
    out.json("potential.json", &res)?;
    Ok((Status::Ok, res))
}

fn verify_ne(args: &Args, spec: &LqGameSpec, grid: &TimeGrid, out: &mut OutDir) -> Result<(Status, Value)> {
    let ric = solve_riccati(spec, grid)?;
    let noise = noise(args, grid, spec.n_players)?;
    let budget = NeBudget { seed: args.seed, control_bound: spec.control_bound, ..NeBudget::default() };
    let report = check_epsilon_ne(spec, &ric, &budget, &noise, lq_alpha_bound(spec, args.envelope_c)?)?;
    out.json("ne_report.json", &report)?;
    let p = out.path("ne_report.txt");
    std::fs::write(&p, report.to_table())?;
    Ok((status(report.verdict), json!({ "verdict": report.verdict, "epsilon_proxy": report.epsilon_proxy })))
}

#[derive(Serialize)]
struct TrialRow<'a> {
    player: usize,
    kind: &'a str,
    param: f64,
    clipped: bool,
    d_v: f64,
    d_v_se: f64,
    d_phi: f64,
    d_phi_se: f64,
    gap: f64,
    gap_se: f64,
}

fn check_potential(args: &Args, spec: &LqGameSpec, grid: &TimeGrid, out: &mut OutDir) -> Result<(Status, Value)> {
    let ric = solve_riccati(spec, grid)?;
    let noise = noise(args, grid, spec.n_players)?;
    let base = StrategyProfile::feedback(FeedbackLaw::new(spec, &ric, grid)?);
    let bound = spec.control_bound;
    let mut devs = Vec::new();
    for p in 0..spec.n_players {
        for kind in DeviationKind::ALL {
            if kind == DeviationKind::GradientTilt {
                devs.extend(gradient_deviations(spec, &base, &noise, p, args.per_kind, bound)?);
            } else {
                devs.extend(sample_deviations(&base, p, kind, args.per_kind, args.seed, bound)?);
            }
        }
    }
    let opts = AlphaCheckOptions { alpha_reference: lq_alpha_bound(spec, args.envelope_c)?, abs_tol: 1e-8 };
    let report = check_alpha_potential(spec, PhiEstimator::Lq(spec), &base, &devs, &noise, opts)?;
    out.json("check_potential.json", &report)?;
    let mut w = out.csv_writer("check_potential.csv")?;
    for t in &report.trials {
        w.serialize(TrialRow {
            player: t.player + 1,
            kind: t.kind.name(),
            param: t.param,
            clipped: t.clipped,
            d_v: t.d_v.value,
            d_v_se: t.d_v.std_error,
            d_phi: t.d_phi.value,
            d_phi_se: t.d_phi.std_error,
            gap: t.gap,
            gap_se: t.gap_std_error,
        })?;
    }
    w.flush()?;
    let summary = json!({ "verdict": report.verdict, "max_gap": report.max_gap, "alpha_reference": report.alpha_reference });
    Ok((status(report.verdict), summary))
}

#[derive(Serialize)]
struct SweepRow {
    #[serde(rename = "N")]
    n: usize,
    regime: String,
    asymmetry_index: f64,
    bound: f64,
    measured_gap: f64,
    gap_sigma: f64,
}

/// Horizon and volatility taken from `--config` when given.
fn sweep_setting(args: &Args) -> Result<(f64, f64, Vec<u8>)> {
    match &args.config {
        None => Ok((1.0, 0.0, Vec::new())),
        Some(p) => {
            let bytes = read_config(p)?;
            let text = String::from_utf8(bytes.clone()).map_err(|_| ConfigError(format!("{} is not UTF-8", p.display())))?;
            let spec: LqGameSpec = spec_from_config(&parse_config_file(&text)?)?;
            Ok((spec.horizon, spec.sigma(0, 0.0), bytes))
        }
    }
}

/// Largest `|ΔV_i − ΔΦ|` over bumps and random paths of every player, from the common control 0.5.
fn sweep_gap(spec: &LqGameSpec, args: &Args, steps: usize) -> Result<(f64, f64)> {
    let n = spec.n_players;
    let t = spec.horizon;
    let paths = if spec.sigma_fn.iter().all(|c| c.is_identically_zero()) { 1 } else { args.paths };
    let noise = NoiseBatch::new(args.seed, paths, TimeGrid::uniform(t, steps)?, n, r_mode(args))?;
    let base = StrategyProfile::from_fn(&noise.grid, n, |_, _| 0.5);
    let mut devs = Vec::new();
    for p in 0..n {
        devs.push(time_bump(&base, p, 1.0, 0.0, t, spec.control_bound)?);
        devs.push(time_bump(&base, p, -1.0, 0.5 * t, t, spec.control_bound)?);
        devs.extend(sample_deviations(&base, p, DeviationKind::RandomPath, 2, args.seed, spec.control_bound)?);
    }
    let opts = AlphaCheckOptions { alpha_reference: 0.0, abs_tol: 0.0 };
    let rep = check_alpha_potential(spec, PhiEstimator::Lq(spec), &base, &devs, &noise, opts)?;
    Ok((rep.max_gap, rep.max_gap_std_error))
}

fn regime_sweep(args: &Args) -> Result<(Status, Value)> {
    let ns = args.n_list.clone();
    if ns.is_empty() || ns.contains(&0) {
        bail!(ConfigError("--n-list needs positive player counts".into()));
    }
    Regime::default_for(&args.regime, 1).map_err(|e| ConfigError(e.to_string()))?;
    let (horizon, sigma, cfg_bytes) = sweep_setting(args)?;
    let steps = args.steps.unwrap_or_else(|| default_steps(horizon));
    let plan = json!({
        "regime": args.regime, "n_list": ns, "envelope_c": args.envelope_c,
        "horizon": horizon, "sigma": sigma, "config_bytes": cfg_bytes.len(),
    });
    let mut hashed = serde_json::to_vec(&plan)?;
    hashed.extend_from_slice(&cfg_bytes);
    let grid = json!({ "n_steps": steps, "horizon": horizon, "paths": args.paths, "r_nodes": args.r_nodes });
    let mut out = OutDir::create(&args.out, Provenance::new("regime-sweep", &hashed, args.seed, grid))?;

    let rows = ns
        .par_iter()
        .map(|&n| -> Result<SweepRow> {
            let regime = Regime::default_for(&args.regime, n)?;
            let q = make_regime_weights::<f64>(&regime, n)?;
            let spec = LqGameSpec::with_constants(horizon, q, vec![1.0; n], vec![0.0; n], 0.0, sigma, vec![0.0; n])?;
            let (gap, gap_sigma) = sweep_gap(&spec, args, steps)?;
            Ok(SweepRow {
                n,
                regime: regime.name().to_string(),
                asymmetry_index: asymmetry_index(&spec.q)?,
                bound: lq_alpha_bound(&spec, args.envelope_c)?,
                measured_gap: gap,
                gap_sigma,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = out.csv_writer("sweep.csv")?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let nf: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let fit = |vals: Vec<f64>| match regime_decay_fit(&nf, &vals) {
        Ok(f) => json!(f),
        Err(e) => json!({ "unavailable": e.to_string() }),
    };
    let res = json!({
        "plan": plan,
        "bound_fit": fit(rows.iter().map(|r| r.bound).collect()),
        "measured_gap_fit": fit(rows.iter().map(|r| r.measured_gap).collect()),
    });
    out.json("sweep_fit.json", &res)?;
    out.finish()?;
    Ok((Status::Ok, res))
}

pub fn check_out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("output directory {} is not writable", path.display()))
}
