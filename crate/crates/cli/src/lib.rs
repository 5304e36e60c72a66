//! Subcommands of the `rfreg` binary.

pub mod args;

use std::fs;
use std::path::{Path, PathBuf};

use args::{Choice, Cli, Command, EstimatorArg, FitArgs, GenerateArgs, InfluenceArgs, ModeArg, SelectArgs, SimulateArgs, StudyArgs};
use rfreg::config::FitConfig;
use rfreg::flm::{classical_fpcr_fit, rfpcpr_fit, rfpcr_fit, CoefficientEstimate, Estimator, LambdaChoice};
use rfreg::influence::{if_surface, linspace, IfSetting};
use rfreg::io::{align_responses, fmt_f64, parse_curves, parse_responses, write_curves, write_responses, CurveTable, GridMap};
use rfreg::rho::LossFunction;
use rfreg::select::{fpcr_by_variance, select_and_fit, SelectMode, SelectionReport};
use rfreg::simlab::{replicate_data, run_study, SimConfig, SimResult};
use serde::Serialize;
use serde_json::json;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// One-line JSON diagnostic.
    pub fn diagnostic(&self) -> String {
        let (kind, msg) = match self {
            CliError::Input(m) => ("input", m),
            CliError::Numerical(m) => ("numerical", m),
        };
        json!({ "error": kind, "message": msg }).to_string()
    }
}

impl From<rfreg::Error> for CliError {
    fn from(e: rfreg::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn input_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| input_err(path, e))
}

fn out_dir(dir: &Path) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| input_err(dir, e))?;
    Ok(dir.to_path_buf())
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| input_err(&path, e))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    s.push('\n');
    write(dir, name, &s)
}

fn tool() -> serde_json::Value {
    json!({ "name": "rfreg", "version": VERSION })
}

/// Reads and aligns the curve table and the responses.
pub fn ingest(curves: &Path, responses: &Path) -> CliResult<(CurveTable, Vec<f64>)> {
    let table = parse_curves(&read(curves)?).map_err(|e| input_err(curves, e))?;
    let pairs = parse_responses(&read(responses)?).map_err(|e| input_err(responses, e))?;
    let y = align_responses(&table.ids, &pairs).map_err(|e| input_err(responses, e))?;
    Ok((table, y))
}

fn choice_json<T: Serialize>(c: Choice<T>) -> serde_json::Value {
    match c {
        Choice::Auto => json!("auto"),
        Choice::Fixed(v) => json!(v),
    }
}

fn coefficients_csv(table: &CurveTable, est: &CoefficientEstimate) -> String {
    // β on the declared axis: ∫ X β dt picks up the Jacobian of the map.
    let GridMap { scale, .. } = table.map;
    let mut s = String::from("t,beta_hat\n");
    for (t, b) in table.declared.iter().zip(est.beta_fn.values()) {
        s.push_str(&format!("{},{}\n", fmt_f64(*t), fmt_f64(b / scale)));
    }
    s
}

fn fit_estimate(a: &FitArgs, table: &CurveTable, y: &[f64], cfg: &FitConfig) -> CliResult<(CoefficientEstimate, Option<SelectionReport>)> {
    let sample = &table.sample;
    let lambda = match a.lambda {
        Choice::Auto => LambdaChoice::Auto,
        Choice::Fixed(l) => LambdaChoice::Fixed(l),
    };
    match (a.estimator, a.k) {
        (EstimatorArg::Fpcr, Choice::Auto) => Ok((fpcr_by_variance(sample, y, a.fpcr_variance, sample.n())?, None)),
        (EstimatorArg::Fpcr, Choice::Fixed(k)) => Ok((classical_fpcr_fit(sample, y, k)?, None)),
        (EstimatorArg::Rfpcr, Choice::Fixed(k)) => Ok((rfpcr_fit(sample, y, k, cfg)?, None)),
        (EstimatorArg::Rfpcpr, Choice::Fixed(k)) => Ok((rfpcpr_fit(sample, y, k, lambda, cfg)?, None)),
        (EstimatorArg::Rfpcr, Choice::Auto) => {
            let (r, est) = select_and_fit(sample, y, a.k_max, SelectMode::Rfpcr, cfg)?;
            Ok((est, Some(r)))
        }
        (EstimatorArg::Rfpcpr, Choice::Auto) => {
            if let Choice::Fixed(_) = a.lambda {
                return Err(CliError::Input("a fixed --lambda needs a fixed --k".into()));
            }
            let (r, est) = select_and_fit(sample, y, a.k_max, SelectMode::Rfpcpr, cfg)?;
            Ok((est, Some(r)))
        }
    }
}

pub fn cmd_fit(a: &FitArgs) -> CliResult<()> {
    let cfg = a.tuning.fit_config()?;
    if let Choice::Fixed(0) = a.k {
        return Err(CliError::Input("--k must be positive".into()));
    }
    let (table, y) = ingest(&a.data.curves, &a.data.responses)?;
    let (est, selection) = fit_estimate(a, &table, &y, &cfg)?;
    let dir = out_dir(&a.output.out)?;
    write(&dir, "coefficients.csv", &coefficients_csv(&table, &est))?;
    let doc = json!({
        "tool": tool(),
        "estimator": est.estimator,
        "alpha": est.alpha,
        "k": est.k,
        "lambda": est.lambda,
        "sigma": est.sigma,
        "scores": est.scores,
        "weights": est.fit.weights,
        "convergence": { "converged": est.fit.converged, "iterations": est.fit.iterations },
        "grid_map": table.map,
        "selection": selection,
        "config": {
            "curves": a.data.curves,
            "responses": a.data.responses,
            "estimator": Estimator::from(a.estimator),
            "k": choice_json(a.k),
            "lambda": choice_json(a.lambda),
            "k_max": a.k_max,
            "fpcr_variance": a.fpcr_variance,
            "seed": a.tuning.seed,
            "fit": cfg,
        },
    });
    write_json(&dir, "fit.json", &doc)
}

pub fn selection_csv(r: &SelectionReport) -> String {
    let mut s = String::from("K,tau2,lambda\n");
    for ((k, t), l) in r.k_candidates.iter().zip(&r.tau2_by_k).zip(&r.lambda_by_k) {
        s.push_str(&format!("{k},{},{}\n", fmt_f64(*t), fmt_f64(*l)));
    }
    s
}

pub fn cmd_select(a: &SelectArgs) -> CliResult<()> {
    let cfg = a.tuning.fit_config()?;
    let (table, y) = ingest(&a.data.curves, &a.data.responses)?;
    let mode = match a.mode {
        ModeArg::Rfpcr => SelectMode::Rfpcr,
        ModeArg::Rfpcpr => SelectMode::Rfpcpr,
    };
    let (report, _) = select_and_fit(&table.sample, &y, a.k_max, mode, &cfg)?;
    let dir = out_dir(&a.output.out)?;
    write(&dir, "selection.csv", &selection_csv(&report))
}

fn study_config(s: &StudyArgs) -> SimConfig {
    SimConfig {
        model: s.model.into(),
        n: s.n,
        p: s.p,
        nsr: s.nsr,
        nsr_mode: s.nsr_mode.into(),
        eps: s.eps,
        gamma: s.gamma,
        rho_corr: s.rho,
        lag_unit: s.lag_unit.into(),
        ..SimConfig::default()
    }
}

pub fn sim_config(a: &SimulateArgs) -> CliResult<SimConfig> {
    let mut estimators: Vec<Estimator> = Vec::new();
    for e in &a.estimators {
        let e = Estimator::from(*e);
        if !estimators.contains(&e) {
            estimators.push(e);
        }
    }
    let cfg = SimConfig {
        replications: a.replications,
        seed: a.tuning.seed,
        estimators,
        k_max: a.k_max,
        fpcr_variance: a.fpcr_variance,
        fit: a.tuning.fit_config()?,
        ..study_config(&a.study)
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn simresult_csv(r: &SimResult) -> String {
    let mut rows: Vec<(usize, usize, String)> = Vec::new();
    for (ei, s) in r.estimators.iter().enumerate() {
        let name = s.estimator.name();
        for o in &s.outcomes {
            rows.push((
                o.replication,
                ei,
                format!(
                    "{},{name},ok,{},{},{},{}",
                    o.replication,
                    fmt_f64(o.pred_err),
                    fmt_f64(o.est_err),
                    o.k,
                    fmt_f64(o.lambda)
                ),
            ));
        }
        for (rep, _) in &s.failures {
            rows.push((*rep, ei, format!("{rep},{name},failed,,,,")));
        }
    }
    rows.sort_by_key(|r| (r.0, r.1));
    let mut s = String::from("replication,estimator,status,pred_err,est_err,k,lambda\n");
    for (_, _, line) in rows {
        s.push_str(&line);
        s.push('\n');
    }
    s
}

pub fn simresult_json(r: &SimResult) -> serde_json::Value {
    let summaries: Vec<serde_json::Value> = r
        .estimators
        .iter()
        .map(|s| {
            json!({
                "estimator": s.estimator,
                "completed": s.outcomes.len(),
                "pred_mean": s.pred_mean,
                "pred_median": s.pred_median,
                "est_mean": s.est_mean,
                "est_median": s.est_median,
                "failures": s.failures.iter().map(|(rep, m)| json!({ "replication": rep, "message": m })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "tool": tool(), "config": r.config, "summaries": summaries })
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let cfg = sim_config(a)?;
    let result = run_study(&cfg)?;
    let dir = out_dir(&a.output.out)?;
    write(&dir, "simresult.csv", &simresult_csv(&result))?;
    write_json(&dir, "simresult.json", &simresult_json(&result))
}

pub fn influence_setting(a: &InfluenceArgs) -> CliResult<IfSetting> {
    let loss = LossFunction::new(rfreg::rho::Family::TukeyBisquare, a.c1)?;
    if !(a.qn_d.is_finite() && a.qn_d > 0.0) {
        return Err(CliError::Input(format!("--qn-d must be positive, got {}", a.qn_d)));
    }
    let mut s = IfSetting::two_component_example(a.grid_points)?;
    s.loss = loss;
    s.qn_d = a.qn_d;
    Ok(s)
}

pub fn cmd_influence(a: &InfluenceArgs) -> CliResult<()> {
    if a.steps < 2 {
        return Err(CliError::Input("--steps must be at least 2".into()));
    }
    for (name, v) in [("--score-range", a.score_range), ("--y-range", a.y_range)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::Input(format!("{name} must be positive, got {v}")));
        }
    }
    let setting = influence_setting(a)?;
    let free = linspace(-a.score_range, a.score_range, a.steps);
    let ys = linspace(-a.y_range, a.y_range, a.steps);
    let rows = if_surface(&setting, a.fixed, &free, &ys)?;
    let mut s = String::from("free_score,y,norm_robust,norm_classical\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(r.free_score),
            fmt_f64(r.y),
            fmt_f64(r.norm_robust),
            fmt_f64(r.norm_classical)
        ));
    }
    let dir = out_dir(&a.output.out)?;
    write(&dir, "if_surface.csv", &s)
}

pub fn cmd_generate(a: &GenerateArgs) -> CliResult<()> {
    let cfg = SimConfig {
        seed: a.seed,
        replications: 1,
        ..study_config(&a.study)
    };
    cfg.validate()?;
    let data = replicate_data(&cfg, 0)?;
    let ids: Vec<String> = (1..=data.sample.n()).map(|i| format!("c{i}")).collect();
    let declared = data.sample.grid().points().to_vec();
    let dir = out_dir(&a.output.out)?;
    write(&dir, "curves.csv", &write_curves(&ids, &declared, &data.sample))?;
    write(&dir, "responses.csv", &write_responses(&ids, &data.y))
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Select(a) => cmd_select(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Influence(a) => cmd_influence(a),
        Command::Generate(a) => cmd_generate(a),
    }
}
