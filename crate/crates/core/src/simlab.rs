//! Monte Carlo study with two curve models, bad leverage contamination and
//! prediction/estimation error criteria.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::FitConfig;
use crate::error::{Error, Result};
use crate::flm::{predict, robust_basis, CoefficientEstimate, Estimator};
use crate::funcspace::{Curve, FunctionalSample, Grid, Quadrature};
use crate::select::{fpcr_by_variance, select_from_basis, SelectMode};

/// Number of Karhunen-Loève terms in the second model.
pub const MODEL2_TERMS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Heteroscedastic sinusoid around μ(t) = sin(6πt)(t+1).
    Sinusoid,
    /// Truncated Wiener-type expansion.
    Wiener,
}

/// How the noise level follows from the noise-to-signal ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NsrMode {
    /// σ = nsr·SD(y₀).
    Sd,
    /// σ² = nsr·Var(y₀).
    Variance,
}

/// Unit of the lag (i − j) in the first model's correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagUnit {
    /// Grid index difference; the lag-one correlation equals `rho_corr`.
    Index,
    /// Difference of the time points t_i − t_j.
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: Model,
    pub n: usize,
    pub p: usize,
    pub nsr: f64,
    pub nsr_mode: NsrMode,
    pub eps: f64,
    pub gamma: f64,
    pub rho_corr: f64,
    pub lag_unit: LagUnit,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// Largest K tried by the robust estimators' selection.
    pub k_max: usize,
    /// Explained-variance fraction fixing K for the classical estimator.
    pub fpcr_variance: f64,
    pub fit: FitConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            model: Model::Sinusoid,
            n: 60,
            p: 100,
            nsr: 0.05,
            nsr_mode: NsrMode::Sd,
            eps: 0.0,
            gamma: 1.7,
            rho_corr: 0.7,
            lag_unit: LagUnit::Index,
            replications: 100,
            seed: 0,
            estimators: vec![Estimator::Rfpcr, Estimator::Rfpcpr, Estimator::Fpcr],
            k_max: 10,
            fpcr_variance: 0.99,
            fit: FitConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 4 {
            return Err(Error::InsufficientResolution { needed: 4, got: self.p });
        }
        if self.n < 6 {
            return Err(Error::InsufficientData { needed: 6, got: self.n });
        }
        if !(self.nsr.is_finite() && self.nsr > 0.0) {
            return Err(Error::invalid("nsr must be positive"));
        }
        if !(0.0..0.5).contains(&self.eps) {
            return Err(Error::invalid("eps must lie in [0, 0.5)"));
        }
        if !self.gamma.is_finite() {
            return Err(Error::invalid("gamma must be finite"));
        }
        if !(self.rho_corr > 0.0 && self.rho_corr < 1.0) {
            return Err(Error::invalid("rho_corr must lie in (0, 1)"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("at least one replication is required"));
        }
        if self.estimators.is_empty() {
            return Err(Error::invalid("no estimators configured"));
        }
        if self.k_max == 0 || self.k_max + 4 > self.n {
            return Err(Error::invalid(format!("k_max must lie in 1..={}", self.n.saturating_sub(4))));
        }
        if !(self.fpcr_variance > 0.0 && self.fpcr_variance <= 1.0) {
            return Err(Error::invalid("fpcr_variance must lie in (0, 1]"));
        }
        self.fit.validate()
    }
}

/// Grid t_j = j/p, j = 1..p, with the Euclidean inner product.
pub fn sim_grid(p: usize) -> Result<Arc<Grid>> {
    Grid::with_rule((1..=p).map(|j| j as f64 / p as f64).collect(), Quadrature::Counting)
}

fn gauss(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gen_model1(n: usize, p: usize, rho_corr: f64, rng: &mut impl Rng) -> Result<(FunctionalSample, Curve)> {
    gen_model1_with_lag(n, p, rho_corr, LagUnit::Index, rng)
}

pub fn gen_model1_with_lag(
    n: usize,
    p: usize,
    rho_corr: f64,
    lag: LagUnit,
    rng: &mut impl Rng,
) -> Result<(FunctionalSample, Curve)> {
    let grid = sim_grid(p)?;
    let a = 1.0 / rho_corr - 1.0;
    let unit = match lag {
        LagUnit::Index => 1.0,
        LagUnit::Time => 1.0 / p as f64,
    };
    let sigma = DMatrix::from_fn(p, p, |i, j| {
        let d = (i as f64 - j as f64) * unit;
        1.0 / (1.0 + a * d * d)
    });
    let chol = match sigma.clone().cholesky() {
        Some(c) => c,
        None => {
            let mut s = sigma;
            for i in 0..p {
                s[(i, i)] += 1e-10;
            }
            s.cholesky().ok_or(Error::Cholesky)?
        }
    };
    let l = chol.l();
    let t = grid.points().to_vec();
    let mu: Vec<f64> = t.iter().map(|&t| (6.0 * PI * t).sin() * (t + 1.0)).collect();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..p).map(|_| gauss(rng)).collect();
        let row = (0..p)
            .map(|j| {
                let u: f64 = (0..=j).map(|k| l[(j, k)] * z[k]).sum();
                mu[j] + 0.9 * u * mu[j].abs().sqrt()
            })
            .collect();
        rows.push(row);
    }
    let beta = Curve::from_fn(grid.clone(), f64::sqrt);
    Ok((FunctionalSample::new(grid, rows)?, beta))
}

pub fn model2_eigenvalue(k: usize) -> f64 {
    let h = k as f64 - 0.5;
    1.0 / (h * h * PI * PI)
}

pub fn model2_eigenfunction(k: usize, t: f64) -> f64 {
    SQRT_2 * ((k as f64 - 0.5) * PI * t).sin()
}

pub fn model2_beta(t: f64) -> f64 {
    (1.5 * t * t + 10.0).ln() + (4.0 * PI * t).cos()
}

pub fn gen_model2(n: usize, p: usize, rng: &mut impl Rng) -> Result<(FunctionalSample, Curve)> {
    let grid = sim_grid(p)?;
    let basis: Vec<Vec<f64>> = (1..=MODEL2_TERMS)
        .map(|k| {
            let s = model2_eigenvalue(k).sqrt();
            grid.points().iter().map(|&t| s * model2_eigenfunction(k, t)).collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = vec![0.0; p];
        for b in &basis {
            let z = gauss(rng);
            for (r, v) in row.iter_mut().zip(b) {
                *r += z * v;
            }
        }
        rows.push(row);
    }
    let beta = Curve::from_fn(grid.clone(), model2_beta);
    Ok((FunctionalSample::new(grid, rows)?, beta))
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Returns (y, y₀) with y₀_i = ⟨X_i, β⟩.
pub fn make_response(
    sample: &FunctionalSample,
    beta: &Curve,
    nsr: f64,
    mode: NsrMode,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let y0 = sample.project(beta)?;
    let sd = sample_sd(&y0);
    if !(sd > 0.0) {
        return Err(Error::DegenerateSignal);
    }
    let sigma = match mode {
        NsrMode::Sd => nsr * sd,
        NsrMode::Variance => nsr.sqrt() * sd,
    };
    let y = y0.iter().map(|v| v + sigma * gauss(rng)).collect();
    Ok((y, y0))
}

/// Number of contaminated rows, ⌊n·eps⌋ with a guard against representation
/// error.
pub fn contaminated_count(n: usize, eps: f64) -> usize {
    ((n as f64 * eps) + 1e-9).floor() as usize
}

/// Doubles the first ⌊n·eps⌋ curves and sets their responses to 2γ·y₀.
pub fn contaminate(
    sample: &FunctionalSample,
    y: &[f64],
    y0: &[f64],
    eps: f64,
    gamma: f64,
) -> (FunctionalSample, Vec<f64>) {
    let m = contaminated_count(sample.n(), eps);
    if m == 0 {
        return (sample.clone(), y.to_vec());
    }
    let xs = sample.map_rows(|i, row| {
        if i < m {
            row.iter().map(|v| 2.0 * v).collect()
        } else {
            row.to_vec()
        }
    });
    let ys = y
        .iter()
        .zip(y0)
        .enumerate()
        .map(|(i, (&yi, &y0i))| if i < m { 2.0 * gamma * y0i } else { yi })
        .collect();
    (xs, ys)
}

/// (prediction error on clean curves, grid-mean squared coefficient error).
pub fn evaluate(
    est: &CoefficientEstimate,
    clean: &FunctionalSample,
    y0: &[f64],
    beta_true: &Curve,
) -> Result<(f64, f64)> {
    if !crate::funcspace::same_grid(est.beta_fn.grid(), beta_true.grid()) {
        return Err(Error::GridMismatch);
    }
    let pred = predict(est, clean)?;
    let mut sq: Vec<f64> = pred.iter().zip(y0).map(|(a, b)| (a - b) * (a - b)).collect();
    let pe = sorted_mean(&mut sq);
    let mut d: Vec<f64> = est
        .beta_fn
        .values()
        .iter()
        .zip(beta_true.values())
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok((pe, sorted_mean(&mut d)))
}

fn sorted_mean(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Curves = 0,
    Noise = 1,
    Fit = 2,
}

fn stream_rng(seed: u64, rep: usize, role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((rep as u64) << 2) | role as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub replication: usize,
    pub pred_err: f64,
    pub est_err: f64,
    pub k: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub outcomes: Vec<RepOutcome>,
    /// Failed replications with the reason.
    pub failures: Vec<(usize, String)>,
    pub pred_mean: f64,
    pub pred_median: f64,
    pub est_mean: f64,
    pub est_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub estimators: Vec<EstimatorSummary>,
}

impl SimResult {
    pub fn summary(&self, e: Estimator) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.estimator == e)
    }
}

pub struct Replicate {
    pub clean: FunctionalSample,
    pub y0: Vec<f64>,
    pub beta: Curve,
    pub sample: FunctionalSample,
    pub y: Vec<f64>,
}

/// Data of one replication, before any fitting.
pub fn replicate_data(cfg: &SimConfig, rep: usize) -> Result<Replicate> {
    let mut rng = stream_rng(cfg.seed, rep, Role::Curves);
    let (clean, beta) = match cfg.model {
        Model::Sinusoid => gen_model1_with_lag(cfg.n, cfg.p, cfg.rho_corr, cfg.lag_unit, &mut rng)?,
        Model::Wiener => gen_model2(cfg.n, cfg.p, &mut rng)?,
    };
    let mut noise = stream_rng(cfg.seed, rep, Role::Noise);
    let (y, y0) = make_response(&clean, &beta, cfg.nsr, cfg.nsr_mode, &mut noise)?;
    let (sample, y) = contaminate(&clean, &y, &y0, cfg.eps, cfg.gamma);
    Ok(Replicate {
        clean,
        y0,
        beta,
        sample,
        y,
    })
}

type Fitted = Vec<(Estimator, std::result::Result<CoefficientEstimate, String>)>;

fn fit_replicate(cfg: &SimConfig, rep: usize, data: &Replicate) -> Fitted {
    let fit_seed = stream_rng(cfg.seed, rep, Role::Fit).gen::<u64>();
    let fc = cfg.fit.with_seed(fit_seed);
    let robust: Vec<Estimator> = cfg
        .estimators
        .iter()
        .copied()
        .filter(|e| *e != Estimator::Fpcr)
        .collect();
    let basis = if robust.is_empty() {
        None
    } else {
        Some(robust_basis(&data.sample, cfg.k_max, &fc))
    };
    cfg.estimators
        .iter()
        .map(|&e| {
            let r = match e {
                Estimator::Fpcr => {
                    fpcr_by_variance(&data.sample, &data.y, cfg.fpcr_variance, data.sample.n()).map_err(|e| e.to_string())
                }
                Estimator::Rfpcr | Estimator::Rfpcpr => {
                    let mode = if e == Estimator::Rfpcr { SelectMode::Rfpcr } else { SelectMode::Rfpcpr };
                    match basis.as_ref().expect("basis built for robust estimators") {
                        Ok(b) => select_from_basis(b, &data.y, cfg.k_max, mode, &fc)
                            .map(|(_, est)| est)
                            .map_err(|e| e.to_string()),
                        Err(err) => Err(err.to_string()),
                    }
                }
            };
            (e, r)
        })
        .collect()
}

type RepResult = (Estimator, std::result::Result<RepOutcome, String>);

/// Runs every replication (in parallel) and aggregates per estimator.
pub fn run_study(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let per_rep: Vec<Result<Vec<RepResult>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let data = replicate_data(cfg, rep)?;
            Ok(fit_replicate(cfg, rep, &data)
                .into_iter()
                .map(|(e, r)| {
                    let out = r.and_then(|est| {
                        let (pred_err, est_err) =
                            evaluate(&est, &data.clean, &data.y0, &data.beta).map_err(|e| e.to_string())?;
                        Ok(RepOutcome {
                            replication: rep,
                            pred_err,
                            est_err,
                            k: est.k,
                            lambda: est.lambda,
                        })
                    });
                    (e, out)
                })
                .collect())
        })
        .collect();
    let mut summaries: Vec<EstimatorSummary> = cfg
        .estimators
        .iter()
        .map(|&e| EstimatorSummary {
            estimator: e,
            outcomes: vec![],
            failures: vec![],
            pred_mean: f64::NAN,
            pred_median: f64::NAN,
            est_mean: f64::NAN,
            est_median: f64::NAN,
        })
        .collect();
    for (rep, r) in per_rep.into_iter().enumerate() {
        for (slot, (_, out)) in summaries.iter_mut().zip(r?) {
            match out {
                Ok(o) => slot.outcomes.push(o),
                Err(e) => slot.failures.push((rep, e)),
            }
        }
    }
    for s in &mut summaries {
        if s.outcomes.is_empty() {
            continue;
        }
        let mut pe: Vec<f64> = s.outcomes.iter().map(|o| o.pred_err).collect();
        let mut ee: Vec<f64> = s.outcomes.iter().map(|o| o.est_err).collect();
        s.pred_mean = sorted_mean(&mut pe);
        s.pred_median = median(&mut pe);
        s.est_mean = sorted_mean(&mut ee);
        s.est_median = median(&mut ee);
    }
    Ok(SimResult {
        config: cfg.clone(),
        estimators: summaries,
    })
}
