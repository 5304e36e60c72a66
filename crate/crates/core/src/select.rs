//! Choice of the number of components K and the smoothing parameter λ.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{FitConfig, RemlWeighting};
use crate::error::{Error, Result};
use crate::flm::{
    classical_basis, fpcr_from_basis, rfpcpr_from_basis, rfpcr_from_basis, robust_basis, Basis,
    CoefficientEstimate, LambdaChoice, PenaltyMatrix,
};
use crate::funcspace::FunctionalSample;
use crate::mmreg::{hat_diagonals, hat_diagonals_penalized, RegressionFit};
use crate::scales::tau_scale_squared;

/// Leverages at or above 1 − this are rejected.
pub const LEVERAGE_GUARD: f64 = 1e-8;

/// û_{−i} = û_i / (1 − h_ii).
pub fn loo_from_hat(residuals: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    residuals
        .iter()
        .zip(h)
        .enumerate()
        .map(|(i, (r, hi))| {
            if *hi >= 1.0 - LEVERAGE_GUARD {
                Err(Error::DegenerateLeverage { row: i, h: *hi })
            } else {
                Ok(r / (1.0 - hi))
            }
        })
        .collect()
}

/// Approximate leave-one-out residuals of a weighted fit.
pub fn loo_residuals(fit: &RegressionFit, design: &DMatrix<f64>) -> Result<Vec<f64>> {
    let h = hat_diagonals(design, &fit.weights)?;
    loo_from_hat(&fit.residuals, &h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectMode {
    Rfpcr,
    Rfpcpr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub k_candidates: Vec<usize>,
    pub tau2_by_k: Vec<f64>,
    pub lambda_by_k: Vec<f64>,
    pub chosen_k: usize,
    pub chosen_lambda: f64,
    /// Candidates that could not be fitted, with the reason.
    pub failures: Vec<(usize, String)>,
}

fn loo_tau2(basis: &Basis, y: &[f64], est: &CoefficientEstimate, cfg: &FitConfig) -> Result<f64> {
    let k = est.k;
    let loo = if est.lambda == 0.0 {
        loo_residuals(&est.fit, &basis.design(k))?
    } else {
        let x = basis.design(k);
        let beta = {
            let mut v = vec![est.beta0];
            v.extend_from_slice(&est.scores);
            DVector::from_vec(v)
        };
        let fitted = &x * &beta;
        let r: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
        let a = crate::flm::penalty_matrix(&est.eigensystem).a;
        let mut p = DMatrix::zeros(k + 1, k + 1);
        p.view_mut((1, 1), (k, k)).copy_from(&(a * est.lambda));
        let h = hat_diagonals_penalized(&x, &est.fit.weights, &p)?;
        loo_from_hat(&r, &h)?
    };
    tau_scale_squared(&loo, &cfg.tau())
}

/// Fits every K in 1..=k_max on a shared basis and keeps the one whose
/// leave-one-out residuals have the smallest squared τ-scale.
pub fn select_from_basis(
    basis: &Basis,
    y: &[f64],
    k_max: usize,
    mode: SelectMode,
    cfg: &FitConfig,
) -> Result<(SelectionReport, CoefficientEstimate)> {
    let k_max = k_max.min(basis.k_max());
    let outcomes: Vec<(usize, Result<(f64, CoefficientEstimate)>)> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let r = (|| {
                let est = match mode {
                    SelectMode::Rfpcr => rfpcr_from_basis(basis, y, k, cfg)?,
                    SelectMode::Rfpcpr => rfpcpr_from_basis(basis, y, k, LambdaChoice::Auto, cfg)?,
                };
                let t = loo_tau2(basis, y, &est, cfg)?;
                if !t.is_finite() {
                    return Err(Error::SelectionFailed);
                }
                Ok((t, est))
            })();
            (k, r)
        })
        .collect();
    let mut report = SelectionReport {
        k_candidates: vec![],
        tau2_by_k: vec![],
        lambda_by_k: vec![],
        chosen_k: 0,
        chosen_lambda: 0.0,
        failures: vec![],
    };
    let mut fits = Vec::new();
    for (k, r) in outcomes {
        match r {
            Ok((t, est)) => {
                report.k_candidates.push(k);
                report.tau2_by_k.push(t);
                report.lambda_by_k.push(est.lambda);
                fits.push(est);
            }
            Err(e) => report.failures.push((k, e.to_string())),
        }
    }
    let min = report
        .tau2_by_k
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let pos = report
        .tau2_by_k
        .iter()
        .position(|&t| t <= min + 1e-12)
        .ok_or(Error::SelectionFailed)?;
    report.chosen_k = report.k_candidates[pos];
    report.chosen_lambda = report.lambda_by_k[pos];
    Ok((report, fits.swap_remove(pos)))
}

pub fn select_k(
    sample: &FunctionalSample,
    y: &[f64],
    k_max: usize,
    mode: SelectMode,
    cfg: &FitConfig,
) -> Result<SelectionReport> {
    Ok(select_and_fit(sample, y, k_max, mode, cfg)?.0)
}

pub fn select_and_fit(
    sample: &FunctionalSample,
    y: &[f64],
    k_max: usize,
    mode: SelectMode,
    cfg: &FitConfig,
) -> Result<(SelectionReport, CoefficientEstimate)> {
    let n = sample.n();
    if k_max == 0 || k_max + 4 > n {
        return Err(Error::invalid(format!(
            "k_max must lie in 1..={} for n = {n}, got {k_max}",
            n.saturating_sub(4)
        )));
    }
    if y.len() != n {
        return Err(Error::invalid(format!("{n} curves but {} responses", y.len())));
    }
    let basis = robust_basis(sample, k_max, cfg)?;
    select_from_basis(&basis, y, k_max, mode, cfg)
}

/// Smallest K whose leading components explain at least `fraction` of the
/// total sample variance.
pub fn classical_k_by_variance(basis_dispersions: &[f64], total_variance: f64, fraction: f64) -> usize {
    let mut acc = 0.0;
    for (j, d) in basis_dispersions.iter().enumerate() {
        acc += d;
        if acc >= fraction * total_variance {
            return j + 1;
        }
    }
    basis_dispersions.len().max(1)
}

/// Classical fit with K from the explained-variance rule.
pub fn fpcr_by_variance(
    sample: &FunctionalSample,
    y: &[f64],
    fraction: f64,
    k_cap: usize,
) -> Result<CoefficientEstimate> {
    let n = sample.n();
    let cap = k_cap.min(n.saturating_sub(2)).max(1);
    let full = classical_basis(sample, n.min(sample.p()))?;
    let total: f64 = full.eigensystem.dispersions.iter().sum();
    let k = classical_k_by_variance(&full.eigensystem.dispersions, total, fraction).min(cap);
    fpcr_from_basis(&full, y, k.min(full.k_max()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemlResult {
    pub lambda: f64,
    /// Set when the penalty matrix is numerically zero and λ is meaningless.
    pub no_penalty: bool,
    /// Restricted log-likelihood at `lambda`, up to a constant.
    pub log_lik: f64,
}

/// Observation weights for the REML criterion.
pub fn reml_weights(fit: &RegressionFit, cfg: &FitConfig) -> Vec<f64> {
    let w0 = cfg.rho1().weight(0.0);
    match cfg.reml.weighting {
        RemlWeighting::MmWeights => fit.weights.clone(),
        RemlWeighting::HardRejection => fit
            .residuals
            .iter()
            .map(|r| {
                if fit.sigma > 0.0 && (r / fit.sigma).abs() <= cfg.c1 {
                    w0
                } else if fit.sigma == 0.0 && *r == 0.0 {
                    w0
                } else {
                    0.0
                }
            })
            .collect(),
        RemlWeighting::Unweighted => vec![w0; fit.residuals.len()],
    }
}

/// Variance-components form of the penalised fit, with every λ-free
/// cross product precomputed.
pub struct RemlProblem {
    s: usize,
    m: usize,
    q: usize,
    gtg: DMatrix<f64>,
    gtc: DMatrix<f64>,
    gty: DVector<f64>,
    ctc: DMatrix<f64>,
    cty: DVector<f64>,
    yty: f64,
}

impl RemlProblem {
    /// None when A has no positive eigenvalue.
    pub fn new(xs: &DMatrix<f64>, y: &[f64], a: &PenaltyMatrix, w: &[f64]) -> Result<Option<RemlProblem>> {
        let k = xs.ncols();
        let eig = a.a.clone().symmetric_eigen();
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) {
            return Ok(None);
        }
        let pos: Vec<usize> = (0..k).filter(|&j| eig.eigenvalues[j] > 1e-10 * max).collect();
        let zero: Vec<usize> = (0..k).filter(|&j| eig.eigenvalues[j] <= 1e-10 * max).collect();
        let s = pos.len();
        let rows: Vec<usize> = (0..xs.nrows()).filter(|&i| w[i] > 0.0).collect();
        let m = rows.len();
        let q = 1 + zero.len();
        if m <= q {
            return Err(Error::InsufficientData { needed: q + 1, got: m });
        }
        let mut g = DMatrix::zeros(m, s);
        let mut c = DMatrix::zeros(m, q);
        let mut yv = DVector::zeros(m);
        for (r, &i) in rows.iter().enumerate() {
            let sw = w[i].sqrt();
            let xi = xs.row(i);
            for (col, &j) in pos.iter().enumerate() {
                let t = eig.eigenvectors.column(j);
                g[(r, col)] = sw * xi.dot(&t.transpose()) / eig.eigenvalues[j].sqrt();
            }
            c[(r, 0)] = sw;
            for (col, &j) in zero.iter().enumerate() {
                let t = eig.eigenvectors.column(j);
                c[(r, col + 1)] = sw * xi.dot(&t.transpose());
            }
            yv[r] = sw * y[i];
        }
        Ok(Some(RemlProblem {
            s,
            m,
            q,
            gtg: g.transpose() * &g,
            gtc: g.transpose() * &c,
            gty: g.transpose() * &yv,
            ctc: c.transpose() * &c,
            cty: c.transpose() * &yv,
            yty: yv.norm_squared(),
        }))
    }

    /// Restricted log-likelihood with σ² profiled out, up to a constant.
    pub fn log_lik(&self, lambda: f64) -> f64 {
        let mut b = self.gtg.clone();
        for j in 0..self.s {
            b[(j, j)] += lambda;
        }
        let Some(chol) = b.cholesky() else {
            return f64::NEG_INFINITY;
        };
        let logdet_b: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let logdet_v = logdet_b - self.s as f64 * lambda.ln();
        let binv_gtc = chol.solve(&self.gtc);
        let binv_gty = chol.solve(&self.gty);
        let cvc = &self.ctc - self.gtc.transpose() * &binv_gtc;
        let cvy = &self.cty - self.gtc.transpose() * &binv_gty;
        let yvy = self.yty - self.gty.dot(&binv_gty);
        let Some(cc) = cvc.cholesky() else {
            return f64::NEG_INFINITY;
        };
        let logdet_c: f64 = cc.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let beta = cc.solve(&cvy);
        let rss = (yvy - beta.dot(&cvy)).max(1e-300);
        let dof = (self.m - self.q) as f64;
        -0.5 * (dof * (rss / dof).ln() + logdet_v + logdet_c)
    }
}

/// λ maximising the weighted restricted likelihood on a log grid, refined
/// by golden-section search.
pub fn reml_lambda(
    xs: &DMatrix<f64>,
    y: &[f64],
    a: &PenaltyMatrix,
    fit: &RegressionFit,
    cfg: &FitConfig,
) -> Result<RemlResult> {
    let w = reml_weights(fit, cfg);
    reml_lambda_weighted(xs, y, a, &w, cfg)
}

pub fn reml_lambda_weighted(
    xs: &DMatrix<f64>,
    y: &[f64],
    a: &PenaltyMatrix,
    w: &[f64],
    cfg: &FitConfig,
) -> Result<RemlResult> {
    let Some(problem) = RemlProblem::new(xs, y, a, w)? else {
        return Ok(RemlResult {
            lambda: 0.0,
            no_penalty: true,
            log_lik: f64::NAN,
        });
    };
    let rc = &cfg.reml;
    let npts = rc.grid_points;
    let step = (rc.log10_max - rc.log10_min) / (npts - 1) as f64;
    let f = |x: f64| problem.log_lik(10f64.powf(x));
    let mut best = (rc.log10_min, f64::NEG_INFINITY);
    let mut best_idx = 0;
    for i in 0..npts {
        let x = rc.log10_min + i as f64 * step;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
            best_idx = i;
        }
    }
    if !best.1.is_finite() {
        return Err(Error::SingularDesign("restricted likelihood undefined on the λ grid".into()));
    }
    let lo = rc.log10_min + best_idx.saturating_sub(1) as f64 * step;
    let hi = rc.log10_min + (best_idx + 1).min(npts - 1) as f64 * step;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a_, mut b_) = (lo, hi);
    let mut x1 = b_ - g * (b_ - a_);
    let mut x2 = a_ + g * (b_ - a_);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b_ - a_ > 1e-6 {
        if f1 >= f2 {
            b_ = x2;
            x2 = x1;
            f2 = f1;
            x1 = b_ - g * (b_ - a_);
            f1 = f(x1);
        } else {
            a_ = x1;
            x1 = x2;
            f1 = f2;
            x2 = a_ + g * (b_ - a_);
            f2 = f(x2);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(RemlResult {
        lambda: 10f64.powf(best.0),
        no_penalty: false,
        log_lik: best.1,
    })
}
