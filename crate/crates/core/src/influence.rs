//! Influence functions of the robust and classical FPC regression estimators
//! in a finite-dimensional Gaussian setting.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{C1, QN_D};
use crate::error::{Error, Result};
use crate::funcspace::{Curve, Grid};
use crate::quadrature::{normal_cdf, normal_expectation, normal_pdf};
use crate::rho::LossFunction;

/// Step of the central differences used for IF′.
const DIFF_STEP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct IfSetting {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal in the grid inner product.
    pub eigenfunctions: Vec<Curve>,
    pub beta_scores: Vec<f64>,
    pub beta0: f64,
    pub sigma: f64,
    pub loss: LossFunction,
    pub qn_d: f64,
}

impl IfSetting {
    /// Orthonormalizes `eigenfunctions` (Gram-Schmidt, in order) so that
    /// discretization does not leak between components.
    pub fn new(
        eigenvalues: Vec<f64>,
        eigenfunctions: Vec<Curve>,
        beta_scores: Vec<f64>,
        beta0: f64,
        sigma: f64,
        loss: LossFunction,
    ) -> Result<IfSetting> {
        let k = eigenvalues.len();
        if k == 0 || eigenfunctions.len() != k || beta_scores.len() != k {
            return Err(Error::invalid("eigenvalues, eigenfunctions and beta scores must have one common nonzero length"));
        }
        if eigenvalues.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::invalid("eigenvalues must be positive"));
        }
        for i in 0..k {
            for j in i + 1..k {
                if eigenvalues[i] == eigenvalues[j] {
                    return Err(Error::invalid("eigenvalues must be distinct"));
                }
            }
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        let grid = eigenfunctions[0].grid().clone();
        let mut basis: Vec<Curve> = Vec::with_capacity(k);
        for f in eigenfunctions {
            let mut v = f.values().to_vec();
            for b in &basis {
                let c = grid.dot(&v, b.values());
                for (a, x) in v.iter_mut().zip(b.values()) {
                    *a -= c * x;
                }
            }
            let nv = grid.norm_of(&v);
            if nv <= 1e-12 {
                return Err(Error::invalid("eigenfunctions are linearly dependent"));
            }
            v.iter_mut().for_each(|a| *a /= nv);
            basis.push(Curve::new(grid.clone(), v)?);
        }
        Ok(IfSetting {
            eigenvalues,
            eigenfunctions: basis,
            beta_scores,
            beta0,
            sigma,
            loss,
            qn_d: QN_D,
        })
    }

    /// Two components of the Wiener-type example: λ_i = ((i−½)π)⁻²,
    /// v_i = √2 sin((i−½)πt), β₁ = (1, 1), β₀ = 0, σ = 1.
    pub fn two_component_example(grid_points: usize) -> Result<IfSetting> {
        let grid = Grid::uniform(grid_points)?;
        let lambda = |i: f64| 1.0 / ((i - 0.5) * (i - 0.5) * PI * PI);
        let v = |i: f64| Curve::from_fn(grid.clone(), move |t| SQRT_2 * ((i - 0.5) * PI * t).sin());
        IfSetting::new(
            vec![lambda(1.0), lambda(2.0)],
            vec![v(1.0), v(2.0)],
            vec![1.0, 1.0],
            0.0,
            1.0,
            LossFunction::tukey(C1),
        )
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.eigenfunctions[0].grid()
    }

    /// x = Σ s_j v_j.
    pub fn curve_from_scores(&self, scores: &[f64]) -> Curve {
        let mut acc = vec![0.0; self.grid().len()];
        for (v, s) in self.eigenfunctions.iter().zip(scores) {
            for (a, x) in acc.iter_mut().zip(v.values()) {
                *a += s * x;
            }
        }
        Curve::from_parts(self.grid().clone(), acc)
    }

    fn scores(&self, x: &Curve) -> Result<Vec<f64>> {
        self.eigenfunctions
            .iter()
            .map(|v| crate::funcspace::inner_product(x, v))
            .collect()
    }

    fn residual(&self, scores: &[f64], y: f64) -> f64 {
        y - self.beta0 - scores.iter().zip(&self.beta_scores).map(|(s, b)| s * b).sum::<f64>()
    }
}

/// IF of the Qn scale functional at the standard normal.
pub fn if_q_gaussian(x: f64, d: f64) -> f64 {
    let a = 1.0 / d;
    let denom = normal_expectation(|z| normal_pdf(z + a), &[]);
    d * (0.25 - normal_cdf(x + a) + normal_cdf(x - a)) / denom
}

/// IF of the standard deviation at the standard normal.
pub fn if_sd_gaussian(x: f64) -> f64 {
    0.5 * (x * x - 1.0)
}

fn central_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + DIFF_STEP) - f(x - DIFF_STEP)) / (2.0 * DIFF_STEP)
}

/// IF of (β₀, β₁) for an M-regression with fixed scale; `scores` has length K.
pub fn if_mm(scores: &[f64], y: f64, setting: &IfSetting) -> Vec<f64> {
    let loss = setting.loss;
    let d = normal_expectation(|z| loss.psi_prime(z), &kinks_of(&loss));
    regression_if(scores, y, setting, |u| loss.psi(u), d)
}

fn kinks_of(loss: &LossFunction) -> Vec<f64> {
    vec![-loss.c, loss.c]
}

fn regression_if(scores: &[f64], y: f64, setting: &IfSetting, psi: impl Fn(f64) -> f64, d: f64) -> Vec<f64> {
    let r = setting.residual(scores, y);
    let f = setting.sigma / d * psi(r / setting.sigma);
    let mut out = Vec::with_capacity(scores.len() + 1);
    out.push(f);
    for (s, l) in scores.iter().zip(&setting.eigenvalues) {
        out.push(f * s / l);
    }
    out
}

fn eigen_if_from_scores(scores: &[f64], k: usize, setting: &IfSetting, scale_if: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let lam = &setting.eigenvalues;
    let kk = k - 1;
    let mut coef = vec![0.0; setting.k()];
    for j in 0..setting.k() {
        if j < kk {
            let sj = lam[j].sqrt();
            coef[j] = sj / (lam[kk] - lam[j]) * central_diff(scale_if, scores[j] / sj) * scores[kk];
        } else if j > kk {
            let sk = lam[kk].sqrt();
            coef[j] = sk / (lam[kk] - lam[j]) * central_diff(scale_if, scores[kk] / sk) * scores[j];
        }
    }
    coef
}

/// IF of the k-th (1-based) projection-pursuit eigenfunction.
pub fn if_pp_eigenfunction(x: &Curve, k: usize, setting: &IfSetting) -> Result<Curve> {
    if k == 0 || k > setting.k() {
        return Err(Error::OutOfRange { index: k, len: setting.k() });
    }
    let scores = setting.scores(x)?;
    let d = setting.qn_d;
    let coef = eigen_if_from_scores(&scores, k, setting, &|u| if_q_gaussian(u, d));
    Ok(setting.curve_from_scores(&coef))
}

fn composite_norm(scores: &[f64], y: f64, setting: &IfSetting, robust: bool) -> f64 {
    let (reg, scale_if): (Vec<f64>, Box<dyn Fn(f64) -> f64>) = if robust {
        let d = setting.qn_d;
        (if_mm(scores, y, setting), Box::new(move |u| if_q_gaussian(u, d)))
    } else {
        (regression_if(scores, y, setting, |u| u, 1.0), Box::new(if_sd_gaussian))
    };
    let mut coef: Vec<f64> = reg[1..].to_vec();
    for (k, b) in (1..=setting.k()).zip(&setting.beta_scores) {
        let e = eigen_if_from_scores(scores, k, setting, &scale_if);
        for (c, ej) in coef.iter_mut().zip(e) {
            *c += b * ej;
        }
    }
    // Orthonormal basis: the L² norm is the Euclidean norm of the coefficients.
    coef.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// L² norm of the IF of the robust coefficient function.
pub fn if_rfpcr_norm(x: &Curve, y: f64, setting: &IfSetting) -> Result<f64> {
    Ok(composite_norm(&setting.scores(x)?, y, setting, true))
}

/// Same composite with least squares and the SD functional.
pub fn if_classical_norm(x: &Curve, y: f64, setting: &IfSetting) -> Result<f64> {
    Ok(composite_norm(&setting.scores(x)?, y, setting, false))
}

/// Which score of the two-component example is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedScore {
    X1(f64),
    X2(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub free_score: f64,
    pub y: f64,
    pub norm_robust: f64,
    pub norm_classical: f64,
}

/// Evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Rows ordered by free score, then y, both increasing.
pub fn if_surface(setting: &IfSetting, fixed: FixedScore, free: &[f64], ys: &[f64]) -> Result<Vec<SurfaceRow>> {
    if setting.k() != 2 {
        return Err(Error::invalid("the surface needs a two-component setting"));
    }
    let cells: Vec<(f64, f64)> = free.iter().flat_map(|&s| ys.iter().map(move |&y| (s, y))).collect();
    Ok(cells
        .into_par_iter()
        .map(|(s, y)| {
            let scores = match fixed {
                FixedScore::X1(v) => [v, s],
                FixedScore::X2(v) => [s, v],
            };
            SurfaceRow {
                free_score: s,
                y,
                norm_robust: composite_norm(&scores, y, setting, true),
                norm_classical: composite_norm(&scores, y, setting, false),
            }
        })
        .collect())
}
