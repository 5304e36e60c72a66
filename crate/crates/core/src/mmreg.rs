//! S- and MM-regression on a dense design matrix.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rho::LossFunction;
use crate::scales::{m_scale, mean_rho};

/// Relative threshold on the pivoted R diagonal below which a design is
/// declared rank deficient.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub beta0: f64,
    pub beta1: Vec<f64>,
    pub sigma: f64,
    pub weights: Vec<f64>,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl RegressionFit {
    pub fn coefficients(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.beta1.len() + 1);
        v.push(self.beta0);
        v.extend_from_slice(&self.beta1);
        DVector::from_vec(v)
    }

    fn from_parts(
        beta: &DVector<f64>,
        sigma: f64,
        residuals: Vec<f64>,
        loss: &LossFunction,
        converged: bool,
        iterations: usize,
    ) -> RegressionFit {
        let weights = weights_for(&residuals, sigma, loss);
        RegressionFit {
            beta0: beta[0],
            beta1: beta.iter().skip(1).copied().collect(),
            sigma,
            weights,
            residuals,
            converged,
            iterations,
        }
    }
}

fn weights_for(r: &[f64], sigma: f64, loss: &LossFunction) -> Vec<f64> {
    r.iter()
        .map(|&ri| {
            if sigma > 0.0 {
                loss.weight(ri / sigma)
            } else if ri == 0.0 {
                loss.weight(0.0)
            } else {
                loss.weight(f64::INFINITY)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SConfig {
    pub n_subsamples: usize,
    pub n_best: usize,
    /// IRWLS steps applied to every subsample fit before screening.
    pub concentration_steps: usize,
    pub refine_max_iter: usize,
    pub refine_tol: f64,
    pub seed: u64,
}

impl Default for SConfig {
    fn default() -> Self {
        SConfig {
            n_subsamples: 500,
            n_best: 5,
            concentration_steps: 2,
            refine_max_iter: 50,
            refine_tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MmConfig {
    fn default() -> Self {
        MmConfig {
            tol: 1e-9,
            max_iter: 500,
        }
    }
}

/// Least squares min ||√w ⊙ (y − Xβ)|| by column-pivoted QR.
pub fn weighted_least_squares(x: &DMatrix<f64>, y: &[f64], w: Option<&[f64]>) -> Result<DVector<f64>> {
    let (n, m) = x.shape();
    if n < m {
        return Err(Error::SingularDesign(format!("{n} rows for {m} columns")));
    }
    let mut a = x.clone();
    let mut b = DVector::from_column_slice(y);
    if let Some(w) = w {
        for i in 0..n {
            let s = w[i].max(0.0).sqrt();
            a.row_mut(i).scale_mut(s);
            b[i] *= s;
        }
    }
    let qr = a.col_piv_qr();
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    for j in 0..m {
        if !(r[(j, j)].abs() > RANK_TOL * r00) {
            return Err(Error::SingularDesign(format!("numerical rank {j} < {m}")));
        }
    }
    qr.q_tr_mul(&mut b);
    let mut z = b.rows(0, m).into_owned();
    if !r.solve_upper_triangular_mut(&mut z) {
        return Err(Error::SingularDesign("triangular solve failed".into()));
    }
    qr.p().inv_permute_rows(&mut z);
    Ok(z)
}

fn residuals(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> Vec<f64> {
    let fitted = x * beta;
    y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect()
}

/// M-scale that reports an exact fit as σ = 0.
fn scale_or_zero(r: &[f64], loss: &LossFunction, b: f64) -> Result<f64> {
    match m_scale(r, loss, b) {
        Ok(s) => Ok(s.value),
        Err(Error::DegenerateScale) | Err(Error::NoScaleRoot { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

struct Candidate {
    beta: DVector<f64>,
    sigma: f64,
}

/// One IRWLS step with the scale re-solved first. None if the weighted
/// design is singular.
fn concentrate(
    x: &DMatrix<f64>,
    y: &[f64],
    beta: &DVector<f64>,
    loss: &LossFunction,
    b: f64,
) -> Result<Option<(DVector<f64>, f64)>> {
    let r = residuals(x, y, beta);
    let s = scale_or_zero(&r, loss, b)?;
    if s == 0.0 {
        return Ok(Some((beta.clone(), 0.0)));
    }
    let w = weights_for(&r, s, loss);
    match weighted_least_squares(x, y, Some(&w)) {
        Ok(nb) => Ok(Some((nb, s))),
        Err(Error::SingularDesign(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Fast-S regression estimator.
pub fn s_estimator(
    x: &DMatrix<f64>,
    y: &[f64],
    loss: &LossFunction,
    b: f64,
    cfg: &SConfig,
) -> Result<RegressionFit> {
    let (n, m) = x.shape();
    if y.len() != n {
        return Err(Error::invalid(format!("design has {n} rows but response has {}", y.len())));
    }
    if n < m + 2 {
        return Err(Error::InsufficientData { needed: m + 2, got: n });
    }
    let h = m + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Vec<Candidate> = Vec::with_capacity(cfg.n_best + 1);
    let mut accepted = 0usize;
    let mut draws = 0usize;
    let cap = 100 * cfg.n_subsamples.max(1);
    let mut sub_x = DMatrix::zeros(h, m);
    let mut sub_y = vec![0.0; h];
    while accepted < cfg.n_subsamples {
        if draws >= cap {
            return Err(Error::SingularDesign(format!(
                "no nonsingular subsample in {draws} draws"
            )));
        }
        draws += 1;
        let idx = sample_indices(&mut rng, n, h);
        for (r, i) in idx.iter().enumerate() {
            sub_x.row_mut(r).copy_from(&x.row(i));
            sub_y[r] = y[i];
        }
        let Ok(mut beta) = weighted_least_squares(&sub_x, &sub_y, None) else {
            continue;
        };
        accepted += 1;
        let mut sigma = f64::NAN;
        let mut exact = false;
        for _ in 0..cfg.concentration_steps {
            match concentrate(x, y, &beta, loss, b)? {
                Some((_, 0.0)) => {
                    exact = true;
                    break;
                }
                Some((nb, s)) => {
                    beta = nb;
                    sigma = s;
                }
                None => break,
            }
        }
        let r = residuals(x, y, &beta);
        if exact {
            return Ok(RegressionFit::from_parts(&beta, 0.0, r, loss, true, 0));
        }
        // Skip the root-find when the candidate cannot beat the current worst.
        if best.len() == cfg.n_best {
            let worst = best.last().map(|c| c.sigma).unwrap_or(f64::INFINITY);
            if worst > 0.0 && mean_rho(&r, loss, worst) >= b {
                continue;
            }
        }
        let _ = sigma;
        let s = scale_or_zero(&r, loss, b)?;
        if s == 0.0 {
            return Ok(RegressionFit::from_parts(&beta, 0.0, r, loss, true, 0));
        }
        let pos = best.partition_point(|c| c.sigma <= s);
        best.insert(pos, Candidate { beta, sigma: s });
        best.truncate(cfg.n_best);
    }

    let mut winner: Option<(DVector<f64>, f64, usize, bool)> = None;
    for cand in best {
        let mut beta = cand.beta;
        let mut sigma = cand.sigma;
        let mut iters = 0;
        let mut converged = false;
        while iters < cfg.refine_max_iter {
            iters += 1;
            let r = residuals(x, y, &beta);
            let w = weights_for(&r, sigma, loss);
            let nb = match weighted_least_squares(x, y, Some(&w)) {
                Ok(v) => v,
                Err(_) => break,
            };
            let r = residuals(x, y, &nb);
            let ns = sigma * (mean_rho(&r, loss, sigma) / b).sqrt();
            let rel = (ns - sigma).abs() / sigma;
            beta = nb;
            sigma = ns;
            if sigma == 0.0 || rel < cfg.refine_tol {
                converged = true;
                break;
            }
        }
        let r = residuals(x, y, &beta);
        let s = scale_or_zero(&r, loss, b)?;
        if winner.as_ref().is_none_or(|w| s < w.1) {
            winner = Some((beta, s, iters, converged));
        }
    }
    let (beta, sigma, iters, converged) = winner.ok_or(Error::SingularDesign("no candidate fits".into()))?;
    let r = residuals(x, y, &beta);
    Ok(RegressionFit::from_parts(&beta, sigma, r, loss, converged, iters))
}

/// MM-step: IRWLS for the bounded ρ₁ with the scale of `init` held fixed.
pub fn mm_irwls(
    x: &DMatrix<f64>,
    y: &[f64],
    init: &RegressionFit,
    loss: &LossFunction,
    cfg: &MmConfig,
) -> RegressionFit {
    let sigma = init.sigma;
    let init_beta = init.coefficients();
    let fallback = || {
        let r = residuals(x, y, &init_beta);
        RegressionFit::from_parts(&init_beta, sigma, r, loss, false, 0)
    };
    if sigma == 0.0 {
        let r = residuals(x, y, &init_beta);
        return RegressionFit::from_parts(&init_beta, sigma, r, loss, true, 0);
    }
    let mut beta = init_beta.clone();
    let mut r = residuals(x, y, &beta);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let w = weights_for(&r, sigma, loss);
        let nb = match weighted_least_squares(x, y, Some(&w)) {
            Ok(v) => v,
            Err(_) => return fallback(),
        };
        let scale = 1.0 + beta.amax();
        let change = (&nb - &beta).amax();
        if change < cfg.tol * scale {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        beta = nb;
        r = residuals(x, y, &beta);
        iterations += 1;
    }
    RegressionFit::from_parts(&beta, sigma, r, loss, converged, iterations)
}

/// (1/n) Σ ρ₁(r_i/σ) at a fit.
pub fn mm_objective(fit: &RegressionFit, loss: &LossFunction) -> f64 {
    mean_rho(&fit.residuals, loss, fit.sigma)
}

/// Diagonal of X(XᵀWX)⁻¹XᵀW.
pub fn hat_diagonals(x: &DMatrix<f64>, w: &[f64]) -> Result<Vec<f64>> {
    let (n, m) = x.shape();
    let mut a = x.clone();
    for i in 0..n {
        a.row_mut(i).scale_mut(w[i].max(0.0).sqrt());
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    for j in 0..m.min(n) {
        if !(r[(j, j)].abs() > RANK_TOL * r00) {
            return Err(Error::SingularDesign(format!("weighted design has rank {j} < {m}")));
        }
    }
    if n < m {
        return Err(Error::SingularDesign(format!("{n} rows for {m} columns")));
    }
    let q = qr.q();
    Ok((0..n).map(|i| q.row(i).norm_squared()).collect())
}

/// Diagonal of X(XᵀWX + P)⁻¹XᵀW for a positive semidefinite penalty P.
pub fn hat_diagonals_penalized(x: &DMatrix<f64>, w: &[f64], penalty: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (n, m) = x.shape();
    let mut gram = penalty.clone();
    for i in 0..n {
        let xi = x.row(i);
        for a in 0..m {
            let va = w[i] * xi[a];
            for b in 0..m {
                gram[(a, b)] += va * xi[b];
            }
        }
    }
    let chol = gram.cholesky().ok_or(Error::Cholesky)?;
    Ok((0..n)
        .map(|i| {
            let xi = x.row(i).transpose();
            let s = chol.solve(&xi);
            w[i] * xi.dot(&s)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{B0, C0, C1};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn design(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, k + 1, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) })
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn fit_mm(x: &DMatrix<f64>, y: &[f64]) -> RegressionFit {
        let s = s_estimator(x, y, &LossFunction::tukey(C0), B0, &SConfig::default()).unwrap();
        mm_irwls(x, y, &s, &LossFunction::tukey(C1), &MmConfig::default())
    }

    #[test]
    fn wls_matches_normal_equations() {
        let x = design(30, 3, 1);
        let y = noise(30, 2);
        let w: Vec<f64> = (0..30).map(|i| 0.5 + (i % 4) as f64).collect();
        let beta = weighted_least_squares(&x, &y, Some(&w)).unwrap();
        let wm = DMatrix::from_diagonal(&DVector::from_vec(w));
        let lhs = x.transpose() * &wm * &x;
        let rhs = x.transpose() * &wm * DVector::from_vec(y);
        let direct = lhs.lu().solve(&rhs).unwrap();
        assert!((beta - direct).amax() < 1e-10);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let mut x = design(20, 2, 3);
        for i in 0..20 {
            x[(i, 2)] = 2.0 * x[(i, 1)];
        }
        assert!(matches!(weighted_least_squares(&x, &noise(20, 4), None), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn exact_fit_recovered() {
        let x = design(50, 3, 5);
        let bstar = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let y: Vec<f64> = (&x * &bstar).iter().copied().collect();
        let s = s_estimator(&x, &y, &LossFunction::tukey(C0), B0, &SConfig::default()).unwrap();
        assert!((s.coefficients() - &bstar).amax() < 1e-6);
        assert!(s.sigma <= 1e-6);
    }

    #[test]
    fn exact_fit_under_forty_percent_outliers() {
        let x = design(100, 3, 6);
        let bstar = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let mut y: Vec<f64> = (&x * &bstar).iter().copied().collect();
        for v in y.iter_mut().take(40) {
            *v = 1e6;
        }
        let s = s_estimator(&x, &y, &LossFunction::tukey(C0), B0, &SConfig::default()).unwrap();
        assert!((s.coefficients() - &bstar).amax() < 1e-3);
    }

    #[test]
    fn breakdown_at_forty_five_percent() {
        let x = design(60, 4, 7);
        let bstar = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5, 1.5]);
        let mut y: Vec<f64> = (&x * &bstar).iter().copied().collect();
        for v in y.iter_mut().take(27) {
            *v = 1e8;
        }
        let f = fit_mm(&x, &y);
        assert!((f.coefficients() - &bstar).norm() <= 10.0 * bstar.norm());
    }

    #[test]
    fn gaussian_scale_consistency() {
        let x = design(500, 5, 8);
        let e = noise(500, 9);
        let y: Vec<f64> = e.iter().enumerate().map(|(i, v)| x[(i, 1)] + 2.0 * v).collect();
        let s = s_estimator(&x, &y, &LossFunction::tukey(C0), B0, &SConfig::default()).unwrap();
        assert!((s.sigma - 2.0).abs() < 0.2, "{}", s.sigma);
        let r = residuals(&x, &y, &s.coefficients());
        let exact = m_scale(&r, &LossFunction::tukey(C0), B0).unwrap().value;
        assert!((exact - s.sigma).abs() < 1e-8 * exact);
    }

    #[test]
    fn mm_invariants() {
        let x = design(120, 3, 10);
        let mut y: Vec<f64> = noise(120, 11).iter().enumerate().map(|(i, v)| 1.0 + x[(i, 2)] + v).collect();
        for v in y.iter_mut().take(10) {
            *v += 50.0;
        }
        let loss1 = LossFunction::tukey(C1);
        let f = fit_mm(&x, &y);
        assert!(f.converged);
        let n = y.len() as f64;
        for j in 0..4 {
            let g: f64 = (0..120).map(|i| loss1.psi(f.residuals[i] / f.sigma) * x[(i, j)]).sum::<f64>() / n;
            assert!(g.abs() < 1e-6, "{g}");
        }
        for i in 0..120 {
            assert_eq!(f.weights[i], loss1.weight(f.residuals[i] / f.sigma));
            if (f.residuals[i] / f.sigma).abs() > C1 {
                assert_eq!(f.weights[i], 0.0);
            }
        }
        // Restarting at the solution is a no-op.
        let again = mm_irwls(&x, &y, &f, &loss1, &MmConfig::default());
        assert_eq!(again.iterations, 0);
        assert_eq!(again.coefficients(), f.coefficients());
    }

    #[test]
    fn mm_objective_monotone() {
        let x = design(80, 2, 12);
        let y: Vec<f64> = noise(80, 13).iter().enumerate().map(|(i, v)| x[(i, 1)] * 3.0 + v.powi(3)).collect();
        let loss1 = LossFunction::tukey(C1);
        let s = s_estimator(&x, &y, &LossFunction::tukey(C0), B0, &SConfig::default()).unwrap();
        let mut cur = s.clone();
        let mut last = mm_objective(&cur, &loss1);
        for _ in 0..20 {
            cur = mm_irwls(&x, &y, &cur, &loss1, &MmConfig { tol: 0.0, max_iter: 1 });
            let o = mm_objective(&cur, &loss1);
            assert!(o <= last + 1e-12);
            last = o;
        }
    }

    #[test]
    fn mm_matches_least_squares_efficiency() {
        let (n, k) = (500, 5);
        let x = design(n, k, 14);
        let mut se_mm = 0.0;
        let mut se_ls = 0.0;
        for rep in 0..200 {
            let y = noise(n, 1000 + rep);
            let f = fit_mm(&x, &y);
            let ls = weighted_least_squares(&x, &y, None).unwrap();
            se_mm += f.coefficients().norm_squared();
            se_ls += ls.norm_squared();
        }
        assert!(se_mm <= 1.2 * se_ls, "{se_mm} {se_ls}");
    }

    #[test]
    fn hat_examples() {
        let ones = DMatrix::from_element(8, 1, 1.0);
        let h = hat_diagonals(&ones, &[1.0; 8]).unwrap();
        assert!(h.iter().all(|v| (v - 0.125).abs() < 1e-14));

        let x = design(15, 2, 15);
        let h = hat_diagonals(&x, &[1.0; 15]).unwrap();
        let doubled = DMatrix::from_fn(30, 3, |i, j| x[(i % 15, j)]);
        let h2 = hat_diagonals(&doubled, &[1.0; 30]).unwrap();
        for i in 0..30 {
            assert!((h2[i] - 0.5 * h[i % 15]).abs() < 1e-10);
        }
    }

    #[test]
    fn penalized_hat_reduces_to_plain() {
        let x = design(25, 3, 16);
        let w: Vec<f64> = (0..25).map(|i| 0.1 + (i % 3) as f64).collect();
        let a = hat_diagonals(&x, &w).unwrap();
        let b = hat_diagonals_penalized(&x, &w, &DMatrix::zeros(4, 4)).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn hat_trace_is_rank(seed in 0u64..1000, wseed in proptest::collection::vec(0.01f64..5.0, 30)) {
            let x = design(30, 4, seed);
            let h = hat_diagonals(&x, &wseed).unwrap();
            prop_assert!((h.iter().sum::<f64>() - 5.0).abs() < 1e-6);
            prop_assert!(h.iter().all(|v| *v >= 0.0 && *v <= 1.0 + 1e-8));
        }

        #[test]
        fn mm_equivariance(seed in 0u64..500, g in proptest::collection::vec(-3.0f64..3.0, 3), t in 0.1f64..10.0) {
            let x = design(60, 2, seed);
            let y: Vec<f64> = noise(60, seed + 7).iter().enumerate().map(|(i, v)| x[(i, 1)] - x[(i, 2)] + v).collect();
            let base = fit_mm(&x, &y);
            let gv = DVector::from_vec(g);
            let shifted: Vec<f64> = y.iter().zip((&x * &gv).iter()).map(|(a, b)| a + b).collect();
            let fs = fit_mm(&x, &shifted);
            prop_assert!((fs.coefficients() - (base.coefficients() + &gv)).amax() < 1e-6);
            let scaled: Vec<f64> = y.iter().map(|v| t * v).collect();
            let ft = fit_mm(&x, &scaled);
            prop_assert!((ft.coefficients() - base.coefficients() * t).amax() < 1e-6 * t);
            prop_assert!((ft.sigma - t * base.sigma).abs() < 1e-8 * t * base.sigma);
        }
    }
}
