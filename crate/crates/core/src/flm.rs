//! Functional linear model estimators built on principal-component scores.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::FitConfig;
use crate::error::{Error, Result};
use crate::floc::functional_m_location;
use crate::funcspace::{center_sample, inner_product, same_grid, second_derivative, Curve, FunctionalSample};
use crate::mmreg::{mm_irwls, s_estimator, weighted_least_squares, RegressionFit};
use crate::ppfpca::{flip_sign, pp_components, score_matrix, EigenSystem, ScaleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Robust principal component regression.
    Rfpcr,
    /// Robust principal component regression with smoothed scores.
    Rfpcpr,
    /// Classical principal component regression.
    Fpcr,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Rfpcr => "rfpcr",
            Estimator::Rfpcpr => "rfpcpr",
            Estimator::Fpcr => "fpcr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaChoice {
    Fixed(f64),
    Auto,
}

#[derive(Debug, Clone)]
pub struct CoefficientEstimate {
    pub estimator: Estimator,
    pub beta_fn: Curve,
    pub alpha: f64,
    /// Intercept of the regression on centred scores.
    pub beta0: f64,
    pub scores: Vec<f64>,
    pub k: usize,
    pub lambda: f64,
    pub eigensystem: EigenSystem,
    pub location: Curve,
    pub sigma: f64,
    pub fit: RegressionFit,
}

#[derive(Debug, Clone)]
pub struct PenaltyMatrix {
    pub a: DMatrix<f64>,
}

/// Location, eigenfunctions and the full score design for a sample. Models
/// with fewer components use a prefix of the columns.
#[derive(Debug, Clone)]
pub struct Basis {
    pub location: Curve,
    pub eigensystem: EigenSystem,
    pub design: DMatrix<f64>,
}

impl Basis {
    pub fn k_max(&self) -> usize {
        self.eigensystem.k()
    }

    /// Ones column plus the first `k` score columns.
    pub fn design(&self, k: usize) -> DMatrix<f64> {
        self.design.columns(0, k + 1).into_owned()
    }

    /// The first `k` score columns, without the intercept.
    pub fn scores(&self, k: usize) -> DMatrix<f64> {
        self.design.columns(1, k).into_owned()
    }
}

/// Robust location, Qn projection-pursuit components and scores. When the
/// sample runs out of rank before `k` components, the extractable ones are
/// kept.
pub fn robust_basis(sample: &FunctionalSample, k: usize, cfg: &FitConfig) -> Result<Basis> {
    if k == 0 {
        return Err(Error::invalid("at least one component is required"));
    }
    let location = functional_m_location(
        sample,
        &cfg.huber(),
        cfg.location_mode,
        cfg.location_tol,
        cfg.location_max_iter,
    )
    .estimate;
    let eigensystem = match pp_components(sample, &location, k, &cfg.pp) {
        Ok(e) => e,
        Err(Error::RankExhausted { partial, .. }) if partial.k() > 0 => *partial,
        Err(e) => return Err(e),
    };
    let design = score_matrix(sample, &location, &eigensystem)?;
    Ok(Basis {
        location,
        eigensystem,
        design,
    })
}

/// Pointwise mean and covariance eigenfunctions.
pub fn classical_basis(sample: &FunctionalSample, k: usize) -> Result<Basis> {
    if k == 0 {
        return Err(Error::invalid("at least one component is required"));
    }
    let location = sample.mean();
    let centered = center_sample(sample, &location)?;
    let (n, p) = (sample.n(), sample.p());
    let sw: Vec<f64> = sample.grid().weights().iter().map(|w| w.sqrt()).collect();
    let z = DMatrix::from_fn(n, p, |i, j| centered.row(i)[j] * sw[j]);
    let svd = z.svd(false, true);
    let vt = svd.v_t.ok_or(Error::SingularDesign("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smax = svd.singular_values[order[0]];
    let rank = order
        .iter()
        .take_while(|&&j| svd.singular_values[j] > 1e-10 * smax && smax > 0.0)
        .count();
    let k = k.min(rank);
    if k == 0 {
        return Err(Error::RankExhausted {
            component: 0,
            partial: Box::new(EigenSystem {
                directions: vec![],
                dispersions: vec![],
                scale_kind: ScaleKind::Sd,
            }),
        });
    }
    let denom = (n.max(2) - 1) as f64;
    let mut directions = Vec::with_capacity(k);
    let mut dispersions = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        let vals: Vec<f64> = (0..p)
            .map(|c| if sw[c] > 0.0 { vt[(j, c)] / sw[c] } else { 0.0 })
            .collect();
        let mut v = Curve::from_parts(sample.grid().clone(), vals);
        if flip_sign(v.values()) {
            v = v.scale(-1.0);
        }
        directions.push(v);
        dispersions.push(svd.singular_values[j].powi(2) / denom);
    }
    let eigensystem = EigenSystem {
        directions,
        dispersions,
        scale_kind: ScaleKind::Sd,
    };
    let design = score_matrix(sample, &location, &eigensystem)?;
    Ok(Basis {
        location,
        eigensystem,
        design,
    })
}

/// S-estimate followed by the MM step.
pub fn robust_regression(design: &DMatrix<f64>, y: &[f64], cfg: &FitConfig) -> Result<RegressionFit> {
    let s = s_estimator(design, y, &cfg.rho0(), cfg.b0, &cfg.s)?;
    Ok(mm_irwls(design, y, &s, &cfg.rho1(), &cfg.mm))
}

fn combine(eig: &EigenSystem, scores: &[f64], grid_of: &Curve) -> Curve {
    let mut acc = vec![0.0; grid_of.len()];
    for (v, s) in eig.directions.iter().zip(scores) {
        for (a, x) in acc.iter_mut().zip(v.values()) {
            *a += s * x;
        }
    }
    Curve::from_parts(grid_of.grid().clone(), acc)
}

/// α̂ = β̂₀ − Σ_j β̂_{1j} ⟨v̂_j, μ̂⟩.
pub fn intercept_alpha(beta0: f64, scores: &[f64], location: &Curve, eig: &EigenSystem) -> Result<f64> {
    let mut a = beta0;
    for (v, s) in eig.directions.iter().zip(scores) {
        a -= s * inner_product(v, location)?;
    }
    Ok(a)
}

fn estimate_from(
    estimator: Estimator,
    basis: &Basis,
    k: usize,
    fit: RegressionFit,
    scores: Vec<f64>,
    lambda: f64,
) -> Result<CoefficientEstimate> {
    let eigensystem = basis.eigensystem.truncate(k);
    let beta_fn = combine(&eigensystem, &scores, &basis.location);
    let alpha = intercept_alpha(fit.beta0, &scores, &basis.location, &eigensystem)?;
    Ok(CoefficientEstimate {
        estimator,
        beta_fn,
        alpha,
        beta0: fit.beta0,
        scores,
        k,
        lambda,
        eigensystem,
        location: basis.location.clone(),
        sigma: fit.sigma,
        fit,
    })
}

fn check_k(basis: &Basis, k: usize) -> Result<()> {
    if k == 0 || k > basis.k_max() {
        return Err(Error::OutOfRange {
            index: k,
            len: basis.k_max(),
        });
    }
    Ok(())
}

pub fn rfpcr_from_basis(basis: &Basis, y: &[f64], k: usize, cfg: &FitConfig) -> Result<CoefficientEstimate> {
    check_k(basis, k)?;
    let fit = robust_regression(&basis.design(k), y, cfg)?;
    let scores = fit.beta1.clone();
    estimate_from(Estimator::Rfpcr, basis, k, fit, scores, 0.0)
}

pub fn rfpcpr_from_basis(
    basis: &Basis,
    y: &[f64],
    k: usize,
    lambda: LambdaChoice,
    cfg: &FitConfig,
) -> Result<CoefficientEstimate> {
    let base = rfpcr_from_basis(basis, y, k, cfg)?;
    smooth_estimate(basis, y, base, lambda, cfg)
}

/// Applies the penalised transform to an RFPCR estimate.
pub fn smooth_estimate(
    basis: &Basis,
    y: &[f64],
    base: CoefficientEstimate,
    lambda: LambdaChoice,
    cfg: &FitConfig,
) -> Result<CoefficientEstimate> {
    let k = base.k;
    let a = penalty_matrix(&base.eigensystem);
    let xs = basis.scores(k);
    let lam = match lambda {
        LambdaChoice::Fixed(l) if l.is_finite() && l >= 0.0 => l,
        LambdaChoice::Fixed(l) => return Err(Error::invalid(format!("lambda must be nonnegative, got {l}"))),
        LambdaChoice::Auto => crate::select::reml_lambda(&xs, y, &a, &base.fit, cfg)?.lambda,
    };
    let scores = penalized_transform(&xs, &base.fit.weights, &base.fit.beta1, &a, lam)?;
    estimate_from(Estimator::Rfpcpr, basis, k, base.fit, scores, lam)
}

pub fn rfpcr_fit(sample: &FunctionalSample, y: &[f64], k: usize, cfg: &FitConfig) -> Result<CoefficientEstimate> {
    check_response(sample, y)?;
    let basis = robust_basis(sample, k, cfg)?;
    rfpcr_from_basis(&basis, y, k.min(basis.k_max()), cfg)
}

pub fn rfpcpr_fit(
    sample: &FunctionalSample,
    y: &[f64],
    k: usize,
    lambda: LambdaChoice,
    cfg: &FitConfig,
) -> Result<CoefficientEstimate> {
    check_response(sample, y)?;
    let basis = robust_basis(sample, k, cfg)?;
    rfpcpr_from_basis(&basis, y, k.min(basis.k_max()), lambda, cfg)
}

pub fn fpcr_from_basis(basis: &Basis, y: &[f64], k: usize) -> Result<CoefficientEstimate> {
    check_k(basis, k)?;
    let x = basis.design(k);
    let beta = weighted_least_squares(&x, y, None)?;
    let fitted = &x * &beta;
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let n = y.len();
    let dof = n.saturating_sub(k + 1).max(1) as f64;
    let sigma = (residuals.iter().map(|r| r * r).sum::<f64>() / dof).sqrt();
    let fit = RegressionFit {
        beta0: beta[0],
        beta1: beta.iter().skip(1).copied().collect(),
        sigma,
        weights: vec![1.0; n],
        residuals,
        converged: true,
        iterations: 1,
    };
    let scores = fit.beta1.clone();
    estimate_from(Estimator::Fpcr, basis, k, fit, scores, 0.0)
}

pub fn classical_fpcr_fit(sample: &FunctionalSample, y: &[f64], k: usize) -> Result<CoefficientEstimate> {
    check_response(sample, y)?;
    if k + 2 > sample.n() {
        return Err(Error::InsufficientData {
            needed: k + 2,
            got: sample.n(),
        });
    }
    let basis = classical_basis(sample, k)?;
    fpcr_from_basis(&basis, y, k.min(basis.k_max()))
}

fn check_response(sample: &FunctionalSample, y: &[f64]) -> Result<()> {
    if y.len() != sample.n() {
        return Err(Error::invalid(format!(
            "{} curves but {} responses",
            sample.n(),
            y.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// A_ij = ∫ v_i″ v_j″, symmetrised.
pub fn penalty_matrix(eig: &EigenSystem) -> PenaltyMatrix {
    let d2: Vec<Curve> = eig.directions.iter().map(second_derivative).collect();
    let k = d2.len();
    let mut a = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = d2[i].grid().dot(d2[i].values(), d2[j].values());
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    PenaltyMatrix { a }
}

/// (X̃ᵀWX̃ + λA)⁻¹ X̃ᵀWX̃ β̂₁.
pub fn penalized_transform(
    xs: &DMatrix<f64>,
    weights: &[f64],
    slopes: &[f64],
    a: &PenaltyMatrix,
    lambda: f64,
) -> Result<Vec<f64>> {
    if lambda == 0.0 {
        return Ok(slopes.to_vec());
    }
    let k = slopes.len();
    let mut m = DMatrix::zeros(k, k);
    for i in 0..xs.nrows() {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        for r in 0..k {
            let v = w * xs[(i, r)];
            for c in 0..k {
                m[(r, c)] += v * xs[(i, c)];
            }
        }
    }
    let rhs = &m * DVector::from_column_slice(slopes);
    let lhs = m + &a.a * lambda;
    let lu = lhs.clone().lu();
    let sol = lu.solve(&rhs).ok_or_else(|| {
        let rank = lhs.rank(1e-12 * lhs.amax());
        Error::SingularDesign(format!("penalised system has rank {rank} < {k}"))
    })?;
    Ok(sol.iter().copied().collect())
}

/// ŷ_i = α̂ + ⟨X_i, β̂⟩.
pub fn predict(est: &CoefficientEstimate, curves: &FunctionalSample) -> Result<Vec<f64>> {
    if !same_grid(curves.grid(), est.beta_fn.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(curves
        .project(&est.beta_fn)?
        .into_iter()
        .map(|v| est.alpha + v)
        .collect())
}

/// ∫ (f″)².
pub fn roughness(f: &Curve) -> f64 {
    let d2 = second_derivative(f);
    d2.grid().dot(d2.values(), d2.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{norm, Grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::{PI, SQRT_2};
    use std::sync::Arc;

    fn sine(k: usize) -> impl Fn(f64) -> f64 {
        move |t| SQRT_2 * ((k as f64 - 0.5) * PI * t).sin()
    }

    /// Finite-dimensional sample on the first `m` sine eigenfunctions.
    fn fd_sample(grid: &Arc<Grid>, n: usize, m: usize, seed: u64) -> FunctionalSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                let z: Vec<f64> = (1..=m)
                    .map(|k| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        g / ((k as f64 - 0.5) * PI)
                    })
                    .collect();
                grid.points()
                    .iter()
                    .map(|&t| z.iter().enumerate().map(|(j, zj)| zj * sine(j + 1)(t)).sum())
                    .collect()
            })
            .collect();
        FunctionalSample::new(grid.clone(), rows).unwrap()
    }

    #[test]
    fn exact_model_in_span_is_recovered() {
        let grid = Grid::uniform(100).unwrap();
        let s = fd_sample(&grid, 200, 3, 1);
        let beta = Curve::from_fn(grid.clone(), |t| 2.0 * sine(1)(t) - sine(2)(t) + 0.5 * sine(3)(t));
        let y = s.project(&beta).unwrap();
        let est = rfpcr_fit(&s, &y, 3, &FitConfig::default()).unwrap();
        let err = norm(&est.beta_fn.sub(&beta).unwrap());
        assert!(err <= 1e-3 * norm(&beta), "{err}");
        let cl = classical_fpcr_fit(&s, &y, 3).unwrap();
        assert!(norm(&cl.beta_fn.sub(&beta).unwrap()) <= 0.05 * norm(&beta));
    }

    #[test]
    fn estimate_lives_in_span() {
        let grid = Grid::uniform(50).unwrap();
        let s = fd_sample(&grid, 60, 6, 2);
        let y: Vec<f64> = s.project(&Curve::from_fn(grid.clone(), |t| t.sqrt())).unwrap();
        let est = rfpcr_fit(&s, &y, 4, &FitConfig::default()).unwrap();
        let recon = combine(&est.eigensystem, &est.scores, &est.location);
        for (a, b) in recon.values().iter().zip(est.beta_fn.values()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(est.scores, est.fit.beta1);
        assert_eq!(est.lambda, 0.0);
    }

    #[test]
    fn coefficient_orthogonal_to_components_is_invisible() {
        let grid = Grid::uniform(100).unwrap();
        let s = fd_sample(&grid, 100, 2, 3);
        // Truth is the fifth sine, absent from the data's span.
        let beta = Curve::from_fn(grid.clone(), sine(5));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = s
            .project(&beta)
            .unwrap()
            .into_iter()
            .map(|v| v + 0.1 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect::<Vec<f64>>();
        let est = rfpcr_fit(&s, &y, 2, &FitConfig::default()).unwrap();
        let ip = inner_product(&est.beta_fn, &beta).unwrap();
        assert!(ip.abs() <= 0.1 * norm(&est.beta_fn) * norm(&beta) + 1e-12);
    }

    #[test]
    fn intercept_examples() {
        let grid = Grid::uniform(20).unwrap();
        let v = Curve::from_fn(grid.clone(), |_| 1.0);
        let eig = EigenSystem {
            directions: vec![v],
            dispersions: vec![1.0],
            scale_kind: ScaleKind::Qn,
        };
        assert_eq!(intercept_alpha(1.5, &[2.0], &Curve::zeros(grid.clone()), &eig).unwrap(), 1.5);
        let loc = Curve::from_fn(grid, |t| t);
        assert_eq!(intercept_alpha(1.5, &[0.0], &loc, &eig).unwrap(), 1.5);
    }

    #[test]
    fn intercept_recovered_with_nonzero_mean() {
        let grid = Grid::uniform(60).unwrap();
        let base = fd_sample(&grid, 300, 3, 5);
        let mu: Vec<f64> = grid.points().iter().map(|&t| 1.0 + (2.0 * PI * t).cos()).collect();
        let s = base.map_rows(|_, r| r.iter().zip(&mu).map(|(a, b)| a + b).collect());
        let beta = Curve::from_fn(grid.clone(), |t| sine(1)(t) + sine(2)(t));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y: Vec<f64> = s
            .project(&beta)
            .unwrap()
            .into_iter()
            .map(|v| 2.0 + v + 0.1 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let est = rfpcr_fit(&s, &y, 3, &FitConfig::default()).unwrap();
        assert!((est.alpha - 2.0).abs() < 0.2, "{}", est.alpha);
    }

    #[test]
    fn penalty_of_line_is_zero() {
        let grid = Grid::uniform(80).unwrap();
        let lin = Curve::from_fn(grid.clone(), |t| 3f64.sqrt() * (2.0 * t - 1.0));
        let eig = EigenSystem {
            directions: vec![lin, Curve::from_fn(grid, sine(2))],
            dispersions: vec![1.0, 0.5],
            scale_kind: ScaleKind::Qn,
        };
        let a = penalty_matrix(&eig).a;
        assert!(a[(0, 0)].abs() <= 1e-8 && a[(0, 1)].abs() <= 1e-8 && a[(1, 0)].abs() <= 1e-8);
    }

    #[test]
    fn penalty_of_sines() {
        let grid = Grid::uniform(400).unwrap();
        let eig = EigenSystem {
            directions: (1..=3).map(|k| Curve::from_fn(grid.clone(), sine(k))).collect(),
            dispersions: vec![3.0, 2.0, 1.0],
            scale_kind: ScaleKind::Qn,
        };
        let a = penalty_matrix(&eig).a;
        for k in 1..=3 {
            let exact = ((k as f64 - 0.5) * PI).powi(4);
            assert!((a[(k - 1, k - 1)] - exact).abs() <= 0.02 * exact, "{k}: {}", a[(k - 1, k - 1)]);
        }
        assert!(a[(0, 1)].abs() <= 0.02 * (a[(0, 0)] * a[(1, 1)]).sqrt());
        assert!((a.clone() - a.transpose()).amax() < 1e-10);
        let eigs = a.symmetric_eigenvalues();
        assert!(eigs.min() >= -1e-8 * eigs.max());
    }

    #[test]
    fn transform_identities() {
        let xs = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, -1.0, 2.0, 0.3, -0.7, 2.0, 1.0]);
        let w = [1.0, 0.5, 2.0, 1.5];
        let slopes = [1.2, -0.4];
        let a = PenaltyMatrix {
            a: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
        };
        assert_eq!(penalized_transform(&xs, &w, &slopes, &a, 0.0).unwrap(), slopes.to_vec());
        let big = penalized_transform(&xs, &w, &slopes, &a, 1e12).unwrap();
        let nb = (big[0] * big[0] + big[1] * big[1]).sqrt();
        assert!(nb <= 1e-6 * (1.2f64.powi(2) + 0.4f64.powi(2)).sqrt());

        // Independent 2×2 evaluation by Cramer's rule.
        let mut m = [[0.0; 2]; 2];
        for i in 0..4 {
            for r in 0..2 {
                for c in 0..2 {
                    m[r][c] += w[i] * xs[(i, r)] * xs[(i, c)];
                }
            }
        }
        let rhs = [
            m[0][0] * slopes[0] + m[0][1] * slopes[1],
            m[1][0] * slopes[0] + m[1][1] * slopes[1],
        ];
        let l = [[m[0][0] + 2.0, m[0][1] + 0.5], [m[1][0] + 0.5, m[1][1] + 1.0]];
        let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
        let x0 = (rhs[0] * l[1][1] - l[0][1] * rhs[1]) / det;
        let x1 = (l[0][0] * rhs[1] - l[1][0] * rhs[0]) / det;
        let got = penalized_transform(&xs, &w, &slopes, &a, 1.0).unwrap();
        assert!((got[0] - x0).abs() < 1e-12 && (got[1] - x1).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_equals_rfpcr() {
        let grid = Grid::uniform(50).unwrap();
        let s = fd_sample(&grid, 60, 5, 7);
        let y: Vec<f64> = s.project(&Curve::from_fn(grid.clone(), |t| t * t)).unwrap();
        let cfg = FitConfig::default();
        let a = rfpcr_fit(&s, &y, 3, &cfg).unwrap();
        let b = rfpcpr_fit(&s, &y, 3, LambdaChoice::Fixed(0.0), &cfg).unwrap();
        for (x, z) in a.beta_fn.values().iter().zip(b.beta_fn.values()) {
            assert!((x - z).abs() <= 1e-10);
        }
        assert_eq!(b.beta0, a.beta0);
    }

    #[test]
    fn classical_scores_match_normal_equations() {
        let grid = Grid::uniform(40).unwrap();
        let s = fd_sample(&grid, 50, 4, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..50).map(|_| StandardNormal.sample(&mut rng)).collect();
        let basis = classical_basis(&s, 3).unwrap();
        let est = fpcr_from_basis(&basis, &y, 3).unwrap();
        let x = basis.design(3);
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * DVector::from_vec(y.clone());
        let direct = xtx.cholesky().unwrap().solve(&xty);
        for j in 0..3 {
            assert!((est.scores[j] - direct[j + 1]).abs() < 1e-8);
        }
        // Training predictions reproduce the fitted values.
        let pred = predict(&est, &s).unwrap();
        for i in 0..50 {
            assert!((pred[i] - (y[i] - est.fit.residuals[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn predict_examples() {
        let grid = Grid::uniform(30).unwrap();
        let v1 = Curve::from_fn(grid.clone(), |_| 1.0);
        let eig = EigenSystem {
            directions: vec![v1.clone()],
            dispersions: vec![1.0],
            scale_kind: ScaleKind::Qn,
        };
        let mk = |alpha: f64, score: f64| CoefficientEstimate {
            estimator: Estimator::Rfpcr,
            beta_fn: v1.scale(score),
            alpha,
            beta0: alpha,
            scores: vec![score],
            k: 1,
            lambda: 0.0,
            eigensystem: eig.clone(),
            location: Curve::zeros(grid.clone()),
            sigma: 1.0,
            fit: RegressionFit {
                beta0: alpha,
                beta1: vec![score],
                sigma: 1.0,
                weights: vec![],
                residuals: vec![],
                converged: true,
                iterations: 0,
            },
        };
        let s = FunctionalSample::from_curves(&[v1.clone(), v1.scale(2.0)]).unwrap();
        assert_eq!(predict(&mk(3.0, 0.0), &s).unwrap(), vec![3.0, 3.0]);
        let p = predict(&mk(0.0, 1.7), &s).unwrap();
        assert!((p[0] - 1.7).abs() < 1e-12);
        let other = FunctionalSample::from_curves(&[Curve::zeros(Grid::uniform(31).unwrap())]).unwrap();
        assert!(matches!(predict(&mk(0.0, 1.0), &other), Err(Error::GridMismatch)));
    }
}
