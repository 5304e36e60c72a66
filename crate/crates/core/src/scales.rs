//! Robust dispersion: Qn, M-scales and the squared τ-scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rho::LossFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleResult {
    pub value: f64,
    pub n_used: usize,
}

/// Qn: `d` times the k-th smallest of the n(n−1)/2 absolute pairwise
/// differences, with h = ⌊n/2⌋ + 1 and k = h(h−1)/2.
pub fn qn_scale(x: &[f64], d: f64) -> Result<ScaleResult> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mut diffs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let xi = x[i];
        for &xj in &x[i + 1..] {
            diffs.push((xi - xj).abs());
        }
    }
    let k = qn_rank(n);
    let (_, kth, _) = diffs.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    Ok(ScaleResult {
        value: d * *kth,
        n_used: n,
    })
}

/// One-based rank of the order statistic used by Qn.
pub fn qn_rank(n: usize) -> usize {
    let h = n / 2 + 1;
    h * (h - 1) / 2
}

/// Qn with a reusable scratch buffer, for the hot loop of the
/// projection-pursuit search.
pub(crate) fn qn_with_buffer(x: &[f64], d: f64, buf: &mut Vec<f64>) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    buf.clear();
    for i in 0..n {
        let xi = x[i];
        for &xj in &x[i + 1..] {
            buf.push((xi - xj).abs());
        }
    }
    let k = qn_rank(n);
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    d * *kth
}

pub(crate) fn mean_rho(r: &[f64], loss: &LossFunction, sigma: f64) -> f64 {
    let inv = 1.0 / sigma;
    r.iter().map(|&v| loss.rho(v * inv)).sum::<f64>() / r.len() as f64
}

/// Solves (1/n) Σ ρ(r_i/σ) = b for σ > 0.
pub fn m_scale(r: &[f64], loss: &LossFunction, b: f64) -> Result<ScaleResult> {
    let n = r.len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if let Some(i) = r.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    if !(b > 0.0 && b < loss.sup()) {
        return Err(Error::invalid(format!("M-scale level b = {b} outside (0, sup rho)")));
    }
    let mut min_pos = f64::INFINITY;
    let mut max_abs: f64 = 0.0;
    let mut zeros = 0usize;
    for &v in r {
        let a = v.abs();
        if a == 0.0 {
            zeros += 1;
        } else {
            min_pos = min_pos.min(a);
            max_abs = max_abs.max(a);
        }
    }
    if zeros == n {
        return Err(Error::DegenerateScale);
    }
    // As σ → 0 the mean of ρ tends to (n − zeros)/n · sup ρ.
    if (n - zeros) as f64 / n as f64 * loss.sup() <= b {
        return Err(Error::NoScaleRoot { zeros, n });
    }
    let g = |s: f64| mean_rho(r, loss, s) - b;
    let mut lo = min_pos / 10.0;
    let mut hi = 10.0 * max_abs;
    while g(lo) <= 0.0 {
        lo /= 10.0;
        if lo < f64::MIN_POSITIVE * 1e10 {
            return Err(Error::NoScaleRoot { zeros, n });
        }
    }
    while g(hi) >= 0.0 {
        hi *= 10.0;
        if !hi.is_finite() {
            return Err(Error::NoScaleRoot { zeros, n });
        }
    }
    let (mut a, mut b_) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b_);
        let gm = g(mid.exp());
        if gm > 0.0 {
            a = mid;
        } else if gm < 0.0 {
            b_ = mid;
        } else {
            a = mid;
            b_ = mid;
        }
        if b_ - a < 1e-14 {
            break;
        }
    }
    Ok(ScaleResult {
        value: (0.5 * (a + b_)).exp(),
        n_used: n,
    })
}

/// Parameters of the squared τ-scale: an M-scale s (ρ₀ at level b₀) and a
/// second bounded ρ whose Gaussian mean `b_tau` normalises the result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauScale {
    pub rho0: LossFunction,
    pub b0: f64,
    pub rho_tau: LossFunction,
    pub b_tau: f64,
}

impl TauScale {
    /// Builds the parameter set, computing b_τ = E_Φ ρ_τ(Z).
    pub fn new(rho0: LossFunction, b0: f64, rho_tau: LossFunction) -> TauScale {
        TauScale {
            rho0,
            b0,
            rho_tau,
            b_tau: rho_tau.gaussian_mean_rho(),
        }
    }
}

/// τ² = s² · (1/(n b_τ)) Σ ρ_τ(r_i/s).
pub fn tau_scale_squared(r: &[f64], tau: &TauScale) -> Result<f64> {
    if r.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: r.len(),
        });
    }
    let s = match m_scale(r, &tau.rho0, tau.b0) {
        Ok(s) => s.value,
        Err(Error::DegenerateScale) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    Ok(s * s * mean_rho(r, &tau.rho_tau, s) / tau.b_tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rho::{tune_for_breakdown, LossFunction};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const C0: f64 = 1.5476450;
    const QN_D: f64 = 2.2219;

    fn tau() -> TauScale {
        TauScale::new(LossFunction::tukey(C0), 0.5, LossFunction::tukey(3.1369087))
    }

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn brute_qn(x: &[f64]) -> f64 {
        let mut all = Vec::new();
        for i in 0..x.len() {
            for j in 0..i {
                all.push((x[i] - x[j]).abs());
            }
        }
        all.sort_by(|a, b| a.total_cmp(b));
        all[qn_rank(x.len()) - 1]
    }

    #[test]
    fn qn_small_example() {
        let q = qn_scale(&[1.0, 2.0, 3.0, 4.0, 5.0], 1.0).unwrap();
        assert_eq!(q.value, 1.0);
        assert_eq!(q.n_used, 5);
    }

    #[test]
    fn qn_constant_and_errors() {
        assert_eq!(qn_scale(&[3.3; 7], QN_D).unwrap().value, 0.0);
        assert!(matches!(qn_scale(&[1.0], 1.0), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn qn_gaussian_consistency() {
        let x = normals(5000, 1);
        let q = qn_scale(&x, QN_D).unwrap().value;
        assert!((q - 1.0).abs() < 0.03, "{q}");
    }

    #[test]
    fn m_scale_constant_residuals() {
        let c0 = tune_for_breakdown(0.5).unwrap();
        let loss = LossFunction::tukey(c0);
        // ρ(q) = 0.5 solved independently by bisection in u = q/c.
        let (mut lo, mut hi) = (0.0f64, c0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            let u = m / c0;
            if 1.0 - (1.0 - u * u).powi(3) < 0.5 {
                lo = m;
            } else {
                hi = m;
            }
        }
        let q = 0.5 * (lo + hi);
        let s = m_scale(&[2.5; 9], &loss, 0.5).unwrap().value;
        assert!((s - 2.5 / q).abs() < 1e-9 * s);
    }

    #[test]
    fn m_scale_gaussian_consistency() {
        let x = normals(5000, 2);
        let s = m_scale(&x, &LossFunction::tukey(C0), 0.5).unwrap().value;
        assert!((s - 1.0).abs() < 0.05, "{s}");
    }

    #[test]
    fn m_scale_degenerate_cases() {
        let loss = LossFunction::tukey(C0);
        assert!(matches!(m_scale(&[0.0; 5], &loss, 0.5), Err(Error::DegenerateScale)));
        let r = [0.0, 0.0, 0.0, 1.0, 2.0];
        assert!(matches!(m_scale(&r, &loss, 0.5), Err(Error::NoScaleRoot { zeros: 3, n: 5 })));
        assert!(m_scale(&[0.0, 0.0, 1.0, 2.0, 3.0], &loss, 0.5).is_ok());
    }

    #[test]
    fn tau_zero_and_gaussian() {
        assert_eq!(tau_scale_squared(&[0.0; 10], &tau()).unwrap(), 0.0);
        let x = normals(5000, 3);
        let t2 = tau_scale_squared(&x, &tau()).unwrap();
        assert!((t2 - 1.0).abs() < 0.05, "{t2}");
    }

    #[test]
    fn tau_equivariance_example() {
        let r = normals(40, 4);
        let r3: Vec<f64> = r.iter().map(|v| 3.0 * v).collect();
        let a = tau_scale_squared(&r, &tau()).unwrap();
        let b = tau_scale_squared(&r3, &tau()).unwrap();
        assert!((b - 9.0 * a).abs() < 1e-9 * b);
    }

    #[test]
    fn tau_resists_one_gross_outlier() {
        for seed in 0..20 {
            let mut r = normals(50, 100 + seed);
            let base = tau_scale_squared(&r, &tau()).unwrap();
            let (imax, m) = r
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            r[imax] = r[imax].signum() * 1e6 * m;
            let moved = tau_scale_squared(&r, &tau()).unwrap();
            assert!(((moved - base) / base).abs() <= 0.25, "{base} {moved}");
        }
    }

    proptest! {
        #[test]
        fn qn_matches_brute_force(x in proptest::collection::vec(-1e3f64..1e3, 2..120)) {
            prop_assert_eq!(qn_scale(&x, 1.0).unwrap().value, brute_qn(&x));
        }

        #[test]
        fn qn_location_invariant_scale_equivariant(
            x in proptest::collection::vec(-100.0f64..100.0, 2..60),
            k in -20i32..20,
            e in -3i32..4,
        ) {
            // Shifts and scalings that are exact in binary floating point.
            let a = k as f64 * 0.25;
            let t = -(2.0f64.powi(e));
            let q = qn_scale(&x, 1.0).unwrap().value;
            let xs: Vec<f64> = x.iter().map(|v| v + a).collect();
            let xt: Vec<f64> = x.iter().map(|v| t * v).collect();
            let qs = qn_scale(&xs, 1.0).unwrap().value;
            prop_assert!((qs - q).abs() <= 1e-12 * (1.0 + q));
            prop_assert_eq!(qn_scale(&xt, 1.0).unwrap().value, t.abs() * q);
        }

        #[test]
        fn m_scale_solves_its_equation(
            r in proptest::collection::vec(-50.0f64..50.0, 5..80),
            t in 0.01f64..100.0,
        ) {
            let loss = LossFunction::tukey(C0);
            let s = m_scale(&r, &loss, 0.5).unwrap().value;
            prop_assert!((mean_rho(&r, &loss, s) - 0.5).abs() < 1e-8);
            let rt: Vec<f64> = r.iter().map(|v| t * v).collect();
            let st = m_scale(&rt, &loss, 0.5).unwrap().value;
            prop_assert!((st - t * s).abs() <= 1e-10 * t * s);
        }
    }
}
