//! ρ families used by the location, scale and regression estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::normal_expectation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Huber,
    TukeyBisquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossFunction {
    pub family: Family,
    pub c: f64,
}

impl LossFunction {
    pub fn new(family: Family, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid(format!("tuning constant must be positive, got {c}")));
        }
        Ok(LossFunction { family, c })
    }

    pub fn huber(k: f64) -> Self {
        LossFunction {
            family: Family::Huber,
            c: k,
        }
    }

    pub fn tukey(c: f64) -> Self {
        LossFunction {
            family: Family::TukeyBisquare,
            c,
        }
    }

    pub fn rho(&self, x: f64) -> f64 {
        let c = self.c;
        let a = x.abs();
        match self.family {
            Family::Huber => {
                if a <= c {
                    0.5 * x * x
                } else {
                    c * (a - 0.5 * c)
                }
            }
            Family::TukeyBisquare => {
                if a >= c {
                    1.0
                } else {
                    let u = x / c;
                    let v = 1.0 - u * u;
                    1.0 - v * v * v
                }
            }
        }
    }

    pub fn psi(&self, x: f64) -> f64 {
        let c = self.c;
        match self.family {
            Family::Huber => x.clamp(-c, c),
            Family::TukeyBisquare => {
                if x.abs() >= c {
                    0.0
                } else {
                    let u = x / c;
                    let v = 1.0 - u * u;
                    6.0 * x / (c * c) * v * v
                }
            }
        }
    }

    pub fn psi_prime(&self, x: f64) -> f64 {
        let c = self.c;
        match self.family {
            Family::Huber => {
                if x.abs() <= c {
                    1.0
                } else {
                    0.0
                }
            }
            Family::TukeyBisquare => {
                if x.abs() >= c {
                    0.0
                } else {
                    let u2 = (x / c) * (x / c);
                    6.0 / (c * c) * (1.0 - u2) * (1.0 - 5.0 * u2)
                }
            }
        }
    }

    /// ψ(x)/x, extended by ψ′(0) at the origin.
    pub fn weight(&self, x: f64) -> f64 {
        let c = self.c;
        match self.family {
            Family::Huber => {
                let a = x.abs();
                if a <= c {
                    1.0
                } else {
                    c / a
                }
            }
            Family::TukeyBisquare => {
                if x.abs() >= c {
                    0.0
                } else {
                    let u = x / c;
                    let v = 1.0 - u * u;
                    6.0 / (c * c) * v * v
                }
            }
        }
    }

    /// sup ρ; infinite for Huber.
    pub fn sup(&self) -> f64 {
        match self.family {
            Family::Huber => f64::INFINITY,
            Family::TukeyBisquare => 1.0,
        }
    }

    /// E_Φ ρ(Z).
    pub fn gaussian_mean_rho(&self) -> f64 {
        normal_expectation(|x| self.rho(x), &[-self.c, self.c])
    }

    /// Asymptotic efficiency at the standard normal: (Eψ′)² / Eψ².
    pub fn gaussian_efficiency(&self) -> f64 {
        let kinks = [-self.c, self.c];
        let d = normal_expectation(|x| self.psi_prime(x), &kinks);
        let v = normal_expectation(|x| self.psi(x).powi(2), &kinks);
        d * d / v
    }

    /// (Eψ², Eψ′) at the standard normal.
    pub fn gaussian_moments(&self) -> (f64, f64) {
        let kinks = [-self.c, self.c];
        (
            normal_expectation(|x| self.psi(x).powi(2), &kinks),
            normal_expectation(|x| self.psi_prime(x), &kinks),
        )
    }
}

const C_LOW: f64 = 1e-3;
const C_HIGH: f64 = 100.0;

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Tuning constant giving the requested Gaussian efficiency.
pub fn tune_for_efficiency(family: Family, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Unattainable(target));
    }
    let eff = |c: f64| LossFunction { family, c }.gaussian_efficiency() - target;
    let (lo, hi) = (eff(C_LOW), eff(C_HIGH));
    if lo > 0.0 || hi < 0.0 {
        return Err(Error::Unattainable(target));
    }
    Ok(bisect(eff, C_LOW, C_HIGH))
}

/// Tukey constant with E_Φ ρ_c(Z) = b. Meaningful for b in (0, 1).
pub fn tune_for_breakdown(b: f64) -> Result<f64> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::Unattainable(b));
    }
    let g = |c: f64| LossFunction::tukey(c).gaussian_mean_rho() - b;
    if g(C_LOW) < 0.0 || g(C_HIGH) > 0.0 {
        return Err(Error::Unattainable(b));
    }
    Ok(bisect(g, C_LOW, C_HIGH))
}
