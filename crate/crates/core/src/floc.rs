//! Robust location for samples of curves.

use serde::{Deserialize, Serialize};

use crate::funcspace::{Curve, FunctionalSample};
use crate::rho::LossFunction;

#[derive(Debug, Clone)]
pub struct LocationFit {
    pub estimate: Curve,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Objective value after each iteration, starting with the initial point.
    pub trace: Vec<f64>,
}

/// How distances enter ρ in the M-location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    /// ρ(||X_i − y|| / ŝ), ŝ the median distance to the spatial median.
    Standardized,
    /// ρ(||X_i − y||).
    Raw,
}

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

fn distances(sample: &FunctionalSample, y: &[f64], out: &mut [f64]) {
    let g = sample.grid();
    let w = g.weights();
    for (d, row) in out.iter_mut().zip(sample.rows()) {
        let mut s = 0.0;
        for k in 0..row.len() {
            let e = row[k] - y[k];
            s += w[k] * e * e;
        }
        *d = s.max(0.0).sqrt();
    }
}

fn median_of(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn pointwise_median(sample: &FunctionalSample) -> Vec<f64> {
    let mut col = vec![0.0; sample.n()];
    (0..sample.p())
        .map(|k| {
            for (c, row) in col.iter_mut().zip(sample.rows()) {
                *c = row[k];
            }
            median_of(&col)
        })
        .collect()
}

/// Weighted combination Σ c_i X_i / Σ c_i.
fn weighted_mean(sample: &FunctionalSample, c: &[f64]) -> Vec<f64> {
    let p = sample.p();
    let mut acc = vec![0.0; p];
    let mut total = 0.0;
    for (ci, row) in c.iter().zip(sample.rows()) {
        if *ci == 0.0 {
            continue;
        }
        total += ci;
        for (a, v) in acc.iter_mut().zip(row) {
            *a += ci * v;
        }
    }
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    acc
}

/// Spatial median: the minimiser of Σ_i ||X_i − y||.
pub fn functional_median(sample: &FunctionalSample, tol: f64, max_iter: usize) -> LocationFit {
    let n = sample.n();
    let grid = sample.grid().clone();
    let mut y = pointwise_median(sample);
    let mut d = vec![0.0; n];
    distances(sample, &y, &mut d);
    let mut obj: f64 = d.iter().sum();
    let mut trace = vec![obj];
    let floor = 1e-10 * median_of(&d);
    if obj == 0.0 {
        return LocationFit {
            estimate: Curve::from_parts(grid, y),
            iterations: 1,
            converged: true,
            objective: 0.0,
            trace,
        };
    }
    let mut converged = false;
    let mut iterations = 0;
    let mut coef = vec![0.0; n];
    while iterations < max_iter {
        iterations += 1;
        let mut coincident = 0usize;
        for (c, &di) in coef.iter_mut().zip(&d) {
            if di <= floor {
                coincident += 1;
                *c = 0.0;
            } else {
                *c = 1.0 / di;
            }
        }
        let t = weighted_mean(sample, &coef);
        let next = if coincident == 0 {
            t
        } else {
            // The iterate sits on data points: use the modified step, which
            // stays put when the subgradient condition certifies optimality.
            let p = sample.p();
            let mut r = vec![0.0; p];
            for (c, row) in coef.iter().zip(sample.rows()) {
                if *c > 0.0 {
                    for k in 0..p {
                        r[k] += c * (row[k] - y[k]);
                    }
                }
            }
            let rn = grid.norm_of(&r);
            let eta = coincident as f64;
            if rn <= eta {
                converged = true;
                break;
            }
            let a = eta / rn;
            t.iter().zip(&y).map(|(ti, yi)| (1.0 - a) * ti + a * yi).collect()
        };
        distances(sample, &next, &mut d);
        let new_obj: f64 = d.iter().sum();
        if new_obj > obj {
            // Rounding noise at the optimum; keep the better point.
            distances(sample, &y, &mut d);
            converged = true;
            break;
        }
        y = next;
        let rel = (obj - new_obj) / obj.max(f64::MIN_POSITIVE);
        obj = new_obj;
        trace.push(obj);
        if rel < tol {
            converged = true;
            break;
        }
    }
    LocationFit {
        estimate: Curve::from_parts(grid, y),
        iterations,
        converged,
        objective: obj,
        trace,
    }
}

/// M-estimator of location, computed by iteratively reweighted means
/// started at the spatial median.
pub fn functional_m_location(
    sample: &FunctionalSample,
    loss: &LossFunction,
    mode: DistanceMode,
    tol: f64,
    max_iter: usize,
) -> LocationFit {
    let n = sample.n();
    let grid = sample.grid().clone();
    let start = functional_median(sample, tol, max_iter);
    let mut y = start.estimate.into_values();
    let mut d = vec![0.0; n];
    distances(sample, &y, &mut d);
    let s_hat = match mode {
        DistanceMode::Standardized => median_of(&d),
        DistanceMode::Raw => 1.0,
    };
    if s_hat == 0.0 {
        return LocationFit {
            estimate: Curve::from_parts(grid, y),
            iterations: 0,
            converged: true,
            objective: 0.0,
            trace: vec![0.0],
        };
    }
    let objective = |d: &[f64]| d.iter().map(|&v| loss.rho(v / s_hat)).sum::<f64>();
    let mut obj = objective(&d);
    let mut trace = vec![obj];
    let mut w = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for (wi, &di) in w.iter_mut().zip(&d) {
            *wi = loss.weight(di / s_hat);
        }
        if w.iter().all(|&v| v == 0.0) {
            break;
        }
        let next = weighted_mean(sample, &w);
        let step: Vec<f64> = next.iter().zip(&y).map(|(a, b)| a - b).collect();
        let dn = grid.norm_of(&step);
        let yn = grid.norm_of(&y);
        y = next;
        distances(sample, &y, &mut d);
        obj = objective(&d);
        trace.push(obj);
        if dn <= tol * (yn + s_hat) {
            converged = true;
            break;
        }
    }
    LocationFit {
        estimate: Curve::from_parts(grid, y),
        iterations,
        converged,
        objective: obj,
        trace,
    }
}
