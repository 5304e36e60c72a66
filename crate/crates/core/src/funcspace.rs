//! Discretised L² arithmetic.
//!
//! Every curve lives on a [`Grid`] of abscissae in [0, 1] together with a
//! set of quadrature weights. Inner products, norms and integrals are all
//! weighted sums against those weights, so the choice of quadrature rule is
//! made once, when the grid is built.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of grid points; the natural-spline second derivative needs
/// at least two interior nodes.
pub const MIN_GRID_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    /// Trapezoidal rule on the (possibly non-uniform) grid. Weights sum to
    /// the length of the grid's span.
    Trapezoid,
    /// Unit weight per grid point, i.e. curves treated as vectors in R^p
    /// with the Euclidean inner product.
    Counting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
    rule: Quadrature,
}

impl Grid {
    /// Trapezoidal grid on the given points.
    pub fn new(points: Vec<f64>) -> Result<Arc<Grid>> {
        Self::with_rule(points, Quadrature::Trapezoid)
    }

    pub fn with_rule(points: Vec<f64>, rule: Quadrature) -> Result<Arc<Grid>> {
        let p = points.len();
        if p < MIN_GRID_POINTS {
            return Err(Error::InsufficientResolution {
                needed: MIN_GRID_POINTS,
                got: p,
            });
        }
        if let Some(i) = points.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if points[0] < 0.0 || points[p - 1] > 1.0 {
            return Err(Error::InvalidGrid(format!(
                "points must lie in [0, 1], got [{}, {}]",
                points[0],
                points[p - 1]
            )));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "points not strictly increasing at index {}",
                i + 1
            )));
        }
        let weights = match rule {
            Quadrature::Trapezoid => {
                let mut w = vec![0.0; p];
                for k in 0..p - 1 {
                    let h = 0.5 * (points[k + 1] - points[k]);
                    w[k] += h;
                    w[k + 1] += h;
                }
                w
            }
            Quadrature::Counting => vec![1.0; p],
        };
        Ok(Arc::new(Grid {
            points,
            weights,
            rule,
        }))
    }

    /// `p` equispaced points from 0 to 1 inclusive, trapezoidal weights.
    pub fn uniform(p: usize) -> Result<Arc<Grid>> {
        if p < 2 {
            return Err(Error::InsufficientResolution {
                needed: MIN_GRID_POINTS,
                got: p,
            });
        }
        let pts = (0..p).map(|k| k as f64 / (p - 1) as f64).collect();
        Self::new(pts)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> Quadrature {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weighted inner product of two value vectors on this grid.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        self.weights
            .iter()
            .zip(f)
            .zip(g)
            .map(|((w, a), b)| w * (a * b))
            .sum()
    }

    pub fn norm_of(&self, f: &[f64]) -> f64 {
        self.dot(f, f).max(0.0).sqrt()
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

#[derive(Debug, Clone)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Curve> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Curve { grid, values })
    }

    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Curve {
        debug_assert_eq!(values.len(), grid.len());
        Curve { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Curve {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Curve { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Curve {
        let p = grid.len();
        Curve {
            grid,
            values: vec![0.0; p],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self, other: &Curve) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn add(&self, other: &Curve) -> Result<Curve> {
        self.check(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Curve::from_parts(self.grid.clone(), values))
    }

    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        self.check(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Curve::from_parts(self.grid.clone(), values))
    }

    pub fn scale(&self, s: f64) -> Curve {
        Curve::from_parts(self.grid.clone(), self.values.iter().map(|v| s * v).collect())
    }
}

/// ⟨f, g⟩ = Σ_k w_k f_k g_k.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    f.check(g)?;
    Ok(f.grid.dot(&f.values, &g.values))
}

pub fn norm(f: &Curve) -> f64 {
    f.grid.norm_of(&f.values)
}

/// Second derivative of the natural cubic spline interpolating `f`,
/// evaluated at the grid points. Zero at both endpoints by construction.
pub fn second_derivative(f: &Curve) -> Curve {
    let grid = f.grid.clone();
    let values = spline_second_derivative(grid.points(), f.values());
    Curve::from_parts(grid, values)
}

pub(crate) fn spline_second_derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let p = t.len();
    let mut m = vec![0.0; p];
    if p < 3 {
        return m;
    }
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    // Tridiagonal system for M_1..M_{p-2} (Thomas algorithm).
    let inner = p - 2;
    let mut diag = vec![0.0; inner];
    let mut upper = vec![0.0; inner];
    let mut rhs = vec![0.0; inner];
    for i in 0..inner {
        let k = i + 1;
        diag[i] = 2.0 * (h[k - 1] + h[k]);
        upper[i] = h[k];
        rhs[i] = 6.0 * ((y[k + 1] - y[k]) / h[k] - (y[k] - y[k - 1]) / h[k - 1]);
    }
    for i in 1..inner {
        let lower = h[i];
        let factor = lower / diag[i - 1];
        diag[i] -= factor * upper[i - 1];
        rhs[i] -= factor * rhs[i - 1];
    }
    let mut sol = vec![0.0; inner];
    sol[inner - 1] = rhs[inner - 1] / diag[inner - 1];
    for i in (0..inner - 1).rev() {
        sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i];
    }
    m[1..p - 1].copy_from_slice(&sol);
    m
}

/// A set of curves on one shared grid, stored row-major.
#[derive(Debug, Clone)]
pub struct FunctionalSample {
    grid: Arc<Grid>,
    n: usize,
    data: Vec<f64>,
}

impl FunctionalSample {
    pub fn new(grid: Arc<Grid>, rows: Vec<Vec<f64>>) -> Result<FunctionalSample> {
        if rows.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let p = grid.len();
        let n = rows.len();
        let mut data = Vec::with_capacity(n * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::GridMismatch);
            }
            data.extend(row);
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i / p));
        }
        Ok(FunctionalSample { grid, n, data })
    }

    pub fn from_curves(curves: &[Curve]) -> Result<FunctionalSample> {
        let first = curves.first().ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
        let grid = first.grid.clone();
        let mut data = Vec::with_capacity(curves.len() * grid.len());
        for c in curves {
            if !same_grid(&grid, &c.grid) {
                return Err(Error::GridMismatch);
            }
            data.extend_from_slice(&c.values);
        }
        Ok(FunctionalSample {
            grid,
            n: curves.len(),
            data,
        })
    }

    pub(crate) fn from_flat(grid: Arc<Grid>, n: usize, data: Vec<f64>) -> FunctionalSample {
        debug_assert_eq!(data.len(), n * grid.len());
        FunctionalSample { grid, n, data }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.grid.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p())
    }

    pub fn curve(&self, i: usize) -> Curve {
        Curve::from_parts(self.grid.clone(), self.row(i).to_vec())
    }

    /// Pointwise sample mean.
    pub fn mean(&self) -> Curve {
        let p = self.p();
        let mut m = vec![0.0; p];
        for row in self.rows() {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let inv = 1.0 / self.n as f64;
        m.iter_mut().for_each(|v| *v *= inv);
        Curve::from_parts(self.grid.clone(), m)
    }

    /// ⟨X_i, f⟩ for every row.
    pub fn project(&self, f: &Curve) -> Result<Vec<f64>> {
        if !same_grid(&self.grid, &f.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(self.rows().map(|r| self.grid.dot(r, &f.values)).collect())
    }

    /// Rows with row `i` replaced by `f(i, row)`.
    pub fn map_rows(&self, mut f: impl FnMut(usize, &[f64]) -> Vec<f64>) -> FunctionalSample {
        let p = self.p();
        let mut data = Vec::with_capacity(self.data.len());
        for (i, row) in self.rows().enumerate() {
            let out = f(i, row);
            debug_assert_eq!(out.len(), p);
            data.extend(out);
        }
        FunctionalSample::from_flat(self.grid.clone(), self.n, data)
    }

    pub fn select_rows(&self, idx: &[usize]) -> FunctionalSample {
        let p = self.p();
        let mut data = Vec::with_capacity(idx.len() * p);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FunctionalSample::from_flat(self.grid.clone(), idx.len(), data)
    }
}

/// Row i of the result is X_i − location.
pub fn center_sample(sample: &FunctionalSample, location: &Curve) -> Result<FunctionalSample> {
    if !same_grid(&sample.grid, &location.grid) {
        return Err(Error::GridMismatch);
    }
    Ok(sample.map_rows(|_, row| row.iter().zip(&location.values).map(|(x, m)| x - m).collect()))
}
