//! Projection-pursuit principal components for curves.
//!
//! Directions are found one at a time by maximising a scale of the
//! projected scores, then the data are deflated onto the orthogonal
//! complement of each accepted direction. The search runs in coordinates
//! z = √w ⊙ x, where the weighted L² inner product becomes the Euclidean one.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{same_grid, Curve, FunctionalSample};
use crate::scales::qn_with_buffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleKind {
    Qn,
    Sd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpConfig {
    pub scale: ScaleKind,
    /// Consistency constant for Qn.
    pub qn_d: f64,
    /// Refinement rounds after the candidate scan.
    pub rounds: usize,
    /// Random rotation partners tried per round.
    pub partners: usize,
    /// Coarse θ grid size before golden-section refinement.
    pub theta_grid: usize,
    pub seed: u64,
}

impl Default for PpConfig {
    fn default() -> Self {
        PpConfig {
            scale: ScaleKind::Qn,
            qn_d: crate::config::QN_D,
            rounds: 2,
            partners: 50,
            theta_grid: 16,
            seed: 0,
        }
    }
}

impl PpConfig {
    pub fn with_scale(scale: ScaleKind) -> Self {
        PpConfig {
            scale,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub directions: Vec<Curve>,
    /// Squared scale of the scores on each direction.
    pub dispersions: Vec<f64>,
    pub scale_kind: ScaleKind,
}

impl EigenSystem {
    pub fn k(&self) -> usize {
        self.directions.len()
    }

    /// The first `k` components.
    pub fn truncate(&self, k: usize) -> EigenSystem {
        EigenSystem {
            directions: self.directions[..k].to_vec(),
            dispersions: self.dispersions[..k].to_vec(),
            scale_kind: self.scale_kind,
        }
    }
}

/// Scale objective with scratch space.
struct Objective {
    kind: ScaleKind,
    d: f64,
    buf: Vec<f64>,
}

impl Objective {
    fn new(kind: ScaleKind, d: f64, n: usize) -> Self {
        let cap = match kind {
            ScaleKind::Qn => n * n.saturating_sub(1) / 2,
            ScaleKind::Sd => n,
        };
        Objective {
            kind,
            d,
            buf: Vec::with_capacity(cap),
        }
    }

    fn eval(&mut self, s: &[f64]) -> f64 {
        match self.kind {
            ScaleKind::Qn => qn_with_buffer(s, self.d, &mut self.buf),
            ScaleKind::Sd => {
                let n = s.len();
                if n < 2 {
                    return 0.0;
                }
                // Sorted accumulation keeps the value independent of row order.
                self.buf.clear();
                self.buf.extend_from_slice(s);
                self.buf.sort_by(|a, b| a.total_cmp(b));
                let mean = self.buf.iter().sum::<f64>() / n as f64;
                let mut dev: Vec<f64> = self.buf.iter().map(|v| (v - mean) * (v - mean)).collect();
                dev.sort_by(|a, b| a.total_cmp(b));
                (dev.iter().sum::<f64>() / (n - 1) as f64).sqrt()
            }
        }
    }
}

/// Row-major n × p matrix in √w coordinates.
struct Transformed {
    n: usize,
    p: usize,
    z: Vec<f64>,
}

impl Transformed {
    fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    fn scores(&self, u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), u);
        }
    }

    fn deflate(&mut self, u: &[f64]) {
        let p = self.p;
        for row in self.z.chunks_exact_mut(p) {
            let c = dot(row, u);
            for (r, ui) in row.iter_mut().zip(u) {
                *r -= c * ui;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn transform(sample: &FunctionalSample) -> Transformed {
    let sw: Vec<f64> = sample.grid().weights().iter().map(|w| w.sqrt()).collect();
    let mut z = Vec::with_capacity(sample.n() * sample.p());
    for row in sample.rows() {
        z.extend(row.iter().zip(&sw).map(|(x, s)| x * s));
    }
    Transformed {
        n: sample.n(),
        p: sample.p(),
        z,
    }
}

fn to_curve(sample: &FunctionalSample, u: &[f64]) -> Curve {
    let values: Vec<f64> = u
        .iter()
        .zip(sample.grid().weights())
        .map(|(x, w)| if *w > 0.0 { x / w.sqrt() } else { 0.0 })
        .collect();
    let mut c = Curve::from_parts(sample.grid().clone(), values);
    if flip_sign(c.values()) {
        c = c.scale(-1.0);
    }
    c
}

/// True when the vector should be negated to meet the sign convention.
pub(crate) fn flip_sign(v: &[f64]) -> bool {
    let s: f64 = v.iter().sum();
    let mag: f64 = v.iter().map(|x| x.abs()).sum();
    if s.abs() > 1e-10 * mag {
        s < 0.0
    } else {
        v.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0)
    }
}

/// Maximises the objective along v(θ) = cos θ·a + sin θ·b for θ in
/// [−π/2, π/2). Returns (θ, value).
fn rotate_search(
    obj: &mut Objective,
    sa: &[f64],
    sb: &[f64],
    grid: usize,
    tmp: &mut Vec<f64>,
) -> (f64, f64) {
    let mut f = |th: f64, tmp: &mut Vec<f64>| {
        let (c, s) = (th.cos(), th.sin());
        tmp.clear();
        tmp.extend(sa.iter().zip(sb).map(|(x, y)| c * x + s * y));
        obj.eval(tmp)
    };
    let step = PI / grid as f64;
    let mut best = (0.0, f(0.0, tmp));
    for k in 1..grid {
        let th = -PI / 2.0 + k as f64 * step;
        let v = f(th, tmp);
        if v > best.1 {
            best = (th, v);
        }
    }
    // Golden-section search on the bracket around the best grid point.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1, tmp);
    let mut f2 = f(x2, tmp);
    while hi - lo > 1e-6 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1, tmp);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2, tmp);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Best direction of the (already deflated) data, in √w coordinates.
/// Returns the unit direction and its objective value.
fn search(
    data: &Transformed,
    cfg: &PpConfig,
    rng: &mut ChaCha8Rng,
    rank_tol: f64,
) -> Option<(Vec<f64>, f64)> {
    let n = data.n;
    let norms: Vec<f64> = (0..n).map(|i| dot(data.row(i), data.row(i)).sqrt()).collect();
    let mut cand: Vec<usize> = (0..n).filter(|&i| norms[i] > rank_tol).collect();
    if cand.is_empty() {
        return None;
    }
    let mut obj = Objective::new(cfg.scale, cfg.qn_d, n);
    // Scores of every candidate direction come from the Gram matrix.
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let g = dot(data.row(i), data.row(j));
            gram[i * n + j] = g;
            gram[j * n + i] = g;
        }
    }
    let mut value = vec![f64::NEG_INFINITY; n];
    let mut s = vec![0.0; n];
    for &i in &cand {
        for (j, sj) in s.iter_mut().enumerate() {
            *sj = gram[j * n + i] / norms[i];
        }
        value[i] = obj.eval(&s);
    }
    // Canonical ordering so that the outcome does not depend on row order.
    cand.sort_by(|&a, &b| {
        value[b]
            .total_cmp(&value[a])
            .then_with(|| lex_cmp(data.row(a), data.row(b)))
    });
    let best = cand[0];
    let mut u: Vec<f64> = data.row(best).iter().map(|x| x / norms[best]).collect();
    let mut best_val = value[best];
    let mut su = vec![0.0; n];
    data.scores(&u, &mut su);

    let mut sw = vec![0.0; n];
    let mut tmp = Vec::with_capacity(n);
    for _ in 0..cfg.rounds {
        let m = cfg.partners.min(cand.len());
        if m == 0 {
            break;
        }
        let picks = sample_indices(rng, cand.len(), m);
        for pick in picks.iter() {
            let c = cand[pick];
            let mut w: Vec<f64> = data.row(c).to_vec();
            let proj = dot(&w, &u);
            w.iter_mut().zip(&u).for_each(|(wi, ui)| *wi -= proj * ui);
            if normalize(&mut w) <= rank_tol {
                continue;
            }
            data.scores(&w, &mut sw);
            let (th, v) = rotate_search(&mut obj, &su, &sw, cfg.theta_grid.max(2), &mut tmp);
            if v > best_val {
                let (c, s) = (th.cos(), th.sin());
                u.iter_mut().zip(&w).for_each(|(ui, wi)| *ui = c * *ui + s * wi);
                normalize(&mut u);
                data.scores(&u, &mut su);
                best_val = obj.eval(&su);
            }
        }
    }
    Some((u, best_val))
}

fn stream_rng(seed: u64, component: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(component as u64 + 1);
    rng
}

fn rank_tolerance(data: &Transformed) -> f64 {
    let max = (0..data.n)
        .map(|i| dot(data.row(i), data.row(i)).sqrt())
        .fold(0.0, f64::max);
    1e-10 * max.max(f64::MIN_POSITIVE)
}

/// A single direction maximising the scale of ⟨v, X_i⟩ subject to
/// orthogonality with `constraints` (assumed orthonormal).
pub fn pp_direction(
    sample_centered: &FunctionalSample,
    cfg: &PpConfig,
    constraints: &[Curve],
) -> Result<Curve> {
    let mut data = transform(sample_centered);
    let tol = rank_tolerance(&data);
    let sw: Vec<f64> = sample_centered.grid().weights().iter().map(|w| w.sqrt()).collect();
    let mut basis = Vec::with_capacity(constraints.len());
    for c in constraints {
        if !same_grid(c.grid(), sample_centered.grid()) {
            return Err(Error::GridMismatch);
        }
        basis.push(c.values().iter().zip(&sw).map(|(v, s)| v * s).collect::<Vec<f64>>());
    }
    for b in &basis {
        data.deflate(b);
    }
    let mut rng = stream_rng(cfg.seed, constraints.len());
    let (mut u, _) = search(&data, cfg, &mut rng, tol).ok_or(Error::RankExhausted {
        component: constraints.len(),
        partial: Box::new(EigenSystem {
            directions: constraints.to_vec(),
            dispersions: vec![],
            scale_kind: cfg.scale,
        }),
    })?;
    for b in &basis {
        let c = dot(&u, b);
        u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
    normalize(&mut u);
    Ok(to_curve(sample_centered, &u))
}

/// Extracts `k` components of `sample` centred at `location`.
pub fn pp_components(
    sample: &FunctionalSample,
    location: &Curve,
    k: usize,
    cfg: &PpConfig,
) -> Result<EigenSystem> {
    let centered = crate::funcspace::center_sample(sample, location)?;
    let mut data = transform(&centered);
    let tol = rank_tolerance(&data);
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut disp = Vec::with_capacity(k);
    for j in 0..k {
        let mut rng = stream_rng(cfg.seed, j);
        let found = search(&data, cfg, &mut rng, tol);
        let Some((mut u, val)) = found else {
            let partial = assemble(&centered, dirs, disp, cfg.scale);
            return Err(Error::RankExhausted {
                component: j,
                partial: Box::new(partial),
            });
        };
        for b in &dirs {
            let c = dot(&u, b);
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        normalize(&mut u);
        data.deflate(&u);
        dirs.push(u);
        disp.push(val * val);
    }
    Ok(assemble(&centered, dirs, disp, cfg.scale))
}

fn assemble(
    centered: &FunctionalSample,
    dirs: Vec<Vec<f64>>,
    disp: Vec<f64>,
    scale_kind: ScaleKind,
) -> EigenSystem {
    let mut order: Vec<usize> = (0..dirs.len()).collect();
    // Stable sort: the search order is kept among equal dispersions.
    order.sort_by(|&a, &b| disp[b].total_cmp(&disp[a]));
    EigenSystem {
        directions: order.iter().map(|&j| to_curve(centered, &dirs[j])).collect(),
        dispersions: order.iter().map(|&j| disp[j]).collect(),
        scale_kind,
    }
}

/// n × (K+1) design: a column of ones followed by ⟨X_i − location, v_j⟩.
pub fn score_matrix(
    sample: &FunctionalSample,
    location: &Curve,
    eig: &EigenSystem,
) -> Result<DMatrix<f64>> {
    let centered = crate::funcspace::center_sample(sample, location)?;
    let (n, k) = (sample.n(), eig.k());
    let mut x = DMatrix::zeros(n, k + 1);
    for i in 0..n {
        x[(i, 0)] = 1.0;
    }
    for (j, v) in eig.directions.iter().enumerate() {
        let s = centered.project(v)?;
        for i in 0..n {
            x[(i, j + 1)] = s[i];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{inner_product, Grid};
    use std::sync::Arc;

    fn rank_one(grid: &Arc<Grid>, coefs: &[f64]) -> FunctionalSample {
        let u: Vec<f64> = grid.points().iter().map(|&t| 1.0 + t - t * t).collect();
        let rows = coefs.iter().map(|c| u.iter().map(|v| c * v).collect()).collect();
        FunctionalSample::new(grid.clone(), rows).unwrap()
    }

    #[test]
    fn one_dimensional_data() {
        let grid = Grid::uniform(30).unwrap();
        let s = rank_one(&grid, &[-2.0, 1.0, 0.5, 3.0, -1.5, 0.7]);
        let u = Curve::from_fn(grid.clone(), |t| 1.0 + t - t * t);
        let un = crate::funcspace::norm(&u);
        for kind in [ScaleKind::Qn, ScaleKind::Sd] {
            let v = pp_direction(&s, &PpConfig::with_scale(kind), &[]).unwrap();
            for (a, b) in v.values().iter().zip(u.values()) {
                assert!((a - b / un).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_one_components() {
        let grid = Grid::uniform(30).unwrap();
        let coefs = [-2.0, 1.0, 0.5, 3.0, -1.5, 0.7];
        let s = rank_one(&grid, &coefs);
        let zero = Curve::zeros(grid.clone());
        let e = pp_components(&s, &zero, 1, &PpConfig::default()).unwrap();
        let u = Curve::from_fn(grid.clone(), |t| 1.0 + t - t * t);
        let un = crate::funcspace::norm(&u);
        let scaled: Vec<f64> = coefs.iter().map(|c| c * un).collect();
        let q = crate::scales::qn_scale(&scaled, crate::config::QN_D).unwrap().value;
        assert!((e.dispersions[0] - q * q).abs() < 1e-9 * q * q);
        match pp_components(&s, &zero, 2, &PpConfig::default()) {
            Err(Error::RankExhausted { component, partial }) => {
                assert_eq!(component, 1);
                assert_eq!(partial.k(), 1);
            }
            other => panic!("expected rank exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn score_matrix_examples() {
        let grid = Grid::uniform(40).unwrap();
        let v1 = Curve::from_fn(grid.clone(), |t| 2f64.sqrt() * (0.5 * PI * t).sin());
        let v2 = Curve::from_fn(grid.clone(), |t| 2f64.sqrt() * (1.5 * PI * t).sin());
        // Orthonormalise exactly on this grid.
        let n1 = crate::funcspace::norm(&v1);
        let v1 = v1.scale(1.0 / n1);
        let c = inner_product(&v1, &v2).unwrap();
        let v2 = v2.sub(&v1.scale(c)).unwrap();
        let v2 = v2.scale(1.0 / crate::funcspace::norm(&v2));
        let eig = EigenSystem {
            directions: vec![v1, v2.clone()],
            dispersions: vec![2.0, 1.0],
            scale_kind: ScaleKind::Qn,
        };
        let loc = Curve::from_fn(grid.clone(), |t| t.cos());
        let x2 = loc.add(&v2.scale(3.0)).unwrap();
        let s = FunctionalSample::from_curves(&[loc.clone(), x2]).unwrap();
        let m = score_matrix(&s, &loc, &eig).unwrap();
        assert_eq!((m[(0, 0)], m[(0, 1)], m[(0, 2)]), (1.0, 0.0, 0.0));
        assert_eq!(m[(1, 0)], 1.0);
        assert!(m[(1, 1)].abs() < 1e-12);
        assert!((m[(1, 2)] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sign_convention() {
        assert!(flip_sign(&[-1.0, -2.0, 0.5]));
        assert!(!flip_sign(&[1.0, -0.5]));
        assert!(flip_sign(&[0.0, -1.0, 1.0]));
        assert!(!flip_sign(&[0.0, 1.0, -1.0]));
    }

    #[test]
    fn rotation_search_finds_maximum() {
        // Scores along cos θ a + sin θ b with a, b independent samples; SD
        // is maximised at the leading eigenvector of the 2×2 covariance.
        let a: Vec<f64> = (0..50).map(|i| ((i * 37) % 17) as f64 - 8.0).collect();
        let b: Vec<f64> = (0..50).map(|i| 0.5 * (((i * 11) % 13) as f64 - 6.0)).collect();
        let mut obj = Objective::new(ScaleKind::Sd, 1.0, 50);
        let (th, v) = rotate_search(&mut obj, &a, &b, 16, &mut Vec::new());
        for k in 0..2000 {
            let t = -PI / 2.0 + PI * k as f64 / 2000.0;
            let s: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t.cos() * x + t.sin() * y).collect();
            assert!(obj.eval(&s) <= v + 1e-9, "θ={t} beats {th}");
        }
    }
}
