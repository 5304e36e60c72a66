//! Pinned default tuning constants; `examples/derive_constants.rs`
//! recomputes each of them.

/// Qn consistency factor at the normal model.
pub const QN_D: f64 = 2.2219;
/// Tukey constant with E_Φ ρ = 1/2 (50% breakdown S-scale).
pub const C0: f64 = 1.5476450;
pub const B0: f64 = 0.5;
/// Tukey constant for 95% Gaussian efficiency.
pub const C1: f64 = 4.6850649;
/// Huber constant for 95% Gaussian efficiency.
pub const HUBER_K: f64 = 1.3449975;
/// Tukey constant of the τ-scale's second ρ (80% efficiency).
pub const C_TAU: f64 = 3.1369087;
/// E_Φ ρ_τ(Z) for `C_TAU`.
pub const B_TAU: f64 = 0.22759711;

use serde::{Deserialize, Serialize};

use crate::floc::DistanceMode;
use crate::mmreg::{MmConfig, SConfig};
use crate::ppfpca::{PpConfig, ScaleKind};
use crate::rho::LossFunction;
use crate::scales::TauScale;

/// Observation weights entering the REML criterion for λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemlWeighting {
    /// The final MM weights.
    MmWeights,
    /// ψ′(0) for |r/σ| ≤ c₁, zero otherwise.
    HardRejection,
    /// ψ′(0) for every observation.
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemlConfig {
    pub weighting: RemlWeighting,
    pub log10_min: f64,
    pub log10_max: f64,
    pub grid_points: usize,
}

impl Default for RemlConfig {
    fn default() -> Self {
        RemlConfig {
            weighting: RemlWeighting::MmWeights,
            log10_min: -8.0,
            log10_max: 8.0,
            grid_points: 81,
        }
    }
}

/// Everything that tunes a robust fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub huber_k: f64,
    pub location_mode: DistanceMode,
    pub location_tol: f64,
    pub location_max_iter: usize,
    pub pp: PpConfig,
    pub c0: f64,
    pub b0: f64,
    pub c1: f64,
    pub s: SConfig,
    pub mm: MmConfig,
    pub c_tau: f64,
    pub b_tau: f64,
    pub reml: RemlConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            huber_k: HUBER_K,
            location_mode: DistanceMode::Standardized,
            location_tol: crate::floc::DEFAULT_TOL,
            location_max_iter: crate::floc::DEFAULT_MAX_ITER,
            pp: PpConfig {
                scale: ScaleKind::Qn,
                qn_d: QN_D,
                rounds: 2,
                partners: 50,
                theta_grid: 16,
                seed: 0,
            },
            c0: C0,
            b0: B0,
            c1: C1,
            s: SConfig::default(),
            mm: MmConfig::default(),
            c_tau: C_TAU,
            b_tau: B_TAU,
            reml: RemlConfig::default(),
        }
    }
}

impl FitConfig {
    /// Sets the seeds of every randomised stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.pp.seed = seed;
        self.s.seed = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        self
    }

    pub fn rho0(&self) -> LossFunction {
        LossFunction::tukey(self.c0)
    }

    pub fn rho1(&self) -> LossFunction {
        LossFunction::tukey(self.c1)
    }

    pub fn huber(&self) -> LossFunction {
        LossFunction::huber(self.huber_k)
    }

    pub fn tau(&self) -> TauScale {
        TauScale {
            rho0: self.rho0(),
            b0: self.b0,
            rho_tau: LossFunction::tukey(self.c_tau),
            b_tau: self.b_tau,
        }
    }

    /// Rejects non-positive or non-finite tuning constants.
    pub fn validate(&self) -> crate::Result<()> {
        let pos = [
            ("huber-k", self.huber_k),
            ("c0", self.c0),
            ("c1", self.c1),
            ("c-tau", self.c_tau),
            ("b-tau", self.b_tau),
            ("qn-d", self.pp.qn_d),
            ("mm-tol", self.mm.tol),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(crate::Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.b0 > 0.0 && self.b0 < 1.0) {
            return Err(crate::Error::invalid(format!("b0 must lie in (0, 1), got {}", self.b0)));
        }
        if self.s.n_subsamples == 0 || self.s.n_best == 0 {
            return Err(crate::Error::invalid("fast-S needs at least one subsample and one candidate"));
        }
        if self.reml.grid_points < 2 || !(self.reml.log10_min < self.reml.log10_max) {
            return Err(crate::Error::invalid("REML grid must have at least two points on a nonempty range"));
        }
        Ok(())
    }
}
