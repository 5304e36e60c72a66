use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rfreg::config::{RemlWeighting, FitConfig, B0, B_TAU, C0, C1, C_TAU, HUBER_K, QN_D};
use rfreg::flm::Estimator;
use rfreg::influence::FixedScore;
use rfreg::simlab::{LagUnit, Model, NsrMode};

#[derive(Debug, Parser)]
#[command(name = "rfreg", version, about = "Robust scalar-on-function regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one estimator and write coefficients.csv and fit.json.
    Fit(FitArgs),
    /// Score every number of components and write selection.csv.
    Select(SelectArgs),
    /// Run a Monte Carlo study and write simresult.csv and simresult.json.
    Simulate(SimulateArgs),
    /// Evaluate the influence-function surface and write if_surface.csv.
    Influence(InfluenceArgs),
    /// Draw one simulated data set and write curves.csv and responses.csv.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Rfpcr,
    Rfpcpr,
    Fpcr,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Rfpcr => Estimator::Rfpcr,
            EstimatorArg::Rfpcpr => Estimator::Rfpcpr,
            EstimatorArg::Fpcr => Estimator::Fpcr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Rfpcr,
    Rfpcpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Sinusoid,
    Wiener,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Sinusoid => Model::Sinusoid,
            ModelArg::Wiener => Model::Wiener,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NsrModeArg {
    Sd,
    Variance,
}

impl From<NsrModeArg> for NsrMode {
    fn from(m: NsrModeArg) -> Self {
        match m {
            NsrModeArg::Sd => NsrMode::Sd,
            NsrModeArg::Variance => NsrMode::Variance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LagUnitArg {
    Index,
    Time,
}

impl From<LagUnitArg> for LagUnit {
    fn from(l: LagUnitArg) -> Self {
        match l {
            LagUnitArg::Index => LagUnit::Index,
            LagUnitArg::Time => LagUnit::Time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RemlWeightingArg {
    MmWeights,
    HardRejection,
    Unweighted,
}

impl From<RemlWeightingArg> for RemlWeighting {
    fn from(w: RemlWeightingArg) -> Self {
        match w {
            RemlWeightingArg::MmWeights => RemlWeighting::MmWeights,
            RemlWeightingArg::HardRejection => RemlWeighting::HardRejection,
            RemlWeightingArg::Unweighted => RemlWeighting::Unweighted,
        }
    }
}

/// `auto` or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Choice<T> {
    Auto,
    Fixed(T),
}

fn parse_choice<T: std::str::FromStr>(s: &str) -> Result<Choice<T>, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Choice::Auto);
    }
    s.parse::<T>()
        .map(Choice::Fixed)
        .map_err(|_| format!("expected `auto` or a number, got `{s}`"))
}

fn parse_k(s: &str) -> Result<Choice<usize>, String> {
    parse_choice(s)
}

fn parse_lambda(s: &str) -> Result<Choice<f64>, String> {
    parse_choice(s)
}

fn parse_fixed(s: &str) -> Result<FixedScore, String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected x1=<value> or x2=<value>, got `{s}`"))?;
    let v: f64 = value.parse().map_err(|_| format!("`{value}` is not a number"))?;
    match name {
        "x1" => Ok(FixedScore::X1(v)),
        "x2" => Ok(FixedScore::X2(v)),
        _ => Err(format!("expected x1 or x2, got `{name}`")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory, created if missing.
    #[arg(long, env = "RFREG_OUTPUT_DIR", default_value = ".")]
    pub out: PathBuf,
}

/// Tuning constants of the robust estimators.
#[derive(Debug, Clone, Args)]
pub struct TuningArgs {
    /// Seed for every randomised stage.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Huber constant of the functional location.
    #[arg(long, default_value_t = HUBER_K)]
    pub huber_k: f64,
    /// Tukey constant of the S-scale.
    #[arg(long, default_value_t = C0)]
    pub c0: f64,
    /// Right-hand side of the M-scale equation.
    #[arg(long, default_value_t = B0)]
    pub b0: f64,
    /// Tukey constant of the MM step.
    #[arg(long, default_value_t = C1)]
    pub c1: f64,
    /// Qn consistency constant.
    #[arg(long, default_value_t = QN_D)]
    pub qn_d: f64,
    /// Tukey constant of the τ-scale.
    #[arg(long, default_value_t = C_TAU)]
    pub c_tau: f64,
    /// Normalising constant of the τ-scale.
    #[arg(long, default_value_t = B_TAU)]
    pub b_tau: f64,
    /// Projection-pursuit refinement rounds.
    #[arg(long, default_value_t = 2)]
    pub pp_rounds: usize,
    /// Random rotation partners per refinement round.
    #[arg(long, default_value_t = 50)]
    pub pp_partners: usize,
    /// Fast-S random subsamples.
    #[arg(long, default_value_t = 500)]
    pub s_subsamples: usize,
    /// Fast-S candidates refined to convergence.
    #[arg(long, default_value_t = 5)]
    pub s_best: usize,
    /// Convergence tolerance of the MM iterations.
    #[arg(long, default_value_t = 1e-9)]
    pub mm_tol: f64,
    /// Iteration cap of the MM step.
    #[arg(long, default_value_t = 500)]
    pub mm_max_iter: usize,
    /// Observation weights in the REML criterion.
    #[arg(long, value_enum, default_value_t = RemlWeightingArg::MmWeights)]
    pub reml_weighting: RemlWeightingArg,
}

impl TuningArgs {
    pub fn fit_config(&self) -> rfreg::Result<FitConfig> {
        let mut c = FitConfig::default();
        c.huber_k = self.huber_k;
        c.c0 = self.c0;
        c.b0 = self.b0;
        c.c1 = self.c1;
        c.pp.qn_d = self.qn_d;
        c.c_tau = self.c_tau;
        c.b_tau = self.b_tau;
        c.pp.rounds = self.pp_rounds;
        c.pp.partners = self.pp_partners;
        c.s.n_subsamples = self.s_subsamples;
        c.s.n_best = self.s_best;
        c.mm.tol = self.mm_tol;
        c.mm.max_iter = self.mm_max_iter;
        c.reml.weighting = self.reml_weighting.into();
        let c = c.with_seed(self.seed);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Curves CSV: header `t,<grid points>`, then rows `id,<values>`.
    #[arg(long)]
    pub curves: PathBuf,
    /// Responses CSV with rows `id,y`.
    #[arg(long)]
    pub responses: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Rfpcpr)]
    pub estimator: EstimatorArg,
    /// Number of components, or `auto`.
    #[arg(long, value_parser = parse_k, default_value = "auto")]
    pub k: Choice<usize>,
    /// Smoothing parameter of rfpcpr, or `auto` for REML.
    #[arg(long, value_parser = parse_lambda, default_value = "auto")]
    pub lambda: Choice<f64>,
    /// Largest K considered by `--k auto` for the robust estimators.
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    /// Explained-variance fraction fixing K for fpcr under `--k auto`.
    #[arg(long, default_value_t = 0.99)]
    pub fpcr_variance: f64,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Rfpcpr)]
    pub mode: ModeArg,
    /// Largest K considered.
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Sinusoid)]
    pub model: ModelArg,
    /// Curves per data set.
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    /// Grid points per curve.
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    /// Noise-to-signal ratio.
    #[arg(long, default_value_t = 0.05)]
    pub nsr: f64,
    #[arg(long, value_enum, default_value_t = NsrModeArg::Sd)]
    pub nsr_mode: NsrModeArg,
    /// Fraction of contaminated curves.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Response multiplier of contaminated curves.
    #[arg(long, default_value_t = 1.7)]
    pub gamma: f64,
    /// Correlation parameter of the sinusoid model.
    #[arg(long, default_value_t = 0.7)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = LagUnitArg::Index)]
    pub lag_unit: LagUnitArg,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub study: StudyArgs,
    /// Number of replications.
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
    /// Comma-separated estimators.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "rfpcr,rfpcpr,fpcr")]
    pub estimators: Vec<EstimatorArg>,
    /// Largest K considered by the robust estimators.
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    /// Explained-variance fraction fixing K for fpcr.
    #[arg(long, default_value_t = 0.99)]
    pub fpcr_variance: f64,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InfluenceArgs {
    /// Grid points used to discretise the eigenfunctions.
    #[arg(long, default_value_t = 100)]
    pub grid_points: usize,
    /// The score held fixed, as x1=<value> or x2=<value>.
    #[arg(long, value_parser = parse_fixed, default_value = "x1=1")]
    pub fixed: FixedScore,
    /// Half-width of the free score range.
    #[arg(long, default_value_t = 5.0)]
    pub score_range: f64,
    /// Half-width of the response range.
    #[arg(long, default_value_t = 5.0)]
    pub y_range: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 41)]
    pub steps: usize,
    /// Tukey constant of the MM step.
    #[arg(long, default_value_t = C1)]
    pub c1: f64,
    /// Qn consistency constant.
    #[arg(long, default_value_t = QN_D)]
    pub qn_d: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub study: StudyArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}
