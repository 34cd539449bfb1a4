//! TOML experiment description.
//!
//! ```toml
//! [problem]
//! name = "ackley"            # ackley | elliptic | rosenbrock | quadratic
//! dim = 100                  # ackley, rosenbrock and quadratic only
//!
//! [algorithm]
//! name = "rild"              # rild | rild-gradfree | gld | eks | eki
//! particles = 50
//! tau = 10.0
//! sigma = 5.0
//! max_iters = 1000
//! max_evals = 50000          # optional
//! threshold = 1000.0         # optional, default 1e3; inf disables resampling
//! seed = 0
//! covariance = "identity"    # identity | weighted-covariance
//! drift = "exact-gradient"   # exact-gradient | derivative-free
//! adaptive_step = false
//! snapshot_iters = [15, 30]
//!
//! [fitness]
//! kind = "neg-v"             # none | neg-v | neg-misfit | scaled-neg-misfit
//! scale = 1.0
//!
//! [init]                     # optional; defaults per problem
//! seed = 7                   # optional, default algorithm.seed
//! marginals = [{ kind = "normal", mean = 0.0, std = 30.0 }]  # optional; one entry = i.i.d.
//!
//! [sweep]                    # `sweep` subcommand
//! algorithms = ["rild", "gld"]
//! taus = [2.0, 8.0, 32.0]
//! sigmas = [1.0, 4.0, 16.0]
//! trials = 3
//! target = 17.0
//!
//! [spectral]                 # `spectral` subcommand
//! grid_points = 256
//! blend_width = 0.02
//! epsilons = [0.0, 0.02, 0.04]
//! sigmas = [1.0, 0.5]
//! interval = [0.44, 0.68]
//!
//! [output]
//! dir = "out/ackley"
//! ```

use std::path::{Path, PathBuf};

use rild::config::DEFAULT_RESAMPLE_THRESHOLD;
use rild::problems::{
    ackley, ackley_initial, elliptic_bvp_problem, elliptic_initial, quadratic, rosenbrock_initial,
    rosenbrock_map_problem, InitialDistribution, Marginal, ACKLEY_A, ACKLEY_B, ACKLEY_C,
};
use rild::spectral::{CONCENTRATION_INTERVAL, DEFAULT_BLEND_WIDTH, DEFAULT_GRID_POINTS};
use rild::{
    CovarianceMode, DriftMode, Ensemble, FitnessSource, LeastSquaresProblem, ObjectiveProblem,
    Potential, RunConfig, SweepAlgorithm,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub problem: Option<ProblemSection>,
    pub algorithm: Option<AlgorithmSection>,
    pub fitness: Option<FitnessSection>,
    pub init: Option<InitSection>,
    pub sweep: Option<SweepSection>,
    pub spectral: Option<SpectralSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemName {
    Ackley,
    Elliptic,
    Rosenbrock,
    Quadratic,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: ProblemName,
    pub dim: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmName {
    Rild,
    RildGradfree,
    Gld,
    Eks,
    Eki,
}

impl AlgorithmName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rild => "rild",
            Self::RildGradfree => "rild-gradfree",
            Self::Gld => "gld",
            Self::Eks => "eks",
            Self::Eki => "eki",
        }
    }
}

fn default_particles() -> usize {
    RunConfig::default().particles
}
fn default_tau() -> f64 {
    RunConfig::default().tau
}
fn default_sigma() -> f64 {
    RunConfig::default().sigma
}
fn default_iters() -> usize {
    RunConfig::default().max_iters
}
fn default_threshold() -> f64 {
    DEFAULT_RESAMPLE_THRESHOLD
}
fn default_covariance() -> CovarianceMode {
    CovarianceMode::Identity
}
fn default_drift() -> DriftMode {
    DriftMode::ExactGradient
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub name: AlgorithmName,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    pub max_evals: Option<u64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_covariance")]
    pub covariance: CovarianceMode,
    #[serde(default = "default_drift")]
    pub drift: DriftMode,
    #[serde(default)]
    pub adaptive_step: bool,
    #[serde(default)]
    pub snapshot_iters: Vec<usize>,
}

impl AlgorithmSection {
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            particles: self.particles,
            tau: self.tau,
            sigma: self.sigma,
            max_iters: self.max_iters,
            threshold: self.threshold,
            seed: self.seed,
            covariance: self.covariance,
            drift: self.drift,
            adaptive_step: self.adaptive_step,
            max_evals: self.max_evals,
            snapshot_iters: self.snapshot_iters.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessName {
    None,
    NegV,
    NegMisfit,
    ScaledNegMisfit,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FitnessSection {
    pub kind: FitnessName,
    #[serde(default = "one")]
    pub scale: f64,
    /// Upper bound `A` on `W`; defaults to 0, valid for the built-in sources.
    #[serde(default)]
    pub bound: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub seed: Option<u64>,
    /// Empty means the problem's default distribution.
    #[serde(default)]
    pub marginals: Vec<Marginal>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub algorithms: Vec<SweepAlgorithm>,
    pub taus: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub trials: usize,
    pub target: f64,
}

fn default_grid() -> usize {
    DEFAULT_GRID_POINTS
}
fn default_blend() -> f64 {
    DEFAULT_BLEND_WIDTH
}
fn default_interval() -> [f64; 2] {
    [CONCENTRATION_INTERVAL.0, CONCENTRATION_INTERVAL.1]
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "default_blend")]
    pub blend_width: f64,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub sigmas: Vec<f64>,
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub snapshot_iters: Option<Vec<usize>>,
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<ExperimentFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut file: ExperimentFile =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(out) = &overrides.out {
        file.output.dir = out.clone();
    }
    if let Some(alg) = file.algorithm.as_mut() {
        if let Some(seed) = overrides.seed {
            alg.seed = seed;
        }
        if let Some(iters) = &overrides.snapshot_iters {
            alg.snapshot_iters = iters.clone();
        }
    } else if overrides.seed.is_some() || overrides.snapshot_iters.is_some() {
        return Err(CliError::Config(
            "--seed and --snapshot-iters need an [algorithm] section".into(),
        ));
    }
    Ok(file)
}

/// A built problem, keeping the least-squares type where the algorithm needs it.
pub enum BuiltProblem {
    Objective(ObjectiveProblem),
    LeastSquares(LeastSquaresProblem),
}

impl BuiltProblem {
    pub fn potential(&self) -> &dyn Potential {
        match self {
            Self::Objective(p) => p,
            Self::LeastSquares(p) => p,
        }
    }

    pub fn least_squares(&self) -> Option<&LeastSquaresProblem> {
        match self {
            Self::LeastSquares(p) => Some(p),
            Self::Objective(_) => None,
        }
    }
}

impl ExperimentFile {
    pub fn problem_section(&self) -> Result<&ProblemSection, CliError> {
        self.problem
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [problem] section".into()))
    }

    pub fn algorithm_section(&self) -> Result<&AlgorithmSection, CliError> {
        self.algorithm
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [algorithm] section".into()))
    }

    pub fn build_problem(&self) -> Result<BuiltProblem, CliError> {
        let section = self.problem_section()?;
        let dim = |default: usize| section.dim.unwrap_or(default);
        let fixed_dim = |name: &str, d: usize| match section.dim {
            Some(got) if got != d => Err(CliError::Config(format!(
                "{name} problem has dim {d}, config says {got}"
            ))),
            _ => Ok(()),
        };
        Ok(match section.name {
            ProblemName::Ackley => {
                BuiltProblem::Objective(ackley(dim(100), ACKLEY_A, ACKLEY_B, ACKLEY_C))
            }
            ProblemName::Quadratic => BuiltProblem::Objective(quadratic(dim(2))),
            ProblemName::Elliptic => {
                fixed_dim("elliptic", 2)?;
                BuiltProblem::LeastSquares(elliptic_bvp_problem())
            }
            ProblemName::Rosenbrock => {
                BuiltProblem::LeastSquares(rosenbrock_map_problem(dim(100))?)
            }
        })
    }

    pub fn fitness(&self) -> Result<FitnessSource, CliError> {
        let Some(f) = &self.fitness else {
            return Ok(FitnessSource::zero());
        };
        if !(f.scale.is_finite() && f.scale >= 0.0) {
            return Err(CliError::Config(format!(
                "fitness scale must be nonnegative, got {}",
                f.scale
            )));
        }
        let source = match f.kind {
            FitnessName::None => FitnessSource::zero(),
            FitnessName::NegV => {
                FitnessSource::new(rild::FitnessKind::NegPotential { scale: f.scale }, 0.0)
            }
            FitnessName::NegMisfit => {
                FitnessSource::new(rild::FitnessKind::NegMisfit { scale: f.scale }, 0.0)
            }
            FitnessName::ScaledNegMisfit => FitnessSource::scaled_neg_misfit(f.scale),
        };
        Ok(source.with_bound(f.bound))
    }

    pub fn initial_distribution(&self, dim: usize) -> Result<InitialDistribution, CliError> {
        let dist = match self.init.as_ref().filter(|i| !i.marginals.is_empty()) {
            Some(init) => match init.marginals.len() {
                1 => InitialDistribution::iid(init.marginals[0], dim),
                n if n == dim => InitialDistribution {
                    marginals: init.marginals.clone(),
                },
                n => {
                    return Err(CliError::Config(format!(
                        "init.marginals has {n} entries; expected 1 or the problem dimension {dim}"
                    )))
                }
            },
            None => match self.problem_section()?.name {
                ProblemName::Ackley => ackley_initial(dim),
                ProblemName::Elliptic => elliptic_initial(),
                ProblemName::Rosenbrock => rosenbrock_initial(dim),
                ProblemName::Quadratic => InitialDistribution::iid(
                    Marginal::Normal {
                        mean: 0.0,
                        std: 1.0,
                    },
                    dim,
                ),
            },
        };
        Ok(dist)
    }

    /// Seed used to draw the initial ensemble.
    pub fn init_seed(&self) -> Result<u64, CliError> {
        let alg_seed = self.algorithm_section()?.seed;
        Ok(self.init.as_ref().and_then(|i| i.seed).unwrap_or(alg_seed))
    }

    pub fn initial_ensemble(&self, dim: usize, particles: usize) -> Result<Ensemble, CliError> {
        Ok(self
            .initial_distribution(dim)?
            .sample(particles, self.init_seed()?)?)
    }
}
