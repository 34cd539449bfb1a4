//! Potentials to minimize and the fitness sources that reweight particles.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type ScalarFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
pub type VectorFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
pub type MatrixFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// One evaluation of a potential at a point.
///
/// Least-squares problems also hand back the forward-map value so that fitness
/// sources and derivative-free drifts can reuse it without re-evaluating `G`.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub potential: f64,
    pub forward: Option<DVector<f64>>,
}

/// A potential `V: R^d → R` that the particle algorithms can drive.
pub trait Potential: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Evaluates `V(x)`; counts as one evaluation in run records.
    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation>;

    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.evaluate(x)?.potential)
    }

    fn has_gradient(&self) -> bool;

    /// `∇V(x)`; a [`Error::Config`] when the problem carries no gradient.
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    fn as_least_squares(&self) -> Option<&LeastSquaresProblem> {
        None
    }
}

fn check_input(x: &DVector<f64>, dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Shape(format!(
            "point has dimension {}, expected {dim}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("non-finite input point".into()));
    }
    Ok(())
}

/// A plain potential with an optional analytic gradient.
#[derive(Clone)]
pub struct ObjectiveProblem {
    name: String,
    dim: usize,
    potential: Arc<ScalarFn>,
    gradient: Option<Arc<VectorFn>>,
}

impl ObjectiveProblem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        potential: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            potential: Arc::new(potential),
            gradient: None,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }
}

impl fmt::Debug for ObjectiveProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("has_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl Potential for ObjectiveProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
        check_input(x, self.dim)?;
        let potential = (self.potential)(x);
        if !potential.is_finite() {
            return Err(Error::Evaluation(format!(
                "{}: V(x) = {potential}",
                self.name
            )));
        }
        Ok(Evaluation {
            potential,
            forward: None,
        })
    }

    fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let grad = self
            .gradient
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{} has no gradient evaluator", self.name)))?;
        check_input(x, self.dim)?;
        Ok(grad(x))
    }
}

/// `V(x) = ½‖y − G(x)‖²_Γ + ½‖x‖²_{Γ₀}` for a forward map `G: R^d → R^k`.
///
/// Both covariances are factored once at construction; every `Γ⁻¹`, `Γ₀⁻¹`
/// application goes through the cached Cholesky factors.
#[derive(Clone)]
pub struct LeastSquaresProblem {
    name: String,
    dim: usize,
    forward: Arc<VectorFn>,
    jacobian: Option<Arc<MatrixFn>>,
    data: DVector<f64>,
    obs_chol: Cholesky<f64, Dyn>,
    prior_chol: Cholesky<f64, Dyn>,
}

impl LeastSquaresProblem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        forward: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        data: DVector<f64>,
        obs_cov: DMatrix<f64>,
        prior_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let k = data.len();
        if obs_cov.shape() != (k, k) {
            return Err(Error::Shape(format!(
                "observation covariance is {:?}, expected {k}x{k}",
                obs_cov.shape()
            )));
        }
        if prior_cov.shape() != (dim, dim) {
            return Err(Error::Shape(format!(
                "prior covariance is {:?}, expected {dim}x{dim}",
                prior_cov.shape()
            )));
        }
        let obs_chol = Cholesky::new(obs_cov).ok_or(Error::NotPositiveDefinite("Γ"))?;
        let prior_chol = Cholesky::new(prior_cov).ok_or(Error::NotPositiveDefinite("Γ₀"))?;
        Ok(Self {
            name: name.into(),
            dim,
            forward: Arc::new(forward),
            jacobian: None,
            data,
            obs_chol,
            prior_chol,
        })
    }

    /// Attaches the analytic Jacobian `DG(x)` (a `k × d` matrix).
    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn data_dim(&self) -> usize {
        self.data.len()
    }

    /// `G(x)`, rejecting non-finite outputs.
    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_input(x, self.dim)?;
        let g = (self.forward)(x);
        if g.len() != self.data.len() {
            return Err(Error::Shape(format!(
                "forward map returned {} values, data has {}",
                g.len(),
                self.data.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!(
                "{}: non-finite forward map output",
                self.name
            )));
        }
        Ok(g)
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let jac = self
            .jacobian
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{} has no Jacobian", self.name)))?;
        check_input(x, self.dim)?;
        Ok(jac(x))
    }

    /// `Γ⁻¹ r`.
    pub fn apply_obs_inverse(&self, r: &DVector<f64>) -> DVector<f64> {
        self.obs_chol.solve(r)
    }

    /// `Γ₀⁻¹ x`.
    pub fn apply_prior_inverse(&self, x: &DVector<f64>) -> DVector<f64> {
        self.prior_chol.solve(x)
    }

    /// `‖G(x) − y‖²_Γ` from an already computed forward value.
    pub fn weighted_misfit(&self, g: &DVector<f64>) -> f64 {
        let r = g - &self.data;
        r.dot(&self.apply_obs_inverse(&r))
    }

    /// Plain Euclidean `‖G(x) − y‖²`.
    pub fn misfit(&self, g: &DVector<f64>) -> f64 {
        (g - &self.data).norm_squared()
    }

    /// The potential given `x` and `G(x)`.
    pub fn potential_from_forward(&self, x: &DVector<f64>, g: &DVector<f64>) -> f64 {
        0.5 * self.weighted_misfit(g) + 0.5 * x.dot(&self.apply_prior_inverse(x))
    }

    pub fn evaluate_potential(&self, x: &DVector<f64>) -> Result<f64> {
        let g = self.forward(x)?;
        Ok(self.potential_from_forward(x, &g))
    }
}

impl fmt::Debug for LeastSquaresProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LeastSquaresProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("data", &self.data)
            .field("has_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl Potential for LeastSquaresProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
        let g = self.forward(x)?;
        let potential = self.potential_from_forward(x, &g);
        if !potential.is_finite() {
            return Err(Error::Evaluation(format!(
                "{}: V(x) = {potential}",
                self.name
            )));
        }
        Ok(Evaluation {
            potential,
            forward: Some(g),
        })
    }

    fn has_gradient(&self) -> bool {
        self.jacobian.is_some()
    }

    /// `∇V = DGᵀ Γ⁻¹ (G(x) − y) + Γ₀⁻¹ x`.
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let jac = self.jacobian(x)?;
        let g = self.forward(x)?;
        let r = self.apply_obs_inverse(&(g - &self.data));
        Ok(jac.transpose() * r + self.apply_prior_inverse(x))
    }

    fn as_least_squares(&self) -> Option<&LeastSquaresProblem> {
        Some(self)
    }
}

/// How a [`FitnessSource`] computes `W(x)`.
#[derive(Clone)]
pub enum FitnessKind {
    /// `W ≡ 0`: no reweighting.
    Zero,
    /// `W = −c·V(x)`.
    NegPotential {
        scale: f64,
    },
    /// `W = −c·‖G(x) − y‖²_Γ`.
    NegMisfit {
        scale: f64,
    },
    /// `W = −c·‖G(x) − y‖²` with the unweighted Euclidean norm.
    ScaledNegMisfit {
        scale: f64,
    },
    Custom(Arc<ScalarFn>),
}

impl fmt::Debug for FitnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::NegPotential { scale } => write!(f, "NegPotential({scale})"),
            Self::NegMisfit { scale } => write!(f, "NegMisfit({scale})"),
            Self::ScaledNegMisfit { scale } => write!(f, "ScaledNegMisfit({scale})"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// The source term `W`, upper-bounded by a declared constant `A`.
#[derive(Clone, Debug)]
pub struct FitnessSource {
    kind: FitnessKind,
    bound: f64,
}

impl FitnessSource {
    pub fn new(kind: FitnessKind, bound: f64) -> Self {
        Self { kind, bound }
    }

    pub fn zero() -> Self {
        Self::new(FitnessKind::Zero, 0.0)
    }

    /// `W = −V`; the bound `A = 0` holds for nonnegative potentials.
    pub fn neg_potential() -> Self {
        Self::new(FitnessKind::NegPotential { scale: 1.0 }, 0.0)
    }

    pub fn neg_misfit() -> Self {
        Self::new(FitnessKind::NegMisfit { scale: 1.0 }, 0.0)
    }

    pub fn scaled_neg_misfit(scale: f64) -> Self {
        Self::new(FitnessKind::ScaledNegMisfit { scale }, 0.0)
    }

    pub fn custom(w: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static, bound: f64) -> Self {
        Self::new(FitnessKind::Custom(Arc::new(w)), bound)
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    pub fn kind(&self) -> &FitnessKind {
        &self.kind
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, FitnessKind::Zero)
    }

    /// Computes `W(x)` from a completed evaluation, enforcing `W ≤ A`.
    pub fn evaluate(
        &self,
        problem: &dyn Potential,
        x: &DVector<f64>,
        eval: &Evaluation,
    ) -> Result<f64> {
        let value = match &self.kind {
            FitnessKind::Zero => 0.0,
            FitnessKind::NegPotential { scale } => -scale * eval.potential,
            FitnessKind::NegMisfit { scale } | FitnessKind::ScaledNegMisfit { scale } => {
                let ls = problem.as_least_squares().ok_or_else(|| {
                    Error::Config("misfit fitness requires a least-squares problem".into())
                })?;
                let recomputed;
                let g = match &eval.forward {
                    Some(g) => g,
                    None => {
                        recomputed = ls.forward(x)?;
                        &recomputed
                    }
                };
                let misfit = if matches!(self.kind, FitnessKind::NegMisfit { .. }) {
                    ls.weighted_misfit(g)
                } else {
                    ls.misfit(g)
                };
                -scale * misfit
            }
            FitnessKind::Custom(w) => w(x),
        };
        if !value.is_finite() {
            return Err(Error::Evaluation(format!("fitness W(x) = {value}")));
        }
        if value > self.bound {
            return Err(Error::FitnessBound {
                value,
                bound: self.bound,
            });
        }
        Ok(value)
    }
}
