use std::sync::Arc;

use crate::field::StateField;

/// Action of the linear part's semigroup S_tau on states.
///
/// Laws: apply(0, x) = x exactly; apply(a+b, x) = apply(a, apply(b, x)) up to
/// roundoff for exact-multiplier implementations.
pub trait SemigroupAction: Send + Sync {
    fn apply(&self, tau: f64, x: &StateField) -> StateField;
}

pub type DriftFn = Arc<dyn Fn(f64, &StateField) -> StateField + Send + Sync>;
/// Directional derivative action delta -> Df_t(x)[delta].
pub type DriftJacobianFn = Arc<dyn Fn(f64, &StateField, &StateField) -> StateField + Send + Sync>;
pub type CoeffFn = Arc<dyn Fn(f64, &StateField) -> Vec<f64> + Send + Sync>;
/// Directional derivative action delta -> Dg^j_t(x)[delta] (an m-vector).
pub type CoeffJacobianFn = Arc<dyn Fn(f64, &StateField, &StateField) -> Vec<f64> + Send + Sync>;
pub type CostFn = Arc<dyn Fn(&StateField) -> f64 + Send + Sync>;
pub type CostGradFn = Arc<dyn Fn(&StateField) -> StateField + Send + Sync>;

/// One control channel of G_t(x)u = sum_j (u' g^j_t(x)) h^j: a coefficient
/// map g^j into control space and a fixed spatial direction h^j.
#[derive(Clone)]
pub struct Channel {
    pub coeff: CoeffFn,
    pub profile: StateField,
    /// Required only by the variational checks; `None` elsewhere is fine.
    pub coeff_jacobian: Option<CoeffJacobianFn>,
}

impl Channel {
    /// Channel with a coefficient map that is constant in (t, x), the common
    /// case of fixed actuators. Its Jacobian is exactly zero.
    pub fn constant(coeff: Vec<f64>, profile: StateField) -> Self {
        let m = coeff.len();
        Channel {
            coeff: Arc::new(move |_, _| coeff.clone()),
            profile,
            coeff_jacobian: Some(Arc::new(move |_, _, _| vec![0.0; m])),
        }
    }
}

/// Full description of one control problem: semigroup, drift, channels,
/// terminal cost with its gradient, regularization alpha, control radius R,
/// horizon T and initial state.
#[derive(Clone)]
pub struct ProblemSpec {
    pub state_dim: usize,
    pub semigroup: Arc<dyn SemigroupAction>,
    pub drift: DriftFn,
    /// Required only by the variational checks.
    pub drift_jacobian: Option<DriftJacobianFn>,
    pub channels: Vec<Channel>,
    pub terminal_cost: CostFn,
    /// Gradient of the terminal cost as a state-space element, identified
    /// through the discrete inner product `ip_weight * <·,·>`.
    pub terminal_cost_grad: CostGradFn,
    /// Quadrature weight of the discrete inner product (2π/n on the torus,
    /// 1 for abstract ODE problems).
    pub ip_weight: f64,
    pub alpha: f64,
    pub radius: f64,
    pub horizon: f64,
    pub x0: StateField,
}

impl ProblemSpec {
    /// Number of control channels m.
    pub fn control_dim(&self) -> usize {
        self.channels.len()
    }

    /// Discrete inner product identifying gradients with states.
    pub fn inner(&self, x: &StateField, y: &StateField) -> f64 {
        self.ip_weight * x.dot(y)
    }

    /// Validates invariants that cannot be encoded in the type.
    pub fn validate(&self) -> crate::error::Result<()> {
        use crate::error::Error;
        if self.channels.is_empty() {
            return Err(Error::InvalidParameter {
                name: "channels",
                reason: "at least one control channel is required".into(),
            });
        }
        for (j, ch) in self.channels.iter().enumerate() {
            if ch.profile.len() != self.state_dim {
                return Err(Error::InvalidParameter {
                    name: "channels",
                    reason: format!(
                        "profile h^{j} has dimension {}, state_dim is {}",
                        ch.profile.len(),
                        self.state_dim
                    ),
                });
            }
        }
        if self.x0.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim,
                got: self.x0.len(),
            });
        }
        if self.alpha < 0.0 {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be >= 0, got {}", self.alpha),
            });
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidParameter {
                name: "radius",
                reason: format!("must be > 0, got {}", self.radius),
            });
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be > 0, got {}", self.horizon),
            });
        }
        Ok(())
    }
}
