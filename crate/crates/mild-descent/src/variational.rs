use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::field::StateField;
use crate::flow::{propagate, terminal_state};
use crate::grid::TimeGrid;
use crate::problem::{Channel, ProblemSpec, SemigroupAction};

/// Matrix exponential by Padé(13) scaling and squaring. The degree is fixed
/// (no order selection): these matrices are at most 4x4 and the squaring
/// count alone adapts to the norm.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    const THETA_13: f64 = 5.371920351148152;
    #[rustfmt::skip]
    const B: [f64; 14] = [
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ];
    let norm = a
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let a = a * 2f64.powi(-(s as i32));
    let d = a.nrows();
    let id = DMatrix::identity(d, d);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (B[13] * &a6 + B[11] * &a4 + B[9] * &a2)
        + B[7] * &a6
        + B[5] * &a4
        + B[3] * &a2
        + B[1] * &id;
    let u = &a * u_inner;
    let v = &a6 * (B[12] * &a6 + B[10] * &a4 + B[8] * &a2)
        + B[6] * &a6
        + B[4] * &a4
        + B[2] * &a2
        + B[0] * &id;
    let mut e = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .expect("Pade denominator is nonsingular after scaling");
    for _ in 0..s {
        e = &e * &e;
    }
    e
}

/// ∫₀^w e^{σA} dσ via the augmented-matrix identity: the top-right block of
/// exp(w·[[A, I], [0, 0]]).
pub fn expm_integral(a: &DMatrix<f64>, w: f64) -> DMatrix<f64> {
    let d = a.nrows();
    let mut aug = DMatrix::zeros(2 * d, 2 * d);
    aug.view_mut((0, 0), (d, d)).copy_from(a);
    aug.view_mut((0, d), (d, d))
        .copy_from(&DMatrix::identity(d, d));
    let e = expm(&(aug * w));
    e.view((0, d), (d, d)).into_owned()
}

/// Semigroup e^{τA} for a small dense generator, with the exponentials
/// cached per duration.
pub struct MatrixSemigroup {
    a_mat: DMatrix<f64>,
    cache: Mutex<HashMap<u64, Arc<DMatrix<f64>>>>,
}

impl MatrixSemigroup {
    pub fn new(a_mat: DMatrix<f64>) -> Self {
        MatrixSemigroup {
            a_mat,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn exp_of(&self, tau: f64) -> Arc<DMatrix<f64>> {
        let mut cache = self.cache.lock().expect("exp cache poisoned");
        cache
            .entry(tau.to_bits())
            .or_insert_with(|| Arc::new(expm(&(&self.a_mat * tau))))
            .clone()
    }
}

impl SemigroupAction for MatrixSemigroup {
    fn apply(&self, tau: f64, x: &StateField) -> StateField {
        let e = self.exp_of(tau);
        let v = DVector::from_column_slice(x.as_slice());
        StateField((e.as_ref() * v).as_slice().to_vec())
    }
}

/// Terminal cost for the linear test problem.
#[derive(Debug, Clone)]
pub enum OracleCost {
    /// ℓ(x) = cᵀx.
    Linear(DVector<f64>),
    /// ℓ(x) = ½ (x − target)ᵀ W (x − target), W symmetric PSD.
    Quadratic {
        weight: DMatrix<f64>,
        target: DVector<f64>,
    },
}

/// Finite-dimensional stand-in with closed-form flows: ẋ = Ax + Bu with a
/// linear or quadratic terminal cost. Everything the descent machinery
/// computes on it can be checked against matrix exponentials.
#[derive(Debug, Clone)]
pub struct LinearOracle {
    pub a_mat: DMatrix<f64>,
    pub b_mat: DMatrix<f64>,
    pub cost: OracleCost,
    pub alpha: f64,
    pub radius: f64,
    pub horizon: f64,
    pub x0: DVector<f64>,
}

impl LinearOracle {
    pub fn validate(&self) -> Result<()> {
        let d = self.a_mat.nrows();
        if d == 0 || d > 4 || self.a_mat.ncols() != d {
            return Err(Error::InvalidParameter {
                name: "a_mat",
                reason: format!("must be square with 1 <= d <= 4, got {}x{}", d, self.a_mat.ncols()),
            });
        }
        if self.b_mat.nrows() != d || self.b_mat.ncols() == 0 {
            return Err(Error::InvalidParameter {
                name: "b_mat",
                reason: format!(
                    "must be {}xm with m >= 1, got {}x{}",
                    d,
                    self.b_mat.nrows(),
                    self.b_mat.ncols()
                ),
            });
        }
        let cost_dim = match &self.cost {
            OracleCost::Linear(c) => c.len(),
            OracleCost::Quadratic { weight, target } => {
                if weight.nrows() != weight.ncols() || weight.nrows() != target.len() {
                    return Err(Error::InvalidParameter {
                        name: "cost",
                        reason: "quadratic weight/target dimensions disagree".into(),
                    });
                }
                target.len()
            }
        };
        if cost_dim != d || self.x0.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: if cost_dim != d { cost_dim } else { self.x0.len() },
            });
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a_mat.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b_mat.ncols()
    }

    /// Assembles the ProblemSpec: A becomes the semigroup generator, the
    /// columns of B become constant channel profiles with unit coefficient
    /// vectors, and the frozen derivatives are all zero (f ≡ 0, G constant).
    pub fn build(&self) -> Result<ProblemSpec> {
        self.validate()?;
        let d = self.state_dim();
        let m = self.control_dim();
        let channels = (0..m)
            .map(|j| {
                let profile = StateField(self.b_mat.column(j).iter().copied().collect());
                let mut coeff = vec![0.0; m];
                coeff[j] = 1.0;
                Channel::constant(coeff, profile)
            })
            .collect();
        let (cost_fn, grad_fn): (crate::problem::CostFn, crate::problem::CostGradFn) =
            match self.cost.clone() {
                OracleCost::Linear(c) => {
                    let c2 = c.clone();
                    (
                        Arc::new(move |x: &StateField| {
                            c.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum()
                        }),
                        Arc::new(move |_x: &StateField| {
                            StateField(c2.as_slice().to_vec())
                        }),
                    )
                }
                OracleCost::Quadratic { weight, target } => {
                    let (w2, t2) = (weight.clone(), target.clone());
                    (
                        Arc::new(move |x: &StateField| {
                            let e = DVector::from_column_slice(x.as_slice()) - &target;
                            0.5 * (&weight * &e).dot(&e)
                        }),
                        Arc::new(move |x: &StateField| {
                            let e = DVector::from_column_slice(x.as_slice()) - &t2;
                            StateField((&w2 * e).as_slice().to_vec())
                        }),
                    )
                }
            };
        Ok(ProblemSpec {
            state_dim: d,
            semigroup: Arc::new(MatrixSemigroup::new(self.a_mat.clone())),
            drift: Arc::new(move |_t, _x| StateField::zeros(d)),
            drift_jacobian: Some(Arc::new(move |_t, _x: &StateField, _dx: &StateField| {
                StateField::zeros(d)
            })),
            channels,
            terminal_cost: cost_fn,
            terminal_cost_grad: grad_fn,
            ip_weight: 1.0,
            alpha: self.alpha,
            radius: self.radius,
            horizon: self.horizon,
            x0: StateField(self.x0.as_slice().to_vec()),
        })
    }

    /// Exact terminal state by variation of constants, piece by piece:
    /// x(t_b) = e^{wA} x(t_a) + (∫₀^w e^{σA} dσ) B u. No time stepping.
    pub fn terminal_closed_form(&self, grid: &TimeGrid, u: &ControlSignal) -> Result<DVector<f64>> {
        self.validate()?;
        if u.terminal_node() != grid.n_steps() {
            return Err(Error::HorizonMismatch {
                left: u.terminal_node() as f64 * grid.dt(),
                right: grid.horizon(),
            });
        }
        let mut x = self.x0.clone();
        let bps = u.breakpoints();
        for (k, w) in bps.windows(2).enumerate() {
            let width = (w[1] - w[0]) as f64 * grid.dt();
            let e = expm(&(&self.a_mat * width));
            let phi = expm_integral(&self.a_mat, width);
            let u_k = DVector::from_column_slice(&u.values()[k]);
            x = &e * x + phi * (&self.b_mat * u_k);
        }
        Ok(x)
    }

    /// Exact cost at the closed-form terminal state (the control energy term
    /// is the same exact piecewise sum the solver uses).
    pub fn cost_closed_form(&self, grid: &TimeGrid, u: &ControlSignal) -> Result<f64> {
        let xt = self.terminal_closed_form(grid, u)?;
        let terminal = match &self.cost {
            OracleCost::Linear(c) => c.dot(&xt),
            OracleCost::Quadratic { weight, target } => {
                let e = xt - target;
                0.5 * (weight * &e).dot(&e)
            }
        };
        Ok(terminal + 0.5 * self.alpha * u.l2_time_integral_sq(grid))
    }
}

fn require_derivatives(problem: &ProblemSpec) -> Result<()> {
    if problem.drift_jacobian.is_none() {
        return Err(Error::MissingDerivative {
            field: "drift_jacobian",
        });
    }
    for ch in &problem.channels {
        if ch.coeff_jacobian.is_none() {
            return Err(Error::MissingDerivative {
                field: "channels.coeff_jacobian",
            });
        }
    }
    Ok(())
}

/// J_{s,T}(x)h: the variational (tangent) flow along the baseline
/// trajectory, integrated with the same exponential Euler stepper so it is
/// the exact Jacobian-vector product of the discrete flow map.
pub fn jvp(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    ubar: &ControlSignal,
    s: f64,
    x: &StateField,
    h: &StateField,
) -> Result<StateField> {
    let node = grid.node_of_time(s)?;
    let (_, mut js) = jvp_multi(problem, grid, ubar, node, x, std::slice::from_ref(h))?;
    Ok(js.pop().unwrap())
}

/// Shared-trajectory variant: one baseline propagation from (node, x), then
/// every direction advanced along it. Returns the baseline terminal state
/// and J_{s,T}(x)h for each h.
pub fn jvp_multi(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    ubar: &ControlSignal,
    node: usize,
    x: &StateField,
    hs: &[StateField],
) -> Result<(StateField, Vec<StateField>)> {
    require_derivatives(problem)?;
    let dfj = problem.drift_jacobian.as_ref().unwrap();
    let traj = propagate(problem, grid, ubar, node, x)?;
    let dt = grid.dt();
    let mut vs: Vec<StateField> = hs.to_vec();
    for i in node..grid.n_steps() {
        let t = grid.node_time(i);
        let xi = traj.state_at_node(i);
        let u = ubar.at_node(i);
        for v in &mut vs {
            let mut forced = v.clone();
            forced.axpy(dt, &dfj(t, xi, v));
            for ch in &problem.channels {
                let dg = (ch.coeff_jacobian.as_ref().unwrap())(t, xi, v);
                let scal: f64 = u.iter().zip(&dg).map(|(a, b)| a * b).sum();
                if scal != 0.0 {
                    forced.axpy(dt * scal, &ch.profile);
                }
            }
            *v = problem.semigroup.apply(dt, &forced);
        }
    }
    Ok((traj.terminal().clone(), vs))
}

/// Forward-difference of ℓ∘Φ̄_{t,T} in direction h versus the chain rule
/// ⟨∇ℓ(Φ̄_{t,T}(x)), J_{t,T}(x)h⟩. The pair agrees to O(ε) plus integrator
/// noise.
pub fn dp_probe_vs_jvp(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    ubar: &ControlSignal,
    t: f64,
    x: &StateField,
    h: &StateField,
    epsilon: f64,
) -> Result<(f64, f64)> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be > 0, got {epsilon}"),
        });
    }
    let node = grid.node_of_time(t)?;
    let (base_t, js) = jvp_multi(problem, grid, ubar, node, x, std::slice::from_ref(h))?;
    let mut xp = x.clone();
    xp.axpy(epsilon, h);
    let pert_t = terminal_state(problem, grid, ubar, node, &xp)?;
    let fd = ((problem.terminal_cost)(&pert_t) - (problem.terminal_cost)(&base_t)) / epsilon;
    let chain = problem.inner(&(problem.terminal_cost_grad)(&base_t), &js[0]);
    Ok((fd, chain))
}

/// |∫ (u−ū)ᵀ G′Dp̄(x_t) dt − (ℓ(x_T) − ℓ(x̄_T))| with Dp̄ evaluated through
/// the variational flow (no probes), isolating the time-quadrature error of
/// the increment identity. Same midpoint rule as the probe-based increment.
pub fn increment_identity_residual(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    ubar: &ControlSignal,
    u: &ControlSignal,
) -> Result<f64> {
    require_derivatives(problem)?;
    if u.terminal_node() != grid.n_steps() || ubar.terminal_node() != grid.n_steps() {
        return Err(Error::HorizonMismatch {
            left: u.terminal_node() as f64 * grid.dt(),
            right: grid.horizon(),
        });
    }
    let traj_u = propagate(problem, grid, u, 0, &problem.x0)?;
    let bar_terminal = terminal_state(problem, grid, ubar, 0, &problem.x0)?;

    let mut cells: Vec<usize> = ubar
        .breakpoints()
        .iter()
        .chain(u.breakpoints())
        .copied()
        .collect();
    cells.sort_unstable();
    cells.dedup();

    let dt = grid.dt();
    let m = problem.control_dim();
    let mut quad = 0.0;
    for w in cells.windows(2) {
        let (a, b) = (w[0], w[1]);
        let uv = u.at_node(a);
        let bv = ubar.at_node(a);
        let du: Vec<f64> = uv.iter().zip(bv).map(|(x, y)| x - y).collect();
        if du.iter().all(|&d| d == 0.0) {
            continue;
        }
        let mid = a + (b - a) / 2;
        let x_mid = traj_u.state_at_node(mid);
        let profiles: Vec<StateField> =
            problem.channels.iter().map(|c| c.profile.clone()).collect();
        let (term, js) = jvp_multi(problem, grid, ubar, mid, x_mid, &profiles)?;
        let grad_l = (problem.terminal_cost_grad)(&term);
        let t_mid = grid.node_time(mid);
        let mut grad = vec![0.0; m];
        for (j, ch) in problem.channels.iter().enumerate() {
            let xi = problem.inner(&grad_l, &js[j]);
            let g = (ch.coeff)(t_mid, x_mid);
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += xi * gi;
            }
        }
        let cross: f64 = du.iter().zip(&grad).map(|(d, g)| d * g).sum();
        quad += cross * (b - a) as f64 * dt;
    }
    let l_diff =
        (problem.terminal_cost)(traj_u.terminal()) - (problem.terminal_cost)(&bar_terminal);
    Ok((quad - l_diff).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frob_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    /// Plain series Σ Aᵏ/k! as the independent oracle (fine in f64 for the
    /// small, moderate-norm matrices used here).
    fn expm_series(a: &DMatrix<f64>) -> DMatrix<f64> {
        let d = a.nrows();
        let mut sum = DMatrix::identity(d, d);
        let mut term = DMatrix::identity(d, d);
        for k in 1..120 {
            term = (&term * a) / k as f64;
            sum += &term;
            if term.norm() < 1e-22 * sum.norm() {
                break;
            }
        }
        sum
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = DMatrix::zeros(3, 3);
        assert_eq!(expm(&z), DMatrix::identity(3, 3));
    }

    #[test]
    fn expm_matches_diagonal_closed_form() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, -1.2, 2.0]));
        let e = expm(&a);
        for (i, v) in [0.3f64, -1.2, 2.0].iter().enumerate() {
            assert!((e[(i, i)] - v.exp()).abs() <= 1e-12 * v.exp());
        }
    }

    #[test]
    fn expm_matches_nilpotent_and_rotation_closed_forms() {
        let n = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(frob_rel(&expm(&n), &want) <= 1e-14);

        // Norm 20 forces several squarings.
        let th = 20.0f64;
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -th, th, 0.0]);
        let want = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        assert!(frob_rel(&expm(&r), &want) <= 1e-12);
    }

    #[test]
    fn expm_matches_series_on_dense_matrix() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.3, -0.7, 0.2, 0.0, 1.1, 0.4, -0.3, 0.5, -0.2, 0.6, -0.8, 0.9, 0.1, -0.5, 0.7,
                0.2,
            ],
        );
        assert!(frob_rel(&expm(&a), &expm_series(&a)) <= 1e-12);
        let two = expm(&(&a * 2.0));
        let squared = expm(&a) * expm(&a);
        assert!(frob_rel(&squared, &two) <= 1e-12);
    }

    #[test]
    fn expm_integral_matches_diagonal_closed_form() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -2.0]));
        let phi = expm_integral(&a, 0.7);
        let want0 = (0.5f64 * 0.7).exp_m1() / 0.5;
        let want1 = (-2.0f64 * 0.7).exp_m1() / -2.0;
        assert!((phi[(0, 0)] - want0).abs() <= 1e-13);
        assert!((phi[(1, 1)] - want1).abs() <= 1e-13);
        assert!(phi[(0, 1)].abs() <= 1e-15);
    }

    fn small_oracle() -> LinearOracle {
        LinearOracle {
            a_mat: DMatrix::from_row_slice(2, 2, &[0.2, -0.1, 0.05, -0.3]),
            b_mat: DMatrix::from_row_slice(2, 1, &[0.5, 0.3]),
            cost: OracleCost::Linear(DVector::from_vec(vec![0.4, -0.2])),
            alpha: 0.2,
            radius: 5.0,
            horizon: 1.0,
            x0: DVector::from_vec(vec![0.3, -0.1]),
        }
    }

    #[test]
    fn oracle_validation_catches_bad_shapes() {
        let mut o = small_oracle();
        o.b_mat = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(o.validate().is_err());
        let mut o = small_oracle();
        o.a_mat = DMatrix::zeros(5, 5);
        assert!(o.validate().is_err());
    }

    #[test]
    fn jvp_at_the_start_node_with_zero_span_is_h() {
        let o = small_oracle();
        let p = o.build().unwrap();
        let grid = TimeGrid::new(1.0, 4, 0.25).unwrap();
        let ubar = ControlSignal::zero(&grid, 1);
        let h = StateField(vec![0.7, -0.4]);
        let j = jvp(&p, &grid, &ubar, 1.0, &StateField(vec![0.1, 0.2]), &h).unwrap();
        assert_eq!(j, h); // s = T: no steps taken
    }

    #[test]
    fn jvp_reduces_to_matrix_exponential_on_linear_problem() {
        let o = small_oracle();
        let p = o.build().unwrap();
        let grid = TimeGrid::new(1.0, 10, 1e-3).unwrap();
        let ubar = ControlSignal::uniform(&grid, (0..10).map(|k| vec![0.1 * k as f64]).collect())
            .unwrap();
        let h = StateField(vec![1.0, -2.0]);
        let j = jvp(&p, &grid, &ubar, 0.0, &StateField(vec![0.3, -0.1]), &h).unwrap();
        // Semigroup steps compose to e^{TA} independent of the control.
        let want = expm(&o.a_mat) * DVector::from_vec(vec![1.0, -2.0]);
        for (a, b) in j.as_slice().iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn jvp_is_linear_in_the_direction() {
        let o = small_oracle();
        let p = o.build().unwrap();
        let grid = TimeGrid::new(1.0, 5, 0.05).unwrap();
        let ubar = ControlSignal::zero(&grid, 1);
        let x = StateField(vec![0.2, 0.4]);
        let h1 = StateField(vec![1.0, 0.0]);
        let h2 = StateField(vec![0.0, 1.0]);
        let mut combo = h1.clone();
        combo.scale(2.0);
        combo.axpy(-3.0, &h2);
        let j1 = jvp(&p, &grid, &ubar, 0.0, &x, &h1).unwrap();
        let j2 = jvp(&p, &grid, &ubar, 0.0, &x, &h2).unwrap();
        let jc = jvp(&p, &grid, &ubar, 0.0, &x, &combo).unwrap();
        for i in 0..2 {
            let lin = 2.0 * j1.as_slice()[i] - 3.0 * j2.as_slice()[i];
            assert!((jc.as_slice()[i] - lin).abs() <= 1e-12);
        }
    }

    #[test]
    fn missing_derivatives_are_reported_by_field_name() {
        let o = small_oracle();
        let mut p = o.build().unwrap();
        p.drift_jacobian = None;
        let grid = TimeGrid::new(1.0, 4, 0.25).unwrap();
        let ubar = ControlSignal::zero(&grid, 1);
        let h = StateField(vec![1.0, 0.0]);
        match jvp(&p, &grid, &ubar, 0.0, &StateField(vec![0.0, 0.0]), &h) {
            Err(Error::MissingDerivative { field }) => assert_eq!(field, "drift_jacobian"),
            other => panic!("expected MissingDerivative, got {other:?}"),
        }

        let mut p = o.build().unwrap();
        p.channels[0].coeff_jacobian = None;
        match jvp(&p, &grid, &ubar, 0.0, &StateField(vec![0.0, 0.0]), &h) {
            Err(Error::MissingDerivative { field }) => {
                assert_eq!(field, "channels.coeff_jacobian")
            }
            other => panic!("expected MissingDerivative, got {other:?}"),
        }
    }

    #[test]
    fn probe_and_chain_rule_agree_exactly_for_linear_cost() {
        let o = small_oracle();
        let p = o.build().unwrap();
        let grid = TimeGrid::new(1.0, 10, 1e-2).unwrap();
        let ubar =
            ControlSignal::uniform(&grid, (0..10).map(|k| vec![0.2 - 0.03 * k as f64]).collect())
                .unwrap();
        let x = StateField(vec![0.5, 0.1]);
        let h = StateField(vec![0.3, 0.8]);
        let (fd, chain) =
            dp_probe_vs_jvp(&p, &grid, &ubar, 0.2, &x, &h, 1e-3).unwrap();
        // Linear cost + affine flow: the forward difference is exact.
        assert!((fd - chain).abs() <= 1e-10 * chain.abs().max(1.0));
    }

    #[test]
    fn identity_residual_is_zero_for_equal_controls() {
        let o = small_oracle();
        let p = o.build().unwrap();
        let grid = TimeGrid::new(1.0, 5, 1e-2).unwrap();
        let u = ControlSignal::uniform(&grid, (0..5).map(|k| vec![0.1 * k as f64]).collect())
            .unwrap();
        let r = increment_identity_residual(&p, &grid, &u, &u).unwrap();
        assert_eq!(r, 0.0);
    }
}
