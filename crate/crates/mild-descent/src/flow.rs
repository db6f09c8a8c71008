use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::field::StateField;
use crate::grid::TimeGrid;
use crate::problem::ProblemSpec;

/// Sup-norm bound beyond which the integrator reports divergence.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Discrete mild solution on [t_s, T]: states at every fine node, the first
/// one being the supplied initial state bit-for-bit.
#[derive(Debug, Clone)]
pub struct Trajectory {
    start_node: usize,
    states: Vec<StateField>,
}

impl Trajectory {
    pub fn start_node(&self) -> usize {
        self.start_node
    }

    /// State at fine node i (i >= start_node).
    pub fn state_at_node(&self, i: usize) -> &StateField {
        &self.states[i - self.start_node]
    }

    pub fn terminal(&self) -> &StateField {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn states(&self) -> &[StateField] {
        &self.states
    }
}

/// One exponential Euler step from (t, x) with control value `u_val`:
///
///   x' = S_dt(x) + dt * S_dt(f_t(x) + sum_j (u' g^j_t(x)) h^j)
///
/// computed as S_dt(x + dt * forcing) - the same operator by linearity, one
/// transform instead of two.
pub fn exp_euler_step(
    problem: &ProblemSpec,
    dt: f64,
    t: f64,
    x: &StateField,
    u_val: &[f64],
) -> StateField {
    let mut forced = x.clone();
    let drift = (problem.drift)(t, x);
    forced.axpy(dt, &drift);
    for ch in &problem.channels {
        let g = (ch.coeff)(t, x);
        debug_assert_eq!(g.len(), u_val.len());
        let c: f64 = g.iter().zip(u_val).map(|(a, b)| a * b).sum();
        if c != 0.0 {
            forced.axpy(dt * c, &ch.profile);
        }
    }
    problem.semigroup.apply(dt, &forced)
}

fn check_admissible(problem: &ProblemSpec, u: &ControlSignal) -> Result<()> {
    if u.dim() != problem.control_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.control_dim(),
            got: u.dim(),
        });
    }
    // Slack covers roundoff in projected values whose norm is exactly R.
    let cap = problem.radius * (1.0 + 1e-9);
    for (k, v) in u.values().iter().enumerate() {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > cap {
            return Err(Error::ControlOutOfBall {
                interval: k,
                norm,
                radius: problem.radius,
            });
        }
    }
    Ok(())
}

/// Integrates the mild equation from (t_s, xs) to T under `u`, recording the
/// state at every fine node. Deterministic for identical inputs; restarting
/// from any recorded node reproduces the remaining states bit-for-bit.
pub fn propagate(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    u: &ControlSignal,
    s_node: usize,
    xs: &StateField,
) -> Result<Trajectory> {
    if xs.len() != problem.state_dim {
        return Err(Error::DimensionMismatch {
            expected: problem.state_dim,
            got: xs.len(),
        });
    }
    if s_node > grid.n_steps() {
        return Err(Error::NotGridAligned {
            t: s_node as f64 * grid.dt(),
            dt: grid.dt(),
        });
    }
    check_admissible(problem, u)?;
    let n = grid.n_steps();
    let mut states = Vec::with_capacity(n - s_node + 1);
    states.push(xs.clone());
    let dt = grid.dt();
    for i in s_node..n {
        let t = grid.node_time(i);
        let x = states.last().unwrap();
        let next = exp_euler_step(problem, dt, t, x, u.at_node(i));
        let norm = next.sup_norm();
        if !norm.is_finite() || norm > DIVERGENCE_BOUND {
            return Err(Error::Diverged {
                t: grid.node_time(i + 1),
                norm,
            });
        }
        states.push(next);
    }
    Ok(Trajectory {
        start_node: s_node,
        states,
    })
}

/// Terminal state of the flow from (t_s, xs) without keeping the path.
pub fn terminal_state(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    u: &ControlSignal,
    s_node: usize,
    xs: &StateField,
) -> Result<StateField> {
    if xs.len() != problem.state_dim {
        return Err(Error::DimensionMismatch {
            expected: problem.state_dim,
            got: xs.len(),
        });
    }
    check_admissible(problem, u)?;
    let dt = grid.dt();
    let mut x = xs.clone();
    for i in s_node..grid.n_steps() {
        let t = grid.node_time(i);
        x = exp_euler_step(problem, dt, t, &x, u.at_node(i));
        let norm = x.sup_norm();
        if !norm.is_finite() || norm > DIVERGENCE_BOUND {
            return Err(Error::Diverged {
                t: grid.node_time(i + 1),
                norm,
            });
        }
    }
    Ok(x)
}

/// Flows `steps` steps from (node s, xs) under one constant control value.
/// Same stepping and divergence policy as `propagate`.
pub fn advance_segment(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    s_node: usize,
    steps: usize,
    xs: &StateField,
    u_val: &[f64],
) -> Result<StateField> {
    let norm_u: f64 = u_val.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_u > problem.radius * (1.0 + 1e-9) {
        return Err(Error::ControlOutOfBall {
            interval: grid.interval_of_node(s_node),
            norm: norm_u,
            radius: problem.radius,
        });
    }
    let dt = grid.dt();
    let mut x = xs.clone();
    for i in s_node..s_node + steps {
        x = exp_euler_step(problem, dt, grid.node_time(i), &x, u_val);
        let norm = x.sup_norm();
        if !norm.is_finite() || norm > DIVERGENCE_BOUND {
            return Err(Error::Diverged {
                t: grid.node_time(i + 1),
                norm,
            });
        }
    }
    Ok(x)
}

/// Full cost l(x_T^u) + (alpha/2) * integral |u|^2, the control term summed
/// exactly over the constant pieces.
pub fn evaluate_cost(problem: &ProblemSpec, grid: &TimeGrid, u: &ControlSignal) -> Result<f64> {
    Ok(cost_and_terminal(problem, grid, u)?.0)
}

/// Cost plus the terminal state it was evaluated at (one propagation).
pub fn cost_and_terminal(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    u: &ControlSignal,
) -> Result<(f64, StateField)> {
    let x_t = terminal_state(problem, grid, u, 0, &problem.x0)?;
    let cost = (problem.terminal_cost)(&x_t) + 0.5 * problem.alpha * u.l2_time_integral_sq(grid);
    Ok((cost, x_t))
}
