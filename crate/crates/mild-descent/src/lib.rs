//! Sample-and-hold descent for optimal control of semilinear evolution
//! equations: mild-solution propagation, backward-cost probes, an exact
//! cost-increment quadrature, and a monotone outer loop, plus a spectral
//! heat semigroup on the circle and a matrix-exponential oracle for
//! validating the scheme against closed forms.

pub use nalgebra;

pub mod benchmark;
pub mod control;
pub mod descent;
pub mod error;
pub mod field;
pub mod flow;
pub mod grid;
pub mod increment;
pub mod problem;
pub mod spectral;
pub mod variational;

pub use benchmark::{build_problem, reproduce, BenchmarkRun, RDConfig};
pub use control::ControlSignal;
pub use descent::{
    pointwise_minimizer, project_ball, run_descent, sample_and_hold_update, DescentConfig,
    DescentReport, Halt,
};
pub use error::{Error, Result};
pub use field::StateField;
pub use flow::{evaluate_cost, exp_euler_step, propagate, terminal_state, Trajectory};
pub use grid::TimeGrid;
pub use increment::{exact_increment, reduced_hamiltonian, BackwardProbe, HamiltonianEval};
pub use problem::{Channel, ProblemSpec, SemigroupAction};
pub use spectral::{heat_apply, l2_distance_sq, SpectralHeatSemigroup, TorusGrid};
pub use variational::{
    dp_probe_vs_jvp, expm, increment_identity_residual, jvp, LinearOracle, MatrixSemigroup,
    OracleCost,
};
