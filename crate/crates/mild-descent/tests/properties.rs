//! Randomized invariants: projection geometry, pointwise optimality of the
//! control update, grid/control bookkeeping, and semigroup structure.

use mild_descent::{
    exact_increment, pointwise_minimizer, project_ball, ControlSignal, SemigroupAction,
    SpectralHeatSemigroup, StateField, TimeGrid, TorusGrid,
};
use proptest::prelude::*;

fn ball_point(raw: Vec<f64>, radius: f64) -> Vec<f64> {
    project_ball(radius, &raw)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn projection_lands_in_the_ball_and_is_idempotent(
        v in proptest::collection::vec(-50.0f64..50.0, 1..5),
        radius in 0.1f64..10.0,
    ) {
        let p = project_ball(radius, &v);
        prop_assert!(norm(&p) <= radius * (1.0 + 1e-12));
        let pp = project_ball(radius, &p);
        for (a, b) in p.iter().zip(&pp) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        // Direction is preserved: p = c v for some c in [0, 1].
        if norm(&v) > 0.0 {
            let c = norm(&p) / norm(&v);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
            for (a, b) in p.iter().zip(&v) {
                prop_assert!((a - c * b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn projection_fixes_interior_points(
        v in proptest::collection::vec(-1.0f64..1.0, 1..5),
    ) {
        let radius = norm(&v) + 0.5;
        prop_assert_eq!(project_ball(radius, &v), v);
    }

    #[test]
    fn minimizer_beats_sampled_competitors(
        grad in proptest::collection::vec(-5.0f64..5.0, 1..4),
        alpha in prop_oneof![Just(0.0f64), 0.01f64..2.0],
        radius in 0.1f64..5.0,
        raw in proptest::collection::vec(-10.0f64..10.0, 1..4),
    ) {
        let m = grad.len();
        let h = |u: &[f64]| -> f64 {
            0.5 * alpha * u.iter().map(|x| x * x).sum::<f64>()
                + u.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>()
        };
        let star = pointwise_minimizer(alpha, radius, &grad);
        prop_assert!(norm(&star) <= radius * (1.0 + 1e-12));
        let candidate = ball_point(raw[..raw.len().min(m)].to_vec(), radius);
        if candidate.len() == m {
            let scale = 1.0 + h(&candidate).abs();
            prop_assert!(h(&star) <= h(&candidate) + 1e-12 * scale,
                "H(u*) = {} > H(v) = {}", h(&star), h(&candidate));
        }
    }

    #[test]
    fn grid_times_and_nodes_round_trip(
        horizon in 0.5f64..5.0,
        n_intervals in 1usize..20,
        spi_target in 1usize..50,
    ) {
        let dt_target = horizon / (n_intervals * spi_target) as f64;
        let grid = TimeGrid::new(horizon, n_intervals, dt_target).unwrap();
        prop_assert_eq!(grid.n_steps(), grid.n_intervals() * grid.steps_per_interval());
        for i in (0..=grid.n_steps()).step_by(1 + grid.n_steps() / 17) {
            prop_assert_eq!(grid.node_of_time(grid.node_time(i)).unwrap(), i);
        }
        for k in 0..=n_intervals {
            prop_assert_eq!(grid.breakpoint_node(k), k * grid.steps_per_interval());
        }
        let end = grid.node_time(grid.n_steps());
        prop_assert!((end - horizon).abs() <= 1e-12 * horizon.max(1.0));
    }

    #[test]
    fn concat_routes_each_node_to_its_source(
        seed_vals in proptest::collection::vec(-3.0f64..3.0, 8),
        s_interval in 0usize..=4,
    ) {
        let grid = TimeGrid::new(1.0, 4, 0.05).unwrap();
        let head: Vec<Vec<f64>> = seed_vals[..4].iter().map(|v| vec![*v]).collect();
        let tail: Vec<Vec<f64>> = seed_vals[4..].iter().map(|v| vec![*v]).collect();
        let u = ControlSignal::uniform(&grid, head).unwrap();
        let baseline = ControlSignal::uniform(&grid, tail).unwrap();
        let s_node = grid.breakpoint_node(s_interval);
        let glued = u.concat(&baseline, s_node).unwrap();
        for i in 0..grid.n_steps() {
            let expect = if i < s_node { u.at_node(i) } else { baseline.at_node(i) };
            prop_assert_eq!(glued.at_node(i), expect, "node {}", i);
        }
    }

    #[test]
    fn heat_semigroup_contracts_and_composes(
        vals in proptest::collection::vec(-2.0f64..2.0, 16),
        t1 in 0.0f64..1.5,
        t2 in 0.0f64..1.5,
    ) {
        let torus = TorusGrid::new(16).unwrap();
        let sg = SpectralHeatSemigroup::new(&torus, 0.1).unwrap();
        let x = StateField(vals);
        let l2 = |f: &StateField| (torus.weight() * f.dot(f)).sqrt();

        let fused = sg.apply(t1 + t2, &x);
        let two_step = sg.apply(t2, &sg.apply(t1, &x));
        prop_assert!(l2(&fused) <= l2(&x) * (1.0 + 1e-12));
        let mut diff = fused.clone();
        diff.axpy(-1.0, &two_step);
        prop_assert!(l2(&diff) <= 1e-10 * (1.0 + l2(&x)));

        // k = 0 passes untouched: diffusion conserves total mass.
        let mean = |f: &StateField| f.as_slice().iter().sum::<f64>() / 16.0;
        prop_assert!((mean(&fused) - mean(&x)).abs() <= 1e-12 * (1.0 + mean(&x).abs()));
    }

    #[test]
    fn increment_from_a_control_to_itself_is_zero(
        interior in proptest::sample::subsequence((1usize..20).collect::<Vec<_>>(), 0..4),
        raw_vals in proptest::collection::vec(-2.0f64..2.0, 5),
    ) {
        let grid = TimeGrid::new(1.0, 4, 0.05).unwrap();
        let mut breakpoints = vec![0usize];
        breakpoints.extend(interior.iter().copied());
        breakpoints.push(20);
        breakpoints.dedup();
        let pieces = breakpoints.len() - 1;
        let values: Vec<Vec<f64>> = raw_vals[..pieces].iter().map(|v| vec![*v]).collect();
        let u = ControlSignal::new(&grid, breakpoints, values).unwrap();

        let oracle = mild_descent::LinearOracle {
            a_mat: mild_descent::nalgebra::DMatrix::from_row_slice(1, 1, &[0.2]),
            b_mat: mild_descent::nalgebra::DMatrix::from_row_slice(1, 1, &[1.0]),
            cost: mild_descent::OracleCost::Linear(
                mild_descent::nalgebra::DVector::from_row_slice(&[1.0]),
            ),
            alpha: 0.3,
            radius: 5.0,
            horizon: 1.0,
            x0: mild_descent::nalgebra::DVector::from_row_slice(&[0.5]),
        };
        let problem = oracle.build().unwrap();
        prop_assert_eq!(exact_increment(&problem, &grid, &u, &u, 1e-3).unwrap(), 0.0);
    }
}
