use crate::error::{Error, Result};

/// Fine integration grid plus the coarse control partition 0 = t_0 < … < t_N = T.
///
/// Every control breakpoint coincides exactly with a fine node: the grid is
/// built from an integer `steps_per_interval`, and `node_time` is the single
/// authority for what a node's time is. Flows restarted from any node
/// therefore reproduce the original stepping bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    n_intervals: usize,
    steps_per_interval: usize,
}

impl TimeGrid {
    /// Builds the grid for `horizon` with `n_intervals` control intervals,
    /// choosing the number of fine steps per interval so that the realized dt
    /// is as close as possible to `dt_target`. The control intervals are
    /// uniform and dt = horizon / (n_intervals * steps_per_interval) exactly.
    pub fn new(horizon: f64, n_intervals: usize, dt_target: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be > 0, got {horizon}"),
            });
        }
        if n_intervals == 0 {
            return Err(Error::InvalidParameter {
                name: "n_intervals",
                reason: "must be >= 1".into(),
            });
        }
        if !(dt_target > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be > 0, got {dt_target}"),
            });
        }
        let interval = horizon / n_intervals as f64;
        let steps_per_interval = (interval / dt_target).round().max(1.0) as usize;
        let dt = horizon / (n_intervals * steps_per_interval) as f64;
        Ok(TimeGrid {
            dt,
            n_intervals,
            steps_per_interval,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn steps_per_interval(&self) -> usize {
        self.steps_per_interval
    }

    /// Total number of fine steps over [0, T].
    pub fn n_steps(&self) -> usize {
        self.n_intervals * self.steps_per_interval
    }

    pub fn horizon(&self) -> f64 {
        self.node_time(self.n_steps())
    }

    /// Time of fine node i (0 ..= n_steps).
    pub fn node_time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Fine-node index of control breakpoint k (0 ..= n_intervals).
    pub fn breakpoint_node(&self, k: usize) -> usize {
        k * self.steps_per_interval
    }

    /// Index of the control interval containing fine node i; the last
    /// interval also claims the terminal node.
    pub fn interval_of_node(&self, i: usize) -> usize {
        (i / self.steps_per_interval).min(self.n_intervals - 1)
    }

    /// Maps a time to its fine-node index if it lies on the grid
    /// (within one representable rounding unit); no silent snapping.
    pub fn node_of_time(&self, t: f64) -> Result<usize> {
        let idx = (t / self.dt).round();
        if idx < 0.0 || idx > self.n_steps() as f64 {
            return Err(Error::NotGridAligned { t, dt: self.dt });
        }
        let idx = idx as usize;
        // One representable rounding unit of slack: i*dt is itself rounded.
        let tol = 4.0 * f64::EPSILON * self.horizon().max(1.0);
        if (self.node_time(idx) - t).abs() > tol {
            return Err(Error::NotGridAligned { t, dt: self.dt });
        }
        Ok(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_grid_resolves_noninteger_ratio() {
        // 2.0 / 30 / 1e-3 = 66.67 steps; rounds to 67 with dt adjusted.
        let g = TimeGrid::new(2.0, 30, 1e-3).unwrap();
        assert_eq!(g.steps_per_interval(), 67);
        assert_eq!(g.n_steps(), 2010);
        assert!((g.dt() - 2.0 / 2010.0).abs() < 1e-18);
        assert!((g.horizon() - 2.0).abs() <= 4.0 * f64::EPSILON * 2.0);
    }

    #[test]
    fn breakpoints_are_nodes() {
        let g = TimeGrid::new(1.0, 20, 1e-4).unwrap();
        assert_eq!(g.steps_per_interval(), 500);
        for k in 0..=20 {
            let t = g.node_time(g.breakpoint_node(k));
            assert_eq!(g.node_of_time(t).unwrap(), g.breakpoint_node(k));
        }
    }

    #[test]
    fn off_grid_time_is_rejected() {
        let g = TimeGrid::new(1.0, 10, 1e-2).unwrap();
        assert!(g.node_of_time(0.505 * g.dt()).is_err());
        assert!(g.node_of_time(-g.dt()).is_err());
        assert!(g.node_of_time(1.0 + 2.0 * g.dt()).is_err());
    }

    #[test]
    fn interval_of_node_claims_terminal_node() {
        let g = TimeGrid::new(1.0, 4, 0.25).unwrap();
        assert_eq!(g.steps_per_interval(), 1);
        assert_eq!(g.interval_of_node(0), 0);
        assert_eq!(g.interval_of_node(3), 3);
        assert_eq!(g.interval_of_node(4), 3);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(TimeGrid::new(0.0, 10, 1e-3).is_err());
        assert!(TimeGrid::new(1.0, 0, 1e-3).is_err());
        assert!(TimeGrid::new(1.0, 10, 0.0).is_err());
    }
}
