use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Piecewise-constant m-vector control on a partition of [0, T].
///
/// Breakpoints are stored as fine-node indices of a [`TimeGrid`], so the
/// alignment invariant is structural. Value k is active on [t_k, t_{k+1});
/// evaluation at T returns the last value (right-continuous convention).
///
/// Admissibility (|u_k| <= R) is not a property of the signal alone - R
/// belongs to the problem - and is checked where the two meet (propagation,
/// cost evaluation, file loading).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    /// Strictly increasing node indices, first 0, last = grid.n_steps().
    breakpoints: Vec<usize>,
    /// values[k] is active on [breakpoints[k], breakpoints[k+1]).
    values: Vec<Vec<f64>>,
}

impl ControlSignal {
    /// A signal on an explicit partition. Every value must have the same
    /// dimension m >= 1.
    pub fn new(grid: &TimeGrid, breakpoints: Vec<usize>, values: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() < 2
            || breakpoints[0] != 0
            || *breakpoints.last().unwrap() != grid.n_steps()
        {
            return Err(Error::InvalidParameter {
                name: "breakpoints",
                reason: "must start at node 0 and end at the terminal node".into(),
            });
        }
        if !breakpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter {
                name: "breakpoints",
                reason: "must be strictly increasing".into(),
            });
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!(
                    "expected {} interval values, got {}",
                    breakpoints.len() - 1,
                    values.len()
                ),
            });
        }
        let m = values[0].len();
        if m == 0 || values.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: "all control values must share one dimension m >= 1".into(),
            });
        }
        Ok(ControlSignal {
            breakpoints,
            values,
        })
    }

    /// The constant-zero control on the grid's own N-interval partition.
    pub fn zero(grid: &TimeGrid, m: usize) -> Self {
        Self::uniform(grid, vec![vec![0.0; m]; grid.n_intervals()])
            .expect("zero signal on the grid partition is always valid")
    }

    /// A signal on the grid's control partition, one value per interval.
    pub fn uniform(grid: &TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != grid.n_intervals() {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!(
                    "expected {} values for the grid partition, got {}",
                    grid.n_intervals(),
                    values.len()
                ),
            });
        }
        let breakpoints = (0..=grid.n_intervals())
            .map(|k| grid.breakpoint_node(k))
            .collect();
        Self::new(grid, breakpoints, values)
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn breakpoints(&self) -> &[usize] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn terminal_node(&self) -> usize {
        *self.breakpoints.last().unwrap()
    }

    /// Index of the piece active at fine node i (the last piece at i = T).
    pub fn piece_of_node(&self, i: usize) -> usize {
        match self.breakpoints.binary_search(&i) {
            Ok(k) => k.min(self.values.len() - 1),
            Err(k) => (k - 1).min(self.values.len() - 1), // i sits inside piece k-1
        }
    }

    /// Control value at fine node i.
    pub fn at_node(&self, i: usize) -> &[f64] {
        &self.values[self.piece_of_node(i)]
    }

    /// Returns u ▷_s ū: `self` on [0, s), `baseline` on [s, T]. The result's
    /// partition is the union of both partitions with s inserted.
    pub fn concat(&self, baseline: &ControlSignal, s_node: usize) -> Result<ControlSignal> {
        if self.terminal_node() != baseline.terminal_node() {
            return Err(Error::HorizonMismatch {
                left: self.terminal_node() as f64,
                right: baseline.terminal_node() as f64,
            });
        }
        if self.dim() != baseline.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: baseline.dim(),
            });
        }
        let end = self.terminal_node();
        let mut merged: Vec<usize> = self
            .breakpoints
            .iter()
            .chain(baseline.breakpoints.iter())
            .copied()
            .chain(std::iter::once(s_node.min(end)))
            .collect();
        merged.sort_unstable();
        merged.dedup();
        let values = merged
            .windows(2)
            .map(|w| {
                let src = if w[0] < s_node { self } else { baseline };
                src.at_node(w[0]).to_vec()
            })
            .collect();
        Ok(ControlSignal {
            breakpoints: merged,
            values,
        })
    }

    /// Exact integral of |u(t)|^2 over [0, T] (sum over constant pieces).
    pub fn l2_time_integral_sq(&self, grid: &TimeGrid) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| {
                let len = grid.node_time(w[1]) - grid.node_time(w[0]);
                let sq: f64 = v.iter().map(|x| x * x).sum();
                len * sq
            })
            .sum()
    }

    pub fn max_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}
