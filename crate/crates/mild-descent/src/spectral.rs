use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::field::StateField;
use crate::problem::SemigroupAction;

/// Uniform grid on the circle [0, 2π): nodes θ_i = 2πi/n and the rectangle
/// quadrature weight 2π/n (spectrally accurate for smooth periodic data).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidParameter {
                name: "n_space",
                reason: format!("must be even and >= 4 (real FFT layout), got {n}"),
            });
        }
        Ok(TorusGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Samples a scalar function at the grid nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> StateField {
        StateField((0..self.n).map(|i| f(self.node(i))).collect())
    }
}

/// Squared discrete L² distance Σ_i (x_i − y_i)² · (2π/n).
pub fn l2_distance_sq(grid: &TorusGrid, x: &StateField, y: &StateField) -> Result<f64> {
    if x.len() != grid.n || y.len() != grid.n {
        return Err(Error::DimensionMismatch {
            expected: grid.n,
            got: if x.len() != grid.n { x.len() } else { y.len() },
        });
    }
    let s: f64 = x
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s * grid.weight())
}

/// Heat semigroup e^{τ ν ∂_θθ} realized by Fourier multipliers e^{−ν k² τ}
/// in a real-to-complex transform layout (the state stays real by
/// construction, no imaginary residue to truncate).
pub struct SpectralHeatSemigroup {
    nu: f64,
    n: usize,
    fwd: Arc<dyn RealToComplex<f64>>,
    inv: Arc<dyn ComplexToReal<f64>>,
    /// Multipliers per requested duration, keyed by the duration's bits.
    multipliers: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl SpectralHeatSemigroup {
    pub fn new(grid: &TorusGrid, nu: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::InvalidParameter {
                name: "nu",
                reason: format!("must be > 0, got {nu}"),
            });
        }
        let mut planner = RealFftPlanner::<f64>::new();
        Ok(SpectralHeatSemigroup {
            nu,
            n: grid.n(),
            fwd: planner.plan_fft_forward(grid.n()),
            inv: planner.plan_fft_inverse(grid.n()),
            multipliers: Mutex::new(HashMap::new()),
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    fn multipliers_for(&self, tau: f64) -> Arc<Vec<f64>> {
        let mut cache = self.multipliers.lock().expect("multiplier cache poisoned");
        cache
            .entry(tau.to_bits())
            .or_insert_with(|| {
                Arc::new(
                    (0..=self.n / 2)
                        .map(|k| (-self.nu * (k * k) as f64 * tau).exp())
                        .collect(),
                )
            })
            .clone()
    }
}

impl SemigroupAction for SpectralHeatSemigroup {
    fn apply(&self, tau: f64, x: &StateField) -> StateField {
        assert!(tau >= 0.0, "heat semigroup requires tau >= 0, got {tau}");
        assert_eq!(x.len(), self.n);
        let mult = self.multipliers_for(tau);
        let mut input = x.0.clone();
        let mut spectrum = vec![Complex::new(0.0, 0.0); self.n / 2 + 1];
        self.fwd
            .process(&mut input, &mut spectrum)
            .expect("forward transform of a correctly sized buffer");
        let scale = 1.0 / self.n as f64; // realfft transforms are unnormalized
        for (c, m) in spectrum.iter_mut().zip(mult.iter()) {
            *c *= m * scale;
        }
        let mut out = vec![0.0; self.n];
        self.inv
            .process(&mut spectrum, &mut out)
            .expect("inverse transform of a correctly sized buffer");
        StateField(out)
    }
}

/// The semigroup action as a checked operation (negative durations are a
/// caller error, reported rather than asserted).
pub fn heat_apply(
    sg: &SpectralHeatSemigroup,
    tau: f64,
    x: &StateField,
) -> Result<StateField> {
    if tau < 0.0 {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("must be >= 0, got {tau}"),
        });
    }
    if x.len() != sg.n {
        return Err(Error::DimensionMismatch {
            expected: sg.n,
            got: x.len(),
        });
    }
    Ok(sg.apply(tau, x))
}
