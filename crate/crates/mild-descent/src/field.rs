/// An element of the discretized state space: a dense real vector over a
/// spatial grid, or a small abstract vector for ODE test problems.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField(pub Vec<f64>);

impl StateField {
    pub fn zeros(dim: usize) -> Self {
        StateField(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// self += a * other. Panics on length mismatch (programmer error).
    pub fn axpy(&mut self, a: f64, other: &StateField) {
        assert_eq!(self.0.len(), other.0.len());
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.0 {
            *x *= a;
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Euclidean dot product (no quadrature weight).
    pub fn dot(&self, other: &StateField) -> f64 {
        assert_eq!(self.0.len(), other.0.len());
        self.0.iter().zip(&other.0).map(|(x, y)| x * y).sum()
    }
}

impl From<Vec<f64>> for StateField {
    fn from(v: Vec<f64>) -> Self {
        StateField(v)
    }
}
