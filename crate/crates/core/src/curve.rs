//! Matrix-valued functions of time.

use std::fmt;
use std::sync::Arc;

use crate::matrix::Matrix;

/// A map `t -> n x n matrix`, defined at every point of the time scale it is
/// used with. Cloning is cheap (the evaluator is shared).
#[derive(Clone)]
pub struct MatrixCurve {
    dim: usize,
    eval: Arc<dyn Fn(f64) -> Matrix + Send + Sync>,
}

impl fmt::Debug for MatrixCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixCurve").field("dim", &self.dim).finish()
    }
}

impl MatrixCurve {
    pub fn from_fn(dim: usize, f: impl Fn(f64) -> Matrix + Send + Sync + 'static) -> Self {
        MatrixCurve {
            dim,
            eval: Arc::new(f),
        }
    }

    /// The constant curve `t -> m`.
    pub fn constant(m: Matrix) -> Self {
        let dim = m.nrows();
        assert_eq!(m.nrows(), m.ncols(), "matrix curve must be square");
        MatrixCurve::from_fn(dim, move |_| m.clone())
    }

    /// The zero curve of the given dimension.
    pub fn zero(dim: usize) -> Self {
        MatrixCurve::from_fn(dim, move |_| Matrix::zeros(dim, dim))
    }

    /// A 1x1 curve from a scalar function.
    pub fn scalar(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        MatrixCurve::from_fn(1, move |t| Matrix::from_element(1, 1, f(t)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: f64) -> Matrix {
        (self.eval)(t)
    }
}
