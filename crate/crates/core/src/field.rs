//! Right-hand sides `F(t, P)` of matrix dynamic equations, with optional
//! partial-derivative information, plus the builtin problem catalog.

use std::fmt;
use std::sync::Arc;

use crate::curve::MatrixCurve;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::matrix::Matrix;

type EvalFn = dyn Fn(f64, &Matrix) -> Result<Matrix> + Send + Sync;
type PartialsFn = dyn Fn(f64, &Matrix) -> Result<Vec<Matrix>> + Send + Sync;

/// How a field exposes derivatives with respect to its state argument.
#[derive(Clone)]
pub enum Partials {
    /// No analytic derivatives; finite differences are used throughout.
    None,
    /// One matrix per state entry, in row-major entry order. Usable both for
    /// Newton systems and for partial-derivative bound checks.
    PerEntry(Arc<PartialsFn>),
    /// A declared family of directional derivatives (for example the two
    /// parameters of a structured matrix family). Used by bound checks only.
    Family(Arc<PartialsFn>),
}

/// A map `(t, P) -> n x n matrix`.
#[derive(Clone)]
pub struct MatrixField {
    dim: usize,
    name: String,
    eval: Arc<EvalFn>,
    partials: Partials,
    fd_step: f64,
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixField")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .finish()
    }
}

impl MatrixField {
    pub fn new(
        dim: usize,
        name: impl Into<String>,
        eval: impl Fn(f64, &Matrix) -> Result<Matrix> + Send + Sync + 'static,
    ) -> Self {
        MatrixField {
            dim,
            name: name.into(),
            eval: Arc::new(eval),
            partials: Partials::None,
            fd_step: 1e-6,
        }
    }

    pub fn with_entry_partials(
        mut self,
        partials: impl Fn(f64, &Matrix) -> Result<Vec<Matrix>> + Send + Sync + 'static,
    ) -> Self {
        self.partials = Partials::PerEntry(Arc::new(partials));
        self
    }

    pub fn with_family_partials(
        mut self,
        partials: impl Fn(f64, &Matrix) -> Result<Vec<Matrix>> + Send + Sync + 'static,
    ) -> Self {
        self.partials = Partials::Family(Arc::new(partials));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64, p: &Matrix) -> Result<Matrix> {
        let m = (self.eval)(t, p)?;
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::Dimension(format!(
                "field '{}' returned {}x{}, expected {}x{}",
                self.name,
                m.nrows(),
                m.ncols(),
                self.dim,
                self.dim
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::FieldEval {
                t,
                reason: format!("field '{}' produced a non-finite entry", self.name),
            });
        }
        Ok(m)
    }

    /// Derivative matrices with respect to each state entry, row-major.
    /// Falls back to central finite differences.
    pub fn entry_partials(&self, t: f64, p: &Matrix) -> Result<Vec<Matrix>> {
        if let Partials::PerEntry(f) = &self.partials {
            let ds = f(t, p)?;
            if ds.len() != self.dim * self.dim {
                return Err(Error::Dimension(format!(
                    "field '{}' declared {} entry partials, expected {}",
                    self.name,
                    ds.len(),
                    self.dim * self.dim
                )));
            }
            return Ok(ds);
        }
        self.fd_entry_partials(t, p)
    }

    /// The derivative family used by partial-derivative bound checks: the
    /// declared partials when present, entrywise finite differences when not.
    pub fn bound_partials(&self, t: f64, p: &Matrix) -> Result<Vec<Matrix>> {
        match &self.partials {
            Partials::PerEntry(f) | Partials::Family(f) => f(t, p),
            Partials::None => self.fd_entry_partials(t, p),
        }
    }

    fn fd_entry_partials(&self, t: f64, p: &Matrix) -> Result<Vec<Matrix>> {
        let n = self.dim;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let d = self.fd_step * p[(i, j)].abs().max(1.0);
                let mut hi = p.clone();
                hi[(i, j)] += d;
                let mut lo = p.clone();
                lo[(i, j)] -= d;
                let fh = self.eval(t, &hi)?;
                let fl = self.eval(t, &lo)?;
                out.push((fh - fl) / (2.0 * d));
            }
        }
        Ok(out)
    }

    /// Build a field from per-entry expressions (row-major). Expressions may
    /// reference `t` and the state entries `p_11 .. p_nn`.
    pub fn from_expressions(n: usize, entries: Vec<Expr>, name: impl Into<String>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entry expressions for dimension {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        let entries = Arc::new(entries);
        Ok(MatrixField::new(n, name, move |t, p| {
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = entries[i * n + j].eval(t, p)?;
                }
            }
            Ok(m)
        }))
    }
}

/// Builtin problem catalog: the worked fixtures plus generic linear fields.
pub mod builtins {
    use super::*;
    use crate::timescale::{TimeScale, MEMBERSHIP_TOL};

    /// The 2x2 polynomial field with entries
    /// `1 + x1^2, t^2 - x2, x2 + t, t - x1`, where `x1` and `x2` are read off
    /// the structured state `[[x1, -x2], [-x2, x1]]` as `x1 = p_11`,
    /// `x2 = -p_12`. Ships the two-parameter derivative family of that
    /// structured domain.
    pub fn example1() -> MatrixField {
        MatrixField::new(2, "example1", |t, p| {
            let x1 = p[(0, 0)];
            let x2 = -p[(0, 1)];
            Ok(Matrix::from_row_slice(
                2,
                2,
                &[1.0 + x1 * x1, t * t - x2, x2 + t, t - x1],
            ))
        })
        .with_family_partials(|_t, p| {
            let x1 = p[(0, 0)];
            Ok(vec![
                Matrix::from_row_slice(2, 2, &[2.0 * x1, 0.0, 0.0, -1.0]),
                Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
            ])
        })
    }

    /// Which profile the increasing function `u` follows in the
    /// inverse-Lipschitz fixture.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum UProfile {
        /// `u(t) = 1 + t`: stays above 1, the condition holds.
        OnePlusT,
        /// `u(t) = t`: dips below 1, the condition fails for `t < 1`.
        T,
    }

    /// Curve pair `P(t), Q(t)` and bound `B(t)` for the inverse-Lipschitz
    /// fixture: `P = [[2u + t^2, w - t], [w - t, 2u + t^2]]`,
    /// `Q` with `u` in place of `2u`, and `B = u' I`.
    pub fn example2_curves(profile: UProfile) -> (MatrixCurve, MatrixCurve, MatrixCurve) {
        let u = move |t: f64| match profile {
            UProfile::OnePlusT => 1.0 + t,
            UProfile::T => t,
        };
        let du = move |_t: f64| 1.0;
        let w = |t: f64| 0.5 * t * t;
        let p = MatrixCurve::from_fn(2, move |t| {
            let d = 2.0 * u(t) + t * t;
            let o = w(t) - t;
            Matrix::from_row_slice(2, 2, &[d, o, o, d])
        });
        let q = MatrixCurve::from_fn(2, move |t| {
            let d = u(t) + t * t;
            let o = w(t) - t;
            Matrix::from_row_slice(2, 2, &[d, o, o, d])
        });
        let b = MatrixCurve::from_fn(2, move |t| Matrix::identity(2, 2) * du(t));
        (p, q, b)
    }

    /// Exact diagonal evaluation of the exponential
    /// `e_{circle_minus(K (I + 2 mu K)^{-1})}(t, a)` for `K = diag(k_diag)`:
    /// scattered points contribute factors `(1 + 2 mu k) / (1 + 3 mu k)` and
    /// dense stretches contribute `exp(-k * length)`.
    pub fn example3_closed_exponential(
        ts: &TimeScale,
        k_diag: &[f64],
        a: f64,
        t: f64,
    ) -> Matrix {
        let n = k_diag.len();
        let mut diag = vec![1.0_f64; n];
        for &(l, r) in ts.segments() {
            let alpha = l.max(a);
            let beta = r.min(t);
            if alpha > beta + MEMBERSHIP_TOL {
                continue;
            }
            if beta - alpha > MEMBERSHIP_TOL {
                for (d, &k) in diag.iter_mut().zip(k_diag) {
                    *d *= (-k * (beta - alpha)).exp();
                }
            }
            // jump following this segment, if it lies in [a, t)
            if beta >= r - MEMBERSHIP_TOL && beta < t - MEMBERSHIP_TOL {
                if let Ok(mu) = ts.graininess(r) {
                    if mu > MEMBERSHIP_TOL {
                        for (d, &k) in diag.iter_mut().zip(k_diag) {
                            *d *= (1.0 + 2.0 * mu * k) / (1.0 + 3.0 * mu * k);
                        }
                    }
                }
            }
        }
        Matrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
    }

    /// The closed-form solution of the linear sigma fixture:
    /// `X(t) = e_{circle_minus(K(I + 2 mu K)^{-1})}(t, a) * (1 + t - a)`.
    pub fn example3_closed_form(ts: &TimeScale, k_diag: &[f64], a: f64, t: f64) -> Matrix {
        example3_closed_exponential(ts, k_diag, a, t) * (1.0 + t - a)
    }

    /// Coefficient of the linear sigma fixture:
    /// `V(t) = K (I + 2 mu(t) K)^{-1}` (diagonal).
    pub fn example3_v_curve(ts: &TimeScale, k_diag: &[f64]) -> MatrixCurve {
        let ts = ts.clone();
        let k: Vec<f64> = k_diag.to_vec();
        MatrixCurve::from_fn(k_diag.len(), move |t| {
            let mu = ts.graininess(t).unwrap_or(0.0);
            Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
                k.len(),
                k.iter().map(|&a| a / (1.0 + 2.0 * mu * a)),
            ))
        })
    }

    /// Forcing term of the linear sigma fixture: the closed exponential.
    pub fn example3_g_curve(ts: &TimeScale, k_diag: &[f64], a: f64) -> MatrixCurve {
        let ts = ts.clone();
        let k: Vec<f64> = k_diag.to_vec();
        MatrixCurve::from_fn(k_diag.len(), move |t| {
            example3_closed_exponential(&ts, &k, a, t)
        })
    }

    /// The sigma-form field of the linear fixture:
    /// `F(t, Z) = -K (I + 2 mu(t) K)^{-1} Z + e_{...}(t, a)`.
    pub fn example3(ts: &TimeScale, k_diag: &[f64], a: f64) -> MatrixField {
        let n = k_diag.len();
        let v = example3_v_curve(ts, k_diag);
        let g = example3_g_curve(ts, k_diag, a);
        let v2 = v.clone();
        MatrixField::new(n, "example3", move |t, z| {
            Ok(-(v.eval(t).transpose() * z) + g.eval(t))
        })
        .with_entry_partials(move |t, z| {
            let n = z.nrows();
            let m = -v2.eval(t).transpose();
            let mut out = Vec::with_capacity(n * n);
            for k in 0..n {
                for l in 0..n {
                    // d/dz_kl of (M Z) has column l equal to M's column k
                    let mut d = Matrix::zeros(n, n);
                    for i in 0..n {
                        d[(i, l)] = m[(i, k)];
                    }
                    out.push(d);
                }
            }
            Ok(out)
        })
    }

    /// Generic explicit linear field `F(t, X) = M X + C`.
    pub fn linear_explicit(m: Matrix, c: Matrix) -> MatrixField {
        let n = m.nrows();
        let m2 = m.clone();
        MatrixField::new(n, "linear_explicit", move |_t, x| Ok(&m * x + &c))
            .with_entry_partials(move |_t, x| {
                let n = x.nrows();
                let mut out = Vec::with_capacity(n * n);
                for k in 0..n {
                    for l in 0..n {
                        let mut d = Matrix::zeros(n, n);
                        for i in 0..n {
                            d[(i, l)] = m2[(i, k)];
                        }
                        out.push(d);
                    }
                }
                Ok(out)
            })
    }

    /// Generic sigma-form linear field `F(t, Z) = -V^T(t) Z + G(t)`.
    pub fn linear_sigma_field(v: MatrixCurve, g: MatrixCurve) -> MatrixField {
        let n = v.dim();
        let v2 = v.clone();
        MatrixField::new(n, "linear_sigma", move |t, z| {
            Ok(-(v.eval(t).transpose() * z) + g.eval(t))
        })
        .with_entry_partials(move |t, z| {
            let n = z.nrows();
            let m = -v2.eval(t).transpose();
            let mut out = Vec::with_capacity(n * n);
            for k in 0..n {
                for l in 0..n {
                    let mut d = Matrix::zeros(n, n);
                    for i in 0..n {
                        d[(i, l)] = m[(i, k)];
                    }
                    out.push(d);
                }
            }
            Ok(out)
        })
    }

    /// The classical non-unique scalar problem `x' = 3 x^(2/3)` embedded as a
    /// 1x1 field. From `x(0) = 0` both `x = 0` and `x = t^3` solve it.
    pub fn scalar_nonunique() -> MatrixField {
        MatrixField::new(1, "scalar_nonunique", |_t, x| {
            let v = x[(0, 0)];
            let c = v.cbrt();
            Ok(Matrix::from_element(1, 1, 3.0 * c * c))
        })
    }
}
