//! Bounded time scales: finite unions of disjoint closed real intervals.
//!
//! A time scale is any nonempty closed subset of the reals; it carries the
//! forward/backward jump operators, the graininess function, and the
//! delta-derivative/delta-integral that unify difference and differential
//! calculus. Only bounded scales with finitely many segments are
//! representable here; a degenerate segment is an isolated point.

use crate::curve::MatrixCurve;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Absolute tolerance for deciding membership `t in T`. Absorbs
/// floating-point noise in endpoint arithmetic.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Default finite-difference step for delta-derivatives at right-dense points.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A bounded time scale: ordered, strictly separated closed segments
/// `[l_i, r_i]` with `l_i <= r_i`. A segment with `l_i == r_i` is an
/// isolated point.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeScale {
    segments: Vec<(f64, f64)>,
}

/// Sampling density inside non-degenerate segments. Every segment endpoint
/// and isolated point is always a grid node; interior nodes are spaced at
/// most `dense_step` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dense_step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { dense_step: 1e-3 }
    }
}

impl GridSpec {
    pub fn new(dense_step: f64) -> Result<Self> {
        if !(dense_step > 0.0) || !dense_step.is_finite() {
            return Err(Error::Domain(format!(
                "dense_step must be positive and finite, got {dense_step}"
            )));
        }
        Ok(GridSpec { dense_step })
    }
}

impl TimeScale {
    /// Build a time scale from closed segments. Segments must be sorted,
    /// non-overlapping, and strictly separated.
    pub fn new(segments: Vec<(f64, f64)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Domain("time scale must be nonempty".into()));
        }
        for &(l, r) in &segments {
            if !l.is_finite() || !r.is_finite() {
                return Err(Error::Domain("segment endpoints must be finite".into()));
            }
            if l > r {
                return Err(Error::Domain(format!(
                    "interval endpoints out of order: [{l}, {r}]"
                )));
            }
        }
        for w in segments.windows(2) {
            let (_, r0) = w[0];
            let (l1, _) = w[1];
            if l1 <= r0 + MEMBERSHIP_TOL {
                return Err(Error::Domain(format!(
                    "segments must be strictly separated: [.., {r0}] then [{l1}, ..]"
                )));
            }
        }
        Ok(TimeScale { segments })
    }

    /// The set of isolated points `{t_0, ..., t_k}`.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        let mut pts: Vec<f64> = points.to_vec();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self::new(pts.into_iter().map(|p| (p, p)).collect())
    }

    /// The integers `lo..=hi` as isolated points.
    pub fn integers(lo: i64, hi: i64) -> Self {
        let pts: Vec<(f64, f64)> = (lo..=hi).map(|k| (k as f64, k as f64)).collect();
        TimeScale { segments: pts }
    }

    /// A single closed interval `[l, r]`.
    pub fn interval(l: f64, r: f64) -> Result<Self> {
        Self::new(vec![(l, r)])
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segments
    }

    pub fn min(&self) -> f64 {
        self.segments[0].0
    }

    pub fn max(&self) -> f64 {
        self.segments[self.segments.len() - 1].1
    }

    /// Index of the segment containing `t` (within `MEMBERSHIP_TOL`).
    fn segment_index(&self, t: f64) -> Option<usize> {
        // Segments are few; linear scan beats bookkeeping at this scale.
        self.segments
            .iter()
            .position(|&(l, r)| t >= l - MEMBERSHIP_TOL && t <= r + MEMBERSHIP_TOL)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.segment_index(t).is_some()
    }

    fn require_member(&self, t: f64) -> Result<usize> {
        self.segment_index(t)
            .ok_or_else(|| Error::Domain(format!("t = {t} is not in the time scale")))
    }

    /// Forward jump operator: `inf { s in T : s > t }`, with `sigma(max) = max`.
    pub fn sigma(&self, t: f64) -> Result<f64> {
        let i = self.require_member(t)?;
        let (_, r) = self.segments[i];
        if t < r - MEMBERSHIP_TOL {
            Ok(t) // right-dense interior point
        } else if i + 1 < self.segments.len() {
            Ok(self.segments[i + 1].0)
        } else {
            Ok(t) // maximum convention
        }
    }

    /// Backward jump operator: `sup { s in T : s < t }`, with `rho(min) = min`.
    pub fn rho(&self, t: f64) -> Result<f64> {
        let i = self.require_member(t)?;
        let (l, _) = self.segments[i];
        if t > l + MEMBERSHIP_TOL {
            Ok(t) // left-dense interior point
        } else if i > 0 {
            Ok(self.segments[i - 1].1)
        } else {
            Ok(t) // minimum convention
        }
    }

    /// Graininess `mu(t) = sigma(t) - t >= 0`.
    pub fn graininess(&self, t: f64) -> Result<f64> {
        Ok((self.sigma(t)? - t).max(0.0))
    }

    pub fn is_right_scattered(&self, t: f64) -> Result<bool> {
        Ok(self.graininess(t)? > MEMBERSHIP_TOL)
    }

    /// `T^kappa`: the scale with a left-scattered maximum removed.
    pub fn kappa_truncate(&self) -> TimeScale {
        let n = self.segments.len();
        let (l, r) = self.segments[n - 1];
        if l + MEMBERSHIP_TOL < r {
            // maximum is left-dense; nothing to remove
            return self.clone();
        }
        if n == 1 {
            // a single isolated point; removing it would leave the empty set,
            // so keep it (no derivative is defined there anyway)
            return self.clone();
        }
        TimeScale {
            segments: self.segments[..n - 1].to_vec(),
        }
    }

    /// Delta-derivative of a matrix curve at `t in T^kappa`.
    ///
    /// At a right-scattered point this is the exact difference quotient
    /// `(X(sigma(t)) - X(t)) / mu(t)`. At a right-dense point it is a
    /// finite-difference estimate with step at most `h`, one-sided where a
    /// segment boundary leaves no room for a central stencil.
    pub fn delta_derivative(
        &self,
        curve: &MatrixCurve,
        t: f64,
        h: f64,
    ) -> Result<Matrix> {
        if !(h > 0.0) {
            return Err(Error::Domain(format!("fd step must be positive, got {h}")));
        }
        let kappa = self.kappa_truncate();
        let i = kappa
            .segment_index(t)
            .ok_or_else(|| Error::Domain(format!("t = {t} is not in T^kappa")))?;

        let mu = self.graininess(t)?;
        if mu > MEMBERSHIP_TOL {
            let sigma = self.sigma(t)?;
            let f_sigma = curve.eval(sigma);
            let f_t = curve.eval(t);
            return Ok((f_sigma - f_t) / mu);
        }

        // Right-dense: classical finite differences inside the segment.
        let (l, r) = kappa.segments[i];
        let space_left = t - l;
        let space_right = r - t;
        if space_left >= h && space_right >= h {
            let d = h;
            Ok((curve.eval(t + d) - curve.eval(t - d)) / (2.0 * d))
        } else if space_right >= space_left {
            // forward second-order stencil
            let e = h.min(space_right / 2.0);
            if e <= MEMBERSHIP_TOL {
                return Err(Error::Domain(format!(
                    "segment around t = {t} too short for a finite-difference stencil"
                )));
            }
            Ok((curve.eval(t + 2.0 * e) * -1.0 + curve.eval(t + e) * 4.0
                - curve.eval(t) * 3.0)
                / (2.0 * e))
        } else {
            // backward second-order stencil (left-dense maximum etc.)
            let e = h.min(space_left / 2.0);
            if e <= MEMBERSHIP_TOL {
                return Err(Error::Domain(format!(
                    "segment around t = {t} too short for a finite-difference stencil"
                )));
            }
            Ok((curve.eval(t) * 3.0 - curve.eval(t - e) * 4.0
                + curve.eval(t - 2.0 * e))
                / (2.0 * e))
        }
    }

    /// Upper quadrature limit for a dense stretch `[alpha, beta]`: when
    /// `beta` is right-scattered the Riemann part of the delta integral wants
    /// the limit from the left there (the value at `beta` itself belongs to
    /// the jump term), so back off just past the membership tolerance.
    pub(crate) fn dense_upper_limit(&self, alpha: f64, beta: f64) -> f64 {
        match self.graininess(beta) {
            Ok(mu) if mu > MEMBERSHIP_TOL => {
                let back = ((beta - alpha) * 1e-12)
                    .max(4.0 * MEMBERSHIP_TOL)
                    .min((beta - alpha) / 2.0);
                beta - back
            }
            _ => beta,
        }
    }

    /// Delta-integral of a matrix curve over `[from, to]_T`.
    ///
    /// Right-scattered nodes contribute `mu(t) * X(t)`; dense stretches are
    /// integrated by composite Simpson quadrature at the grid resolution.
    pub fn delta_integral(
        &self,
        curve: &MatrixCurve,
        from: f64,
        to: f64,
        grid: &GridSpec,
    ) -> Result<Matrix> {
        self.require_member(from)?;
        self.require_member(to)?;
        if from > to + MEMBERSHIP_TOL {
            return Err(Error::Domain(format!(
                "integration bounds out of order: {from} > {to}"
            )));
        }
        let n = curve.dim();
        let mut acc = Matrix::zeros(n, n);
        if to - from <= MEMBERSHIP_TOL {
            return Ok(acc);
        }
        for &(l, r) in &self.segments {
            let alpha = l.max(from);
            let beta = r.min(to);
            if alpha > beta + MEMBERSHIP_TOL {
                continue;
            }
            if beta - alpha > MEMBERSHIP_TOL {
                acc += simpson_integral(curve, alpha, beta, grid.dense_step);
            }
            // Jump across the gap that follows this segment, if any lies
            // inside [from, to).
            if beta >= r - MEMBERSHIP_TOL && beta < to - MEMBERSHIP_TOL {
                let mu = self.graininess(r)?;
                if mu > MEMBERSHIP_TOL {
                    acc += curve.eval(r) * mu;
                }
            }
        }
        Ok(acc)
    }
}

/// Composite Simpson rule on `[a, b]` with an even number of subintervals of
/// width at most `step`.
pub(crate) fn simpson_integral(curve: &MatrixCurve, a: f64, b: f64, step: f64) -> Matrix {
    let len = b - a;
    let mut m = (len / step).ceil() as usize;
    m = m.max(2);
    if m % 2 == 1 {
        m += 1;
    }
    let h = len / m as f64;
    let mut acc = curve.eval(a) + curve.eval(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += curve.eval(a + k as f64 * h) * w;
    }
    acc * (h / 3.0)
}
