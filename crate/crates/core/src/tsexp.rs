//! The generalized matrix exponential `e_K(t, a)` on a time scale, with its
//! identity suite.
//!
//! Two engines are provided. `exp_ode` integrates the defining dynamic
//! equation `Y^D = K(t) Y`, `Y(a) = I` (exact factor updates at scattered
//! points, RK4 on dense stretches) and is correct for arbitrary regressive
//! coefficient families. `exp_commuting` evaluates the closed form
//! `exp(integral of K)` composed with the scattered factors; it applies only
//! when the coefficient family commutes, which is checked by sampling, and
//! exists because the closed form is the cheaper and more direct route when
//! it is valid.

use crate::curve::MatrixCurve;
use crate::error::{Error, Result};
use crate::matrix::{self, norm_max, Matrix, Tolerances};
use crate::timescale::{GridSpec, TimeScale, MEMBERSHIP_TOL};

/// March `Y^D = K(s) Y` from `from` to `to >= from`, returning the state at
/// every node. Scattered points apply `Y <- (I + mu K) Y` after a
/// regressivity gate; dense steps are RK4.
fn march(
    k: &MatrixCurve,
    ts: &TimeScale,
    from: f64,
    to: f64,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<Vec<(f64, Matrix)>> {
    let n = k.dim();
    let nodes = crate::solver::solve_nodes(ts, from, to, grid)?;
    let mut y = Matrix::identity(n, n);
    let mut out = Vec::with_capacity(nodes.len());
    out.push((nodes[0], y.clone()));
    for w in nodes.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mu = ts.graininess(t0)?;
        if mu > MEMBERSHIP_TOL {
            let kt = k.eval(t0);
            let factor = matrix::regressivity_factor(&kt, mu, tol).map_err(|_| {
                Error::NonRegressive {
                    t: t0,
                    det_abs: (Matrix::identity(n, n) + &kt * mu).determinant().abs(),
                }
            })?;
            y = factor * y;
        } else {
            let h = t1 - t0;
            // The right endpoint of a dense step may itself be right-scattered;
            // the dense dynamics want the limit from the left there.
            let t_end = dense_right_time(ts, t0, t1);
            let k1 = k.eval(t0) * &y;
            let k2 = k.eval(t0 + h / 2.0) * (&y + &k1 * (h / 2.0));
            let k3 = k.eval(t0 + h / 2.0) * (&y + &k2 * (h / 2.0));
            let k4 = k.eval(t_end) * (&y + &k3 * h);
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        out.push((t1, y.clone()));
    }
    Ok(out)
}

/// Evaluation time for the right endpoint of a dense step: back off
/// infinitesimally when that endpoint is right-scattered, so graininess-aware
/// coefficient curves see their dense-side value. The backoff must clear the
/// membership tolerance or the shifted point still resolves as scattered.
pub(crate) fn dense_right_time(ts: &TimeScale, t0: f64, t1: f64) -> f64 {
    match ts.graininess(t1) {
        Ok(mu) if mu > MEMBERSHIP_TOL => {
            let h = t1 - t0;
            let back = (h * 1e-6).max(4.0 * MEMBERSHIP_TOL).min(h / 2.0);
            t1 - back
        }
        _ => t1,
    }
}

/// Transition matrix `e_K(t, a)` by integrating the defining equation.
/// Handles `t < a` through the inverse of the forward transition.
pub fn exp_ode(
    k: &MatrixCurve,
    ts: &TimeScale,
    t: f64,
    a: f64,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<Matrix> {
    let n = k.dim();
    if (t - a).abs() <= MEMBERSHIP_TOL {
        return Ok(Matrix::identity(n, n));
    }
    if t > a {
        Ok(march(k, ts, a, t, grid, tol)?.pop().unwrap().1)
    } else {
        let fwd = march(k, ts, t, a, grid, tol)?.pop().unwrap().1;
        fwd.try_inverse()
            .ok_or_else(|| Error::Singular(format!("e_K({a}, {t}) is numerically singular")))
    }
}

/// Sampled commutation check over `[lo, hi]_T`: every pair of sampled
/// coefficient values must commute within the equality tolerance.
fn commutation_check(
    k: &MatrixCurve,
    ts: &TimeScale,
    lo: f64,
    hi: f64,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<()> {
    let coarse = GridSpec {
        dense_step: ((hi - lo) / 8.0).max(grid.dense_step),
    };
    let nodes = crate::solver::solve_nodes(ts, lo, hi, &coarse)?;
    let values: Vec<(f64, Matrix)> = nodes.iter().map(|&s| (s, k.eval(s))).collect();
    for (i, (t1, k1)) in values.iter().enumerate() {
        for (t2, k2) in values.iter().skip(i + 1) {
            let comm = k1 * k2 - k2 * k1;
            let scale = norm_max(k1).max(1.0) * norm_max(k2).max(1.0);
            let residual = norm_max(&comm);
            if residual > tol.eq_tol * scale {
                return Err(Error::NonCommuting {
                    t1: *t1,
                    t2: *t2,
                    residual,
                });
            }
        }
    }
    Ok(())
}

/// Closed-form exponential for commuting coefficient families:
/// `exp(integral of K over the dense part)` times the product of scattered
/// factors `I + mu K`. The scattered factor equals `exp(Log(I + mu K))`, so
/// no matrix logarithm is ever formed.
pub fn exp_commuting(
    k: &MatrixCurve,
    ts: &TimeScale,
    t: f64,
    a: f64,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<Matrix> {
    let n = k.dim();
    if (t - a).abs() <= MEMBERSHIP_TOL {
        return Ok(Matrix::identity(n, n));
    }
    if t < a {
        let fwd = exp_commuting_forward(k, ts, t, a, grid, tol)?;
        return fwd
            .try_inverse()
            .ok_or_else(|| Error::Singular("commuting exponential singular".into()));
    }
    exp_commuting_forward(k, ts, a, t, grid, tol)
}

fn exp_commuting_forward(
    k: &MatrixCurve,
    ts: &TimeScale,
    lo: f64,
    hi: f64,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<Matrix> {
    let n = k.dim();
    commutation_check(k, ts, lo, hi, grid, tol)?;
    let mut dense_integral = Matrix::zeros(n, n);
    let mut scattered = Matrix::identity(n, n);
    for &(l, r) in ts.segments() {
        let alpha = l.max(lo);
        let beta = r.min(hi);
        if alpha > beta + MEMBERSHIP_TOL {
            continue;
        }
        if beta - alpha > MEMBERSHIP_TOL {
            dense_integral += crate::timescale::simpson_integral(k, alpha, beta, grid.dense_step);
        }
        if beta >= r - MEMBERSHIP_TOL && beta < hi - MEMBERSHIP_TOL {
            let mu = ts.graininess(r)?;
            if mu > MEMBERSHIP_TOL {
                let kt = k.eval(r);
                let factor = matrix::regressivity_factor(&kt, mu, tol).map_err(|_| {
                    Error::NonRegressive {
                        t: r,
                        det_abs: (Matrix::identity(n, n) + &kt * mu).determinant().abs(),
                    }
                })?;
                scattered = factor * scattered;
            }
        }
    }
    Ok(dense_integral.exp() * scattered)
}

/// Worst-case residuals of the exponential identity suite. All residuals are
/// relative to `max(1, |rhs|)` in the max-abs norm.
#[derive(Debug, Clone)]
pub struct ExpIdentityReport {
    pub nodes: Vec<f64>,
    /// `e_0(t, s) = I = e_K(t, t)`
    pub point_identity: f64,
    /// `e_K(sigma(t), s) = (I + mu K(t)) e_K(t, s)` at scattered `t`
    pub sigma_shift: f64,
    /// `e_K(s, t) = e_K(t, s)^{-1}`
    pub inverse: f64,
    /// `e_K(t, s) e_K(s, r) = e_K(t, r)`
    pub semigroup: f64,
    /// `e_K e_L = e_{K o+ L}` (None when K and L do not commute)
    pub product: Option<f64>,
    /// `e_K^D(t, s) = K(t) e_K(t, s)`
    pub delta_derivative: f64,
}

impl ExpIdentityReport {
    pub fn worst(&self) -> f64 {
        self.point_identity
            .max(self.sigma_shift)
            .max(self.inverse)
            .max(self.semigroup)
            .max(self.product.unwrap_or(0.0))
            .max(self.delta_derivative)
    }
}

fn rel_residual(lhs: &Matrix, rhs: &Matrix) -> f64 {
    norm_max(&(lhs - rhs)) / norm_max(rhs).max(1.0)
}

/// Exercise the exponential identities at all pairs/triples of the given
/// nodes, computing every transition matrix by an independent march.
pub fn exp_identity_suite(
    k: &MatrixCurve,
    l: &MatrixCurve,
    ts: &TimeScale,
    nodes: &[f64],
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<ExpIdentityReport> {
    let n = k.dim();
    if l.dim() != n {
        return Err(Error::Dimension("exp_identity_suite: K and L dimensions differ".into()));
    }
    for &t in nodes {
        if !ts.contains(t) {
            return Err(Error::Domain(format!("suite node {t} is not in the time scale")));
        }
    }
    let eye = Matrix::identity(n, n);
    let zero_curve = MatrixCurve::zero(n);
    let e = |t: f64, s: f64| exp_ode(k, ts, t, s, grid, tol);

    let mut point_identity = 0.0_f64;
    let mut sigma_shift = 0.0_f64;
    let mut inverse = 0.0_f64;
    let mut semigroup = 0.0_f64;
    let mut delta_derivative = 0.0_f64;

    for &t in nodes {
        point_identity = point_identity.max(rel_residual(&e(t, t)?, &eye));
        for &s in nodes {
            point_identity =
                point_identity.max(rel_residual(&exp_ode(&zero_curve, ts, t, s, grid, tol)?, &eye));
        }
    }

    // (2) sigma shift at scattered t
    for &t in nodes {
        let mu = ts.graininess(t)?;
        if mu <= MEMBERSHIP_TOL || t >= ts.max() - MEMBERSHIP_TOL {
            continue;
        }
        let sigma_t = ts.sigma(t)?;
        let factor = &eye + k.eval(t) * mu;
        for &s in nodes {
            let lhs = e(sigma_t, s)?;
            let rhs = &factor * e(t, s)?;
            sigma_shift = sigma_shift.max(rel_residual(&lhs, &rhs));
        }
    }

    // (3) inverse
    for &t in nodes {
        for &s in nodes {
            if (t - s).abs() <= MEMBERSHIP_TOL {
                continue;
            }
            let prod = e(s, t)? * e(t, s)?;
            inverse = inverse.max(rel_residual(&prod, &eye));
        }
    }

    // (4) semigroup over all ordered triples
    for &t in nodes {
        for &s in nodes {
            for &r in nodes {
                let lhs = e(t, s)? * e(s, r)?;
                let rhs = e(t, r)?;
                semigroup = semigroup.max(rel_residual(&lhs, &rhs));
            }
        }
    }

    // (5) product rule, commuting families only
    let product = {
        let commuting = nodes.iter().all(|&s| {
            let (ks, ls) = (k.eval(s), l.eval(s));
            let comm = &ks * &ls - &ls * &ks;
            norm_max(&comm) <= tol.eq_tol * norm_max(&ks).max(1.0) * norm_max(&ls).max(1.0)
        });
        if commuting {
            let ts2 = ts.clone();
            let (kc, lc) = (k.clone(), l.clone());
            let tol2 = *tol;
            let oplus = MatrixCurve::from_fn(n, move |s| {
                let mu = ts2.graininess(s).unwrap_or(0.0);
                matrix::circle_plus(&kc.eval(s), &lc.eval(s), mu)
                    .unwrap_or_else(|_| Matrix::zeros(kc.dim(), kc.dim()))
            });
            let _ = tol2;
            let mut worst = 0.0_f64;
            for &t in nodes {
                for &s in nodes {
                    let lhs = e(t, s)? * exp_ode(l, ts, t, s, grid, tol)?;
                    let rhs = exp_ode(&oplus, ts, t, s, grid, tol)?;
                    worst = worst.max(rel_residual(&lhs, &rhs));
                }
            }
            Some(worst)
        } else {
            None
        }
    };

    // (6) delta derivative in the first argument
    let kappa = ts.kappa_truncate();
    for &t in nodes {
        if !kappa.contains(t) {
            continue;
        }
        for &s in nodes {
            let ts2 = ts.clone();
            let kc = k.clone();
            let grid2 = *grid;
            let tol2 = *tol;
            let curve = MatrixCurve::from_fn(n, move |u| {
                exp_ode(&kc, &ts2, u, s, &grid2, &tol2)
                    .unwrap_or_else(|_| Matrix::zeros(n, n))
            });
            let lhs = ts.delta_derivative(&curve, t, crate::timescale::DEFAULT_FD_STEP)?;
            let rhs = k.eval(t) * e(t, s)?;
            delta_derivative = delta_derivative.max(rel_residual(&lhs, &rhs));
        }
    }

    Ok(ExpIdentityReport {
        nodes: nodes.to_vec(),
        point_identity,
        sigma_shift,
        inverse,
        semigroup,
        product,
        delta_derivative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn grid() -> GridSpec {
        GridSpec::default()
    }

    fn mixed() -> TimeScale {
        TimeScale::new(vec![(0.0, 0.0), (0.25, 0.25), (0.5, 0.5), (0.75, 0.75), (1.0, 2.0)])
            .unwrap()
    }

    #[test]
    fn zero_curve_gives_identity() {
        let ts = mixed();
        let z = MatrixCurve::zero(2);
        for engine in [exp_ode, exp_commuting] {
            let e = engine(&z, &ts, 2.0, 0.0, &grid(), &tol()).unwrap();
            assert!(norm_max(&(&e - Matrix::identity(2, 2))) <= 1e-12);
        }
    }

    #[test]
    fn scalar_product_oracle_on_integers() {
        // k = 1 on the integers: e(t, 0) = prod (1 + mu k) = 2^t
        let z = TimeScale::integers(0, 5);
        let one = MatrixCurve::constant(Matrix::from_element(1, 1, 1.0));
        let e = exp_ode(&one, &z, 3.0, 0.0, &grid(), &tol()).unwrap();
        assert_abs_diff_eq!(e[(0, 0)], 8.0, epsilon = 1e-12);
        let e = exp_commuting(&one, &z, 3.0, 0.0, &grid(), &tol()).unwrap();
        assert_abs_diff_eq!(e[(0, 0)], 8.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_on_interval_matches_scalar_exponentials() {
        let iv = TimeScale::interval(0.0, 1.0).unwrap();
        let k = MatrixCurve::constant(Matrix::from_partial_diagonal(2, 2, &[1.0, 2.0]));
        let e = exp_commuting(&k, &iv, 1.0, 0.0, &grid(), &tol()).unwrap();
        assert_abs_diff_eq!(e[(0, 0)], 1.0_f64.exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(e[(1, 1)], 2.0_f64.exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(e[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn engines_agree_on_commuting_family() {
        let ts = TimeScale::new(vec![(0.0, 1.0), (1.5, 1.5), (2.0, 2.0)]).unwrap();
        let k = MatrixCurve::constant(Matrix::from_partial_diagonal(2, 2, &[1.0, 2.0]));
        let a = exp_ode(&k, &ts, 2.0, 0.0, &grid(), &tol()).unwrap();
        let b = exp_commuting(&k, &ts, 2.0, 0.0, &grid(), &tol()).unwrap();
        assert!(norm_max(&(&a - &b)) / norm_max(&b) <= 1e-8);
    }

    #[test]
    fn commuting_engine_rejects_noncommuting_family() {
        let iv = TimeScale::interval(0.0, 1.0).unwrap();
        // K(t) = [[0, 1], [0, 0]] at t < 0.5 rotated afterwards: genuinely
        // non-commuting across times
        let k = MatrixCurve::from_fn(2, |t| {
            if t < 0.5 {
                Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])
            } else {
                Matrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])
            }
        });
        match exp_commuting(&k, &iv, 1.0, 0.0, &grid(), &tol()) {
            Err(Error::NonCommuting { .. }) => {}
            other => panic!("expected NonCommuting, got {other:?}"),
        }
        // the ODE engine handles it fine
        assert!(exp_ode(&k, &iv, 1.0, 0.0, &grid(), &tol()).is_ok());
    }

    #[test]
    fn non_regressive_factor_is_loud() {
        let z = TimeScale::integers(0, 3);
        let k = MatrixCurve::constant(-Matrix::identity(2, 2));
        match exp_ode(&k, &z, 3.0, 0.0, &grid(), &tol()) {
            Err(Error::NonRegressive { t, .. }) => assert_abs_diff_eq!(t, 0.0),
            other => panic!("expected NonRegressive, got {other:?}"),
        }
    }

    #[test]
    fn classical_limit_constant_coefficient() {
        let iv = TimeScale::interval(0.0, 1.5).unwrap();
        let km = Matrix::from_row_slice(2, 2, &[0.3, -1.0, 0.7, -0.2]);
        let k = MatrixCurve::constant(km.clone());
        let e = exp_ode(&k, &iv, 1.5, 0.0, &grid(), &tol()).unwrap();
        let exact = (km * 1.5).exp();
        assert!(norm_max(&(&e - &exact)) <= 1e-8 * norm_max(&exact).max(1.0));
    }

    #[test]
    fn identity_suite_on_diagonal_pair() {
        let ts = mixed();
        let k = MatrixCurve::constant(Matrix::from_partial_diagonal(2, 2, &[1.0, 2.0]));
        let l = MatrixCurve::constant(Matrix::from_partial_diagonal(2, 2, &[3.0, 4.0]));
        let nodes = [0.0, 0.5, 1.0, 1.5, 2.0];
        let rep = exp_identity_suite(&k, &l, &ts, &nodes, &grid(), &tol()).unwrap();
        assert!(rep.point_identity <= 1e-12, "{rep:?}");
        assert!(rep.sigma_shift <= 1e-12, "{rep:?}");
        assert!(rep.inverse <= 1e-7, "{rep:?}");
        assert!(rep.semigroup <= 1e-7, "{rep:?}");
        assert!(rep.product.unwrap() <= 1e-7, "{rep:?}");
        assert!(rep.delta_derivative <= 1e-6, "{rep:?}");
    }

    #[test]
    fn semigroup_power_of_two_oracle_on_integers() {
        // scalar k = 1 on integers: e(t, s) = 2^(t - s) exactly
        let z = TimeScale::integers(0, 6);
        let one = MatrixCurve::constant(Matrix::from_element(1, 1, 1.0));
        for (t, s) in [(5.0, 2.0), (4.0, 0.0), (6.0, 3.0)] {
            let e = exp_ode(&one, &z, t, s, &grid(), &tol()).unwrap();
            assert_abs_diff_eq!(e[(0, 0)], 2.0_f64.powf(t - s), epsilon = 1e-12);
        }
        // inverse direction
        let e = exp_ode(&one, &z, 1.0, 4.0, &grid(), &tol()).unwrap();
        assert_abs_diff_eq!(e[(0, 0)], 0.125, epsilon = 1e-12);
    }

    #[test]
    fn oplus_factor_oracle_mu_one() {
        // diagonal K, L with mu = 1: the sigma-shift factor of K o+ L is
        // (1 + k)(1 + l) per entry, matching the product of factors
        let z = TimeScale::integers(0, 2);
        let k = MatrixCurve::constant(Matrix::from_partial_diagonal(2, 2, &[1.0, 2.0]));
        let l = MatrixCurve::constant(Matrix::from_partial_diagonal(2, 2, &[3.0, 4.0]));
        let rep = exp_identity_suite(&k, &l, &z, &[0.0, 1.0, 2.0], &grid(), &tol()).unwrap();
        assert!(rep.product.unwrap() <= 1e-12, "{rep:?}");
        let ek = exp_ode(&k, &z, 2.0, 0.0, &grid(), &tol()).unwrap();
        let el = exp_ode(&l, &z, 2.0, 0.0, &grid(), &tol()).unwrap();
        let prod = &ek * &el;
        assert_abs_diff_eq!(prod[(0, 0)], (2.0 * 4.0_f64).powi(2), epsilon = 1e-10);
        assert_abs_diff_eq!(prod[(1, 1)], (3.0 * 5.0_f64).powi(2), epsilon = 1e-10);
    }
}
