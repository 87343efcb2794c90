//! Dense real square-matrix utilities: definiteness, the Loewner order,
//! regressivity, and the circle-plus/circle-minus algebra of regressive
//! matrices.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The seeded generator used everywhere reproducibility matters.
pub type SeededRng = ChaCha8Rng;

use crate::curve::MatrixCurve;
use crate::error::{Error, Result};
use crate::timescale::{GridSpec, TimeScale};

pub type Matrix = DMatrix<f64>;

/// Numerical tolerances for definiteness and equality decisions.
///
/// `psd_tol` is a relative eigenvalue floor: it is scaled by
/// `max(1, max-abs entry)` of the matrices under comparison before use.
/// `eq_tol` is the relative matrix-equality tolerance in the max-abs norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub psd_tol: f64,
    pub eq_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            psd_tol: 1e-10,
            eq_tol: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn new(psd_tol: f64, eq_tol: f64) -> Result<Self> {
        if psd_tol < 0.0 || eq_tol < 0.0 {
            return Err(Error::Usage("tolerances must be nonnegative".into()));
        }
        Ok(Tolerances { psd_tol, eq_tol })
    }

    /// Eigenvalue floor scaled to the magnitude of `m`.
    pub fn psd_floor(&self, m: &Matrix) -> f64 {
        self.psd_tol * norm_max(m).max(1.0)
    }

    /// Equality tolerance scaled to the magnitude of `m`.
    pub fn eq_floor(&self, m: &Matrix) -> f64 {
        self.eq_tol * norm_max(m).max(1.0)
    }
}

/// Max-abs entry norm.
pub fn norm_max(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
}

/// Row-major nested arrays, the wire format for matrices in config and
/// report files.
pub fn rows_from_matrix(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Parse row-major nested arrays into a square matrix with finite entries.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Dimension("matrix must be nonempty".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Dimension(format!(
                "row {i} has {} entries, expected {n} (square matrix)",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!("row {i} contains a non-finite entry")));
        }
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Symmetric part `(M + M^T) / 2`.
pub fn sym_part(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`.
///
/// `z^T M z` depends only on the symmetric part, so this is the exact
/// quadratic-form test for definiteness.
pub fn min_sym_eigenvalue(m: &Matrix) -> f64 {
    let s = sym_part(m);
    let eigs = s.symmetric_eigenvalues();
    eigs.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn max_sym_eigenvalue(m: &Matrix) -> f64 {
    let s = sym_part(m);
    let eigs = s.symmetric_eigenvalues();
    eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Strict positive definiteness: `lambda_min(sym(M))` above the scaled floor.
pub fn is_positive_definite(m: &Matrix, tol: &Tolerances) -> bool {
    min_sym_eigenvalue(m) > tol.psd_floor(m)
}

/// Loewner order `A <= B`: `B - A` positive semidefinite within tolerance.
pub fn loewner_leq(a: &Matrix, b: &Matrix, tol: &Tolerances) -> Result<bool> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "loewner_leq: {}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let d = b - a;
    let floor = tol.psd_tol * norm_max(a).max(norm_max(b)).max(1.0);
    Ok(min_sym_eigenvalue(&d) >= -floor)
}

/// Hadamard bound on `|det|`: the product of row Euclidean norms. Used to
/// scale singularity thresholds.
fn hadamard_bound(m: &Matrix) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(1.0_f64, |acc, r| acc * r.max(f64::MIN_POSITIVE))
}

/// Check `|det(I + mu K)|` against the scaled singularity threshold,
/// returning the offending determinant on failure.
pub fn regressivity_factor(k: &Matrix, mu: f64, tol: &Tolerances) -> Result<Matrix> {
    let n = k.nrows();
    let factor = Matrix::identity(n, n) + k * mu;
    let det = factor.determinant();
    let scale = hadamard_bound(&factor).max(f64::MIN_POSITIVE);
    if det.abs() <= tol.psd_tol * scale {
        return Err(Error::Singular(format!(
            "I + mu K singular (mu = {mu}, |det| = {:.3e})",
            det.abs()
        )));
    }
    Ok(factor)
}

/// Sampled regressivity of a matrix curve: `I + mu(t) K(t)` invertible at
/// every grid node of `T^kappa`. This is evidence, not a proof.
pub fn is_regressive(k: &MatrixCurve, ts: &TimeScale, grid: &GridSpec, tol: &Tolerances) -> bool {
    let kappa = ts.kappa_truncate();
    let nodes = match crate::solver::solve_nodes(&kappa, kappa.min(), kappa.max(), grid) {
        Ok(n) => n,
        Err(_) => return false,
    };
    for t in nodes {
        let mu = match ts.graininess(t) {
            Ok(m) => m,
            Err(_) => return false,
        };
        if regressivity_factor(&k.eval(t), mu, tol).is_err() {
            return false;
        }
    }
    true
}

/// `A (+) B = A + B + mu A B`.
pub fn circle_plus(a: &Matrix, b: &Matrix, mu: f64) -> Result<Matrix> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::Dimension("circle_plus: dimension mismatch".into()));
    }
    Ok(a + b + (a * b) * mu)
}

/// `(-)A = -(I + mu A)^{-1} A`, cross-checked against the right-factored
/// form `-A (I + mu A)^{-1}`.
pub fn circle_minus(a: &Matrix, mu: f64, tol: &Tolerances) -> Result<Matrix> {
    let factor = regressivity_factor(a, mu, tol)?;
    let lu = factor.clone().lu();
    let left = -(lu
        .solve(a)
        .ok_or_else(|| Error::Singular("I + mu A not invertible".into()))?);
    let inv = lu
        .try_inverse()
        .ok_or_else(|| Error::Singular("I + mu A not invertible".into()))?;
    let right = -(a * inv);
    let diff = norm_max(&(&left - &right));
    if diff > tol.eq_floor(&left) * 10.0 {
        return Err(Error::Singular(format!(
            "circle_minus factorizations disagree by {diff:.3e}; I + mu A is too ill-conditioned"
        )));
    }
    Ok(left)
}

/// `A (-) B = A - (I + mu A)(I + mu B)^{-1} B`.
pub fn circle_minus_binary(a: &Matrix, b: &Matrix, mu: f64, tol: &Tolerances) -> Result<Matrix> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::Dimension(
            "circle_minus_binary: dimension mismatch".into(),
        ));
    }
    let n = a.nrows();
    let fa = Matrix::identity(n, n) + a * mu;
    let fb = regressivity_factor(b, mu, tol)?;
    let x = fb
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("I + mu B not invertible".into()))?;
    Ok(a - fa * x)
}

/// Seeded generator for well-conditioned symmetric positive definite
/// matrices: `M^T M + 0.1 I` with entries of `M` uniform in [-1, 1].
pub fn random_spd(n: usize, rng: &mut SeededRng) -> Matrix {
    let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.transpose() * &m + Matrix::identity(n, n) * 0.1
}

/// Worst margins observed by `positive_definite_property_suite`.
#[derive(Debug, Clone)]
pub struct PdSuiteReport {
    pub samples: usize,
    pub dim: usize,
    pub failures: usize,
    /// Smallest PSD-type margin seen across all properties (eigenvalue
    /// floors for definiteness claims, `det` and `trace` margins excluded).
    pub worst_psd_margin: f64,
    /// (property name, worst margin) pairs, one per checked property.
    pub per_property: Vec<(&'static str, f64)>,
}

/// Exercise the positive-definite property family on random SPD pairs:
/// inverses, scaling, spectra, determinant/trace, sums and sandwich
/// products, commuting products, order reversal of inverses, and the
/// existence of `beta` with `A > beta I`.
pub fn positive_definite_property_suite(samples: usize, n: usize, seed: u64) -> PdSuiteReport {
    let mut rng = SeededRng::seed_from_u64(seed);
    let tol = Tolerances::default();
    let mut failures = 0usize;
    let mut worst = f64::INFINITY;
    let mut per: Vec<(&'static str, f64)> = vec![
        ("inverse_pd", f64::INFINITY),
        ("positive_scaling", f64::INFINITY),
        ("eigenvalues_positive", f64::INFINITY),
        ("det_trace_positive", f64::INFINITY),
        ("sum_and_sandwich_pd", f64::INFINITY),
        ("commuting_products", f64::INFINITY),
        ("inverse_order_reversal", f64::INFINITY),
        ("beta_lower_bound", f64::INFINITY),
    ];

    let record = |slot: &mut f64, margin: f64, strict: bool, failures: &mut usize| {
        *slot = slot.min(margin);
        let ok = if strict { margin > 0.0 } else { margin >= -1e-10 };
        if !ok {
            *failures += 1;
        }
        margin
    };

    for _ in 0..samples {
        let a = random_spd(n, &mut rng);
        let b = random_spd(n, &mut rng);

        // 1. inverse exists and is PD
        let a_inv = a.clone().try_inverse();
        let m1 = match &a_inv {
            Some(ai) => min_sym_eigenvalue(ai),
            None => f64::NEG_INFINITY,
        };
        worst = worst.min(record(&mut per[0].1, m1, true, &mut failures));

        // 2. positive scaling
        let alpha = rng.random_range(0.1..5.0);
        let m2 = min_sym_eigenvalue(&(&a * alpha));
        worst = worst.min(record(&mut per[1].1, m2, true, &mut failures));

        // 3. eigenvalues positive
        let m3 = a
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        worst = worst.min(record(&mut per[2].1, m3, true, &mut failures));

        // 4. det > 0 and trace > 0 (value margins, not PSD margins)
        let m4 = a.determinant().min(a.trace());
        record(&mut per[3].1, m4, true, &mut failures);

        // 5. A + B, ABA, BAB all PD
        let m5 = min_sym_eigenvalue(&(&a + &b))
            .min(min_sym_eigenvalue(&(&a * &b * &a)))
            .min(min_sym_eigenvalue(&(&b * &a * &b)));
        worst = worst.min(record(&mut per[4].1, m5, true, &mut failures));

        // 6. commuting PD pair has PD product; commuting C <= 0 gives AC <= 0.
        //    Built in a shared eigenbasis so the matrices genuinely commute.
        let q = random_orthogonal(n, &mut rng);
        let d1 = Matrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
            rng.random_range(0.1..2.0)
        }));
        let d2 = Matrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
            rng.random_range(0.1..2.0)
        }));
        let d3 = Matrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
            -rng.random_range(0.0..2.0)
        }));
        let ca = &q * &d1 * q.transpose();
        let cb = &q * &d2 * q.transpose();
        let cc = &q * &d3 * q.transpose();
        let prod_pd = min_sym_eigenvalue(&(&ca * &cb));
        let neg_prod = -max_sym_eigenvalue(&(&ca * &cc));
        let m6 = prod_pd.min(if neg_prod.is_nan() { 0.0 } else { neg_prod });
        worst = worst.min({
            per[5].1 = per[5].1.min(m6);
            // prod_pd is a strict claim, the AC <= 0 half is non-strict
            if prod_pd <= 0.0 || neg_prod < -1e-10 {
                failures += 1;
            }
            m6
        });

        // 7. A' - B' >= 0 implies A' >= B' and B'^{-1} >= A'^{-1} > 0
        let gap = {
            let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            m.transpose() * &m
        };
        let a_big = &b + &gap;
        let order = min_sym_eigenvalue(&(&a_big - &b));
        let inv_order = match (a_big.clone().try_inverse(), b.clone().try_inverse()) {
            (Some(abi), Some(bi)) => min_sym_eigenvalue(&(bi - abi)),
            _ => f64::NEG_INFINITY,
        };
        let m7 = order.min(inv_order);
        worst = worst.min(record(&mut per[6].1, m7, false, &mut failures));

        // 8. beta = lambda_min / 2 gives A > beta I
        let lam_min = min_sym_eigenvalue(&a);
        let beta = lam_min / 2.0;
        let m8 = min_sym_eigenvalue(&(&a - Matrix::identity(n, n) * beta));
        worst = worst.min(record(&mut per[7].1, m8, true, &mut failures));

        let _ = &tol;
    }

    PdSuiteReport {
        samples,
        dim: n,
        failures,
        worst_psd_margin: worst,
        per_property: per,
    }
}

/// Random orthogonal matrix from the QR factorization of a Gaussian-ish
/// random matrix.
pub fn random_orthogonal(n: usize, rng: &mut SeededRng) -> Matrix {
    let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let qr = m.qr();
    qr.q()
}
