//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test -p tsdyn --test acceptance -- --nocapture` to see the
//! per-criterion lines.

use std::time::Instant;

use rand::{Rng, SeedableRng};

use tsdyn::certifier::{
    certify, check_inverse_lipschitz, check_lipschitz_left, check_lipschitz_sigma_left,
    DomainSet, ProblemBundle, Side, Theorem, Verdict,
};
use tsdyn::field::{builtins, MatrixField};
use tsdyn::matrix::{
    self, norm_max, positive_definite_property_suite, Matrix, SeededRng, Tolerances,
};
use tsdyn::solver::{
    multiplicity_probe, residual_check, solve_explicit, solve_linear_sigma, solve_sigma,
    ImplicitOpts, SolveForm,
};
use tsdyn::timescale::{GridSpec, TimeScale};
use tsdyn::tsexp::exp_identity_suite;
use tsdyn::MatrixCurve;

fn criterion(n: usize, label: &str, pass: bool, detail: &str) {
    println!(
        "criterion {n:>2}: {} - {label} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} failed: {label} ({detail})");
}

/// `{0, 0.25, 0.5, 0.75} U [1, 2]`, the mixed fixture scale.
fn mixed_ts() -> TimeScale {
    TimeScale::new(vec![
        (0.0, 0.0),
        (0.25, 0.25),
        (0.5, 0.5),
        (0.75, 0.75),
        (1.0, 2.0),
    ])
    .unwrap()
}

/// Independent scalar evaluation of the fixture's closed-form solution
/// `X(t) = e_{(-)(K(I + 2 mu K)^{-1})}(t, 0) (1 + t)` for `K = diag(1, 2)`
/// on the mixed fixture scale: jump factors `(1 + 2 mu k)/(1 + 3 mu k)` at
/// the four scattered points, `exp(-k (t - 1))` across the dense block.
fn fixture_closed_form(t: f64) -> Matrix {
    let entry = |k: f64| {
        let mut v = 1.0_f64;
        for s in [0.0, 0.25, 0.5, 0.75] {
            if s < t - 1e-12 {
                let mu = 0.25;
                v *= (1.0 + 2.0 * mu * k) / (1.0 + 3.0 * mu * k);
            }
        }
        if t > 1.0 + 1e-12 {
            v *= (-k * (t - 1.0)).exp();
        }
        v * (1.0 + t)
    };
    Matrix::from_partial_diagonal(2, 2, &[entry(1.0), entry(2.0)])
}

#[test]
fn criterion_01_example3_closed_form() {
    let start = Instant::now();
    let ts = mixed_ts();
    let grid = GridSpec::default();
    let kd = [1.0, 2.0];
    let init = Matrix::identity(2, 2);

    let field = builtins::example3(&ts, &kd, 0.0);
    let sigma = solve_sigma(&field, &ts, 0.0, 2.0, &init, &grid, &ImplicitOpts::default())
        .expect("sigma solve");
    let v = builtins::example3_v_curve(&ts, &kd);
    let g = builtins::example3_g_curve(&ts, &kd, 0.0);
    let linear = solve_linear_sigma(&v, &g, &ts, 0.0, 2.0, &init, &grid).expect("linear solve");

    let mut worst = 0.0_f64;
    for traj in [&sigma, &linear] {
        for (t, x) in &traj.nodes {
            worst = worst.max(norm_max(&(x - fixture_closed_form(*t))));
        }
    }
    let elapsed = start.elapsed();
    criterion(
        1,
        "example 3 closed form matched by both solvers at every node",
        worst <= 1e-6 && elapsed.as_secs_f64() < 5.0,
        &format!("max error {worst:.3e}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_exponential_identity_suite() {
    let ts = mixed_ts();
    let grid = GridSpec::default();
    let tol = Tolerances::default();
    let nodes = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0];

    let diag_k = MatrixCurve::constant(Matrix::from_partial_diagonal(2, 2, &[1.0, 2.0]));
    let diag_l = MatrixCurve::constant(Matrix::from_partial_diagonal(2, 2, &[3.0, 4.0]));
    let rep_diag = exp_identity_suite(&diag_k, &diag_l, &ts, &nodes, &grid, &tol).unwrap();

    let jordan = MatrixCurve::constant(Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]));
    let zero = MatrixCurve::zero(2);
    let rep_jordan = exp_identity_suite(&jordan, &zero, &ts, &nodes, &grid, &tol).unwrap();

    let mut pass = true;
    let mut details = Vec::new();
    for (name, rep) in [("diag", &rep_diag), ("jordan", &rep_jordan)] {
        pass &= rep.point_identity <= 1e-7
            && rep.sigma_shift <= 1e-12
            && rep.inverse <= 1e-7
            && rep.semigroup <= 1e-7
            && rep.delta_derivative <= 1e-7;
        details.push(format!(
            "{name}: shift {:.1e}, inv {:.1e}, semigroup {:.1e}, deriv {:.1e}",
            rep.sigma_shift, rep.inverse, rep.semigroup, rep.delta_derivative
        ));
    }
    // commuting product identity, diagonal pair only
    let product = rep_diag.product.expect("diagonal pair commutes");
    pass &= product <= 1e-7;
    details.push(format!("product {product:.1e}"));

    criterion(
        2,
        "exponential identities on the mixed scale",
        pass,
        &details.join("; "),
    );
}

fn example1_bundle(l: f64) -> ProblemBundle {
    ProblemBundle {
        field: Some(builtins::example1()),
        pq_curves: None,
        bound: MatrixCurve::constant(Matrix::from_partial_diagonal(2, 2, &[l, l])),
        ts: mixed_ts(),
        domain: DomainSet::symmetric_pair_family(),
        grid: GridSpec::default(),
        base_point: 0.0,
        samples: 500,
        seed: 42,
        tol: Tolerances::default(),
    }
}

#[test]
fn criterion_03_example1_certificate_and_mutation() {
    let start = Instant::now();
    let report = certify(Theorem::Exis2, &example1_bundle(2.0)).unwrap();
    let mutated = certify(Theorem::Exis2, &example1_bundle(1.0)).unwrap();
    let witness_p1 = mutated
        .conditions
        .iter()
        .find(|c| c.id == "partial_bound")
        .and_then(|c| c.witness.as_ref())
        .map(|w| w.p[0][0])
        .unwrap_or(f64::NAN);
    let elapsed = start.elapsed();
    criterion(
        3,
        "example 1 certificate (exis2) passes; L = I mutation fails",
        report.passed() && !mutated.passed() && witness_p1 > 0.5 && elapsed.as_secs_f64() < 10.0,
        &format!(
            "verdicts {:?}/{:?}, witness p1 = {witness_p1:.3}, {elapsed:.2?}",
            report.verdict, mutated.verdict
        ),
    );
}

#[test]
fn criterion_04_example2_inverse_lipschitz() {
    let ts = TimeScale::interval(0.5, 2.0).unwrap();
    let grid = GridSpec::default();
    let tol = Tolerances::default();
    let (p, q, b) = builtins::example2_curves(builtins::UProfile::OnePlusT);
    let good = check_inverse_lipschitz(&p, &q, &b, Side::Left, false, &ts, 50, &grid, &tol)
        .unwrap();
    let (p, q, b) = builtins::example2_curves(builtins::UProfile::T);
    let bad = check_inverse_lipschitz(&p, &q, &b, Side::Left, false, &ts, 50, &grid, &tol)
        .unwrap();
    let witness_t = bad.witness.as_ref().map(|w| w.t).unwrap_or(f64::NAN);
    criterion(
        4,
        "example 2 inverse-Lipschitz: u = 1 + t passes, u = t fails below 1",
        good.verdict == Verdict::Pass && bad.verdict == Verdict::Fail && witness_t < 1.0,
        &format!(
            "margins {:?}/{:?}, witness t = {witness_t}",
            good.margin, bad.margin
        ),
    );
}

#[test]
fn criterion_05_sigma_checks_reduce_when_dense() {
    let ts = TimeScale::interval(0.0, 1.0).unwrap();
    let grid = GridSpec::default();
    let tol = Tolerances::default();
    let domain = DomainSet::pd_cone(2);

    let mut pass = true;
    let mut details = Vec::new();
    // one field satisfying its bound and one violating it
    let cases: Vec<(MatrixField, Matrix)> = vec![
        (
            builtins::linear_explicit(
                Matrix::from_partial_diagonal(2, 2, &[1.0, 2.0]),
                Matrix::zeros(2, 2),
            ),
            Matrix::from_partial_diagonal(2, 2, &[1.0, 2.0]),
        ),
        (
            builtins::linear_explicit(Matrix::identity(2, 2) * 3.0, Matrix::zeros(2, 2)),
            Matrix::identity(2, 2) * 2.0,
        ),
    ];
    for (field, bound_m) in &cases {
        let bound = MatrixCurve::constant(bound_m.clone());
        let plain =
            check_lipschitz_left(field, &bound, &ts, &domain, 200, 21, &grid, &tol).unwrap();
        let sigma =
            check_lipschitz_sigma_left(field, &bound, &ts, &domain, 200, 21, &grid, &tol)
                .unwrap();
        let dm = (plain.margin.unwrap() - sigma.margin.unwrap()).abs();
        pass &= plain.verdict == sigma.verdict && dm <= 1e-9;
        details.push(format!("verdicts {:?}/{:?}, |dmargin| {dm:.1e}", plain.verdict, sigma.verdict));
    }
    criterion(
        5,
        "sigma-form checks coincide with plain checks when mu = 0",
        pass,
        &details.join("; "),
    );
}

#[test]
fn criterion_06_discrete_exactness() {
    let z = TimeScale::integers(0, 10);
    let grid = GridSpec::default();
    let init = Matrix::identity(2, 2);

    let f1 = builtins::example1();
    let traj = solve_explicit(&f1, &z, 0.0, 10.0, &init, &grid).unwrap();
    let r1 = residual_check(&traj, &f1, &z, &grid).unwrap();
    let mut worst_linear = 0.0_f64;
    for seed in 0..20 {
        let mut rng = SeededRng::seed_from_u64(seed);
        let m = Matrix::from_fn(2, 2, |_, _| rng.random_range(-0.5..0.5));
        let c = Matrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let f = builtins::linear_explicit(m, c);
        let traj = solve_explicit(&f, &z, 0.0, 10.0, &init, &grid).unwrap();
        worst_linear = worst_linear.max(residual_check(&traj, &f, &z, &grid).unwrap());
    }
    criterion(
        6,
        "explicit solves on the integers have exactly zero residual",
        r1 == 0.0 && worst_linear == 0.0,
        &format!("example1 residual {r1:.1e}, worst linear residual {worst_linear:.1e}"),
    );
}

#[test]
fn criterion_07_uniqueness_cross_check() {
    let grid = GridSpec::default();

    // fixtures whose certificates pass: examples 1 and 3
    let e1_ts = TimeScale::from_points(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
    let e1 = multiplicity_probe(
        &builtins::example1(),
        SolveForm::Explicit,
        &e1_ts,
        0.0,
        0.5,
        &Matrix::identity(2, 2),
        &grid,
        20,
        42,
    )
    .unwrap();

    let ts3 = mixed_ts();
    let e3 = multiplicity_probe(
        &builtins::example3(&ts3, &[1.0, 2.0], 0.0),
        SolveForm::Sigma,
        &ts3,
        0.0,
        2.0,
        &Matrix::identity(2, 2),
        &grid,
        20,
        42,
    )
    .unwrap();

    // the classically non-unique scalar problem has no valid certificate
    let iv = TimeScale::interval(0.0, 1.0).unwrap();
    let nu = multiplicity_probe(
        &builtins::scalar_nonunique(),
        SolveForm::Explicit,
        &iv,
        0.0,
        1.0,
        &Matrix::from_element(1, 1, 0.0),
        &grid,
        20,
        7,
    )
    .unwrap();

    criterion(
        7,
        "probes: certified fixtures tight, non-unique fixture spreads",
        e1.max_pairwise_distance <= 1e-6
            && e3.max_pairwise_distance <= 1e-6
            && nu.max_pairwise_distance >= 0.5
            && nu.multiplicity_suspected,
        &format!(
            "distances: example1 {:.1e}, example3 {:.1e}, nonunique {:.2}",
            e1.max_pairwise_distance, e3.max_pairwise_distance, nu.max_pairwise_distance
        ),
    );
}

#[test]
fn criterion_08_positive_definite_property_suite() {
    let mut pass = true;
    let mut details = Vec::new();
    for n in [2, 3, 4] {
        let rep = positive_definite_property_suite(1000, n, 2024 + n as u64);
        pass &= rep.failures == 0 && rep.worst_psd_margin >= -1e-10;
        details.push(format!(
            "n={n}: failures {}, worst margin {:+.1e}",
            rep.failures, rep.worst_psd_margin
        ));
    }
    criterion(
        8,
        "positive-definite property family holds on 1000 pairs per dimension",
        pass,
        &details.join("; "),
    );
}

#[test]
fn criterion_09_regressive_algebra_identities() {
    let tol = Tolerances::default();
    let mut rng = SeededRng::seed_from_u64(99);
    let mut worst4 = 0.0_f64;
    let mut worst5 = 0.0_f64;
    let mut count = 0usize;
    while count < 1000 {
        let n = 2 + (count % 3);
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mu = if count % 10 == 0 {
            0.0
        } else {
            rng.random_range(0.0..2.0)
        };
        let eye = Matrix::identity(n, n);
        let fa = &eye + &a * mu;
        let fb = &eye + &b * mu;
        // keep the inverse well-conditioned so 1e-9 relative is meaningful
        let inv_a = match fa.clone().try_inverse() {
            Some(inv) if norm_max(&inv) <= 50.0 => inv,
            _ => continue,
        };
        if matrix::regressivity_factor(&b, mu, &tol).is_err() {
            continue;
        }

        let oplus = matrix::circle_plus(&a, &b, mu).unwrap();
        let lhs4 = &eye + &oplus * mu;
        let rhs4 = &fa * &fb;
        worst4 = worst4.max(norm_max(&(&lhs4 - &rhs4)) / norm_max(&rhs4).max(1.0));

        let ominus = matrix::circle_minus(&a, mu, &tol).unwrap();
        let lhs5 = &eye + &ominus * mu;
        worst5 = worst5.max(norm_max(&(&lhs5 - &inv_a)) / norm_max(&inv_a).max(1.0));
        count += 1;
    }
    criterion(
        9,
        "circle algebra factorization identities on 1000 seeded triples",
        worst4 <= 1e-9 && worst5 <= 1e-9,
        &format!("factorization {worst4:.1e}, inverse {worst5:.1e}"),
    );
}

#[test]
fn criterion_10_grid_convergence() {
    let ts = TimeScale::interval(0.0, 0.5).unwrap();
    let f = builtins::example1();
    let init = Matrix::identity(2, 2);
    let mut residuals = Vec::new();
    for step in [2e-3, 1e-3] {
        let grid = GridSpec { dense_step: step };
        let traj = solve_explicit(&f, &ts, 0.0, 0.5, &init, &grid).unwrap();
        residuals.push(residual_check(&traj, &f, &ts, &grid).unwrap());
    }
    let ratio = residuals[0] / residuals[1];
    criterion(
        10,
        "halving the dense step cuts the residual by at least 8x",
        ratio >= 8.0,
        &format!(
            "residuals {:.3e} -> {:.3e}, ratio {ratio:.1}",
            residuals[0], residuals[1]
        ),
    );
}
