//! Property tests for the calculus layer, the circle algebra, the expression
//! language, and cross-solver agreement.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use tsdyn::expr::{parse_expression, BinOp, Expr, Func};
use tsdyn::field::builtins;
use tsdyn::matrix::{self, norm_max, Matrix, SeededRng, Tolerances};
use tsdyn::solver::{solve_linear_sigma, solve_sigma, ImplicitOpts};
use tsdyn::timescale::{GridSpec, TimeScale, DEFAULT_FD_STEP};
use tsdyn::MatrixCurve;

// ---------------------------------------------------------------------------
// random time scales
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct TsSpec {
    segments: Vec<(f64, f64)>,
}

fn timescale_strategy() -> impl Strategy<Value = TsSpec> {
    // 2 to 4 segments: random widths (zero width = isolated point) with
    // strictly positive gaps. At least two segments, so the scale is never a
    // single isolated point (no derivative exists there).
    proptest::collection::vec((0.05f64..1.0, 0.0f64..1.0), 2..5).prop_map(|parts| {
        let mut segments = Vec::new();
        let mut cursor = 0.0;
        for (gap, width) in parts {
            let l = cursor + gap;
            let w = if width < 0.3 { 0.0 } else { width };
            segments.push((l, l + w));
            cursor = l + w;
        }
        TsSpec { segments }
    })
}

fn node_sample(ts: &TimeScale) -> Vec<f64> {
    let mut nodes = Vec::new();
    for &(l, r) in ts.segments() {
        nodes.push(l);
        if r > l {
            nodes.push(l + (r - l) / 3.0);
            nodes.push(r);
        }
    }
    nodes
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jump_operators_respect_order(spec in timescale_strategy()) {
        let ts = TimeScale::new(spec.segments).unwrap();
        for t in node_sample(&ts) {
            let sigma = ts.sigma(t).unwrap();
            let rho = ts.rho(t).unwrap();
            let mu = ts.graininess(t).unwrap();
            prop_assert!(sigma >= t);
            prop_assert!(rho <= t);
            prop_assert!(mu >= 0.0);
            prop_assert!(ts.contains(sigma));
            prop_assert!(ts.contains(rho));
            // sigma(rho(sigma(t))) = sigma(t)
            let srs = ts.sigma(ts.rho(sigma).unwrap()).unwrap();
            prop_assert!((srs - sigma).abs() <= 1e-12);
        }
    }

    #[test]
    fn delta_integral_is_additive(spec in timescale_strategy(), frac in 0.1f64..0.9) {
        let ts = TimeScale::new(spec.segments).unwrap();
        let grid = GridSpec::default();
        let curve = MatrixCurve::scalar(|t| (1.3 * t).sin() + 0.25 * t * t);
        let (a, b) = (ts.min(), ts.max());
        // split point: project a fraction of the span onto the scale
        let raw = a + frac * (b - a);
        let mid = ts
            .segments()
            .iter()
            .find_map(|&(l, r)| {
                if raw <= l {
                    Some(l)
                } else if raw <= r {
                    Some(raw)
                } else {
                    None
                }
            })
            .unwrap_or(b);
        let whole = ts.delta_integral(&curve, a, b, &grid).unwrap();
        let left = ts.delta_integral(&curve, a, mid, &grid).unwrap();
        let right = ts.delta_integral(&curve, mid, b, &grid).unwrap();
        let err = norm_max(&(&whole - (&left + &right)));
        prop_assert!(err <= 1e-9 * norm_max(&whole).max(1.0), "err = {err}");
    }

    #[test]
    fn suf_formula_and_product_rule(spec in timescale_strategy()) {
        let ts = TimeScale::new(spec.segments).unwrap();
        let x = MatrixCurve::from_fn(2, |t| {
            Matrix::from_row_slice(2, 2, &[t.cos(), 0.2 * t, t * t, 1.0 + t])
        });
        let y = MatrixCurve::from_fn(2, |t| {
            Matrix::from_row_slice(2, 2, &[(0.5 * t).exp(), 1.0, -t, t.sin()])
        });
        let xc = x.clone();
        let yc = y.clone();
        let xy = MatrixCurve::from_fn(2, move |t| xc.eval(t) * yc.eval(t));
        let kappa = ts.kappa_truncate();
        for t in node_sample(&ts) {
            if !kappa.contains(t) || t >= kappa.max() - 1e-12 && ts.graininess(t).unwrap() > 1e-12 {
                continue;
            }
            let mu = ts.graininess(t).unwrap();
            let dx = ts.delta_derivative(&x, t, DEFAULT_FD_STEP).unwrap();
            // simple useful formula X(sigma(t)) = X(t) + mu X^D(t)
            if mu > 1e-12 {
                let lhs = x.eval(ts.sigma(t).unwrap());
                let rhs = x.eval(t) + &dx * mu;
                let scale = norm_max(&lhs).max(1.0);
                prop_assert!(norm_max(&(&lhs - &rhs)) <= 1e-12 * scale);
            }
            // product rule (XY)^D = X^D Y + X^sigma Y^D
            let dy = ts.delta_derivative(&y, t, DEFAULT_FD_STEP).unwrap();
            let dxy = ts.delta_derivative(&xy, t, DEFAULT_FD_STEP).unwrap();
            let x_sigma = x.eval(ts.sigma(t).unwrap());
            let rhs = &dx * y.eval(t) + &x_sigma * &dy;
            let tol = if mu > 1e-12 { 1e-10 } else { 1e-4 };
            let scale = norm_max(&rhs).max(1.0);
            prop_assert!(
                norm_max(&(&dxy - &rhs)) <= tol * scale,
                "t = {t}, mu = {mu}, err = {}",
                norm_max(&(&dxy - &rhs))
            );
        }
    }

    #[test]
    fn circle_plus_minus_cancels(
        entries in proptest::array::uniform4(-1.0f64..1.0),
        mu in 0.0f64..1.5,
    ) {
        let tol = Tolerances::default();
        let a = Matrix::from_row_slice(2, 2, &entries);
        if matrix::regressivity_factor(&a, mu, &tol).is_err() {
            return Ok(());
        }
        let minus = matrix::circle_minus(&a, mu, &tol).unwrap();
        let zero = matrix::circle_plus(&a, &minus, mu).unwrap();
        prop_assert!(norm_max(&zero) <= 1e-9 * norm_max(&a).max(1.0));
        // and the binary form agrees with plus-of-minus
        let b = Matrix::from_row_slice(2, 2, &[entries[1], entries[2], entries[3], entries[0]]);
        if matrix::regressivity_factor(&b, mu, &tol).is_ok() {
            let lhs = matrix::circle_minus_binary(&a, &b, mu, &tol).unwrap();
            let rhs = matrix::circle_plus(
                &a,
                &matrix::circle_minus(&b, mu, &tol).unwrap(),
                mu,
            )
            .unwrap();
            prop_assert!(norm_max(&(&lhs - &rhs)) <= 1e-9 * norm_max(&lhs).max(1.0));
        }
    }
}

// ---------------------------------------------------------------------------
// expression language: differential test against a brute-force oracle
// ---------------------------------------------------------------------------

/// Independent tree-walking evaluator: plain recursion, `None` on any domain
/// violation or non-finite value.
fn oracle_eval(e: &Expr, t: f64, p: &Matrix) -> Option<f64> {
    let v = match e {
        Expr::Num(x) => *x,
        Expr::Time => t,
        Expr::Var { row, col } => p[(*row, *col)],
        Expr::Neg(inner) => -oracle_eval(inner, t, p)?,
        Expr::Bin(op, a, b) => {
            let x = oracle_eval(a, t, p)?;
            let y = oracle_eval(b, t, p)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return None;
                    }
                    x / y
                }
                BinOp::Pow => x.powf(y),
            }
        }
        Expr::Call(f, a) => {
            let x = oracle_eval(a, t, p)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Sqrt => {
                    if x < 0.0 {
                        return None;
                    }
                    x.sqrt()
                }
                Func::Abs => x.abs(),
            }
        }
    };
    v.is_finite().then_some(v)
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-4i32..5).prop_map(|k| Expr::Num(k as f64)),
        (-2.0f64..2.0).prop_map(Expr::Num),
        Just(Expr::Time),
        (0usize..2, 0usize..2).prop_map(|(row, col)| Expr::Var { row, col }),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div),
                    Just(BinOp::Pow)
                ],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
            (
                prop_oneof![
                    Just(Func::Sin),
                    Just(Func::Cos),
                    Just(Func::Exp),
                    Just(Func::Sqrt),
                    Just(Func::Abs)
                ],
                inner
            )
                .prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parser_matches_brute_force_oracle(
        ast in expr_strategy(),
        t in -2.0f64..2.0,
        entries in proptest::array::uniform4(-2.0f64..2.0),
    ) {
        let printed = ast.to_string();
        let reparsed = parse_expression(&printed, 2).expect("printer output parses");
        let p = Matrix::from_row_slice(2, 2, &entries);
        let expected = oracle_eval(&ast, t, &p);
        let got = reparsed.eval(t, &p).ok();
        match (expected, got) {
            (Some(a), Some(b)) => prop_assert!(
                a == b || (a - b).abs() <= f64::EPSILON * a.abs().max(1.0),
                "{printed}: oracle {a} vs parsed {b}"
            ),
            (None, None) => {}
            (a, b) => prop_assert!(false, "{printed}: oracle {a:?} vs parsed {b:?}"),
        }
    }
}

// ---------------------------------------------------------------------------
// cross-solver agreement on linear sigma problems
// ---------------------------------------------------------------------------

#[test]
fn sigma_and_linear_solvers_agree_on_random_linear_problems() {
    let ts = TimeScale::new(vec![(0.0, 0.5), (0.75, 0.75), (1.0, 1.5)]).unwrap();
    let grid = GridSpec::default();
    let tol = Tolerances::default();
    let mut checked = 0;
    for seed in 0..12u64 {
        let mut rng = SeededRng::seed_from_u64(seed);
        let vm = Matrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let gm = Matrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let v = MatrixCurve::constant(vm.clone());
        let g = MatrixCurve::constant(gm);
        if !matrix::is_regressive(&MatrixCurve::constant(vm.transpose()), &ts, &grid, &tol) {
            continue;
        }
        let init = Matrix::identity(2, 2);
        let field = builtins::linear_sigma_field(v.clone(), g.clone());
        let s = solve_sigma(&field, &ts, 0.0, 1.5, &init, &grid, &ImplicitOpts::default())
            .unwrap();
        let l = solve_linear_sigma(&v, &g, &ts, 0.0, 1.5, &init, &grid).unwrap();
        let d = s.distance_at_shared_nodes(&l);
        assert!(d <= 1e-6, "seed {seed}: distance {d}");
        checked += 1;
    }
    assert!(checked >= 8, "too few regressive samples ({checked})");
}

#[test]
fn trajectory_nodes_start_exact_and_stay_in_scale() {
    let ts = TimeScale::new(vec![(0.0, 0.5), (0.75, 0.75), (1.0, 1.5)]).unwrap();
    let grid = GridSpec::default();
    let field = builtins::linear_explicit(
        Matrix::from_row_slice(2, 2, &[0.1, -0.3, 0.2, 0.05]),
        Matrix::zeros(2, 2),
    );
    let init = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let traj =
        tsdyn::solver::solve_explicit(&field, &ts, 0.0, 1.5, &init, &grid).unwrap();
    assert_eq!(traj.nodes[0].0, 0.0);
    assert_eq!(traj.nodes[0].1, init);
    for (t, _) in &traj.nodes {
        assert!(ts.contains(*t));
    }
    for w in traj.nodes.windows(2) {
        assert!(w[1].0 > w[0].0);
    }
}
