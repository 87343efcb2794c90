use rand::{Rng, SeedableRng};
use tsdyn::field::builtins;
use tsdyn::matrix::{norm_max, Matrix, SeededRng};
use tsdyn::solver::{solve_linear_sigma, solve_sigma, ImplicitOpts};
use tsdyn::timescale::{GridSpec, TimeScale};
use tsdyn::MatrixCurve;

fn main() {
    // single dense interval, no scattered points at all
    let ts = TimeScale::interval(0.0, 0.5).unwrap();
    let grid = GridSpec::default();
    let mut rng = SeededRng::seed_from_u64(0);
    let vm = Matrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
    let gm = Matrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
    let v = MatrixCurve::constant(vm.clone());
    let g = MatrixCurve::constant(gm.clone());
    let init = Matrix::identity(2, 2);
    let field = builtins::linear_sigma_field(v.clone(), g.clone());
    let s = solve_sigma(&field, &ts, 0.0, 0.5, &init, &grid, &ImplicitOpts::default()).unwrap();
    let l = solve_linear_sigma(&v, &g, &ts, 0.0, 0.5, &init, &grid).unwrap();

    // exact: X(t) = e^{-V^T t} (I + int_0^t e^{V^T s} G ds); evaluate the
    // integral by fine Simpson on e^{V^T s} G
    let vt = vm.transpose();
    let exact_at = |t: f64| -> Matrix {
        let m = 4000usize;
        let h = t / m as f64;
        let mut acc = Matrix::zeros(2, 2);
        for k in 0..=m {
            let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += (&vt * (k as f64 * h)).exp() * &gm * w;
        }
        acc *= h / 3.0;
        (-(&vt) * t).exp() * (&init + acc)
    };
    for probe in [0.1, 0.3, 0.5] {
        let sx = s.at(probe).unwrap();
        let lx = l.at(probe).unwrap();
        let ex = exact_at(probe);
        println!(
            "t = {probe}: sigma err {:.3e}, linear err {:.3e}, sigma-linear {:.3e}",
            norm_max(&(sx - &ex)),
            norm_max(&(lx - &ex)),
            norm_max(&(sx - lx))
        );
    }
}
