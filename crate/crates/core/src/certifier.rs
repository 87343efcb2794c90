//! Sampling-based certificates for the uniqueness hypotheses of matrix
//! dynamic equations: positive-definite bounds, commutation with the bound's
//! exponential, matrix Lipschitz conditions (plain and sigma-form), the
//! partial-derivative bound route, and the inverse-Lipschitz corollaries.
//!
//! A certificate verdict of `Pass` means every sampled instance of every
//! required hypothesis held. It is evidence, not proof: the hypotheses
//! quantify over a continuum and are only spot-checked at seeded samples.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::curve::MatrixCurve;
use crate::error::{Error, Result};
use crate::field::MatrixField;
use crate::matrix::{
    self, matrix_from_rows, min_sym_eigenvalue, norm_max, rows_from_matrix, Matrix, SeededRng,
    Tolerances,
};
use crate::timescale::{GridSpec, TimeScale, DEFAULT_FD_STEP};
use crate::tsexp;

/// Outcome of one checked condition, or of a whole certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Margins inside the numerical noise band: neither pass nor fail.
    Indeterminate,
    /// Hypothesis not decidable from samples (rd-continuity); recorded, not
    /// checked.
    Assumed,
}

/// The sample that produced the worst margin of a condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub p: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    pub margin: f64,
    pub detail: String,
}

impl Witness {
    pub fn p_matrix(&self) -> Result<Matrix> {
        matrix_from_rows(&self.p)
    }

    pub fn q_matrix(&self) -> Result<Option<Matrix>> {
        self.q.as_ref().map(|q| matrix_from_rows(q)).transpose()
    }
}

/// One hypothesis record inside a certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub id: String,
    pub verdict: Verdict,
    /// Worst margin over all samples. For eigenvalue-based conditions this is
    /// the smallest `lambda_min`; for commutation it is
    /// `tolerance - worst residual`. Positive margins are healthy. Absent
    /// for assumed (unchecked) hypotheses.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl ConditionRecord {
    fn assumed(id: &str, note: &str) -> Self {
        ConditionRecord {
            id: id.into(),
            verdict: Verdict::Assumed,
            margin: None,
            samples: 0,
            witness: None,
            note: note.into(),
        }
    }
}

/// Structured pass/fail report over every hypothesis of a named theorem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub format_version: u32,
    pub theorem: String,
    pub verdict: Verdict,
    pub samples: usize,
    pub seed: u64,
    pub conditions: Vec<ConditionRecord>,
}

impl CertificateReport {
    fn assemble(theorem: &str, samples: usize, seed: u64, conditions: Vec<ConditionRecord>) -> Self {
        let mut verdict = Verdict::Pass;
        for c in &conditions {
            match c.verdict {
                Verdict::Fail => {
                    verdict = Verdict::Fail;
                    break;
                }
                Verdict::Indeterminate => verdict = Verdict::Indeterminate,
                Verdict::Pass | Verdict::Assumed => {}
            }
        }
        CertificateReport {
            format_version: 1,
            theorem: theorem.into(),
            verdict,
            samples,
            seed,
            conditions,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Human-readable table, one line per condition.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "certificate: {}  (samples = {}, seed = {})\n",
            self.theorem, self.samples, self.seed
        ));
        out.push_str(&format!(
            "{:<28} {:<14} {:>14}  note\n",
            "condition", "verdict", "margin"
        ));
        for c in &self.conditions {
            let verdict = format!("{:?}", c.verdict).to_lowercase();
            let margin = match c.margin {
                Some(m) => format!("{m:+.3e}"),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{:<28} {:<14} {:>14}  {}\n",
                c.id, verdict, margin, c.note
            ));
        }
        out.push_str(&format!(
            "overall: {}\n",
            format!("{:?}", self.verdict).to_lowercase()
        ));
        out
    }
}

/// The region `S` of state space a certificate quantifies over, with a
/// seeded sampler.
#[derive(Debug, Clone)]
pub struct DomainSet {
    pub dim: usize,
    pub kind: DomainKind,
}

#[derive(Debug, Clone)]
pub enum DomainKind {
    /// `{ P : ||P - center||_F <= radius }`
    Rectangle { center: Matrix, radius: f64 },
    /// All of state space; sampled with entries uniform in `[-scale, scale]`.
    Strip { scale: f64 },
    /// Symmetric positive definite matrices.
    PdCone,
    /// The structured family `[[p1, -p2], [-p2, p1]]` with `p1^2 + p2^2 <= 1`
    /// (equivalently `tr(P^T P) <= 2`).
    SymmetricPairFamily,
    /// Positive diagonal matrices with entries in `[0.1, scale]` (a
    /// nonsingular-diagonal slice of state space).
    PositiveDiagonal { scale: f64 },
}

impl DomainSet {
    pub fn rectangle(center: Matrix, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Usage("rectangle radius must be positive".into()));
        }
        let dim = center.nrows();
        Ok(DomainSet {
            dim,
            kind: DomainKind::Rectangle { center, radius },
        })
    }

    pub fn strip(dim: usize, scale: f64) -> Self {
        DomainSet {
            dim,
            kind: DomainKind::Strip { scale },
        }
    }

    pub fn pd_cone(dim: usize) -> Self {
        DomainSet {
            dim,
            kind: DomainKind::PdCone,
        }
    }

    pub fn symmetric_pair_family() -> Self {
        DomainSet {
            dim: 2,
            kind: DomainKind::SymmetricPairFamily,
        }
    }

    pub fn positive_diagonal(dim: usize, scale: f64) -> Self {
        DomainSet {
            dim,
            kind: DomainKind::PositiveDiagonal { scale },
        }
    }

    pub fn contains(&self, m: &Matrix) -> bool {
        match &self.kind {
            DomainKind::Rectangle { center, radius } => {
                (m - center).norm() <= radius + 1e-12
            }
            DomainKind::Strip { .. } => true,
            DomainKind::PdCone => min_sym_eigenvalue(m) > 0.0,
            DomainKind::SymmetricPairFamily => {
                let p1 = m[(0, 0)];
                let p2 = -m[(0, 1)];
                (m[(1, 1)] - p1).abs() <= 1e-9
                    && (m[(1, 0)] - m[(0, 1)]).abs() <= 1e-9
                    && p1 * p1 + p2 * p2 <= 1.0 + 1e-12
            }
            DomainKind::PositiveDiagonal { scale } => {
                let n = m.nrows();
                for i in 0..n {
                    for j in 0..n {
                        if i != j && m[(i, j)].abs() > 1e-12 {
                            return false;
                        }
                    }
                    if m[(i, i)] < 0.1 - 1e-12 || m[(i, i)] > scale + 1e-12 {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// Draw a point of `S`.
    pub fn sample(&self, rng: &mut SeededRng) -> Matrix {
        let n = self.dim;
        match &self.kind {
            DomainKind::Rectangle { center, radius } => {
                let dir = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                let nrm = dir.norm().max(1e-12);
                let r = radius * rng.random_range(0.0..1.0);
                center + dir * (r / nrm)
            }
            DomainKind::Strip { scale } => {
                Matrix::from_fn(n, n, |_, _| rng.random_range(-scale..*scale))
            }
            DomainKind::PdCone => matrix::random_spd(n, rng),
            DomainKind::SymmetricPairFamily => {
                // uniform in the unit disk of (p1, p2)
                loop {
                    let p1 = rng.random_range(-1.0..1.0);
                    let p2 = rng.random_range(-1.0..1.0);
                    if p1 * p1 + p2 * p2 <= 1.0 {
                        return Matrix::from_row_slice(2, 2, &[p1, -p2, -p2, p1]);
                    }
                }
            }
            DomainKind::PositiveDiagonal { scale } => Matrix::from_diagonal(
                &nalgebra::DVector::from_fn(n, |_, _| rng.random_range(0.1..*scale)),
            ),
        }
    }

    /// A symmetric positive definite direction compatible with the family
    /// structure (so `Q + delta * R` can stay inside `S`), normalized to unit
    /// max norm.
    fn pd_direction(&self, rng: &mut SeededRng) -> Matrix {
        match &self.kind {
            DomainKind::SymmetricPairFamily => {
                let r1 = rng.random_range(0.1..1.0);
                let r2 = rng.random_range(-0.9 * r1..0.9 * r1);
                let m = Matrix::from_row_slice(2, 2, &[r1, -r2, -r2, r1]);
                &m / norm_max(&m)
            }
            DomainKind::PositiveDiagonal { .. } => {
                let n = self.dim;
                let m = Matrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
                    rng.random_range(0.1..1.0)
                }));
                &m / norm_max(&m)
            }
            _ => {
                let m = matrix::random_spd(self.dim, rng);
                &m / norm_max(&m)
            }
        }
    }

    /// A strictly ordered pair `P > Q` with both points inside `S`: `Q` is
    /// drawn from `S` and `P = Q + delta R` with a positive definite
    /// direction `R`, `delta` shrunk by bisection until `P` stays inside.
    pub fn sample_ordered_pair(
        &self,
        rng: &mut SeededRng,
        tol: &Tolerances,
    ) -> Result<(Matrix, Matrix)> {
        for _attempt in 0..24 {
            let q = self.sample(rng);
            let r = self.pd_direction(rng);
            let mut delta = match &self.kind {
                DomainKind::Rectangle { radius, .. } => *radius,
                DomainKind::Strip { scale } => *scale,
                DomainKind::PdCone => 1.0 + norm_max(&q),
                DomainKind::SymmetricPairFamily => 1.0,
                DomainKind::PositiveDiagonal { scale } => *scale,
            };
            if !self.contains(&(&q + &r * delta)) {
                let mut lo = 0.0_f64;
                let mut hi = delta;
                for _ in 0..48 {
                    let mid = 0.5 * (lo + hi);
                    if self.contains(&(&q + &r * mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                delta = lo * 0.5;
            } else {
                delta *= 0.5;
            }
            let p = &q + &r * delta;
            let gap = min_sym_eigenvalue(&(&p - &q));
            if self.contains(&p) && gap > tol.psd_floor(&p) {
                return Ok((p, q));
            }
        }
        Err(Error::Domain(
            "sampler could not produce a strictly ordered pair inside the domain set".into(),
        ))
    }
}

/// Which side a matrix bound multiplies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Margin of the (possibly sigma-form) Lipschitz inequality at one sample:
/// `lambda_min(sym(bound_term - (F(t,P) - F(t,Q))))` where the bound term is
/// `B(P - Q)` or `(P - Q)B` with `B` replaced by `(I + mu B)^{-1} B` in the
/// sigma form. Nonnegative margins satisfy the inequality.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_margin(
    field: &MatrixField,
    bound: &MatrixCurve,
    ts: &TimeScale,
    t: f64,
    p: &Matrix,
    q: &Matrix,
    side: Side,
    sigma_form: bool,
    tol: &Tolerances,
) -> Result<f64> {
    let delta_f = field.eval(t, p)? - field.eval(t, q)?;
    let b = bound.eval(t);
    let effective = if sigma_form {
        // -circle_minus(B) = (I + mu B)^{-1} B
        let mu = ts.graininess(t)?;
        let factor = matrix::regressivity_factor(&b, mu, tol)?;
        factor
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Singular("I + mu B not invertible".into()))?
    } else {
        b
    };
    let gap = p - q;
    let d = match side {
        Side::Left => &effective * &gap - &delta_f,
        Side::Right => &gap * &effective - &delta_f,
    };
    Ok(min_sym_eigenvalue(&d))
}

fn kappa_node_times(ts: &TimeScale, grid: &GridSpec) -> Result<Vec<f64>> {
    let kappa = ts.kappa_truncate();
    crate::solver::solve_nodes(&kappa, kappa.min(), kappa.max(), grid)
}

/// Evenly spaced subset of the `T^kappa` node list.
fn spread_nodes(all: &[f64], count: usize) -> Vec<f64> {
    if all.len() <= count {
        return all.to_vec();
    }
    (0..count)
        .map(|i| all[i * (all.len() - 1) / (count - 1).max(1)])
        .collect()
}

struct WorstTracker {
    margin: f64,
    witness: Option<Witness>,
    failed: bool,
}

impl WorstTracker {
    fn new() -> Self {
        WorstTracker {
            margin: f64::INFINITY,
            witness: None,
            failed: false,
        }
    }

    fn observe(
        &mut self,
        margin: f64,
        floor: f64,
        t: f64,
        p: &Matrix,
        q: Option<&Matrix>,
        detail: &str,
    ) {
        if margin < self.margin {
            self.margin = margin;
            self.witness = Some(Witness {
                t,
                p: rows_from_matrix(p),
                q: q.map(rows_from_matrix),
                margin,
                detail: detail.into(),
            });
        }
        if margin < -floor {
            self.failed = true;
        }
    }

    fn into_record(self, id: &str, samples: usize, note: &str) -> ConditionRecord {
        let verdict = if self.failed {
            Verdict::Fail
        } else {
            Verdict::Pass
        };
        ConditionRecord {
            id: id.into(),
            verdict,
            margin: self.margin.is_finite().then_some(self.margin),
            samples,
            witness: if verdict == Verdict::Fail { self.witness } else { None },
            note: note.into(),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_lipschitz_check(
    id: &str,
    field: &MatrixField,
    bound: &MatrixCurve,
    ts: &TimeScale,
    domain: &DomainSet,
    samples: usize,
    seed: u64,
    side: Side,
    sigma_form: bool,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<ConditionRecord> {
    let nodes = kappa_node_times(ts, grid)?;
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut tracker = WorstTracker::new();
    let mut indeterminate_note = String::new();
    let mut used = 0usize;
    for _ in 0..samples {
        let t = nodes[rng.random_range(0..nodes.len())];
        let (p, q) = match domain.sample_ordered_pair(&mut rng, tol) {
            Ok(pair) => pair,
            Err(e) => {
                indeterminate_note = format!("sampler exhausted: {e}");
                break;
            }
        };
        let margin = lipschitz_margin(field, bound, ts, t, &p, &q, side, sigma_form, tol)?;
        let floor = tol.psd_tol * norm_max(&p).max(norm_max(&q)).max(norm_max(&bound.eval(t))).max(1.0);
        tracker.observe(margin, floor, t, &p, Some(&q), id);
        used += 1;
    }
    if !indeterminate_note.is_empty() && !tracker.failed {
        let mut rec = tracker.into_record(id, used, &indeterminate_note);
        rec.verdict = Verdict::Indeterminate;
        return Ok(rec);
    }
    Ok(tracker.into_record(id, used, ""))
}

/// `F(t,P) - F(t,Q) <= B(t)(P - Q)` on sampled ordered pairs.
#[allow(clippy::too_many_arguments)]
pub fn check_lipschitz_left(
    field: &MatrixField,
    bound: &MatrixCurve,
    ts: &TimeScale,
    domain: &DomainSet,
    samples: usize,
    seed: u64,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<ConditionRecord> {
    run_lipschitz_check(
        "lipschitz_left",
        field,
        bound,
        ts,
        domain,
        samples,
        seed,
        Side::Left,
        false,
        grid,
        tol,
    )
}

/// `F(t,P) - F(t,Q) <= (P - Q) C(t)` on sampled ordered pairs.
#[allow(clippy::too_many_arguments)]
pub fn check_lipschitz_right(
    field: &MatrixField,
    bound: &MatrixCurve,
    ts: &TimeScale,
    domain: &DomainSet,
    samples: usize,
    seed: u64,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<ConditionRecord> {
    run_lipschitz_check(
        "lipschitz_right",
        field,
        bound,
        ts,
        domain,
        samples,
        seed,
        Side::Right,
        false,
        grid,
        tol,
    )
}

/// Sigma-form left inequality `F(t,P) - F(t,Q) <= (I + mu B)^{-1} B (P - Q)`.
#[allow(clippy::too_many_arguments)]
pub fn check_lipschitz_sigma_left(
    field: &MatrixField,
    bound: &MatrixCurve,
    ts: &TimeScale,
    domain: &DomainSet,
    samples: usize,
    seed: u64,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<ConditionRecord> {
    run_lipschitz_check(
        "lipschitz_sigma_left",
        field,
        bound,
        ts,
        domain,
        samples,
        seed,
        Side::Left,
        true,
        grid,
        tol,
    )
}

/// Sigma-form right inequality `F(t,P) - F(t,Q) <= (P - Q)(I + mu C)^{-1} C`.
#[allow(clippy::too_many_arguments)]
pub fn check_lipschitz_sigma_right(
    field: &MatrixField,
    bound: &MatrixCurve,
    ts: &TimeScale,
    domain: &DomainSet,
    samples: usize,
    seed: u64,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<ConditionRecord> {
    run_lipschitz_check(
        "lipschitz_sigma_right",
        field,
        bound,
        ts,
        domain,
        samples,
        seed,
        Side::Right,
        true,
        grid,
        tol,
    )
}

/// `dF/dp_k <= L` for every declared derivative direction at sampled `(t, P)`.
/// A pass licenses using `B = L` (left) or `C = L` (right) in the theorem
/// checks.
#[allow(clippy::too_many_arguments)]
pub fn check_partial_bound(
    field: &MatrixField,
    bound: &Matrix,
    ts: &TimeScale,
    domain: &DomainSet,
    samples: usize,
    seed: u64,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<ConditionRecord> {
    let nodes = kappa_node_times(ts, grid)?;
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut tracker = WorstTracker::new();
    let mut note = String::new();
    let mut used = 0usize;
    for _ in 0..samples {
        let t = nodes[rng.random_range(0..nodes.len())];
        let p = domain.sample(&mut rng);
        let partials = match field.bound_partials(t, &p) {
            Ok(ds) => ds,
            Err(e) => {
                note = format!("derivative evaluation failed: {e}");
                break;
            }
        };
        for (idx, d) in partials.iter().enumerate() {
            let diff = bound - d;
            let margin = min_sym_eigenvalue(&diff);
            let floor = tol.psd_tol * norm_max(bound).max(norm_max(d)).max(1.0);
            tracker.observe(margin, floor, t, &p, None, &format!("direction {idx}"));
        }
        used += 1;
    }
    if !note.is_empty() && !tracker.failed {
        let mut rec = tracker.into_record("partial_bound", used, &note);
        rec.verdict = Verdict::Indeterminate;
        return Ok(rec);
    }
    Ok(tracker.into_record("partial_bound", used, ""))
}

/// Strict positive definiteness of the bound curve at evenly spread nodes.
pub fn check_bound_positive_definite(
    bound: &MatrixCurve,
    ts: &TimeScale,
    node_count: usize,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<ConditionRecord> {
    let all = crate::solver::solve_nodes(ts, ts.min(), ts.max(), grid)?;
    let nodes = spread_nodes(&all, node_count);
    let mut margin = f64::INFINITY;
    let mut witness = None;
    let mut verdict = Verdict::Pass;
    for &t in &nodes {
        let b = bound.eval(t);
        let m = min_sym_eigenvalue(&b);
        let floor = tol.psd_floor(&b);
        if m < margin {
            margin = m;
            witness = Some(Witness {
                t,
                p: rows_from_matrix(&b),
                q: None,
                margin: m,
                detail: "bound value".into(),
            });
        }
        if m <= -floor {
            verdict = Verdict::Fail;
        } else if m <= floor && verdict == Verdict::Pass {
            verdict = Verdict::Indeterminate;
        }
    }
    Ok(ConditionRecord {
        id: "bound_positive_definite".into(),
        verdict,
        margin: margin.is_finite().then_some(margin),
        samples: nodes.len(),
        witness: if verdict == Verdict::Pass { None } else { witness },
        note: String::new(),
    })
}

/// Commutation of `e_B(t, a)` with `B(t)` and with sampled points of `S`.
/// Margins are `tolerance - residual`, so positive means commuting.
#[allow(clippy::too_many_arguments)]
pub fn check_commutation(
    bound: &MatrixCurve,
    ts: &TimeScale,
    domain: &DomainSet,
    node_count: usize,
    seed: u64,
    grid: &GridSpec,
    tol: &Tolerances,
    base_point: f64,
) -> Result<ConditionRecord> {
    commutation_core(
        bound,
        ts,
        CommutationTargets::Domain(domain),
        node_count,
        seed,
        grid,
        tol,
        base_point,
    )
}

/// Commutation check against supplied state curves: tests both `E P(t)` and
/// `E P^D(t)` commutators.
#[allow(clippy::too_many_arguments)]
pub fn check_commutation_with_curves(
    bound: &MatrixCurve,
    ts: &TimeScale,
    p_curve: &MatrixCurve,
    q_curve: &MatrixCurve,
    node_count: usize,
    grid: &GridSpec,
    tol: &Tolerances,
    base_point: f64,
) -> Result<ConditionRecord> {
    commutation_core(
        bound,
        ts,
        CommutationTargets::Curves(p_curve, q_curve),
        node_count,
        0,
        grid,
        tol,
        base_point,
    )
}

enum CommutationTargets<'a> {
    Domain(&'a DomainSet),
    Curves(&'a MatrixCurve, &'a MatrixCurve),
}

#[allow(clippy::too_many_arguments)]
fn commutation_core(
    bound: &MatrixCurve,
    ts: &TimeScale,
    targets: CommutationTargets<'_>,
    node_count: usize,
    seed: u64,
    grid: &GridSpec,
    tol: &Tolerances,
    base_point: f64,
) -> Result<ConditionRecord> {
    let all = crate::solver::solve_nodes(ts, ts.min(), ts.max(), grid)?;
    let nodes = spread_nodes(&all, node_count);
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut tracker = WorstTracker::new();
    let mut samples = 0usize;
    for &t in &nodes {
        let e = match tsexp::exp_ode(bound, ts, t, base_point, grid, tol) {
            Ok(e) => e,
            Err(err) => {
                return Ok(ConditionRecord {
                    id: "commutation".into(),
                    verdict: Verdict::Fail,
                    margin: None,
                    samples,
                    witness: None,
                    note: format!("exponential of the bound failed: {err}"),
                })
            }
        };
        let push = |other: &Matrix, t: f64, detail: &str, tracker: &mut WorstTracker| {
            let comm = &e * other - other * &e;
            let scale = norm_max(&e).max(1.0) * norm_max(other).max(1.0);
            let floor = tol.eq_tol * scale;
            let margin = floor - norm_max(&comm);
            // floor doubles as the fail threshold: margin < -floor means the
            // residual exceeded twice the tolerance band; treat any negative
            // margin as failure for commutation.
            tracker.observe(margin, 0.0, t, other, None, detail);
        };
        let b = bound.eval(t);
        push(&b, t, "commutator with the bound", &mut tracker);
        samples += 1;
        match &targets {
            CommutationTargets::Domain(domain) => {
                for _ in 0..4 {
                    let p = domain.sample(&mut rng);
                    push(&p, t, "commutator with a domain sample", &mut tracker);
                    samples += 1;
                }
            }
            CommutationTargets::Curves(p_curve, q_curve) => {
                let kappa = ts.kappa_truncate();
                for curve in [p_curve, q_curve] {
                    let pt = curve.eval(t);
                    push(&pt, t, "commutator with the state curve", &mut tracker);
                    samples += 1;
                    if kappa.contains(t) {
                        let pd = ts.delta_derivative(curve, t, DEFAULT_FD_STEP)?;
                        push(&pd, t, "commutator with the state curve derivative", &mut tracker);
                        samples += 1;
                    }
                }
            }
        }
    }
    Ok(tracker.into_record("commutation", samples, ""))
}

/// Margin of the selected inverse-Lipschitz inequality at a node. The
/// preconditions (`P - Q` and `P^D - Q^D` strictly positive definite) are
/// reported through the `Err` side as indeterminate notes.
#[allow(clippy::too_many_arguments)]
pub fn inverse_lipschitz_margin(
    p_curve: &MatrixCurve,
    q_curve: &MatrixCurve,
    bound: &MatrixCurve,
    side: Side,
    sigma_form: bool,
    ts: &TimeScale,
    t: f64,
    tol: &Tolerances,
) -> Result<f64> {
    let u = p_curve.eval(t) - q_curve.eval(t);
    let ud = ts.delta_derivative(p_curve, t, DEFAULT_FD_STEP)?
        - ts.delta_derivative(q_curve, t, DEFAULT_FD_STEP)?;
    let floor_u = tol.psd_floor(&u);
    if min_sym_eigenvalue(&u) <= floor_u {
        return Err(Error::Singular(format!(
            "P - Q is not strictly positive definite at t = {t}"
        )));
    }
    if min_sym_eigenvalue(&ud) <= tol.psd_floor(&ud) {
        return Err(Error::Singular(format!(
            "P^D - Q^D is not strictly positive definite at t = {t}"
        )));
    }
    let u_inv = u
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("P - Q singular at t = {t}")))?;
    let ud_inv = ud
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("P^D - Q^D singular at t = {t}")))?;
    let b = bound.eval(t);
    let effective = if sigma_form {
        let mu = ts.graininess(t)?;
        let factor = matrix::regressivity_factor(&b, mu, tol)?;
        factor
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Singular("I + mu B not invertible".into()))?
    } else {
        b
    };
    let rhs = match side {
        Side::Left => &ud_inv * &effective,
        Side::Right => &effective * &ud_inv,
    };
    Ok(min_sym_eigenvalue(&(rhs - u_inv)))
}

/// `(P - Q)^{-1} <= (P^D - Q^D)^{-1} B` (and its right/sigma variants) at
/// evenly spread nodes of `T^kappa`.
#[allow(clippy::too_many_arguments)]
pub fn check_inverse_lipschitz(
    p_curve: &MatrixCurve,
    q_curve: &MatrixCurve,
    bound: &MatrixCurve,
    side: Side,
    sigma_form: bool,
    ts: &TimeScale,
    node_count: usize,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<ConditionRecord> {
    let all = kappa_node_times(ts, grid)?;
    let nodes = spread_nodes(&all, node_count);
    let id = match (side, sigma_form) {
        (Side::Left, false) => "inverse_lipschitz_left",
        (Side::Right, false) => "inverse_lipschitz_right",
        (Side::Left, true) => "inverse_lipschitz_sigma_left",
        (Side::Right, true) => "inverse_lipschitz_sigma_right",
    };
    let mut tracker = WorstTracker::new();
    let mut indeterminate: Option<String> = None;
    let mut used = 0usize;
    for &t in &nodes {
        match inverse_lipschitz_margin(p_curve, q_curve, bound, side, sigma_form, ts, t, tol) {
            Ok(margin) => {
                let floor = tol.psd_tol
                    * norm_max(&p_curve.eval(t)).max(norm_max(&q_curve.eval(t))).max(1.0);
                tracker.observe(margin, floor, t, &p_curve.eval(t), Some(&q_curve.eval(t)), id);
                used += 1;
            }
            Err(e) => {
                indeterminate = Some(format!("precondition failed: {e}"));
            }
        }
    }
    if let Some(note) = indeterminate {
        if !tracker.failed {
            let mut rec = tracker.into_record(id, used, &note);
            rec.verdict = Verdict::Indeterminate;
            return Ok(rec);
        }
    }
    Ok(tracker.into_record(id, used, ""))
}

/// Everything a certificate needs to check one problem.
#[derive(Clone)]
pub struct ProblemBundle {
    pub field: Option<MatrixField>,
    pub pq_curves: Option<(MatrixCurve, MatrixCurve)>,
    pub bound: MatrixCurve,
    pub ts: TimeScale,
    pub domain: DomainSet,
    pub grid: GridSpec,
    /// Anchor `a` of the exponential `e_B(., a)`.
    pub base_point: f64,
    pub samples: usize,
    pub seed: u64,
    pub tol: Tolerances,
}

/// Uniqueness results that can be certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    /// Left Lipschitz condition, explicit form.
    Exis1,
    /// Right Lipschitz condition, explicit form.
    ExisRight,
    /// Partial-derivative bound route to the left condition.
    Exis2,
    /// Partial-derivative bound route to the right condition.
    ExisRightPartial,
    /// Sigma-form left condition.
    Exis3,
    /// Sigma-form right condition.
    Exis3Right,
    /// Inverse-Lipschitz route, left, explicit form.
    Exis4,
    /// Inverse-Lipschitz route, right, explicit form.
    Exis4Right,
    /// Inverse-Lipschitz route, left, sigma form.
    Exis5,
    /// Inverse-Lipschitz route, right, sigma form.
    Exis5Right,
}

impl Theorem {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "exis1" => Theorem::Exis1,
            "exis_right" => Theorem::ExisRight,
            "exis2" => Theorem::Exis2,
            "exisright" => Theorem::ExisRightPartial,
            "exis3" => Theorem::Exis3,
            "exis3right" => Theorem::Exis3Right,
            "exis4" => Theorem::Exis4,
            "exis4right" => Theorem::Exis4Right,
            "exis5" => Theorem::Exis5,
            "exis5right" => Theorem::Exis5Right,
            other => {
                return Err(Error::Usage(format!(
                    "unknown theorem tag '{other}' (expected one of exis1, exis_right, exis2, \
                     exisright, exis3, exis3right, exis4, exis4right, exis5, exis5right)"
                )))
            }
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Theorem::Exis1 => "exis1",
            Theorem::ExisRight => "exis_right",
            Theorem::Exis2 => "exis2",
            Theorem::ExisRightPartial => "exisright",
            Theorem::Exis3 => "exis3",
            Theorem::Exis3Right => "exis3right",
            Theorem::Exis4 => "exis4",
            Theorem::Exis4Right => "exis4right",
            Theorem::Exis5 => "exis5",
            Theorem::Exis5Right => "exis5right",
        }
    }
}

/// Check every hypothesis of the named uniqueness result on the bundled
/// problem and aggregate into a certificate.
pub fn certify(theorem: Theorem, bundle: &ProblemBundle) -> Result<CertificateReport> {
    let ProblemBundle {
        field,
        pq_curves,
        bound,
        ts,
        domain,
        grid,
        base_point,
        samples,
        seed,
        tol,
    } = bundle;
    let node_budget = (*samples / 10).clamp(10, 100);
    let mut conditions = vec![
        ConditionRecord::assumed(
            "rd_continuity",
            "right-Hilger continuity is assumed; not decidable from samples",
        ),
        check_bound_positive_definite(bound, ts, node_budget, grid, tol)?,
    ];

    fn need_field(field: &Option<MatrixField>) -> Result<&MatrixField> {
        field
            .as_ref()
            .ok_or_else(|| Error::Usage("this theorem requires a field F in the bundle".into()))
    }
    fn need_curves(
        pq: &Option<(MatrixCurve, MatrixCurve)>,
    ) -> Result<(&MatrixCurve, &MatrixCurve)> {
        pq.as_ref()
            .map(|(p, q)| (p, q))
            .ok_or_else(|| Error::Usage("this theorem requires P and Q curves in the bundle".into()))
    }

    match theorem {
        Theorem::Exis1 | Theorem::ExisRight | Theorem::Exis2 | Theorem::ExisRightPartial
        | Theorem::Exis3 | Theorem::Exis3Right => {
            conditions.push(check_commutation(
                bound, ts, domain, node_budget, *seed, grid, tol, *base_point,
            )?);
        }
        Theorem::Exis4 | Theorem::Exis4Right | Theorem::Exis5 | Theorem::Exis5Right => {
            let (p, q) = need_curves(pq_curves)?;
            conditions.push(check_commutation_with_curves(
                bound, ts, p, q, node_budget, grid, tol, *base_point,
            )?);
        }
    }

    let ineq = match theorem {
        Theorem::Exis1 => check_lipschitz_left(
            need_field(field)?,
            bound,
            ts,
            domain,
            *samples,
            *seed,
            grid,
            tol,
        )?,
        Theorem::ExisRight => check_lipschitz_right(
            need_field(field)?,
            bound,
            ts,
            domain,
            *samples,
            *seed,
            grid,
            tol,
        )?,
        Theorem::Exis2 | Theorem::ExisRightPartial => {
            // The bound must be constant for the partial-derivative corollary;
            // evaluate it at the base point.
            let l = bound.eval(*base_point);
            check_partial_bound(
                need_field(field)?,
                &l,
                ts,
                domain,
                *samples,
                *seed,
                grid,
                tol,
            )?
        }
        Theorem::Exis3 => check_lipschitz_sigma_left(
            need_field(field)?,
            bound,
            ts,
            domain,
            *samples,
            *seed,
            grid,
            tol,
        )?,
        Theorem::Exis3Right => check_lipschitz_sigma_right(
            need_field(field)?,
            bound,
            ts,
            domain,
            *samples,
            *seed,
            grid,
            tol,
        )?,
        Theorem::Exis4 | Theorem::Exis4Right | Theorem::Exis5 | Theorem::Exis5Right => {
            let (p, q) = need_curves(pq_curves)?;
            let (side, sigma_form) = match theorem {
                Theorem::Exis4 => (Side::Left, false),
                Theorem::Exis4Right => (Side::Right, false),
                Theorem::Exis5 => (Side::Left, true),
                _ => (Side::Right, true),
            };
            check_inverse_lipschitz(
                p,
                q,
                bound,
                side,
                sigma_form,
                ts,
                node_budget.max(50),
                grid,
                tol,
            )?
        }
    };
    conditions.push(ineq);

    Ok(CertificateReport::assemble(
        theorem.as_str(),
        *samples,
        *seed,
        conditions,
    ))
}
