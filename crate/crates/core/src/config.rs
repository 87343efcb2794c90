//! Problem definition files: a JSON document describing the time scale,
//! dimension, equation form, field (builtin or per-entry expressions),
//! bound curve, domain set, grid, and sampling budget.
//!
//! Parsing is strict: unknown keys are rejected and semantic errors name the
//! offending entry. `canonical()` re-serializes a validated config; parse,
//! print, parse is the identity.

use serde::{Deserialize, Serialize};

use crate::certifier::{DomainSet, ProblemBundle, Theorem};
use crate::curve::MatrixCurve;
use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr};
use crate::field::{builtins, MatrixField};
use crate::matrix::{matrix_from_rows, Matrix, Tolerances};
use crate::solver::ImplicitOpts;
use crate::timescale::{GridSpec, TimeScale};

/// A time-scale segment: a bare number abbreviates a degenerate interval.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SegmentSpec {
    Point(f64),
    Interval([f64; 2]),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FormTag {
    Explicit,
    Sigma,
    Linear,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BuiltinSpec {
    pub builtin: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EntriesSpec {
    pub entries: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConstantSpec {
    pub constant: Vec<Vec<f64>>,
}

/// A matrix field: builtin by name, or one expression per entry (row-major).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum FieldSpec {
    Builtin(BuiltinSpec),
    Entries(EntriesSpec),
}

/// A matrix curve of `t` alone: a constant matrix or per-entry expressions.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum CurveSpec {
    Constant(ConstantSpec),
    Entries(EntriesSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    pub v: CurveSpec,
    pub g: CurveSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dense_step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { dense_step: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TolConfig {
    pub newton_tol: f64,
    pub psd_tol: f64,
    pub eq_tol: f64,
    pub max_iter: usize,
}

impl Default for TolConfig {
    fn default() -> Self {
        TolConfig {
            newton_tol: 1e-10,
            psd_tol: 1e-10,
            eq_tol: 1e-9,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExpSpec {
    pub curve: CurveSpec,
    pub from: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub trials: usize,
}

fn default_samples() -> usize {
    500
}

/// A fully-parsed problem definition.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub format_version: u32,
    pub timescale: Vec<SegmentSpec>,
    pub dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub form: Option<FormTag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<RangeSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curves: Option<BuiltinSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<CurveSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain_set: Option<DomainSpec>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem: Option<String>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: TolConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exp: Option<ExpSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSpec>,
}

impl ProblemConfig {
    /// Parse and validate a config document. Syntax errors carry the JSON
    /// line and column; semantic errors name the offending entry.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ProblemConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical pretty-printed form; parsing it back yields an identical
    /// config.
    pub fn canonical(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    fn validate(&self) -> Result<()> {
        if self.format_version != 1 {
            return Err(Error::Config(format!(
                "unsupported format_version {} (expected 1)",
                self.format_version
            )));
        }
        if self.dimension == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        self.timescale_inner()?;
        if !(self.grid.dense_step > 0.0) {
            return Err(Error::Config("grid.dense_step must be positive".into()));
        }
        if let Some(init) = &self.initial {
            let m = matrix_from_rows(init).map_err(|e| Error::Config(format!("initial: {e}")))?;
            if m.nrows() != self.dimension {
                return Err(Error::Config(format!(
                    "initial matrix is {}x{} but dimension is {}",
                    m.nrows(),
                    m.nrows(),
                    self.dimension
                )));
            }
        }
        if let Some(spec) = &self.field {
            self.check_field_spec(spec)?;
        }
        if let Some(b) = &self.bound {
            self.check_curve_spec(b, "bound")?;
        }
        if let Some(l) = &self.linear {
            self.check_curve_spec(&l.v, "linear.v")?;
            self.check_curve_spec(&l.g, "linear.g")?;
        }
        if let Some(e) = &self.exp {
            self.check_curve_spec(&e.curve, "exp.curve")?;
        }
        if let Some(c) = &self.curves {
            if c.builtin != "example2_curves" {
                return Err(Error::Config(format!(
                    "unknown curves builtin '{}' (expected example2_curves)",
                    c.builtin
                )));
            }
        }
        if let Some(tag) = &self.theorem {
            Theorem::parse(tag)?;
        }
        if let Some(d) = &self.domain_set {
            self.build_domain_inner(d)?;
        }
        if let Some(p) = &self.probe {
            if p.trials < 2 {
                return Err(Error::Config("probe.trials must be at least 2".into()));
            }
        }
        Ok(())
    }

    fn check_field_spec(&self, spec: &FieldSpec) -> Result<()> {
        match spec {
            FieldSpec::Builtin(b) => match b.builtin.as_str() {
                "example1" => {
                    if self.dimension != 2 {
                        return Err(Error::Config("builtin example1 requires dimension 2".into()));
                    }
                    Ok(())
                }
                "example3" => {
                    if b.params.len() != self.dimension {
                        return Err(Error::Config(format!(
                            "builtin example3 needs {} diagonal parameters, got {}",
                            self.dimension,
                            b.params.len()
                        )));
                    }
                    Ok(())
                }
                "linear" => {
                    if self.linear.is_none() {
                        return Err(Error::Config(
                            "builtin linear requires the 'linear' section with v and g".into(),
                        ));
                    }
                    Ok(())
                }
                "scalar_nonunique" => {
                    if self.dimension != 1 {
                        return Err(Error::Config(
                            "builtin scalar_nonunique requires dimension 1".into(),
                        ));
                    }
                    Ok(())
                }
                other => Err(Error::Config(format!("unknown builtin field '{other}'"))),
            },
            FieldSpec::Entries(e) => {
                let n = self.dimension;
                if e.entries.len() != n * n {
                    return Err(Error::Config(format!(
                        "field needs {} entry expressions for dimension {n}, got {}",
                        n * n,
                        e.entries.len()
                    )));
                }
                for (idx, src) in e.entries.iter().enumerate() {
                    parse_expression(src, n).map_err(|err| {
                        Error::Config(format!("field entry {}: {err}", entry_name(idx, n)))
                    })?;
                }
                Ok(())
            }
        }
    }

    fn check_curve_spec(&self, spec: &CurveSpec, what: &str) -> Result<()> {
        match spec {
            CurveSpec::Constant(c) => {
                let m = matrix_from_rows(&c.constant)
                    .map_err(|e| Error::Config(format!("{what}: {e}")))?;
                if m.nrows() != self.dimension {
                    return Err(Error::Config(format!(
                        "{what}: matrix is {0}x{0} but dimension is {1}",
                        m.nrows(),
                        self.dimension
                    )));
                }
                Ok(())
            }
            CurveSpec::Entries(e) => {
                let n = self.dimension;
                if e.entries.len() != n * n {
                    return Err(Error::Config(format!(
                        "{what} needs {} entry expressions, got {}",
                        n * n,
                        e.entries.len()
                    )));
                }
                for (idx, src) in e.entries.iter().enumerate() {
                    let expr = parse_expression(src, n).map_err(|err| {
                        Error::Config(format!("{what} entry {}: {err}", entry_name(idx, n)))
                    })?;
                    if expr.references_state() {
                        return Err(Error::Config(format!(
                            "{what} entry {} may depend on t only, not on state entries",
                            entry_name(idx, n)
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    fn timescale_inner(&self) -> Result<TimeScale> {
        let segments: Vec<(f64, f64)> = self
            .timescale
            .iter()
            .map(|s| match s {
                SegmentSpec::Point(x) => (*x, *x),
                SegmentSpec::Interval([l, r]) => (*l, *r),
            })
            .collect();
        TimeScale::new(segments).map_err(|e| Error::Config(format!("timescale: {e}")))
    }

    pub fn timescale(&self) -> Result<TimeScale> {
        self.timescale_inner()
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.dense_step)
    }

    pub fn tolerances(&self) -> Result<Tolerances> {
        Tolerances::new(self.tolerances.psd_tol, self.tolerances.eq_tol)
    }

    pub fn implicit_opts(&self) -> ImplicitOpts {
        ImplicitOpts {
            newton_tol: self.tolerances.newton_tol,
            max_iter: self.tolerances.max_iter,
            ..ImplicitOpts::default()
        }
    }

    pub fn initial_matrix(&self) -> Result<Matrix> {
        let rows = self
            .initial
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs an 'initial' matrix".into()))?;
        matrix_from_rows(rows)
    }

    /// The solve range, defaulting to the whole time scale.
    pub fn solve_range(&self, ts: &TimeScale) -> Result<(f64, f64)> {
        match &self.range {
            Some(r) => {
                if !ts.contains(r.from) || !ts.contains(r.to) {
                    return Err(Error::Config(
                        "range endpoints must lie in the time scale".into(),
                    ));
                }
                if r.from >= r.to {
                    return Err(Error::Config("range.from must be below range.to".into()));
                }
                Ok((r.from, r.to))
            }
            None => Ok((ts.min(), ts.max())),
        }
    }

    fn parse_entries(&self, entries: &[String]) -> Result<Vec<Expr>> {
        entries
            .iter()
            .map(|src| parse_expression(src, self.dimension))
            .collect()
    }

    pub fn build_curve(&self, spec: &CurveSpec, what: &str) -> Result<MatrixCurve> {
        let n = self.dimension;
        match spec {
            CurveSpec::Constant(c) => Ok(MatrixCurve::constant(matrix_from_rows(&c.constant)?)),
            CurveSpec::Entries(e) => {
                self.check_curve_spec(spec, what)?;
                let exprs = self.parse_entries(&e.entries)?;
                let zero = Matrix::zeros(n, n);
                Ok(MatrixCurve::from_fn(n, move |t| {
                    Matrix::from_fn(n, n, |i, j| {
                        exprs[i * n + j].eval(t, &zero).unwrap_or(f64::NAN)
                    })
                }))
            }
        }
    }

    pub fn build_field(&self, ts: &TimeScale) -> Result<MatrixField> {
        let spec = self
            .field
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a 'field'".into()))?;
        match spec {
            FieldSpec::Builtin(b) => match b.builtin.as_str() {
                "example1" => Ok(builtins::example1()),
                "example3" => {
                    let a = self
                        .range
                        .as_ref()
                        .map(|r| r.from)
                        .unwrap_or_else(|| ts.min());
                    Ok(builtins::example3(ts, &b.params, a))
                }
                "linear" => {
                    let (v, g) = self.build_linear_curves()?;
                    Ok(builtins::linear_sigma_field(v, g))
                }
                "scalar_nonunique" => Ok(builtins::scalar_nonunique()),
                other => Err(Error::Config(format!("unknown builtin field '{other}'"))),
            },
            FieldSpec::Entries(e) => {
                let exprs = self.parse_entries(&e.entries)?;
                MatrixField::from_expressions(self.dimension, exprs, "dsl")
            }
        }
    }

    pub fn build_linear_curves(&self) -> Result<(MatrixCurve, MatrixCurve)> {
        let l = self
            .linear
            .as_ref()
            .ok_or_else(|| Error::Config("the linear form needs the 'linear' section".into()))?;
        Ok((
            self.build_curve(&l.v, "linear.v")?,
            self.build_curve(&l.g, "linear.g")?,
        ))
    }

    pub fn build_bound(&self) -> Result<MatrixCurve> {
        let spec = self
            .bound
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a 'bound' curve".into()))?;
        self.build_curve(spec, "bound")
    }

    fn build_domain_inner(&self, d: &DomainSpec) -> Result<DomainSet> {
        let n = self.dimension;
        match d.kind.as_str() {
            "rectangle" => {
                let center = match &d.center {
                    Some(rows) => matrix_from_rows(rows)?,
                    None => Matrix::zeros(n, n),
                };
                let radius = d.radius.ok_or_else(|| {
                    Error::Config("domain_set rectangle needs a radius".into())
                })?;
                DomainSet::rectangle(center, radius)
            }
            "strip" => Ok(DomainSet::strip(n, d.scale.unwrap_or(1.0))),
            "pd_cone" => Ok(DomainSet::pd_cone(n)),
            "symmetric_pair_family" | "example1_family" => {
                if n != 2 {
                    return Err(Error::Config(
                        "the symmetric pair family requires dimension 2".into(),
                    ));
                }
                Ok(DomainSet::symmetric_pair_family())
            }
            "positive_diagonal" => Ok(DomainSet::positive_diagonal(n, d.scale.unwrap_or(2.0))),
            other => Err(Error::Config(format!("unknown domain_set kind '{other}'"))),
        }
    }

    pub fn build_domain(&self) -> Result<DomainSet> {
        let d = self
            .domain_set
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a 'domain_set'".into()))?;
        self.build_domain_inner(d)
    }

    pub fn build_pq_curves(&self) -> Result<Option<(MatrixCurve, MatrixCurve, MatrixCurve)>> {
        match &self.curves {
            None => Ok(None),
            Some(spec) => {
                let profile = match spec.params.first().copied().unwrap_or(0.0) {
                    x if x == 0.0 => builtins::UProfile::OnePlusT,
                    _ => builtins::UProfile::T,
                };
                let (p, q, b) = builtins::example2_curves(profile);
                Ok(Some((p, q, b)))
            }
        }
    }

    /// Assemble the certifier bundle (theorem tag plus problem pieces).
    pub fn build_bundle(&self) -> Result<(Theorem, ProblemBundle)> {
        let tag = self
            .theorem
            .as_ref()
            .ok_or_else(|| Error::Config("certify needs a 'theorem' tag".into()))?;
        let theorem = Theorem::parse(tag)?;
        let ts = self.timescale()?;
        let grid = self.grid_spec()?;
        let tol = self.tolerances()?;
        let (from, _) = self.solve_range(&ts)?;

        let pq = self.build_pq_curves()?;
        let (pq_curves, bound) = match pq {
            Some((p, q, b)) => {
                // an explicit bound overrides the builtin's companion bound
                let bound = match &self.bound {
                    Some(_) => self.build_bound()?,
                    None => b,
                };
                (Some((p, q)), bound)
            }
            None => (None, self.build_bound()?),
        };
        let field = match &self.field {
            Some(_) => Some(self.build_field(&ts)?),
            None => None,
        };
        let domain = match &self.domain_set {
            Some(d) => self.build_domain_inner(d)?,
            None => DomainSet::strip(self.dimension, 1.0),
        };
        Ok((
            theorem,
            ProblemBundle {
                field,
                pq_curves,
                bound,
                ts,
                domain,
                grid,
                base_point: from,
                samples: self.samples,
                seed: self.seed,
                tol,
            },
        ))
    }
}

fn entry_name(idx: usize, n: usize) -> String {
    format!("({}, {})", idx / n + 1, idx % n + 1)
}
