//! Executable case registry: every named set, function, and counterexample
//! ships with machine-checkable expected verdicts. `run_case` executes the
//! checks for one case under a given probe configuration and reports which
//! passed; `run_all` sweeps the registry.

use std::sync::Arc;

use serde_json::json;
use thiserror::Error;

use crate::cones::{
    cassina_member, direction_member, estimate_cone, Answer, ConeEstimate, ConeKind, Membership,
};
use crate::diff::{
    c1_scan, cone_diff_test, continuity_test, estimate_differential, estimate_strict_differential,
    interior_diff_test, DiffStatus, FnModel,
};
use crate::geom::{unit_sphere_grid, vec_from, LinearMap, Vector};
use crate::probe::{DecayClass, ProbeConfig};
use crate::setmodel::shapes::{
    self, box_nd, interval, two_wedges, x_axis, GraphShape, UnionShape,
};
use crate::setmodel::{ScalarField, SetModel};

// ---------------------------------------------------------------------------
// registry types

#[derive(Debug, Clone)]
pub struct CorpusCase {
    pub name: &'static str,
    pub summary: &'static str,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Expectation {
    pub label: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct CaseReport {
    pub name: String,
    pub expectations: Vec<Expectation>,
}

impl CaseReport {
    pub fn pass(&self) -> bool {
        self.expectations.iter().all(|e| e.pass)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "name": self.name,
            "pass": self.pass(),
            "expectations": self.expectations,
        })
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown case name: {0}")]
    UnknownCase(String),
}

pub fn list_cases() -> Vec<CorpusCase> {
    vec![
        CorpusCase { name: "factorial_sequence", summary: "reciprocal factorials on the line; one-sided tangency at 0" },
        CorpusCase { name: "tsin_curve", summary: "t·sin(log t) style oscillating curve; upper and lower cones coincide" },
        CorpusCase { name: "kinked_b", summary: "piecewise-kinked set whose cones at 0 are the absolute-value graph" },
        CorpusCase { name: "quadrant", summary: "nonnegative quadrant; cones reproduce the set, paratingent fills the plane" },
        CorpusCase { name: "unit_circle", summary: "smooth curve; all cones equal the tangent line" },
        CorpusCase { name: "log_spiral", summary: "logarithmic spiral at its pole; every direction is upper-tangent, none lower" },
        CorpusCase { name: "sqrt_abs_graph", summary: "graph of sqrt(|x|); lower cone at 0 is the upward vertical half-line" },
        CorpusCase { name: "severi_horn", summary: "zero function on a horn-shaped set; non-unique differential, unique strict differential" },
        CorpusCase { name: "guareschi_radical", summary: "x + y + (y(x-y))^{3/2} on two wedges; differential (1,1)" },
        CorpusCase { name: "xy_over_r2", summary: "xy/(x^2+y^2): separately continuous but discontinuous at 0" },
        CorpusCase { name: "interior_discontinuity", summary: "indicator of a punctured parabola: linear directional derivatives but no continuity" },
        CorpusCase { name: "interior_nonlinear_directional", summary: "cube root: continuous with non-linear directional derivatives" },
        CorpusCase { name: "interior_cone_dimension", summary: "x on a punctured parabola: excess graph-cone dimension" },
        CorpusCase { name: "x2sin_strictness", summary: "x^2 sin(1/x): differentiable at 0 but not strictly" },
    ]
}

pub fn run_case(name: &str, cfg: &ProbeConfig) -> Result<CaseReport, CorpusError> {
    let expectations = match name {
        "factorial_sequence" => case_factorial(cfg),
        "tsin_curve" => case_tsin_curve(cfg),
        "kinked_b" => case_kinked(cfg),
        "quadrant" => case_quadrant(cfg),
        "unit_circle" => case_circle(cfg),
        "log_spiral" => case_spiral(cfg),
        "sqrt_abs_graph" => case_sqrt_abs(cfg),
        "severi_horn" => case_horn(cfg),
        "guareschi_radical" => case_radical(cfg),
        "xy_over_r2" => case_xy_over_r2(cfg),
        "interior_discontinuity" => case_interior_discontinuity(cfg),
        "interior_nonlinear_directional" => case_interior_nonlinear(cfg),
        "interior_cone_dimension" => case_interior_dimension(cfg),
        "x2sin_strictness" => case_x2sin(cfg),
        other => return Err(CorpusError::UnknownCase(other.into())),
    };
    Ok(CaseReport { name: name.into(), expectations })
}

pub fn run_all(cfg: &ProbeConfig) -> Vec<CaseReport> {
    list_cases()
        .iter()
        .map(|c| run_case(c.name, cfg).expect("registered case"))
        .collect()
}

pub fn json_summary(reports: &[CaseReport]) -> serde_json::Value {
    json!({
        "cases": reports.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
        "pass": reports.iter().all(|r| r.pass()),
    })
}

pub fn markdown_summary(reports: &[CaseReport]) -> String {
    let mut out = String::from("| case | checks | failed | status |\n|---|---|---|---|\n");
    for r in reports {
        let failed: Vec<&str> = r
            .expectations
            .iter()
            .filter(|e| !e.pass)
            .map(|e| e.label.as_str())
            .collect();
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            r.name,
            r.expectations.len(),
            if failed.is_empty() { "-".into() } else { failed.join(", ") },
            if r.pass() { "pass" } else { "FAIL" },
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// shared model builders (also used by integration tests)

pub fn radical_fn() -> FnModel {
    FnModel::scalar(two_wedges(), "x + y + (y(x-y))^{3/2}", |p| {
        let (x, y) = (p[0], p[1]);
        x + y + (y * (x - y)).max(0.0).powf(1.5)
    })
}

pub fn xy_over_r2_fn() -> FnModel {
    FnModel::scalar(box_nd(vec![-1.0, -1.0], vec![1.0, 1.0]), "xy/(x^2+y^2)", |p| {
        let (x, y) = (p[0], p[1]);
        let r2 = x * x + y * y;
        if r2 == 0.0 { 0.0 } else { x * y / r2 }
    })
}

pub fn horn_zero_fn() -> FnModel {
    FnModel::scalar(shapes::horn(), "0 on the horn", |_| 0.0)
}

pub fn x2sin_fn() -> FnModel {
    FnModel::scalar(interval(-0.5, 0.5), "x^2 sin(1/x)", |p| {
        let x = p[0];
        if x == 0.0 { 0.0 } else { x * x * (1.0 / x).sin() }
    })
}

fn parabola_model() -> SetModel {
    let f: ScalarField = Arc::new(|x: &Vector| x[0] * x[0]);
    SetModel::new(GraphShape::new(interval(-1.0, 1.0), f, "parabola".into()))
}

pub fn plane_with_parabola() -> SetModel {
    SetModel::new(UnionShape::new(vec![
        box_nd(vec![-1.0, -1.0], vec![1.0, 1.0]),
        parabola_model(),
    ]))
}

/// The parabola component lifts points to y = x*x exactly in floats, so exact
/// equality separates it from box samples and probe ray points.
pub fn on_parabola(p: &Vector) -> bool {
    p[1] == p[0] * p[0] && p[0] != 0.0
}

pub fn punctured_parabola_indicator() -> FnModel {
    FnModel::scalar(plane_with_parabola(), "1 on the punctured parabola", |p| {
        if on_parabola(p) { 1.0 } else { 0.0 }
    })
}

pub fn punctured_parabola_x() -> FnModel {
    FnModel::scalar(plane_with_parabola(), "x on the punctured parabola", |p| {
        if on_parabola(p) { p[0] } else { 0.0 }
    })
}

pub fn cbrt_fn() -> FnModel {
    FnModel::scalar(interval(-1.0, 1.0), "cbrt(x)", |p| p[0].cbrt())
}

// ---------------------------------------------------------------------------
// expectation helpers

fn check(out: &mut Vec<Expectation>, label: &str, pass: bool, detail: String) {
    out.push(Expectation { label: label.into(), pass, detail });
}

fn check_member(
    out: &mut Vec<Expectation>,
    m: &SetModel,
    base: &Vector,
    v: &[f64],
    kind: ConeKind,
    want: Membership,
    cfg: &ProbeConfig,
) {
    let dir = vec_from(v);
    let (got, _) = direction_member(m, base, &dir, kind, cfg);
    let label = format!("{} {:?} {:?}", kind.name(), v, want);
    check(out, &label, got == want, format!("got {got:?}"));
}

/// Compares a cone estimate against an analytic membership predicate, skipping
/// directions the skip predicate flags as too close to the cone boundary.
fn check_grid(
    out: &mut Vec<Expectation>,
    label: &str,
    est: &ConeEstimate,
    expect_in: impl Fn(&Vector) -> bool,
    skip: impl Fn(&Vector) -> bool,
) {
    let mut considered = 0usize;
    let mut mismatched: Vec<String> = Vec::new();
    for d in &est.dirs {
        if skip(&d.v) {
            continue;
        }
        considered += 1;
        let want = expect_in(&d.v);
        let got = d.membership == Membership::In;
        if want != got {
            mismatched.push(format!("{:?} want_in={want} got {:?}", d.v.as_slice(), d.membership));
        }
    }
    check(
        out,
        label,
        mismatched.is_empty() && considered > 0,
        format!("{considered} directions checked; mismatches: {mismatched:?}"),
    );
}

fn slack(cfg: &ProbeConfig) -> f64 {
    2.0 * cfg.eps.sqrt()
}

// ---------------------------------------------------------------------------
// the cases

fn case_factorial(cfg: &ProbeConfig) -> Vec<Expectation> {
    let m = shapes::factorial_sequence();
    let base = vec_from(&[0.0]);
    let mut out = Vec::new();
    check_member(&mut out, &m, &base, &[1.0], ConeKind::TanUpper, Membership::In, cfg);
    check_member(&mut out, &m, &base, &[-1.0], ConeKind::TanUpper, Membership::Out, cfg);
    check_member(&mut out, &m, &base, &[1.0], ConeKind::TanLower, Membership::Out, cfg);
    check_member(&mut out, &m, &base, &[-1.0], ConeKind::TanLower, Membership::Out, cfg);
    check_member(&mut out, &m, &base, &[-1.0], ConeKind::PTanUpper, Membership::In, cfg);
    out
}

fn case_tsin_curve(cfg: &ProbeConfig) -> Vec<Expectation> {
    let m = shapes::tsin_curve();
    let base = vec_from(&[0.0, 0.0]);
    let grid = unit_sphere_grid(2, 32, cfg.seed).unwrap();
    let lam = slack(cfg);
    let expect_in = |v: &Vector| v[1].abs() <= v[0].abs();
    let skip = move |v: &Vector| (v[1].abs() - v[0].abs()).abs() < lam;
    let mut out = Vec::new();
    for kind in [ConeKind::TanUpper, ConeKind::TanLower] {
        let est = estimate_cone(&m, &base, kind, &grid, cfg);
        check_grid(&mut out, &format!("{} is the double cone |k| <= |h|", kind.name()), &est, expect_in, skip);
    }
    out
}

fn case_kinked(cfg: &ProbeConfig) -> Vec<Expectation> {
    let m = shapes::kinked_b();
    let base = vec_from(&[0.0, 0.0]);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    for v in [[s, s], [-s, s]] {
        check_member(&mut out, &m, &base, &v, ConeKind::TanUpper, Membership::In, cfg);
        check_member(&mut out, &m, &base, &v, ConeKind::TanLower, Membership::In, cfg);
    }
    for v in [[s, -s], [1.0, 0.0], [0.0, 1.0]] {
        check_member(&mut out, &m, &base, &v, ConeKind::TanUpper, Membership::Out, cfg);
    }
    out
}

fn case_quadrant(cfg: &ProbeConfig) -> Vec<Expectation> {
    let m = shapes::quadrant();
    let base = vec_from(&[0.0, 0.0]);
    let grid = unit_sphere_grid(2, 32, cfg.seed).unwrap();
    let lam = slack(cfg);
    let mut out = Vec::new();
    let lo = estimate_cone(&m, &base, ConeKind::TanLower, &grid, cfg);
    check_grid(
        &mut out,
        "lower cone is the quadrant itself",
        &lo,
        |v| v[0] >= 0.0 && v[1] >= 0.0,
        move |v| v[0].abs() < lam || v[1].abs() < lam,
    );
    let pup = estimate_cone(&m, &base, ConeKind::PTanUpper, &grid, cfg);
    check_grid(&mut out, "paratingent cone fills the plane", &pup, |_| true, |_| false);
    out
}

fn case_circle(cfg: &ProbeConfig) -> Vec<Expectation> {
    let m = shapes::circle(1.0);
    let base = vec_from(&[1.0, 0.0]);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    for v in [[0.0, 1.0], [0.0, -1.0]] {
        check_member(&mut out, &m, &base, &v, ConeKind::TanLower, Membership::In, cfg);
    }
    for v in [[1.0, 0.0], [-1.0, 0.0], [s, s], [-s, -s]] {
        check_member(&mut out, &m, &base, &v, ConeKind::TanUpper, Membership::Out, cfg);
    }
    let up = vec_from(&[0.0, 1.0]);
    let radial = vec_from(&[1.0, 0.0]);
    check(
        &mut out,
        "intersection test agrees with the upper cone",
        cassina_member(&m, &base, &up, cfg) == Membership::In
            && cassina_member(&m, &base, &radial, cfg) == Membership::Out,
        String::new(),
    );
    out
}

fn case_spiral(cfg: &ProbeConfig) -> Vec<Expectation> {
    let m = shapes::log_spiral();
    let base = vec_from(&[0.0, 0.0]);
    let grid = unit_sphere_grid(2, 16, cfg.seed).unwrap();
    let mut out = Vec::new();
    let up = estimate_cone(&m, &base, ConeKind::TanUpper, &grid, cfg);
    check_grid(&mut out, "upper cone at the pole fills the plane", &up, |_| true, |_| false);
    for v in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]] {
        check_member(&mut out, &m, &base, &v, ConeKind::TanLower, Membership::Out, cfg);
    }
    out
}

fn case_sqrt_abs(cfg: &ProbeConfig) -> Vec<Expectation> {
    let m = shapes::sqrt_abs_graph();
    let base = vec_from(&[0.0, 0.0]);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    check_member(&mut out, &m, &base, &[0.0, 1.0], ConeKind::TanLower, Membership::In, cfg);
    for v in [[0.0, -1.0], [1.0, 0.0], [-1.0, 0.0], [s, s], [-s, s]] {
        check_member(&mut out, &m, &base, &v, ConeKind::TanUpper, Membership::Out, cfg);
    }
    out
}

fn case_horn(cfg: &ProbeConfig) -> Vec<Expectation> {
    let f = horn_zero_fn();
    let zero = vec_from(&[0.0, 0.0]);
    let grid = unit_sphere_grid(3, 18, cfg.seed).unwrap();
    let mut out = Vec::new();
    let rep = cone_diff_test(&f, &zero, &grid, cfg);
    check(
        &mut out,
        "graph cone admits a differential non-uniquely",
        rep.status == DiffStatus::Differentiable && rep.unique == Some(false),
        format!("status {:?} unique {:?}", rep.status, rep.unique),
    );
    check(
        &mut out,
        "one free direction, vertical in the input slot",
        rep.free_directions.len() == 1 && rep.free_directions[0][1].abs() > 0.99,
        format!("{:?}", rep.free_directions),
    );
    check(
        &mut out,
        "graph accumulation dimension is 1",
        rep.cone_dim == Some(1),
        format!("{:?}", rep.cone_dim),
    );
    let strict = estimate_strict_differential(&f, &zero, cfg);
    let op = strict.l.as_ref().map(LinearMap::op_norm_bound);
    check(
        &mut out,
        "strict differential exists and is uniquely 0",
        strict.status == DiffStatus::StrictlyDifferentiable && op.map_or(false, |n| n < 1e-3),
        format!("status {:?} |L| {:?}", strict.status, op),
    );
    out
}

fn case_radical(cfg: &ProbeConfig) -> Vec<Expectation> {
    let f = radical_fn();
    let zero = vec_from(&[0.0, 0.0]);
    let rep = estimate_differential(&f, &zero, cfg);
    let want = LinearMap::from_rows(1, 2, &[1.0, 1.0]);
    let diff = rep.l.as_ref().map(|l| l.max_entry_diff(&want));
    let mut out = Vec::new();
    check(
        &mut out,
        "differentiable with differential (1, 1)",
        rep.status == DiffStatus::Differentiable && diff.map_or(false, |d| d < 1e-3),
        format!("status {:?} entry gap {:?}", rep.status, diff),
    );
    out
}

fn case_xy_over_r2(cfg: &ProbeConfig) -> Vec<Expectation> {
    let origin = vec_from(&[0.0, 0.0]);
    let mut out = Vec::new();
    let full = continuity_test(&xy_over_r2_fn(), &origin, cfg);
    check(
        &mut out,
        "discontinuous at the origin on the plane",
        full.class == DecayClass::Positive,
        format!("{:?}", full.class),
    );
    let on_axis = FnModel::scalar(x_axis(), "xy/(x^2+y^2) on the x-axis", |p| {
        let (x, y) = (p[0], p[1]);
        let r2 = x * x + y * y;
        if r2 == 0.0 { 0.0 } else { x * y / r2 }
    });
    let axis = continuity_test(&on_axis, &origin, cfg);
    check(
        &mut out,
        "continuous along each axis separately",
        axis.class == DecayClass::LimitZero,
        format!("{:?}", axis.class),
    );
    let rep = interior_diff_test(&xy_over_r2_fn(), &origin, cfg);
    check(
        &mut out,
        "not differentiable at the origin",
        rep.overall == DiffStatus::NotDifferentiable,
        format!("{:?}", rep.overall),
    );
    out
}

fn interior_case(
    f: &FnModel,
    x_hat: &Vector,
    cfg: &ProbeConfig,
    want: (Answer, Answer, Answer),
) -> Vec<Expectation> {
    let rep = interior_diff_test(f, x_hat, cfg);
    let mut out = Vec::new();
    check(&mut out, "continuity condition", rep.continuity == want.0, format!("got {:?} want {:?}", rep.continuity, want.0));
    check(&mut out, "linear directional derivative condition", rep.directional_linear == want.1, format!("got {:?} want {:?}", rep.directional_linear, want.1));
    check(&mut out, "graph-cone dimension condition", rep.dimension == want.2, format!("got {:?} want {:?}", rep.dimension, want.2));
    check(&mut out, "overall verdict is not differentiable", rep.overall == DiffStatus::NotDifferentiable, format!("{:?}", rep.overall));
    out
}

fn case_interior_discontinuity(cfg: &ProbeConfig) -> Vec<Expectation> {
    interior_case(
        &punctured_parabola_indicator(),
        &vec_from(&[0.0, 0.0]),
        cfg,
        (Answer::No, Answer::Yes, Answer::Yes),
    )
}

fn case_interior_nonlinear(cfg: &ProbeConfig) -> Vec<Expectation> {
    interior_case(&cbrt_fn(), &vec_from(&[0.0]), cfg, (Answer::Yes, Answer::No, Answer::Yes))
}

fn case_interior_dimension(cfg: &ProbeConfig) -> Vec<Expectation> {
    interior_case(
        &punctured_parabola_x(),
        &vec_from(&[0.0, 0.0]),
        cfg,
        (Answer::Yes, Answer::Yes, Answer::No),
    )
}

fn case_x2sin(cfg: &ProbeConfig) -> Vec<Expectation> {
    let f = x2sin_fn();
    let zero = vec_from(&[0.0]);
    let mut out = Vec::new();
    let plain = estimate_differential(&f, &zero, cfg);
    let entry = plain.l.as_ref().map(|l| l.entries_row_major()[0].abs());
    check(
        &mut out,
        "differentiable at 0 with zero derivative",
        plain.status == DiffStatus::Differentiable && entry.map_or(false, |e| e < 1e-3),
        format!("status {:?} |L| {:?}", plain.status, entry),
    );
    let strict = estimate_strict_differential(&f, &zero, cfg);
    check(
        &mut out,
        "not strictly differentiable at 0",
        strict.status == DiffStatus::NotStrict,
        format!("{:?}", strict.status),
    );
    let through_zero: Vec<Vector> = (-4..=4).map(|k| vec_from(&[k as f64 * 0.05])).collect();
    check(
        &mut out,
        "pointwise scan through 0 rejects",
        c1_scan(&f, &through_zero, cfg) == Answer::No,
        String::new(),
    );
    let avoiding: Vec<Vector> = (1..=5).map(|k| vec_from(&[0.2 + k as f64 * 0.01])).collect();
    check(
        &mut out,
        "pointwise scan away from 0 accepts",
        c1_scan(&f, &avoiding, cfg) == Answer::Yes,
        String::new(),
    );
    out
}

// ---------------------------------------------------------------------------

/// Every in/out verdict must respect the nesting of the four cones. Returns
/// the violations found across all grid directions of all four estimates.
pub fn chain_violations(m: &SetModel, base: &Vector, grid_count: usize, cfg: &ProbeConfig) -> Vec<String> {
    let grid = unit_sphere_grid(base.len(), grid_count.max(2 * base.len()), cfg.seed).unwrap();
    let mut bad = Vec::new();
    for v in &grid.dirs {
        let mut rank = Vec::new();
        for kind in [ConeKind::PTanLower, ConeKind::TanLower, ConeKind::TanUpper, ConeKind::PTanUpper] {
            let (mb, _) = direction_member(m, base, v, kind, cfg);
            rank.push((kind, mb));
        }
        for w in rank.windows(2) {
            if w[0].1 == Membership::In && w[1].1 == Membership::Out {
                bad.push(format!("dir {:?}: {:?} in but {:?} out", v.as_slice(), w[0].0, w[1].0));
            }
        }
    }
    bad
}

/// The model each case probes, for checks that need the raw set rather than
/// the case's packaged expectations. Function-based cases expose their graphs.
pub fn case_model(name: &str) -> Option<(SetModel, Vector)> {
    let zero2 = vec_from(&[0.0, 0.0]);
    Some(match name {
        "factorial_sequence" => (shapes::factorial_sequence(), vec_from(&[0.0])),
        "tsin_curve" => (shapes::tsin_curve(), zero2),
        "kinked_b" => (shapes::kinked_b(), zero2),
        "quadrant" => (shapes::quadrant(), zero2),
        "unit_circle" => (shapes::circle(1.0), vec_from(&[1.0, 0.0])),
        "log_spiral" => (shapes::log_spiral(), zero2),
        "sqrt_abs_graph" => (shapes::sqrt_abs_graph(), zero2),
        "severi_horn" => (shapes::horn(), zero2),
        "guareschi_radical" => (two_wedges(), zero2),
        "xy_over_r2" => (xy_over_r2_fn().graph_model()?, vec_from(&[0.0, 0.0, 0.0])),
        "interior_discontinuity" => (plane_with_parabola(), zero2),
        "interior_nonlinear_directional" => (plane_with_parabola(), zero2),
        "interior_cone_dimension" => (plane_with_parabola(), zero2),
        "x2sin_strictness" => (x2sin_fn().graph_model()?, zero2),
        _ => return None,
    })
}
