//! Differentiability classification for functions on arbitrary domains.
//!
//! A map f: A -> R^k is differentiable at an accumulation point x̂ of A when
//! (f(x) - f(x̂) - L(x - x̂))/‖x - x̂‖ -> 0 over the domain, and strictly
//! differentiable when the two-point version with x != y both tending to x̂
//! decays. Both are probed directly through shell regression, and again
//! through the tangent-cone characterizations of the graph.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::cones::{
    self, accumulation_dimension, chordal_dimension, direction_member, estimate_cone, Answer,
    ConeKind, Membership,
};
use crate::geom::{self, DirectionGrid, LinearMap, Vector};
use crate::probe::{classify, scale_grid, DecayClass, DecayVerdict, ProbeConfig, QuotientTrace};
use crate::setmodel::{SetModel, ScalarField};
use crate::setmodel::shapes::GraphShape;

pub type VectorField = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// A function given by an evaluator over a domain oracle.
#[derive(Clone)]
pub struct FnModel {
    pub domain: SetModel,
    eval: VectorField,
    pub out_dim: usize,
    pub descriptor: String,
}

impl FnModel {
    pub fn new(domain: SetModel, out_dim: usize, descriptor: impl Into<String>, eval: VectorField) -> Self {
        FnModel { domain, eval, out_dim, descriptor: descriptor.into() }
    }

    pub fn scalar<F: Fn(&Vector) -> f64 + Send + Sync + 'static>(
        domain: SetModel,
        descriptor: impl Into<String>,
        f: F,
    ) -> Self {
        let eval: VectorField = Arc::new(move |p: &Vector| Vector::from_vec(vec![f(p)]));
        FnModel { domain, eval, out_dim: 1, descriptor: descriptor.into() }
    }

    pub fn eval(&self, p: &Vector) -> Vector {
        (self.eval)(p)
    }

    pub fn in_dim(&self) -> usize {
        self.domain.ambient_dim()
    }

    /// The graph of a scalar function as a set oracle in R^{m+1}.
    pub fn graph_model(&self) -> Option<SetModel> {
        if self.out_dim != 1 {
            return None;
        }
        let eval = self.eval.clone();
        let f: ScalarField = Arc::new(move |x: &Vector| eval(x)[0]);
        Some(SetModel::new(GraphShape::new(
            self.domain.clone(),
            f,
            format!("graph of {}", self.descriptor),
        )))
    }
}

impl std::fmt::Debug for FnModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FnModel({})", self.descriptor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum DiffStatus {
    Differentiable,
    StrictlyDifferentiable,
    NotDifferentiable,
    NotStrict,
    Inconclusive,
}

impl DiffStatus {
    pub fn name(self) -> &'static str {
        match self {
            DiffStatus::Differentiable => "DIFFERENTIABLE",
            DiffStatus::StrictlyDifferentiable => "STRICTLY_DIFFERENTIABLE",
            DiffStatus::NotDifferentiable => "NOT_DIFFERENTIABLE",
            DiffStatus::NotStrict => "NOT_STRICT",
            DiffStatus::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DifferentialReport {
    pub status: DiffStatus,
    pub l: Option<LinearMap>,
    pub unique: Option<bool>,
    pub method: String,
    pub continuity: Option<DecayClass>,
    pub cone_dim: Option<usize>,
    pub residual_trace: Option<QuotientTrace>,
    /// Basis of input directions along which L is unconstrained (set when
    /// the cone dimension falls short of the input dimension).
    pub free_directions: Vec<Vector>,
    pub notes: Vec<String>,
}

impl DifferentialReport {
    fn bare(status: DiffStatus, method: &str) -> Self {
        DifferentialReport {
            status,
            l: None,
            unique: None,
            method: method.into(),
            continuity: None,
            cone_dim: None,
            residual_trace: None,
            free_directions: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "status": self.status.name(),
            "method": self.method,
            "L": self.l.as_ref().map(|l| l.entries_row_major()),
            "unique": self.unique,
            "diagnostics": {
                "continuity": self.continuity.map(|c| format!("{c:?}")),
                "cone_dim": self.cone_dim,
                "residual_csv": self.residual_trace.as_ref().map(|t| t.to_csv()),
                "free_directions": self.free_directions.iter()
                    .map(|v| v.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
                "notes": self.notes,
            },
        })
    }
}

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("base point lies inside or on the set (distance {d:.3e}, err {err:.3e})")]
    InsideSet { d: f64, err: f64 },
    #[error("claimed nearest point does not realize the distance")]
    BadNearest,
}

fn mix(seed: u64, tag: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(tag)
        .rotate_left(17)
        .wrapping_add(k as u64)
}

// ---------------------------------------------------------------------------
// continuity

/// Classifies sup over shrinking balls of ‖f(x) − f(x̂)‖.
pub fn continuity_test(f: &FnModel, x_hat: &Vector, cfg: &ProbeConfig) -> DecayVerdict {
    let f0 = f.eval(x_hat);
    let grid = scale_grid(cfg, f.domain.resolution_floor());
    let mut trace = QuotientTrace::default();
    for (k, &r) in grid.iter().enumerate() {
        let s = f.domain.sample_ball(x_hat, r, cfg.budget, mix(cfg.seed, 0xc017, k));
        if s.points.is_empty() {
            trace.push(r, None, 0.0, false);
            continue;
        }
        let q = s.points.iter().map(|x| (f.eval(x) - &f0).norm()).fold(0.0f64, f64::max);
        trace.push(r, Some(q), 1e-12, true);
    }
    // Continuity only needs the oscillation to tend to 0, with no rate: a
    // modulus like r^(1/3) stays above a strict eps across the whole tail.
    // Jumps of size above sqrt(eps) are still rejected.
    let ccfg = ProbeConfig { eps: cfg.eps.sqrt(), ..cfg.clone() };
    classify(&trace, &ccfg)
}

// ---------------------------------------------------------------------------
// shell regression (plain differentiability)

struct Shells {
    scales: Vec<f64>,
    // per scale: (x − x̂, f(x) − f(x̂)) for annulus samples
    samples: Vec<Vec<(Vector, Vector)>>,
}

fn collect_shells(f: &FnModel, x_hat: &Vector, f0: &Vector, cfg: &ProbeConfig) -> Shells {
    let scales = scale_grid(cfg, f.domain.resolution_floor());
    let mut samples = Vec::with_capacity(scales.len());
    for (k, &r) in scales.iter().enumerate() {
        let s = f.domain.sample_ball(x_hat, r, cfg.budget.max(32) * 2, mix(cfg.seed, 0x54e1, k));
        let mut shell = Vec::new();
        for x in &s.points {
            let dx = x - x_hat;
            let n = dx.norm();
            if n >= cfg.rho * r && n <= r * (1.0 + 1e-12) {
                shell.push((dx, f.eval(x) - f0));
            }
        }
        samples.push(shell);
    }
    Shells { scales, samples }
}

/// Weighted least squares for L from rows (dx, df), each normalized by ‖dx‖
/// so the objective is the residual quotient itself.
fn fit_linear(rows: &[(Vector, Vector)], m: usize, k: usize) -> LinearMap {
    let n = rows.len();
    let a = DMatrix::from_fn(n, m, |i, j| rows[i].0[j] / rows[i].0.norm());
    let mut mat = DMatrix::zeros(k, m);
    for out in 0..k {
        let b = DVector::from_fn(n, |i, _| rows[i].1[out] / rows[i].0.norm());
        let sol = geom::lstsq(&a, &b);
        for j in 0..m {
            mat[(out, j)] = sol[j];
        }
    }
    LinearMap::new(mat)
}

/// Picks the deepest shell that still has enough samples and is coarse
/// enough that float cancellation in f(x) − f(x̂) stays below the target
/// accuracy of the fit.
fn fit_shell_index(shells: &Shells, need: usize, coords_scale: f64) -> Option<usize> {
    let safe_r = 1e-7 * (1.0 + coords_scale);
    let mut fallback = None;
    for k in (0..shells.scales.len()).rev() {
        if shells.samples[k].len() >= need {
            if shells.scales[k] >= safe_r {
                return Some(k);
            }
            fallback = Some(k);
        }
    }
    fallback
}

fn residual_trace(shells: &Shells, l: &LinearMap) -> QuotientTrace {
    let mut trace = QuotientTrace::default();
    let err = 1e-11 * (1.0 + l.op_norm_bound());
    for (k, &r) in shells.scales.iter().enumerate() {
        if shells.samples[k].is_empty() {
            trace.push(r, None, 0.0, false);
            continue;
        }
        let q = shells.samples[k]
            .iter()
            .map(|(dx, df)| (df - l.apply(dx)).norm() / dx.norm())
            .fold(0.0f64, f64::max);
        trace.push(r, Some(q), err, true);
    }
    trace
}

/// Shell-regression differentiability test.
pub fn estimate_differential(f: &FnModel, x_hat: &Vector, cfg: &ProbeConfig) -> DifferentialReport {
    let method = "shell-regression";
    if cones::is_accumulation_point(&f.domain, x_hat, cfg) == Answer::No {
        let mut r = DifferentialReport::bare(DiffStatus::Inconclusive, method);
        r.notes.push("base point is isolated in the domain".into());
        return r;
    }
    let f0 = f.eval(x_hat);
    let shells = collect_shells(f, x_hat, &f0, cfg);
    let m = f.in_dim();
    let k = f.out_dim;
    let need = 3 * m;
    let Some(fit_k) = fit_shell_index(&shells, need, x_hat.norm() + f0.norm()) else {
        let mut r = DifferentialReport::bare(DiffStatus::Inconclusive, method);
        r.notes.push("no shell collected enough samples for the fit".into());
        return r;
    };
    let l = fit_linear(&shells.samples[fit_k], m, k);
    let trace = residual_trace(&shells, &l);
    let verdict = classify(&trace, cfg);
    let status = match verdict.class {
        DecayClass::LimitZero => DiffStatus::Differentiable,
        DecayClass::LiminfZeroOnly | DecayClass::Positive => DiffStatus::NotDifferentiable,
        DecayClass::Inconclusive => DiffStatus::Inconclusive,
    };
    let mut rep = DifferentialReport::bare(status, method);
    rep.l = Some(l);
    rep.residual_trace = Some(trace);
    rep
}

// ---------------------------------------------------------------------------
// pair regression (strict differentiability)

struct PairShells {
    scales: Vec<f64>,
    // per scale: (y − x, f(y) − f(x), noise bound on the quotient)
    pairs: Vec<Vec<(Vector, Vector, f64)>>,
}

fn pair_noise(fx: &Vector, fy: &Vector, gap: f64) -> f64 {
    1e-14 * (fx.norm() + fy.norm() + 1e-30) / gap
}

fn collect_pairs(f: &FnModel, x_hat: &Vector, cfg: &ProbeConfig) -> PairShells {
    let gate = cfg.validity_gate();
    let floor = f.domain.resolution_floor();
    let scales = scale_grid(cfg, floor);
    let mut all = Vec::with_capacity(scales.len());
    for (ki, &r) in scales.iter().enumerate() {
        let mut pairs = Vec::new();
        let s = f.domain.sample_ball(x_hat, r, cfg.budget, mix(cfg.seed, 0x9a12, ki));
        let bases: Vec<&Vector> = s.points.iter().take(16).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0x9a13, ki));
        // random pairs with the conservative gap cutoff
        for _ in 0..24.min(bases.len() * bases.len()) {
            if bases.len() < 2 {
                break;
            }
            let i = rng.gen_range(0..bases.len());
            let j = rng.gen_range(0..bases.len());
            if i == j {
                continue;
            }
            let dx = bases[j] - bases[i];
            let gap = dx.norm();
            if gap >= 1e-3 * r {
                let (fx, fy) = (f.eval(bases[i]), f.eval(bases[j]));
                let noise = pair_noise(&fx, &fy, gap);
                // float cancellation in f(y) - f(x) must stay under the
                // validity gate or the pair carries no information
                if noise <= 0.5 * gate {
                    pairs.push((dx, fy - fx, noise));
                }
            }
        }
        // structured near-diagonal pairs: gaps swept far below the cutoff,
        // kept only while their float-noise bound stays under the gate
        for (bi, &b) in bases.iter().take(8).enumerate() {
            for (gi, gexp) in (0..10).enumerate() {
                let gamma = r * 0.5 * 10f64.powi(-(gexp as i32));
                let s2 = f.domain.sample_ball(b, gamma, 3, mix(cfg.seed, 0x9a14, ki * 997 + bi * 31 + gi));
                for y in &s2.points {
                    let dx = y - b;
                    let gap = dx.norm();
                    if gap <= 0.0 {
                        continue;
                    }
                    let (fx, fy) = (f.eval(b), f.eval(y));
                    let noise = pair_noise(&fx, &fy, gap);
                    if noise <= 0.5 * gate {
                        pairs.push((dx, fy - fx, noise));
                    }
                }
            }
        }
        all.push(pairs);
    }
    PairShells { scales, pairs: all }
}

/// Two-point shell regression for strict differentiability.
pub fn estimate_strict_differential(f: &FnModel, x_hat: &Vector, cfg: &ProbeConfig) -> DifferentialReport {
    let method = "pair-regression";
    if cones::is_accumulation_point(&f.domain, x_hat, cfg) == Answer::No {
        let mut r = DifferentialReport::bare(DiffStatus::Inconclusive, method);
        r.notes.push("base point is isolated in the domain".into());
        return r;
    }
    let shells = collect_pairs(f, x_hat, cfg);
    let m = f.in_dim();
    let k = f.out_dim;
    let counts: Vec<usize> = shells.pairs.iter().map(|p| p.len()).collect();
    let pseudo = Shells {
        scales: shells.scales.clone(),
        samples: shells
            .pairs
            .iter()
            .map(|v| v.iter().map(|(dx, df, _)| (dx.clone(), df.clone())).collect())
            .collect(),
    };
    let Some(fit_k) = fit_shell_index(&pseudo, (3 * m).max(4), x_hat.norm()) else {
        let mut r = DifferentialReport::bare(DiffStatus::Inconclusive, method);
        r.notes.push(format!("insufficient pair samples per shell: {counts:?}"));
        return r;
    };
    let l = fit_linear(&pseudo.samples[fit_k], m, k);
    let mut trace = QuotientTrace::default();
    let gate = cfg.validity_gate();
    for (ki, &r) in shells.scales.iter().enumerate() {
        if shells.pairs[ki].is_empty() {
            trace.push(r, None, 0.0, false);
            continue;
        }
        let mut q = 0.0f64;
        let mut err = 0.0f64;
        for (dx, df, noise) in &shells.pairs[ki] {
            let qq = (df - l.apply(dx)).norm() / dx.norm();
            if qq > q {
                q = qq;
                err = *noise + 1e-11 * (1.0 + l.op_norm_bound());
            }
        }
        trace.push(r, Some(q), err, err <= gate);
    }
    let verdict = classify(&trace, cfg);
    match verdict.class {
        DecayClass::LimitZero => {
            let mut rep = DifferentialReport::bare(DiffStatus::StrictlyDifferentiable, method);
            rep.l = Some(l);
            rep.residual_trace = Some(trace);
            rep
        }
        DecayClass::Inconclusive => {
            let mut rep = DifferentialReport::bare(DiffStatus::Inconclusive, method);
            rep.residual_trace = Some(trace);
            rep
        }
        _ => {
            // pair residuals stay up; distinguish "not even differentiable"
            let plain = estimate_differential(f, x_hat, cfg);
            let status = if plain.status == DiffStatus::Differentiable {
                DiffStatus::NotStrict
            } else {
                plain.status
            };
            let mut rep = DifferentialReport::bare(status, method);
            rep.l = plain.l;
            rep.residual_trace = Some(trace);
            rep
        }
    }
}

// ---------------------------------------------------------------------------
// graph-cone characterizations

fn graph_point(f: &FnModel, x_hat: &Vector) -> (SetModel, Vector) {
    let graph = f.graph_model().expect("cone tests require scalar outputs");
    let f0 = f.eval(x_hat)[0];
    let mut g = x_hat.iter().copied().collect::<Vec<f64>>();
    g.push(f0);
    (graph, Vector::from_vec(g))
}

fn cone_fit_report(
    est: &crate::cones::ConeEstimate,
    m: usize,
    cfg: &ProbeConfig,
    method: &str,
    strict: bool,
) -> DifferentialReport {
    let fail_status = if strict { DiffStatus::NotStrict } else { DiffStatus::NotDifferentiable };
    let ok_status = if strict { DiffStatus::StrictlyDifferentiable } else { DiffStatus::Differentiable };
    let atol = 2.0 * cfg.eps.sqrt();
    // directions within the angular slack of a true cone direction are
    // membership noise, not evidence of an extra dimension
    let dim_tol = atol.max(1e-3);
    let dim = if strict {
        chordal_dimension(est, dim_tol)
    } else {
        accumulation_dimension(est, dim_tol)
    };
    let mut rep = DifferentialReport::bare(ok_status, method);
    rep.cone_dim = Some(dim);
    if dim > m {
        rep.status = fail_status;
        rep.notes.push(format!("graph cone spans dimension {dim} > input dimension {m}"));
        return rep;
    }
    let in_dirs = est.in_directions();
    if in_dirs.is_empty() {
        rep.status = DiffStatus::Inconclusive;
        rep.notes.push("no cone directions confirmed".into());
        return rep;
    }
    match geom::fit_nonvertical_hyperplane(&in_dirs, atol) {
        Ok(Ok(l)) => {
            rep.unique = Some(dim == m);
            if dim < m {
                rep.free_directions = free_complement(&in_dirs, m, dim_tol);
                rep.notes.push(format!(
                    "cone dimension {dim} < {m}: the differential is unconstrained along {} input directions",
                    m - dim
                ));
            }
            rep.l = Some(l);
        }
        Ok(Err(fail)) => {
            rep.status = fail_status;
            rep.notes.push(format!("hyperplane fit failed: {fail:?}"));
        }
        Err(e) => {
            rep.status = DiffStatus::Inconclusive;
            rep.notes.push(format!("fit error: {e}"));
        }
    }
    rep
}

/// Orthonormal basis of input directions orthogonal to the horizontal
/// projections of the cone.
fn free_complement(in_dirs: &[Vector], m: usize, tol: f64) -> Vec<Vector> {
    // Principal directions of the horizontal projections, with the same
    // singular-value cutoff used for the dimension count: near-slack noise
    // directions must not inflate the span and swallow the complement.
    let mut mat = nalgebra::DMatrix::zeros(m, in_dirs.len());
    for (j, d) in in_dirs.iter().enumerate() {
        mat.set_column(j, &d.rows(0, m).into_owned());
    }
    let svd = mat.svd(true, false);
    let smax = svd.singular_values.max();
    let u = match svd.u {
        Some(u) if smax > 0.0 => u,
        _ => return Vec::new(),
    };
    let onb: Vec<Vector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s > tol * smax)
        .map(|(j, _)| u.column(j).into_owned())
        .collect();
    let mut free = Vec::new();
    for j in 0..m {
        let e = Vector::from_fn(m, |i, _| if i == j { 1.0 } else { 0.0 });
        let mut ext = onb.clone();
        ext.extend(free.iter().cloned());
        let r = &e - ext.iter().map(|b| b * e.dot(b)).fold(Vector::zeros(m), |a, b| a + b);
        if r.norm() > 1e-6 {
            free.push(r.clone() / r.norm());
        }
    }
    free
}

fn graph_grid(f: &FnModel, graph: &SetModel, g0: &Vector, grid: &DirectionGrid, cfg: &ProbeConfig, pairs: bool) -> DirectionGrid {
    let mut grid = grid.clone();
    let harvested = cones::harvest_directions(graph, g0, cfg, 96, pairs);
    grid.extend_dirs(&harvested, 1e-4);
    let _ = f;
    grid
}

/// Differentiability via the upper tangent cone of the graph.
pub fn cone_diff_test(f: &FnModel, x_hat: &Vector, grid: &DirectionGrid, cfg: &ProbeConfig) -> DifferentialReport {
    let method = "graph-cone";
    let cont = continuity_test(f, x_hat, cfg);
    if cont.class != DecayClass::LimitZero {
        // the characterization presupposes continuity; the cone test alone
        // can pass for discontinuous functions
        let status = if cont.class == DecayClass::Inconclusive {
            DiffStatus::Inconclusive
        } else {
            DiffStatus::NotDifferentiable
        };
        let mut rep = DifferentialReport::bare(status, method);
        rep.continuity = Some(cont.class);
        rep.notes.push("HYPOTHESIS_FAILED(continuity)".into());
        return rep;
    }
    let (graph, g0) = graph_point(f, x_hat);
    let grid = graph_grid(f, &graph, &g0, grid, cfg, false);
    let est = estimate_cone(&graph, &g0, ConeKind::TanUpper, &grid, cfg);
    let mut rep = cone_fit_report(&est, f.in_dim(), cfg, method, false);
    rep.continuity = Some(cont.class);
    rep
}

/// Strict differentiability via the paratingent cone of the graph.
pub fn cone_strict_diff_test(f: &FnModel, x_hat: &Vector, grid: &DirectionGrid, cfg: &ProbeConfig) -> DifferentialReport {
    let method = "graph-cone-strict";
    let cont = continuity_test(f, x_hat, cfg);
    let (graph, g0) = graph_point(f, x_hat);
    let grid = graph_grid(f, &graph, &g0, grid, cfg, true);
    let est = estimate_cone(&graph, &g0, ConeKind::PTanUpper, &grid, cfg);
    let mut rep = cone_fit_report(&est, f.in_dim(), cfg, method, true);
    rep.continuity = Some(cont.class);
    rep
}

// ---------------------------------------------------------------------------
// directional derivatives

/// Hadamard directional derivative: limit of (f(x̂ + t w) − f(x̂))/t over
/// w → v, t → 0⁺ with x̂ + t w in the domain. None when the direction is not
/// tangent or the sampled quotients do not settle.
pub fn hadamard_derivative(f: &FnModel, x_hat: &Vector, v: &Vector, cfg: &ProbeConfig) -> Option<Vector> {
    let (mb, _) = direction_member(&f.domain, x_hat, v, ConeKind::TanUpper, cfg);
    if mb != Membership::In {
        return None;
    }
    directional_limit(f, x_hat, v, cfg, false)
}

/// Directional hyperderivative: base points also roam toward x̂.
pub fn hyperderivative(f: &FnModel, x_hat: &Vector, v: &Vector, cfg: &ProbeConfig) -> Option<Vector> {
    let (mb, _) = direction_member(&f.domain, x_hat, v, ConeKind::PTanUpper, cfg);
    if mb != Membership::In {
        return None;
    }
    directional_limit(f, x_hat, v, cfg, true)
}

fn directional_limit(f: &FnModel, x_hat: &Vector, v: &Vector, cfg: &ProbeConfig, roaming: bool) -> Option<Vector> {
    let scales = scale_grid(cfg, f.domain.resolution_floor());
    let f0 = f.eval(x_hat);
    // per scale, quotients realized by actual domain points near the ray
    let mut per_scale: Vec<Vec<Vector>> = Vec::new();
    for (k, &t) in scales.iter().enumerate() {
        let alpha = cfg.eps.max(t);
        let mut quotients = Vec::new();
        let bases: Vec<Vector> = if roaming {
            let s = f.domain.sample_ball(x_hat, t.sqrt(), 12, mix(cfg.seed, 0x4add, k));
            let mut b = vec![x_hat.clone()];
            b.extend(s.points);
            b
        } else {
            vec![x_hat.clone()]
        };
        for (bi, b) in bases.iter().enumerate() {
            let target = b + v * t;
            let s = f.domain.sample_ball(&target, 2.0 * alpha * t, 8, mix(cfg.seed, 0x4ad1, k * 37 + bi));
            let fb = if roaming { f.eval(b) } else { f0.clone() };
            for x in &s.points {
                if (x - b).norm() == 0.0 {
                    continue;
                }
                quotients.push((f.eval(x) - &fb) / t);
            }
        }
        per_scale.push(quotients);
    }
    // gather the last few scales that produced hits
    let mut tail_vals: Vec<&Vector> = Vec::new();
    let mut scales_hit = 0;
    for vals in per_scale.iter().rev() {
        if !vals.is_empty() {
            scales_hit += 1;
            tail_vals.extend(vals.iter());
        }
        if scales_hit >= 4 {
            break;
        }
    }
    if scales_hit < 2 || tail_vals.len() < 3 {
        return None;
    }
    let n = tail_vals.len() as f64;
    let mean = tail_vals.iter().fold(Vector::zeros(f.out_dim), |a, b| a + *b) / n;
    let mag = 1.0 + mean.norm();
    let tol = 4.0 * cfg.eps * mag;
    if tail_vals.iter().all(|q| (*q - &mean).norm() <= tol) {
        Some(mean)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// decoupled-sequence consistency check

/// Verifies L against decoupled sequences: x_n -> x̂ with (x_n − x̂)/λ_n -> v
/// forces (f(x_n) − f(x̂))/λ_n -> L v, including runs where λ_n shrinks much
/// slower than ‖x_n − x̂‖.
pub fn cyrenian_check(f: &FnModel, x_hat: &Vector, l: &LinearMap, cfg: &ProbeConfig) -> Answer {
    let dirs = cones::harvest_directions(&f.domain, x_hat, cfg, 24, false);
    if dirs.is_empty() {
        return Answer::Unknown;
    }
    let scales = scale_grid(cfg, f.domain.resolution_floor());
    let f0 = f.eval(x_hat);
    let tol = 4.0 * cfg.eps * (1.0 + l.op_norm_bound());
    let tail = cfg.tail.min(scales.len());
    let mut realized_any = false;
    for v in &dirs {
        let mut hits = 0usize;
        for (k, &s) in scales.iter().enumerate().skip(scales.len() - tail) {
            let target = x_hat + v * s;
            let near = f.domain.sample_ball(&target, 2.0 * cfg.eps * s, 8, mix(cfg.seed, 0xc18e, k));
            for x in near.points.iter().take(3) {
                let dx = x - x_hat;
                if dx.norm() == 0.0 {
                    continue;
                }
                hits += 1;
                realized_any = true;
                // plain coupling: λ = s
                let q = (f.eval(x) - &f0) / s;
                let want = l.apply(&(dx.clone() / s));
                if (q - &want).norm() > tol {
                    return Answer::No;
                }
                // decoupled coupling: λ >> ‖x − x̂‖, realized direction 0
                let lambda = (s * cfg.t0).sqrt();
                let q2 = (f.eval(x) - &f0) / lambda;
                let want2 = l.apply(&(dx / lambda));
                if (q2 - &want2).norm() > tol {
                    return Answer::No;
                }
            }
        }
        let _ = hits;
    }
    if realized_any {
        Answer::Yes
    } else {
        Answer::Unknown
    }
}

// ---------------------------------------------------------------------------
// the interior three-condition test

#[derive(Debug, Clone)]
pub struct InteriorReport {
    pub continuity: Answer,
    pub directional_linear: Answer,
    pub dimension: Answer,
    pub overall: DiffStatus,
    pub gateaux: Option<LinearMap>,
    pub cone_dim: Option<usize>,
}

/// Interior differentiability decomposed into continuity, linear directional
/// derivatives, and graph-cone dimension. Each counterexample in the corpus
/// fails exactly one of the three.
pub fn interior_diff_test(f: &FnModel, x_hat: &Vector, cfg: &ProbeConfig) -> InteriorReport {
    let m = f.in_dim();
    // (1) continuity
    let cont = continuity_test(f, x_hat, cfg);
    let c1 = match cont.class {
        DecayClass::LimitZero => Answer::Yes,
        DecayClass::Inconclusive => Answer::Unknown,
        _ => Answer::No,
    };
    // (2) existence and linearity of two-sided directional derivatives
    let grid = geom::unit_sphere_grid(m, (2 * m + 6).max(8), cfg.seed).expect("grid");
    let scales = scale_grid(cfg, f.domain.resolution_floor());
    let f0 = f.eval(x_hat);
    let mut rows: Vec<(Vector, Vector)> = Vec::new();
    let mut c2 = Answer::Yes;
    'dirs: for v in &grid.dirs {
        let tail = 4.min(scales.len());
        let mut vals = Vec::new();
        for &t in scales.iter().rev().take(tail) {
            let x = x_hat + v * t;
            vals.push((f.eval(&x) - &f0) / t);
        }
        let mean = vals.iter().fold(Vector::zeros(f.out_dim), |a, b| a + b) / vals.len() as f64;
        let tol = 4.0 * cfg.eps * (1.0 + mean.norm());
        for q in &vals {
            if (q - &mean).norm() > tol {
                c2 = Answer::No;
                break 'dirs;
            }
        }
        rows.push((v.clone(), mean));
    }
    let mut gateaux = None;
    if c2 == Answer::Yes {
        let l = fit_linear(&rows, m, f.out_dim);
        let maxg = rows.iter().map(|(_, g)| g.norm()).fold(0.0f64, f64::max);
        let lin_tol = 4.0 * cfg.eps * (1.0 + maxg);
        let worst = rows.iter().map(|(v, g)| (g - l.apply(v)).norm()).fold(0.0f64, f64::max);
        if worst > lin_tol {
            c2 = Answer::No;
        } else {
            gateaux = Some(l);
        }
    }
    // (3) graph cone spans exactly the input dimension; graph samples are
    // exact lifts of domain samples, so chords measure the cone directly
    let (graph, g0) = graph_point(f, x_hat);
    let dim = graph_chord_dimension(&graph, &g0, cfg);
    let c3 = if dim == m { Answer::Yes } else { Answer::No };
    let overall = if c1 == Answer::Yes && c2 == Answer::Yes && c3 == Answer::Yes {
        DiffStatus::Differentiable
    } else if c1 == Answer::Unknown || c2 == Answer::Unknown {
        DiffStatus::Inconclusive
    } else {
        DiffStatus::NotDifferentiable
    };
    InteriorReport { continuity: c1, directional_linear: c2, dimension: c3, overall, gateaux, cone_dim: Some(dim) }
}

/// Span dimension of normalized graph chords from the base point. Chords at
/// scale r approximate cone directions to a relative error of order r, so
/// the estimate uses the smallest scales that yield enough chords.
fn graph_chord_dimension(graph: &SetModel, g0: &Vector, cfg: &ProbeConfig) -> usize {
    let scales = scale_grid(cfg, graph.resolution_floor());
    let mut dims = Vec::new();
    for (k, &r) in scales.iter().enumerate().rev() {
        let s = graph.sample_ball(g0, r, 4 * cfg.budget, mix(cfg.seed, 0xd1e5, k));
        let mut chords: Vec<Vector> = Vec::new();
        for p in &s.points {
            let c = p - g0;
            let n = c.norm();
            if n > 1e-14 * (1.0 + g0.norm()) {
                chords.push(c / n);
            }
        }
        if chords.len() >= 3 {
            dims.push(geom::span_dimension(&chords, 1e-2).unwrap_or(0));
            if dims.len() >= 3 {
                break;
            }
        }
    }
    dims.into_iter().max().unwrap_or(0)
}

// ---------------------------------------------------------------------------
// distance gradient

/// Gradient of x ↦ d(x, F) off the set: the unit vector from the nearest
/// point to x̂.
pub fn distance_gradient(model: &SetModel, x_hat: &Vector, nearest: &Vector) -> Result<Vector, DiffError> {
    let d = model.distance(x_hat, 1e-6);
    if d.value <= 10.0 * d.err_bound || d.value == 0.0 {
        return Err(DiffError::InsideSet { d: d.value, err: d.err_bound });
    }
    let gap = (x_hat - nearest).norm();
    if (gap - d.value).abs() > 4.0 * d.err_bound + 1e-9 * (1.0 + d.value) {
        return Err(DiffError::BadNearest);
    }
    Ok((x_hat - nearest) / gap)
}

/// Central finite differences of the distance oracle, for cross-checking
/// the closed-form gradient.
pub fn distance_gradient_fd(model: &SetModel, x_hat: &Vector, h: f64) -> Vector {
    let n = x_hat.len();
    Vector::from_fn(n, |i, _| {
        let mut hi = x_hat.clone();
        let mut lo = x_hat.clone();
        hi[i] += h;
        lo[i] -= h;
        (model.distance(&hi, h).value - model.distance(&lo, h).value) / (2.0 * h)
    })
}

// ---------------------------------------------------------------------------
// C1 scan

/// Strict differentiability at every grid point plus continuity of the
/// estimated differential across neighbors.
pub fn c1_scan(f: &FnModel, points: &[Vector], cfg: &ProbeConfig) -> Answer {
    assert!(!points.is_empty());
    let mut maps: Vec<LinearMap> = Vec::with_capacity(points.len());
    for p in points {
        let rep = estimate_strict_differential(f, p, cfg);
        match rep.status {
            DiffStatus::StrictlyDifferentiable => maps.push(rep.l.expect("strict implies L")),
            DiffStatus::Inconclusive => return Answer::Unknown,
            _ => return Answer::No,
        }
    }
    if points.len() < 2 {
        return Answer::Yes;
    }
    // neighbor = nearest other grid point; jump tolerance widens with the
    // grid spacing since L genuinely varies between nodes
    for (i, p) in points.iter().enumerate() {
        let (j, spacing) = points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, q)| (j, (q - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let tol = cfg.eps.max(8.0 * spacing.sqrt());
        if maps[i].max_entry_diff(&maps[j]) > tol {
            return Answer::No;
        }
    }
    Answer::Yes
}
