//! Tangent-cone estimation through distance probes.
//!
//! A direction v belongs to the lower tangent cone at x̂ when the quotient
//! d(x̂ + t v, F)/t tends to zero, and to the upper cone when it tends to
//! zero along a subsequence. The paired (paratangent) variants let the base
//! point roam over the set toward x̂: the Clarke-type lower cone takes the
//! worst base at each scale, the paratingent upper cone the best one.

use rayon::prelude::*;
use serde_json::json;

use crate::geom::{self, DirectionGrid, Vector};
use crate::probe::{classify, scale_grid, DecayClass, DecayVerdict, ProbeConfig, QuotientTrace};
use crate::setmodel::SetModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ConeKind {
    TanLower,
    TanUpper,
    PTanLower,
    PTanUpper,
}

impl ConeKind {
    pub fn is_upper(self) -> bool {
        matches!(self, ConeKind::TanUpper | ConeKind::PTanUpper)
    }

    pub fn is_paired(self) -> bool {
        matches!(self, ConeKind::PTanLower | ConeKind::PTanUpper)
    }

    pub fn name(self) -> &'static str {
        match self {
            ConeKind::TanLower => "TAN_LOWER",
            ConeKind::TanUpper => "TAN_UPPER",
            ConeKind::PTanLower => "PTAN_LOWER",
            ConeKind::PTanUpper => "PTAN_UPPER",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Membership {
    In,
    Out,
    Unknown,
}

/// Three-valued answer for point-level questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct DirResult {
    pub v: Vector,
    pub membership: Membership,
    pub verdict: DecayVerdict,
    pub trace: QuotientTrace,
}

impl DirResult {
    pub fn min_tail_q(&self, tail: usize) -> Option<f64> {
        self.trace.min_tail_q(tail)
    }
}

#[derive(Debug, Clone)]
pub struct ConeEstimate {
    pub kind: ConeKind,
    pub base: Vector,
    pub dirs: Vec<DirResult>,
    pub eps: f64,
    pub seed: u64,
    pub tail: usize,
}

impl ConeEstimate {
    pub fn in_directions(&self) -> Vec<Vector> {
        self.dirs
            .iter()
            .filter(|d| d.membership == Membership::In)
            .map(|d| d.v.clone())
            .collect()
    }

    pub fn unknown_count(&self) -> usize {
        self.dirs.iter().filter(|d| d.membership == Membership::Unknown).count()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let dirs: Vec<serde_json::Value> = self
            .dirs
            .iter()
            .map(|d| {
                json!({
                    "v": d.v.iter().copied().collect::<Vec<f64>>(),
                    "verdict": format!("{:?}", d.verdict.class),
                    "membership": d.membership,
                    "min_tail_q": d.min_tail_q(self.tail),
                })
            })
            .collect();
        let mut obj = json!({
            "kind": self.kind.name(),
            "base": self.base.iter().copied().collect::<Vec<f64>>(),
            "seed": self.seed,
            "eps": self.eps,
            "dirs": dirs,
        });
        if self.kind == ConeKind::PTanLower {
            obj["note"] = json!("sampled-sup");
        }
        obj
    }

    /// Polar CSV for planar estimates: angle, verdict, min tail quotient.
    pub fn to_polar_csv(&self) -> Option<String> {
        if self.base.len() != 2 {
            return None;
        }
        let mut out = String::from("angle,verdict,min_tail_q\n");
        for d in &self.dirs {
            let a = d.v[1].atan2(d.v[0]);
            let q = d.min_tail_q(self.tail).map(|q| q.to_string()).unwrap_or_default();
            out.push_str(&format!("{a},{:?},{q}\n", d.verdict.class));
        }
        Some(out)
    }
}

fn mix_seed(seed: u64, kind: ConeKind, scale_idx: usize, v: &Vector) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    seed.hash(&mut h);
    (kind as u8).hash(&mut h);
    scale_idx.hash(&mut h);
    for x in v.iter() {
        x.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Extremizes q over a geometric band [t_lo, t_hi] by coarse log sampling
/// plus iterative zoom. Returns (q, err_at_winner). Pointwise sampling
/// would miss sets that meet a ray only on a sparse sequence of scales.
fn band_stat<F: Fn(f64) -> (f64, f64)>(f: &F, t_lo: f64, t_hi: f64, minimize: bool, eps: f64) -> (f64, f64) {
    let pts = 9usize;
    let mut lo = t_lo;
    let mut hi = t_hi;
    let mut best = (f64::NAN, f64::NAN);
    for round in 0..6 {
        let l0 = lo.ln();
        let l1 = hi.ln();
        let mut best_i = 0usize;
        let mut best_q = if minimize { f64::INFINITY } else { f64::NEG_INFINITY };
        let mut best_err = 0.0;
        let grid: Vec<f64> = (0..pts)
            .map(|i| (l0 + (l1 - l0) * i as f64 / (pts - 1) as f64).exp())
            .collect();
        for (i, &t) in grid.iter().enumerate() {
            let (q, e) = f(t);
            let better = if minimize { q < best_q } else { q > best_q };
            if better {
                best_q = q;
                best_err = e;
                best_i = i;
            }
        }
        best = (best_q, best_err);
        if minimize && best_q < eps / 2.0 && round > 0 {
            break;
        }
        lo = grid[best_i.saturating_sub(1)];
        hi = grid[(best_i + 1).min(pts - 1)];
        if hi <= lo * (1.0 + 1e-12) {
            break;
        }
    }
    best
}

struct ProbeContext<'a> {
    model: &'a SetModel,
    base: &'a Vector,
    grid: Vec<f64>,
    base_in_set: bool,
}

impl<'a> ProbeContext<'a> {
    fn new(model: &'a SetModel, base: &'a Vector, cfg: &ProbeConfig) -> Self {
        let grid = scale_grid(cfg, model.resolution_floor());
        let d0 = model.distance(base, cfg.t0);
        let base_in_set = d0.value <= 2.0 * d0.err_bound + 1e-9;
        ProbeContext { model, base, grid, base_in_set }
    }
}

fn probe_tan(ctx: &ProbeContext, v: &Vector, kind: ConeKind, cfg: &ProbeConfig) -> QuotientTrace {
    let minimize = kind.is_upper();
    let mut trace = QuotientTrace::default();
    let gate = cfg.validity_gate();
    for &t_hi in &ctx.grid {
        let t_lo = t_hi * cfg.rho;
        let f = |t: f64| {
            let d = ctx.model.distance(&(ctx.base + v * t), t);
            (d.value / t, d.err_bound / t)
        };
        let (q, err) = band_stat(&f, t_lo, t_hi, minimize, cfg.eps);
        trace.push(t_hi, Some(q), err, err <= gate);
    }
    trace
}

fn probe_ptan(ctx: &ProbeContext, v: &Vector, kind: ConeKind, cfg: &ProbeConfig, budget: usize) -> QuotientTrace {
    let minimize = kind == ConeKind::PTanUpper;
    let mut trace = QuotientTrace::default();
    let gate = cfg.validity_gate();
    for (k, &t_hi) in ctx.grid.iter().enumerate() {
        let t_lo = t_hi * cfg.rho;
        // the base point roams within sqrt(t) of x̂; the joint limit allows
        // any coupling, and this one keeps chord phenomena visible
        let eta = t_hi.sqrt();
        let seed = mix_seed(cfg.seed, kind, k, v);
        // keep the screening pass affordable on expensive oracles: a capped
        // set of roaming bases, with the cap growing with the retry budget
        let cap = 16 + budget / 32;
        let sample = ctx.model.sample_ball(ctx.base, eta, budget.min(4 * cap), seed);
        let mut bases: Vec<Vector> = Vec::with_capacity(cap + 1);
        if ctx.base_in_set {
            bases.push(ctx.base.clone());
        }
        bases.extend(sample.points.into_iter().take(cap));
        if bases.is_empty() {
            trace.push(t_hi, None, 0.0, false);
            continue;
        }
        // cheap 3-point screen per base, then a full band pass on the leaders
        let coarse = |y: &Vector| {
            let mut best = if minimize { f64::INFINITY } else { f64::NEG_INFINITY };
            for &t in &[t_lo, (t_lo * t_hi).sqrt(), t_hi] {
                let d = ctx.model.distance(&(y + v * t), t);
                let q = d.value / t;
                if (minimize && q < best) || (!minimize && q > best) {
                    best = q;
                }
            }
            best
        };
        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(bases.len());
        for (i, y) in bases.iter().enumerate() {
            let q = coarse(y);
            scored.push((q, i));
            // an upper-kind screen that is already a clear hit needs no
            // further screening at this scale
            if minimize && q < cfg.eps / 4.0 {
                break;
            }
        }
        scored.sort_by(|a, b| if minimize { a.0.total_cmp(&b.0) } else { b.0.total_cmp(&a.0) });
        let mut best_q = if minimize { f64::INFINITY } else { f64::NEG_INFINITY };
        let mut best_err = 0.0;
        for &(_, i) in scored.iter().take(6) {
            let y = &bases[i];
            let f = |t: f64| {
                let d = ctx.model.distance(&(y + v * t), t);
                (d.value / t, d.err_bound / t)
            };
            let (q, err) = band_stat(&f, t_lo, t_hi, minimize, cfg.eps);
            if (minimize && q < best_q) || (!minimize && q > best_q) {
                best_q = q;
                best_err = err;
            }
            if minimize && best_q < cfg.eps / 2.0 {
                break;
            }
        }
        trace.push(t_hi, Some(best_q), best_err, best_err <= gate);
    }
    trace
}

fn verdict_to_membership(verdict: &DecayVerdict, kind: ConeKind) -> Membership {
    match verdict.class {
        DecayClass::LimitZero => Membership::In,
        DecayClass::LiminfZeroOnly => {
            if kind.is_upper() {
                Membership::In
            } else {
                Membership::Out
            }
        }
        DecayClass::Positive => Membership::Out,
        DecayClass::Inconclusive => Membership::Unknown,
    }
}

/// Membership probe for one unit direction.
pub fn direction_member(
    model: &SetModel,
    base: &Vector,
    v: &Vector,
    kind: ConeKind,
    cfg: &ProbeConfig,
) -> (Membership, QuotientTrace) {
    debug_assert!((v.norm() - 1.0).abs() <= 1e-9, "direction must be unit length");
    let ctx = ProbeContext::new(model, base, cfg);
    direction_member_ctx(&ctx, v, kind, cfg)
}

fn direction_member_ctx(ctx: &ProbeContext, v: &Vector, kind: ConeKind, cfg: &ProbeConfig) -> (Membership, QuotientTrace) {
    let trace = if kind.is_paired() {
        let t = probe_ptan(ctx, v, kind, cfg, cfg.budget);
        let verdict = classify(&t, cfg);
        if verdict.class == DecayClass::Inconclusive {
            // one automatic retry with a doubled base-point budget
            probe_ptan(ctx, v, kind, cfg, cfg.budget * 2)
        } else {
            t
        }
    } else {
        probe_tan(ctx, v, kind, cfg)
    };
    let verdict = classify(&trace, cfg);
    (verdict_to_membership(&verdict, kind), trace)
}

/// Estimates a cone over a direction grid. Directions are independent and
/// run in parallel; results merge deterministically by grid index.
pub fn estimate_cone(
    model: &SetModel,
    base: &Vector,
    kind: ConeKind,
    grid: &DirectionGrid,
    cfg: &ProbeConfig,
) -> ConeEstimate {
    assert_eq!(grid.dim, model.ambient_dim(), "grid dimension mismatch");
    let ctx = ProbeContext::new(model, base, cfg);
    let dirs: Vec<DirResult> = grid
        .dirs
        .par_iter()
        .map(|v| {
            let (membership, trace) = direction_member_ctx(&ctx, v, kind, cfg);
            let verdict = classify(&trace, cfg);
            DirResult { v: v.clone(), membership, verdict, trace }
        })
        .collect();
    ConeEstimate {
        kind,
        base: base.clone(),
        dirs,
        eps: cfg.eps,
        seed: cfg.seed,
        tail: cfg.tail,
    }
}

fn punctured(points: Vec<Vector>, base: &Vector) -> Vec<Vector> {
    let tol = 1e-14 * (1.0 + base.norm());
    points.into_iter().filter(|p| (p - base).norm() > tol).collect()
}

/// Conical-neighborhood membership: a tangent half-line in direction v
/// exists when every small sphere around x̂ meets the set inside a narrowing
/// cone around v.
pub fn cassina_member(model: &SetModel, base: &Vector, v: &Vector, cfg: &ProbeConfig) -> Membership {
    let grid = scale_grid(cfg, model.resolution_floor());
    let tail = cfg.tail.min(grid.len());
    let gate = cfg.validity_gate();
    let mut invalid = 0usize;
    let mut hits: Vec<bool> = Vec::with_capacity(tail);
    for &r in grid.iter().skip(grid.len() - tail) {
        // the set meets the cone of half-angle ~eps around v inside B(x̂, r)
        // iff d(x̂ + tv, F) ≤ eps·t for some chord length t ≲ r; a window a
        // few octaves deep (wider than the per-band probe, but not reaching
        // to the resolution floor) tolerates recurrent gaps without letting
        // one isolated deep hit decide every scale
        let t_lo = r * cfg.rho.powi(3);
        let f = |t: f64| {
            let d = model.distance(&(base + v * t), t);
            (d.value / t, d.err_bound / t)
        };
        let (q, err) = band_stat(&f, t_lo, r, true, cfg.eps);
        if err > gate {
            invalid += 1;
        } else {
            hits.push(q <= cfg.eps);
        }
    }
    if hits.is_empty() {
        return Membership::Unknown;
    }
    let n_hits = hits.iter().filter(|&&h| h).count();
    // a tangent half-line needs conical hits on a sequence of scales running
    // to the bottom: frequent enough, and present in the deepest stretch
    let deep = hits.len().div_ceil(3);
    let deep_hit = hits[hits.len() - deep..].iter().any(|&h| h);
    let member = n_hits == hits.len() || (3 * n_hits >= hits.len() && deep_hit);
    if member {
        Membership::In
    } else if invalid > 0 && !member {
        Membership::Unknown
    } else {
        Membership::Out
    }
}

/// True when every tail-scale punctured ball around x̂ meets the set.
pub fn is_accumulation_point(model: &SetModel, base: &Vector, cfg: &ProbeConfig) -> Answer {
    let grid = scale_grid(cfg, model.resolution_floor());
    let tail = cfg.tail.min(grid.len());
    let mut unknown = false;
    for (k, &r) in grid.iter().enumerate().skip(grid.len() - tail) {
        let sample = model.sample_ball(base, r, cfg.budget, mix_seed(cfg.seed, ConeKind::TanUpper, k, base) ^ 0xacc);
        let pts = punctured(sample.points, base);
        if pts.is_empty() {
            if sample.exhausted {
                unknown = true;
            } else {
                return Answer::No;
            }
        }
    }
    if unknown {
        Answer::Unknown
    } else {
        Answer::Yes
    }
}

/// Classifies whether the set hugs the affine subspace x̂ + span(basis):
/// q(r) is the largest angle-like quotient d(x, subspace)/‖x − x̂‖ over the
/// punctured sample at radius r.
pub fn subspace_tangency(model: &SetModel, base: &Vector, basis: &[Vector], cfg: &ProbeConfig) -> DecayVerdict {
    let onb = geom::orthonormalize(basis);
    assert_eq!(onb.len(), basis.len(), "basis must be linearly independent");
    let grid = scale_grid(cfg, model.resolution_floor());
    let mut trace = QuotientTrace::default();
    for (k, &r) in grid.iter().enumerate() {
        let sample = model.sample_ball(base, r, cfg.budget, mix_seed(cfg.seed, ConeKind::TanUpper, k, base) ^ 0x5ab);
        let pts = punctured(sample.points, base);
        if pts.is_empty() {
            trace.push(r, None, 0.0, false);
            continue;
        }
        let q = pts
            .iter()
            .map(|p| {
                let chord = p - base;
                geom::distance_to_span(&chord, &onb) / chord.norm()
            })
            .fold(0.0f64, f64::max);
        trace.push(r, Some(q), 1e-12, true);
    }
    classify(&trace, cfg)
}

/// Report from the polar test against an upper-cone estimate.
#[derive(Debug, Clone)]
pub struct NormalAnswer {
    pub member: bool,
    pub unknown_dirs: usize,
}

/// Polar-cone membership of w against the estimated upper tangent cone.
pub fn normal_cone_member(tan_upper: &ConeEstimate, w: &Vector, tol: f64) -> NormalAnswer {
    assert_eq!(tan_upper.kind, ConeKind::TanUpper);
    let dirs = tan_upper.in_directions();
    let member = geom::polar_member(w, &dirs, tol).unwrap_or(false);
    NormalAnswer { member, unknown_dirs: tan_upper.unknown_count() }
}

/// Dimension of the span of the estimated upper tangent cone.
pub fn accumulation_dimension(est: &ConeEstimate, tol: f64) -> usize {
    assert_eq!(est.kind, ConeKind::TanUpper);
    span_of_in(est, tol)
}

/// Dimension of the span of the estimated paratingent cone.
pub fn chordal_dimension(est: &ConeEstimate, tol: f64) -> usize {
    assert_eq!(est.kind, ConeKind::PTanUpper);
    span_of_in(est, tol)
}

fn span_of_in(est: &ConeEstimate, tol: f64) -> usize {
    let dirs = est.in_directions();
    if dirs.is_empty() {
        0
    } else {
        geom::span_dimension(&dirs, tol).unwrap_or(0)
    }
}

/// Candidate directions read off the set itself: normalized chords from x̂
/// to nearby sample points, optionally chords between sample pairs. Fixed
/// grids almost never land on the cone of a lower-dimensional set; harvested
/// chords do.
pub fn harvest_directions(
    model: &SetModel,
    base: &Vector,
    cfg: &ProbeConfig,
    max_dirs: usize,
    pair_chords: bool,
) -> Vec<Vector> {
    let grid = scale_grid(cfg, model.resolution_floor());
    let mut dirs: Vec<Vector> = Vec::new();
    let min_angle = 2e-3;
    let push = |d: Vector, dirs: &mut Vec<Vector>| {
        if dirs.len() >= max_dirs {
            return;
        }
        let n = d.norm();
        if n <= 0.0 {
            return;
        }
        let u = d / n;
        if dirs.iter().all(|e| geom::angle_between(e, &u) > min_angle) {
            dirs.push(u);
        }
    };
    for (k, &r) in grid.iter().enumerate().skip(grid.len() / 3).step_by(2) {
        let sample = model.sample_ball(base, r, cfg.budget.min(96), mix_seed(cfg.seed, ConeKind::PTanUpper, k, base) ^ 0x4a7);
        let pts = punctured(sample.points, base);
        for p in &pts {
            push(p - base, &mut dirs);
        }
        if pair_chords {
            for (i, p) in pts.iter().enumerate() {
                for q in pts.iter().skip(i + 1) {
                    let c = p - q;
                    if c.norm() > 1e-3 * r {
                        push(c.clone(), &mut dirs);
                        push(-c, &mut dirs);
                    }
                }
            }
            // micro chords: thin sets realize chord directions only between
            // points far closer together than the sample spacing
            for (i, p) in pts.iter().take(8).enumerate() {
                for (j, gexp) in (-9..=-1).enumerate() {
                    let gamma = r * 10f64.powi(gexp);
                    let s2 = model.sample_ball(p, gamma, 6, mix_seed(cfg.seed, ConeKind::PTanLower, k * 100 + i * 10 + j, base));
                    for q in &s2.points {
                        let c = p - q;
                        if c.norm() > 0.0 {
                            push(c.clone(), &mut dirs);
                            push(-c, &mut dirs);
                        }
                    }
                }
            }
        }
        if dirs.len() >= max_dirs {
            break;
        }
    }
    dirs
}
