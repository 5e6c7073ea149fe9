//! Concrete set oracles. Each one answers distance queries with an honest
//! error bound and samples its set inside a ball. The closed-form shapes are
//! exact; the search-based ones declare their accuracy through `err_bound`
//! and `resolution_floor`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    CurveMap, Distance, IndexBound, Predicate, Sample, ScalarField, SequenceRule, SetModel,
    SetShape,
};
use super::kdtree::KdTree;
use crate::geom::Vector;

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cap_points(mut pts: Vec<Vector>, budget: usize, seed: u64) -> Vec<Vector> {
    if pts.len() <= budget {
        return pts;
    }
    let mut rng = rng_for(seed ^ 0x9e3779b97f4a7c15);
    for i in 0..budget {
        let j = i + (rng.gen::<u64>() as usize) % (pts.len() - i);
        pts.swap(i, j);
    }
    pts.truncate(budget);
    pts
}

fn v2(x: f64, y: f64) -> Vector {
    Vector::from_vec(vec![x, y])
}

/// Golden-section minimization on a bracket.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let phi = 0.618_033_988_749_894_8;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Scans a grid, then golden-refines the brackets around the best samples.
pub(crate) fn scan_refine_min<F: Fn(f64) -> f64>(f: &F, grid: &[f64], top_k: usize, iters: usize) -> (f64, f64) {
    assert!(!grid.is_empty());
    let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let n = grid.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let mut best = (grid[idx[0]], vals[idx[0]]);
    for &i in idx.iter().take(top_k.min(n)) {
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(n - 1)];
        if hi > lo {
            let (t, v) = golden_min(f, lo, hi, iters);
            if v < best.1 {
                best = (t, v);
            }
        }
    }
    best
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    // a, b > 0
    let (la, lb) = (a.ln(), b.ln());
    linspace(la, lb, n).into_iter().map(f64::exp).collect()
}

// ---------------------------------------------------------------------------
// point clouds

pub struct PointCloudShape {
    tree: KdTree,
    dim: usize,
    floor: f64,
}

impl PointCloudShape {
    pub fn new(points: Vec<Vector>) -> Self {
        let dim = points[0].len();
        let tree = KdTree::new(points);
        // the oracle is exact at every scale, so the floor is only there to
        // keep quotients out of denormal territory
        PointCloudShape { tree, dim, floor: 1e-15 }
    }
}

impl SetShape for PointCloudShape {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn distance(&self, p: &Vector, _scale: f64) -> Distance {
        let (_, d) = self.tree.nearest(p);
        Distance::exact(d)
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let idxs = self.tree.within(center, radius);
        let pts: Vec<Vector> = idxs.into_iter().map(|i| self.tree.points()[i].clone()).collect();
        Sample::certified(cap_points(pts, budget, seed))
    }

    fn resolution_floor(&self) -> f64 {
        self.floor
    }

    fn descriptor(&self) -> String {
        format!("point cloud ({} points, dim {})", self.tree.len(), self.dim)
    }
}

// ---------------------------------------------------------------------------
// axis-aligned boxes (bounds may be infinite; degenerate sides allowed)

pub struct BoxShape {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxShape {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
        BoxShape { lo, hi }
    }

    fn clamp(&self, p: &Vector) -> Vector {
        Vector::from_iterator(p.len(), p.iter().enumerate().map(|(i, &x)| x.clamp(self.lo[i], self.hi[i])))
    }
}

impl SetShape for BoxShape {
    fn ambient_dim(&self) -> usize {
        self.lo.len()
    }

    fn distance(&self, p: &Vector, _scale: f64) -> Distance {
        Distance::exact((p - self.clamp(p)).norm())
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let proj = self.clamp(center);
        if (center - &proj).norm() > radius {
            return Sample::certified(vec![]);
        }
        let n = self.lo.len();
        let mut wlo = vec![0.0; n];
        let mut whi = vec![0.0; n];
        for i in 0..n {
            wlo[i] = self.lo[i].max(center[i] - radius);
            whi[i] = self.hi[i].min(center[i] + radius);
        }
        let mut rng = rng_for(seed ^ 0x00b0);
        let mut pts = vec![proj];
        let mut attempts = 0usize;
        while pts.len() < budget && attempts < budget * 8 {
            attempts += 1;
            let q = Vector::from_iterator(n, (0..n).map(|i| {
                if whi[i] > wlo[i] { rng.gen_range(wlo[i]..=whi[i]) } else { wlo[i] }
            }));
            if (&q - center).norm() <= radius {
                pts.push(q);
            }
        }
        Sample::certified(pts)
    }

    fn resolution_floor(&self) -> f64 {
        1e-15
    }

    fn descriptor(&self) -> String {
        format!("box {:?}..{:?}", self.lo, self.hi)
    }
}

// ---------------------------------------------------------------------------
// planar angular sectors (origin included)

pub struct SectorShape {
    a0: f64,
    a1: f64,
}

impl SectorShape {
    /// Sector of directions with polar angle in [a0, a1]; width at most pi.
    pub fn new(a0: f64, a1: f64) -> Self {
        assert!(a1 > a0 && a1 - a0 <= std::f64::consts::PI + 1e-12);
        SectorShape { a0, a1 }
    }

    fn project(&self, p: &Vector) -> Vector {
        let (x, y) = (p[0], p[1]);
        if x == 0.0 && y == 0.0 {
            return p.clone();
        }
        let mut ang = y.atan2(x);
        // shift into the window centered on the sector
        let mid = 0.5 * (self.a0 + self.a1);
        while ang < mid - std::f64::consts::PI {
            ang += 2.0 * std::f64::consts::PI;
        }
        while ang > mid + std::f64::consts::PI {
            ang -= 2.0 * std::f64::consts::PI;
        }
        if ang >= self.a0 && ang <= self.a1 {
            return p.clone();
        }
        let mut best = v2(0.0, 0.0);
        let mut best_d = p.norm();
        for a in [self.a0, self.a1] {
            let u = v2(a.cos(), a.sin());
            let t = (p.dot(&u)).max(0.0);
            let q = u * t;
            let d = (p - &q).norm();
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }
}

impl SetShape for SectorShape {
    fn ambient_dim(&self) -> usize {
        2
    }

    fn distance(&self, p: &Vector, _scale: f64) -> Distance {
        Distance::exact((p - self.project(p)).norm())
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let proj = self.project(center);
        if (center - &proj).norm() > radius {
            return Sample::certified(vec![]);
        }
        let mut rng = rng_for(seed ^ 0x5ec7);
        let nr = center.norm();
        let rlo = (nr - radius).max(0.0);
        let rhi = nr + radius;
        let mut pts = vec![proj];
        let mut attempts = 0usize;
        while pts.len() < budget && attempts < budget * 12 {
            attempts += 1;
            let a = rng.gen_range(self.a0..=self.a1);
            let rho = rng.gen_range(rlo..=rhi);
            let q = v2(rho * a.cos(), rho * a.sin());
            if (&q - center).norm() <= radius {
                pts.push(q);
            }
        }
        Sample::certified(pts)
    }

    fn resolution_floor(&self) -> f64 {
        1e-15
    }

    fn descriptor(&self) -> String {
        format!("sector [{:.4}, {:.4}] rad", self.a0, self.a1)
    }
}

// ---------------------------------------------------------------------------
// spheres and balls

pub struct SphereShape {
    center: Vector,
    radius: f64,
}

impl SphereShape {
    pub fn new(center: Vector, radius: f64) -> Self {
        assert!(radius > 0.0);
        SphereShape { center, radius }
    }
}

impl SetShape for SphereShape {
    fn ambient_dim(&self) -> usize {
        self.center.len()
    }

    fn distance(&self, p: &Vector, _scale: f64) -> Distance {
        Distance::exact(((p - &self.center).norm() - self.radius).abs())
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let b = center - &self.center;
        let d = b.norm();
        if (d - self.radius).abs() > radius {
            return Sample::certified(vec![]);
        }
        let mut rng = rng_for(seed ^ 0x59e3);
        let mut pts = Vec::with_capacity(budget);
        if d > 0.0 {
            pts.push(&self.center + &b * (self.radius / d));
        }
        if self.center.len() == 2 {
            let phi0 = if d > 0.0 { b[1].atan2(b[0]) } else { 0.0 };
            let w = if d > 0.0 {
                // half-angle of the arc cut out by the query ball; the
                // half-angle form stays accurate when radius << d
                let s2 = (radius * radius - (d - self.radius) * (d - self.radius)) / (4.0 * self.radius * d);
                2.0 * s2.clamp(0.0, 1.0).sqrt().asin()
            } else {
                std::f64::consts::PI
            };
            let mut attempts = 0usize;
            while pts.len() < budget && attempts < budget * 8 {
                attempts += 1;
                let a = phi0 + rng.gen_range(-w..=w);
                let q = &self.center + v2(a.cos(), a.sin()) * self.radius;
                if (&q - center).norm() <= radius {
                    pts.push(q);
                }
            }
        } else {
            let n = self.center.len();
            let sigma = (radius / self.radius).min(1.0);
            let base = if d > 0.0 { &b / d } else { Vector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }) };
            let mut attempts = 0usize;
            while pts.len() < budget && attempts < budget * 16 {
                attempts += 1;
                let noise = Vector::from_iterator(n, (0..n).map(|_| {
                    let (u1, u2): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
                    (-2.0 * u1.ln()).sqrt() * u2.cos()
                }));
                let dir = &base + noise * sigma;
                let nn = dir.norm();
                if nn == 0.0 {
                    continue;
                }
                let q = &self.center + dir * (self.radius / nn);
                if (&q - center).norm() <= radius {
                    pts.push(q);
                }
            }
        }
        Sample::certified(pts)
    }

    fn resolution_floor(&self) -> f64 {
        1e-15
    }

    fn descriptor(&self) -> String {
        format!("sphere r={} (dim {})", self.radius, self.center.len())
    }
}

pub struct BallShape {
    center: Vector,
    radius: f64,
}

impl BallShape {
    pub fn new(center: Vector, radius: f64) -> Self {
        assert!(radius > 0.0);
        BallShape { center, radius }
    }

    fn project(&self, p: &Vector) -> Vector {
        let b = p - &self.center;
        let d = b.norm();
        if d <= self.radius {
            p.clone()
        } else {
            &self.center + b * (self.radius / d)
        }
    }
}

impl SetShape for BallShape {
    fn ambient_dim(&self) -> usize {
        self.center.len()
    }

    fn distance(&self, p: &Vector, _scale: f64) -> Distance {
        Distance::exact(((p - &self.center).norm() - self.radius).max(0.0))
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let proj = self.project(center);
        if (center - &proj).norm() > radius {
            return Sample::certified(vec![]);
        }
        let n = self.center.len();
        let mut rng = rng_for(seed ^ 0xba11);
        let mut pts = vec![proj];
        let mut attempts = 0usize;
        while pts.len() < budget && attempts < budget * 12 {
            attempts += 1;
            let q = Vector::from_iterator(n, (0..n).map(|i| center[i] + rng.gen_range(-radius..=radius)));
            if (&q - center).norm() <= radius && (&q - &self.center).norm() <= self.radius {
                pts.push(q);
            }
        }
        Sample::certified(pts)
    }

    fn resolution_floor(&self) -> f64 {
        1e-15
    }

    fn descriptor(&self) -> String {
        format!("ball r={} (dim {})", self.radius, self.center.len())
    }
}

// ---------------------------------------------------------------------------
// sequences accumulating at the origin

pub struct SequenceShape {
    dim: usize,
    rule: SequenceRule,
    index_bound: IndexBound,
    descriptor: String,
}

const SEQ_CAP: u64 = 200_000;

impl SequenceShape {
    pub fn new(dim: usize, rule: SequenceRule, index_bound: IndexBound, descriptor: String) -> Self {
        SequenceShape { dim, rule, index_bound, descriptor }
    }
}

impl SetShape for SequenceShape {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn distance(&self, p: &Vector, scale: f64) -> Distance {
        // enumerate members of norm >= floor_s; the remainder clusters at 0
        let mut floor_s = (1e-6 * (p.norm() + scale)).max(1e-18);
        let raw = (self.index_bound)(floor_s).max(1);
        let nmax = raw.min(SEQ_CAP);
        if nmax < raw {
            floor_s = (self.rule)(nmax).norm();
        }
        let mut best = f64::INFINITY;
        for n in 1..=nmax {
            best = best.min((p - (self.rule)(n)).norm());
        }
        let cluster = p.norm();
        if cluster < best {
            Distance { value: cluster, err_bound: floor_s }
        } else {
            Distance::exact(best)
        }
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let lo_norm = ((center.norm() - radius).max(0.0)).max(1e-18);
        let raw = (self.index_bound)(lo_norm).max(1);
        let nmax = raw.min(SEQ_CAP);
        let mut pts = Vec::new();
        for n in 1..=nmax {
            let m = (self.rule)(n);
            if (&m - center).norm() <= radius {
                pts.push(m);
            }
        }
        let capped = nmax < raw;
        let exhausted = capped && pts.is_empty();
        let pts = cap_points(pts, budget, seed);
        Sample { points: pts, exhausted }
    }

    fn resolution_floor(&self) -> f64 {
        1e-15
    }

    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }
}

// ---------------------------------------------------------------------------
// generic parametric curves (coarse cache + local refinement)

pub struct CurveShape {
    dim: usize,
    map: CurveMap,
    params: Vec<f64>,
    points: Vec<Vector>,
    seg_max: f64,
    descriptor: String,
}

impl CurveShape {
    pub fn new(dim: usize, t_range: (f64, f64), map: CurveMap, samples: usize, descriptor: String) -> Self {
        let params = linspace(t_range.0, t_range.1, samples);
        let points: Vec<Vector> = params.iter().map(|&t| (map)(t)).collect();
        let seg_max = points
            .windows(2)
            .map(|w| (&w[1] - &w[0]).norm())
            .fold(0.0f64, f64::max);
        CurveShape { dim, map, params, points, seg_max, descriptor }
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.len() == self.dim && p.iter().all(|x| x.is_finite()))
    }

    fn nearest(&self, p: &Vector) -> (Vector, f64) {
        let f = |t: f64| ((self.map)(t) - p).norm();
        let vals: Vec<f64> = self.points.iter().map(|q| (q - p).norm()).collect();
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        let mut best_t = self.params[idx[0]];
        let mut best_v = vals[idx[0]];
        for &i in idx.iter().take(3) {
            let lo = self.params[i.saturating_sub(1)];
            let hi = self.params[(i + 1).min(self.params.len() - 1)];
            let (t, v) = golden_min(&f, lo, hi, 60);
            if v < best_v {
                best_t = t;
                best_v = v;
            }
        }
        ((self.map)(best_t), best_v)
    }
}

impl SetShape for CurveShape {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn distance(&self, p: &Vector, _scale: f64) -> Distance {
        let (_, d) = self.nearest(p);
        Distance { value: d, err_bound: 1e-9 * (1.0 + d) }
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let mut pts: Vec<Vector> = self
            .points
            .iter()
            .filter(|q| (*q - center).norm() <= radius)
            .cloned()
            .collect();
        let (near, d) = self.nearest(center);
        if d <= radius {
            pts.push(near);
        }
        let exhausted = pts.is_empty() && d <= radius + self.seg_max;
        let pts = cap_points(pts, budget, seed);
        Sample { points: pts, exhausted }
    }

    fn resolution_floor(&self) -> f64 {
        (4.0 * self.seg_max).max(1e-15)
    }

    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }
}

// ---------------------------------------------------------------------------
// graphs of functions over a domain model

pub struct GraphShape {
    domain: SetModel,
    f: ScalarField,
    descriptor: String,
}

impl GraphShape {
    pub fn new(domain: SetModel, f: ScalarField, descriptor: String) -> Self {
        GraphShape { domain, f, descriptor }
    }

    fn lift(&self, x: &Vector) -> Vector {
        let z = (self.f)(x);
        let mut out = Vec::with_capacity(x.len() + 1);
        out.extend(x.iter().copied());
        out.push(z);
        Vector::from_vec(out)
    }

    fn seed_from(&self, p: &Vector) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for x in p.iter() {
            x.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Multi-scale search for the nearest graph point. The result never
    /// underestimates the true distance.
    ///
    /// Candidates come from a geometric ladder of sampling radii around the
    /// horizontal projection of the query — steep graphs put the minimizer
    /// at a horizontal scale many orders below the query distance, and a
    /// single-radius search cannot localize it — followed by a shrinking
    /// local refinement around the best candidate.
    fn nearest(&self, p: &Vector, scale: f64) -> (Vector, f64) {
        let n = p.len() - 1;
        let xp = Vector::from_iterator(n, p.iter().take(n).copied());
        let seed = self.seed_from(p);
        let ddom = self.domain.distance(&xp, scale.max(1e-12));
        let mut r_top = (ddom.value + scale.abs()).max(1e-12);
        let mut starts = Vec::new();
        for j in 0..12 {
            let s = self.domain.sample_ball(&xp, r_top, 16, seed.wrapping_add(j));
            if !s.points.is_empty() {
                starts = s.points;
                break;
            }
            r_top *= 4.0;
        }
        if starts.is_empty() {
            return (p.clone(), f64::INFINITY);
        }
        // the horizontal projection of p onto the domain is usually a
        // near-optimal start when f is continuous
        if ddom.value <= ddom.err_bound * 2.0 + 1e-14 {
            starts.push(xp.clone());
        }
        let mut best_x = starts[0].clone();
        let mut best_d = f64::INFINITY;
        let consider = |x: &Vector, best_x: &mut Vector, best_d: &mut f64| {
            let d = (self.lift(x) - p).norm();
            if d < *best_d {
                *best_d = d;
                *best_x = x.clone();
            }
        };
        for x in &starts {
            consider(x, &mut best_x, &mut best_d);
        }
        let mut r = r_top;
        let mut level = 0u64;
        while r > 1e-15 && level < 60 {
            level += 1;
            let s = self.domain.sample_ball(&xp, r, 6, seed.wrapping_mul(131).wrapping_add(level));
            for x in &s.points {
                consider(x, &mut best_x, &mut best_d);
            }
            r *= 0.5;
        }
        // lateral refinement around the leader; the true horizontal offset
        // from xp is at most best_d, so each pass re-anchors the radius to
        // the improved distance
        let mut k = 0u64;
        for _pass in 0..3 {
            let mut r = best_d.min(r_top).max(1e-15);
            let floor = (best_d.min(scale.abs()) * 1e-8).max(1e-15);
            let mut steps = 0;
            while r > floor && steps < 32 {
                k += 1;
                steps += 1;
                let s = self.domain.sample_ball(&best_x, r, 8, seed.wrapping_mul(31).wrapping_add(k));
                let before = best_d;
                for x in &s.points {
                    consider(x, &mut best_x, &mut best_d);
                }
                if best_d >= before {
                    r *= 0.5;
                } else {
                    r = r.min(best_d * 2.0).max(1e-15);
                }
            }
        }
        (self.lift(&best_x), best_d)
    }
}

impl SetShape for GraphShape {
    fn ambient_dim(&self) -> usize {
        self.domain.ambient_dim() + 1
    }

    fn distance(&self, p: &Vector, scale: f64) -> Distance {
        let (_, d) = self.nearest(p, scale);
        Distance { value: d, err_bound: 1e-5 * scale + 1e-14 }
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let n = center.len() - 1;
        let xp = Vector::from_iterator(n, center.iter().take(n).copied());
        let dom = self.domain.sample_ball(&xp, radius, budget * 4, seed);
        let mut pts: Vec<Vector> = dom
            .points
            .iter()
            .map(|x| self.lift(x))
            .filter(|g| (g - center).norm() <= radius)
            .collect();
        let (near, d) = self.nearest(center, radius);
        if d <= radius {
            pts.push(near);
        }
        let exhausted = pts.is_empty() && !dom.points.is_empty() || dom.exhausted;
        let pts = cap_points(pts, budget, seed);
        Sample { points: pts, exhausted }
    }

    fn resolution_floor(&self) -> f64 {
        // the nearest-point search is stochastic; below this scale its
        // failure to find steep-graph minimizers would masquerade as
        // certified distances
        self.domain.resolution_floor().max(1e-5)
    }

    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }
}

// ---------------------------------------------------------------------------
// predicate sublevel sets (sampling-based, coarse by construction)

pub struct SublevelShape {
    dim: usize,
    predicate: Predicate,
    lo: Vector,
    hi: Vector,
    budget: usize,
    descriptor: String,
}

impl SublevelShape {
    pub fn new(dim: usize, predicate: Predicate, lo: Vector, hi: Vector, budget: usize, descriptor: String) -> Self {
        SublevelShape { dim, predicate, lo, hi, budget: budget.max(64), descriptor }
    }

    fn diag(&self) -> f64 {
        (&self.hi - &self.lo).norm()
    }

    fn draw(&self, center: &Vector, radius: f64, attempts: usize, rng: &mut ChaCha8Rng) -> Vec<Vector> {
        let mut hits = Vec::new();
        for _ in 0..attempts {
            let q = Vector::from_iterator(self.dim, (0..self.dim).map(|i| {
                let a = self.lo[i].max(center[i] - radius);
                let b = self.hi[i].min(center[i] + radius);
                if b > a { rng.gen_range(a..=b) } else { a }
            }));
            if (&q - center).norm() <= radius && (self.predicate)(&q) {
                hits.push(q);
            }
        }
        hits
    }
}

impl SetShape for SublevelShape {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn distance(&self, p: &Vector, scale: f64) -> Distance {
        if (self.predicate)(p) {
            return Distance::exact(0.0);
        }
        let diag = self.diag();
        let mut rng = rng_for(0x5b1e ^ p.iter().map(|x| x.to_bits()).fold(0u64, |a, b| a.rotate_left(7) ^ b));
        let mut r = (scale * 2.0).max(diag * 1e-4);
        while r <= diag * 2.0 {
            let hits = self.draw(p, r, self.budget, &mut rng);
            if !hits.is_empty() {
                let d = hits.iter().map(|q| (q - p).norm()).fold(f64::INFINITY, f64::min);
                let err = 2.0 * r / (hits.len() as f64).powf(1.0 / self.dim as f64);
                return Distance { value: d, err_bound: err };
            }
            r *= 2.0;
        }
        Distance { value: diag, err_bound: diag }
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let mut rng = rng_for(seed ^ 0x5b1e);
        let mut pts = self.draw(center, radius, budget * 8, &mut rng);
        if (self.predicate)(center) {
            pts.push(center.clone());
        }
        let exhausted = pts.is_empty();
        let pts = cap_points(pts, budget, seed);
        Sample { points: pts, exhausted }
    }

    fn resolution_floor(&self) -> f64 {
        self.diag() * 1e-5
    }

    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }
}

// ---------------------------------------------------------------------------
// unions and rigid images

pub struct UnionShape {
    parts: Vec<SetModel>,
}

impl UnionShape {
    pub fn new(parts: Vec<SetModel>) -> Self {
        assert!(!parts.is_empty());
        UnionShape { parts }
    }
}

impl SetShape for UnionShape {
    fn ambient_dim(&self) -> usize {
        self.parts[0].ambient_dim()
    }

    fn distance(&self, p: &Vector, scale: f64) -> Distance {
        let answers: Vec<Distance> = self.parts.iter().map(|m| m.distance(p, scale)).collect();
        let win = answers
            .iter()
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .copied()
            .unwrap();
        // any part that could undercut the winner contributes to the bound
        let err = answers
            .iter()
            .filter(|d| d.value - d.err_bound <= win.value + win.err_bound)
            .map(|d| d.err_bound)
            .fold(0.0f64, f64::max);
        Distance { value: win.value, err_bound: err }
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let per = (budget / self.parts.len()).max(1);
        let mut pts = Vec::new();
        let mut exhausted = false;
        for (i, m) in self.parts.iter().enumerate() {
            let s = m.sample_ball(center, radius, per, seed.wrapping_add(i as u64 * 0x9e37));
            exhausted |= s.exhausted;
            pts.extend(s.points);
        }
        Sample { points: pts, exhausted }
    }

    fn resolution_floor(&self) -> f64 {
        self.parts.iter().map(|m| m.resolution_floor()).fold(0.0, f64::max)
    }

    fn descriptor(&self) -> String {
        let names: Vec<String> = self.parts.iter().map(|m| m.descriptor()).collect();
        format!("union[{}]", names.join(" | "))
    }
}

pub struct AffineShape {
    inner: SetModel,
    rot: DMatrix<f64>,
    rot_t: DMatrix<f64>,
    trans: Vector,
}

impl AffineShape {
    pub fn new(inner: SetModel, rot: DMatrix<f64>, trans: Vector) -> Self {
        let rot_t = rot.transpose();
        AffineShape { inner, rot, rot_t, trans }
    }

    fn pull(&self, p: &Vector) -> Vector {
        &self.rot_t * (p - &self.trans)
    }

    fn push(&self, q: &Vector) -> Vector {
        &self.rot * q + &self.trans
    }
}

impl SetShape for AffineShape {
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn distance(&self, p: &Vector, scale: f64) -> Distance {
        self.inner.distance(&self.pull(p), scale)
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let s = self.inner.sample_ball(&self.pull(center), radius, budget, seed);
        Sample {
            points: s.points.iter().map(|q| self.push(q)).collect(),
            exhausted: s.exhausted,
        }
    }

    fn resolution_floor(&self) -> f64 {
        self.inner.resolution_floor()
    }

    fn descriptor(&self) -> String {
        format!("rigid image of {}", self.inner.descriptor())
    }
}

// ---------------------------------------------------------------------------
// a ray plus a sequence meeting at the origin from opposite sides

pub struct KinkedShape;

impl KinkedShape {
    // ray {(x, -x): x <= 0}
    fn ray_point(p: &Vector) -> Vector {
        let x = ((p[0] - p[1]) / 2.0).min(0.0);
        v2(x, -x)
    }
}

impl SetShape for KinkedShape {
    fn ambient_dim(&self) -> usize {
        2
    }

    fn distance(&self, p: &Vector, _scale: f64) -> Distance {
        let dray = (p - Self::ray_point(p)).norm();
        // sequence {(1/n, 1/n)}: unconstrained optimum at the mean coordinate
        let m = (p[0] + p[1]) / 2.0;
        let mut dseq = f64::INFINITY;
        let mut cand = vec![1u64, 2];
        if m > 1e-17 {
            let n0 = (1.0 / m).round() as i64;
            for k in -2..=2 {
                let n = n0 + k;
                if n >= 1 {
                    cand.push(n as u64);
                }
            }
        }
        for n in cand {
            let t = 1.0 / n as f64;
            dseq = dseq.min((p - v2(t, t)).norm());
        }
        let cluster = p.norm();
        let d = dray.min(dseq);
        if cluster + 3e-17 < d {
            Distance { value: cluster, err_bound: 3e-17 }
        } else {
            Distance::exact(d)
        }
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let mut pts = Vec::new();
        let mut rng = rng_for(seed ^ 0x0b0b);
        // ray window: ||(x,-x) - c|| <= r is a quadratic in x
        let (c1, c2) = (center[0], center[1]);
        let a = 2.0;
        let b = -2.0 * (c1 - c2);
        let c = c1 * c1 + c2 * c2 - radius * radius;
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let x_lo = (-b - s) / (2.0 * a);
            let x_hi = ((-b + s) / (2.0 * a)).min(0.0);
            if x_hi >= x_lo {
                for _ in 0..budget / 2 {
                    let x = rng.gen_range(x_lo..=x_hi);
                    pts.push(v2(x, -x));
                }
                pts.push(v2(x_hi, -x_hi));
            }
        }
        // sequence window: ||(u,u) - c|| <= r, u = 1/n
        let bs = -2.0 * (c1 + c2);
        let disc2 = bs * bs - 4.0 * a * c;
        if disc2 >= 0.0 {
            let s = disc2.sqrt();
            let u_lo = ((-bs - s) / (2.0 * a)).max(0.0);
            let u_hi = (-bs + s) / (2.0 * a);
            if u_hi > 0.0 {
                let n_lo = if u_hi >= 1.0 { 1u64 } else { (1.0 / u_hi).ceil() as u64 };
                let n_hi = if u_lo <= 1e-18 { 1_000_000_000_000_000_000u64 } else { (1.0 / u_lo).floor() as u64 };
                if n_hi >= n_lo {
                    let span = n_hi - n_lo;
                    let take = (budget / 2).max(4) as u64;
                    if span <= take {
                        for n in n_lo..=n_hi {
                            let t = 1.0 / n as f64;
                            pts.push(v2(t, t));
                        }
                    } else {
                        // geometric spread over the index range
                        let lf = (n_lo as f64).ln();
                        let hf = (n_hi as f64).ln();
                        for i in 0..take {
                            let l = lf + (hf - lf) * i as f64 / (take - 1).max(1) as f64;
                            let n = l.exp().round().max(1.0) as u64;
                            let t = 1.0 / n as f64;
                            let q = v2(t, t);
                            if (&q - center).norm() <= radius {
                                pts.push(q);
                            }
                        }
                    }
                }
            }
        }
        pts.retain(|q| (q - center).norm() <= radius);
        Sample::certified(cap_points(pts, budget, seed))
    }

    fn resolution_floor(&self) -> f64 {
        1e-15
    }

    fn descriptor(&self) -> String {
        "ray y=-x (x<=0) plus sequence {(1/n,1/n)}".into()
    }
}

// ---------------------------------------------------------------------------
// the oscillating curve t -> (t, t sin(1/t)) with its origin point

pub struct OscCurveShape;

impl OscCurveShape {
    fn curve(t: f64) -> Vector {
        v2(t, t * (1.0 / t).sin())
    }
}

impl SetShape for OscCurveShape {
    fn ambient_dim(&self) -> usize {
        2
    }

    fn distance(&self, p: &Vector, _scale: f64) -> Distance {
        // the curve fills the double cone |y| <= |x| ever more densely near 0;
        // distance to that envelope is correct up to O(|p|^2)
        let (a, b) = (p[0], p[1]);
        let d_env = if b.abs() <= a.abs() { 0.0 } else { (b.abs() - a.abs()) / std::f64::consts::SQRT_2 };
        let norm = p.norm();
        if norm < d_env {
            Distance { value: norm, err_bound: 8.0 * norm * norm }
        } else {
            Distance { value: d_env, err_bound: 8.0 * norm * norm }
        }
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let mut rng = rng_for(seed ^ 0x7517);
        let mut pts = Vec::new();
        if center.norm() <= radius {
            pts.push(v2(0.0, 0.0));
            // parameters small enough that the whole point fits in the ball
            let t_hi = radius / 4.0;
            if t_hi > 1e-300 {
                for _ in 0..budget {
                    let l = rng.gen_range((t_hi * 1e-3).ln()..=t_hi.ln());
                    let t = l.exp() * if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    let q = Self::curve(t);
                    if (&q - center).norm() <= radius {
                        pts.push(q);
                    }
                }
            }
        }
        // parameters near the first coordinate of the center
        for _ in 0..budget {
            let t = center[0] + rng.gen_range(-radius..=radius);
            if t != 0.0 {
                let q = Self::curve(t);
                if (&q - center).norm() <= radius {
                    pts.push(q);
                }
            }
        }
        let exhausted = pts.is_empty();
        let pts = cap_points(pts, budget, seed);
        Sample { points: pts, exhausted }
    }

    fn resolution_floor(&self) -> f64 {
        1e-13
    }

    fn descriptor(&self) -> String {
        "curve (t, t sin(1/t)) with origin".into()
    }
}

// ---------------------------------------------------------------------------
// graph of sqrt(|x|)

pub struct SqrtAbsShape;

impl SqrtAbsShape {
    fn branch_min(p: &Vector, sign: f64) -> (f64, f64) {
        // branch (sign*s^2, s), s >= 0
        let g = |s: f64| {
            let dx = sign * s * s - p[0];
            let dy = s - p[1];
            (dx * dx + dy * dy).sqrt()
        };
        let s_hi = 2.0 * (p[0].abs().sqrt() + p[1].abs() + 1e-18);
        let mut grid = vec![0.0];
        grid.extend(logspace((s_hi * 1e-18).max(1e-300), s_hi, 160));
        scan_refine_min(&g, &grid, 4, 90)
    }
}

impl SetShape for SqrtAbsShape {
    fn ambient_dim(&self) -> usize {
        2
    }

    fn distance(&self, p: &Vector, _scale: f64) -> Distance {
        let (_, d1) = Self::branch_min(p, 1.0);
        let (_, d2) = Self::branch_min(p, -1.0);
        let d = d1.min(d2);
        Distance { value: d, err_bound: 1e-12 + 1e-10 * p.norm() }
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let mut rng = rng_for(seed ^ 0x5a5a);
        let mut pts = Vec::new();
        for sign in [1.0, -1.0] {
            let (s_star, d) = Self::branch_min(center, sign);
            if d <= radius {
                pts.push(v2(sign * s_star * s_star, s_star));
            }
            // curve speed is at least 1 in s, so the window below covers the ball
            let w = 2.0 * radius;
            for _ in 0..budget {
                let s = (s_star + rng.gen_range(-w..=w)).max(0.0);
                let q = v2(sign * s * s, s);
                if (&q - center).norm() <= radius {
                    pts.push(q);
                }
            }
        }
        let exhausted = pts.is_empty();
        let pts = cap_points(pts, budget, seed);
        Sample { points: pts, exhausted }
    }

    fn resolution_floor(&self) -> f64 {
        1e-8
    }

    fn descriptor(&self) -> String {
        "graph of sqrt(|x|)".into()
    }
}

// ---------------------------------------------------------------------------
// logarithmic spiral r = exp(theta/10), theta in [-250, 0], plus its pole

pub struct SpiralShape;

const SPIRAL_THETA_MIN: f64 = -250.0;

impl SpiralShape {
    fn curve(theta: f64) -> Vector {
        let r = (theta / 10.0).exp();
        v2(r * theta.cos(), r * theta.sin())
    }

    fn nearest(p: &Vector) -> (f64, f64) {
        let g = |th: f64| (Self::curve(th) - p).norm();
        let rho = p.norm().max(1e-300);
        let thc = 10.0 * rho.ln();
        let lo = (thc - 40.0).max(SPIRAL_THETA_MIN);
        let hi = (thc + 40.0).min(0.0);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (SPIRAL_THETA_MIN.max(hi - 20.0), 0.0f64.min(lo + 20.0)) };
        let n = (((hi - lo) * 10.0).ceil() as usize).clamp(16, 1200);
        let grid = linspace(lo, hi, n);
        scan_refine_min(&g, &grid, 6, 80)
    }
}

impl SetShape for SpiralShape {
    fn ambient_dim(&self) -> usize {
        2
    }

    fn distance(&self, p: &Vector, _scale: f64) -> Distance {
        let (_, d_curve) = Self::nearest(p);
        let d = d_curve.min(p.norm());
        Distance { value: d, err_bound: 1e-9 * (p.norm() + d) }
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let mut rng = rng_for(seed ^ 0x5912);
        let mut pts = Vec::new();
        if center.norm() <= radius {
            pts.push(v2(0.0, 0.0));
        }
        let r_hi = center.norm() + radius;
        let r_lo = (center.norm() - radius).max(1e-300);
        let th_hi = ((10.0 * r_hi.ln()) + 0.5).min(0.0);
        let th_lo = ((10.0 * r_lo.ln()) - 0.5).max(SPIRAL_THETA_MIN);
        if th_hi > th_lo {
            for _ in 0..budget * 2 {
                let th = rng.gen_range(th_lo..=th_hi);
                let q = Self::curve(th);
                if (&q - center).norm() <= radius {
                    pts.push(q);
                }
            }
        }
        let (th_star, d) = Self::nearest(center);
        if d <= radius {
            pts.push(Self::curve(th_star));
        }
        let exhausted = pts.is_empty();
        let pts = cap_points(pts, budget, seed);
        Sample { points: pts, exhausted }
    }

    fn resolution_floor(&self) -> f64 {
        2e-10
    }

    fn descriptor(&self) -> String {
        "logarithmic spiral r=exp(theta/10) with pole".into()
    }
}

// ---------------------------------------------------------------------------
// the horn {(x, y): x >= 0, |y| <= x^2}

pub struct HornShape;

impl HornShape {
    fn contains(p: &Vector) -> bool {
        p[0] >= 0.0 && p[1].abs() <= p[0] * p[0]
    }

    fn branch_min(p: &Vector, sign: f64) -> (f64, f64) {
        // boundary branch (s, sign*s^2), s >= 0
        let g = |s: f64| {
            let dx = s - p[0];
            let dy = sign * s * s - p[1];
            (dx * dx + dy * dy).sqrt()
        };
        let s_hi = 2.0 * (p[0].abs() + p[1].abs().sqrt() + 1e-18);
        let mut grid = vec![0.0];
        grid.extend(logspace((s_hi * 1e-18).max(1e-300), s_hi, 160));
        scan_refine_min(&g, &grid, 4, 90)
    }

    fn project(p: &Vector) -> Vector {
        if Self::contains(p) {
            return p.clone();
        }
        let (s1, d1) = Self::branch_min(p, 1.0);
        let (s2, d2) = Self::branch_min(p, -1.0);
        if d1 <= d2 {
            v2(s1, s1 * s1)
        } else {
            v2(s2, -s2 * s2)
        }
    }
}

impl SetShape for HornShape {
    fn ambient_dim(&self) -> usize {
        2
    }

    fn distance(&self, p: &Vector, _scale: f64) -> Distance {
        if Self::contains(p) {
            return Distance::exact(0.0);
        }
        let (_, d1) = Self::branch_min(p, 1.0);
        let (_, d2) = Self::branch_min(p, -1.0);
        Distance { value: d1.min(d2), err_bound: 1e-12 + 1e-10 * p.norm() }
    }

    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        let proj = Self::project(center);
        if (center - &proj).norm() > radius {
            return Sample::certified(vec![]);
        }
        let mut rng = rng_for(seed ^ 0x1108);
        let mut pts = vec![proj];
        let s_lo = (center[0] - radius).max(0.0);
        let s_hi = center[0] + radius;
        let mut attempts = 0usize;
        while pts.len() < budget && attempts < budget * 12 {
            attempts += 1;
            let s = rng.gen_range(s_lo..=s_hi);
            let cap = s * s;
            let y_lo = (-cap).max(center[1] - radius);
            let y_hi = cap.min(center[1] + radius);
            if y_hi < y_lo {
                continue;
            }
            let y = rng.gen_range(y_lo..=y_hi);
            let q = v2(s, y);
            if (&q - center).norm() <= radius {
                pts.push(q);
            }
        }
        Sample::certified(pts)
    }

    fn resolution_floor(&self) -> f64 {
        1e-13
    }

    fn descriptor(&self) -> String {
        "horn |y| <= x^2, x >= 0".into()
    }
}

// ---------------------------------------------------------------------------
// named constructors

pub fn full_space(dim: usize) -> SetModel {
    SetModel::new(BoxShape::new(vec![f64::NEG_INFINITY; dim], vec![f64::INFINITY; dim]))
}

pub fn box_nd(lo: Vec<f64>, hi: Vec<f64>) -> SetModel {
    SetModel::new(BoxShape::new(lo, hi))
}

pub fn interval(a: f64, b: f64) -> SetModel {
    box_nd(vec![a], vec![b])
}

/// Closed nonnegative quadrant of the plane.
pub fn quadrant() -> SetModel {
    box_nd(vec![0.0, 0.0], vec![f64::INFINITY, f64::INFINITY])
}

/// The x-axis inside the plane.
pub fn x_axis() -> SetModel {
    box_nd(vec![f64::NEG_INFINITY, 0.0], vec![f64::INFINITY, 0.0])
}

pub fn circle(radius: f64) -> SetModel {
    SetModel::new(SphereShape::new(v2(0.0, 0.0), radius))
}

pub fn disc(radius: f64) -> SetModel {
    SetModel::new(BallShape::new(v2(0.0, 0.0), radius))
}

pub fn sphere_at(center: Vector, radius: f64) -> SetModel {
    SetModel::new(SphereShape::new(center, radius))
}

pub fn ball_at(center: Vector, radius: f64) -> SetModel {
    SetModel::new(BallShape::new(center, radius))
}

/// {1/n! : n >= 1} on the line.
pub fn factorial_sequence() -> SetModel {
    let rule: SequenceRule = Arc::new(|n: u64| {
        let mut v = 1.0f64;
        for k in 1..=n {
            v /= k as f64;
        }
        Vector::from_vec(vec![v])
    });
    let index_bound: IndexBound = Arc::new(|s: f64| {
        let mut v = 1.0f64;
        let mut n = 1u64;
        while v >= s && n < 200 {
            n += 1;
            v /= n as f64;
        }
        n
    });
    SetModel::new(SequenceShape::new(1, rule, index_bound, "sequence {1/n!}".into()))
}

pub fn kinked_b() -> SetModel {
    SetModel::new(KinkedShape)
}

pub fn tsin_curve() -> SetModel {
    SetModel::new(OscCurveShape)
}

pub fn sqrt_abs_graph() -> SetModel {
    SetModel::new(SqrtAbsShape)
}

pub fn log_spiral() -> SetModel {
    SetModel::new(SpiralShape)
}

pub fn horn() -> SetModel {
    SetModel::new(HornShape)
}

/// {(x, y): y^3 (x - y)^3 >= 0}: the union of the sectors between y=0, y=x in
/// the first quadrant and their opposites in the third.
pub fn two_wedges() -> SetModel {
    let w1 = SetModel::new(SectorShape::new(0.0, std::f64::consts::FRAC_PI_4));
    let w2 = SetModel::new(SectorShape::new(std::f64::consts::PI, std::f64::consts::PI + std::f64::consts::FRAC_PI_4));
    SetModel::new(UnionShape::new(vec![w1, w2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vv(coords: &[f64]) -> Vector {
        Vector::from_vec(coords.to_vec())
    }

    #[test]
    fn box_distance_is_clamp() {
        let q = quadrant();
        assert_eq!(q.distance(&vv(&[1.0, 2.0]), 0.1).value, 0.0);
        assert_relative_eq!(q.distance(&vv(&[-3.0, 4.0]), 0.1).value, 3.0);
        assert_relative_eq!(q.distance(&vv(&[-3.0, -4.0]), 0.1).value, 5.0);
    }

    #[test]
    fn box_sampler_stays_in_ball_and_box() {
        let q = quadrant();
        let c = vv(&[0.0, 0.0]);
        let s = q.sample_ball(&c, 0.5, 64, 7);
        assert!(!s.points.is_empty());
        for p in &s.points {
            assert!(p[0] >= 0.0 && p[1] >= 0.0);
            assert!(p.norm() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn circle_distance_and_sampler() {
        let cm = circle(1.0);
        assert_relative_eq!(cm.distance(&vv(&[2.0, 0.0]), 0.1).value, 1.0);
        assert_relative_eq!(cm.distance(&vv(&[0.0, 0.0]), 0.1).value, 1.0);
        let s = cm.sample_ball(&vv(&[1.0, 0.0]), 0.3, 32, 3);
        assert!(!s.points.is_empty());
        for p in &s.points {
            assert_relative_eq!(p.norm(), 1.0, epsilon = 1e-12);
            assert!((p - vv(&[1.0, 0.0])).norm() <= 0.3 + 1e-12);
        }
    }

    #[test]
    fn factorial_distance_matches_enumeration() {
        let f = factorial_sequence();
        // members 1, 1/2, 1/6, 1/24, ...
        assert_relative_eq!(f.distance(&vv(&[1.0]), 0.1).value, 0.0);
        assert_relative_eq!(f.distance(&vv(&[0.4]), 0.1).value, 0.1, epsilon = 1e-12);
        assert_relative_eq!(f.distance(&vv(&[1.5]), 0.1).value, 0.5);
        // deep in the tail the cluster bound takes over gracefully
        let d = f.distance(&vv(&[1e-30]), 1e-12);
        assert!(d.value <= 1e-18 + d.err_bound);
    }

    #[test]
    fn factorial_sampler_finds_members_near_zero() {
        let f = factorial_sequence();
        let s = f.sample_ball(&vv(&[0.0]), 1e-6, 64, 1);
        assert!(!s.points.is_empty());
        assert!(!s.exhausted);
        for p in &s.points {
            assert!(p[0] > 0.0 && p[0] <= 1e-6);
        }
    }

    #[test]
    fn kinked_distances() {
        let k = kinked_b();
        assert_relative_eq!(k.distance(&vv(&[-1.0, 1.0]), 0.1).value, 0.0, epsilon = 1e-15);
        assert_relative_eq!(k.distance(&vv(&[0.5, 0.5]), 0.1).value, 0.0, epsilon = 1e-15);
        // (0.4, 0.4): nearest members 1/2 and 1/3 of the diagonal sequence
        let d = k.distance(&vv(&[0.4, 0.4]), 0.1).value;
        assert_relative_eq!(d, (2.0f64).sqrt() * (0.4 - 1.0 / 3.0), epsilon = 1e-12);
        // above the diagonal between ray and sequence
        let d2 = k.distance(&vv(&[0.0, 0.1]), 0.1).value;
        assert!(d2 > 0.0 && d2 < 0.1 + 1e-12);
    }

    #[test]
    fn kinked_sampler_covers_both_pieces() {
        let k = kinked_b();
        let s = k.sample_ball(&vv(&[0.0, 0.0]), 0.2, 128, 5);
        assert!(s.points.iter().any(|p| p[0] < 0.0));
        assert!(s.points.iter().any(|p| p[0] > 0.0 && (p[0] - p[1]).abs() < 1e-15));
    }

    #[test]
    fn osc_curve_envelope_distance() {
        let t = tsin_curve();
        assert_eq!(t.distance(&vv(&[0.1, 0.05]), 0.1).value, 0.0);
        let d = t.distance(&vv(&[0.0, 0.1]), 0.1);
        assert_relative_eq!(d.value, 0.1 / (2.0f64).sqrt(), epsilon = 1e-12);
        assert!(d.err_bound <= 8.0 * 0.01 + 1e-15);
        // deep scales stay valid at the origin: err/t shrinks linearly
        let tiny = 1e-9;
        let d2 = t.distance(&vv(&[0.0, tiny]), tiny);
        assert!(d2.err_bound / tiny < 1e-7);
    }

    #[test]
    fn sqrt_abs_distance_spots() {
        let g = sqrt_abs_graph();
        assert!(g.distance(&vv(&[1.0, 1.0]), 0.1).value < 1e-10);
        assert!(g.distance(&vv(&[0.25, 0.5]), 0.1).value < 1e-10);
        assert!(g.distance(&vv(&[-0.25, 0.5]), 0.1).value < 1e-10);
        let d = g.distance(&vv(&[0.0, -1.0]), 0.1).value;
        assert_relative_eq!(d, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn horn_membership_and_projection() {
        let h = horn();
        assert_eq!(h.distance(&vv(&[1.0, 0.5]), 0.1).value, 0.0);
        assert_eq!(h.distance(&vv(&[1.0, 1.0]), 0.1).value, 0.0);
        let d = h.distance(&vv(&[-1.0, 0.0]), 0.1).value;
        assert_relative_eq!(d, 1.0, epsilon = 1e-9);
        // straight above the origin the nearest boundary point is O(y) away
        let d2 = h.distance(&vv(&[0.0, 0.01]), 0.01).value;
        assert!(d2 > 0.005 && d2 <= 0.01 + 1e-12);
        let s = h.sample_ball(&vv(&[0.0, 0.0]), 0.1, 64, 9);
        assert!(!s.points.is_empty());
        for p in &s.points {
            assert!(p[0] >= 0.0 && p[1].abs() <= p[0] * p[0] + 1e-12);
        }
    }

    #[test]
    fn spiral_distance_near_pole() {
        let sp = log_spiral();
        assert_eq!(sp.distance(&vv(&[0.0, 0.0]), 1e-6).value, 0.0);
        // points on the spiral report ~zero distance
        let q = SpiralShape::curve(-30.0);
        assert!(sp.distance(&q, 1e-3).value < 1e-10);
        let s = sp.sample_ball(&vv(&[0.0, 0.0]), 1e-4, 64, 2);
        assert!(s.points.iter().any(|p| p.norm() > 0.0 && p.norm() <= 1e-4));
    }

    #[test]
    fn wedges_union_distance() {
        let w = two_wedges();
        assert_eq!(w.distance(&vv(&[2.0, 1.0]), 0.1).value, 0.0);
        assert_eq!(w.distance(&vv(&[-2.0, -1.0]), 0.1).value, 0.0);
        assert!(w.distance(&vv(&[0.0, 1.0]), 0.1).value > 0.5);
        assert!(w.distance(&vv(&[-1.0, 1.0]), 0.1).value > 0.9);
    }

    #[test]
    fn cloud_shape_exact_nearest() {
        let pts = vec![vv(&[0.0, 0.0]), vv(&[1.0, 0.0]), vv(&[0.0, 2.0])];
        let m = super::super::build_model(super::super::ModelSpec::PointCloud { points: pts }).unwrap();
        assert_relative_eq!(m.distance(&vv(&[0.4, 0.0]), 0.1).value, 0.4);
        let s = m.sample_ball(&vv(&[0.0, 0.0]), 1.5, 8, 0);
        assert_eq!(s.points.len(), 2);
    }

    #[test]
    fn graph_shape_distance_on_parabola() {
        let dom = interval(-2.0, 2.0);
        let m = super::super::build_model(super::super::ModelSpec::GraphSet {
            domain: dom,
            f: Arc::new(|x: &Vector| x[0] * x[0]),
            descriptor: "parabola".into(),
        })
        .unwrap();
        assert!(m.distance(&vv(&[1.0, 1.0]), 0.1).value < 1e-6);
        let d = m.distance(&vv(&[0.0, 1.0]), 0.1).value;
        // nearest parabola point to (0,1) is at x ~ +-0.707, distance ~ 0.866
        assert!((d - 0.866).abs() < 0.02, "d={d}");
    }

    #[test]
    fn sublevel_disc_roughly_matches_disc() {
        let m = super::super::build_model(super::super::ModelSpec::Sublevel {
            dim: 2,
            predicate: Arc::new(|p: &Vector| p.norm() <= 1.0),
            lo: vv(&[-2.0, -2.0]),
            hi: vv(&[2.0, 2.0]),
            budget: 512,
            descriptor: "disc by predicate".into(),
        })
        .unwrap();
        let d = m.distance(&vv(&[1.8, 0.0]), 0.1);
        assert!((d.value - 0.8).abs() <= d.err_bound + 0.1, "value {} err {}", d.value, d.err_bound);
        assert_eq!(m.distance(&vv(&[0.2, 0.2]), 0.1).value, 0.0);
    }

    #[test]
    fn affine_image_preserves_distances() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let t = vv(&[3.0, -1.0]);
        let img = super::super::affine_image(&quadrant(), &t, &rot).unwrap();
        // quadrant rotated 90 degrees then shifted
        let p = vv(&[3.0, -1.0]);
        assert_eq!(img.distance(&p, 0.1).value, 0.0);
        let far = vv(&[4.0, -1.0]);
        // x-direction maps to (0,1); (1,0) offset exits the rotated quadrant
        assert_relative_eq!(img.distance(&far, 0.1).value, 1.0);
        let s = img.sample_ball(&p, 0.5, 32, 4);
        for q in &s.points {
            assert!(img.distance(q, 1e-6).value < 1e-12);
        }
    }

    #[test]
    fn non_orthogonal_rotation_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let t = vv(&[0.0, 0.0]);
        assert!(super::super::affine_image(&quadrant(), &t, &bad).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let pts = super::super::points_from_csv("1.0, 2.0\n3.5,-4.25\n").unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1][1], -4.25);
        assert!(super::super::points_from_csv("1.0,2.0\n1.0\n").is_err());
        assert!(super::super::points_from_csv("").is_err());
    }
}
