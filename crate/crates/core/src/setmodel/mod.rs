//! Uniform capability interface for subsets of ℝⁿ: a distance oracle with a
//! declared error bound, a local sampler, and constructors for the set
//! representations the rest of the crate consumes.

mod kdtree;
pub mod shapes;

pub use kdtree::KdTree;

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::geom::Vector;

/// A distance-oracle answer: the reported value and a bound on its error.
#[derive(Debug, Clone, Copy)]
pub struct Distance {
    pub value: f64,
    pub err_bound: f64,
}

impl Distance {
    pub fn exact(value: f64) -> Self {
        Distance { value, err_bound: 0.0 }
    }
}

/// Points produced by a local sampler. `exhausted` distinguishes "found
/// nothing and cannot certify emptiness" (rejection budget ran out) from a
/// certified answer.
#[derive(Debug, Clone, Default)]
pub struct Sample {
    pub points: Vec<Vector>,
    pub exhausted: bool,
}

impl Sample {
    pub fn certified(points: Vec<Vector>) -> Self {
        Sample { points, exhausted: false }
    }
}

/// Capability interface every set representation implements.
///
/// `scale` is the resolution the caller cares about (typically the probe
/// scale); adaptive oracles refine until their error is small relative to it.
pub trait SetShape: Send + Sync {
    fn ambient_dim(&self) -> usize;
    fn distance(&self, p: &Vector, scale: f64) -> Distance;
    fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample;
    /// Smallest scale at which distance answers remain meaningful.
    fn resolution_floor(&self) -> f64;
    fn descriptor(&self) -> String;
}

/// Immutable, shareable handle to a set oracle.
#[derive(Clone)]
pub struct SetModel {
    inner: Arc<dyn SetShape>,
}

impl SetModel {
    pub fn new<S: SetShape + 'static>(shape: S) -> Self {
        SetModel { inner: Arc::new(shape) }
    }

    pub fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    pub fn distance(&self, p: &Vector, scale: f64) -> Distance {
        self.inner.distance(p, scale)
    }

    pub fn sample_ball(&self, center: &Vector, radius: f64, budget: usize, seed: u64) -> Sample {
        self.inner.sample_ball(center, radius, budget, seed)
    }

    pub fn resolution_floor(&self) -> f64 {
        self.inner.resolution_floor()
    }

    pub fn descriptor(&self) -> String {
        self.inner.descriptor()
    }

    /// Membership up to oracle error and `slack`.
    pub fn contains(&self, p: &Vector, slack: f64) -> bool {
        let d = self.distance(p, slack.max(1e-12));
        d.value <= 2.0 * d.err_bound + slack
    }
}

impl std::fmt::Debug for SetModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SetModel({})", self.descriptor())
    }
}

/// Scalar-valued rule generating the n-th member of a sequence set.
pub type SequenceRule = Arc<dyn Fn(u64) -> Vector + Send + Sync>;
/// Monotone bound: the largest index needed to enumerate members of norm ≥ s.
pub type IndexBound = Arc<dyn Fn(f64) -> u64 + Send + Sync>;
pub type CurveMap = Arc<dyn Fn(f64) -> Vector + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type Predicate = Arc<dyn Fn(&Vector) -> bool + Send + Sync>;

/// Set representations the builder understands.
pub enum ModelSpec {
    PointCloud { points: Vec<Vector> },
    SequenceSet { dim: usize, rule: SequenceRule, index_bound: IndexBound, descriptor: String },
    ParametricCurve { dim: usize, t_range: (f64, f64), map: CurveMap, samples: usize, descriptor: String },
    GraphSet { domain: SetModel, f: ScalarField, descriptor: String },
    Sublevel { dim: usize, predicate: Predicate, lo: Vector, hi: Vector, budget: usize, descriptor: String },
    Union(Vec<ModelSpec>),
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("non-finite coordinate in generated point")]
    NonFinite,
    #[error("point dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("parametric interval must be nonempty and finite")]
    BadInterval,
    #[error("union of models with mixed ambient dimensions")]
    MixedUnion,
    #[error("empty union")]
    EmptyUnion,
    #[error("rotation matrix is not orthogonal (deviation {0:.3e})")]
    NotOrthogonal(f64),
    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Realizes a specification as a queryable set model.
pub fn build_model(spec: ModelSpec) -> Result<SetModel, BuildError> {
    match spec {
        ModelSpec::PointCloud { points } => {
            if points.is_empty() {
                return Err(BuildError::EmptyCloud);
            }
            let dim = points[0].len();
            for p in &points {
                if p.len() != dim {
                    return Err(BuildError::DimMismatch { expected: dim, got: p.len() });
                }
                if !p.iter().all(|x| x.is_finite()) {
                    return Err(BuildError::NonFinite);
                }
            }
            Ok(SetModel::new(shapes::PointCloudShape::new(points)))
        }
        ModelSpec::SequenceSet { dim, rule, index_bound, descriptor } => {
            let probe = rule(1);
            if probe.len() != dim || !probe.iter().all(|x| x.is_finite()) {
                return Err(BuildError::NonFinite);
            }
            Ok(SetModel::new(shapes::SequenceShape::new(dim, rule, index_bound, descriptor)))
        }
        ModelSpec::ParametricCurve { dim, t_range, map, samples, descriptor } => {
            let (a, b) = t_range;
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(BuildError::BadInterval);
            }
            let shape = shapes::CurveShape::new(dim, t_range, map, samples.max(64), descriptor);
            if !shape.is_finite() {
                return Err(BuildError::NonFinite);
            }
            Ok(SetModel::new(shape))
        }
        ModelSpec::GraphSet { domain, f, descriptor } => {
            Ok(SetModel::new(shapes::GraphShape::new(domain, f, descriptor)))
        }
        ModelSpec::Sublevel { dim, predicate, lo, hi, budget, descriptor } => {
            if lo.len() != dim || hi.len() != dim {
                return Err(BuildError::DimMismatch { expected: dim, got: lo.len() });
            }
            Ok(SetModel::new(shapes::SublevelShape::new(dim, predicate, lo, hi, budget, descriptor)))
        }
        ModelSpec::Union(specs) => {
            if specs.is_empty() {
                return Err(BuildError::EmptyUnion);
            }
            let parts: Result<Vec<SetModel>, BuildError> = specs.into_iter().map(build_model).collect();
            let parts = parts?;
            let dim = parts[0].ambient_dim();
            if parts.iter().any(|m| m.ambient_dim() != dim) {
                return Err(BuildError::MixedUnion);
            }
            Ok(SetModel::new(shapes::UnionShape::new(parts)))
        }
    }
}

/// Rigid image of a model: distance and sampling delegate through the
/// inverse transform, so error bounds carry over unchanged.
pub fn affine_image(model: &SetModel, translation: &Vector, rotation: &DMatrix<f64>) -> Result<SetModel, BuildError> {
    let n = rotation.nrows();
    if rotation.ncols() != n || n != model.ambient_dim() || translation.len() != n {
        return Err(BuildError::DimMismatch { expected: model.ambient_dim(), got: n });
    }
    let dev = (rotation.transpose() * rotation - DMatrix::<f64>::identity(n, n)).amax();
    if dev > 1e-12 {
        return Err(BuildError::NotOrthogonal(dev));
    }
    Ok(SetModel::new(shapes::AffineShape::new(model.clone(), rotation.clone(), translation.clone())))
}

/// Parses a headerless CSV point cloud, one point per row.
pub fn points_from_csv(text: &str) -> Result<Vec<Vector>, BuildError> {
    let mut out = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let coords: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let coords = coords.map_err(|e| BuildError::Csv { line: i + 1, msg: e.to_string() })?;
        if let Some(d) = dim {
            if coords.len() != d {
                return Err(BuildError::Csv { line: i + 1, msg: format!("expected {d} columns") });
            }
        } else {
            dim = Some(coords.len());
        }
        out.push(Vector::from_vec(coords));
    }
    if out.is_empty() {
        return Err(BuildError::EmptyCloud);
    }
    Ok(out)
}
