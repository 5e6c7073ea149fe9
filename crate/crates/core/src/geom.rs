//! Dimension-generic vector geometry: direction grids on the unit sphere,
//! span rank, non-vertical hyperplane fitting in graph space, and polar
//! (half-space) membership tests.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Ambient points and directions. All coordinates must stay finite.
pub type Vector = DVector<f64>;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("dimension must be at least 1")]
    ZeroDim,
    #[error("direction count {count} below minimum {min} for dim {dim}")]
    CountTooSmall { count: usize, min: usize, dim: usize },
    #[error("mixed dimensions: expected {expected}, got {got}")]
    MixedDims { expected: usize, got: usize },
    #[error("empty direction list")]
    Empty,
}

/// Why a hyperplane fit was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum FitFailure {
    /// Some direction lies within the angular tolerance of the vertical axis.
    Vertical { dir_index: usize, angle: f64 },
    /// No single non-vertical hyperplane contains all directions.
    NotFlat { max_residual: f64 },
}

impl std::fmt::Display for FitFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitFailure::Vertical { dir_index, angle } => {
                write!(f, "VERTICAL (dir {dir_index}, angle to axis {angle:.3e} rad)")
            }
            FitFailure::NotFlat { max_residual } => {
                write!(f, "NOT_FLAT (max residual {max_residual:.3e})")
            }
        }
    }
}

/// A linear map v ↦ Lv, stored as a dense k×m matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    mat: DMatrix<f64>,
}

impl LinearMap {
    pub fn new(mat: DMatrix<f64>) -> Self {
        assert!(mat.iter().all(|x| x.is_finite()), "non-finite entry in linear map");
        LinearMap { mat }
    }

    pub fn from_rows(rows: usize, cols: usize, entries: &[f64]) -> Self {
        Self::new(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        LinearMap { mat: DMatrix::zeros(rows, cols) }
    }

    pub fn rows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn cols(&self) -> usize {
        self.mat.ncols()
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.mat * v
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Row-major entries, the serialization order used in reports.
    pub fn entries_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.mat.nrows() * self.mat.ncols());
        for i in 0..self.mat.nrows() {
            for j in 0..self.mat.ncols() {
                out.push(self.mat[(i, j)]);
            }
        }
        out
    }

    /// Largest entrywise difference against another map of the same shape.
    pub fn max_entry_diff(&self, other: &LinearMap) -> f64 {
        assert_eq!(self.mat.shape(), other.mat.shape());
        (&self.mat - &other.mat).amax()
    }

    pub fn op_norm_bound(&self) -> f64 {
        self.mat.norm()
    }
}

/// A deterministic set of unit directions probing the sphere of directions.
#[derive(Debug, Clone)]
pub struct DirectionGrid {
    pub dim: usize,
    pub dirs: Vec<Vector>,
    pub seed: u64,
}

impl DirectionGrid {
    /// Appends extra unit directions (e.g. harvested from set samples),
    /// skipping near-duplicates of existing ones.
    pub fn extend_dirs(&mut self, extra: &[Vector], min_angle: f64) {
        for d in extra {
            let n = d.norm();
            if n < 1e-14 {
                continue;
            }
            let u = d / n;
            let dup = self.dirs.iter().any(|e| {
                let c = e.dot(&u).clamp(-1.0, 1.0);
                c.acos() < min_angle
            });
            if !dup {
                self.dirs.push(u);
            }
        }
    }
}

/// Deterministic grid of unit directions.
///
/// dim 1 is the exact pair {+1, -1}; dim 2 equally spaced angles; dim 3 a
/// Fibonacci-sphere lattice; higher dims seeded Gaussian directions.
pub fn unit_sphere_grid(dim: usize, count: usize, seed: u64) -> Result<DirectionGrid, GeomError> {
    if dim == 0 {
        return Err(GeomError::ZeroDim);
    }
    if count < 2 * dim {
        return Err(GeomError::CountTooSmall { count, min: 2 * dim, dim });
    }
    let dirs = match dim {
        1 => vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![-1.0])],
        2 => (0..count)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * (i as f64) / (count as f64);
                DVector::from_vec(vec![theta.cos(), theta.sin()])
            })
            .collect(),
        3 => {
            // Fibonacci lattice: near-uniform, deterministic.
            let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / (count as f64);
                    let r = (1.0 - z * z).sqrt();
                    let phi = 2.0 * std::f64::consts::PI * (i as f64) / golden;
                    DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            let mut dirs: Vec<Vector> = Vec::with_capacity(count);
            while dirs.len() < count {
                let v = gaussian_vector(dim, &mut rng);
                let n = v.norm();
                if n < 1e-6 {
                    continue;
                }
                let u = v / n;
                if dirs.iter().all(|d| (d - &u).norm() > 1e-9) {
                    dirs.push(u);
                }
            }
            dirs
        }
    };
    Ok(DirectionGrid { dim, dirs, seed })
}

fn gaussian_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vector {
    // Box-Muller; two normals per pair of uniforms.
    let mut out = Vec::with_capacity(dim);
    while out.len() < dim {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        let a = 2.0 * std::f64::consts::PI * u2;
        out.push(r * a.cos());
        if out.len() < dim {
            out.push(r * a.sin());
        }
    }
    Vector::from_vec(out)
}

/// Rank of the linear span of `dirs`: singular values above `tol` relative
/// to the largest one. Empty input has span dimension 0.
pub fn span_dimension(dirs: &[Vector], tol: f64) -> Result<usize, GeomError> {
    if dirs.is_empty() {
        return Ok(0);
    }
    let dim = dirs[0].len();
    for d in dirs {
        if d.len() != dim {
            return Err(GeomError::MixedDims { expected: dim, got: d.len() });
        }
    }
    let mut mat = DMatrix::zeros(dim, dirs.len());
    for (j, d) in dirs.iter().enumerate() {
        mat.set_column(j, d);
    }
    let svd = mat.svd(false, false);
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return Ok(0);
    }
    Ok(svd.singular_values.iter().filter(|&&s| s > tol * smax).count())
}

/// Least-squares fit of graph-space directions in ℝ^{m+1} by a linear map
/// ℝ^m → ℝ, after normalizing each direction by its horizontal norm.
///
/// Directions within `angular_tol` radians of the vertical axis make the fit
/// fail `Vertical`; residuals above `angular_tol` make it fail `NotFlat`.
pub fn fit_nonvertical_hyperplane(
    dirs: &[Vector],
    angular_tol: f64,
) -> Result<Result<LinearMap, FitFailure>, GeomError> {
    if dirs.is_empty() {
        return Err(GeomError::Empty);
    }
    let full = dirs[0].len();
    assert!(full >= 2, "graph directions need at least 2 coordinates");
    let m = full - 1;
    for d in dirs {
        if d.len() != full {
            return Err(GeomError::MixedDims { expected: full, got: d.len() });
        }
    }
    let mut rows_a: Vec<Vector> = Vec::with_capacity(dirs.len());
    let mut rhs: Vec<f64> = Vec::with_capacity(dirs.len());
    for (i, d) in dirs.iter().enumerate() {
        let n = d.norm();
        if n < 1e-14 {
            continue;
        }
        let u = d / n;
        let vertical_angle = (u[m].abs().clamp(-1.0, 1.0)).acos();
        if vertical_angle <= angular_tol {
            return Ok(Err(FitFailure::Vertical { dir_index: i, angle: vertical_angle }));
        }
        let horiz = u.rows(0, m).into_owned();
        let hn = horiz.norm();
        rows_a.push(horiz / hn);
        rhs.push(u[m] / hn);
    }
    if rows_a.is_empty() {
        return Err(GeomError::Empty);
    }
    let a = DMatrix::from_fn(rows_a.len(), m, |i, j| rows_a[i][j]);
    let b = DVector::from_vec(rhs.clone());
    let l = lstsq(&a, &b);
    let max_residual = rows_a
        .iter()
        .zip(&rhs)
        .map(|(row, &bi)| (l.dot(row) - bi).abs())
        .fold(0.0_f64, f64::max);
    if max_residual > angular_tol {
        return Ok(Err(FitFailure::NotFlat { max_residual }));
    }
    let mat = DMatrix::from_fn(1, m, |_, j| l[j]);
    Ok(Ok(LinearMap::new(mat)))
}

/// Minimum-norm least-squares solution of `a x = b` via SVD.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-12 * a.amax().max(1e-300)).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Polar-cone test: true iff ⟨w, v⟩ ≤ tol·‖w‖ for every direction v.
pub fn polar_member(w: &Vector, cone_dirs: &[Vector], tol: f64) -> Result<bool, GeomError> {
    for v in cone_dirs {
        if v.len() != w.len() {
            return Err(GeomError::MixedDims { expected: w.len(), got: v.len() });
        }
    }
    let bound = tol * w.norm();
    Ok(cone_dirs.iter().all(|v| w.dot(v) <= bound))
}

/// Angle between two nonzero vectors, in radians.
pub fn angle_between(a: &Vector, b: &Vector) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na < 1e-300 || nb < 1e-300 {
        return std::f64::consts::PI;
    }
    (a.dot(b) / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Orthonormal basis of the span of `basis` (thin QR, rank-revealing by norm).
pub fn orthonormalize(basis: &[Vector]) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::new();
    for b in basis {
        let mut v = b.clone();
        for q in &out {
            let c = q.dot(&v);
            v -= q * c;
        }
        let n = v.norm();
        if n > 1e-12 * b.norm().max(1.0) {
            out.push(v / n);
        }
    }
    out
}

/// Distance from `u` to the span of an orthonormal system `q`.
pub fn distance_to_span(u: &Vector, q: &[Vector]) -> f64 {
    let mut r = u.clone();
    for b in q {
        let c = b.dot(&r);
        r -= b * c;
    }
    r.norm()
}

pub fn vec_from(coords: &[f64]) -> Vector {
    Vector::from_vec(coords.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        vec_from(c)
    }

    #[test]
    fn grid_dim1_is_pm_one() {
        let g = unit_sphere_grid(1, 8, 0).unwrap();
        assert_eq!(g.dirs.len(), 2);
        assert_eq!(g.dirs[0][0], 1.0);
        assert_eq!(g.dirs[1][0], -1.0);
    }

    #[test]
    fn grid_dim2_equal_spacing() {
        let g = unit_sphere_grid(2, 4, 0).unwrap();
        let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (d, e) in g.dirs.iter().zip(expect.iter()) {
            assert!((d[0] - e[0]).abs() < 1e-12 && (d[1] - e[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_dim5_units_distinct() {
        let g = unit_sphere_grid(5, 64, 7).unwrap();
        assert_eq!(g.dirs.len(), 64);
        for d in &g.dirs {
            assert!((d.norm() - 1.0).abs() < 1e-12);
        }
        for i in 0..g.dirs.len() {
            for j in (i + 1)..g.dirs.len() {
                assert!(angle_between(&g.dirs[i], &g.dirs[j]) > 0.0);
            }
        }
        // reproducible
        let g2 = unit_sphere_grid(5, 64, 7).unwrap();
        for (a, b) in g.dirs.iter().zip(&g2.dirs) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        assert!(unit_sphere_grid(0, 4, 0).is_err());
        assert!(unit_sphere_grid(3, 5, 0).is_err());
    }

    #[test]
    fn span_collinear_is_one() {
        let d = span_dimension(&[v(&[1.0, 0.0]), v(&[-1.0, 0.0])], 1e-9).unwrap();
        assert_eq!(d, 1);
    }

    #[test]
    fn span_plane_is_two() {
        let s = 0.5_f64.sqrt();
        let d = span_dimension(&[v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[s, s])], 1e-9).unwrap();
        assert_eq!(d, 2);
    }

    #[test]
    fn span_empty_is_zero() {
        assert_eq!(span_dimension(&[], 1e-9).unwrap(), 0);
    }

    #[test]
    fn hyperplane_fit_recovers_sum() {
        let dirs: Vec<Vector> = [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [-1.0, 0.0, -1.0], [0.0, -1.0, -1.0]]
            .iter()
            .map(|c| {
                let u = v(c);
                let n = u.norm();
                u / n
            })
            .collect();
        let l = fit_nonvertical_hyperplane(&dirs, 1e-2).unwrap().unwrap();
        let e = l.entries_row_major();
        assert!((e[0] - 1.0).abs() < 1e-9 && (e[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hyperplane_fit_vertical() {
        let dirs = vec![v(&[0.0, 0.0, 1.0])];
        match fit_nonvertical_hyperplane(&dirs, 1e-2).unwrap() {
            Err(FitFailure::Vertical { .. }) => {}
            other => panic!("expected VERTICAL, got {other:?}"),
        }
    }

    #[test]
    fn hyperplane_fit_not_flat_on_euclidean_cone() {
        // directions of the graph of sqrt(x^2+y^2): (v, |v|) over several v
        let mut dirs = Vec::new();
        for k in 0..8 {
            let th = 2.0 * std::f64::consts::PI * (k as f64) / 8.0;
            let d = v(&[th.cos(), th.sin(), 1.0]);
            let n = d.norm();
            dirs.push(d / n);
        }
        match fit_nonvertical_hyperplane(&dirs, 1e-2).unwrap() {
            Err(FitFailure::NotFlat { .. }) => {}
            other => panic!("expected NOT_FLAT, got {other:?}"),
        }
    }

    #[test]
    fn polar_quadrant() {
        let cone = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[0.7, 0.3])];
        assert!(polar_member(&v(&[-1.0, -1.0]), &cone, 1e-12).unwrap());
        assert!(!polar_member(&v(&[1.0, 0.0]), &cone, 1e-12).unwrap());
    }

    #[test]
    fn polar_abs_kink() {
        let s = 0.5_f64.sqrt();
        let cone = vec![v(&[s, s]), v(&[-s, s])];
        assert!(polar_member(&v(&[0.0, -1.0]), &cone, 1e-12).unwrap());
    }
}
