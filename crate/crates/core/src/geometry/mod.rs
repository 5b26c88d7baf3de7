//! Parallel-beam acquisition geometry, volume/sinogram containers and the
//! matrix-free projector pair.
//!
//! World coordinates put the volume center at the origin. A voxel with
//! index `(i, j, k)` has its center at `((i - (nx-1)/2)·sx, ...)`. Each view
//! has a detector plane through the origin spanned by its `u`/`v` basis
//! vectors, with the pixel grid centered on the origin.

mod projector;

pub use projector::{back_project, forward_project, Projector};

use crate::error::{Error, Result};

/// Tolerance on unit norms and orthogonality of view bases.
pub const ORTHONORMAL_TOL: f64 = 1e-12;

/// Shape and voxel spacing of a reconstruction grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeGrid {
    /// `(nx, ny, nz)`; x varies fastest in memory.
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
}

impl VolumeGrid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::invalid(format!("volume dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!(
                "voxel spacing must be positive and finite, got {spacing:?}"
            )));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::invalid(format!("volume dims {dims:?} overflow")))?;
        Ok(VolumeGrid { dims, spacing })
    }

    /// Cubic grid with unit spacing.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new([n; 3], [1.0; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear offsets of a unit step along x, y and z.
    pub fn strides(&self) -> [usize; 3] {
        [1, self.dims[0], self.dims[0] * self.dims[1]]
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    pub fn coords(&self, j: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [j % nx, (j / nx) % ny, j / (nx * ny)]
    }

    /// Physical extent along each axis.
    pub fn extent(&self) -> [f64; 3] {
        [
            self.dims[0] as f64 * self.spacing[0],
            self.dims[1] as f64 * self.spacing[1],
            self.dims[2] as f64 * self.spacing[2],
        ]
    }
}

/// A 3D scalar field sampled on a [`VolumeGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    grid: VolumeGrid,
    values: Vec<f64>,
}

impl Volume {
    pub fn zeros(grid: VolumeGrid) -> Self {
        Volume {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn filled(grid: VolumeGrid, value: f64) -> Self {
        Volume {
            values: vec![value; grid.len()],
            grid,
        }
    }

    pub fn from_values(grid: VolumeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::mismatch(grid.len(), values.len()));
        }
        Ok(Volume { grid, values })
    }

    pub fn grid(&self) -> &VolumeGrid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.values[self.grid.index(ix, iy, iz)]
    }
}

/// Stacked projection images. Detector column varies fastest, then row,
/// then view.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    shape: [usize; 3],
    values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(geometry: &ProjectionGeometry) -> Self {
        let shape = geometry.sinogram_shape();
        Sinogram {
            values: vec![0.0; shape.iter().product()],
            shape,
        }
    }

    pub fn from_values(geometry: &ProjectionGeometry, values: Vec<f64>) -> Result<Self> {
        let shape = geometry.sinogram_shape();
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::mismatch(expected, values.len()));
        }
        Ok(Sinogram { shape, values })
    }

    /// `(n_views, detector_rows, detector_cols)`
    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn index(&self, view: usize, row: usize, col: usize) -> usize {
        col + self.shape[2] * (row + self.shape[1] * view)
    }

    pub(crate) fn check_geometry(&self, geometry: &ProjectionGeometry) -> Result<()> {
        if self.shape != geometry.sinogram_shape() {
            return Err(Error::mismatch(geometry.sinogram_shape(), self.shape));
        }
        Ok(())
    }
}

/// One parallel-beam view: ray direction plus the detector-plane basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct View {
    pub direction: [f64; 3],
    /// Detector column axis.
    pub u: [f64; 3],
    /// Detector row axis.
    pub v: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionGeometry {
    views: Vec<View>,
    detector_rows: usize,
    detector_cols: usize,
    detector_pixel_size: f64,
}

impl ProjectionGeometry {
    /// Builds a geometry from explicit ray directions. Each direction is
    /// normalised and given a deterministic orthonormal detector basis.
    pub fn from_directions(
        directions: &[[f64; 3]],
        detector_rows: usize,
        detector_cols: usize,
        detector_pixel_size: f64,
    ) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::invalid("at least one view direction is required"));
        }
        if detector_rows == 0 || detector_cols == 0 {
            return Err(Error::invalid("detector dimensions must be positive"));
        }
        if !(detector_pixel_size > 0.0 && detector_pixel_size.is_finite()) {
            return Err(Error::invalid("detector pixel size must be positive"));
        }
        let views = directions
            .iter()
            .map(|d| {
                let n = norm3(d);
                if !(n > 0.0 && n.is_finite()) {
                    return Err(Error::invalid(format!("degenerate view direction {d:?}")));
                }
                // Already-unit input is kept bit-for-bit so geometries survive
                // a round trip through a file header.
                if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
                    Ok(view_basis(*d))
                } else {
                    Ok(view_basis([d[0] / n, d[1] / n, d[2] / n]))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProjectionGeometry {
            views,
            detector_rows,
            detector_cols,
            detector_pixel_size,
        })
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn directions(&self) -> Vec<[f64; 3]> {
        self.views.iter().map(|v| v.direction).collect()
    }

    pub fn detector_rows(&self) -> usize {
        self.detector_rows
    }

    pub fn detector_cols(&self) -> usize {
        self.detector_cols
    }

    pub fn detector_pixel_size(&self) -> f64 {
        self.detector_pixel_size
    }

    pub fn sinogram_shape(&self) -> [usize; 3] {
        [self.views.len(), self.detector_rows, self.detector_cols]
    }

    /// Smallest angle between any two view lines. Parallel-beam rays are
    /// sign-symmetric, so `d` and `-d` count as the same line.
    pub fn min_line_angle(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.views.iter().enumerate() {
            for b in &self.views[i + 1..] {
                let c = dot3(&a.direction, &b.direction).abs().min(1.0);
                best = best.min(c.acos());
            }
        }
        best
    }
}

/// Deterministic quasi-uniform directions on the upper half-sphere from the
/// generalized golden spiral, with per-view detector bases.
pub fn make_geometry(
    n_views: usize,
    detector_rows: usize,
    detector_cols: usize,
    detector_pixel_size: f64,
) -> Result<ProjectionGeometry> {
    if n_views == 0 {
        return Err(Error::invalid("n_views must be positive"));
    }
    ProjectionGeometry::from_directions(
        &golden_spiral_half_sphere(n_views),
        detector_rows,
        detector_cols,
        detector_pixel_size,
    )
}

pub fn golden_spiral_half_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden_angle * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

fn view_basis(d: [f64; 3]) -> View {
    // Helper axis: the coordinate axis least aligned with d.
    let mut helper_axis = 0;
    for a in 1..3 {
        if d[a].abs() < d[helper_axis].abs() {
            helper_axis = a;
        }
    }
    let mut e = [0.0; 3];
    e[helper_axis] = 1.0;
    let u = normalize3(cross3(&e, &d));
    let v = normalize3(cross3(&d, &u));
    View { direction: d, u, v }
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize3(a: [f64; 3]) -> [f64; 3] {
    let n = norm3(&a);
    [a[0] / n, a[1] / n, a[2] / n]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_orthonormal(g: &ProjectionGeometry) {
        for view in g.views() {
            for w in [&view.direction, &view.u, &view.v] {
                assert!((norm3(w) - 1.0).abs() <= ORTHONORMAL_TOL);
            }
            assert!(dot3(&view.direction, &view.u).abs() <= ORTHONORMAL_TOL);
            assert!(dot3(&view.direction, &view.v).abs() <= ORTHONORMAL_TOL);
            assert!(dot3(&view.u, &view.v).abs() <= ORTHONORMAL_TOL);
        }
    }

    #[test]
    fn single_view_is_orthonormal() {
        let g = make_geometry(1, 5, 5, 1.0).unwrap();
        assert_eq!(g.n_views(), 1);
        assert_orthonormal(&g);
    }

    #[test]
    fn standard_view_counts_are_distinct() {
        for n in [19, 55] {
            let g = make_geometry(n, 91, 91, 1.0).unwrap();
            assert_eq!(g.n_views(), n);
            assert_eq!(g.directions().len(), n);
            assert_orthonormal(&g);
            assert!(g.min_line_angle() > 0.0, "n = {n}");
        }
    }

    #[test]
    fn rejects_non_positive_arguments() {
        assert!(make_geometry(0, 4, 4, 1.0).is_err());
        assert!(make_geometry(3, 0, 4, 1.0).is_err());
        assert!(make_geometry(3, 4, 0, 1.0).is_err());
        assert!(make_geometry(3, 4, 4, 0.0).is_err());
        assert!(make_geometry(3, 4, 4, -1.0).is_err());
        assert!(ProjectionGeometry::from_directions(&[[0.0; 3]], 2, 2, 1.0).is_err());
    }

    #[test]
    fn axis_aligned_directions_get_valid_bases() {
        let dirs = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -2.0], [1.0, 1.0, 1.0]];
        let g = ProjectionGeometry::from_directions(&dirs, 3, 3, 1.0).unwrap();
        assert_orthonormal(&g);
        assert_eq!(g.views()[2].direction, [0.0, 0.0, -1.0]);
    }

    #[test]
    fn directions_are_deterministic() {
        let a = make_geometry(55, 4, 4, 1.0).unwrap();
        let b = make_geometry(55, 4, 4, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(VolumeGrid::new([0, 2, 2], [1.0; 3]).is_err());
        assert!(VolumeGrid::new([2, 2, 2], [1.0, 0.0, 1.0]).is_err());
        assert!(VolumeGrid::new([usize::MAX, 2, 2], [1.0; 3]).is_err());
        let g = VolumeGrid::new([3, 4, 5], [1.0; 3]).unwrap();
        assert_eq!(g.len(), 60);
        assert_eq!(g.coords(g.index(2, 3, 4)), [2, 3, 4]);
        assert!(Volume::from_values(g, vec![0.0; 59]).is_err());
    }
}
