//! Joseph-style ray-driven projector.
//!
//! Every detector pixel launches one ray. The ray is sampled once per slice
//! along the volume axis most aligned with it, and the sample is bilinearly
//! interpolated in that slice. Each sample carries weight `h_a / |d_a|`, the
//! path length between consecutive slices. Back projection visits exactly the
//! same `(voxel, weight)` pairs, so the two operators are adjoint.

use rayon::prelude::*;

use super::{ProjectionGeometry, Sinogram, View, Volume, VolumeGrid};
use crate::error::{Error, Result};

/// Number of views whose back projections are accumulated serially before
/// the partial volumes are summed. Fixed so the reduction order does not
/// depend on the thread pool.
const BACKPROJECT_VIEW_CHUNK: usize = 4;

/// A forward/back projector pair bound to a reconstruction grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    geometry: ProjectionGeometry,
    grid: VolumeGrid,
    plans: Vec<ViewPlan>,
}

/// Per-view constants of the slice walk.
#[derive(Clone, Copy, Debug, PartialEq)]
struct ViewPlan {
    /// Slice axis, then the two in-plane axes.
    axes: [usize; 3],
    weight: f64,
    /// Change of the in-plane fractional indices per slice.
    step_b: f64,
    step_c: f64,
    view: View,
}

impl Projector {
    pub fn new(geometry: ProjectionGeometry, grid: VolumeGrid) -> Self {
        let plans = geometry
            .views()
            .iter()
            .map(|view| plan_view(view, &grid))
            .collect();
        Projector {
            geometry,
            grid,
            plans,
        }
    }

    pub fn geometry(&self) -> &ProjectionGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &VolumeGrid {
        &self.grid
    }

    /// Number of rows of the implied system matrix.
    pub fn n_rays(&self) -> usize {
        self.geometry.sinogram_shape().iter().product()
    }

    pub fn forward(&self, x: &Volume) -> Result<Sinogram> {
        if x.grid() != &self.grid {
            return Err(Error::mismatch(self.grid, x.grid()));
        }
        Sinogram::from_values(&self.geometry, self.forward_raw(x.values()))
    }

    pub fn back(&self, y: &Sinogram) -> Result<Volume> {
        y.check_geometry(&self.geometry)?;
        Volume::from_values(self.grid, self.back_raw(y.values()))
    }

    /// `A·x` on flat buffers. `x.len()` must equal the grid size.
    pub fn forward_raw(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.grid.len(), "volume length");
        let rows = self.geometry.detector_rows();
        let cols = self.geometry.detector_cols();
        let mut out = vec![0.0; self.n_rays()];
        out.par_chunks_mut(rows * cols)
            .zip(self.plans.par_iter())
            .for_each(|(image, plan)| {
                for row in 0..rows {
                    for col in 0..cols {
                        let mut acc = 0.0;
                        self.trace(plan, row, col, |j, w| acc += w * x[j]);
                        image[row * cols + col] = acc;
                    }
                }
            });
        out
    }

    /// `Aᵀ·y` on flat buffers. `y.len()` must equal the number of rays.
    pub fn back_raw(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n_rays(), "sinogram length");
        let rows = self.geometry.detector_rows();
        let cols = self.geometry.detector_cols();
        let per_view = rows * cols;
        let n = self.grid.len();
        let partials: Vec<Vec<f64>> = self
            .plans
            .par_chunks(BACKPROJECT_VIEW_CHUNK)
            .enumerate()
            .map(|(chunk, plans)| {
                let mut acc = vec![0.0; n];
                for (k, plan) in plans.iter().enumerate() {
                    let view = chunk * BACKPROJECT_VIEW_CHUNK + k;
                    let image = &y[view * per_view..(view + 1) * per_view];
                    for row in 0..rows {
                        for col in 0..cols {
                            let val = image[row * cols + col];
                            if val != 0.0 {
                                self.trace(plan, row, col, |j, w| acc[j] += w * val);
                            }
                        }
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![0.0; n];
        for part in &partials {
            for (o, p) in out.iter_mut().zip(part) {
                *o += p;
            }
        }
        out
    }

    /// Visits every `(voxel index, weight)` pair of one detector ray.
    fn trace(&self, plan: &ViewPlan, row: usize, col: usize, mut visit: impl FnMut(usize, f64)) {
        let [a, b, c] = plan.axes;
        let dims = self.grid.dims;
        let h = self.grid.spacing;
        let strides = self.grid.strides();
        let s = self.geometry.detector_pixel_size();
        let du = (col as f64 - (self.geometry.detector_cols() as f64 - 1.0) / 2.0) * s;
        let dv = (row as f64 - (self.geometry.detector_rows() as f64 - 1.0) / 2.0) * s;
        let view = &plan.view;
        let p = [
            du * view.u[0] + dv * view.v[0],
            du * view.u[1] + dv * view.v[1],
            du * view.u[2] + dv * view.v[2],
        ];
        let d = view.direction;

        // Ray parameter at the first slice center along axis a.
        let first = -(dims[a] as f64 - 1.0) / 2.0 * h[a];
        let t0 = (first - p[a]) / d[a];
        let fb0 = (p[b] + t0 * d[b]) / h[b] + (dims[b] as f64 - 1.0) / 2.0;
        let fc0 = (p[c] + t0 * d[c]) / h[c] + (dims[c] as f64 - 1.0) / 2.0;
        let (nb, nc) = (dims[b] as f64, dims[c] as f64);

        for i in 0..dims[a] {
            let fb = fb0 + i as f64 * plan.step_b;
            let fc = fc0 + i as f64 * plan.step_c;
            if fb <= -1.0 || fc <= -1.0 || fb >= nb || fc >= nc {
                continue;
            }
            let ib = fb.floor();
            let ic = fc.floor();
            let wb = fb - ib;
            let wc = fc - ic;
            let (ib, ic) = (ib as isize, ic as isize);
            let base = i * strides[a];
            let corners = [
                (ib, ic, (1.0 - wb) * (1.0 - wc)),
                (ib + 1, ic, wb * (1.0 - wc)),
                (ib, ic + 1, (1.0 - wb) * wc),
                (ib + 1, ic + 1, wb * wc),
            ];
            for (jb, jc, w) in corners {
                if jb < 0 || jc < 0 || jb as usize >= dims[b] || jc as usize >= dims[c] || w == 0.0 {
                    continue;
                }
                visit(
                    base + jb as usize * strides[b] + jc as usize * strides[c],
                    plan.weight * w,
                );
            }
        }
    }
}

fn plan_view(view: &View, grid: &VolumeGrid) -> ViewPlan {
    let d = view.direction;
    let mut a = 0;
    for k in 1..3 {
        if d[k].abs() > d[a].abs() {
            a = k;
        }
    }
    let (b, c) = match a {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let h = grid.spacing;
    ViewPlan {
        axes: [a, b, c],
        weight: h[a] / d[a].abs(),
        step_b: h[a] * d[b] / d[a] / h[b],
        step_c: h[a] * d[c] / d[a] / h[c],
        view: *view,
    }
}

/// `A·x` for the grid carried by `x`.
pub fn forward_project(x: &Volume, geometry: &ProjectionGeometry) -> Result<Sinogram> {
    Projector::new(geometry.clone(), *x.grid()).forward(x)
}

/// `Aᵀ·y` onto `grid`.
pub fn back_project(y: &Sinogram, geometry: &ProjectionGeometry, grid: VolumeGrid) -> Result<Volume> {
    Projector::new(geometry.clone(), grid).back(y)
}
