//! Helpers shared by the integration tests: dense operators assembled
//! column by column and an independent Newton solver for small instances.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tvtomo::cli::{simulate, ExperimentConfig};
use tvtomo::{Problem, Projector, Sinogram, TvConfig, Volume, VolumeGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Explicit system matrix: column `j` is the projection of the `j`-th unit
/// volume.
pub fn dense_matrix(p: &Projector) -> DMatrix<f64> {
    let n = p.grid().len();
    let m = p.n_rays();
    let mut a = DMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = p.forward_raw(&e);
        e[j] = 0.0;
        for (i, v) in col.into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    a
}

/// Forward differences with zero rows on the last slice of each axis,
/// stacked per voxel as `[dx, dy, dz]`. Index is `x + nx (y + ny z)`.
pub fn dense_difference(dims: [usize; 3]) -> DMatrix<f64> {
    let [nx, ny, nz] = dims;
    let n = nx * ny * nz;
    let idx = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
    let mut d = DMatrix::zeros(3 * n, n);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let j = idx(x, y, z);
                let neighbours = [
                    (x + 1 < nx).then(|| idx(x + 1, y, z)),
                    (y + 1 < ny).then(|| idx(x, y + 1, z)),
                    (z + 1 < nz).then(|| idx(x, y, z + 1)),
                ];
                for (axis, nb) in neighbours.into_iter().enumerate() {
                    if let Some(k) = nb {
                        d[(3 * j + axis, k)] = 1.0;
                        d[(3 * j + axis, j)] = -1.0;
                    }
                }
            }
        }
    }
    d
}

/// `½‖Ax − b‖² + α Σ_j huber_τ(‖D_j x‖)` on dense matrices.
pub struct DenseObjective {
    pub a: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub b: DVector<f64>,
    pub alpha: f64,
    pub tau: f64,
}

impl DenseObjective {
    pub fn from_problem(p: &Problem) -> Self {
        DenseObjective {
            a: dense_matrix(p.projector()),
            d: dense_difference(p.projector().grid().dims),
            b: DVector::from_column_slice(p.data().values()),
            alpha: p.alpha(),
            tau: p.tv().tau,
        }
    }

    fn blocks(&self, x: &DVector<f64>) -> Vec<Vector3<f64>> {
        let dx = &self.d * x;
        (0..dx.len() / 3)
            .map(|j| Vector3::new(dx[3 * j], dx[3 * j + 1], dx[3 * j + 2]))
            .collect()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let r = &self.a * x - &self.b;
        let tv: f64 = self
            .blocks(x)
            .iter()
            .map(|g| {
                let t = g.norm();
                if t >= self.tau {
                    t - self.tau / 2.0
                } else {
                    t * t / (2.0 * self.tau)
                }
            })
            .sum();
        0.5 * r.norm_squared() + self.alpha * tv
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = &self.a * x - &self.b;
        let mut w = DVector::zeros(self.d.nrows());
        for (j, g) in self.blocks(x).iter().enumerate() {
            let s = g / g.norm().max(self.tau);
            w.fixed_rows_mut::<3>(3 * j).copy_from(&s);
        }
        self.a.transpose() * r + self.alpha * self.d.transpose() * w
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.d.nrows(), self.d.nrows());
        for (j, g) in self.blocks(x).iter().enumerate() {
            let t = g.norm();
            let block = if t < self.tau {
                Matrix3::identity() / self.tau
            } else {
                (Matrix3::identity() - g * g.transpose() / (t * t)) / t
            };
            h.fixed_view_mut::<3, 3>(3 * j, 3 * j).copy_from(&block);
        }
        self.a.transpose() * &self.a + self.alpha * self.d.transpose() * h * &self.d
    }

    /// Damped Newton with Armijo backtracking. Once the Armijo test fails at
    /// rounding level, full steps are taken while the gradient norm falls.
    pub fn newton(&self, x0: DVector<f64>) -> DVector<f64> {
        let mut x = x0;
        for _ in 0..200 {
            let g = self.gradient(&x);
            let step = self
                .hessian(&x)
                .cholesky()
                .expect("Hessian is positive definite")
                .solve(&g);
            let f = self.value(&x);
            let slope = g.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            while t >= 1e-10 {
                let trial = &x - t * &step;
                if self.value(&trial) <= f - 1e-4 * t * slope {
                    x = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                let trial = &x - &step;
                if self.gradient(&trial).norm() < g.norm() {
                    x = trial;
                } else {
                    break;
                }
            }
        }
        x
    }
}

/// The few- or many-view desk problem of the reconstruction experiments:
/// head phantom on a 16³ grid, 1% noise, α = 0.01, default τ.
pub fn desk_problem(n: usize, views: usize) -> (Problem, Volume) {
    let cfg = ExperimentConfig {
        dims: [n; 3],
        n_views: views,
        detector_rows: tvtomo::cli::default_detector_size([n; 3]),
        detector_cols: tvtomo::cli::default_detector_size([n; 3]),
        ..ExperimentConfig::default()
    };
    let (report, projector) = simulate(&cfg).expect("simulation");
    let tau = tvtomo::cli::default_tau(&report.noisy, projector.grid());
    let problem = Problem::new(projector, report.noisy, cfg.alpha, TvConfig::new(tau).unwrap()).unwrap();
    (problem, report.phantom)
}

pub fn random_volume(grid: VolumeGrid, seed: u64) -> Volume {
    Volume::from_values(grid, uniform(&mut rng(seed), grid.len(), 0.0, 1.0)).unwrap()
}

pub fn random_sinogram(p: &Projector, seed: u64) -> Sinogram {
    Sinogram::from_values(p.geometry(), uniform(&mut rng(seed), p.n_rays(), -1.0, 1.0)).unwrap()
}

/// A 4³ instance whose minimizer is strictly positive: smooth positive
/// truth, mild noise, moderate regularization.
pub fn small_interior_problem() -> Problem {
    let grid = VolumeGrid::cube(4).unwrap();
    let projector = Projector::new(tvtomo::make_geometry(7, 6, 6, 1.0).unwrap(), grid);
    let truth = uniform(&mut rng(7), grid.len(), 0.5, 1.5);
    let mut b = projector.forward_raw(&truth);
    for (bi, e) in b.iter_mut().zip(uniform(&mut rng(8), projector.n_rays(), -0.02, 0.02)) {
        *bi += e;
    }
    let data = Sinogram::from_values(projector.geometry(), b).unwrap();
    Problem::new(projector, data, 0.05, TvConfig::new(0.05).unwrap()).unwrap()
}

/// Upper bound on the Lipschitz constant of the objective gradient.
pub fn lipschitz_bound(dense: &DenseObjective) -> f64 {
    let ata = dense.a.transpose() * &dense.a;
    ata.symmetric_eigenvalues().max() + dense.alpha * tvtomo::regularizer::DIFFERENCE_NORM_SQ_BOUND / dense.tau
}

/// Newton minimizer of [`small_interior_problem`] and its objective value.
pub fn oracle_minimizer(p: &Problem) -> (DenseObjective, Vec<f64>, f64) {
    let dense = DenseObjective::from_problem(p);
    let x = dense.newton(DVector::from_element(p.projector().grid().len(), 1.0));
    let f = dense.value(&x);
    (dense, x.as_slice().to_vec(), f)
}
