use crate::error::{Error, Result};
use crate::geometry::{Volume, VolumeGrid};

/// A solid ellipsoid in normalized coordinates `[-1, 1]³`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    /// Z-Y-X Euler angles in radians: the body frame is rotated by
    /// `R = Rz(a)·Ry(b)·Rx(c)`.
    pub rotation: [f64; 3],
    /// Added to every voxel whose center lies inside.
    pub intensity: f64,
}

impl Ellipsoid {
    pub fn sphere(center: [f64; 3], radius: f64, intensity: f64) -> Self {
        Ellipsoid {
            center,
            semi_axes: [radius; 3],
            rotation: [0.0; 3],
            intensity,
        }
    }

    /// `Σ (p'_i / a_i)²` with `p' = Rᵀ(p − c)`; the point is inside iff ≤ 1.
    pub fn quadratic_form(&self, p: [f64; 3]) -> f64 {
        let r = rotation_matrix(self.rotation);
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        (0..3)
            .map(|i| {
                let local = r[0][i] * d[0] + r[1][i] * d[1] + r[2][i] * d[2];
                (local / self.semi_axes[i]).powi(2)
            })
            .sum()
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        self.quadratic_form(p) <= 1.0
    }
}

fn rotation_matrix([a, b, c]: [f64; 3]) -> [[f64; 3]; 3] {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    [
        [ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc],
        [sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc],
        [-sb, cb * sc, cb * cc],
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub ellipsoids: Vec<Ellipsoid>,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ellipsoids.is_empty() {
            return Err(Error::invalid("phantom needs at least one ellipsoid"));
        }
        for e in &self.ellipsoids {
            if e.semi_axes.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                return Err(Error::invalid(format!("ellipsoid semi-axes must be positive: {e:?}")));
            }
        }
        Ok(())
    }

    /// Eight-ellipsoid head-like phantom: a 1.10 shell around 1.05 tissue
    /// containing small low- and high-contrast inclusions between 1.04 and
    /// 1.07. The inclusions do not overlap.
    pub fn head() -> Self {
        let e = |center, semi_axes, rotation, intensity| Ellipsoid {
            center,
            semi_axes,
            rotation,
            intensity,
        };
        PhantomSpec {
            ellipsoids: vec![
                e([0.0, 0.0, 0.0], [0.80, 0.92, 0.88], [0.0; 3], 1.10),
                e([0.0, 0.0, 0.0], [0.72, 0.84, 0.80], [0.0; 3], -0.05),
                e([0.0, 0.1, 0.0], [0.12, 0.25, 0.15], [0.3, 0.0, 0.0], -0.01),
                e([-0.3, -0.35, 0.1], [0.10, 0.10, 0.10], [0.0; 3], 0.02),
                e([0.3, -0.3, -0.15], [0.08, 0.12, 0.09], [0.0, 0.4, 0.0], 0.015),
                e([0.25, 0.4, 0.2], [0.09, 0.07, 0.10], [0.0, 0.0, 0.5], 0.01),
                e([-0.3, 0.35, -0.2], [0.06, 0.06, 0.06], [0.0; 3], -0.005),
                e([0.0, -0.55, 0.0], [0.05, 0.05, 0.05], [0.0; 3], 0.02),
            ],
        }
    }
}

/// Normalized coordinate of a voxel center along an axis of `n` voxels.
pub(crate) fn normalized_center(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64 * 2.0 - 1.0
}

/// Voxel value = sum of intensities of every ellipsoid containing the
/// voxel center.
pub fn generate_phantom(grid: VolumeGrid, spec: &PhantomSpec) -> Result<Volume> {
    spec.validate()?;
    let [nx, ny, nz] = grid.dims;
    let mut values = Vec::with_capacity(grid.len());
    for iz in 0..nz {
        let z = normalized_center(iz, nz);
        for iy in 0..ny {
            let y = normalized_center(iy, ny);
            for ix in 0..nx {
                let p = [normalized_center(ix, nx), y, z];
                values.push(
                    spec.ellipsoids
                        .iter()
                        .filter(|e| e.contains(p))
                        .map(|e| e.intensity)
                        .sum(),
                );
            }
        }
    }
    Volume::from_values(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn covering_ellipsoid_gives_constant_volume() {
        let spec = PhantomSpec {
            ellipsoids: vec![Ellipsoid::sphere([0.0; 3], 2.0, 1.05)],
        };
        let v = generate_phantom(VolumeGrid::cube(6).unwrap(), &spec).unwrap();
        assert!(v.values().iter().all(|&x| x == 1.05));
    }

    #[test]
    fn empty_or_degenerate_spec_is_rejected() {
        let grid = VolumeGrid::cube(4).unwrap();
        assert!(generate_phantom(grid, &PhantomSpec { ellipsoids: vec![] }).is_err());
        let flat = PhantomSpec {
            ellipsoids: vec![Ellipsoid {
                semi_axes: [1.0, 0.0, 1.0],
                ..Ellipsoid::sphere([0.0; 3], 1.0, 1.0)
            }],
        };
        assert!(generate_phantom(grid, &flat).is_err());
    }

    #[test]
    fn head_phantom_value_ranges() {
        let spec = PhantomSpec::head();
        let grid = VolumeGrid::cube(32).unwrap();
        let v = generate_phantom(grid, &spec).unwrap();
        let brain = &spec.ellipsoids[1];
        let mut interior = 0;
        for j in 0..grid.len() {
            let value = v.values()[j];
            assert!((-1e-12..=1.10 + 1e-12).contains(&value), "{value}");
            let c = grid.coords(j);
            let p = [0, 1, 2].map(|a| normalized_center(c[a], 32));
            if brain.contains(p) {
                interior += 1;
                assert!((1.04 - 1e-12..=1.07 + 1e-12).contains(&value), "{value} at {c:?}");
            }
        }
        assert!(interior > 1000);
        // Every inclusion is resolved at this size.
        let mut distinct: Vec<i64> = v.values().iter().map(|x| (x * 1e6).round() as i64).collect();
        distinct.sort();
        distinct.dedup();
        assert!(distinct.len() >= 7, "{distinct:?}");
    }

    #[test]
    fn membership_matches_direct_quadratic_form() {
        let spec = PhantomSpec::head();
        let n = 20;
        let grid = VolumeGrid::cube(n).unwrap();
        let v = generate_phantom(grid, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let c = [rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)];
            let p = c.map(|i| (2 * i + 1) as f64 / n as f64 - 1.0);
            let mut expected = 0.0;
            for e in &spec.ellipsoids {
                // Inverse rotation written out per angle, applied z, then y, then x.
                let mut q = [p[0] - e.center[0], p[1] - e.center[1], p[2] - e.center[2]];
                let (s, co) = (-e.rotation[0]).sin_cos();
                q = [co * q[0] - s * q[1], s * q[0] + co * q[1], q[2]];
                let (s, co) = (-e.rotation[1]).sin_cos();
                q = [co * q[0] + s * q[2], q[1], -s * q[0] + co * q[2]];
                let (s, co) = (-e.rotation[2]).sin_cos();
                q = [q[0], co * q[1] - s * q[2], s * q[1] + co * q[2]];
                let form: f64 = (0..3).map(|i| (q[i] / e.semi_axes[i]).powi(2)).sum();
                if form <= 1.0 {
                    expected += e.intensity;
                }
            }
            assert!((v.get(c[0], c[1], c[2]) - expected).abs() < 1e-12);
        }
    }
}
