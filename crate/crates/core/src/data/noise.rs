use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::Sinogram;
use crate::vecops::norm;

/// Generator used for synthetic noise, recorded in file headers.
pub const RNG_ID: &str = "chacha20/seed_from_u64+standard-normal-ziggurat";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Target `‖e‖₂ / ‖s‖₂`.
    pub relative_level: f64,
    pub seed: u64,
}

pub fn standard_normal_samples(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Adds i.i.d. Gaussian noise rescaled so that `‖e‖₂ = relative_level·‖s‖₂`.
pub fn add_noise(s: &Sinogram, spec: &NoiseSpec) -> Result<Sinogram> {
    if !(spec.relative_level >= 0.0 && spec.relative_level.is_finite()) {
        return Err(Error::invalid(format!(
            "relative noise level must be nonnegative, got {}",
            spec.relative_level
        )));
    }
    if spec.relative_level == 0.0 {
        return Ok(s.clone());
    }
    let signal = norm(s.values());
    if signal == 0.0 {
        return Err(Error::invalid("cannot scale relative noise to an all-zero sinogram"));
    }
    let raw = standard_normal_samples(spec.seed, s.len());
    let scale = spec.relative_level * signal / norm(&raw);
    let mut out = s.clone();
    for (o, e) in out.values_mut().iter_mut().zip(&raw) {
        *o += scale * e;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_geometry;
    use crate::vecops::sub;

    fn signal() -> Sinogram {
        let g = make_geometry(3, 8, 9, 1.0).unwrap();
        let values = (0..g.sinogram_shape().iter().product::<usize>())
            .map(|i| 1.0 + (i as f64 * 0.37).sin())
            .collect();
        Sinogram::from_values(&g, values).unwrap()
    }

    #[test]
    fn zero_level_is_identity() {
        let s = signal();
        let out = add_noise(&s, &NoiseSpec { relative_level: 0.0, seed: 3 }).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn relative_norm_is_exact() {
        let s = signal();
        let out = add_noise(&s, &NoiseSpec { relative_level: 0.01, seed: 3 }).unwrap();
        let ratio = norm(&sub(out.values(), s.values())) / norm(s.values());
        assert!((ratio - 0.01).abs() <= 1e-12, "{ratio}");
    }

    #[test]
    fn same_seed_same_noise() {
        let s = signal();
        let spec = NoiseSpec { relative_level: 0.05, seed: 99 };
        assert_eq!(add_noise(&s, &spec).unwrap(), add_noise(&s, &spec).unwrap());
        let other = add_noise(&s, &NoiseSpec { seed: 100, ..spec }).unwrap();
        assert_ne!(add_noise(&s, &spec).unwrap(), other);
    }

    #[test]
    fn rejects_zero_signal_and_negative_level() {
        let g = make_geometry(2, 3, 3, 1.0).unwrap();
        let zero = Sinogram::zeros(&g);
        assert!(add_noise(&zero, &NoiseSpec { relative_level: 0.01, seed: 1 }).is_err());
        assert!(add_noise(&zero, &NoiseSpec { relative_level: 0.0, seed: 1 }).is_ok());
        assert!(add_noise(&signal(), &NoiseSpec { relative_level: -0.1, seed: 1 }).is_err());
    }

    #[test]
    fn samples_look_gaussian() {
        let x = standard_normal_samples(2024, 100_000);
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        let skew = m3 / m2.powf(1.5);
        let excess_kurtosis = m4 / (m2 * m2) - 3.0;
        assert!(mean.abs() < 0.02);
        assert!((m2 - 1.0).abs() < 0.02);
        assert!(skew.abs() < 0.1, "skew {skew}");
        assert!(excess_kurtosis.abs() < 0.2, "kurtosis {excess_kurtosis}");
    }
}
