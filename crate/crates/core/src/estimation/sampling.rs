//! Synthetic heterodyne records: complex sample pairs (z_plus, z_minus) drawn
//! from a Gaussian whose covariance is the physical output covariance after
//! detection loss and the half-photon heterodyne penalty.

use super::EstimationError;
use crate::fluctuations::symplectic_eigenvalues;
use crate::C64;
use nalgebra::{Cholesky, Matrix4, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Filtered signal/idler heterodyne amplitudes plus the settings that
/// produced them. With vacuum input and eta = 1, <|z|^2> = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSamples {
    pub z_plus: Vec<C64>,
    pub z_minus: Vec<C64>,
    pub eta: f64,
    pub seed: u64,
}

impl QuadratureSamples {
    pub fn len(&self) -> usize {
        self.z_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_plus.is_empty()
    }

    /// Covariance of (X+, P+, X-, P-) reconstructed from the samples, with
    /// X + iP = sqrt(2) z.
    pub fn sample_covariance(&self) -> Matrix4<f64> {
        let n = self.len() as f64;
        let mut mean = Vector4::<f64>::zeros();
        let vecs: Vec<Vector4<f64>> = self
            .z_plus
            .iter()
            .zip(&self.z_minus)
            .map(|(zp, zm)| {
                let s = 2f64.sqrt();
                Vector4::new(s * zp.re, s * zp.im, s * zm.re, s * zm.im)
            })
            .collect();
        for v in &vecs {
            mean += v / n;
        }
        let mut cov = Matrix4::<f64>::zeros();
        for v in &vecs {
            let d = v - mean;
            cov += d * d.transpose() / n;
        }
        cov
    }

    /// Columns: re_zp, im_zp, re_zm, im_zm.
    pub fn write_csv(&self, path: &Path) -> Result<(), EstimationError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| EstimationError::Csv(e.to_string()))?;
        w.write_record(["re_zp", "im_zp", "re_zm", "im_zm"])
            .map_err(|e| EstimationError::Csv(e.to_string()))?;
        for (zp, zm) in self.z_plus.iter().zip(&self.z_minus) {
            w.write_record(&[
                format!("{:.17e}", zp.re),
                format!("{:.17e}", zp.im),
                format!("{:.17e}", zm.re),
                format!("{:.17e}", zm.im),
            ])
            .map_err(|e| EstimationError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| EstimationError::Csv(e.to_string()))?;
        Ok(())
    }

    /// Reads the schema written by `write_csv`; eta and seed are not stored
    /// in the CSV and default to (1, 0).
    pub fn read_csv(path: &Path) -> Result<Self, EstimationError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| EstimationError::Csv(e.to_string()))?;
        let headers = r
            .headers()
            .map_err(|e| EstimationError::Csv(e.to_string()))?
            .clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols != ["re_zp", "im_zp", "re_zm", "im_zm"] {
            return Err(EstimationError::Csv(format!(
                "unrecognized header {cols:?}"
            )));
        }
        let mut z_plus = Vec::new();
        let mut z_minus = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| EstimationError::Csv(e.to_string()))?;
            let field = |i: usize| -> Result<f64, EstimationError> {
                rec.get(i)
                    .ok_or_else(|| EstimationError::Csv("short record".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| EstimationError::Csv(e.to_string()))
            };
            z_plus.push(C64::new(field(0)?, field(1)?));
            z_minus.push(C64::new(field(2)?, field(3)?));
        }
        Ok(QuadratureSamples {
            z_plus,
            z_minus,
            eta: 1.0,
            seed: 0,
        })
    }
}

/// Draws N heterodyne sample pairs from the Gaussian with covariance
/// eta*cov + (1-eta)/2*I + 1/2*I; the last term is the vacuum penalty of
/// detecting both quadratures at once. Deterministic given the seed.
pub fn sample_gaussian_output(
    cov: &Matrix4<f64>,
    eta: f64,
    n: usize,
    seed: u64,
) -> Result<QuadratureSamples, EstimationError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(EstimationError::InvalidEfficiency { eta });
    }
    let [v1, v2] = symplectic_eigenvalues(cov);
    let min_nu = v1.min(v2);
    if !(min_nu >= 0.5 - 1e-9) {
        return Err(EstimationError::UnphysicalCovariance {
            min_symplectic: min_nu,
        });
    }
    let sigma = eta * cov + Matrix4::identity() * ((1.0 - eta) * 0.5 + 0.5);
    let chol = Cholesky::new(sigma).ok_or(EstimationError::UnphysicalCovariance {
        min_symplectic: min_nu,
    })?;
    let l = chol.l();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut z_plus = Vec::with_capacity(n);
    let mut z_minus = Vec::with_capacity(n);
    let inv_sqrt2 = 1.0 / 2f64.sqrt();
    for _ in 0..n {
        let g = Vector4::new(
            normal.sample(&mut rng),
            normal.sample(&mut rng),
            normal.sample(&mut rng),
            normal.sample(&mut rng),
        );
        let x = l * g;
        z_plus.push(C64::new(x[0], x[1]) * inv_sqrt2);
        z_minus.push(C64::new(x[2], x[3]) * inv_sqrt2);
    }
    Ok(QuadratureSamples {
        z_plus,
        z_minus,
        eta,
        seed,
    })
}

/// Symmetric-ordered two-mode squeezed covariance with squeezing parameter r:
/// pure, symplectic eigenvalues exactly 1/2.
pub fn two_mode_squeezed_covariance(r: f64) -> Matrix4<f64> {
    let ch = 0.5 * (2.0 * r).cosh();
    let sh = 0.5 * (2.0 * r).sinh();
    let mut m = Matrix4::identity() * ch;
    m[(0, 2)] = sh;
    m[(2, 0)] = sh;
    m[(1, 3)] = -sh;
    m[(3, 1)] = -sh;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vacuum_with_unit_efficiency_gives_unit_covariance() {
        let cov = Matrix4::identity() * 0.5;
        let s = sample_gaussian_output(&cov, 1.0, 100_000, 7).unwrap();
        let sc = s.sample_covariance();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (sc[(i, j)] - want).abs() < 0.03,
                    "cov[{i}][{j}] = {}",
                    sc[(i, j)]
                );
            }
        }
    }

    #[test]
    fn squeezed_covariance_maps_through_the_detection_chain() {
        let cov = two_mode_squeezed_covariance(0.8);
        let [v1, v2] = symplectic_eigenvalues(&cov);
        assert_relative_eq!(v1, 0.5, max_relative = 1e-10);
        assert_relative_eq!(v2, 0.5, max_relative = 1e-10);
        let eta = 0.75;
        let s = sample_gaussian_output(&cov, eta, 200_000, 12).unwrap();
        let sc = s.sample_covariance();
        let target = eta * cov + Matrix4::identity() * ((1.0 - eta) * 0.5 + 0.5);
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (sc[(i, j)] - target[(i, j)]).abs() < 0.05,
                    "cov[{i}][{j}] = {} vs {}",
                    sc[(i, j)],
                    target[(i, j)]
                );
            }
        }
    }

    #[test]
    fn same_seed_reproduces_samples_exactly() {
        let cov = two_mode_squeezed_covariance(0.5);
        let a = sample_gaussian_output(&cov, 0.9, 1000, 99).unwrap();
        let b = sample_gaussian_output(&cov, 0.9, 1000, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_gaussian_output(&cov, 0.9, 1000, 100).unwrap();
        assert_ne!(a.z_plus[0], c.z_plus[0]);
    }

    #[test]
    fn unphysical_covariance_is_rejected() {
        let cov = Matrix4::identity() * 0.3;
        assert!(matches!(
            sample_gaussian_output(&cov, 1.0, 10, 0),
            Err(EstimationError::UnphysicalCovariance { .. })
        ));
    }

    #[test]
    fn efficiency_out_of_range_is_rejected() {
        let cov = Matrix4::identity() * 0.5;
        for eta in [0.0, -0.2, 1.5] {
            assert!(matches!(
                sample_gaussian_output(&cov, eta, 10, 0),
                Err(EstimationError::InvalidEfficiency { .. })
            ));
        }
    }

    #[test]
    fn csv_roundtrip_preserves_samples() {
        let cov = two_mode_squeezed_covariance(0.4);
        let s = sample_gaussian_output(&cov, 1.0, 64, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        s.write_csv(&path).unwrap();
        let back = QuadratureSamples::read_csv(&path).unwrap();
        assert_eq!(back.len(), s.len());
        for k in 0..s.len() {
            assert_relative_eq!(back.z_plus[k].re, s.z_plus[k].re, max_relative = 1e-15);
            assert_relative_eq!(back.z_minus[k].im, s.z_minus[k].im, max_relative = 1e-15);
        }
    }
}
