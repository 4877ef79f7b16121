//! Linearized fluctuation dynamics around a classical working point.
//!
//! Fluctuations d_X = a_X - alpha_X evolve as dv/dt = A v + noise with
//! v = (d_L, d_L^dag, d_R, d_R^dag). A is the (Bogoliubov) drift matrix; its
//! eigenvalue real parts decide stability and its imaginary parts are the
//! drive-shifted mode detunings from the pump.

use crate::params::{residual, DimerParams, Drive};
use crate::C64;
use nalgebra::{DMatrix, Matrix4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriftError {
    #[error("amplitudes are not a steady state: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotSteady { residual: f64, tol: f64 },
    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,
}

/// Drift matrix in the (d_L, d_L^dag, d_R, d_R^dag) basis.
///
/// Rows obey the particle/hole conjugation symmetry
/// A[2i+1][2j+1] = conj(A[2i][2j]), A[2i+1][2j] = conj(A[2i][2j+1]); the
/// spectrum is therefore closed under complex conjugation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftMatrix {
    pub m: Matrix4<C64>,
}

/// Linearization of the equations of motion at arbitrary amplitudes (not
/// necessarily steady). This doubles as the Newton Jacobian for root
/// polishing.
pub fn linearization(p: &DimerParams, omega_p: f64, al: C64, ar: C64) -> Matrix4<C64> {
    let i = C64::i();
    let dl = p.detuning_l(omega_p);
    let dr = p.detuning_r(omega_p);
    let nl = al.norm_sqr();
    let nr = ar.norm_sqr();
    let gl = -i * (dl + 2.0 * p.u_l * nl) - C64::new(0.5 * p.kappa_tot_l(), 0.0);
    let gr = -i * (dr + 2.0 * p.u_r * nr) - C64::new(0.5 * p.kappa_tot_r(), 0.0);
    let sl = -i * p.u_l * al * al;
    let sr = -i * p.u_r * ar * ar;
    let jj = -i * p.j;
    let z = C64::new(0.0, 0.0);
    Matrix4::from_rows(&[
        nalgebra::RowVector4::new(gl, sl, jj, z),
        nalgebra::RowVector4::new(sl.conj(), gl.conj(), z, jj.conj()),
        nalgebra::RowVector4::new(jj, z, gr, sr),
        nalgebra::RowVector4::new(z, jj.conj(), sr.conj(), gr.conj()),
    ])
}

/// Residual tolerance under which amplitudes count as steady: scales with the
/// largest rate in the problem and the amplitude magnitude.
pub fn steady_tolerance(p: &DimerParams, drive: &Drive, al: C64, ar: C64) -> f64 {
    let nl = al.norm_sqr();
    let nr = ar.norm_sqr();
    let rate = p
        .kappa_tot_l()
        .max(p.kappa_tot_r())
        .max(p.detuning_l(drive.omega_p).abs())
        .max(p.detuning_r(drive.omega_p).abs())
        .max(p.j)
        .max((p.u_l * nl).abs())
        .max((p.u_r * nr).abs());
    let amp = (nl + nr).sqrt().max(1e-12) + p.kappa.sqrt() * drive.alpha_in.norm() / rate.max(f64::MIN_POSITIVE);
    1e-9 * rate * amp
}

/// Drift matrix at a steady state. Rejects amplitudes whose equation-of-motion
/// residual is above [`steady_tolerance`].
pub fn drift_matrix(p: &DimerParams, drive: &Drive, al: C64, ar: C64) -> Result<DriftMatrix, DriftError> {
    let res = residual(p, drive, al, ar);
    let tol = steady_tolerance(p, drive, al, ar);
    if !(res <= tol) {
        return Err(DriftError::NotSteady { residual: res, tol });
    }
    Ok(DriftMatrix {
        m: linearization(p, drive.omega_p, al, ar),
    })
}

impl DriftMatrix {
    /// All four eigenvalues. Primary path is a complex Schur decomposition of
    /// the scaled matrix; falls back to the real 8x8 embedding
    /// [[Re A, -Im A], [Im A, Re A]] whose spectrum is spec(A) u conj(spec(A))
    /// (each drift eigenvalue twice, by the conjugation symmetry).
    pub fn eigenvalues(&self) -> Result<[C64; 4], DriftError> {
        let scale = self
            .m
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let scaled = DMatrix::from_fn(4, 4, |i, j| self.m[(i, j)] / scale);
        if let Some(schur) = nalgebra::linalg::Schur::try_new(scaled.clone(), 1e-14, 100_000) {
            if let Some(ev) = schur.eigenvalues() {
                let mut out = [C64::new(0.0, 0.0); 4];
                for (k, v) in ev.iter().enumerate() {
                    out[k] = v * scale;
                }
                if out.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                    return Ok(out);
                }
            }
        }
        self.eigenvalues_via_embedding(scale)
    }

    fn eigenvalues_via_embedding(&self, scale: f64) -> Result<[C64; 4], DriftError> {
        let mut m8 = DMatrix::<f64>::zeros(8, 8);
        for i in 0..4 {
            for j in 0..4 {
                let z = self.m[(i, j)] / scale;
                m8[(i, j)] = z.re;
                m8[(i, j + 4)] = -z.im;
                m8[(i + 4, j)] = z.im;
                m8[(i + 4, j + 4)] = z.re;
            }
        }
        let ev = m8.complex_eigenvalues();
        if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(DriftError::EigenFailure);
        }
        // Every drift eigenvalue appears twice among the eight; sort and take
        // every second element of each near-equal pair.
        let mut vals: Vec<C64> = ev.iter().copied().collect();
        vals.sort_by(|a, b| {
            (a.re, a.im)
                .partial_cmp(&(b.re, b.im))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut out = Vec::with_capacity(4);
        let mut used = vec![false; 8];
        for i in 0..8 {
            if used[i] {
                continue;
            }
            // find the closest unused partner
            let mut best = None;
            let mut best_d = f64::INFINITY;
            for j in (i + 1)..8 {
                if used[j] {
                    continue;
                }
                let d = (vals[i] - vals[j]).norm();
                if d < best_d {
                    best_d = d;
                    best = Some(j);
                }
            }
            let j = best.ok_or(DriftError::EigenFailure)?;
            used[i] = true;
            used[j] = true;
            out.push(0.5 * (vals[i] + vals[j]) * scale);
        }
        Ok([out[0], out[1], out[2], out[3]])
    }

    /// Largest eigenvalue real part; < 0 means linearly stable.
    pub fn max_re(&self) -> Result<f64, DriftError> {
        Ok(self
            .eigenvalues()?
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Max deviation from the particle/hole conjugation symmetry (exactly 0
    /// for matrices built by [`linearization`]).
    pub fn conjugation_defect(&self) -> f64 {
        let m = &self.m;
        let mut worst = 0.0f64;
        for bi in 0..2 {
            for bj in 0..2 {
                let (i, j) = (2 * bi, 2 * bj);
                worst = worst.max((m[(i + 1, j + 1)] - m[(i, j)].conj()).norm());
                worst = worst.max((m[(i + 1, j)] - m[(i, j + 1)].conj()).norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::equations_of_motion;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_params(rng: &mut impl Rng) -> (DimerParams, Drive, C64, C64) {
        let p = DimerParams {
            omega_l: rng.random_range(5.0..9.0),
            omega_r: rng.random_range(5.0..9.0),
            u_l: rng.random_range(-0.5..0.5),
            u_r: rng.random_range(-0.5..0.5),
            j: rng.random_range(0.0..1.0),
            kappa: rng.random_range(0.1..1.0),
            kappa_int_l: rng.random_range(0.0..0.3),
            kappa_r: rng.random_range(0.0..0.5),
            kappa_int_r: rng.random_range(0.0..0.3),
        };
        let d = Drive::new(rng.random_range(5.0..9.0), c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let al = c(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        let ar = c(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        (p, d, al, ar)
    }

    #[test]
    fn conjugation_symmetry_exact_on_random_points() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (p, d, al, ar) = random_params(&mut rng);
            let a = DriftMatrix {
                m: linearization(&p, d.omega_p, al, ar),
            };
            assert_eq!(a.conjugation_defect(), 0.0);
        }
    }

    #[test]
    fn linearization_is_jacobian_of_flow() {
        // finite-difference directional derivative of the EOM field matches A*v
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (p, d, al, ar) = random_params(&mut rng);
            let a = linearization(&p, d.omega_p, al, ar);
            let h = 1e-6;
            let (el, er) = (c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)), c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let (fl_p, fr_p) = equations_of_motion(&p, &d, al + h * el, ar + h * er);
            let (fl_m, fr_m) = equations_of_motion(&p, &d, al - h * el, ar - h * er);
            let num_l = (fl_p - fl_m) / (2.0 * h);
            let num_r = (fr_p - fr_m) / (2.0 * h);
            // v = (el, conj el, er, conj er): rows 0 and 2 give the derivative
            let lin_l = a[(0, 0)] * el + a[(0, 1)] * el.conj() + a[(0, 2)] * er + a[(0, 3)] * er.conj();
            let lin_r = a[(2, 0)] * el + a[(2, 1)] * el.conj() + a[(2, 2)] * er + a[(2, 3)] * er.conj();
            assert!((num_l - lin_l).norm() < 1e-7, "{num_l} vs {lin_l}");
            assert!((num_r - lin_r).norm() < 1e-7, "{num_r} vs {lin_r}");
        }
    }

    #[test]
    fn vacuum_eigenvalues_match_linear_closed_form() {
        // U drops out at alpha = 0; the (d_L, d_R) block is the 2x2 matrix
        // [[-i dL - kL/2, -iJ], [-iJ, -i dR - kR/2]] and the spectrum is that
        // block's plus its conjugate.
        let p = DimerParams {
            omega_l: 7.0,
            omega_r: 7.4,
            u_l: -0.3,
            u_r: -0.2,
            j: 0.25,
            kappa: 0.29,
            kappa_int_l: 0.03,
            kappa_r: 0.11,
            kappa_int_r: 0.01,
        };
        let d = Drive::from_flux(6.8, 0.0);
        let a = drift_matrix(&p, &d, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        let mut got: Vec<C64> = a.eigenvalues().unwrap().to_vec();

        let i = C64::i();
        let m11 = -i * p.detuning_l(d.omega_p) - 0.5 * p.kappa_tot_l();
        let m22 = -i * p.detuning_r(d.omega_p) - 0.5 * p.kappa_tot_r();
        let tr = m11 + m22;
        let det = m11 * m22 - (-i * p.j) * (-i * p.j);
        let disc = (tr * tr - 4.0 * det).sqrt();
        let l1 = 0.5 * (tr + disc);
        let l2 = 0.5 * (tr - disc);
        let mut expect = vec![l1, l2, l1.conj(), l2.conj()];

        let key = |z: &C64| (z.im, z.re);
        got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        expect.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).norm() < 1e-10, "{g} vs {e}");
        }
    }

    #[test]
    fn eigenvalue_paths_agree() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);
        for _ in 0..100 {
            let (p, d, al, ar) = random_params(&mut rng);
            let a = DriftMatrix {
                m: linearization(&p, d.omega_p, al, ar),
            };
            let scale = a.m.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            let mut ev1 = a.eigenvalues().unwrap().to_vec();
            let mut ev2 = a.eigenvalues_via_embedding(scale.max(1e-300)).unwrap().to_vec();
            let key = |z: &C64| (z.im, z.re);
            ev1.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
            ev2.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
            for (x, y) in ev1.iter().zip(&ev2) {
                assert!((x - y).norm() < 1e-9 * scale.max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn spectrum_closed_under_conjugation() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        for _ in 0..100 {
            let (p, d, al, ar) = random_params(&mut rng);
            let a = DriftMatrix {
                m: linearization(&p, d.omega_p, al, ar),
            };
            let ev = a.eigenvalues().unwrap();
            let scale = ev.iter().map(|z| z.norm()).fold(1e-12f64, f64::max);
            for v in &ev {
                let best = ev
                    .iter()
                    .map(|w| (w - v.conj()).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(best < 1e-8 * scale, "conjugate of {v} missing from {ev:?}");
            }
        }
    }

    #[test]
    fn rejects_non_steady_amplitudes() {
        let p = DimerParams::symmetric(7.0, -0.1, 0.25, 0.3);
        let d = Drive::from_flux(6.9, 1.0);
        let err = drift_matrix(&p, &d, c(0.0, 0.0), c(0.0, 0.0)).unwrap_err();
        assert!(matches!(err, DriftError::NotSteady { .. }));
    }

    #[test]
    fn characteristic_polynomial_residual_small() {
        // det(A - lambda I) ~ 0 at each reported eigenvalue
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(41);
        for _ in 0..50 {
            let (p, d, al, ar) = random_params(&mut rng);
            let a = linearization(&p, d.omega_p, al, ar);
            let dm = DriftMatrix { m: a };
            let scale = a.iter().map(|z| z.norm()).fold(1e-12f64, f64::max);
            for lam in dm.eigenvalues().unwrap() {
                let shifted = a - Matrix4::from_diagonal_element(lam);
                let det = shifted.determinant();
                assert!(det.norm() < 1e-9 * scale.powi(4), "det {det} at {lam}");
            }
        }
    }

    #[test]
    fn undriven_symmetric_dimer_mode_detunings() {
        let p = DimerParams::symmetric(7.2, -0.3, 0.25, 0.29);
        let d = Drive::from_flux(6.8, 0.0);
        let a = drift_matrix(&p, &d, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        let ev = a.eigenvalues().unwrap();
        // modes sit at omega_bar +/- J; pump is below both, so the positive
        // imaginary parts are detuning +/- J
        let mut ims: Vec<f64> = ev.iter().map(|z| z.im).filter(|&x| x > 0.0).collect();
        ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(ims[0], (7.2 - 0.25) - 6.8, max_relative = 1e-10);
        assert_relative_eq!(ims[1], (7.2 + 0.25) - 6.8, max_relative = 1e-10);
    }
}
