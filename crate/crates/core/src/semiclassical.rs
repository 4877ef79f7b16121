//! Mean-field steady states of the driven dimer and their classification.
//!
//! For J > 0 the two coupled cubic steady-state equations reduce, after
//! eliminating alpha_L through the (undriven) right-mode equation, to a single
//! real polynomial in n_R = |alpha_R|^2 of degree up to 9. All roots come from
//! the companion matrix; physical candidates are reconstructed, Newton
//! polished on the full complex equations, deduplicated, and stability graded
//! by the drift-matrix spectrum. J = 0 is solved as the explicit single-mode
//! cubic (the right mode stays empty).

use crate::drift::{linearization, DriftError, DriftMatrix};
use crate::params::{equations_of_motion, DimerParams, Drive, ParamError};
use crate::poly::{ComplexPoly, RealPoly, RootError};
use crate::C64;
use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Roots with |Im| below this (times max(1, |root|)) count as real occupations.
pub const IM_TOL: f64 = 1e-7;
/// Stability margin as a fraction of the port coupling kappa: eigenvalues with
/// |Re| below stability_tol are marginal, not silently classified.
pub const STABILITY_TOL_FACTOR: f64 = 1e-6;
/// Relative amplitude distance under which two candidates are one solution.
pub const DEDUPE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Roots(#[from] RootError),
    #[error("candidate root n_R = {root:.6e} failed to polish: residual {residual:.3e} > {tol:.3e}")]
    NoConvergence { root: f64, residual: f64, tol: f64 },
    #[error(transparent)]
    Eigen(#[from] DriftError),
    #[error("steady state is unstable; shifted mode frequencies are undefined")]
    UnstableState,
}

/// One classical fixed point with its linearization and stability verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub alpha_l: C64,
    pub alpha_r: C64,
    /// Drift matrix at this fixed point.
    pub drift: DriftMatrix,
    /// Drift-matrix eigenvalues (rad/s).
    pub eigenvalues: [C64; 4],
    /// max Re(lambda) < -stability_tol.
    pub stable: bool,
    /// |max Re(lambda)| < stability_tol: too close to the margin to grade.
    pub marginal: bool,
    /// Equation-of-motion residual (rad/s * amplitude).
    pub residual: f64,
}

impl SteadyState {
    pub fn n_l(&self) -> f64 {
        self.alpha_l.norm_sqr()
    }

    pub fn n_r(&self) -> f64 {
        self.alpha_r.norm_sqr()
    }
}

/// Phase-diagram region letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Exactly one solution and it is stable.
    #[serde(rename = "S")]
    Monostable,
    /// Two or more solutions.
    #[serde(rename = "M")]
    Multistable,
    /// Exactly one solution and it is unstable (parametric instability).
    #[serde(rename = "P")]
    Unstable,
}

impl Region {
    pub fn letter(self) -> char {
        match self {
            Region::Monostable => 'S',
            Region::Multistable => 'M',
            Region::Unstable => 'P',
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    /// Signed drive detuning omega_p - omega_bar (rad/s).
    pub delta: f64,
    /// Incident photon flux (photons/s).
    pub flux: f64,
    pub solutions: Vec<SteadyState>,
    pub region: Region,
    /// True when the region rule was ambiguous: several solutions but none
    /// stable, or a marginal eigenvalue within the stability tolerance.
    pub flagged: bool,
}

impl PhasePoint {
    pub fn n_solutions(&self) -> usize {
        self.solutions.len()
    }

    pub fn n_stable(&self) -> usize {
        self.solutions.iter().filter(|s| s.stable).count()
    }
}

#[derive(Debug, Clone)]
pub struct PhaseDiagram {
    pub deltas: Vec<f64>,
    pub fluxes: Vec<f64>,
    /// Row-major: `points[i_delta * fluxes.len() + i_flux]`. Per-point errors
    /// are recorded in place; a grid scan never aborts.
    pub points: Vec<Result<PhasePoint, SolveError>>,
}

impl PhaseDiagram {
    pub fn at(&self, i_delta: usize, i_flux: usize) -> &Result<PhasePoint, SolveError> {
        &self.points[i_delta * self.fluxes.len() + i_flux]
    }

    /// Fraction of non-error cells carrying each region letter (S, M, P).
    pub fn region_fractions(&self) -> (f64, f64, f64) {
        let mut counts = [0usize; 3];
        let mut total = 0usize;
        for p in self.points.iter().flatten() {
            total += 1;
            match p.region {
                Region::Monostable => counts[0] += 1,
                Region::Multistable => counts[1] += 1,
                Region::Unstable => counts[2] += 1,
            }
        }
        let t = total.max(1) as f64;
        (counts[0] as f64 / t, counts[1] as f64 / t, counts[2] as f64 / t)
    }
}

/// Parameters with every rate divided by `scale` and the drive amplitude by
/// sqrt(scale); steady-state amplitudes are unchanged by this rescaling.
fn nondimensionalize(p: &DimerParams, drive: &Drive) -> (DimerParams, Drive, f64) {
    let scale = p
        .kappa_tot_l()
        .max(p.kappa_tot_r())
        .max(p.j)
        .max(p.detuning_l(drive.omega_p).abs())
        .max(p.detuning_r(drive.omega_p).abs())
        .max(f64::MIN_POSITIVE);
    let ph = DimerParams {
        omega_l: p.detuning_l(drive.omega_p) / scale,
        omega_r: p.detuning_r(drive.omega_p) / scale,
        u_l: p.u_l / scale,
        u_r: p.u_r / scale,
        j: p.j / scale,
        kappa: p.kappa / scale,
        kappa_int_l: p.kappa_int_l / scale,
        kappa_r: p.kappa_r / scale,
        kappa_int_r: p.kappa_int_r / scale,
    };
    // hatted frame: omega_p = 0, omega_x holds the detuning directly
    let dh = Drive::new(0.0, drive.alpha_in / scale.sqrt());
    (ph, dh, scale)
}

/// Real polynomial in n_R whose nonnegative real roots are the steady-state
/// right-mode occupations (J > 0 path). Exposed for oracle-style testing.
pub fn steady_state_polynomial(p: &DimerParams, drive: &Drive) -> RealPoly {
    let dl = p.detuning_l(drive.omega_p);
    let dr = p.detuning_r(drive.omega_p);
    let (kl, kr) = (p.kappa_tot_l(), p.kappa_tot_r());
    let i = C64::i();

    // alpha_L = c(n) alpha_R with c(n) = [-(dR + U_R n) + i kR/2]/J
    let c = ComplexPoly::new(vec![
        (C64::new(-dr, 0.5 * kr)) / p.j,
        C64::new(-p.u_r / p.j, 0.0),
    ]);
    // n_L(n) = |c|^2 n
    let n_l = c.abs_sqr().mul(&RealPoly::new(vec![0.0, 1.0]));
    // g(n) = dL + U_L n_L(n)
    let g = RealPoly::constant(dl).add(&n_l.scale(p.u_l));
    let g_c = ComplexPoly::new(g.c.iter().map(|&x| C64::new(x, 0.0)).collect());
    // F(n) = (i g + kL/2) c + iJ
    let f = g_c
        .scale(i)
        .add(&ComplexPoly::constant(C64::new(0.5 * kl, 0.0)))
        .mul(&c)
        .add(&ComplexPoly::constant(i * p.j));
    // P(n) = n |F|^2 - kappa * flux
    f.abs_sqr()
        .mul(&RealPoly::new(vec![0.0, 1.0]))
        .add(&RealPoly::constant(-p.kappa * drive.flux()))
}

/// Single-mode cubic for J = 0: n ((dL + U_L n)^2 + kappa_tot^2/4) - kappa*flux.
pub fn single_mode_cubic(p: &DimerParams, drive: &Drive) -> RealPoly {
    let dl = p.detuning_l(drive.omega_p);
    let kl = p.kappa_tot_l();
    let u = p.u_l;
    RealPoly::new(vec![
        -p.kappa * drive.flux(),
        dl * dl + 0.25 * kl * kl,
        2.0 * dl * u,
        u * u,
    ])
}

/// Damped Newton on the full coupled equations; returns polished amplitudes
/// and the final residual (in the supplied parameter units).
pub fn newton_refine(
    p: &DimerParams,
    drive: &Drive,
    mut al: C64,
    mut ar: C64,
    max_iter: usize,
) -> (C64, C64, f64) {
    let res_norm = |al: C64, ar: C64| -> f64 {
        let (fl, fr) = equations_of_motion(p, drive, al, ar);
        (fl.norm_sqr() + fr.norm_sqr()).sqrt()
    };
    let mut res = res_norm(al, ar);
    for _ in 0..max_iter {
        if res == 0.0 {
            break;
        }
        let (fl, fr) = equations_of_motion(p, drive, al, ar);
        let a: Matrix4<C64> = linearization(p, drive.omega_p, al, ar);
        let rhs = Vector4::new(-fl, -fl.conj(), -fr, -fr.conj());
        let step = match a.lu().solve(&rhs) {
            Some(s) => s,
            None => break,
        };
        // the conjugate slots mirror the primary ones by symmetry; use rows 0, 2
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..8 {
            let cand_l = al + lambda * step[0];
            let cand_r = ar + lambda * step[2];
            let cand_res = res_norm(cand_l, cand_r);
            if cand_res < res {
                al = cand_l;
                ar = cand_r;
                res = cand_res;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
        if res < 1e-15 * (al.norm() + ar.norm() + 1.0) {
            break;
        }
    }
    (al, ar, res)
}

fn grade_stability(
    p: &DimerParams,
    drive: &Drive,
    al: C64,
    ar: C64,
    residual: f64,
) -> Result<SteadyState, SolveError> {
    let drift = DriftMatrix {
        m: linearization(p, drive.omega_p, al, ar),
    };
    let eigenvalues = drift.eigenvalues()?;
    let max_re = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let tol = STABILITY_TOL_FACTOR * p.kappa;
    Ok(SteadyState {
        alpha_l: al,
        alpha_r: ar,
        drift,
        eigenvalues,
        stable: max_re < -tol,
        marginal: max_re.abs() < tol,
        residual,
    })
}

/// All classical steady states, sorted by total occupation.
pub fn solve_steady_states(p: &DimerParams, drive: &Drive) -> Result<Vec<SteadyState>, SolveError> {
    p.validate()?;
    let (ph, dh, scale) = nondimensionalize(p, drive);
    let poly = if p.j == 0.0 {
        single_mode_cubic(&ph, &dh)
    } else {
        steady_state_polynomial(&ph, &dh)
    };
    let roots = poly.all_roots()?;

    let mut candidates: Vec<(f64, C64, C64)> = Vec::new();
    for r in roots {
        if r.im.abs() > IM_TOL * r.re.abs().max(1.0) {
            continue;
        }
        let n = r.re;
        if n < -1e-9 * n.abs().max(1.0) {
            continue;
        }
        let n = n.max(0.0);
        let (al, ar) = if p.j == 0.0 {
            let den = C64::i() * (ph.omega_l + ph.u_l * n) + 0.5 * ph.kappa_tot_l();
            if den.norm() < 1e-300 {
                continue;
            }
            (ph.kappa.sqrt() * dh.alpha_in / den, C64::new(0.0, 0.0))
        } else {
            let dr = ph.omega_r;
            let cval = C64::new(-(dr + ph.u_r * n), 0.5 * ph.kappa_tot_r()) / ph.j;
            let g = ph.omega_l + ph.u_l * cval.norm_sqr() * n;
            let fval = (C64::i() * g + 0.5 * ph.kappa_tot_l()) * cval + C64::i() * ph.j;
            if fval.norm() < 1e-300 {
                if dh.flux() == 0.0 {
                    (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
                } else {
                    continue;
                }
            } else {
                let ar = ph.kappa.sqrt() * dh.alpha_in / fval;
                (cval * ar, ar)
            }
        };
        candidates.push((n, al, ar));
    }

    // polish in hatted units where all rates are O(1)
    let mut polished: Vec<(C64, C64, f64)> = Vec::new();
    for (n, al0, ar0) in candidates {
        let (al, ar, res) = newton_refine(&ph, &dh, al0, ar0, 60);
        let amp = al.norm() + ar.norm();
        let tol = 1e-9 * (1.0 + amp);
        if !(res <= tol) {
            return Err(SolveError::NoConvergence {
                root: n,
                residual: res,
                tol,
            });
        }
        polished.push((al, ar, res));
    }

    // dedupe: polynomial roots can collapse onto the same fixed point
    let mut unique: Vec<(C64, C64, f64)> = Vec::new();
    'outer: for (al, ar, res) in polished {
        for (bl, br, _) in &unique {
            let d = ((al - bl).norm_sqr() + (ar - br).norm_sqr()).sqrt();
            let s = 1.0 + (al.norm_sqr() + ar.norm_sqr()).sqrt();
            if d <= DEDUPE_TOL * s {
                continue 'outer;
            }
        }
        unique.push((al, ar, res));
    }

    let mut out = Vec::with_capacity(unique.len());
    for (al, ar, res_hat) in unique {
        out.push(grade_stability(p, drive, al, ar, res_hat * scale)?);
    }
    out.sort_by(|a, b| {
        let ka = a.n_l() + a.n_r();
        let kb = b.n_l() + b.n_r();
        (ka, a.n_l()).partial_cmp(&(kb, b.n_l())).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

/// Region verdict for one drive point.
pub fn classify_phase(p: &DimerParams, drive: &Drive) -> Result<PhasePoint, SolveError> {
    let solutions = solve_steady_states(p, drive)?;
    let n_stable = solutions.iter().filter(|s| s.stable).count();
    let any_marginal = solutions.iter().any(|s| s.marginal);
    let (region, mut flagged) = match solutions.len() {
        0 => (Region::Unstable, true), // cannot happen for kappa > 0; flag loudly
        1 => {
            if n_stable == 1 {
                (Region::Monostable, false)
            } else {
                (Region::Unstable, false)
            }
        }
        _ => (Region::Multistable, n_stable == 0),
    };
    flagged |= any_marginal;
    Ok(PhasePoint {
        delta: p.drive_detuning(drive.omega_p),
        flux: drive.flux(),
        solutions,
        region,
        flagged,
    })
}

/// Classify a (delta, flux) grid in parallel. `deltas` are signed drive
/// detunings (omega_p = omega_bar + delta), `fluxes` incident photon fluxes.
pub fn phase_diagram(p: &DimerParams, deltas: &[f64], fluxes: &[f64]) -> PhaseDiagram {
    let nf = fluxes.len();
    let points: Vec<Result<PhasePoint, SolveError>> = (0..deltas.len() * nf)
        .into_par_iter()
        .map(|idx| {
            let delta = deltas[idx / nf];
            let flux = fluxes[idx % nf];
            let drive = Drive::from_flux(p.omega_p_for_drive_detuning(delta), flux);
            classify_phase(p, &drive)
        })
        .collect();
    PhaseDiagram {
        deltas: deltas.to_vec(),
        fluxes: fluxes.to_vec(),
        points,
    }
}

/// Point on the exact dark-left-mode line alpha_L = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanishingLeftPoint {
    /// Signed drive detuning omega_p - omega_bar (rad/s).
    pub delta: f64,
    pub n_r: f64,
    /// Incident flux J^2 n_R / kappa at which the left mode goes exactly dark.
    pub flux: f64,
}

/// Exact alpha_L = 0 steady-state locus at signed drive detuning `delta`
/// (omega_p = omega_bar + delta). Requires a fully undamped right mode
/// (kappa_r = kappa_int_r = 0); returns None when the right-mode Kerr shift
/// cannot cancel its detuning (delta_R / U_R >= 0).
pub fn vanishing_left_locus(
    p: &DimerParams,
    delta: f64,
) -> Result<Option<VanishingLeftPoint>, SolveError> {
    p.validate()?;
    if p.kappa_tot_r() != 0.0 {
        return Err(SolveError::Params(ParamError::NegativeRate {
            name: "kappa_tot_r (must be 0 for the vanishing-left locus)",
            value: p.kappa_tot_r(),
        }));
    }
    let omega_p = p.omega_p_for_drive_detuning(delta);
    let dr = p.detuning_r(omega_p);
    if p.u_r == 0.0 {
        return Ok(None);
    }
    let n_r = -dr / p.u_r;
    if n_r <= 0.0 {
        return Ok(None);
    }
    Ok(Some(VanishingLeftPoint {
        delta,
        n_r,
        flux: p.j * p.j * n_r / p.kappa,
    }))
}

/// Drive-shifted mode frequencies seen from a steady state: omega_p + Im(lambda)
/// for the nonnegative-imaginary member of each conjugate eigenvalue pair,
/// ascending. Defined for stable (or at worst marginal) states only.
pub fn shifted_eigenfrequencies(ss: &SteadyState, omega_p: f64) -> Result<(f64, f64), SolveError> {
    if !ss.stable && !ss.marginal {
        return Err(SolveError::UnstableState);
    }
    let ev = ss.eigenvalues;
    // pair each eigenvalue with its conjugate partner
    let mut used = [false; 4];
    let mut picks: Vec<C64> = Vec::with_capacity(2);
    for i in 0..4 {
        if used[i] {
            continue;
        }
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for j in (i + 1)..4 {
            if used[j] {
                continue;
            }
            let d = (ev[j] - ev[i].conj()).norm();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        if best == usize::MAX {
            return Err(SolveError::Eigen(DriftError::EigenFailure));
        }
        used[i] = true;
        used[best] = true;
        picks.push(if ev[i].im >= 0.0 { ev[i] } else { ev[best] });
    }
    let mut freqs: Vec<f64> = picks.iter().map(|z| omega_p + z.im).collect();
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((freqs[0], freqs[1]))
}
