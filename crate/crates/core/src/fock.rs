//! Truncated two-mode Fock-space steady state of the driven, damped dimer,
//! obtained by a direct sparse solve of the vectorized master equation with
//! the trace constraint replacing one redundant row. Ground truth for the
//! mean-field solver at small photon number.
//!
//! Basis order: |nl, nr> at flat index nl*(n_max_r+1) + nr; density matrices
//! are vectorized column-major, rho_ij at i + N*j.

use crate::params::{DimerParams, Drive, ParamError};
use crate::C64;
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_STATES: usize = 400;
const TOP_LAYER_LIMIT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FockError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("truncated space has {states} states; the cap is {MAX_STATES}")]
    DimensionTooLarge { states: usize },
    #[error("highest Fock layer holds population {population:.3e} (limit {TOP_LAYER_LIMIT:.0e}); raise n_max")]
    TruncationError { population: f64 },
    #[error("steady-state solve failed: {0}")]
    SolveFailure(String),
    #[error("density matrix has eigenvalue {min_eigenvalue:.3e} below -1e-10")]
    NotPositive { min_eigenvalue: f64 },
    #[error("reflection is undefined at zero drive amplitude")]
    ZeroDrive,
}

/// Truncation levels per mode; the state count (n_max_l+1)(n_max_r+1) is
/// capped at 400.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockConfig {
    pub n_max_l: usize,
    pub n_max_r: usize,
}

impl Default for FockConfig {
    fn default() -> Self {
        FockConfig {
            n_max_l: 12,
            n_max_r: 12,
        }
    }
}

impl FockConfig {
    pub fn states(&self) -> usize {
        (self.n_max_l + 1) * (self.n_max_r + 1)
    }
}

/// Steady-state density matrix plus the derived expectations and solver
/// diagnostics. Diagnostics refer to the raw solver output; the stored
/// matrix is hermitized and renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSteadyState {
    pub cfg: FockConfig,
    pub rho: DMatrix<C64>,
    pub a_l: C64,
    pub a_r: C64,
    pub n_l: f64,
    pub n_r: f64,
    /// <a_L a_R>, the anomalous pair amplitude.
    pub pair: C64,
    /// Population of the states with nl = n_max_l or nr = n_max_r.
    pub top_layer_population: f64,
    pub trace_error: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

struct Basis {
    n_max_r: usize,
}

impl Basis {
    fn idx(&self, nl: usize, nr: usize) -> usize {
        nl * (self.n_max_r + 1) + nr
    }
}

/// Solves L(rho) = 0 with tr rho = 1 in the pump frame. Errors if the top
/// Fock layer carries weight, the linear solve degrades, or positivity is
/// violated beyond roundoff.
pub fn lindblad_steady_state(
    p: &DimerParams,
    drive: &Drive,
    cfg: &FockConfig,
) -> Result<QuantumSteadyState, FockError> {
    p.validate()?;
    let states = cfg.states();
    if states > MAX_STATES {
        return Err(FockError::DimensionTooLarge { states });
    }
    let basis = Basis {
        n_max_r: cfg.n_max_r,
    };
    let n = states;
    let nn = n * n;
    let dl = p.detuning_l(drive.omega_p);
    let dr = p.detuning_r(drive.omega_p);
    let sqrt_kappa = p.kappa.sqrt();

    // Hamiltonian as a sparse entry list (row, col, value)
    let mut h: Vec<(usize, usize, C64)> = Vec::new();
    for nl in 0..=cfg.n_max_l {
        for nr in 0..=cfg.n_max_r {
            let s = basis.idx(nl, nr);
            let diag = dl * nl as f64
                + dr * nr as f64
                + 0.5 * p.u_l * (nl * nl.saturating_sub(1)) as f64
                + 0.5 * p.u_r * (nr * nr.saturating_sub(1)) as f64;
            if diag != 0.0 {
                h.push((s, s, C64::new(diag, 0.0)));
            }
            // J (a_L a_R^dag + a_R a_L^dag)
            if nl >= 1 && nr < cfg.n_max_r {
                let amp = p.j * ((nl * (nr + 1)) as f64).sqrt();
                if amp != 0.0 {
                    h.push((basis.idx(nl - 1, nr + 1), s, C64::new(amp, 0.0)));
                }
            }
            if nr >= 1 && nl < cfg.n_max_l {
                let amp = p.j * ((nr * (nl + 1)) as f64).sqrt();
                if amp != 0.0 {
                    h.push((basis.idx(nl + 1, nr - 1), s, C64::new(amp, 0.0)));
                }
            }
            // i sqrt(kappa) (alpha_in a_L^dag - conj(alpha_in) a_L)
            if nl < cfg.n_max_l {
                let amp = C64::i() * sqrt_kappa * drive.alpha_in * ((nl + 1) as f64).sqrt();
                if amp != C64::new(0.0, 0.0) {
                    h.push((basis.idx(nl + 1, nr), s, amp));
                }
            }
            if nl >= 1 {
                let amp = -C64::i() * sqrt_kappa * drive.alpha_in.conj() * (nl as f64).sqrt();
                if amp != C64::new(0.0, 0.0) {
                    h.push((basis.idx(nl - 1, nr), s, amp));
                }
            }
        }
    }

    let mut trips: Vec<(usize, usize, C64)> = Vec::new();
    for &(r, c, v) in &h {
        // -i H rho: rho'_rj += -i v rho_cj
        for j in 0..n {
            trips.push((r + n * j, c + n * j, -C64::i() * v));
        }
        // +i rho H: rho'_ic += +i v rho_ir
        for i in 0..n {
            trips.push((i + n * c, i + n * r, C64::i() * v));
        }
    }

    // dissipators: jump a_L at rate kappa_tot_l, a_R at kappa_tot_r
    let split = |s: usize| (s / (cfg.n_max_r + 1), s % (cfg.n_max_r + 1));
    for (mode, gamma) in [(0usize, p.kappa_tot_l()), (1, p.kappa_tot_r())] {
        if gamma == 0.0 {
            continue;
        }
        // lowering-operator entries (target, source, amplitude)
        let mut jump: Vec<(usize, usize, f64)> = Vec::new();
        for s in 0..n {
            let (nl, nr) = split(s);
            if mode == 0 && nl >= 1 {
                jump.push((basis.idx(nl - 1, nr), s, (nl as f64).sqrt()));
            }
            if mode == 1 && nr >= 1 {
                jump.push((basis.idx(nl, nr - 1), s, (nr as f64).sqrt()));
            }
        }
        // gamma c rho c^dag
        for &(i, k, v1) in &jump {
            for &(j, l, v2) in &jump {
                trips.push((i + n * j, k + n * l, C64::new(gamma * v1 * v2, 0.0)));
            }
        }
        // -gamma/2 {c^dag c, rho}
        for i in 0..n {
            let occ_i = if mode == 0 { split(i).0 } else { split(i).1 } as f64;
            for j in 0..n {
                let occ_j = if mode == 0 { split(j).0 } else { split(j).1 } as f64;
                if occ_i + occ_j != 0.0 {
                    trips.push((
                        i + n * j,
                        i + n * j,
                        C64::new(-0.5 * gamma * (occ_i + occ_j), 0.0),
                    ));
                }
            }
        }
    }

    // replace the first row by the trace functional
    trips.retain(|t| t.0 != 0);
    for i in 0..n {
        trips.push((0, i + n * i, C64::new(1.0, 0.0)));
    }

    let faer_trips: Vec<Triplet<usize, usize, C64>> = trips
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    let lmat = SparseColMat::<usize, C64>::try_new_from_triplets(nn, nn, &faer_trips)
        .map_err(|e| FockError::SolveFailure(format!("assembly: {e:?}")))?;
    let lu = lmat
        .sp_lu()
        .map_err(|e| FockError::SolveFailure(format!("lu: {e:?}")))?;
    let mut rhs = faer::Mat::<C64>::zeros(nn, 1);
    rhs[(0, 0)] = C64::new(1.0, 0.0);
    let x = lu.solve(&rhs);

    let raw = DMatrix::from_fn(n, n, |i, j| x[(i + n * j, 0)]);
    let trace: C64 = (0..n).map(|i| raw[(i, i)]).sum();
    let trace_error = (trace - C64::new(1.0, 0.0)).norm();
    let mut hermiticity_defect = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            hermiticity_defect = hermiticity_defect.max((raw[(i, j)] - raw[(j, i)].conj()).norm());
        }
    }
    if !trace_error.is_finite() || trace_error > 1e-10 {
        return Err(FockError::SolveFailure(format!(
            "trace deviates by {trace_error:.3e}"
        )));
    }
    if hermiticity_defect > 1e-12 {
        return Err(FockError::SolveFailure(format!(
            "hermiticity defect {hermiticity_defect:.3e}"
        )));
    }
    let mut rho = DMatrix::from_fn(n, n, |i, j| 0.5 * (raw[(i, j)] + raw[(j, i)].conj()));
    let tr_re: f64 = (0..n).map(|i| rho[(i, i)].re).sum();
    rho /= C64::new(tr_re, 0.0);

    // expectations
    let mut a_l = C64::new(0.0, 0.0);
    let mut a_r = C64::new(0.0, 0.0);
    let mut pair = C64::new(0.0, 0.0);
    let (mut n_l, mut n_r, mut top) = (0.0, 0.0, 0.0);
    for nl in 0..=cfg.n_max_l {
        for nr in 0..=cfg.n_max_r {
            let s = basis.idx(nl, nr);
            let pop = rho[(s, s)].re;
            n_l += nl as f64 * pop;
            n_r += nr as f64 * pop;
            if nl == cfg.n_max_l || nr == cfg.n_max_r {
                top += pop;
            }
            if nl >= 1 {
                a_l += (nl as f64).sqrt() * rho[(s, basis.idx(nl - 1, nr))];
            }
            if nr >= 1 {
                a_r += (nr as f64).sqrt() * rho[(s, basis.idx(nl, nr - 1))];
            }
            if nl >= 1 && nr >= 1 {
                pair += ((nl * nr) as f64).sqrt() * rho[(s, basis.idx(nl - 1, nr - 1))];
            }
        }
    }
    if top > TOP_LAYER_LIMIT {
        return Err(FockError::TruncationError { population: top });
    }
    let min_eigenvalue = rho
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    if min_eigenvalue < -1e-10 {
        return Err(FockError::NotPositive { min_eigenvalue });
    }

    Ok(QuantumSteadyState {
        cfg: *cfg,
        rho,
        a_l,
        a_r,
        n_l,
        n_r,
        pair,
        top_layer_population: top,
        trace_error,
        hermiticity_defect,
        min_eigenvalue,
    })
}

/// Reflection coefficient of the coherent tone through the full quantum
/// solve: Gamma = 1 - sqrt(kappa) <a_L> / alpha_in.
pub fn oracle_reflection(
    p: &DimerParams,
    drive: &Drive,
    cfg: &FockConfig,
) -> Result<C64, FockError> {
    if drive.alpha_in.norm() == 0.0 {
        return Err(FockError::ZeroDrive);
    }
    let qss = lindblad_steady_state(p, drive, cfg)?;
    Ok(C64::new(1.0, 0.0) - p.kappa.sqrt() * qss.a_l / drive.alpha_in)
}

/// Linear (U = 0) steady-state left amplitude, for cross-checks.
pub fn linear_left_amplitude(p: &DimerParams, drive: &Drive) -> C64 {
    let i = C64::i();
    let dl = p.detuning_l(drive.omega_p);
    let dr = p.detuning_r(drive.omega_p);
    let right = i * dr + 0.5 * p.kappa_tot_r();
    p.kappa.sqrt() * drive.alpha_in / (i * dl + 0.5 * p.kappa_tot_l() + p.j * p.j / right)
}
