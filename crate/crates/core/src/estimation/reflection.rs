//! Linear (pump-off) reflection off the measurement port and the phase fit
//! that extracts (omega_l, omega_r, kappa, j) from a swept trace.

use super::EstimationError;
use crate::optimize::{fd_jacobian, nelder_mead_restarted};
use crate::params::DimerParams;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Swept-frequency reflection record. Phases are stored wrapped to (-pi, pi];
/// the full complex values are kept when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionTrace {
    /// Strictly increasing, rad/s.
    pub frequencies: Vec<f64>,
    /// Arg of the reflection coefficient, rad.
    pub phases: Vec<f64>,
    pub gammas: Option<Vec<C64>>,
}

impl ReflectionTrace {
    pub fn from_phases(frequencies: Vec<f64>, phases: Vec<f64>) -> Result<Self, EstimationError> {
        let t = ReflectionTrace {
            frequencies,
            phases,
            gammas: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn from_gammas(frequencies: Vec<f64>, gammas: Vec<C64>) -> Result<Self, EstimationError> {
        let phases = gammas.iter().map(|g| g.arg()).collect();
        let t = ReflectionTrace {
            frequencies,
            phases,
            gammas: Some(gammas),
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), EstimationError> {
        if self.phases.len() != self.frequencies.len() {
            return Err(EstimationError::InvalidTrace(format!(
                "{} frequencies but {} phases",
                self.frequencies.len(),
                self.phases.len()
            )));
        }
        if let Some(g) = &self.gammas {
            if g.len() != self.frequencies.len() {
                return Err(EstimationError::InvalidTrace(
                    "complex values length mismatch".into(),
                ));
            }
        }
        for w in self.frequencies.windows(2) {
            if !(w[1] > w[0]) {
                return Err(EstimationError::InvalidTrace(
                    "frequencies must be strictly increasing".into(),
                ));
            }
        }
        if self
            .frequencies
            .iter()
            .chain(self.phases.iter())
            .any(|v| !v.is_finite())
        {
            return Err(EstimationError::InvalidTrace("non-finite entry".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Accumulated wrapped phase increments across the sweep.
    pub fn total_winding(&self) -> f64 {
        phase_winding(&self.phases)
    }

    /// Columns: freq_Hz, re_gamma, im_gamma when complex values are present,
    /// else freq_Hz, phase_rad. Frequencies on disk are ordinary Hz.
    pub fn write_csv(&self, path: &Path) -> Result<(), EstimationError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| EstimationError::Csv(e.to_string()))?;
        let hz = |omega: f64| omega / (2.0 * std::f64::consts::PI);
        if let Some(g) = &self.gammas {
            w.write_record(["freq_Hz", "re_gamma", "im_gamma"])
                .map_err(|e| EstimationError::Csv(e.to_string()))?;
            for (f, v) in self.frequencies.iter().zip(g) {
                w.write_record(&[
                    format!("{:.17e}", hz(*f)),
                    format!("{:.17e}", v.re),
                    format!("{:.17e}", v.im),
                ])
                .map_err(|e| EstimationError::Csv(e.to_string()))?;
            }
        } else {
            w.write_record(["freq_Hz", "phase_rad"])
                .map_err(|e| EstimationError::Csv(e.to_string()))?;
            for (f, p) in self.frequencies.iter().zip(&self.phases) {
                w.write_record(&[format!("{:.17e}", hz(*f)), format!("{:.17e}", p)])
                    .map_err(|e| EstimationError::Csv(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| EstimationError::Csv(e.to_string()))?;
        Ok(())
    }

    /// Accepts either on-disk schema; see `write_csv`.
    pub fn read_csv(path: &Path) -> Result<Self, EstimationError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| EstimationError::Csv(e.to_string()))?;
        let headers = r
            .headers()
            .map_err(|e| EstimationError::Csv(e.to_string()))?
            .clone();
        let cols: Vec<&str> = headers.iter().collect();
        let complex = match cols.as_slice() {
            ["freq_Hz", "re_gamma", "im_gamma"] => true,
            ["freq_Hz", "phase_rad"] => false,
            other => {
                return Err(EstimationError::Csv(format!(
                    "unrecognized header {other:?}"
                )))
            }
        };
        let mut freqs = Vec::new();
        let mut phases = Vec::new();
        let mut gammas = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| EstimationError::Csv(e.to_string()))?;
            let field = |i: usize| -> Result<f64, EstimationError> {
                rec.get(i)
                    .ok_or_else(|| EstimationError::Csv("short record".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| EstimationError::Csv(e.to_string()))
            };
            freqs.push(field(0)? * 2.0 * std::f64::consts::PI);
            if complex {
                let g = C64::new(field(1)?, field(2)?);
                phases.push(g.arg());
                gammas.push(g);
            } else {
                phases.push(field(1)?);
            }
        }
        let t = ReflectionTrace {
            frequencies: freqs,
            phases,
            gammas: if complex { Some(gammas) } else { None },
        };
        t.validate()?;
        Ok(t)
    }
}

/// Pump-off reflection coefficient of the port at probe frequency `omega`.
/// The right resonator enters only through its loading of the left one.
pub fn reflection_model(p: &DimerParams, omega: f64) -> C64 {
    let i = C64::i();
    let right = i * (p.omega_r - omega) + 0.5 * p.kappa_tot_r();
    1.0 - p.kappa / (i * (p.omega_l - omega) + 0.5 * p.kappa_tot_l() + p.j * p.j / right)
}

fn wrap(x: f64) -> f64 {
    x.sin().atan2(x.cos())
}

/// Net phase accumulated along the sweep, summing increments wrapped into
/// (-pi, pi]. A full passage through an undercoupled-free resonance adds 2pi.
pub fn phase_winding(phases: &[f64]) -> f64 {
    phases.windows(2).map(|w| wrap(w[1] - w[0])).sum()
}

/// Result of the four-parameter phase fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Fitted omega_l, omega_r, kappa, j; loss rates carried over from the
    /// initial guess.
    pub params: DimerParams,
    /// l2 norm of the wrapped phase residuals.
    pub residual: f64,
    /// One-sigma half-widths for (omega_l, omega_r, kappa, j) from the
    /// residual curvature.
    pub confidence: [f64; 4],
    pub evaluations: usize,
    pub converged: bool,
}

impl FitResult {
    /// Recompute the residual norm of the stored parameters on a trace;
    /// equals `self.residual` on the trace that produced the fit.
    pub fn reevaluate_residual(&self, trace: &ReflectionTrace) -> f64 {
        ssr(&self.params, trace).sqrt()
    }
}

fn with_x(guess: &DimerParams, x: &[f64]) -> DimerParams {
    DimerParams {
        omega_l: x[0],
        omega_r: x[1],
        kappa: x[2].abs(),
        j: x[3].abs(),
        ..*guess
    }
}

fn ssr(p: &DimerParams, trace: &ReflectionTrace) -> f64 {
    trace
        .frequencies
        .iter()
        .zip(&trace.phases)
        .map(|(&w, &phi)| wrap(phi - reflection_model(p, w).arg()).powi(2))
        .sum()
}

fn rel_gap(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Wrap-aware least-squares fit of (omega_l, omega_r, kappa, j) to a phase
/// trace. Multi-start (including the label-swapped guess) guards against the
/// nearest local minimum; the labeling with omega_l <= omega_r is preferred
/// when both labelings fit equally well.
pub fn fit_reflection(
    trace: &ReflectionTrace,
    guess: &DimerParams,
) -> Result<FitResult, EstimationError> {
    if trace.len() < 8 {
        return Err(EstimationError::InsufficientData {
            needed: 8,
            got: trace.len(),
        });
    }
    let span = trace.frequencies[trace.len() - 1] - trace.frequencies[0];
    let scale = [
        0.05 * span,
        0.05 * span,
        0.5 * guess.kappa + 0.01 * span,
        0.5 * guess.j + 0.01 * span,
    ];
    let base = [guess.omega_l, guess.omega_r, guess.kappa, guess.j];
    let swapped = [guess.omega_r, guess.omega_l, guess.kappa, guess.j];
    let mut starts = Vec::new();
    for s in [base, swapped] {
        starts.push(s);
        starts.push([s[0], s[1], 2.0 * s[2], 0.5 * s[3].max(0.01 * span)]);
        starts.push([s[0], s[1], 0.5 * s[2], 2.0 * s[3].max(0.01 * span)]);
    }

    let ssr_guess = ssr(guess, trace);
    // an essentially perfect fit cannot be improved by further starts
    let perfect = trace.len() as f64 * 1e-16;
    let mut minima: Vec<(Vec<f64>, f64, usize, bool)> = Vec::new();
    for start in &starts {
        let r = nelder_mead_restarted(
            |x| ssr(&with_x(guess, x), trace),
            start,
            &scale,
            6000,
            1e-10,
            2,
        );
        if r.value.is_finite() {
            let done = r.value <= perfect;
            minima.push((r.x, r.value, r.evaluations, r.converged));
            if done {
                break;
            }
        }
    }
    minima.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let Some(best) = minima.first().cloned() else {
        return Err(EstimationError::FitDiverged {
            residual: f64::INFINITY,
        });
    };
    if best.1 > ssr_guess * (1.0 + 1e-12) + 1e-14 {
        return Err(EstimationError::FitDiverged {
            residual: best.1.sqrt(),
        });
    }

    let finish = |x: &[f64], evals: usize, conv: bool| -> FitResult {
        // prefer the omega_l <= omega_r labeling when it is degenerate in
        // residual; the port breaks the symmetry, so verify before swapping
        let mut x = x.to_vec();
        x[2] = x[2].abs();
        x[3] = x[3].abs();
        let v_here = ssr(&with_x(guess, &x), trace);
        if x[0] > x[1] {
            let sw = [x[1], x[0], x[2], x[3]];
            let v_sw = ssr(&with_x(guess, &sw), trace);
            if v_sw <= v_here * (1.0 + 1e-9) + 1e-14 {
                x = sw.to_vec();
            }
        }
        let params = with_x(guess, &x);
        let n = trace.len();
        let steps: Vec<f64> = [span, span, params.kappa.max(1e-3 * span), params.j.max(1e-3 * span)]
            .iter()
            .map(|s| 1e-7 * s)
            .collect();
        let jac = fd_jacobian(
            |y| {
                let p = with_x(guess, y);
                trace
                    .frequencies
                    .iter()
                    .zip(&trace.phases)
                    .map(|(&w, &phi)| wrap(phi - reflection_model(&p, w).arg()))
                    .collect()
            },
            &x,
            &steps,
        );
        let value = ssr(&params, trace);
        let sigma2 = value / (n.saturating_sub(4).max(1)) as f64;
        let jtj = jac.transpose() * &jac;
        let confidence = match jtj.try_inverse() {
            Some(cov) => {
                let mut c = [0.0; 4];
                for k in 0..4 {
                    c[k] = (sigma2 * cov[(k, k)]).max(0.0).sqrt();
                }
                c
            }
            None => [f64::INFINITY; 4],
        };
        FitResult {
            params,
            residual: value.sqrt(),
            confidence,
            evaluations: evals,
            converged: conv,
        }
    };

    // distinct second minimum close in residual means the data does not pin
    // the parameters down; report both candidates
    let floor = 1e-3 * span;
    let distinct = minima.iter().skip(1).find(|m| {
        (0..4).any(|k| rel_gap(m.0[k].abs(), best.0[k].abs(), floor) > 1e-2)
    });
    if let Some(alt) = distinct {
        if alt.1 <= 2.0 * best.1 && best.1 > 0.0 {
            return Err(EstimationError::Ambiguous {
                best: Box::new(finish(&best.0, best.2, best.3)),
                alternate: Box::new(finish(&alt.0, alt.2, alt.3)),
            });
        }
    }
    Ok(finish(&best.0, best.2, best.3))
}
