//! Four-parameter Lorentzian peak fit with the linear pair (baseline, peak)
//! solved exactly at each trial shape (variable projection), so the simplex
//! only searches (center, width).

use super::EstimationError;
use serde::{Deserialize, Serialize};

use crate::optimize::nelder_mead_restarted;

/// y(x) = baseline + peak / (1 + 4 (x - center)^2 / fwhm^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzFit {
    pub center: f64,
    pub fwhm: f64,
    /// Height above the baseline at the center.
    pub peak: f64,
    pub baseline: f64,
    /// l2 norm of the pointwise misfit.
    pub residual: f64,
}

impl LorentzFit {
    pub fn value(&self, x: f64) -> f64 {
        self.baseline + self.peak / (1.0 + 4.0 * (x - self.center).powi(2) / (self.fwhm * self.fwhm))
    }
}

/// Best (baseline, peak) for a fixed shape plus the resulting sum of squares.
fn project(data: &[(f64, f64)], center: f64, fwhm: f64) -> (f64, f64, f64) {
    let n = data.len() as f64;
    let (mut sl, mut sll, mut sy, mut sly) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in data {
        let l = 1.0 / (1.0 + 4.0 * (x - center).powi(2) / (fwhm * fwhm));
        sl += l;
        sll += l * l;
        sy += y;
        sly += l * y;
    }
    let det = n * sll - sl * sl;
    let (baseline, peak) = if det.abs() > 1e-12 * n * sll.max(1e-300) {
        ((sll * sy - sl * sly) / det, (n * sly - sl * sy) / det)
    } else {
        // shape basis degenerate with the constant: flat fit
        (sy / n, 0.0)
    };
    let mut ss = 0.0;
    for &(x, y) in data {
        let l = 1.0 / (1.0 + 4.0 * (x - center).powi(2) / (fwhm * fwhm));
        ss += (y - baseline - peak * l).powi(2);
    }
    (baseline, peak, ss)
}

/// Least-squares Lorentzian through at least five points. Deterministic: the
/// shape search starts from the sample maximum and its half-height width.
/// A flat input yields peak = 0 rather than an error.
pub fn fit_lorentzian(
    data: impl IntoIterator<Item = (f64, f64)>,
) -> Result<LorentzFit, EstimationError> {
    let mut data: Vec<(f64, f64)> = data.into_iter().collect();
    if data.len() < 5 {
        return Err(EstimationError::InsufficientData {
            needed: 5,
            got: data.len(),
        });
    }
    if data.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(EstimationError::FitDiverged {
            residual: f64::INFINITY,
        });
    }
    data.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let span = data[data.len() - 1].0 - data[0].0;
    if span <= 0.0 {
        return Err(EstimationError::FitDiverged {
            residual: f64::INFINITY,
        });
    }

    let (imax, &(x_max, y_max)) = data
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .unwrap();
    let y_min = data.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let half = 0.5 * (y_max + y_min);
    // walk out from the maximum to the half-height crossings
    let mut lo = data[0].0;
    for k in (0..imax).rev() {
        if data[k].1 <= half {
            lo = data[k].0;
            break;
        }
    }
    let mut hi = data[data.len() - 1].0;
    for p in &data[imax + 1..] {
        if p.1 <= half {
            hi = p.0;
            break;
        }
    }
    let w0 = (hi - lo).max(span / (data.len() as f64)).min(span);

    let obj = |v: &[f64]| project(&data, v[0], v[1].abs().max(1e-9 * span)).2;
    let r = nelder_mead_restarted(obj, &[x_max, w0], &[0.25 * w0, 0.5 * w0], 4000, 1e-14, 2);
    if !r.value.is_finite() {
        return Err(EstimationError::FitDiverged {
            residual: f64::INFINITY,
        });
    }
    let center = r.x[0];
    let fwhm = r.x[1].abs().max(1e-9 * span);
    let (baseline, peak, ss) = project(&data, center, fwhm);
    Ok(LorentzFit {
        center,
        fwhm,
        peak,
        baseline,
        residual: ss.sqrt(),
    })
}
