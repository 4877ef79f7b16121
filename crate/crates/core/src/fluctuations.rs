//! Frequency-resolved input-output scattering of fluctuations around a stable
//! working point, and everything derived from it: signal/idler gain spectra,
//! phase-dependent squeezing, and band-integrated output covariances.
//!
//! Conventions. The scattering record at sideband detuning Delta maps the
//! input pair (b_ch at omega_p+Delta, b_ch^dag referred to omega_p-Delta) of
//! every open channel onto the same pair of the measurement port:
//! row 0 holds the coefficients of b_out(Delta), row 1 those of
//! b_out^dag(-Delta). Commutator preservation fixes
//! sum_ann |S|^2 - sum_cre |S|^2 = 1 on row 0 regardless of internal loss.

use crate::drift::DriftError;
use crate::estimation::{fit_lorentzian, LorentzFit};
use crate::params::DimerParams;
use crate::semiclassical::SteadyState;
use crate::C64;
use nalgebra::{DMatrix, Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlucError {
    #[error("working point is not stable; fluctuation spectra are undefined")]
    Unstable,
    #[error("resolvent (-i Delta - A) is singular at Delta = {delta:.6e}")]
    SingularResolvent { delta: f64 },
    #[error("filter bands overlap: centers {center_s:.6e}, {center_i:.6e}, bandwidth {bandwidth:.6e}")]
    FilterOverlap {
        center_s: f64,
        center_i: f64,
        bandwidth: f64,
    },
    #[error("filter bands must be mirror images about the pump: {center_s:.6e}, {center_i:.6e} vs omega_p {omega_p:.6e}")]
    FilterAsymmetric {
        center_s: f64,
        center_i: f64,
        omega_p: f64,
    },
    #[error(transparent)]
    Eigen(#[from] DriftError),
}

/// Open decay channels, in the fixed column order used by scattering records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    /// Left-mode measurement port (rate kappa). Always present, always first.
    Port,
    /// Left-mode internal loss.
    InternalLeft,
    /// Right-mode external coupling.
    ExternalRight,
    /// Right-mode internal loss.
    InternalRight,
}

impl Channel {
    /// 0 = left mode, 1 = right mode.
    pub fn mode(self) -> usize {
        match self {
            Channel::Port | Channel::InternalLeft => 0,
            Channel::ExternalRight | Channel::InternalRight => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCoupling {
    pub channel: Channel,
    pub rate: f64,
}

/// All channels with nonzero rate, port first.
pub fn open_channels(p: &DimerParams) -> Vec<ChannelCoupling> {
    let mut out = vec![ChannelCoupling {
        channel: Channel::Port,
        rate: p.kappa,
    }];
    for (channel, rate) in [
        (Channel::InternalLeft, p.kappa_int_l),
        (Channel::ExternalRight, p.kappa_r),
        (Channel::InternalRight, p.kappa_int_r),
    ] {
        if rate > 0.0 {
            out.push(ChannelCoupling { channel, rate });
        }
    }
    out
}

/// Port-output rows of the input-output matrix at one sideband detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringRecord {
    pub delta: f64,
    pub channels: Vec<ChannelCoupling>,
    /// rows[0]: coefficients of b_out(Delta); rows[1]: of b_out^dag(-Delta).
    /// Column 2c is the annihilation input of channel c, column 2c+1 its
    /// creation input.
    pub rows: [Vec<C64>; 2],
}

impl ScatteringRecord {
    /// Coefficient of channel c's annihilation input in b_out(Delta).
    pub fn ann(&self, c: usize) -> C64 {
        self.rows[0][2 * c]
    }

    /// Coefficient of channel c's creation input in b_out(Delta).
    pub fn cre(&self, c: usize) -> C64 {
        self.rows[0][2 * c + 1]
    }

    /// Photon-number gain port in -> port out at the same sideband.
    pub fn signal_gain(&self) -> f64 {
        self.ann(0).norm_sqr()
    }

    /// Photon-number gain from port input at omega_p-Delta to output at
    /// omega_p+Delta.
    pub fn idler_gain(&self) -> f64 {
        self.cre(0).norm_sqr()
    }

    /// Deviation of row 0 from the commutator-preservation identity
    /// sum_ann |S|^2 - sum_cre |S|^2 = 1. Zero up to roundoff for any loss
    /// configuration.
    pub fn commutator_defect(&self) -> f64 {
        let mut s = -1.0;
        for c in 0..self.channels.len() {
            s += self.ann(c).norm_sqr() - self.cre(c).norm_sqr();
        }
        s
    }

    /// Output photon flux density at omega_p+Delta from vacuum inputs.
    pub fn output_occupation(&self) -> f64 {
        (0..self.channels.len()).map(|c| self.cre(c).norm_sqr()).sum()
    }
}

/// Input-output matrix of fluctuations at sideband detuning `delta` around a
/// stable steady state. `p` must be the parameter set that produced `ss`.
pub fn scattering_matrix(
    ss: &SteadyState,
    p: &DimerParams,
    delta: f64,
) -> Result<ScatteringRecord, FlucError> {
    if !ss.stable {
        return Err(FlucError::Unstable);
    }
    let channels = open_channels(p);
    let a = ss.drift.m;
    let m: Matrix4<C64> = Matrix4::from_diagonal_element(C64::new(0.0, -delta)) - a;
    let lu = m.lu();
    let mut rows = [
        vec![C64::new(0.0, 0.0); 2 * channels.len()],
        vec![C64::new(0.0, 0.0); 2 * channels.len()],
    ];
    // identity part: port input passes straight to the output
    rows[0][0] = C64::new(1.0, 0.0);
    rows[1][1] = C64::new(1.0, 0.0);
    let sqrt_kappa = p.kappa.sqrt();
    for (c, ch) in channels.iter().enumerate() {
        let g = ch.rate.sqrt();
        let row_base = 2 * ch.channel.mode();
        for part in 0..2 {
            // K column for (annihilation, creation) input of this channel
            let mut k = Vector4::from_element(C64::new(0.0, 0.0));
            k[row_base + part] = C64::new(g, 0.0);
            let x = lu
                .solve(&k)
                .ok_or(FlucError::SingularResolvent { delta })?;
            rows[0][2 * c + part] -= sqrt_kappa * x[0];
            rows[1][2 * c + part] -= sqrt_kappa * x[1];
        }
    }
    Ok(ScatteringRecord {
        delta,
        channels,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub delta: f64,
    pub g_s: f64,
    pub g_i: f64,
}

/// Signal/idler gain over a detuning grid, with a Lorentzian fit of the
/// signal curve when one converges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSpectrum {
    pub points: Vec<GainPoint>,
    pub fit: Option<LorentzFit>,
}

impl GainSpectrum {
    /// Sample with the largest signal gain.
    pub fn peak(&self) -> GainPoint {
        *self
            .points
            .iter()
            .max_by(|a, b| a.g_s.partial_cmp(&b.g_s).unwrap())
            .expect("non-empty spectrum")
    }

    /// sqrt(peak gain) x FWHM from the Lorentzian fit, the figure of merit
    /// that stays constant as pump power moves the peak gain.
    pub fn gain_bandwidth_product(&self) -> Option<f64> {
        self.fit
            .as_ref()
            .map(|f| (f.baseline + f.peak).max(0.0).sqrt() * f.fwhm)
    }
}

pub fn gain_spectrum(
    ss: &SteadyState,
    p: &DimerParams,
    deltas: &[f64],
) -> Result<GainSpectrum, FlucError> {
    let mut points = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let s = scattering_matrix(ss, p, d)?;
        points.push(GainPoint {
            delta: d,
            g_s: s.signal_gain(),
            g_i: s.idler_gain(),
        });
    }
    let fit = fit_lorentzian(points.iter().map(|pt| (pt.delta, pt.g_s))).ok();
    Ok(GainSpectrum { points, fit })
}

/// Peak signal gain and full width at half maximum located directly on the
/// response (golden-section peak search plus bisection on the half-power
/// crossings), independent of any fit model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainBandwidth {
    pub delta_peak: f64,
    pub peak: f64,
    pub fwhm: f64,
}

impl GainBandwidth {
    pub fn product(&self) -> f64 {
        self.peak.sqrt() * self.fwhm
    }
}

pub fn gain_peak_and_fwhm(
    ss: &SteadyState,
    p: &DimerParams,
    delta_lo: f64,
    delta_hi: f64,
) -> Result<GainBandwidth, FlucError> {
    let g = |d: f64| -> Result<f64, FlucError> { Ok(scattering_matrix(ss, p, d)?.signal_gain()) };
    // coarse scan to bracket the maximum
    let n = 257;
    let mut best = (delta_lo, g(delta_lo)?);
    for k in 1..n {
        let d = delta_lo + (delta_hi - delta_lo) * k as f64 / (n - 1) as f64;
        let v = g(d)?;
        if v > best.1 {
            best = (d, v);
        }
    }
    let h = (delta_hi - delta_lo) / (n - 1) as f64;
    let (mut a, mut b) = ((best.0 - h).max(delta_lo), (best.0 + h).min(delta_hi));
    // golden-section refinement
    let phi = 0.5 * (3.0 - 5f64.sqrt());
    let (mut x1, mut x2) = (a + phi * (b - a), b - phi * (b - a));
    let (mut f1, mut f2) = (g(x1)?, g(x2)?);
    for _ in 0..80 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - phi * (b - a);
            f2 = g(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + phi * (b - a);
            f1 = g(x1)?;
        }
    }
    let delta_peak = 0.5 * (a + b);
    let peak = g(delta_peak)?.max(f1).max(f2);
    let half = 0.5 * peak;
    // walk outward until the response drops below half power, then bisect
    let mut crossing = |dir: f64| -> Result<f64, FlucError> {
        let mut step = h.max((delta_hi - delta_lo) * 1e-4);
        let mut inner = delta_peak;
        let mut outer = delta_peak + dir * step;
        for _ in 0..200 {
            if g(outer)? < half {
                break;
            }
            inner = outer;
            step *= 1.6;
            outer = inner + dir * step;
        }
        for _ in 0..100 {
            let mid = 0.5 * (inner + outer);
            if g(mid)? >= half {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        Ok(0.5 * (inner + outer))
    };
    let hi = crossing(1.0)?;
    let lo = crossing(-1.0)?;
    Ok(GainBandwidth {
        delta_peak,
        peak,
        fwhm: hi - lo,
    })
}

/// Phase dependence of the two-mode quadrature noise at one sideband:
/// S(phi) = c0 + Re(c e^{-2 i phi}), vacuum level 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingPoint {
    pub delta: f64,
    pub c0: f64,
    pub c: C64,
}

impl SqueezingPoint {
    pub fn value(&self, phi: f64) -> f64 {
        self.c0 + (self.c * C64::from_polar(1.0, -2.0 * phi)).re
    }

    /// Minimum over the local-oscillator phase.
    pub fn min(&self) -> f64 {
        self.c0 - self.c.norm()
    }

    pub fn max(&self) -> f64 {
        self.c0 + self.c.norm()
    }

    /// Phase of minimum noise, folded into [0, pi).
    pub fn phi_min(&self) -> f64 {
        let mut phi = 0.5 * (self.c.arg() + std::f64::consts::PI);
        phi = phi.rem_euclid(std::f64::consts::PI);
        phi
    }

    /// Detection through a beamsplitter of transmissivity eta: the variance
    /// mixes with vacuum, S -> eta S + (1 - eta).
    pub fn with_efficiency(&self, eta: f64) -> SqueezingPoint {
        SqueezingPoint {
            delta: self.delta,
            c0: eta * self.c0 + (1.0 - eta),
            c: eta * self.c,
        }
    }
}

/// Exact coefficients of the phase sinusoid at sideband `delta`, from the
/// scattering records at +delta and -delta.
pub fn squeezing_point(
    ss: &SteadyState,
    p: &DimerParams,
    delta: f64,
) -> Result<SqueezingPoint, FlucError> {
    let sp = scattering_matrix(ss, p, delta)?;
    let sm = scattering_matrix(ss, p, -delta)?;
    let nc = sp.channels.len();
    let mut c0 = 0.0;
    let mut c = C64::new(0.0, 0.0);
    for ch in 0..nc {
        let s = sp.ann(ch); // b_out(D) <- b_ch(D)
        let q = sp.cre(ch); // b_out(D) <- b_ch^dag(-D)
        let pp = sm.ann(ch); // b_out(-D) <- b_ch(-D)
        let t = sm.cre(ch); // b_out(-D) <- b_ch^dag(D)
        c0 += 0.5 * (s.norm_sqr() + t.norm_sqr() + q.norm_sqr() + pp.norm_sqr());
        c += s * t + q * pp;
    }
    Ok(SqueezingPoint { delta, c0, c })
}

/// Grid of S(Delta, phi) values plus the per-Delta sinusoid coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezingSpectrum {
    pub deltas: Vec<f64>,
    pub phis: Vec<f64>,
    /// Row-major: values[i_delta * phis.len() + i_phi].
    pub values: Vec<f64>,
    pub points: Vec<SqueezingPoint>,
}

pub fn squeezing_spectrum(
    ss: &SteadyState,
    p: &DimerParams,
    deltas: &[f64],
    phis: &[f64],
) -> Result<SqueezingSpectrum, FlucError> {
    let mut points = Vec::with_capacity(deltas.len());
    let mut values = Vec::with_capacity(deltas.len() * phis.len());
    for &d in deltas {
        let pt = squeezing_point(ss, p, d)?;
        for &phi in phis {
            values.push(pt.value(phi));
        }
        points.push(pt);
    }
    Ok(SqueezingSpectrum {
        deltas: deltas.to_vec(),
        phis: phis.to_vec(),
        values,
        points,
    })
}

/// Least-squares sinusoid offset + amplitude*cos(2 phi + phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    /// Root-mean-square misfit.
    pub residual: f64,
}

/// Linear least squares on the basis (1, cos 2phi, sin 2phi). Needs at least
/// three distinct phases.
pub fn fit_two_phi_sinusoid(samples: &[(f64, f64)]) -> Option<SinusoidFit> {
    if samples.len() < 3 {
        return None;
    }
    let n = samples.len();
    let mut at_a = nalgebra::Matrix3::<f64>::zeros();
    let mut at_y = nalgebra::Vector3::<f64>::zeros();
    for &(phi, y) in samples {
        let row = nalgebra::Vector3::new(1.0, (2.0 * phi).cos(), (2.0 * phi).sin());
        at_a += row * row.transpose();
        at_y += row * y;
    }
    let sol = at_a.lu().solve(&at_y)?;
    let (c0, a, b) = (sol[0], sol[1], sol[2]);
    // a cos2phi + b sin2phi = amplitude cos(2phi + phase)
    let amplitude = a.hypot(b);
    let phase = (-b).atan2(a);
    let mut ss = 0.0;
    for &(phi, y) in samples {
        let model = c0 + amplitude * (2.0 * phi + phase).cos();
        ss += (y - model).powi(2);
    }
    Some(SinusoidFit {
        offset: c0,
        amplitude,
        phase,
        residual: (ss / n as f64).sqrt(),
    })
}

/// Fixed-Delta slice of the squeezing spectrum with its sinusoid fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSlice {
    pub delta: f64,
    pub samples: Vec<(f64, f64)>,
    pub fit: Option<SinusoidFit>,
    pub point: SqueezingPoint,
}

pub fn squeezing_vs_phase(
    ss: &SteadyState,
    p: &DimerParams,
    delta: f64,
    phis: &[f64],
) -> Result<PhaseSlice, FlucError> {
    let point = squeezing_point(ss, p, delta)?;
    let samples: Vec<(f64, f64)> = phis.iter().map(|&phi| (phi, point.value(phi))).collect();
    let fit = fit_two_phi_sinusoid(&samples);
    Ok(PhaseSlice {
        delta,
        samples,
        fit,
        point,
    })
}

/// Symmetric-ordered covariance of rectangular-band filtered signal/idler
/// quadratures (X_s, P_s, X_i, P_i). Vacuum diagonal is 1/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputCovariance {
    /// Signal band center minus pump (rad/s); the idler band mirrors it.
    pub delta0: f64,
    pub bandwidth: f64,
    /// Band-averaged output occupation of the signal band.
    pub n_s: f64,
    pub n_i: f64,
    /// Band-averaged pair correlation <A_s A_i>.
    pub c: C64,
    pub matrix: Matrix4<f64>,
}

impl OutputCovariance {
    /// Symplectic eigenvalues (nu_1, nu_2), both 1/2 for a pure state.
    pub fn symplectic_eigenvalues(&self) -> [f64; 2] {
        symplectic_eigenvalues(&self.matrix)
    }

    /// Gaussian-state purity 1/(4 nu_1 nu_2).
    pub fn purity(&self) -> f64 {
        let [v1, v2] = self.symplectic_eigenvalues();
        1.0 / (4.0 * v1 * v2)
    }
}

/// Symplectic eigenvalues of a 4x4 two-mode covariance in (X1,P1,X2,P2) order.
pub fn symplectic_eigenvalues(m: &Matrix4<f64>) -> [f64; 2] {
    let mut omega = Matrix4::<f64>::zeros();
    omega[(0, 1)] = 1.0;
    omega[(1, 0)] = -1.0;
    omega[(2, 3)] = 1.0;
    omega[(3, 2)] = -1.0;
    let prod = DMatrix::from_fn(4, 4, |i, j| (omega * m)[(i, j)]);
    let mut mags: Vec<f64> = prod.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // eigenvalues come as +/- i nu pairs: magnitudes are (nu1, nu1, nu2, nu2)
    [mags[0], mags[2]]
}

/// Adaptive Simpson quadrature on a 4-component integrand.
fn simpson4<E, F: Fn(f64) -> Result<[f64; 4], E>>(
    f: &F,
    a: f64,
    b: f64,
    fa: [f64; 4],
    fm: [f64; 4],
    fb: [f64; 4],
    whole: [f64; 4],
    tol: f64,
    depth: usize,
) -> Result<[f64; 4], E> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let flm = f(lm)?;
    let frm = f(rm)?;
    let h = b - a;
    let mut left = [0.0; 4];
    let mut right = [0.0; 4];
    let mut worst = 0.0f64;
    for k in 0..4 {
        left[k] = h / 12.0 * (fa[k] + 4.0 * flm[k] + fm[k]);
        right[k] = h / 12.0 * (fm[k] + 4.0 * frm[k] + fb[k]);
        worst = worst.max((left[k] + right[k] - whole[k]).abs());
    }
    let scale = whole.iter().fold(1e-300f64, |s, x| s.max(x.abs()));
    if depth == 0 || worst <= 15.0 * tol * scale.max(1e-12) {
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = left[k] + right[k] + (left[k] + right[k] - whole[k]) / 15.0;
        }
        return Ok(out);
    }
    let l = simpson4(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = simpson4(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = l[k] + r[k];
    }
    Ok(out)
}

fn integrate4<E, F: Fn(f64) -> Result<[f64; 4], E>>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<[f64; 4], E> {
    let m = 0.5 * (a + b);
    let fa = f(a)?;
    let fm = f(m)?;
    let fb = f(b)?;
    let h = b - a;
    let mut whole = [0.0; 4];
    for k in 0..4 {
        whole[k] = h / 6.0 * (fa[k] + 4.0 * fm[k] + fb[k]);
    }
    simpson4(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Covariance of the filtered output modes. The signal band is centered at
/// absolute frequency `center_s`, the idler band at `center_i`; both must be
/// mirror images about the pump and must not overlap.
pub fn output_covariance(
    ss: &SteadyState,
    p: &DimerParams,
    omega_p: f64,
    center_s: f64,
    center_i: f64,
    bandwidth: f64,
) -> Result<OutputCovariance, FlucError> {
    let delta0 = center_s - omega_p;
    let mirror = omega_p - center_i;
    let scale = delta0.abs().max(bandwidth).max(p.kappa);
    if (delta0 - mirror).abs() > 1e-9 * scale {
        return Err(FlucError::FilterAsymmetric {
            center_s,
            center_i,
            omega_p,
        });
    }
    if 2.0 * delta0.abs() < bandwidth || bandwidth <= 0.0 {
        return Err(FlucError::FilterOverlap {
            center_s,
            center_i,
            bandwidth,
        });
    }
    let f = |d: f64| -> Result<[f64; 4], FlucError> {
        let sp = scattering_matrix(ss, p, d)?;
        let sm = scattering_matrix(ss, p, -d)?;
        let nc = sp.channels.len();
        let n_s: f64 = (0..nc).map(|ch| sp.cre(ch).norm_sqr()).sum();
        let n_i: f64 = (0..nc).map(|ch| sm.cre(ch).norm_sqr()).sum();
        let m: C64 = (0..nc).map(|ch| sp.ann(ch) * sm.cre(ch)).sum();
        Ok([n_s, n_i, m.re, m.im])
    };
    let (a, b) = (delta0 - 0.5 * bandwidth, delta0 + 0.5 * bandwidth);
    let integ = integrate4(&f, a, b, 1e-8)?;
    let n_s = integ[0] / bandwidth;
    let n_i = integ[1] / bandwidth;
    let c = C64::new(integ[2], integ[3]) / bandwidth;

    let mut m = Matrix4::<f64>::zeros();
    m[(0, 0)] = n_s + 0.5;
    m[(1, 1)] = n_s + 0.5;
    m[(2, 2)] = n_i + 0.5;
    m[(3, 3)] = n_i + 0.5;
    m[(0, 2)] = c.re;
    m[(0, 3)] = c.im;
    m[(1, 2)] = c.im;
    m[(1, 3)] = -c.re;
    m[(2, 0)] = c.re;
    m[(3, 0)] = c.im;
    m[(2, 1)] = c.im;
    m[(3, 1)] = -c.re;
    Ok(OutputCovariance {
        delta0,
        bandwidth,
        n_s,
        n_i,
        c,
        matrix: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Drive;
    use crate::semiclassical::solve_steady_states;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    // lossless symmetric dimer pumped below the lower hybridized mode; the
    // branch is monostable and stable there
    fn pumped_lossless(flux: f64) -> (DimerParams, Drive, SteadyState) {
        let p = DimerParams::symmetric(0.0, -0.02, 0.7, 1.0);
        let d = Drive::from_flux(p.omega_p_for_drive_detuning(-1.2), flux);
        let states = solve_steady_states(&p, &d).unwrap();
        let ss = *states.iter().find(|s| s.stable).expect("stable state");
        (p, d, ss)
    }

    #[test]
    fn undriven_scattering_is_linear_reflection() {
        let p = DimerParams {
            omega_l: 7.0,
            omega_r: 7.3,
            u_l: -0.1,
            u_r: -0.1,
            j: 0.25,
            kappa: 0.3,
            kappa_int_l: 0.0,
            kappa_r: 0.0,
            kappa_int_r: 0.0,
        };
        let d = Drive::from_flux(6.5, 0.0);
        let ss = solve_steady_states(&p, &d).unwrap()[0];
        for &delta in &[-1.0, -0.3, 0.0, 0.4, 1.7] {
            let s = scattering_matrix(&ss, &p, delta).unwrap();
            let omega = d.omega_p + delta;
            let i = C64::i();
            let gamma = 1.0
                - p.kappa
                    / (i * (p.omega_l - omega)
                        + 0.5 * p.kappa_tot_l()
                        + p.j * p.j / (i * (p.omega_r - omega) + 0.5 * p.kappa_tot_r()));
            assert!((s.ann(0) - gamma).norm() < 1e-12, "{} vs {}", s.ann(0), gamma);
            assert!(s.cre(0).norm() < 1e-14);
            assert_relative_eq!(s.signal_gain(), 1.0, max_relative = 1e-12);
            assert!(s.idler_gain() < 1e-24);
        }
    }

    #[test]
    fn commutator_identity_holds_with_and_without_loss() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let mut tested = 0;
        while tested < 60 {
            let lossy = rng.random_range(0..2) == 1;
            let p = DimerParams {
                omega_l: rng.random_range(-0.5..0.5),
                omega_r: rng.random_range(-0.5..0.5),
                u_l: -rng.random_range(0.005..0.05),
                u_r: -rng.random_range(0.005..0.05),
                j: rng.random_range(0.3..0.9),
                kappa: 1.0,
                kappa_int_l: if lossy { rng.random_range(0.01..0.3) } else { 0.0 },
                kappa_r: if lossy { rng.random_range(0.01..0.5) } else { 0.0 },
                kappa_int_r: if lossy { rng.random_range(0.01..0.3) } else { 0.0 },
            };
            let d = Drive::from_flux(
                p.omega_p_for_drive_detuning(rng.random_range(-2.0..-1.0)),
                rng.random_range(0.0..30.0),
            );
            let states = solve_steady_states(&p, &d).unwrap();
            let Some(ss) = states.iter().find(|s| s.stable) else {
                continue;
            };
            tested += 1;
            for _ in 0..5 {
                let delta = rng.random_range(-3.0..3.0);
                let s = scattering_matrix(ss, &p, delta).unwrap();
                assert!(
                    s.commutator_defect().abs() < 1e-10,
                    "defect {} (lossy={lossy})",
                    s.commutator_defect()
                );
            }
        }
    }

    #[test]
    fn lossless_signal_idler_gain_difference_is_one() {
        let (p, _d, ss) = pumped_lossless(30.0);
        for &delta in &[-2.0, -0.9, -0.5, 0.0, 0.5, 0.9, 2.0] {
            let s = scattering_matrix(&ss, &p, delta).unwrap();
            assert!(
                (s.signal_gain() - s.idler_gain() - 1.0).abs() < 1e-10,
                "G_s - G_i = {}",
                s.signal_gain() - s.idler_gain()
            );
        }
    }

    #[test]
    fn pump_off_spectra_are_vacuum() {
        let p = DimerParams::symmetric(0.0, -0.05, 0.7, 1.0);
        let d = Drive::from_flux(-1.5, 0.0);
        let ss = solve_steady_states(&p, &d).unwrap()[0];
        let deltas: Vec<f64> = (0..20).map(|k| -2.0 + 0.2 * k as f64).collect();
        let gs = gain_spectrum(&ss, &p, &deltas).unwrap();
        for pt in &gs.points {
            assert_relative_eq!(pt.g_s, 1.0, max_relative = 1e-12);
            assert!(pt.g_i < 1e-24);
        }
        for &delta in &[0.3, 0.9, 1.4] {
            let sq = squeezing_point(&ss, &p, delta).unwrap();
            for k in 0..12 {
                let phi = k as f64 * 0.3;
                assert_relative_eq!(sq.value(phi), 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn squeezing_coefficients_match_direct_variance_sum() {
        let (p, _d, ss) = pumped_lossless(30.0);
        let delta = 0.45;
        let sq = squeezing_point(&ss, &p, delta).unwrap();
        let sp = scattering_matrix(&ss, &p, delta).unwrap();
        let sm = scattering_matrix(&ss, &p, -delta).unwrap();
        for k in 0..20 {
            let phi = 0.05 + 0.31 * k as f64;
            let e_m = C64::from_polar(1.0, -phi);
            let e_p = C64::from_polar(1.0, phi);
            let mut total = 0.0;
            for ch in 0..sp.channels.len() {
                let u = e_m * sp.ann(ch) + e_p * sm.cre(ch).conj();
                let w = e_m * sp.cre(ch) + e_p * sm.ann(ch).conj();
                total += 0.5 * (u.norm_sqr() + w.norm_sqr());
            }
            assert_relative_eq!(sq.value(phi), total, max_relative = 1e-12);
        }
    }

    #[test]
    fn lossless_min_max_product_is_one() {
        for &flux in &[5.0, 20.0, 35.0] {
            let (p, _d, ss) = pumped_lossless(flux);
            for &delta in &[0.0, 0.2, 0.7, 1.3] {
                let sq = squeezing_point(&ss, &p, delta).unwrap();
                let prod = sq.min() * sq.max();
                assert!((prod - 1.0).abs() < 1e-10, "min*max = {prod} at flux {flux}");
                // minimum noise ties to the co-located signal gain
                let g = scattering_matrix(&ss, &p, delta).unwrap().signal_gain();
                let ideal = (g.sqrt() - (g - 1.0).sqrt()).powi(2);
                assert_relative_eq!(sq.min(), ideal, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn efficiency_mixes_toward_vacuum() {
        let (p, _d, ss) = pumped_lossless(30.0);
        let sq = squeezing_point(&ss, &p, 0.5).unwrap();
        let full = sq.with_efficiency(1.0);
        assert_eq!(full, sq);
        let none = sq.with_efficiency(0.0);
        for k in 0..8 {
            assert_relative_eq!(none.value(0.4 * k as f64), 1.0, max_relative = 1e-12);
        }
        let half = sq.with_efficiency(0.5);
        for k in 0..8 {
            let phi = 0.4 * k as f64;
            assert_relative_eq!(half.value(phi), 0.5 * sq.value(phi) + 0.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn phase_slice_fit_is_exact_sinusoid() {
        let (p, _d, ss) = pumped_lossless(25.0);
        let phis: Vec<f64> = (0..36).map(|k| k as f64 * std::f64::consts::PI / 36.0).collect();
        let slice = squeezing_vs_phase(&ss, &p, 0.6, &phis).unwrap();
        let fit = slice.fit.unwrap();
        let mean = slice.samples.iter().map(|s| s.1).sum::<f64>() / slice.samples.len() as f64;
        assert!(fit.residual < 1e-9 * mean.max(1.0), "residual {}", fit.residual);
        assert_relative_eq!(fit.offset, slice.point.c0, max_relative = 1e-9);
        assert_relative_eq!(fit.amplitude, slice.point.c.norm(), max_relative = 1e-9);
    }

    #[test]
    fn gain_spectrum_fits_lorentzian_near_peak() {
        let (p, _d, ss) = pumped_lossless(38.0);
        // the shifted lower mode sits near delta ~ +0.5*kappa; fit locally
        let bw = gain_peak_and_fwhm(&ss, &p, -1.0, 2.0).unwrap();
        assert!(bw.peak > 2.0, "peak gain {}", bw.peak);
        assert!(bw.fwhm > 0.0);
        let deltas: Vec<f64> = (0..241)
            .map(|k| bw.delta_peak + bw.fwhm * (-1.5 + 3.0 * k as f64 / 240.0))
            .collect();
        let gs = gain_spectrum(&ss, &p, &deltas).unwrap();
        let fit = gs.fit.as_ref().unwrap();
        // the fit must track the curve within 1% of peak across the FWHM
        let mut worst = 0.0f64;
        for pt in &gs.points {
            if (pt.delta - bw.delta_peak).abs() <= 0.5 * bw.fwhm {
                let model = fit.baseline + fit.peak / (1.0 + 4.0 * (pt.delta - fit.center).powi(2) / (fit.fwhm * fit.fwhm));
                worst = worst.max((model - pt.g_s).abs());
            }
        }
        assert!(worst < 0.01 * bw.peak, "worst misfit {worst} of peak {}", bw.peak);
        assert_relative_eq!(fit.center, bw.delta_peak, max_relative = 0.05);
    }

    #[test]
    fn scattering_entries_have_no_branch_jumps() {
        let (p, _d, ss) = pumped_lossless(30.0);
        let h = p.kappa / 1e4;
        let mut worst2 = 0.0f64;
        let mut prev: Option<(C64, C64)> = None;
        let mut prev2: Option<(C64, C64)> = None;
        for k in 0..400 {
            let delta = -0.2 + h * k as f64;
            let s = scattering_matrix(&ss, &p, delta).unwrap();
            let cur = (s.ann(0), s.cre(0));
            if let (Some(p1), Some(p2)) = (prev, prev2) {
                // second difference kills the smooth slope, leaving jumps
                worst2 = worst2.max((cur.0 - 2.0 * p1.0 + p2.0).norm());
                worst2 = worst2.max((cur.1 - 2.0 * p1.1 + p2.1).norm());
            }
            prev2 = prev;
            prev = Some(cur);
        }
        assert!(worst2 < 1e-6, "second-difference jump {worst2}");
    }

    #[test]
    fn unstable_state_is_rejected() {
        // single-mode bistable middle branch is unstable
        let p = DimerParams {
            omega_l: 2.0,
            omega_r: 0.0,
            u_l: -0.05,
            u_r: 0.0,
            j: 0.0,
            kappa: 1.0,
            kappa_int_l: 0.0,
            kappa_r: 0.3,
            kappa_int_r: 0.0,
        };
        let d = Drive::from_flux(0.0, 18.0);
        let states = solve_steady_states(&p, &d).unwrap();
        let unstable = states.iter().find(|s| !s.stable).unwrap();
        assert!(matches!(
            scattering_matrix(unstable, &p, 0.1),
            Err(FlucError::Unstable)
        ));
    }

    #[test]
    fn vacuum_covariance_is_half_identity() {
        let p = DimerParams::symmetric(0.0, -0.05, 0.7, 1.0);
        let d = Drive::from_flux(-1.5, 0.0);
        let ss = solve_steady_states(&p, &d).unwrap()[0];
        let cov = output_covariance(&ss, &p, d.omega_p, d.omega_p + 0.8, d.omega_p - 0.8, 0.1).unwrap();
        assert!(cov.n_s.abs() < 1e-12 && cov.n_i.abs() < 1e-12);
        assert!(cov.c.norm() < 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.5 } else { 0.0 };
                assert!((cov.matrix[(i, j)] - want).abs() < 1e-10);
            }
        }
        assert_relative_eq!(cov.purity(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn pumped_lossless_narrowband_state_is_pure() {
        let (p, d, ss) = pumped_lossless(30.0);
        let delta0 = 0.45;
        let bw = p.kappa * 1e-3;
        let cov = output_covariance(&ss, &p, d.omega_p, d.omega_p + delta0, d.omega_p - delta0, bw).unwrap();
        assert!(cov.n_s > 1e-4, "pumped band should be occupied, n_s = {}", cov.n_s);
        let [v1, v2] = cov.symplectic_eigenvalues();
        assert!((v1 - 0.5).abs() < 1e-6 && (v2 - 0.5).abs() < 1e-6, "nu = {v1}, {v2}");
        assert_relative_eq!(cov.purity(), 1.0, max_relative = 1e-5);
        // physicality: symplectic eigenvalues never below the vacuum floor
        assert!(v1 >= 0.5 - 1e-9 && v2 >= 0.5 - 1e-9);
    }

    #[test]
    fn filter_preconditions_are_enforced() {
        let (p, d, ss) = pumped_lossless(10.0);
        assert!(matches!(
            output_covariance(&ss, &p, d.omega_p, d.omega_p + 0.1, d.omega_p - 0.1, 0.5),
            Err(FlucError::FilterOverlap { .. })
        ));
        assert!(matches!(
            output_covariance(&ss, &p, d.omega_p, d.omega_p + 0.4, d.omega_p - 0.6, 0.1),
            Err(FlucError::FilterAsymmetric { .. })
        ));
    }

    #[test]
    fn adaptive_simpson_matches_closed_forms() {
        let f = |x: f64| -> Result<[f64; 4], ()> {
            Ok([x * x * x, x.exp(), (5.0 * x).sin(), 1.0 / (1.0 + x * x)])
        };
        let got = integrate4(&f, 0.0, 2.0, 1e-10).unwrap();
        let want = [
            4.0,
            2f64.exp() - 1.0,
            (1.0 - (10.0f64).cos()) / 5.0,
            2f64.atan(),
        ];
        for k in 0..4 {
            assert_relative_eq!(got[k], want[k], max_relative = 1e-9);
        }
    }

    #[test]
    fn squeezing_grid_matches_pointwise_values() {
        let (p, _d, ss) = pumped_lossless(20.0);
        let deltas = [0.2, 0.5, 0.9];
        let phis = [0.0, 0.7, 1.9, 2.6];
        let grid = squeezing_spectrum(&ss, &p, &deltas, &phis).unwrap();
        for (i, &delta) in deltas.iter().enumerate() {
            let pt = squeezing_point(&ss, &p, delta).unwrap();
            for (j, &phi) in phis.iter().enumerate() {
                assert_eq!(grid.values[i * phis.len() + j], pt.value(phi));
            }
        }
    }
}
