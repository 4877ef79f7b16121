//! Real- and complex-coefficient polynomials with companion-matrix root
//! finding. Coefficients are stored low-to-high: c[k] multiplies x^k.

use crate::C64;
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("companion eigenvalue iteration produced non-finite roots")]
    EigenFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealPoly {
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPoly {
    pub c: Vec<C64>,
}

impl RealPoly {
    pub fn new(c: Vec<f64>) -> Self {
        Self { c }
    }

    pub fn constant(a: f64) -> Self {
        Self { c: vec![a] }
    }

    /// Degree after stripping exactly-zero leading coefficients; None for the
    /// zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.c.iter().rposition(|&x| x != 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
    }

    pub fn eval_complex(&self, z: C64) -> C64 {
        self.c
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &ck| acc * z + ck)
    }

    pub fn derivative(&self) -> RealPoly {
        if self.c.len() <= 1 {
            return RealPoly::constant(0.0);
        }
        RealPoly::new(
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &ck)| k as f64 * ck)
                .collect(),
        )
    }

    pub fn add(&self, other: &RealPoly) -> RealPoly {
        let n = self.c.len().max(other.c.len());
        let mut c = vec![0.0; n];
        for (k, slot) in c.iter_mut().enumerate() {
            *slot = self.c.get(k).copied().unwrap_or(0.0) + other.c.get(k).copied().unwrap_or(0.0);
        }
        RealPoly::new(c)
    }

    pub fn mul(&self, other: &RealPoly) -> RealPoly {
        let mut c = vec![0.0; self.c.len() + other.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            for (j, &b) in other.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        RealPoly::new(c)
    }

    pub fn scale(&self, s: f64) -> RealPoly {
        RealPoly::new(self.c.iter().map(|&x| x * s).collect())
    }

    /// All complex roots via the eigenvalues of the (balanced by coefficient
    /// normalization) companion matrix, each polished by a few Newton steps.
    pub fn all_roots(&self) -> Result<Vec<C64>, RootError> {
        let deg = self.degree().ok_or(RootError::ZeroPolynomial)?;
        if deg == 0 {
            return Ok(vec![]);
        }
        // scale to sup-norm 1 for conditioning; roots unchanged
        let sup = self.c[..=deg]
            .iter()
            .map(|x| x.abs())
            .fold(0.0f64, f64::max);
        let c: Vec<f64> = self.c[..=deg].iter().map(|x| x / sup).collect();
        let lead = c[deg];

        let roots: Vec<C64> = match deg {
            1 => vec![C64::new(-c[0] / c[1], 0.0)],
            2 => {
                // numerically stable quadratic formula
                let (a, b, cc) = (c[2], c[1], c[0]);
                let disc = C64::new(b * b - 4.0 * a * cc, 0.0).sqrt();
                let q = -0.5 * (C64::new(b, 0.0) + if b >= 0.0 { disc } else { -disc });
                if q.norm() == 0.0 {
                    vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)]
                } else {
                    vec![q / a, C64::new(cc, 0.0) / q]
                }
            }
            _ => {
                let mut companion = DMatrix::<f64>::zeros(deg, deg);
                for i in 1..deg {
                    companion[(i, i - 1)] = 1.0;
                }
                for i in 0..deg {
                    companion[(i, deg - 1)] = -c[i] / lead;
                }
                let ev = companion.complex_eigenvalues();
                if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(RootError::EigenFailure);
                }
                ev.iter().copied().collect()
            }
        };

        let poly = RealPoly::new(c);
        let deriv = poly.derivative();
        Ok(roots.into_iter().map(|r| polish_newton(&poly, &deriv, r)).collect())
    }
}

fn polish_newton(p: &RealPoly, dp: &RealPoly, mut z: C64) -> C64 {
    for _ in 0..8 {
        let f = p.eval_complex(z);
        let d = dp.eval_complex(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = f / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        let znew = z - step;
        if (znew - z).norm() <= 1e-16 * z.norm().max(1.0) {
            return znew;
        }
        z = znew;
    }
    z
}

impl ComplexPoly {
    pub fn new(c: Vec<C64>) -> Self {
        Self { c }
    }

    pub fn constant(a: C64) -> Self {
        Self { c: vec![a] }
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.c
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &ck| acc * z + ck)
    }

    pub fn add(&self, other: &ComplexPoly) -> ComplexPoly {
        let n = self.c.len().max(other.c.len());
        let zero = C64::new(0.0, 0.0);
        let mut c = vec![zero; n];
        for (k, slot) in c.iter_mut().enumerate() {
            *slot = self.c.get(k).copied().unwrap_or(zero) + other.c.get(k).copied().unwrap_or(zero);
        }
        ComplexPoly::new(c)
    }

    pub fn mul(&self, other: &ComplexPoly) -> ComplexPoly {
        let zero = C64::new(0.0, 0.0);
        let mut c = vec![zero; self.c.len() + other.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            for (j, &b) in other.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        ComplexPoly::new(c)
    }

    pub fn scale(&self, s: C64) -> ComplexPoly {
        ComplexPoly::new(self.c.iter().map(|&x| x * s).collect())
    }

    /// Coefficient-wise conjugate; equals conj(p(conj z)), so for real x,
    /// p(x)*conj_poly(x) = |p(x)|^2.
    pub fn conj(&self) -> ComplexPoly {
        ComplexPoly::new(self.c.iter().map(|x| x.conj()).collect())
    }

    /// |p|^2 as a real polynomial in a real variable.
    pub fn abs_sqr(&self) -> RealPoly {
        let prod = self.mul(&self.conj());
        RealPoly::new(prod.c.iter().map(|z| z.re).collect())
    }
}
