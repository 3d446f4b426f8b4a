//! Zero-mean 1-periodic potentials as finite Fourier series.
//!
//! A potential is stored in the plain cosine/sine basis
//!
//! ```text
//! q(x) = sum_{j=1..M} a_j cos(2 pi j x) + b_j sin(2 pi j x)
//! ```
//!
//! so there is no constant term and the zero mean is structural. The
//! normalized basis `e_j = sqrt(2) cos(2 pi j x)`, `e_{-j} = -sqrt(2) sin(2 pi j x)`
//! is related by `u_j = a_j / sqrt(2)`, `u_{-j} = -b_j / sqrt(2)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectralError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Potential {
    #[serde(rename = "cos")]
    cos_coeffs: Vec<f64>,
    #[serde(rename = "sin")]
    sin_coeffs: Vec<f64>,
}

impl Potential {
    /// Validates and builds a potential; trailing all-zero modes are trimmed.
    pub fn new(cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64>) -> Result<Self> {
        if cos_coeffs.len() != sin_coeffs.len() {
            return Err(SpectralError::LengthMismatch {
                cos: cos_coeffs.len(),
                sin: sin_coeffs.len(),
            });
        }
        if let Some(index) = cos_coeffs.iter().position(|c| !c.is_finite()) {
            return Err(SpectralError::NonFiniteCoefficient { which: "cos", index });
        }
        if let Some(index) = sin_coeffs.iter().position(|c| !c.is_finite()) {
            return Err(SpectralError::NonFiniteCoefficient { which: "sin", index });
        }
        let mut q = Potential {
            cos_coeffs,
            sin_coeffs,
        };
        q.trim();
        Ok(q)
    }

    pub fn zero() -> Self {
        Potential {
            cos_coeffs: Vec::new(),
            sin_coeffs: Vec::new(),
        }
    }

    /// `amplitude * cos(2 pi mode x)`.
    pub fn cosine(mode: usize, amplitude: f64) -> Result<Self> {
        if mode == 0 {
            return Err(SpectralError::InvalidArgument(
                "mode 0 would add a constant term".into(),
            ));
        }
        let mut cos = vec![0.0; mode];
        cos[mode - 1] = amplitude;
        Potential::new(cos, vec![0.0; mode])
    }

    fn trim(&mut self) {
        while let (Some(&a), Some(&b)) = (self.cos_coeffs.last(), self.sin_coeffs.last()) {
            if a == 0.0 && b == 0.0 {
                self.cos_coeffs.pop();
                self.sin_coeffs.pop();
            } else {
                break;
            }
        }
    }

    /// Highest nonzero mode `M` (0 for the zero potential).
    pub fn modes(&self) -> usize {
        self.cos_coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.cos_coeffs.is_empty()
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos_coeffs
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin_coeffs
    }

    /// Value and first two derivatives at `x`.
    pub fn eval_with_derivatives(&self, x: f64) -> (f64, f64, f64) {
        if self.is_zero() {
            return (0.0, 0.0, 0.0);
        }
        let x = x.rem_euclid(1.0);
        let (s1, c1) = (TAU * x).sin_cos();
        let (mut c, mut s) = (c1, s1);
        let (mut q, mut dq, mut ddq) = (0.0, 0.0, 0.0);
        for (j, (&a, &b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let w = TAU * (j + 1) as f64;
            q += a * c + b * s;
            dq += w * (b * c - a * s);
            ddq -= w * w * (a * c + b * s);
            let next_c = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = next_c;
        }
        (q, dq, ddq)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivatives(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval_with_derivatives(x).1
    }

    /// Complex Fourier coefficient of `exp(2 pi i k x)`.
    pub fn fourier(&self, k: i64) -> Complex64 {
        let j = k.unsigned_abs() as usize;
        if k == 0 || j > self.modes() {
            return Complex64::new(0.0, 0.0);
        }
        let (a, b) = (self.cos_coeffs[j - 1], self.sin_coeffs[j - 1]);
        if k > 0 {
            Complex64::new(a / 2.0, -b / 2.0)
        } else {
            Complex64::new(a / 2.0, b / 2.0)
        }
    }

    pub fn scaled(&self, factor: f64) -> Potential {
        let mut q = Potential {
            cos_coeffs: self.cos_coeffs.iter().map(|c| c * factor).collect(),
            sin_coeffs: self.sin_coeffs.iter().map(|c| c * factor).collect(),
        };
        q.trim();
        q
    }

    pub fn sum(&self, other: &Potential) -> Potential {
        let m = self.modes().max(other.modes());
        let pick = |v: &[f64], j: usize| v.get(j).copied().unwrap_or(0.0);
        let mut q = Potential {
            cos_coeffs: (0..m)
                .map(|j| pick(&self.cos_coeffs, j) + pick(&other.cos_coeffs, j))
                .collect(),
            sin_coeffs: (0..m)
                .map(|j| pick(&self.sin_coeffs, j) + pick(&other.sin_coeffs, j))
                .collect(),
        };
        q.trim();
        q
    }

    /// The translate `x -> q(x + s)`.
    pub fn translated(&self, s: f64) -> Potential {
        let mut cos = Vec::with_capacity(self.modes());
        let mut sin = Vec::with_capacity(self.modes());
        for (j, (&a, &b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let (sn, cs) = (TAU * (j + 1) as f64 * s).sin_cos();
            cos.push(a * cs + b * sn);
            sin.push(b * cs - a * sn);
        }
        Potential {
            cos_coeffs: cos,
            sin_coeffs: sin,
        }
    }

    /// `||q||^2 = int_0^1 q^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.modes_iter().map(|(_, a, b)| 0.5 * (a * a + b * b)).sum()
    }

    /// `||q'||^2`.
    pub fn derivative_l2_norm_sq(&self) -> f64 {
        self.modes_iter()
            .map(|(j, a, b)| {
                let w = TAU * j as f64;
                0.5 * w * w * (a * a + b * b)
            })
            .sum()
    }

    /// `H_{-1}` norm, `(sum_j (a_j^2 + b_j^2) / (2 (2 pi j)^2))^{1/2}`,
    /// consistent with the `L^2` normalization of [`Potential::l2_norm_sq`].
    pub fn h_minus1_norm(&self) -> f64 {
        self.modes_iter()
            .map(|(j, a, b)| {
                let w = TAU * j as f64;
                0.5 * (a * a + b * b) / (w * w)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `int_0^1 q^3` by the triple convolution of Fourier coefficients.
    pub fn cubic_integral(&self) -> f64 {
        let m = self.modes() as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in -m..=m {
            let qj = self.fourier(j);
            if qj.norm_sqr() == 0.0 {
                continue;
            }
            for k in -m..=m {
                let l = -(j + k);
                if l.abs() > m {
                    continue;
                }
                acc += qj * self.fourier(k) * self.fourier(l);
            }
        }
        acc.re
    }

    fn modes_iter(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.cos_coeffs
            .iter()
            .zip(&self.sin_coeffs)
            .enumerate()
            .map(|(j, (&a, &b))| (j + 1, a, b))
    }

    /// `max_x |q(x)|`: dense sampling at `64 M` points, peaks refined by
    /// three Newton steps on `q'`.
    pub fn sup_norm(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let samples = 64 * self.modes();
        let values: Vec<f64> = (0..samples)
            .map(|i| self.eval(i as f64 / samples as f64).abs())
            .collect();
        let mut best = values.iter().cloned().fold(0.0, f64::max);
        for i in 0..samples {
            let prev = values[(i + samples - 1) % samples];
            let next = values[(i + 1) % samples];
            if values[i] >= prev && values[i] >= next {
                let mut x = i as f64 / samples as f64;
                for _ in 0..3 {
                    let (_, dq, ddq) = self.eval_with_derivatives(x);
                    if ddq == 0.0 {
                        break;
                    }
                    let step = dq / ddq;
                    // Newton must stay within the sampling cell.
                    if step.abs() > 1.0 / samples as f64 {
                        break;
                    }
                    x -= step;
                }
                best = best.max(self.eval(x).abs());
            }
        }
        best
    }
}

/// Functionals of `q` that do not need the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectFunctionals {
    /// `H_1 = int q^2`.
    pub h1: f64,
    /// `H_2 = 1/2 int (q'^2 + 2 q^3)`.
    pub h2: f64,
    pub norm_q: f64,
    pub norm_qprime: f64,
    pub sup_q: f64,
}

pub fn direct_functionals(q: &Potential) -> DirectFunctionals {
    let h1 = q.l2_norm_sq();
    let dnorm_sq = q.derivative_l2_norm_sq();
    DirectFunctionals {
        h1,
        h2: 0.5 * dnorm_sq + q.cubic_integral(),
        norm_q: h1.sqrt(),
        norm_qprime: dnorm_sq.sqrt(),
        sup_q: q.sup_norm(),
    }
}

/// `H_2(q + c) = H_2(q) + 3 c ||q||^2 + c^3` for a constant shift `c`
/// (zero mean kills the linear term).
pub fn shifted_h2(q: &Potential, c: f64) -> f64 {
    let f = direct_functionals(q);
    f.h2 + 3.0 * c * f.h1 + c * c * c
}
