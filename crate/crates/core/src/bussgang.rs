//! The 1-bit DAC array and its Bussgang linearization
//! `Q(x) = A x + e`, with `e` uncorrelated with `x` for Gaussian inputs.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{ComplexVector, C64};

/// Correlations within this distance outside `[-1, 1]` are clamped.
const CLAMP_SLACK: f64 = 1e-9;

#[inline]
fn sign(v: f64) -> f64 {
    // sign(0) := +1 keeps the quantizer total
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Joint action of the `2B` 1-bit DACs: every output entry lies in
/// `sqrt(1/(2B)) {±1 ± j}` and the output vector has unit norm.
pub fn quantize(x: &[C64]) -> ComplexVector {
    let mut out = vec![C64::new(0.0, 0.0); x.len()];
    quantize_into(x, &mut out);
    out
}

pub fn quantize_into(x: &[C64], out: &mut [C64]) {
    let a = (0.5 / x.len() as f64).sqrt();
    for (o, v) in out.iter_mut().zip(x) {
        *o = C64::new(a * sign(v.re), a * sign(v.im));
    }
}

fn diag_of(c_x: &DMatrix<C64>) -> Result<Vec<f64>> {
    if !c_x.is_square() || c_x.nrows() == 0 {
        return Err(Error::Dimension(format!("covariance must be square and non-empty, got {:?}", c_x.shape())));
    }
    (0..c_x.nrows())
        .map(|i| {
            let d = c_x[(i, i)].re;
            if d > 0.0 && d.is_finite() {
                Ok(d)
            } else {
                Err(Error::DegenerateCovariance { index: i, value: d })
            }
        })
        .collect()
}

/// Diagonal of `A = sqrt(2/(pi B)) D_x^{-1/2}` with `D_x = diag(C_x)`.
pub fn bussgang_gain(c_x: &DMatrix<C64>) -> Result<DVector<f64>> {
    let d = diag_of(c_x)?;
    let b = d.len() as f64;
    let k = (2.0 / (PI * b)).sqrt();
    Ok(DVector::from_iterator(d.len(), d.iter().map(|v| k / v.sqrt())))
}

fn clamped_asin(v: f64, row: usize, col: usize) -> Result<f64> {
    if v.abs() <= 1.0 {
        return Ok(v.asin());
    }
    if v.abs() <= 1.0 + CLAMP_SLACK {
        log::warn!("clamping normalized correlation {v} at ({row}, {col})");
        return Ok(v.clamp(-1.0, 1.0).asin());
    }
    Err(Error::CorrelationOutOfRange { row, col, value: v })
}

/// Distortion covariance from the arcsine law:
///
/// `C_e = 2/(pi B) (asin(D^{-1/2} Re{C_x} D^{-1/2}) + j asin(D^{-1/2} Im{C_x} D^{-1/2})) - A C_x A`,
/// with `asin` applied entry-wise.
pub fn error_covariance(c_x: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let d = diag_of(c_x)?;
    let b = d.len();
    let k = 2.0 / (PI * b as f64);
    let inv_sqrt: Vec<f64> = d.iter().map(|v| v.sqrt().recip()).collect();
    let mut out = DMatrix::zeros(b, b);
    for col in 0..b {
        for row in 0..b {
            // the diagonal is exactly 1; asin is too steep there to absorb rounding
            let rho = if row == col {
                C64::new(1.0, 0.0)
            } else {
                c_x[(row, col)] * (inv_sqrt[row] * inv_sqrt[col])
            };
            let re = clamped_asin(rho.re, row, col)?;
            let im = clamped_asin(rho.im, row, col)?;
            // A C_x A has entries k * rho
            out[(row, col)] = C64::new(k * (re - rho.re), k * (im - rho.im));
        }
    }
    Ok(out)
}

/// Bussgang model of the DAC array for a given input covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct BussgangModel {
    gain: DVector<f64>,
    error_cov: DMatrix<C64>,
    input_cov: DMatrix<C64>,
}

impl BussgangModel {
    pub fn one_bit(c_x: &DMatrix<C64>) -> Result<Self> {
        Ok(Self {
            gain: bussgang_gain(c_x)?,
            error_cov: error_covariance(c_x)?,
            input_cov: c_x.clone(),
        })
    }

    /// Quantization-free reference: `A = I`, `C_e = 0`.
    pub fn infinite_resolution(c_x: &DMatrix<C64>) -> Self {
        let b = c_x.nrows();
        Self {
            gain: DVector::from_element(b, 1.0),
            error_cov: DMatrix::zeros(b, b),
            input_cov: c_x.clone(),
        }
    }

    pub fn for_mode(mode: crate::config::DacMode, c_x: &DMatrix<C64>) -> Result<Self> {
        match mode {
            crate::config::DacMode::OneBit => Self::one_bit(c_x),
            crate::config::DacMode::Infinite => Ok(Self::infinite_resolution(c_x)),
        }
    }

    /// Diagonal of `A`.
    pub fn gain(&self) -> &DVector<f64> {
        &self.gain
    }

    pub fn gain_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_diagonal(&self.gain.map(|g| C64::new(g, 0.0)))
    }

    pub fn error_cov(&self) -> &DMatrix<C64> {
        &self.error_cov
    }

    pub fn input_cov(&self) -> &DMatrix<C64> {
        &self.input_cov
    }

    /// `D_x = diag(C_x)`.
    pub fn input_diag(&self) -> DVector<f64> {
        DVector::from_iterator(self.input_cov.nrows(), self.input_cov.diagonal().iter().map(|z| z.re))
    }

    /// `A v` for a vector `v`.
    pub fn apply_gain(&self, v: &[C64]) -> ComplexVector {
        v.iter().zip(self.gain.iter()).map(|(z, g)| z * *g).collect()
    }

    /// `A C_x A + C_e`: the covariance of the DAC output.
    pub fn output_covariance(&self) -> DMatrix<C64> {
        let a = self.gain_matrix();
        &a * &self.input_cov * &a + &self.error_cov
    }

    /// `h^T C_e h^*` for a channel row `h`.
    pub fn distortion_power(&self, h: &[C64]) -> f64 {
        let b = h.len();
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..b {
            let mut t = C64::new(0.0, 0.0);
            for i in 0..b {
                t += h[i] * self.error_cov[(i, j)];
            }
            acc += t * h[j].conj();
        }
        acc.re.max(0.0)
    }
}
