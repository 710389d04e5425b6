//! Closed-form SINDR of a frequency-flat link (L = 1, S = all N subcarriers)
//! under residual STO `dtau` and residual CFO `deps`.
//!
//! The desired stream `h^T A p_u` reaches subcarrier `k` of OFDM symbol `i`
//! scaled by `beta(dtau, deps) exp(j phi_k^(i)(dtau, deps))`; the rest of its
//! power leaks into ISI (`psi/N`) and ICI (`1 - beta^2 - psi/N`).

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::bussgang::BussgangModel;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::numerics::{cis, C64};
use crate::precoder::PrecoderSet;

/// Residual (post-compensation) timing and frequency offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub dtau: i64,
    pub deps: f64,
}

impl Residual {
    pub fn new(dtau: i64, deps: f64) -> Self {
        Self { dtau, deps }
    }
}

/// Number of samples of a neighbouring OFDM symbol inside the DFT window.
pub fn psi(dtau: i64, g: usize) -> usize {
    let half = (g / 2) as i64;
    if dtau < -half {
        (-dtau - half) as usize
    } else if dtau > half {
        (dtau - half) as usize
    } else {
        0
    }
}

/// Attenuation of the desired subcarrier,
/// `sin(pi deps (N - psi) / N) / (N sin(pi deps / N))`, and its limit
/// `(N - psi) / N` at `deps = 0`.
pub fn beta(dtau: i64, deps: f64, n: usize, g: usize) -> f64 {
    let nf = n as f64;
    let own = nf - psi(dtau, g) as f64;
    if deps == 0.0 {
        return own / nf;
    }
    (PI * deps * own / nf).sin() / (nf * (PI * deps / nf).sin())
}

/// Phase rotation of subcarrier `k` in OFDM symbol `i`:
///
/// `2 pi (dtau k + deps (N + G) i) / N - pi deps psi sign(dtau - G/2) / N + pi deps (N - G - 1) / N`
///
/// with `sign(0) = +1`; `psi` vanishes wherever the sign is ambiguous.
pub fn phi(dtau: i64, deps: f64, k: usize, i: i64, n: usize, g: usize) -> f64 {
    let (nf, gf) = (n as f64, g as f64);
    let s = if (dtau as f64) - gf / 2.0 >= 0.0 { 1.0 } else { -1.0 };
    2.0 * PI * (dtau as f64 * k as f64 + deps * (nf + gf) * i as f64) / nf - PI * deps * psi(dtau, g) as f64 * s / nf
        + PI * deps * (nf - gf - 1.0) / nf
}

/// Offset-independent part of a terminal's link: the gains `h^T A p_v` of
/// every stream and the distortion power `h^T C_e h^*`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    user: usize,
    coefficients: Vec<C64>,
    distortion: f64,
}

impl LinkBudget {
    pub fn new(h: &[C64], bm: &BussgangModel, p: &DMatrix<C64>, user: usize) -> Result<Self> {
        let b = h.len();
        if p.nrows() != b || bm.gain().len() != b {
            return Err(Error::Dimension(format!(
                "channel row has {b} entries, precoder {} rows, Bussgang model {}",
                p.nrows(),
                bm.gain().len()
            )));
        }
        if user >= p.ncols() {
            return Err(Error::InvalidArgument(format!("user {user} of {}", p.ncols())));
        }
        let ha: Vec<C64> = bm.apply_gain(h);
        let coefficients = (0..p.ncols())
            .map(|v| ha.iter().zip(p.column(v).iter()).map(|(a, q)| a * q).sum())
            .collect();
        Ok(Self {
            user,
            coefficients,
            distortion: bm.distortion_power(h),
        })
    }

    /// `h^T A p_u`.
    pub fn desired(&self) -> C64 {
        self.coefficients[self.user]
    }

    /// `sum_{v != u} |h^T A p_v|^2`.
    pub fn mui(&self) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(v, _)| *v != self.user)
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    pub fn report(&self, res: Residual, n0: f64, n: usize, g: usize) -> SindrReport {
        let desired = self.desired().norm_sqr();
        let ps = psi(res.dtau, g);
        let b = beta(res.dtau, res.deps, n, g);
        let frac = ps as f64 / n as f64;
        let signal = b * b * desired;
        let isi = frac * desired;
        let ici = ((1.0 - b * b - frac) * desired).max(0.0);
        let mui = self.mui();
        let denom = isi + ici + mui + self.distortion + n0;
        SindrReport {
            residual: res,
            fft_size: n,
            cp_len: g,
            psi: ps,
            beta: b,
            desired_power: desired,
            signal_power: signal,
            isi,
            ici,
            mui,
            distortion_power: self.distortion,
            noise_power: n0,
            sindr: signal / denom,
        }
    }
}

/// Power decomposition of one terminal's received subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct SindrReport {
    pub residual: Residual,
    pub fft_size: usize,
    pub cp_len: usize,
    pub psi: usize,
    pub beta: f64,
    /// `|h^T A p_u|^2`, split into `signal_power + isi + ici`.
    pub desired_power: f64,
    pub signal_power: f64,
    pub isi: f64,
    pub ici: f64,
    pub mui: f64,
    pub distortion_power: f64,
    pub noise_power: f64,
    pub sindr: f64,
}

impl SindrReport {
    pub fn phi(&self, k: usize, i: i64) -> f64 {
        phi(self.residual.dtau, self.residual.deps, k, i, self.fft_size, self.cp_len)
    }

    pub fn sindr_db(&self) -> f64 {
        crate::numerics::to_db(self.sindr)
    }
}

/// Effective gain `beta exp(j phi_k^(i)) c` seen on subcarrier `k` of symbol
/// `i` for a desired coefficient `c`.
pub fn effective_gain(c: C64, res: Residual, k: usize, i: i64, n: usize, g: usize) -> C64 {
    c * beta(res.dtau, res.deps, n, g) * cis(phi(res.dtau, res.deps, k, i, n, g))
}

/// SINDR of terminal `user` with channel row `h` (`h_u^T`).
pub fn sindr(
    h: &[C64],
    bm: &BussgangModel,
    ps: &PrecoderSet,
    user: usize,
    res: Residual,
    n0: f64,
    cfg: &SystemConfig,
) -> Result<SindrReport> {
    let (n, g) = (cfg.fft_size, cfg.cp_len);
    if cfg.taps != 1 {
        return Err(Error::AnalysisDomain(format!("frequency-flat channel required, L = {}", cfg.taps)));
    }
    if !cfg.is_full_band() {
        return Err(Error::AnalysisDomain(format!(
            "all {n} subcarriers must be used, |S| = {}",
            cfg.used.len()
        )));
    }
    if res.dtau.unsigned_abs() > (n + g / 2) as u64 {
        return Err(Error::AnalysisDomain(format!("|dtau| = {} exceeds N + G/2", res.dtau.abs())));
    }
    if !(res.deps.abs() < 1.0) {
        return Err(Error::AnalysisDomain(format!("|deps| = {} must be below 1", res.deps.abs())));
    }
    if !ps.is_flat() {
        return Err(Error::NotFlat);
    }
    Ok(LinkBudget::new(h, bm, &ps.matrices()[0], user)?.report(res, n0, n, g))
}
