//! The physical downlink: integer STO, L-tap convolution, per-terminal CFO
//! rotation and AWGN,
//!
//! `y_u[n] = exp(-j 2 pi eps_u n / N) sum_l h_u^T[l] x[n - l - tau_u] + w_u[n]`.
//!
//! The CFO phase is referenced to the absolute sample index shared by the
//! transmitter and every receiver.

use std::f64::consts::PI;
use std::ops::Range;

use rand::Rng;

use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::frame::SampleStream;
use crate::numerics::{cis, cn, RngStream, C64};

/// True and estimated timing/frequency offsets of one terminal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetState {
    /// STO in samples.
    pub tau: i64,
    /// CFO normalized to the subcarrier spacing.
    pub eps: f64,
    pub tau_est: i64,
    pub eps_est: f64,
}

impl OffsetState {
    /// Offsets with perfect estimates.
    pub fn new(tau: i64, eps: f64) -> Self {
        Self {
            tau,
            eps,
            tau_est: tau,
            eps_est: eps,
        }
    }

    pub fn with_estimates(self, tau_est: i64, eps_est: f64) -> Self {
        Self { tau_est, eps_est, ..self }
    }

    /// `tau_est - tau`.
    pub fn residual_tau(&self) -> i64 {
        self.tau_est - self.tau
    }

    /// `eps_est - eps`.
    pub fn residual_eps(&self) -> f64 {
        self.eps_est - self.eps
    }
}

/// Largest STO magnitude of the default prior, `N + G/2`.
pub fn max_sto(cfg: &SystemConfig) -> i64 {
    (cfg.fft_size + cfg.cp_len / 2) as i64
}

/// Independent per-terminal offsets: `tau` uniform on the integers of
/// `[-(N + G/2), N + G/2]` (both ends included), `eps` uniform on `(-1, 1)`.
pub fn draw_offsets<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<OffsetState> {
    let m = max_sto(cfg);
    (0..cfg.users)
        .map(|_| {
            let tau = rng.random_range(-m..=m);
            let eps = loop {
                let e: f64 = rng.random_range(-1.0..1.0);
                if e > -1.0 {
                    break e;
                }
            };
            OffsetState::new(tau, eps)
        })
        .collect()
}

/// Noiseless, offset-free received signal of one terminal,
/// `z[t] = sum_l h_u^T[l] x[t - l]`, over every `t` for which all taps
/// find a transmitted sample.
pub fn convolve(tx: &SampleStream, ch: &ChannelRealization, user: usize) -> Result<SampleStream> {
    let b = tx.rows();
    if ch.antennas() != b {
        return Err(Error::Dimension(format!(
            "channel has {} antennas, stream has {b} rows",
            ch.antennas()
        )));
    }
    if user >= ch.users() {
        return Err(Error::InvalidArgument(format!("user {user} of {}", ch.users())));
    }
    let taps = ch.num_taps();
    if tx.len() < taps {
        return Err(Error::Dimension("stream shorter than the channel".into()));
    }
    let h: Vec<Vec<C64>> = ch.taps().iter().map(|t| t.row(user).iter().copied().collect()).collect();
    let x = tx.samples().as_slice();
    let out_len = tx.len() + 1 - taps;
    let mut out = Vec::with_capacity(out_len);
    for c in taps - 1..tx.len() {
        let mut acc = C64::new(0.0, 0.0);
        for (l, hl) in h.iter().enumerate() {
            let col = &x[(c - l) * b..(c - l + 1) * b];
            for (hv, xv) in hl.iter().zip(col) {
                acc += hv * xv;
            }
        }
        out.push(acc);
    }
    Ok(SampleStream::single(out, tx.origin() + taps as i64 - 1))
}

/// `y[m] = exp(-j 2 pi eps m / N) z[m - tau] + w[m]` for `m` in `range`,
/// with `w ~ CN(0, n0)` drawn in index order from `rng`.
pub fn apply_offsets<R: Rng + ?Sized>(
    z: &SampleStream,
    tau: i64,
    eps: f64,
    n0: f64,
    range: Range<i64>,
    fft_size: usize,
    rng: &mut R,
) -> Result<SampleStream> {
    if range.is_empty() {
        return Ok(SampleStream::single(Vec::new(), range.start));
    }
    let src = z.window(range.start - tau, (range.end - range.start) as usize)?;
    let w = -2.0 * PI * eps / fft_size as f64;
    let out = range
        .clone()
        .zip(src)
        .map(|(m, v)| {
            let rot = if eps == 0.0 { *v } else { v * cis(w * m as f64) };
            if n0 > 0.0 {
                rot + cn(rng, n0)
            } else {
                rot
            }
        })
        .collect();
    Ok(SampleStream::single(out, range.start))
}

/// Received streams of all terminals on the absolute index range `range`.
/// Terminal `u` draws its noise from `rng.child(u)`.
pub fn propagate(
    tx: &SampleStream,
    ch: &ChannelRealization,
    offsets: &[OffsetState],
    n0: f64,
    range: Range<i64>,
    cfg: &SystemConfig,
    rng: &RngStream,
) -> Result<Vec<SampleStream>> {
    if offsets.len() != ch.users() {
        return Err(Error::Dimension(format!(
            "{} offset states for {} users",
            offsets.len(),
            ch.users()
        )));
    }
    if !(n0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance {n0}")));
    }
    offsets
        .iter()
        .enumerate()
        .map(|(u, off)| {
            let z = convolve(tx, ch, u)?;
            apply_offsets(&z, off.tau, off.eps, n0, range.clone(), cfg.fft_size, &mut rng.child(u as u64).rng())
        })
        .collect()
}
