//! Rayleigh block-fading channels with a uniform power delay profile.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::numerics::{cis, cn, C64};

/// Impulse response of the downlink: `L` taps, each a `U x B` matrix whose
/// row `u` is `h_u^T[l]`. Constant over a whole frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    taps: Vec<DMatrix<C64>>,
}

impl ChannelRealization {
    pub fn from_taps(taps: Vec<DMatrix<C64>>) -> Result<Self> {
        let Some(first) = taps.first() else {
            return Err(Error::EmptyInput("channel taps"));
        };
        let shape = first.shape();
        if taps.iter().any(|t| t.shape() != shape) {
            return Err(Error::Dimension("all channel taps must share one U x B shape".into()));
        }
        Ok(Self { taps })
    }

    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn users(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn antennas(&self) -> usize {
        self.taps[0].ncols()
    }

    pub fn tap(&self, l: usize) -> &DMatrix<C64> {
        &self.taps[l]
    }

    pub fn taps(&self) -> &[DMatrix<C64>] {
        &self.taps
    }

    /// `H[k] = sum_l h[l] exp(-j 2 pi k l / N)`, a `U x B` matrix.
    pub fn freq_response(&self, k: usize, n: usize) -> Result<DMatrix<C64>> {
        if k >= n {
            return Err(Error::InvalidArgument(format!("subcarrier {k} outside 0..{n}")));
        }
        let mut h = self.taps[0].clone();
        for (l, tap) in self.taps.iter().enumerate().skip(1) {
            let w = cis(-2.0 * PI * ((k * l) % n) as f64 / n as f64);
            h += tap * w;
        }
        Ok(h)
    }

    /// Writes one record per `(u, l)` (user-major) holding `B` complex values
    /// as little-endian `f64` pairs `(re, im)`. No header.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        for u in 0..self.users() {
            for tap in &self.taps {
                for b in 0..self.antennas() {
                    let z = tap[(u, b)];
                    w.write_all(&z.re.to_le_bytes())?;
                    w.write_all(&z.im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    /// Inverse of [`write_dump`](Self::write_dump); the dimensions are not
    /// stored in the file and must be supplied.
    pub fn read_dump<R: Read>(mut r: R, users: usize, taps: usize, antennas: usize) -> Result<Self> {
        let mut out = vec![DMatrix::zeros(users, antennas); taps];
        let mut buf = [0u8; 8];
        let mut next = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut buf)?;
            Ok(f64::from_le_bytes(buf))
        };
        for u in 0..users {
            for tap in out.iter_mut() {
                for b in 0..antennas {
                    let re = next(&mut r)?;
                    let im = next(&mut r)?;
                    tap[(u, b)] = C64::new(re, im);
                }
            }
        }
        Self::from_taps(out)
    }
}

/// Draws every tap entry i.i.d. `CN(0, 1/L)`.
pub fn draw_channel<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<ChannelRealization> {
    if cfg.taps == 0 || cfg.users == 0 || cfg.antennas < cfg.users {
        return Err(Error::Config(format!(
            "channel needs L >= 1 and B >= U >= 1 (L = {}, B = {}, U = {})",
            cfg.taps, cfg.antennas, cfg.users
        )));
    }
    let var = 1.0 / cfg.taps as f64;
    let taps = (0..cfg.taps)
        .map(|_| DMatrix::from_fn(cfg.users, cfg.antennas, |_, _| cn(rng, var)))
        .collect();
    ChannelRealization::from_taps(taps)
}
