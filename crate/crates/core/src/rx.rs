//! Terminal receiver after synchronization: DFT windowing, single-tap gain
//! estimation, equalization and QPSK demapping.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Range};

use nalgebra::DVector;

use crate::air::OffsetState;
use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::frame::{qpsk_bits, FramePlan, SampleStream};
use crate::numerics::{cis, dft_in_place, C64};
use crate::precoder::PrecoderSet;
use crate::sindr::{beta, phi};

/// Frequency-domain samples on the used subcarriers of consecutive OFDM
/// symbols. `values[i][j]` belongs to symbol `first_symbol + i` and
/// subcarrier `used[j]`; `erased[j]` flags bins the equalizer could not
/// invert.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    pub first_symbol: usize,
    pub used: Vec<usize>,
    pub values: Vec<Vec<C64>>,
    pub erased: Vec<bool>,
}

impl SymbolGrid {
    pub fn symbols(&self) -> Range<usize> {
        self.first_symbol..self.first_symbol + self.values.len()
    }

    pub fn row(&self, i: usize) -> Option<&[C64]> {
        i.checked_sub(self.first_symbol)
            .and_then(|j| self.values.get(j))
            .map(Vec::as_slice)
    }
}

/// Linear phase `exp(j pi G k / N)` undoing the window's half-CP advance.
pub fn tilt(k: usize, n: usize, g: usize) -> C64 {
    cis(PI * (g * k) as f64 / n as f64)
}

/// DFT windows of OFDM symbols `symbols` taken from the compensated stream
/// `r`; symbol `i`'s window starts at `i (N + G) - G/2`.
pub fn extract_windows(r: &SampleStream, cfg: &SystemConfig, symbols: Range<usize>) -> Result<SymbolGrid> {
    let (n, g) = (cfg.fft_size, cfg.cp_len);
    let sym = cfg.symbol_len() as i64;
    let tilts: Vec<C64> = cfg.used.iter().map(|&k| tilt(k, n, g)).collect();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    let mut values = Vec::with_capacity(symbols.len());
    for i in symbols.clone() {
        let start = i as i64 * sym - (g / 2) as i64;
        buf.copy_from_slice(r.window(start, n)?);
        dft_in_place(&mut buf)?;
        values.push(cfg.used.iter().zip(&tilts).map(|(&k, t)| buf[k] * t).collect());
    }
    Ok(SymbolGrid {
        first_symbol: symbols.start,
        used: cfg.used.clone(),
        values,
        erased: vec![false; cfg.used.len()],
    })
}

/// Per-subcarrier scalar gain `alpha[k]` on the used subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGain {
    pub used: Vec<usize>,
    pub values: Vec<C64>,
}

/// Least-squares gain from the training symbols,
/// `alpha[k] = (1/P) sum_i r_i[k] conj(s_i[k])` with unit-modulus QPSK.
pub fn estimate_gain(training: &SymbolGrid, plan: &FramePlan, user: usize, cfg: &SystemConfig) -> Result<EffectiveGain> {
    let p = plan.training_count();
    if p == 0 {
        return Err(Error::InvalidArgument("gain estimation needs at least one training symbol".into()));
    }
    if training.used != cfg.used {
        return Err(Error::Misaligned("grid subcarriers differ from the configuration".into()));
    }
    let mut values = vec![C64::new(0.0, 0.0); cfg.used.len()];
    for i in plan.training_range() {
        let row = training
            .row(i)
            .ok_or_else(|| Error::Misaligned(format!("training symbol {i} missing from the grid")))?;
        let s = plan.symbol(i);
        for (j, &k) in cfg.used.iter().enumerate() {
            values[j] += row[j] * s[(user, k)].conj();
        }
    }
    let scale = 1.0 / p as f64;
    values.iter_mut().for_each(|a| *a *= scale);
    Ok(EffectiveGain {
        used: cfg.used.clone(),
        values,
    })
}

/// Offset-free effective gains `H_u[k] A p_u[k]`, where `A` is the Bussgang
/// gain (all ones without quantization).
pub fn genie_coefficients(
    ch: &ChannelRealization,
    ps: &PrecoderSet,
    bussgang_gain: &DVector<f64>,
    user: usize,
    cfg: &SystemConfig,
) -> Result<EffectiveGain> {
    let n = cfg.fft_size;
    if bussgang_gain.len() != ps.antennas() {
        return Err(Error::Dimension(format!(
            "Bussgang gain has {} entries for {} antennas",
            bussgang_gain.len(),
            ps.antennas()
        )));
    }
    let mut values = Vec::with_capacity(ps.used().len());
    for (&k, p) in ps.used().iter().zip(ps.matrices()) {
        let hk = ch.freq_response(k, n)?;
        let mut c = C64::new(0.0, 0.0);
        for b in 0..ps.antennas() {
            c += hk[(user, b)] * bussgang_gain[b] * p[(b, user)];
        }
        values.push(c);
    }
    Ok(EffectiveGain {
        used: ps.used().to_vec(),
        values,
    })
}

/// Known effective gain on subcarrier `k` of symbol `i`:
/// `beta exp(j phi) exp(-j 2 pi eps tau_est / N) H_u[k] A p_u[k]`.
pub fn genie_gain(coefficients: &EffectiveGain, off: &OffsetState, cfg: &SystemConfig, symbol: usize) -> EffectiveGain {
    let (n, g) = (cfg.fft_size, cfg.cp_len);
    let (dtau, deps) = (off.residual_tau(), off.residual_eps());
    let common = beta(dtau, deps, n, g) * cis(-2.0 * PI * off.eps * off.tau_est as f64 / n as f64);
    let values = coefficients
        .used
        .iter()
        .zip(&coefficients.values)
        .map(|(&k, c)| common * cis(phi(dtau, deps, k, symbol as i64, n, g)) * c)
        .collect();
    EffectiveGain {
        used: coefficients.used.clone(),
        values,
    }
}

/// `s_est = conj(alpha) r / |alpha|^2`; bins with zero gain come back erased.
pub fn equalize(grid: &SymbolGrid, gain: &EffectiveGain) -> Result<SymbolGrid> {
    if grid.used != gain.used {
        return Err(Error::Misaligned("gain and grid cover different subcarriers".into()));
    }
    let erased: Vec<bool> = gain.values.iter().map(|a| a.norm_sqr() == 0.0).collect();
    let inv: Vec<C64> = gain
        .values
        .iter()
        .map(|a| if a.norm_sqr() == 0.0 { C64::new(0.0, 0.0) } else { a.conj() / a.norm_sqr() })
        .collect();
    let values = grid
        .values
        .iter()
        .map(|row| row.iter().zip(&inv).map(|(r, w)| r * w).collect())
        .collect();
    Ok(SymbolGrid {
        first_symbol: grid.first_symbol,
        used: grid.used.clone(),
        values,
        erased: erased.iter().zip(&grid.erased).map(|(a, b)| *a || *b).collect(),
    })
}

/// Bit-error tally; erased bits count as half an error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BerStats {
    pub bit_errors: u64,
    pub erased_bits: u64,
    pub total_bits: u64,
}

impl BerStats {
    pub fn ber(&self) -> f64 {
        if self.total_bits == 0 {
            return 0.0;
        }
        (self.bit_errors as f64 + 0.5 * self.erased_bits as f64) / self.total_bits as f64
    }
}

impl Add for BerStats {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            bit_errors: self.bit_errors + o.bit_errors,
            erased_bits: self.erased_bits + o.erased_bits,
            total_bits: self.total_bits + o.total_bits,
        }
    }
}

impl AddAssign for BerStats {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// Hard QPSK decisions on an equalized grid compared with the frame's data.
pub fn demap_and_count(est: &SymbolGrid, plan: &FramePlan, user: usize) -> Result<BerStats> {
    let mut st = BerStats::default();
    for (off, row) in est.values.iter().enumerate() {
        let i = est.first_symbol + off;
        if i >= plan.symbols().len() {
            return Err(Error::Misaligned(format!("grid symbol {i} beyond the frame")));
        }
        let s = plan.symbol(i);
        if user >= s.nrows() {
            return Err(Error::InvalidArgument(format!("user {user} of {}", s.nrows())));
        }
        for (j, &k) in est.used.iter().enumerate() {
            let truth = s[(user, k)];
            if truth == C64::new(0.0, 0.0) {
                return Err(Error::Misaligned(format!("symbol {i} carries no data on subcarrier {k}")));
            }
            st.total_bits += 2;
            if est.erased[j] {
                st.erased_bits += 2;
                continue;
            }
            let (a0, a1) = qpsk_bits(row[j]);
            let (b0, b1) = qpsk_bits(truth);
            st.bit_errors += (a0 != b0) as u64 + (a1 != b1) as u64;
        }
    }
    Ok(st)
}
