//! Downlink frame construction: preamble, training and data symbols,
//! precoding, OFDM modulation with cyclic prefix, and the DAC stage.
//!
//! Time is absolute throughout: OFDM symbol `i` occupies samples
//! `i (N + G) - G ..= i (N + G) + N - 1`, the first `G` of which are the
//! cyclic prefix. Symbol 0 is the synchronization preamble.

use nalgebra::DMatrix;
use rand::Rng;

use crate::bussgang::quantize_into;
use crate::config::{DacMode, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{idft_in_place, RngStream, C64};
use crate::precoder::PrecoderSet;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Gray-mapped QPSK: `(b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`.
pub fn qpsk(b0: bool, b1: bool) -> C64 {
    let s = |b: bool| if b { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    C64::new(s(b0), s(b1))
}

/// Hard decision, inverse of [`qpsk`].
pub fn qpsk_bits(z: C64) -> (bool, bool) {
    (z.re < 0.0, z.im < 0.0)
}

pub fn random_qpsk<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    qpsk(rng.random(), rng.random())
}

/// One OFDM symbol worth of frequency-domain data: `U x N`, QPSK on the used
/// subcarriers and zero elsewhere.
pub fn random_symbol<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> DMatrix<C64> {
    let mut s = DMatrix::zeros(cfg.users, cfg.fft_size);
    for u in 0..cfg.users {
        for &k in &cfg.used {
            s[(u, k)] = random_qpsk(rng);
        }
    }
    s
}

/// Schmidl-Cox preamble: QPSK on the even used subcarriers only, so the
/// time-domain symbol repeats after `N/2` samples. The even bins are scaled
/// by `sqrt(|S| / |S_even|)` so the preamble carries the same average power
/// as a data symbol.
pub fn build_preamble<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<DMatrix<C64>> {
    if cfg.fft_size % 2 != 0 {
        return Err(Error::Config(format!("preamble needs even N, got {}", cfg.fft_size)));
    }
    let even: Vec<usize> = cfg.used.iter().copied().filter(|k| k % 2 == 0).collect();
    if even.is_empty() {
        return Err(Error::Config("used-subcarrier set has no even subcarrier for the preamble".into()));
    }
    let scale = (cfg.used.len() as f64 / even.len() as f64).sqrt();
    let mut s = DMatrix::zeros(cfg.users, cfg.fft_size);
    for u in 0..cfg.users {
        for &k in &even {
            s[(u, k)] = random_qpsk(rng) * scale;
        }
    }
    Ok(s)
}

/// Frequency-domain content of one frame, one `U x N` matrix per OFDM symbol:
/// the preamble, then `P` training symbols, then `D` data symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePlan {
    symbols: Vec<DMatrix<C64>>,
    training: usize,
    data: usize,
}

impl FramePlan {
    pub fn random(cfg: &SystemConfig, rng: &RngStream) -> Result<Self> {
        let mut r = rng.rng();
        let mut symbols = vec![build_preamble(cfg, &mut r)?];
        for _ in 0..cfg.training + cfg.data {
            symbols.push(random_symbol(cfg, &mut r));
        }
        Ok(Self {
            symbols,
            training: cfg.training,
            data: cfg.data,
        })
    }

    pub fn from_symbols(symbols: Vec<DMatrix<C64>>, training: usize, data: usize) -> Result<Self> {
        if symbols.len() != 1 + training + data {
            return Err(Error::Dimension(format!(
                "{} symbols for a frame of 1 + {training} + {data}",
                symbols.len()
            )));
        }
        Ok(Self { symbols, training, data })
    }

    pub fn symbols(&self) -> &[DMatrix<C64>] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> &DMatrix<C64> {
        &self.symbols[i]
    }

    pub fn preamble(&self) -> &DMatrix<C64> {
        &self.symbols[0]
    }

    pub fn training_count(&self) -> usize {
        self.training
    }

    pub fn data_count(&self) -> usize {
        self.data
    }

    /// Symbol indices of the training symbols, `1..=P`.
    pub fn training_range(&self) -> std::ops::Range<usize> {
        1..1 + self.training
    }

    /// Symbol indices of the data symbols, `P+1..=P+D`.
    pub fn data_range(&self) -> std::ops::Range<usize> {
        1 + self.training..1 + self.training + self.data
    }
}

/// A block of complex baseband samples. Column `c` holds the sample at
/// absolute time `origin + c`; rows are BS antennas at the transmitter and a
/// single row at a terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    samples: DMatrix<C64>,
    origin: i64,
}

impl SampleStream {
    pub fn new(samples: DMatrix<C64>, origin: i64) -> Self {
        Self { samples, origin }
    }

    pub fn zeros(rows: usize, len: usize, origin: i64) -> Self {
        Self::new(DMatrix::zeros(rows, len), origin)
    }

    /// Single-row stream.
    pub fn single(samples: Vec<C64>, origin: i64) -> Self {
        let n = samples.len();
        Self::new(DMatrix::from_vec(1, n, samples), origin)
    }

    pub fn rows(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    /// One past the last absolute time index.
    pub fn end(&self) -> i64 {
        self.origin + self.len() as i64
    }

    pub fn samples(&self) -> &DMatrix<C64> {
        &self.samples
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.origin && t < self.end()
    }

    fn offset(&self, t: i64) -> Result<usize> {
        if self.contains(t) {
            Ok((t - self.origin) as usize)
        } else {
            Err(Error::OutOfRange {
                index: t,
                start: self.origin,
                end: self.end(),
            })
        }
    }

    /// All rows at absolute time `t`.
    pub fn column(&self, t: i64) -> Result<&[C64]> {
        let c = self.offset(t)?;
        let r = self.rows();
        Ok(&self.samples.as_slice()[c * r..(c + 1) * r])
    }

    pub fn get(&self, row: usize, t: i64) -> Result<C64> {
        Ok(self.samples[(row, self.offset(t)?)])
    }

    /// Samples of a single-row stream.
    pub fn as_single(&self) -> &[C64] {
        assert_eq!(self.rows(), 1, "as_single on a {}-row stream", self.rows());
        self.samples.as_slice()
    }

    /// `len` samples of a single-row stream starting at absolute time `start`.
    pub fn window(&self, start: i64, len: usize) -> Result<&[C64]> {
        let s = self.as_single();
        if len == 0 {
            return Ok(&s[..0]);
        }
        let a = self.offset(start)?;
        self.offset(start + len as i64 - 1)?;
        Ok(&s[a..a + len])
    }

    /// Norm of the column at absolute time `t`.
    pub fn column_norm(&self, t: i64) -> Result<f64> {
        Ok(self.column(t)?.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
    }
}

/// OFDM-modulates consecutive symbols starting at absolute symbol index
/// `first_index`: precoding `x[k] = sum_u p_u[k] s_u[k]`, a size-N IDFT per
/// antenna, a `G`-sample cyclic prefix, and the DAC stage.
pub fn modulate_symbols(
    symbols: &[DMatrix<C64>],
    first_index: i64,
    ps: &PrecoderSet,
    cfg: &SystemConfig,
    dac: DacMode,
) -> Result<SampleStream> {
    let (n, g, b) = (cfg.fft_size, cfg.cp_len, cfg.antennas);
    if ps.antennas() != b || ps.users() != cfg.users || ps.fft_size() != n || ps.used() != cfg.used.as_slice() {
        return Err(Error::Dimension("precoder does not match the configuration".into()));
    }
    let sym_len = n + g;
    let mut out = DMatrix::zeros(b, sym_len * symbols.len());
    let mut rows = vec![vec![C64::new(0.0, 0.0); n]; b];
    for (i, s) in symbols.iter().enumerate() {
        if s.shape() != (cfg.users, n) {
            return Err(Error::Dimension(format!("symbol {i} is {:?}, expected ({}, {n})", s.shape(), cfg.users)));
        }
        for r in rows.iter_mut() {
            r.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        }
        for (&k, p) in ps.used().iter().zip(ps.matrices()) {
            for u in 0..cfg.users {
                let su = s[(u, k)];
                if su == C64::new(0.0, 0.0) {
                    continue;
                }
                for (bb, row) in rows.iter_mut().enumerate() {
                    row[k] += p[(bb, u)] * su;
                }
            }
        }
        for row in rows.iter_mut() {
            idft_in_place(row)?;
        }
        let base = i * sym_len;
        for (bb, row) in rows.iter().enumerate() {
            for j in 0..sym_len {
                // column j maps to in-symbol time j - G, wrapped for the CP
                out[(bb, base + j)] = row[(j + n - g) % n];
            }
        }
    }
    if dac == DacMode::OneBit {
        let mut buf = vec![C64::new(0.0, 0.0); b];
        for mut col in out.column_iter_mut() {
            quantize_into(col.as_slice(), &mut buf);
            col.as_mut_slice().copy_from_slice(&buf);
        }
    }
    Ok(SampleStream::new(out, first_index * sym_len as i64 - g as i64))
}

/// Transmit samples of a whole frame; origin is `-G`.
pub fn modulate_frame(plan: &FramePlan, ps: &PrecoderSet, cfg: &SystemConfig, dac: DacMode) -> Result<SampleStream> {
    modulate_symbols(plan.symbols(), 0, ps, cfg, dac)
}

/// What goes into guard samples.
#[derive(Debug, Clone, Copy)]
pub enum Filler<'a> {
    Zeros,
    /// Precoded random QPSK OFDM symbols through the same DAC stage.
    RandomData {
        precoder: &'a PrecoderSet,
        cfg: &'a SystemConfig,
        dac: DacMode,
        rng: RngStream,
    },
}

/// Extends a stream by `left` samples before and `right` samples after;
/// the origin moves to `origin - left`.
pub fn pad_stream(s: &SampleStream, left: usize, right: usize, filler: &Filler<'_>) -> Result<SampleStream> {
    if left == 0 && right == 0 {
        return Ok(s.clone());
    }
    let rows = s.rows();
    let len = s.len();
    let mut out = DMatrix::zeros(rows, left + len + right);
    out.columns_mut(left, len).copy_from(s.samples());
    if let Filler::RandomData { precoder, cfg, dac, rng } = *filler {
        if rows != cfg.antennas {
            return Err(Error::Dimension("random-data filler needs an antenna-domain stream".into()));
        }
        let sym_len = cfg.symbol_len();
        let gen = |count: usize, tag: u64| -> Result<SampleStream> {
            let mut r = rng.child(tag).rng();
            let syms: Vec<_> = (0..count.div_ceil(sym_len)).map(|_| random_symbol(cfg, &mut r)).collect();
            modulate_symbols(&syms, 0, precoder, cfg, dac)
        };
        if left > 0 {
            let f = gen(left, 0)?;
            let skip = f.len() - left;
            out.columns_mut(0, left).copy_from(&f.samples().columns(skip, left));
        }
        if right > 0 {
            let f = gen(right, 1)?;
            out.columns_mut(left + len, right).copy_from(&f.samples().columns(0, right));
        }
    }
    Ok(SampleStream::new(out, s.origin() - left as i64))
}

/// Zero samples placed beyond the random-data guard symbols on each side.
pub fn guard_zeros(cfg: &SystemConfig) -> usize {
    cfg.fft_size + cfg.cp_len / 2 + cfg.taps
}

/// Default guard: one random-data OFDM symbol on each side, then
/// [`guard_zeros`] zero samples, so any STO within `±(N + G/2)` stays inside
/// the stream for the whole receiver search range.
pub fn guard_frame(
    s: &SampleStream,
    ps: &PrecoderSet,
    cfg: &SystemConfig,
    dac: DacMode,
    rng: &RngStream,
) -> Result<SampleStream> {
    let sym = cfg.symbol_len();
    let data = pad_stream(
        s,
        sym,
        sym,
        &Filler::RandomData {
            precoder: ps,
            cfg,
            dac,
            rng: *rng,
        },
    )?;
    let z = guard_zeros(cfg);
    pad_stream(&data, z, z, &Filler::Zeros)
}
