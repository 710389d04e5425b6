//! Random streams, Gaussian sampling and the unitary DFT pair.
//!
//! Both transforms carry a `1/sqrt(N)` factor so that the forward transform
//! uses `exp(-j 2 pi k n / N)` and the inverse `exp(+j 2 pi k n / N)` and the
//! pair is unitary.

use std::cell::RefCell;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexVector = Vec<C64>;

/// Identifies one independent random sequence: a master seed plus a stream
/// index.
///
/// Streams are split in counter mode: every consumer that needs randomness
/// (a trial, a UE inside a trial, an SNR point) derives its own child stream
/// with [`RngStream::child`], so results never depend on the order in which
/// trials are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derives an independent sub-stream labelled by `tag`.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One draw from `CN(0, variance)`.
pub fn cn<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// `count` i.i.d. circularly-symmetric complex Gaussian samples.
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R, variance: f64, count: usize) -> Result<ComplexVector> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be finite and non-negative, got {variance}"
        )));
    }
    Ok((0..count).map(|_| cn(rng, variance)).collect())
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform_in_place(buf: &mut [C64], inverse: bool) -> Result<()> {
    let n = buf.len();
    if n == 0 {
        return Err(Error::EmptyInput(if inverse { "idft" } else { "dft" }));
    }
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    fft.process(buf);
    let scale = 1.0 / (n as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
    Ok(())
}

/// Unitary forward DFT, in place.
pub fn dft_in_place(buf: &mut [C64]) -> Result<()> {
    transform_in_place(buf, false)
}

/// Unitary inverse DFT, in place.
pub fn idft_in_place(buf: &mut [C64]) -> Result<()> {
    transform_in_place(buf, true)
}

/// `X[k] = (1/sqrt(N)) sum_n v[n] exp(-j 2 pi k n / N)`.
pub fn dft(v: &[C64]) -> Result<ComplexVector> {
    let mut out = v.to_vec();
    dft_in_place(&mut out)?;
    Ok(out)
}

/// `x[n] = (1/sqrt(N)) sum_k X[k] exp(+j 2 pi k n / N)`.
pub fn idft(v: &[C64]) -> Result<ComplexVector> {
    let mut out = v.to_vec();
    idft_in_place(&mut out)?;
    Ok(out)
}

/// `exp(j theta)`.
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Squared Euclidean norm.
pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
