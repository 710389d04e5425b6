use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resolution of the base-station DACs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DacMode {
    #[serde(alias = "one_bit")]
    OneBit,
    Infinite,
}

impl DacMode {
    pub fn label(self) -> &'static str {
        match self {
            DacMode::OneBit => "one_bit",
            DacMode::Infinite => "infinite",
        }
    }
}

/// How the terminal learns its effective per-subcarrier gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainMode {
    /// Receiver-side oracle knowledge of the effective gain.
    Genie,
    /// Least-squares estimate from the training symbols.
    Ls,
}

/// Scenario parameters shared by every stage of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of base-station antennas (B).
    pub antennas: usize,
    /// Number of single-antenna terminals (U).
    pub users: usize,
    /// DFT size (N).
    pub fft_size: usize,
    /// Cyclic-prefix length in samples (G).
    pub cp_len: usize,
    /// Channel taps (L).
    pub taps: usize,
    /// Training symbols per frame (P).
    pub training: usize,
    /// Data symbols per frame (D).
    pub data: usize,
    /// Used subcarriers, sorted and unique.
    pub used: Vec<usize>,
    /// Noise variance N0 per complex sample.
    pub noise_var: f64,
    pub dac: DacMode,
    pub gain_mode: GainMode,
    pub trials: usize,
    pub master_seed: u64,
}

/// `{1, .., S/2} ∪ {N - S/2, .., N - 1}`: the `S/2` bins on each side of DC,
/// DC itself left empty.
pub fn centered_subcarriers(n: usize, s: usize) -> Vec<usize> {
    let half = s / 2;
    let mut v: Vec<usize> = (1..=half).collect();
    v.extend(n - half..n);
    v
}

impl SystemConfig {
    /// The frequency-flat configuration of the SINDR study: B = 128, U = 8,
    /// N = S = 32, G = 16, N0 = 0 dB.
    pub fn flat_reference() -> Self {
        Self {
            antennas: 128,
            users: 8,
            fft_size: 32,
            cp_len: 16,
            taps: 1,
            training: 1,
            data: 20,
            used: (0..32).collect(),
            noise_var: 1.0,
            dac: DacMode::OneBit,
            gain_mode: GainMode::Genie,
            trials: 100,
            master_seed: 42,
        }
    }

    /// Reduced frequency-selective configuration used for the synchronization
    /// and BER experiments by default.
    pub fn desk() -> Self {
        Self {
            antennas: 32,
            users: 4,
            fft_size: 512,
            cp_len: 36,
            taps: 10,
            training: 1,
            data: 10,
            used: centered_subcarriers(512, 300),
            noise_var: 1.0,
            dac: DacMode::OneBit,
            gain_mode: GainMode::Ls,
            trials: 500,
            master_seed: 42,
        }
    }

    /// Full-size frequency-selective configuration: B = 128, U = 8, N = 2048,
    /// S = 1200, G = 144, L = 10.
    pub fn paper_scale() -> Self {
        Self {
            antennas: 128,
            users: 8,
            fft_size: 2048,
            cp_len: 144,
            used: centered_subcarriers(2048, 1200),
            trials: 100,
            ..Self::desk()
        }
    }

    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// Oversampling ratio N / S.
    pub fn osr(&self) -> f64 {
        self.fft_size as f64 / self.used.len() as f64
    }

    pub fn is_full_band(&self) -> bool {
        self.used.len() == self.fft_size
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.users == 0 {
            return fail("at least one UE is required (U >= 1)".into());
        }
        if self.antennas < self.users {
            return fail(format!(
                "need B >= U for zero-forcing, got B = {} and U = {}",
                self.antennas, self.users
            ));
        }
        if self.fft_size < 2 || self.fft_size % 2 != 0 {
            return fail(format!("DFT size N must be even and >= 2, got {}", self.fft_size));
        }
        if self.taps == 0 {
            return fail("channel needs at least one tap (L >= 1)".into());
        }
        if self.cp_len + 1 < self.taps {
            return fail(format!(
                "cyclic prefix length G = {} violates G >= L - 1 = {}",
                self.cp_len,
                self.taps - 1
            ));
        }
        if self.cp_len % 2 != 0 {
            return fail(format!("cyclic prefix length G must be even, got {}", self.cp_len));
        }
        if self.used.is_empty() {
            return fail("used-subcarrier set S is empty".into());
        }
        if self.used.windows(2).any(|w| w[0] >= w[1]) {
            return fail("used-subcarrier set S must be sorted and free of duplicates".into());
        }
        if let Some(&k) = self.used.iter().find(|&&k| k >= self.fft_size) {
            return fail(format!("used subcarrier {k} outside 0..{}", self.fft_size));
        }
        if !(self.noise_var >= 0.0) || !self.noise_var.is_finite() {
            return fail(format!("noise variance must be finite and >= 0, got {}", self.noise_var));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for cfg in [SystemConfig::flat_reference(), SystemConfig::desk(), SystemConfig::paper_scale()] {
            cfg.validate().unwrap();
        }
        let p = SystemConfig::paper_scale();
        assert_eq!(p.used.len(), 1200);
        assert_eq!(p.used[0], 1);
        assert_eq!(p.used[599], 600);
        assert_eq!(p.used[600], 2048 - 600);
        assert!(!p.used.contains(&0));
        assert!((p.osr() - 2048.0 / 1200.0).abs() < 1e-12);
    }

    #[test]
    fn cp_constraint_is_reported() {
        let mut cfg = SystemConfig::desk();
        cfg.cp_len = 4;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("G >= L - 1"), "{msg}");
    }

    #[test]
    fn rejects_bad_dimensions() {
        let mut cfg = SystemConfig::desk();
        cfg.antennas = 2;
        assert!(cfg.validate().is_err());
        let mut cfg = SystemConfig::desk();
        cfg.used.push(9999);
        assert!(cfg.validate().is_err());
        let mut cfg = SystemConfig::desk();
        cfg.fft_size = 511;
        assert!(cfg.validate().is_err());
    }
}
