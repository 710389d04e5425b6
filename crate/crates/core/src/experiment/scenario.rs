//! Scenario files: TOML documents that pick a base preset and override
//! selected parameters and sweep axes.
//!
//! ```toml
//! experiment = "sindr-sweep"       # sindr-sweep | sync-rmse | ber-curve
//! preset = "flat-reference"        # flat-reference | desk | paper-scale
//! seed = 42
//! trials = 100
//! output = "fig1.csv"
//!
//! [system]
//! antennas = 128                   # B
//! users = 8                        # U
//! fft_size = 32                    # N
//! cp_len = 16                      # G
//! taps = 1                         # L
//! training = 1                     # P
//! data = 20                        # D
//! used = "all"                     # "all", { centered = 300 } or [1, 2, ...]
//! snr_db = 0.0                     # or noise_var = 1.0
//! gain_mode = "genie"              # genie | ls
//!
//! [sweep]
//! dtau = { start = -32, stop = 32 }           # step defaults to 1
//! deps = [0.0, 0.001, 0.01]
//! cfo_sweep_dtau = [0, 4, 12]
//! cfo_sweep_deps = { start = -0.9, stop = 0.9, step = 0.1 }
//! dac_modes = ["one-bit", "infinite"]
//! ```
//!
//! Every key is optional. Without `preset`, `sindr-sweep` starts from the
//! frequency-flat reference and the other experiments from the desk-scale
//! configuration. When `fft_size` is overridden but `used` is not, a
//! full-band preset stays full band and a centered preset keeps `|S|`
//! centered around DC.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::config::{centered_subcarriers, DacMode, GainMode, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::from_db;

use super::{float_range, ExperimentKind, ExperimentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    FlatReference,
    Desk,
    PaperScale,
}

impl Preset {
    pub fn config(self) -> SystemConfig {
        match self {
            Preset::FlatReference => SystemConfig::flat_reference(),
            Preset::Desk => SystemConfig::desk(),
            Preset::PaperScale => SystemConfig::paper_scale(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum UsedSpec {
    Named(String),
    Centered { centered: usize },
    List(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum IntAxis {
    List(Vec<i64>),
    Range {
        start: i64,
        stop: i64,
        #[serde(default = "one")]
        step: i64,
    },
}

fn one() -> i64 {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FloatAxis {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl IntAxis {
    fn values(&self) -> Result<Vec<i64>> {
        match *self {
            IntAxis::List(ref v) => Ok(v.clone()),
            IntAxis::Range { start, stop, step } => {
                if step <= 0 {
                    return Err(Error::Scenario(format!("range step must be positive, got {step}")));
                }
                Ok((start..=stop).step_by(step as usize).collect())
            }
        }
    }
}

impl FloatAxis {
    fn values(&self) -> Result<Vec<f64>> {
        match *self {
            FloatAxis::List(ref v) => Ok(v.clone()),
            FloatAxis::Range { start, stop, step } => {
                if !(step > 0.0) {
                    return Err(Error::Scenario(format!("range step must be positive, got {step}")));
                }
                Ok(float_range(start, stop, step))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub antennas: Option<usize>,
    pub users: Option<usize>,
    pub fft_size: Option<usize>,
    pub cp_len: Option<usize>,
    pub taps: Option<usize>,
    pub training: Option<usize>,
    pub data: Option<usize>,
    pub used: Option<UsedSpec>,
    pub noise_var: Option<f64>,
    pub snr_db: Option<f64>,
    pub dac: Option<DacMode>,
    pub gain_mode: Option<GainMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub dtau: Option<IntAxis>,
    pub deps: Option<FloatAxis>,
    pub cfo_sweep_dtau: Option<IntAxis>,
    pub cfo_sweep_deps: Option<FloatAxis>,
    pub snr_db: Option<FloatAxis>,
    pub dac_modes: Option<Vec<DacMode>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub experiment: Option<ExperimentKind>,
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub output: Option<PathBuf>,
    /// Start from [`SystemConfig::paper_scale`].
    pub paper_scale: bool,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))
    }

    /// Builds and validates the experiment and system configuration.
    pub fn resolve(&self, ov: &Overrides) -> Result<(ExperimentSpec, SystemConfig)> {
        let kind = ov
            .experiment
            .or(self.experiment)
            .ok_or_else(|| Error::Scenario("no experiment given (scenario key `experiment` or --experiment)".into()))?;
        let preset = if ov.paper_scale {
            if kind == ExperimentKind::SindrSweep {
                return Err(Error::Config(
                    "--paper-scale applies to sync-rmse and ber-curve; sindr-sweep is frequency flat".into(),
                ));
            }
            Preset::PaperScale
        } else {
            self.preset.unwrap_or(match kind {
                ExperimentKind::SindrSweep => Preset::FlatReference,
                _ => Preset::Desk,
            })
        };
        let mut cfg = preset.config();
        let s = &self.system;
        let base_full = cfg.is_full_band();
        let base_count = cfg.used.len();
        set(&mut cfg.antennas, s.antennas);
        set(&mut cfg.users, s.users);
        set(&mut cfg.fft_size, s.fft_size);
        set(&mut cfg.cp_len, s.cp_len);
        set(&mut cfg.taps, s.taps);
        set(&mut cfg.training, s.training);
        set(&mut cfg.data, s.data);
        set(&mut cfg.dac, s.dac);
        set(&mut cfg.gain_mode, s.gain_mode);
        cfg.used = match &s.used {
            Some(UsedSpec::Named(n)) if n == "all" => (0..cfg.fft_size).collect(),
            Some(UsedSpec::Named(n)) => {
                return Err(Error::Scenario(format!("unknown subcarrier set {n:?}; use \"all\", {{ centered = S }} or a list")))
            }
            Some(UsedSpec::Centered { centered }) => {
                if *centered % 2 != 0 || *centered + 1 > cfg.fft_size {
                    return Err(Error::Scenario(format!(
                        "centered set needs even S < N, got S = {centered}, N = {}",
                        cfg.fft_size
                    )));
                }
                centered_subcarriers(cfg.fft_size, *centered)
            }
            Some(UsedSpec::List(v)) => v.clone(),
            None if s.fft_size.is_none() => cfg.used,
            None if base_full => (0..cfg.fft_size).collect(),
            None => centered_subcarriers(cfg.fft_size, base_count.min(cfg.fft_size.saturating_sub(2))),
        };
        match (s.noise_var, s.snr_db) {
            (Some(_), Some(_)) => return Err(Error::Scenario("give either noise_var or snr_db, not both".into())),
            (Some(n0), None) => cfg.noise_var = n0,
            (None, Some(snr)) => cfg.noise_var = from_db(-snr),
            (None, None) => {}
        }
        set(&mut cfg.trials, self.trials);
        set(&mut cfg.trials, ov.trials);
        set(&mut cfg.master_seed, self.seed);
        set(&mut cfg.master_seed, ov.seed);

        let mut spec = ExperimentSpec::default_for(kind);
        let w = &self.sweep;
        if let Some(a) = &w.dtau {
            spec.dtau = a.values()?;
        }
        if let Some(a) = &w.deps {
            spec.deps = a.values()?;
        }
        if let Some(a) = &w.cfo_sweep_dtau {
            spec.cfo_sweep_dtau = a.values()?;
        }
        if let Some(a) = &w.cfo_sweep_deps {
            spec.cfo_sweep_deps = a.values()?;
        }
        if let Some(a) = &w.snr_db {
            spec.snr_db = a.values()?;
        }
        if let Some(m) = &w.dac_modes {
            spec.dac_modes = m.clone();
        }
        spec.output = ov.output.clone().or_else(|| self.output.clone());
        spec.validate(&cfg)?;
        Ok((spec, cfg))
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scenario_uses_presets() {
        let sc = Scenario::parse("experiment = \"sync-rmse\"").unwrap();
        let (spec, cfg) = sc.resolve(&Overrides::default()).unwrap();
        assert_eq!(cfg, SystemConfig::desk());
        assert_eq!(spec, ExperimentSpec::default_for(ExperimentKind::SyncRmse));
        let (_, cfg) = sc
            .resolve(&Overrides {
                paper_scale: true,
                ..Default::default()
            })
            .unwrap();
        assert_eq!(cfg, SystemConfig::paper_scale());
    }

    #[test]
    fn full_example() {
        let text = r#"
experiment = "sindr_sweep"
seed = 7
trials = 3
[system]
antennas = 16
users = 2
snr_db = 10.0
[sweep]
dtau = { start = -4, stop = 4, step = 2 }
deps = [0.0]
cfo_sweep_deps = { start = -0.2, stop = 0.2, step = 0.1 }
dac_modes = ["one_bit"]
"#;
        let (spec, cfg) = Scenario::parse(text).unwrap().resolve(&Overrides::default()).unwrap();
        assert_eq!((cfg.antennas, cfg.users, cfg.trials, cfg.master_seed), (16, 2, 3, 7));
        assert!((cfg.noise_var - 0.1).abs() < 1e-15);
        assert_eq!(spec.dtau, vec![-4, -2, 0, 2, 4]);
        assert_eq!(spec.cfo_sweep_deps, vec![-0.2, -0.1, 0.0, 0.1, 0.2]);
        assert_eq!(spec.dac_modes, vec![DacMode::OneBit]);
    }

    #[test]
    fn overrides_win() {
        let sc = Scenario::parse("experiment = \"ber-curve\"\nseed = 1").unwrap();
        let (spec, cfg) = sc
            .resolve(&Overrides {
                experiment: Some(ExperimentKind::SyncRmse),
                seed: Some(99),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(spec.kind, ExperimentKind::SyncRmse);
        assert_eq!(cfg.master_seed, 99);
    }

    #[test]
    fn subcarrier_sets_follow_n() {
        let sc = Scenario::parse("experiment = \"ber-curve\"\n[system]\nfft_size = 128").unwrap();
        let (_, cfg) = sc.resolve(&Overrides::default()).unwrap();
        assert_eq!(cfg.used, centered_subcarriers(128, 126));
        let sc = Scenario::parse("experiment = \"ber-curve\"\n[system]\nfft_size = 128\nused = { centered = 64 }").unwrap();
        assert_eq!(sc.resolve(&Overrides::default()).unwrap().1.used.len(), 64);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Scenario::parse("experiment = \"sync-rmse\"\nbogus = 1").is_err());
        assert!(Scenario::parse("[system]\nantenas = 3").is_err());
        let bad = Scenario::parse("experiment = \"ber-curve\"\n[system]\ntaps = 10\ncp_len = 4").unwrap();
        let msg = bad.resolve(&Overrides::default()).unwrap_err().to_string();
        assert!(msg.contains("cyclic prefix"), "{msg}");
        assert!(Scenario::default().resolve(&Overrides::default()).is_err());
    }
}
