//! Monte-Carlo experiments and their CSV tables.
//!
//! Trial `t` of every experiment draws from `RngStream::new(seed, t)`;
//! the channel, frame, offsets and noise of a trial come from fixed child
//! streams of it, so DAC modes and synchronization modes see identical draws
//! and results do not depend on scheduling.

pub mod analysis;
pub mod ber;
pub mod csv;
pub mod scenario;
pub mod sindr_sweep;
pub mod sync_rmse;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{DacMode, SystemConfig};
use crate::error::{Error, Result};
use crate::par::Execution;

pub use ber::{run_ber_curve, BerRow};
pub use sindr_sweep::{run_sindr_sweep, SindrRow};
pub use sync_rmse::{run_sync_rmse, RmseRow};

pub(crate) const TAG_CHANNEL: u64 = 1;
pub(crate) const TAG_PLAN: u64 = 2;
pub(crate) const TAG_GUARD: u64 = 3;
pub(crate) const TAG_OFFSETS: u64 = 4;
pub(crate) const TAG_NOISE: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[serde(alias = "sindr_sweep")]
    SindrSweep,
    #[serde(alias = "sync_rmse")]
    SyncRmse,
    #[serde(alias = "ber_curve")]
    BerCurve,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::SindrSweep => "sindr-sweep",
            ExperimentKind::SyncRmse => "sync-rmse",
            ExperimentKind::BerCurve => "ber-curve",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "sindr-sweep" => Ok(Self::SindrSweep),
            "sync-rmse" => Ok(Self::SyncRmse),
            "ber-curve" => Ok(Self::BerCurve),
            _ => Err(Error::Scenario(format!(
                "unknown experiment {s:?}; expected sindr-sweep, sync-rmse or ber-curve"
            ))),
        }
    }
}

/// Timing/frequency acquisition used by the BER experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyncMode {
    SchmidlCox,
    /// True offsets handed to the receiver.
    Perfect,
}

impl SyncMode {
    pub const ALL: [SyncMode; 2] = [SyncMode::SchmidlCox, SyncMode::Perfect];

    pub fn label(self) -> &'static str {
        match self {
            SyncMode::SchmidlCox => "schmidl_cox",
            SyncMode::Perfect => "perfect",
        }
    }
}

/// What to run and over which sweep axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Residual STO axis of the SINDR sweep.
    pub dtau: Vec<i64>,
    /// Residual CFO values crossed with `dtau`.
    pub deps: Vec<f64>,
    /// Fixed residual STOs of the CFO sweep.
    pub cfo_sweep_dtau: Vec<i64>,
    /// Residual CFO axis of the CFO sweep.
    pub cfo_sweep_deps: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub dac_modes: Vec<DacMode>,
    pub output: Option<PathBuf>,
}

/// `start, start + step, ..` up to and including `stop` (with a small
/// tolerance for floating-point steps).
pub fn float_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as i64;
    (0..=count.max(-1)).map(|i| start + i as f64 * step).map(|v| (v * 1e12).round() / 1e12).collect()
}

impl ExperimentSpec {
    pub fn default_for(kind: ExperimentKind) -> Self {
        let both = vec![DacMode::OneBit, DacMode::Infinite];
        match kind {
            ExperimentKind::SindrSweep => Self {
                kind,
                dtau: (-32..=32).collect(),
                deps: vec![0.0, 0.001, 0.01],
                cfo_sweep_dtau: vec![0, 4, 12],
                cfo_sweep_deps: float_range(-0.9, 0.9, 0.1),
                snr_db: vec![],
                dac_modes: both,
                output: None,
            },
            ExperimentKind::SyncRmse => Self {
                kind,
                dtau: vec![],
                deps: vec![],
                cfo_sweep_dtau: vec![],
                cfo_sweep_deps: vec![],
                snr_db: float_range(-10.0, 30.0, 2.0),
                dac_modes: both,
                output: None,
            },
            ExperimentKind::BerCurve => Self {
                kind,
                dtau: vec![],
                deps: vec![],
                cfo_sweep_dtau: vec![],
                cfo_sweep_deps: vec![],
                snr_db: float_range(-10.0, 30.0, 2.0),
                dac_modes: both,
                output: None,
            },
        }
    }

    /// Checks that the axes are usable and that `cfg` suits the experiment.
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        cfg.validate()?;
        if self.dac_modes.is_empty() {
            return Err(Error::Config("at least one DAC mode must be evaluated".into()));
        }
        if cfg.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        match self.kind {
            ExperimentKind::SindrSweep => {
                if cfg.taps != 1 {
                    return Err(Error::Config(format!(
                        "sindr-sweep needs a frequency-flat channel (L = 1), got L = {}",
                        cfg.taps
                    )));
                }
                if !cfg.is_full_band() {
                    return Err(Error::Config(format!(
                        "sindr-sweep needs all N = {} subcarriers in use, |S| = {}",
                        cfg.fft_size,
                        cfg.used.len()
                    )));
                }
                if cfg.data == 0 {
                    return Err(Error::Config("sindr-sweep needs at least one data symbol".into()));
                }
                let grid_empty = self.dtau.is_empty() || self.deps.is_empty();
                let sweep_empty = self.cfo_sweep_dtau.is_empty() || self.cfo_sweep_deps.is_empty();
                if grid_empty && sweep_empty {
                    return Err(Error::Config("sindr-sweep axes are empty".into()));
                }
                let lim = (cfg.fft_size + cfg.cp_len / 2) as i64;
                for &t in self.dtau.iter().chain(&self.cfo_sweep_dtau) {
                    if t.abs() > lim {
                        return Err(Error::Config(format!("|dtau| = {} exceeds N + G/2 = {lim}", t.abs())));
                    }
                }
                for &e in self.deps.iter().chain(&self.cfo_sweep_deps) {
                    if !(e.abs() < 1.0) {
                        return Err(Error::Config(format!("|deps| = {e} must be below 1")));
                    }
                }
            }
            ExperimentKind::SyncRmse | ExperimentKind::BerCurve => {
                if self.snr_db.is_empty() {
                    return Err(Error::Config(format!("{} needs a non-empty SNR axis", self.kind)));
                }
                if self.snr_db.iter().any(|s| !s.is_finite()) {
                    return Err(Error::Config("SNR values must be finite".into()));
                }
                if self.kind == ExperimentKind::BerCurve && cfg.data == 0 {
                    return Err(Error::Config("ber-curve needs at least one data symbol".into()));
                }
                if self.kind == ExperimentKind::BerCurve
                    && cfg.gain_mode == crate::config::GainMode::Ls
                    && cfg.training == 0
                {
                    return Err(Error::Config("LS gain estimation needs P >= 1 training symbols".into()));
                }
            }
        }
        Ok(())
    }
}

/// Output of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Table {
    Sindr(Vec<SindrRow>),
    Rmse(Vec<RmseRow>),
    Ber(Vec<BerRow>),
}

impl Table {
    pub fn header(&self) -> &'static [&'static str] {
        match self {
            Table::Sindr(_) => &["dtau", "deps", "analytical_sindr_db", "simulated_sindr_db", "dac_mode"],
            Table::Rmse(_) => &["snr_db", "dac_mode", "sto_rmse_samples", "cfo_rmse"],
            Table::Ber(_) => &["snr_db", "dac_mode", "sync_mode", "ber"],
        }
    }

    fn rows(&self) -> Vec<Vec<String>> {
        use csv::format_float as f;
        match self {
            Table::Sindr(rows) => rows
                .iter()
                .map(|r| {
                    vec![
                        r.dtau.to_string(),
                        f(r.deps),
                        f(r.analytical_db),
                        f(r.simulated_db),
                        r.dac.label().into(),
                    ]
                })
                .collect(),
            Table::Rmse(rows) => rows
                .iter()
                .map(|r| vec![f(r.snr_db), r.dac.label().into(), f(r.sto_rmse), f(r.cfo_rmse)])
                .collect(),
            Table::Ber(rows) => rows
                .iter()
                .map(|r| vec![f(r.snr_db), r.dac.label().into(), r.sync.label().into(), f(r.ber)])
                .collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        csv::write_table(w, self.header(), &self.rows())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }
}

/// Validates and runs the experiment described by `spec`.
pub fn run(spec: &ExperimentSpec, cfg: &SystemConfig, exec: Execution) -> Result<Table> {
    spec.validate(cfg)?;
    log::info!(
        "running {} with B = {}, U = {}, N = {}, |S| = {}, G = {}, L = {}, {} trials",
        spec.kind,
        cfg.antennas,
        cfg.users,
        cfg.fft_size,
        cfg.used.len(),
        cfg.cp_len,
        cfg.taps,
        cfg.trials
    );
    Ok(match spec.kind {
        ExperimentKind::SindrSweep => Table::Sindr(run_sindr_sweep(spec, cfg, exec)?),
        ExperimentKind::SyncRmse => Table::Rmse(run_sync_rmse(spec, cfg, exec)?),
        ExperimentKind::BerCurve => Table::Ber(run_ber_curve(spec, cfg, exec)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(float_range(-0.9, 0.9, 0.1).len(), 19);
        assert_eq!(float_range(-0.9, 0.9, 0.1)[9], 0.0);
        assert_eq!(float_range(0.0, 4.0, 2.0), vec![0.0, 2.0, 4.0]);
        assert!(float_range(1.0, 0.0, 1.0).is_empty());
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("sindr_sweep".parse::<ExperimentKind>().unwrap(), ExperimentKind::SindrSweep);
        assert_eq!("ber-curve".parse::<ExperimentKind>().unwrap(), ExperimentKind::BerCurve);
        assert!("fig4".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn spec_preconditions() {
        let spec = ExperimentSpec::default_for(ExperimentKind::SindrSweep);
        assert!(spec.validate(&SystemConfig::flat_reference()).is_ok());
        assert!(spec.validate(&SystemConfig::desk()).is_err());
        let mut empty = ExperimentSpec::default_for(ExperimentKind::SyncRmse);
        assert!(empty.validate(&SystemConfig::desk()).is_ok());
        empty.snr_db.clear();
        assert!(empty.validate(&SystemConfig::desk()).is_err());
        let mut far = spec;
        far.dtau.push(41);
        assert!(far.validate(&SystemConfig::flat_reference()).is_err());
    }
}
