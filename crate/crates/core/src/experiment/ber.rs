//! Uncoded QPSK BER of the full chain: preamble, Schmidl-Cox or perfect
//! synchronization, LS (or genie) gain, equalization, hard decisions.

use crate::air::{apply_offsets, convolve, draw_offsets, max_sto, OffsetState};
use crate::bussgang::bussgang_gain;
use crate::channel::draw_channel;
use crate::config::{DacMode, GainMode, SystemConfig};
use crate::error::Result;
use crate::frame::{guard_frame, modulate_frame, pad_stream, Filler, FramePlan, SampleStream};
use crate::numerics::{from_db, RngStream};
use crate::par::{try_map_indexed, Execution};
use crate::precoder::zf_precode;
use crate::rx::{demap_and_count, equalize, estimate_gain, extract_windows, genie_coefficients, genie_gain, BerStats, EffectiveGain};
use crate::sync::{compensate, required_span, search_window, synchronize};

use nalgebra::DVector;

use super::{ExperimentSpec, SyncMode, TAG_CHANNEL, TAG_GUARD, TAG_NOISE, TAG_OFFSETS, TAG_PLAN};

#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub snr_db: f64,
    pub dac: DacMode,
    pub sync: SyncMode,
    pub ber: f64,
}

/// Bit-error tallies indexed `[trial][mode][snr][sync mode]`, sync modes in
/// [`SyncMode::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct BerCounts {
    pub snr_db: Vec<f64>,
    pub modes: Vec<DacMode>,
    pub counts: Vec<Vec<Vec<[BerStats; 2]>>>,
}

impl BerCounts {
    pub fn total(&self, mode: usize, snr: usize, sync: usize) -> BerStats {
        self.counts
            .iter()
            .fold(BerStats::default(), |acc, t| acc + t[mode][snr][sync])
    }

    pub fn rows(&self) -> Vec<BerRow> {
        let mut rows = Vec::new();
        for (mi, &dac) in self.modes.iter().enumerate() {
            for (si, &snr_db) in self.snr_db.iter().enumerate() {
                for (yi, &sync) in SyncMode::ALL.iter().enumerate() {
                    rows.push(BerRow {
                        snr_db,
                        dac,
                        sync,
                        ber: self.total(mi, si, yi).ber(),
                    });
                }
            }
        }
        rows
    }
}

fn detect(
    y: &SampleStream,
    off: OffsetState,
    plan: &FramePlan,
    user: usize,
    coefficients: Option<&EffectiveGain>,
    cfg: &SystemConfig,
) -> Result<BerStats> {
    let sym = cfg.symbol_len() as i64;
    let half = (cfg.cp_len / 2) as i64;
    let first = plan.training_range().start.min(plan.data_range().start) as i64;
    let last = plan.data_range().end as i64;
    let range = first * sym - half..(last - 1) * sym - half + cfg.fft_size as i64;
    let r = compensate(y, off.tau_est, off.eps_est, range, cfg.fft_size)?;
    match coefficients {
        None => {
            let training = extract_windows(&r, cfg, plan.training_range())?;
            let gain = estimate_gain(&training, plan, user, cfg)?;
            let data = extract_windows(&r, cfg, plan.data_range())?;
            demap_and_count(&equalize(&data, &gain)?, plan, user)
        }
        Some(coef) => {
            let mut st = BerStats::default();
            for i in plan.data_range() {
                let gain = genie_gain(coef, &off, cfg, i);
                let grid = extract_windows(&r, cfg, i..i + 1)?;
                st += demap_and_count(&equalize(&grid, &gain)?, plan, user)?;
            }
            Ok(st)
        }
    }
}

fn trial(t: usize, spec: &ExperimentSpec, cfg: &SystemConfig) -> Result<Vec<Vec<[BerStats; 2]>>> {
    let stream = RngStream::new(cfg.master_seed, t as u64);
    let ch = draw_channel(cfg, &mut stream.child(TAG_CHANNEL).rng())?;
    let ps = zf_precode(&ch, cfg)?;
    let plan = FramePlan::random(cfg, &stream.child(TAG_PLAN))?;
    let offsets = draw_offsets(cfg, &mut stream.child(TAG_OFFSETS).rng());
    let sync_span = required_span(&search_window(cfg), cfg);
    let sym = cfg.symbol_len() as i64;
    let data_end = (plan.data_range().end as i64 - 1) * sym + cfg.fft_size as i64 + max_sto(cfg);
    let span = sync_span.start..sync_span.end.max(data_end);

    let mut out = Vec::with_capacity(spec.dac_modes.len());
    for &mode in &spec.dac_modes {
        let tx = modulate_frame(&plan, &ps, cfg, mode)?;
        let tx = guard_frame(&tx, &ps, cfg, mode, &stream.child(TAG_GUARD))?;
        // a late timing estimate on a late frame reads past the default guard
        let tx = pad_stream(&tx, 0, cfg.symbol_len(), &Filler::Zeros)?;
        let a = match mode {
            DacMode::OneBit => bussgang_gain(&ps.transmit_covariance())?,
            DacMode::Infinite => DVector::from_element(cfg.antennas, 1.0),
        };
        let mut per_snr = vec![[BerStats::default(); 2]; spec.snr_db.len()];
        for (u, &off) in offsets.iter().enumerate() {
            let z = convolve(&tx, &ch, u)?;
            let coef = match cfg.gain_mode {
                GainMode::Genie => Some(genie_coefficients(&ch, &ps, &a, u, cfg)?),
                GainMode::Ls => None,
            };
            for (si, &snr) in spec.snr_db.iter().enumerate() {
                let noise = stream.child(TAG_NOISE).child(si as u64).child(u as u64);
                let y = apply_offsets(&z, off.tau, off.eps, from_db(-snr), span.clone(), cfg.fft_size, &mut noise.rng())?;
                for (yi, sync) in SyncMode::ALL.iter().enumerate() {
                    let est = match sync {
                        SyncMode::SchmidlCox => {
                            let (tau, eps) = synchronize(&y, cfg)?;
                            off.with_estimates(tau, eps)
                        }
                        SyncMode::Perfect => off,
                    };
                    per_snr[si][yi] += detect(&y, est, &plan, u, coef.as_ref(), cfg)?;
                }
            }
        }
        out.push(per_snr);
    }
    Ok(out)
}

/// Runs every trial and keeps the per-trial bit-error tallies.
pub fn ber_counts(spec: &ExperimentSpec, cfg: &SystemConfig, exec: Execution) -> Result<BerCounts> {
    spec.validate(cfg)?;
    let counts = try_map_indexed(exec, cfg.trials, |t| trial(t, spec, cfg))?;
    Ok(BerCounts {
        snr_db: spec.snr_db.clone(),
        modes: spec.dac_modes.clone(),
        counts,
    })
}

/// BER over trials, terminals and data symbols per SNR, DAC mode and
/// synchronization mode.
pub fn run_ber_curve(spec: &ExperimentSpec, cfg: &SystemConfig, exec: Execution) -> Result<Vec<BerRow>> {
    Ok(ber_counts(spec, cfg, exec)?.rows())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ExperimentKind;

    fn small() -> SystemConfig {
        SystemConfig {
            antennas: 16,
            users: 2,
            fft_size: 64,
            cp_len: 12,
            taps: 3,
            training: 1,
            data: 4,
            used: crate::config::centered_subcarriers(64, 40),
            trials: 6,
            ..SystemConfig::desk()
        }
    }

    #[test]
    fn clean_link_has_no_errors() {
        for gain_mode in [GainMode::Ls, GainMode::Genie] {
            let cfg = SystemConfig { gain_mode, ..small() };
            let spec = ExperimentSpec {
                snr_db: vec![60.0],
                dac_modes: vec![DacMode::Infinite],
                ..ExperimentSpec::default_for(ExperimentKind::BerCurve)
            };
            for r in run_ber_curve(&spec, &cfg, Execution::Sequential).unwrap() {
                assert_eq!(r.ber, 0.0, "{r:?}");
            }
        }
    }

    #[test]
    fn low_snr_is_worse_and_rows_are_ordered() {
        let spec = ExperimentSpec {
            snr_db: vec![-5.0, 25.0],
            ..ExperimentSpec::default_for(ExperimentKind::BerCurve)
        };
        let rows = run_ber_curve(&spec, &small(), Execution::Parallel).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 2);
        assert_eq!((rows[0].dac, rows[0].sync), (DacMode::OneBit, SyncMode::SchmidlCox));
        assert!(rows[0].ber > rows[2].ber);
        assert!(rows[1].ber > rows[3].ber);
    }
}
