//! STO/CFO estimation error of the Schmidl-Cox synchronizer versus SNR.

use crate::air::{apply_offsets, convolve, draw_offsets, OffsetState};
use crate::channel::{draw_channel, ChannelRealization};
use crate::config::{DacMode, SystemConfig};
use crate::error::{Error, Result};
use crate::frame::{guard_frame, modulate_frame, FramePlan, SampleStream};
use crate::numerics::{from_db, RngStream};
use crate::par::{try_map_indexed, Execution};
use crate::precoder::zf_precode;
use crate::sync::{correlate, wrap_cfo_error, estimate_cfo, estimate_sto, required_span, search_window, SyncMetrics};

use super::{ExperimentSpec, TAG_CHANNEL, TAG_GUARD, TAG_NOISE, TAG_OFFSETS, TAG_PLAN};

#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub snr_db: f64,
    pub dac: DacMode,
    pub sto_rmse: f64,
    pub cfo_rmse: f64,
}

/// Estimation errors `(tau_est - tau, eps_est - eps)` of every trial, the
/// CFO error wrapped into `(-1, 1]`,
/// indexed `[trial][mode][snr][user]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncErrors {
    pub snr_db: Vec<f64>,
    pub modes: Vec<DacMode>,
    pub errors: Vec<Vec<Vec<Vec<(i64, f64)>>>>,
}

impl SyncErrors {
    /// All `(dtau, deps)` pairs of one mode and SNR index, over trials and
    /// terminals.
    pub fn samples(&self, mode: usize, snr: usize) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.errors.iter().flat_map(move |t| t[mode][snr].iter().copied())
    }

    pub fn rows(&self) -> Vec<RmseRow> {
        let mut rows = Vec::new();
        for (mi, &dac) in self.modes.iter().enumerate() {
            for (si, &snr_db) in self.snr_db.iter().enumerate() {
                let (mut st, mut cf, mut count) = (0.0, 0.0, 0usize);
                for (dt, de) in self.samples(mi, si) {
                    st += (dt * dt) as f64;
                    cf += de * de;
                    count += 1;
                }
                rows.push(RmseRow {
                    snr_db,
                    dac,
                    sto_rmse: (st / count as f64).sqrt(),
                    cfo_rmse: (cf / count as f64).sqrt(),
                });
            }
        }
        rows
    }
}

/// Channel, frame and offsets of one synchronization trial.
pub(crate) struct SyncTrial {
    pub stream: RngStream,
    pub channel: ChannelRealization,
    pub offsets: Vec<OffsetState>,
    tx: Vec<(DacMode, SampleStream)>,
}

impl SyncTrial {
    pub fn new(t: usize, modes: &[DacMode], cfg: &SystemConfig) -> Result<Self> {
        let stream = RngStream::new(cfg.master_seed, t as u64);
        let channel = draw_channel(cfg, &mut stream.child(TAG_CHANNEL).rng())?;
        let ps = zf_precode(&channel, cfg)?;
        let frame_cfg = SystemConfig {
            data: 0,
            ..cfg.clone()
        };
        let plan = FramePlan::random(&frame_cfg, &stream.child(TAG_PLAN))?;
        let offsets = draw_offsets(cfg, &mut stream.child(TAG_OFFSETS).rng());
        let tx = modes
            .iter()
            .map(|&m| {
                let s = modulate_frame(&plan, &ps, &frame_cfg, m)?;
                Ok((m, guard_frame(&s, &ps, &frame_cfg, m, &stream.child(TAG_GUARD))?))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            stream,
            channel,
            offsets,
            tx,
        })
    }

    /// Received samples of terminal `user` over the search span at SNR
    /// point `snr_index`.
    pub fn received(&self, mode: DacMode, user: usize, snr_index: usize, snr_db: f64, cfg: &SystemConfig) -> Result<SampleStream> {
        let tx = &self
            .tx
            .iter()
            .find(|(m, _)| *m == mode)
            .ok_or_else(|| Error::InvalidArgument(format!("mode {} not prepared", mode.label())))?
            .1;
        let z = convolve(tx, &self.channel, user)?;
        self.received_from(&z, user, snr_index, snr_db, cfg)
    }

    fn received_from(&self, z: &SampleStream, user: usize, snr_index: usize, snr_db: f64, cfg: &SystemConfig) -> Result<SampleStream> {
        let off = self.offsets[user];
        let span = required_span(&search_window(cfg), cfg);
        let noise = self.stream.child(TAG_NOISE).child(snr_index as u64).child(user as u64);
        apply_offsets(z, off.tau, off.eps, from_db(-snr_db), span, cfg.fft_size, &mut noise.rng())
    }

    fn errors(&self, snr_db: &[f64], cfg: &SystemConfig) -> Result<Vec<Vec<Vec<(i64, f64)>>>> {
        let window = search_window(cfg);
        let mut out = vec![vec![Vec::with_capacity(cfg.users); snr_db.len()]; self.tx.len()];
        for (mi, (_, tx)) in self.tx.iter().enumerate() {
            for u in 0..cfg.users {
                let z = convolve(tx, &self.channel, u)?;
                for (si, &snr) in snr_db.iter().enumerate() {
                    let y = self.received_from(&z, u, si, snr, cfg)?;
                    let m = correlate(&y, window.clone(), cfg)?;
                    let tau = estimate_sto(&m);
                    let eps = estimate_cfo(&m, tau)?;
                    let off = self.offsets[u].with_estimates(tau, eps);
                    out[mi][si].push((off.residual_tau(), wrap_cfo_error(off.residual_eps())));
                }
            }
        }
        Ok(out)
    }
}

/// Runs every trial and keeps the raw estimation errors.
pub fn sync_errors(spec: &ExperimentSpec, cfg: &SystemConfig, exec: Execution) -> Result<SyncErrors> {
    spec.validate(cfg)?;
    let errors = try_map_indexed(exec, cfg.trials, |t| {
        SyncTrial::new(t, &spec.dac_modes, cfg)?.errors(&spec.snr_db, cfg)
    })?;
    Ok(SyncErrors {
        snr_db: spec.snr_db.clone(),
        modes: spec.dac_modes.clone(),
        errors,
    })
}

/// RMSE over trials and terminals per SNR point and DAC mode.
pub fn run_sync_rmse(spec: &ExperimentSpec, cfg: &SystemConfig, exec: Execution) -> Result<Vec<RmseRow>> {
    Ok(sync_errors(spec, cfg, exec)?.rows())
}

/// Timing metric of one terminal in one trial, for inspection.
pub fn metric_trace(cfg: &SystemConfig, trial: usize, user: usize, snr_db: f64, dac: DacMode) -> Result<SyncMetrics> {
    cfg.validate()?;
    if user >= cfg.users {
        return Err(Error::InvalidArgument(format!("user {user} of {}", cfg.users)));
    }
    let t = SyncTrial::new(trial, &[dac], cfg)?;
    let y = t.received(dac, user, 0, snr_db, cfg)?;
    correlate(&y, search_window(cfg), cfg)
}
