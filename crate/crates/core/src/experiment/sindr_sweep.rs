//! Analytical versus simulated SINDR over forced residual offsets on a
//! frequency-flat link.
//!
//! The simulation sets the true offsets to `tau = -dtau`, `eps = 0` and the
//! receiver estimates to `(0, deps)`, so the compensated stream is
//! `r[n] = exp(j 2 pi deps n / N) z[n + dtau] + noise`. Each terminal's
//! per-realization SINDR is `|beta c|^2 / mean |r_k^(i) - g_k^(i) s_k^(i)|^2`
//! over all data windows and subcarriers, with the genie gain
//! `g = beta exp(j phi) c`, `c = h^T A p_u`.

use crate::air::{apply_offsets, convolve};
use crate::bussgang::BussgangModel;
use crate::channel::draw_channel;
use crate::config::{DacMode, SystemConfig};
use crate::error::Result;
use crate::frame::{guard_frame, modulate_frame, FramePlan};
use crate::numerics::{to_db, RngStream, C64};
use crate::par::{try_map_indexed, Execution};
use crate::precoder::{flat_covariance, zf_precode};
use crate::rx::extract_windows;
use crate::sindr::{effective_gain, LinkBudget, Residual};
use crate::sync::compensate;

use super::{ExperimentSpec, TAG_CHANNEL, TAG_GUARD, TAG_NOISE, TAG_PLAN};

#[derive(Debug, Clone, PartialEq)]
pub struct SindrRow {
    pub dtau: i64,
    pub deps: f64,
    pub analytical_db: f64,
    pub simulated_db: f64,
    pub dac: DacMode,
}

/// Grid points in output order: `dtau x deps` first, then the CFO sweep
/// points not already covered.
pub fn grid_points(spec: &ExperimentSpec) -> Vec<Residual> {
    let mut pts: Vec<Residual> = Vec::new();
    let mut push = |r: Residual| {
        if !pts.contains(&r) {
            pts.push(r);
        }
    };
    for &e in &spec.deps {
        for &t in &spec.dtau {
            push(Residual::new(t, e));
        }
    }
    for &t in &spec.cfo_sweep_dtau {
        for &e in &spec.cfo_sweep_deps {
            push(Residual::new(t, e));
        }
    }
    pts
}

/// Per-realization sums over terminals, indexed `[mode][point]` as
/// `(analytical, simulated)` linear SINDR.
type TrialSums = Vec<Vec<(f64, f64)>>;

fn realization(t: usize, points: &[Residual], modes: &[DacMode], cfg: &SystemConfig) -> Result<TrialSums> {
    let (n, g) = (cfg.fft_size, cfg.cp_len);
    let stream = RngStream::new(cfg.master_seed, t as u64);
    let ch = draw_channel(cfg, &mut stream.child(TAG_CHANNEL).rng())?;
    let ps = zf_precode(&ch, cfg)?;
    let c_x = flat_covariance(&ps)?;
    // at least one training symbol so that every data window has a regular
    // OFDM neighbour on the left
    let frame_cfg = SystemConfig {
        training: cfg.training.max(1),
        ..cfg.clone()
    };
    let plan = FramePlan::random(&frame_cfg, &stream.child(TAG_PLAN))?;
    let data = plan.data_range();
    let sym = cfg.symbol_len() as i64;
    let first = data.start as i64 * sym - (g / 2) as i64;
    let range = first..(data.end as i64 - 1) * sym - (g / 2) as i64 + n as i64;

    let mut out = Vec::with_capacity(modes.len());
    for &mode in modes {
        let bm = BussgangModel::for_mode(mode, &c_x)?;
        let tx = modulate_frame(&plan, &ps, &frame_cfg, mode)?;
        let tx = guard_frame(&tx, &ps, &frame_cfg, mode, &stream.child(TAG_GUARD))?;
        let mut sums = vec![(0.0, 0.0); points.len()];
        for u in 0..cfg.users {
            let h: Vec<C64> = ch.tap(0).row(u).iter().copied().collect();
            let budget = LinkBudget::new(&h, &bm, &ps.matrices()[0], u)?;
            let c = budget.desired();
            let z = convolve(&tx, &ch, u)?;
            for (pi, &res) in points.iter().enumerate() {
                let report = budget.report(res, cfg.noise_var, n, g);
                let noise = stream.child(TAG_NOISE).child(pi as u64).child(u as u64);
                let y = apply_offsets(&z, -res.dtau, 0.0, cfg.noise_var, range.clone(), n, &mut noise.rng())?;
                let r = compensate(&y, 0, res.deps, range.clone(), n)?;
                let grid = extract_windows(&r, cfg, data.clone())?;
                let mut err = 0.0;
                let mut count = 0usize;
                for (row, i) in grid.values.iter().zip(data.clone()) {
                    let s = plan.symbol(i);
                    for (j, &k) in cfg.used.iter().enumerate() {
                        let gk = effective_gain(c, res, k, i as i64, n, g);
                        err += (row[j] - gk * s[(u, k)]).norm_sqr();
                        count += 1;
                    }
                }
                let simulated = report.signal_power / (err / count as f64);
                sums[pi].0 += report.sindr;
                sums[pi].1 += simulated;
            }
        }
        out.push(sums);
    }
    Ok(out)
}

/// SINDR averaged in linear scale over realizations and terminals, then
/// converted to dB.
pub fn run_sindr_sweep(spec: &ExperimentSpec, cfg: &SystemConfig, exec: Execution) -> Result<Vec<SindrRow>> {
    spec.validate(cfg)?;
    let points = grid_points(spec);
    let modes = &spec.dac_modes;
    let trials = try_map_indexed(exec, cfg.trials, |t| realization(t, &points, modes, cfg))?;
    let scale = 1.0 / (cfg.trials * cfg.users) as f64;
    let mut rows = Vec::with_capacity(points.len() * modes.len());
    for (mi, &mode) in modes.iter().enumerate() {
        for (pi, p) in points.iter().enumerate() {
            let (a, s) = trials
                .iter()
                .fold((0.0, 0.0), |acc, t| (acc.0 + t[mi][pi].0, acc.1 + t[mi][pi].1));
            rows.push(SindrRow {
                dtau: p.dtau,
                deps: p.deps,
                analytical_db: to_db(a * scale),
                simulated_db: to_db(s * scale),
                dac: mode,
            });
        }
    }
    Ok(rows)
}
