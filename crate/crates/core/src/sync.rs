//! Schmidl-Cox timing and frequency synchronization with CP-averaged
//! (Minn-style) timing metric.
//!
//! For a candidate lag `t`:
//!
//! * `P(t) = sum_{n=0}^{N/2-1} y[n+t] y*[n+N/2+t]`
//! * `R(t) = 1/2 sum_{n=0}^{N-1} |y[n+t]|^2`
//! * `Gamma(t) = 1/(G+1) sum_{n=-G}^{0} |P(n+t)|^2 / R(n+t)^2`
//!
//! The squared energy term keeps every summand, and hence `Gamma`, in
//! `[0, 1]` by Cauchy-Schwarz.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::{Range, RangeInclusive};

use crate::air::max_sto;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::frame::SampleStream;
use crate::numerics::{cis, C64};

/// Lags between two full recomputations of the running sums.
const REANCHOR: usize = 512;

/// Correlation, energy and timing metric over a search window.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncMetrics {
    lag_start: i64,
    p: Vec<C64>,
    r: Vec<f64>,
    window_start: i64,
    gamma: Vec<f64>,
}

impl SyncMetrics {
    /// Absolute lags covered by the search window.
    pub fn window(&self) -> RangeInclusive<i64> {
        self.window_start..=self.window_start + self.gamma.len() as i64 - 1
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn gamma_at(&self, tau: i64) -> Option<f64> {
        let i = usize::try_from(tau - self.window_start).ok()?;
        self.gamma.get(i).copied()
    }

    /// `P(t)` for any lag in `window_start - G ..= window_end`.
    pub fn p_at(&self, lag: i64) -> Option<C64> {
        let i = usize::try_from(lag - self.lag_start).ok()?;
        self.p.get(i).copied()
    }

    pub fn r_at(&self, lag: i64) -> Option<f64> {
        let i = usize::try_from(lag - self.lag_start).ok()?;
        self.r.get(i).copied()
    }

    /// `(tau, Gamma(tau))` pairs in lag order.
    pub fn trace(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.window().zip(self.gamma.iter().copied())
    }

    /// Writes the metric as a two-column CSV with header `tau,gamma`.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tau,gamma")?;
        for (t, g) in self.trace() {
            writeln!(w, "{t},{}", crate::experiment::csv::format_float(g))?;
        }
        Ok(())
    }
}

/// Default search range `[-(N + G/2), N + G/2]`, matching the STO prior.
pub fn search_window(cfg: &SystemConfig) -> RangeInclusive<i64> {
    let m = max_sto(cfg);
    -m..=m
}

/// Samples of `y` that [`correlate`] reads for a given window.
pub fn required_span(window: &RangeInclusive<i64>, cfg: &SystemConfig) -> Range<i64> {
    let lo = *window.start() - cfg.cp_len as i64;
    let hi = *window.end() + cfg.fft_size as i64;
    lo..hi
}

fn direct_pr(y: &[C64], half: usize) -> (C64, f64) {
    let mut p = C64::new(0.0, 0.0);
    let mut r = 0.0;
    for n in 0..half {
        p += y[n] * y[n + half].conj();
        r += y[n].norm_sqr() + y[n + half].norm_sqr();
    }
    (p, 0.5 * r)
}

/// Ratio `|P|^2 / R^2`, defined as 0 on silent stretches.
fn ratio(p: C64, r: f64) -> f64 {
    if r > 0.0 {
        (p.norm_sqr() / (r * r)).min(1.0)
    } else {
        0.0
    }
}

/// Evaluates `P`, `R` and `Gamma` on the search window using O(1)
/// sliding updates, refreshed from scratch every few hundred lags.
pub fn correlate(y: &SampleStream, window: RangeInclusive<i64>, cfg: &SystemConfig) -> Result<SyncMetrics> {
    let (n, g) = (cfg.fft_size, cfg.cp_len);
    if n % 2 != 0 || n == 0 {
        return Err(Error::Config(format!("Schmidl-Cox needs even N, got {n}")));
    }
    if window.is_empty() {
        return Err(Error::InvalidArgument("empty search window".into()));
    }
    let half = n / 2;
    let span = required_span(&window, cfg);
    let ys = y.window(span.start, (span.end - span.start) as usize)?;
    let lags = (*window.end() - span.start + 1) as usize;
    let mut p = Vec::with_capacity(lags);
    let mut r = Vec::with_capacity(lags);
    let (mut pc, mut rc) = (C64::new(0.0, 0.0), 0.0);
    for t in 0..lags {
        if t % REANCHOR == 0 {
            (pc, rc) = direct_pr(&ys[t..t + n], half);
        } else {
            let (a, b, c) = (ys[t - 1], ys[t - 1 + half], ys[t - 1 + n]);
            pc += b * c.conj() - a * b.conj();
            rc += 0.5 * (c.norm_sqr() - a.norm_sqr());
            rc = rc.max(0.0);
        }
        p.push(pc);
        r.push(rc);
    }
    let ratios: Vec<f64> = p.iter().zip(&r).map(|(&pv, &rv)| ratio(pv, rv)).collect();
    let scale = 1.0 / (g + 1) as f64;
    let gamma = (g..lags).map(|t| ratios[t - g..=t].iter().sum::<f64>() * scale).collect();
    Ok(SyncMetrics {
        lag_start: span.start,
        p,
        r,
        window_start: *window.start(),
        gamma,
    })
}

/// `argmax_tau Gamma(tau)`, ties resolved toward the smallest lag.
pub fn estimate_sto(m: &SyncMetrics) -> i64 {
    let mut best = (*m.window().start(), f64::NEG_INFINITY);
    for (t, g) in m.trace() {
        if g > best.1 {
            best = (t, g);
        }
    }
    best.0
}

/// `eps_est = arg{P(tau_est)} / pi`, in `(-1, 1]`.
pub fn estimate_cfo(m: &SyncMetrics, tau_est: i64) -> Result<f64> {
    let p = m
        .p_at(tau_est)
        .ok_or_else(|| Error::InvalidArgument(format!("lag {tau_est} outside the correlation range")))?;
    Ok(p.arg() / PI)
}

/// CFO error folded onto the estimator's unambiguous range `(-1, 1]`.
/// The half-symbol correlation cannot tell `eps` from `eps + 2`.
pub fn wrap_cfo_error(e: f64) -> f64 {
    let w = (e + 1.0).rem_euclid(2.0) - 1.0;
    if w == -1.0 {
        1.0
    } else {
        w
    }
}

/// Timing and frequency correction
/// `r[n] = exp(+j 2 pi eps_est n / N) y[n + tau_est]` for `n` in `range`.
pub fn compensate(y: &SampleStream, tau_est: i64, eps_est: f64, range: Range<i64>, fft_size: usize) -> Result<SampleStream> {
    if range.is_empty() {
        return Ok(SampleStream::single(Vec::new(), range.start));
    }
    let src = y.window(range.start + tau_est, (range.end - range.start) as usize)?;
    let w = 2.0 * PI * eps_est / fft_size as f64;
    let out = range
        .clone()
        .zip(src)
        .map(|(t, v)| if eps_est == 0.0 { *v } else { v * cis(w * t as f64) })
        .collect();
    Ok(SampleStream::single(out, range.start))
}

/// Runs correlation and both estimators over the default window.
pub fn synchronize(y: &SampleStream, cfg: &SystemConfig) -> Result<(i64, f64)> {
    let m = correlate(y, search_window(cfg), cfg)?;
    let tau = estimate_sto(&m);
    Ok((tau, estimate_cfo(&m, tau)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::{apply_offsets, propagate, OffsetState};
    use crate::channel::draw_channel;
    use crate::config::DacMode;
    use crate::frame::{guard_frame, modulate_frame, FramePlan};
    use crate::numerics::{cn, sample_cn, RngStream};
    use crate::precoder::zf_precode;

    fn cfg() -> SystemConfig {
        SystemConfig {
            antennas: 8,
            users: 2,
            fft_size: 64,
            cp_len: 8,
            taps: 1,
            training: 1,
            data: 1,
            used: (0..64).collect(),
            ..SystemConfig::desk()
        }
    }

    /// Brute-force evaluation of the three metric definitions.
    fn direct_gamma(y: &SampleStream, tau: i64, cfg: &SystemConfig) -> f64 {
        let (n, g) = (cfg.fft_size as i64, cfg.cp_len as i64);
        let at = |t: i64| y.get(0, t).unwrap();
        let mut acc = 0.0;
        for d in -g..=0 {
            let t = tau + d;
            let p: C64 = (0..n / 2).map(|k| at(k + t) * at(k + n / 2 + t).conj()).sum();
            let r: f64 = 0.5 * (0..n).map(|k| at(k + t).norm_sqr()).sum::<f64>();
            acc += if r > 0.0 { p.norm_sqr() / (r * r) } else { 0.0 };
        }
        acc / (g + 1) as f64
    }

    fn received(cfg: &SystemConfig, dac: DacMode, seed: u64, offs: &[OffsetState], n0: f64) -> Vec<SampleStream> {
        let s = RngStream::new(seed, 0);
        let ch = draw_channel(cfg, &mut s.child(1).rng()).unwrap();
        let ps = zf_precode(&ch, cfg).unwrap();
        let plan = FramePlan::random(cfg, &s.child(2)).unwrap();
        let tx = modulate_frame(&plan, &ps, cfg, dac).unwrap();
        let tx = guard_frame(&tx, &ps, cfg, dac, &s.child(3)).unwrap();
        let span = required_span(&search_window(cfg), cfg);
        propagate(&tx, &ch, offs, n0, span, cfg, &s.child(4)).unwrap()
    }

    #[test]
    fn recurrence_matches_direct_evaluation() {
        let c = cfg();
        let mut rng = RngStream::new(1, 0).rng();
        let span = 2000;
        let y = SampleStream::single(sample_cn(&mut rng, 1.0, span).unwrap(), -1000);
        let w = -900..=800;
        let m = correlate(&y, w.clone(), &c).unwrap();
        for tau in w.step_by(37) {
            assert!((m.gamma_at(tau).unwrap() - direct_gamma(&y, tau, &c)).abs() < 1e-10);
        }
    }

    #[test]
    fn noiseless_flat_sync_is_exact() {
        let c = cfg();
        let mut rng = RngStream::new(2, 0).rng();
        for (seed, dac) in [(3u64, DacMode::OneBit), (4, DacMode::Infinite)] {
            let offs: Vec<OffsetState> = (0..2)
                .map(|_| {
                    use rand::Rng;
                    OffsetState::new(rng.random_range(-68..=68), rng.random_range(-0.9..0.9))
                })
                .collect();
            let ys = received(&c, dac, seed, &offs, 0.0);
            for (y, off) in ys.iter().zip(&offs) {
                let m = correlate(y, search_window(&c), &c).unwrap();
                assert!((m.gamma_at(off.tau).unwrap() - 1.0).abs() < 1e-9);
                let tau = estimate_sto(&m);
                assert_eq!(tau, off.tau);
                let eps = estimate_cfo(&m, tau).unwrap();
                assert!((eps - off.eps).abs() < 1e-9, "{eps} vs {}", off.eps);
            }
        }
    }

    #[test]
    fn quantizer_does_not_move_noiseless_estimates() {
        let c = cfg();
        let offs = [OffsetState::new(-17, 0.37), OffsetState::new(30, -0.61)];
        let a = received(&c, DacMode::OneBit, 5, &offs, 0.0);
        let b = received(&c, DacMode::Infinite, 5, &offs, 0.0);
        for (ya, yb) in a.iter().zip(&b) {
            let (ta, ea) = synchronize(ya, &c).unwrap();
            let (tb, eb) = synchronize(yb, &c).unwrap();
            assert_eq!(ta, tb);
            assert!((ea - eb).abs() < 1e-9);
        }
        assert!((synchronize(&a[0], &c).unwrap().1 - 0.37).abs() < 1e-9);
    }

    #[test]
    fn cfo_error_wrapping() {
        assert_eq!(wrap_cfo_error(0.25), 0.25);
        assert!((wrap_cfo_error(1.95) + 0.05).abs() < 1e-12);
        assert!((wrap_cfo_error(-1.9) - 0.1).abs() < 1e-12);
        assert_eq!(wrap_cfo_error(1.0), 1.0);
        assert_eq!(wrap_cfo_error(-1.0), 1.0);
    }

    #[test]
    fn zero_cfo_and_shift_equivariance() {
        let c = cfg();
        let offs = [OffsetState::new(5, 0.0), OffsetState::new(8, 0.0)];
        let ys = received(&c, DacMode::OneBit, 6, &offs, 0.0);
        let (t0, e0) = synchronize(&ys[0], &c).unwrap();
        let (t1, _) = synchronize(&ys[1], &c).unwrap();
        assert!(e0.abs() < 1e-12);
        assert_eq!(t1 - t0, 3);
    }

    #[test]
    fn pure_noise_metric_stays_low() {
        let c = SystemConfig {
            fft_size: 256,
            cp_len: 16,
            used: (0..256).collect(),
            ..cfg()
        };
        let mut total = 0.0;
        let trials = 1000;
        for t in 0..trials {
            let mut rng = RngStream::new(7, t).rng();
            let y = SampleStream::single(sample_cn(&mut rng, 1.0, 16 + 256 + 1).unwrap(), -16);
            let m = correlate(&y, 0..=0, &c).unwrap();
            let g = m.gamma()[0];
            assert!((0.0..=1.0).contains(&g));
            total += g;
        }
        assert!(total / trials as f64 <= 0.2);
    }

    #[test]
    fn metric_is_bounded_and_cauchy_schwarz_holds() {
        let c = cfg();
        let mut rng = RngStream::new(8, 0).rng();
        let y: Vec<C64> = (0..600).map(|i| if i % 7 == 0 { C64::new(0.0, 0.0) } else { cn(&mut rng, (i % 5) as f64) }).collect();
        let y = SampleStream::single(y, 0);
        let m = correlate(&y, 8..=500, &c).unwrap();
        for t in 0..=500 {
            assert!(m.p_at(t).unwrap().norm() <= m.r_at(t).unwrap() * (1.0 + 1e-12));
        }
        assert!(m.gamma().iter().all(|g| (0.0..=1.0 + 1e-9).contains(g)));
        assert!(correlate(&y, 0..=500, &c).is_err());
    }

    #[test]
    fn compensation_inverts_delay_and_rotation() {
        let c = SystemConfig {
            antennas: 1,
            users: 1,
            ..cfg()
        };
        let mut rng = RngStream::new(9, 0).rng();
        let z = SampleStream::single(sample_cn(&mut rng, 1.0, 400).unwrap(), 0);
        let y = apply_offsets(&z, 13, 0.42, 0.0, 50..350, c.fft_size, &mut rng).unwrap();
        assert_eq!(compensate(&y, 0, 0.0, 50..350, 64).unwrap(), y);
        let r = compensate(&y, 13, 0.42, 40..300, 64).unwrap();
        // a constant phase exp(-j 2 pi eps tau / N) remains
        let k = cis(-2.0 * PI * 0.42 * 13.0 / 64.0);
        for n in 40..300 {
            assert!((r.get(0, n).unwrap() - z.get(0, n).unwrap() * k).norm() < 1e-12);
        }
        assert!(compensate(&y, 13, 0.0, 0..300, 64).is_err());
    }

    #[test]
    fn trace_csv() {
        let c = cfg();
        let mut rng = RngStream::new(10, 0).rng();
        let y = SampleStream::single(sample_cn(&mut rng, 1.0, 300).unwrap(), 0);
        let m = correlate(&y, 10..=12, &c).unwrap();
        let mut out = Vec::new();
        m.write_trace_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "tau,gamma");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("10,"));
    }
}
