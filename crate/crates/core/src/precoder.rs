//! Zero-forcing precoding with a single global power normalization.

use nalgebra::DMatrix;

use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::numerics::C64;

/// Per-subcarrier precoding matrices `P[k]` (`B x U`, column `u` is
/// `p_u[k]`) for the used subcarriers only.
///
/// Normalized so that `(1/N) sum_{k in S} ||P[k]||_F^2 = 1`, i.e. unit average
/// transmit power before the DACs.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    fft_size: usize,
    used: Vec<usize>,
    matrices: Vec<DMatrix<C64>>,
    norm_constant: f64,
}

impl PrecoderSet {
    /// Normalizes raw per-subcarrier matrices (aligned with `used`) by one
    /// global constant.
    pub fn normalized(fft_size: usize, used: Vec<usize>, mut matrices: Vec<DMatrix<C64>>) -> Result<Self> {
        if matrices.is_empty() || matrices.len() != used.len() {
            return Err(Error::Dimension(format!(
                "{} precoder matrices for {} used subcarriers",
                matrices.len(),
                used.len()
            )));
        }
        let shape = matrices[0].shape();
        if matrices.iter().any(|m| m.shape() != shape) {
            return Err(Error::Dimension("precoder matrices differ in shape".into()));
        }
        let power: f64 = matrices.iter().map(|m| m.norm_squared()).sum::<f64>() / fft_size as f64;
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::InvalidArgument(format!("precoder power {power} cannot be normalized")));
        }
        let norm_constant = power.sqrt().recip();
        for m in matrices.iter_mut() {
            *m *= C64::new(norm_constant, 0.0);
        }
        Ok(Self {
            fft_size,
            used,
            matrices,
            norm_constant,
        })
    }

    /// Frequency-flat precoder `p_u[k] = p_u` on every used subcarrier.
    pub fn flat(fft_size: usize, used: Vec<usize>, p: DMatrix<C64>) -> Result<Self> {
        let m = vec![p; used.len()];
        Self::normalized(fft_size, used, m)
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn used(&self) -> &[usize] {
        &self.used
    }

    pub fn antennas(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn users(&self) -> usize {
        self.matrices[0].ncols()
    }

    pub fn norm_constant(&self) -> f64 {
        self.norm_constant
    }

    /// Matrices aligned with [`used`](Self::used).
    pub fn matrices(&self) -> &[DMatrix<C64>] {
        &self.matrices
    }

    /// `P[k]` for subcarrier `k`, `None` when `k` is unused.
    pub fn matrix(&self, k: usize) -> Option<&DMatrix<C64>> {
        self.used.binary_search(&k).ok().map(|i| &self.matrices[i])
    }

    /// `(1/N) sum_{k in S} sum_u ||p_u[k]||^2`.
    pub fn average_power(&self) -> f64 {
        self.matrices.iter().map(|m| m.norm_squared()).sum::<f64>() / self.fft_size as f64
    }

    pub fn is_flat(&self) -> bool {
        let first = &self.matrices[0];
        let tol = 1e-12 * first.norm().max(f64::MIN_POSITIVE);
        self.matrices.iter().all(|m| (m - first).norm() <= tol)
    }

    /// Time-domain transmit covariance `(1/N) sum_{k in S} P[k] P[k]^H` under
    /// unit-power i.i.d. symbols. Equals `sum_u p_u p_u^H` for a flat precoder
    /// used on all N subcarriers.
    pub fn transmit_covariance(&self) -> DMatrix<C64> {
        let b = self.antennas();
        let mut c = DMatrix::zeros(b, b);
        for m in &self.matrices {
            c += m * m.adjoint();
        }
        c / C64::new(self.fft_size as f64, 0.0)
    }
}

/// `P[k] = H[k]^H (H[k] H[k]^H)^{-1}`, scaled by one global constant.
pub fn zf_precode(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<PrecoderSet> {
    if ch.users() != cfg.users || ch.antennas() != cfg.antennas {
        return Err(Error::Dimension(format!(
            "channel is {}x{}, configuration expects U = {}, B = {}",
            ch.users(),
            ch.antennas(),
            cfg.users,
            cfg.antennas
        )));
    }
    if cfg.antennas < cfg.users {
        return Err(Error::Config("zero-forcing needs B >= U".into()));
    }
    let n = cfg.fft_size;
    let mut matrices = Vec::with_capacity(cfg.used.len());
    if ch.num_taps() == 1 {
        let p = zf_matrix(ch.tap(0), cfg.used[0])?;
        matrices.resize(cfg.used.len(), p);
    } else {
        for &k in &cfg.used {
            let h = ch.freq_response(k, n)?;
            matrices.push(zf_matrix(&h, k)?);
        }
    }
    PrecoderSet::normalized(n, cfg.used.clone(), matrices)
}

fn zf_matrix(h: &DMatrix<C64>, k: usize) -> Result<DMatrix<C64>> {
    let h_adj = h.adjoint();
    let gram = h * &h_adj;
    let scale = gram.diagonal().iter().map(|z| z.re).fold(0.0, f64::max);
    let chol = gram.cholesky().ok_or(Error::Singular { subcarrier: k })?;
    let l_diag_min = chol.l_dirty().diagonal().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if !(l_diag_min * l_diag_min > 1e-13 * scale) {
        return Err(Error::Singular { subcarrier: k });
    }
    Ok(h_adj * chol.inverse())
}

/// `C_x = sum_u p_u p_u^H` of a frequency-flat precoder.
pub fn flat_covariance(ps: &PrecoderSet) -> Result<DMatrix<C64>> {
    if !ps.is_flat() {
        return Err(Error::NotFlat);
    }
    let p = &ps.matrices()[0];
    let cov = p * p.adjoint();
    // rescale from "per used subcarrier" to time-domain power when S != N
    Ok(cov * C64::new(ps.used().len() as f64 / ps.fft_size() as f64, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_channel;
    use crate::numerics::RngStream;

    fn flat_cfg(b: usize, u: usize, n: usize) -> SystemConfig {
        SystemConfig {
            antennas: b,
            users: u,
            fft_size: n,
            cp_len: 0,
            taps: 1,
            used: (0..n).collect(),
            ..SystemConfig::desk()
        }
    }

    #[test]
    fn scalar_zf_is_unit_power() {
        let mut t = DMatrix::zeros(1, 1);
        t[(0, 0)] = C64::new(2.0, 0.0);
        let ch = ChannelRealization::from_taps(vec![t]).unwrap();
        let ps = zf_precode(&ch, &flat_cfg(1, 1, 1)).unwrap();
        let p = ps.matrices()[0][(0, 0)];
        assert!((p.norm() - 1.0).abs() < 1e-14);
        assert!((ps.norm_constant() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn orthonormal_rows_give_adjoint() {
        let mut h = DMatrix::zeros(2, 3);
        h[(0, 0)] = C64::new(0.0, 1.0);
        h[(1, 2)] = C64::new(1.0, 0.0);
        let ch = ChannelRealization::from_taps(vec![h.clone()]).unwrap();
        let ps = zf_precode(&ch, &flat_cfg(3, 2, 4)).unwrap();
        let p = &ps.matrices()[0];
        let expected = h.adjoint() * C64::new(ps.norm_constant(), 0.0);
        assert!((p - expected).norm() < 1e-14);
    }

    #[test]
    fn zf_residual_on_random_channel() {
        let cfg = flat_cfg(8, 2, 16);
        let ch = draw_channel(&cfg, &mut RngStream::new(5, 0).rng()).unwrap();
        let ps = zf_precode(&ch, &cfg).unwrap();
        let hp = ch.tap(0) * &ps.matrices()[0];
        let c = hp[(0, 0)];
        assert!(c.re > 0.0 && c.im.abs() < 1e-12);
        let resid = hp - DMatrix::identity(2, 2) * c;
        assert!(resid.camax() < 1e-10);
        assert!((ps.average_power() - 1.0).abs() < 1e-12);
        assert!(ps.is_flat());
    }

    #[test]
    fn selective_zf_power_and_orthogonality() {
        let cfg = SystemConfig {
            antennas: 12,
            users: 3,
            fft_size: 64,
            cp_len: 8,
            taps: 4,
            used: crate::config::centered_subcarriers(64, 40),
            ..SystemConfig::desk()
        };
        let ch = draw_channel(&cfg, &mut RngStream::new(6, 0).rng()).unwrap();
        let ps = zf_precode(&ch, &cfg).unwrap();
        assert!((ps.average_power() - 1.0).abs() < 1e-12);
        assert!(!ps.is_flat());
        for (&k, p) in cfg.used.iter().zip(ps.matrices()) {
            let h = ch.freq_response(k, 64).unwrap();
            let hp = &h * p;
            for u in 0..3 {
                for v in 0..3 {
                    if u != v {
                        assert!(hp[(u, v)].norm() < 1e-10 * h.norm());
                    }
                }
            }
        }
        assert!(ps.matrix(0).is_none());
        assert!(ps.matrix(1).is_some());
    }

    #[test]
    fn rank_deficient_channel_names_subcarrier() {
        let mut h = DMatrix::zeros(2, 4);
        for b in 0..4 {
            h[(0, b)] = C64::new(1.0, b as f64);
            h[(1, b)] = C64::new(2.0, 2.0 * b as f64);
        }
        let ch = ChannelRealization::from_taps(vec![h]).unwrap();
        match zf_precode(&ch, &flat_cfg(4, 2, 8)) {
            Err(Error::Singular { subcarrier }) => assert_eq!(subcarrier, 0),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn user_permutation_permutes_columns() {
        let cfg = flat_cfg(6, 3, 8);
        let ch = draw_channel(&cfg, &mut RngStream::new(8, 0).rng()).unwrap();
        let perm = [2usize, 0, 1];
        let h = ch.tap(0);
        let hp = DMatrix::from_fn(3, 6, |r, c| h[(perm[r], c)]);
        let ps = zf_precode(&ch, &cfg).unwrap();
        let pp = zf_precode(&ChannelRealization::from_taps(vec![hp]).unwrap(), &cfg).unwrap();
        for (r, &src) in perm.iter().enumerate() {
            let a = pp.matrices()[0].column(r);
            let b = ps.matrices()[0].column(src);
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn flat_covariance_examples() {
        let cfg = flat_cfg(2, 1, 4);
        let ch = draw_channel(&cfg, &mut RngStream::new(10, 0).rng()).unwrap();
        let ps = zf_precode(&ch, &cfg).unwrap();
        let c = flat_covariance(&ps).unwrap();
        assert!((c.trace().re - 1.0).abs() < 1e-12);
        let p = ps.matrices()[0].column(0).into_owned();
        assert!((&c - &p * p.adjoint()).norm() < 1e-12);

        let (a, b) = (0.6f64, 0.8f64);
        let mut p = DMatrix::zeros(2, 2);
        p[(0, 0)] = C64::new(a, 0.0);
        p[(1, 1)] = C64::new(0.0, b);
        let ps = PrecoderSet::flat(4, (0..4).collect(), p).unwrap();
        let c = flat_covariance(&ps).unwrap();
        assert!((c[(0, 0)].re - a * a).abs() < 1e-14);
        assert!((c[(1, 1)].re - b * b).abs() < 1e-14);
        assert!(c[(0, 1)].norm() < 1e-14);
        assert!((&c - ps.transmit_covariance()).norm() < 1e-14);
    }

    #[test]
    fn non_flat_covariance_rejected() {
        let m1 = DMatrix::from_element(2, 1, C64::new(1.0, 0.0));
        let m2 = DMatrix::from_element(2, 1, C64::new(0.0, 1.0));
        let ps = PrecoderSet::normalized(2, vec![0, 1], vec![m1, m2]).unwrap();
        assert!(matches!(flat_covariance(&ps), Err(Error::NotFlat)));
    }
}
