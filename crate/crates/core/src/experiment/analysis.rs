//! Reading SNR offsets off Monte-Carlo curves.

/// SNR at which a curve that falls with SNR first reaches `level`,
/// interpolating linearly in `log10(value)` between the bracketing points.
/// `None` when the curve never crosses `level` from above.
pub fn crossing_snr(snr_db: &[f64], values: &[f64], level: f64) -> Option<f64> {
    if snr_db.len() != values.len() || !(level > 0.0) {
        return None;
    }
    for j in 1..values.len() {
        let (a, b) = (values[j - 1], values[j]);
        if a > level && b <= level {
            if b <= 0.0 {
                return Some(snr_db[j]);
            }
            let (la, lb, ll) = (a.log10(), b.log10(), level.log10());
            return Some(snr_db[j - 1] + (la - ll) / (la - lb) * (snr_db[j] - snr_db[j - 1]));
        }
    }
    None
}

/// Extra SNR `other` needs to reach `level` compared with `reference`.
pub fn snr_gap(snr_db: &[f64], reference: &[f64], other: &[f64], level: f64) -> Option<f64> {
    Some(crossing_snr(snr_db, other, level)? - crossing_snr(snr_db, reference, level)?)
}
