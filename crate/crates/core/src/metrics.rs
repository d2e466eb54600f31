//! Image and data comparison metrics.

/// PSNR in dB with peak `max |reference|`, over the voxels where `support`
/// is true (all voxels when `None`).
pub fn psnr(estimate: &[f32], reference: &[f32], support: Option<&[bool]>) -> f64 {
    let (mut se, mut n, mut peak) = (0.0f64, 0usize, 0.0f64);
    for (i, (&e, &r)) in estimate.iter().zip(reference).enumerate() {
        if support.is_some_and(|s| !s[i]) {
            continue;
        }
        se += (e as f64 - r as f64).powi(2);
        peak = peak.max((r as f64).abs());
        n += 1;
    }
    if n == 0 || se == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (peak * peak / (se / n as f64)).log10()
}

/// `‖estimate − reference‖ / ‖reference‖` over the selected entries.
pub fn relative_rmse(estimate: &[f32], reference: &[f32], select: Option<&[bool]>) -> f64 {
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (i, (&e, &r)) in estimate.iter().zip(reference).enumerate() {
        if select.is_some_and(|s| !s[i]) {
            continue;
        }
        num += (e as f64 - r as f64).powi(2);
        den += (r as f64).powi(2);
    }
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).sqrt()
}
