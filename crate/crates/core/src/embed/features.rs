use crate::error::{Error, Result};
use crate::spectra::Spectrum;

/// Intensity assigned to the precursor after normalization.
pub const PRECURSOR_INTENSITY: f64 = 2.0;

/// Scales fragment intensities to a maximum of 1 and sets the precursor
/// intensity to exactly 2.
pub fn normalize_intensities(s: &Spectrum) -> Result<Spectrum> {
    let max = s
        .fragments
        .iter()
        .map(|p| p.intensity)
        .fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::Normalization(s.id.clone()));
    }
    let mut out = s.clone();
    for p in &mut out.fragments {
        p.intensity /= max;
        p.intensity_decimals = None;
    }
    out.precursor.intensity = PRECURSOR_INTENSITY;
    out.precursor.intensity_decimals = None;
    Ok(out)
}

/// Number of bins covering `0..max_mz` at `bin_width`.
pub fn bin_count(bin_width: f64, max_mz: f64) -> usize {
    (max_mz / bin_width).ceil() as usize
}

/// Fixed-length binned representation: each fragment adds its max-normalized
/// intensity to bin `floor(mz / bin_width)`, and bins are capped at 1.
/// Fragments beyond `max_mz` are dropped.
pub fn bin_spectrum(s: &Spectrum, bin_width: f64, max_mz: f64) -> Result<Vec<f64>> {
    if !(bin_width > 0.0 && max_mz > 0.0) {
        return Err(Error::Config(format!(
            "bin width and max m/z must be positive, got {bin_width} and {max_mz}"
        )));
    }
    let n = bin_count(bin_width, max_mz);
    let mut bins = vec![0.0; n];
    let max = s
        .fragments
        .iter()
        .map(|p| p.intensity)
        .fold(0.0f64, f64::max);
    if max == 0.0 {
        return Ok(bins);
    }
    for p in s.sorted_fragments() {
        let k = (p.mz / bin_width).floor() as usize;
        if k < n {
            bins[k] += p.intensity / max;
        }
    }
    bins.iter_mut().for_each(|b| *b = b.min(1.0));
    Ok(bins)
}

/// Fractional mass `mz − ⌊mz⌋`.
pub fn fractional_mz(mz: f64) -> Result<f64> {
    if !(mz >= 0.0) || !mz.is_finite() {
        return Err(Error::Domain(format!("m/z must be finite and non-negative, got {mz}")));
    }
    Ok(mz - mz.floor())
}
