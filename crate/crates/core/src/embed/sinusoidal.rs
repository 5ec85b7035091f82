//! Multi-scale sinusoidal m/z embedding.
//!
//! Channel pair `i` (for `i = 0 … d/2−1`) is `(sin(2π·mz/λᵢ), cos(2π·mz/λᵢ))`
//! with wavelengths log-spaced from `λ_min` to `λ_max`:
//!
//! ```text
//! λᵢ = λ_min · (λ_max / λ_min)^(2i / (d − 2))
//! ```
//!
//! The defaults span 10^-2.5 Da (resolving millidalton mass defects) to
//! 10^3.3 Da (the whole small-molecule range).

use std::f64::consts::PI;

use super::precision::{Emulation, FloatFormat, PrecisionMode};
use crate::error::{Error, Result};

/// 10^-2.5 Da, correctly rounded.
pub const LAMBDA_MIN: f64 = 0.003_162_277_660_168_379_4;
/// 10^3.3 Da, correctly rounded.
pub const LAMBDA_MAX: f64 = 1_995.262_314_968_879_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidalConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub d: usize,
}

impl Default for SinusoidalConfig {
    fn default() -> Self {
        SinusoidalConfig {
            lambda_min: LAMBDA_MIN,
            lambda_max: LAMBDA_MAX,
            d: 512,
        }
    }
}

impl SinusoidalConfig {
    pub fn with_dim(d: usize) -> Self {
        SinusoidalConfig {
            d,
            ..SinusoidalConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0 && self.lambda_min < self.lambda_max) {
            return Err(Error::Config(format!(
                "wavelengths must satisfy 0 < lambda_min < lambda_max, got {} and {}",
                self.lambda_min, self.lambda_max
            )));
        }
        if self.d < 4 || self.d % 2 != 0 {
            return Err(Error::Config(format!(
                "sinusoidal dimension must be even and at least 4, got {}",
                self.d
            )));
        }
        Ok(())
    }

    /// The `d/2` wavelengths. The endpoints are exactly `lambda_min` and
    /// `lambda_max`.
    pub fn wavelengths(&self) -> Vec<f64> {
        let pairs = self.d / 2;
        let ratio = self.lambda_max / self.lambda_min;
        (0..pairs)
            .map(|i| match i {
                0 => self.lambda_min,
                i if i == pairs - 1 => self.lambda_max,
                i => self.lambda_min * ratio.powf(2.0 * i as f64 / (self.d - 2) as f64),
            })
            .collect()
    }
}

/// Binary64 embedding of `mz`.
pub fn sinusoidal_embed(mz: f64, cfg: &SinusoidalConfig) -> Result<Vec<f64>> {
    sinusoidal_embed_with(mz, cfg, PrecisionMode::BINARY64)
}

/// Embedding of `mz` with the input cast (or every step rounded) according
/// to `mode`. Output components are binary64 values.
pub fn sinusoidal_embed_with(
    mz: f64,
    cfg: &SinusoidalConfig,
    mode: PrecisionMode,
) -> Result<Vec<f64>> {
    if !(mz >= 0.0) || !mz.is_finite() {
        return Err(Error::Domain(format!("m/z must be finite and non-negative, got {mz}")));
    }
    cfg.validate()?;
    match mode.emulation {
        Emulation::InputOnly => {
            let x = mode.format.quantize(mz)?;
            Ok(embed_binary64(x, &cfg.wavelengths()))
        }
        Emulation::Full => embed_emulated(mz, cfg, mode.format),
    }
}

pub(crate) fn embed_binary64(mz: f64, wavelengths: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * wavelengths.len());
    for &lambda in wavelengths {
        let (s, c) = (2.0 * PI * mz / lambda).sin_cos();
        out.push(s);
        out.push(c);
    }
    out
}

/// Every primitive result rounded to `format`. Wavelengths are formed in log
/// space so that no intermediate exceeds the binary16 range; the phase of
/// fine channels can still overflow binary16, which is reported as a cast
/// error.
fn embed_emulated(mz: f64, cfg: &SinusoidalConfig, format: FloatFormat) -> Result<Vec<f64>> {
    let q = |x: f64| format.quantize(x);
    let x = q(mz)?;
    let two_pi = q(2.0 * PI)?;
    let ln_min = q(q(cfg.lambda_min)?.ln())?;
    let ln_max = q(q(cfg.lambda_max)?.ln())?;
    let span = q(ln_max - ln_min)?;
    let denom = q((cfg.d - 2) as f64)?;
    let scaled = q(two_pi * x)?;
    let pairs = cfg.d / 2;
    let mut out = Vec::with_capacity(cfg.d);
    for i in 0..pairs {
        let t = q(q(2.0 * i as f64)? / denom)?;
        let lambda = q(q(ln_min + q(t * span)?)?.exp())?;
        let phase = q(scaled / lambda)?;
        out.push(q(phase.sin())?);
        out.push(q(phase.cos())?);
    }
    Ok(out)
}
