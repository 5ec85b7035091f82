//! IEEE 754 precision casting of m/z inputs.

use std::fmt;
use std::str::FromStr;

use half::f16;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FloatFormat {
    Binary16,
    Binary32,
    Binary64,
}

impl FloatFormat {
    pub fn name(self) -> &'static str {
        match self {
            FloatFormat::Binary16 => "binary16",
            FloatFormat::Binary32 => "binary32",
            FloatFormat::Binary64 => "binary64",
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            FloatFormat::Binary16 => 16,
            FloatFormat::Binary32 => 32,
            FloatFormat::Binary64 => 64,
        }
    }

    /// Rounds `x` to the nearest representable value (ties to even).
    /// Overflow to infinity is a [`Error::Cast`].
    pub fn quantize(self, x: f64) -> Result<f64> {
        let q = match self {
            FloatFormat::Binary16 => f16::from_f64(x).to_f64(),
            FloatFormat::Binary32 => x as f32 as f64,
            FloatFormat::Binary64 => x,
        };
        if x.is_finite() && q.is_infinite() {
            return Err(Error::Cast {
                value: x,
                format: self.name(),
            });
        }
        Ok(q)
    }
}

impl FromStr for FloatFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "16" | "binary16" | "half" => Ok(FloatFormat::Binary16),
            "32" | "binary32" | "single" => Ok(FloatFormat::Binary32),
            "64" | "binary64" | "double" => Ok(FloatFormat::Binary64),
            other => Err(Error::Config(format!("unknown precision {other:?}"))),
        }
    }
}

/// Where rounding to the target format is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Emulation {
    /// Quantize the m/z input once, compute the embedding in binary64.
    #[default]
    InputOnly,
    /// Quantize after every primitive step of the embedding computation.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrecisionMode {
    pub format: FloatFormat,
    pub emulation: Emulation,
}

impl PrecisionMode {
    pub const BINARY64: PrecisionMode = PrecisionMode::input_only(FloatFormat::Binary64);

    pub const fn input_only(format: FloatFormat) -> Self {
        PrecisionMode {
            format,
            emulation: Emulation::InputOnly,
        }
    }

    pub const fn full(format: FloatFormat) -> Self {
        PrecisionMode {
            format,
            emulation: Emulation::Full,
        }
    }

    pub fn label(&self) -> String {
        match self.emulation {
            Emulation::InputOnly => self.format.name().to_string(),
            Emulation::Full => format!("{}-full", self.format.name()),
        }
    }
}

impl Default for PrecisionMode {
    fn default() -> Self {
        PrecisionMode::BINARY64
    }
}

impl fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Casts an m/z value through the mode's target format.
pub fn cast_mz(mz: f64, mode: PrecisionMode) -> Result<f64> {
    if !mz.is_finite() {
        return Err(Error::Domain(format!("m/z must be finite, got {mz}")));
    }
    mode.format.quantize(mz)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary16_spacing_at_500() {
        let m = PrecisionMode::input_only(FloatFormat::Binary16);
        assert_eq!(cast_mz(500.0005, m).unwrap(), 500.0);
        assert_eq!(cast_mz(500.2, m).unwrap(), 500.25);
    }

    #[test]
    fn powers_of_two_survive_binary16() {
        let m = PrecisionMode::input_only(FloatFormat::Binary16);
        for e in -10..=10 {
            let x = 2f64.powi(e);
            assert_eq!(cast_mz(x, m).unwrap(), x);
        }
    }

    #[test]
    fn binary32_of_one_tenth() {
        let m = PrecisionMode::input_only(FloatFormat::Binary32);
        assert_eq!(cast_mz(0.1, m).unwrap(), 0.100000001490116119384765625);
    }

    #[test]
    fn overflow_is_a_cast_error() {
        let m = PrecisionMode::input_only(FloatFormat::Binary16);
        assert!(matches!(cast_mz(70000.0, m), Err(Error::Cast { .. })));
        assert!(cast_mz(1999.9, m).is_ok());
    }

    #[test]
    fn parses_cli_spellings() {
        assert_eq!("16".parse::<FloatFormat>().unwrap(), FloatFormat::Binary16);
        assert_eq!("64".parse::<FloatFormat>().unwrap(), FloatFormat::Binary64);
        assert!("8".parse::<FloatFormat>().is_err());
    }
}
