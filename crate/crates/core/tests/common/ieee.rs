//! Round-to-nearest-even conversion of binary64 values into narrower IEEE
//! 754 binary formats, computed from the bit pattern alone.

#[derive(Clone, Copy, Debug)]
pub struct Format {
    /// Stored significand bits.
    pub mantissa: i32,
    pub emin: i32,
    pub emax: i32,
}

pub const BINARY16: Format = Format {
    mantissa: 10,
    emin: -14,
    emax: 15,
};

pub const BINARY32: Format = Format {
    mantissa: 23,
    emin: -126,
    emax: 127,
};

fn pow2(e: i32) -> f64 {
    assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Unbiased exponent of a normal binary64 value.
fn exponent(x: f64) -> i32 {
    ((x.to_bits() >> 52) & 0x7ff) as i32 - 1023
}

/// `x` rounded to `fmt`; infinite on overflow.
pub fn round(x: f64, fmt: Format) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    assert!(x.is_normal(), "oracle does not take binary64 subnormals");
    let sign = x.signum();
    let a = x.abs();
    let e = exponent(a).max(fmt.emin);
    let ulp = pow2(e - fmt.mantissa);
    // a / ulp is exact: scaling by a power of two.
    let q = a / ulp;
    let floor = q.floor();
    let frac = q - floor;
    let n = if frac > 0.5 || (frac == 0.5 && floor % 2.0 == 1.0) {
        floor + 1.0
    } else {
        floor
    };
    let r = n * ulp;
    let max = (2.0 - pow2(-fmt.mantissa)) * pow2(fmt.emax);
    if r > max {
        sign * f64::INFINITY
    } else {
        sign * r
    }
}

/// Distance between consecutive representable values around `x`.
pub fn spacing(x: f64, fmt: Format) -> f64 {
    pow2(exponent(x.abs()).max(fmt.emin) - fmt.mantissa)
}
