//! Sinusoidal m/z embedding and what input precision does to it.
//!
//! ```text
//! cargo run --example sinusoidal_embedding -- 523.2871
//! ```

use ms2embed::embed::{cast_mz, sinusoidal_embed, FloatFormat, PrecisionMode, SinusoidalConfig};

fn main() -> ms2embed::Result<()> {
    let mz: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(523.2871);
    let cfg = SinusoidalConfig::with_dim(16);
    println!("wavelengths (Da): {:?}", cfg.wavelengths());

    let reference = sinusoidal_embed(mz, &cfg)?;
    for format in [FloatFormat::Binary16, FloatFormat::Binary32, FloatFormat::Binary64] {
        let cast = cast_mz(mz, PrecisionMode::input_only(format))?;
        let e = sinusoidal_embed(cast, &cfg)?;
        let worst = e.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{:>8}: m/z {cast:<22} max |diff| vs binary64 {worst:.3e}", format.name());
    }

    // A 1 mDa shift is visible on the finest channel.
    let shifted = sinusoidal_embed(mz + 0.001, &cfg)?;
    let chord = ((shifted[0] - reference[0]).powi(2) + (shifted[1] - reference[1]).powi(2)).sqrt();
    println!("1 mDa shift moves channel 0 by {chord:.4}");
    Ok(())
}
