//! Delimited export of per-m/z embeddings for external projection tools.
//!
//! ```text
//! mz,frac_mz,precision,e0,e1,…
//! 0.02,0.02,binary64,0.998…,…
//! ```

use std::fmt::Write as _;

use super::features::fractional_mz;
use crate::error::Result;

/// `count` evenly spaced values `start + k·step`, computed as
/// `start + k·(end − start)/count` to avoid accumulated drift.
pub fn mz_grid(start: f64, end: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| start + (end - start) * k as f64 / count as f64)
        .collect()
}

/// Builds the export table. `embed` maps one m/z to its embedding vector.
pub fn export_embeddings(
    grid: &[f64],
    precision_label: &str,
    mut embed: impl FnMut(f64) -> Result<Vec<f64>>,
) -> Result<String> {
    let mut out = String::new();
    let mut header_written = false;
    for &mz in grid {
        let e = embed(mz)?;
        if !header_written {
            out.push_str("mz,frac_mz,precision");
            for j in 0..e.len() {
                write!(out, ",e{j}").unwrap();
            }
            out.push('\n');
            header_written = true;
        }
        write!(out, "{mz},{},{precision_label}", fractional_mz(mz)?).unwrap();
        for v in e {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{sinusoidal_embed, SinusoidalConfig};

    #[test]
    fn fifty_thousand_point_grid() {
        let g = mz_grid(0.0, 1000.0, 50_000);
        assert_eq!(g.len(), 50_000);
        assert_eq!(g[1], 0.02);
        assert_eq!(g[49_999], 999.98);
    }

    #[test]
    fn export_layout() {
        let cfg = SinusoidalConfig::with_dim(4);
        let text = export_embeddings(&[0.0, 1.5], "binary64", |mz| sinusoidal_embed(mz, &cfg)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "mz,frac_mz,precision,e0,e1,e2,e3");
        assert!(lines[1].starts_with("0,0,binary64,0,1,0,1"));
        assert!(lines[2].starts_with("1.5,0.5,binary64,"));
    }
}
