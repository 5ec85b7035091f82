//! Small synthetic libraries for examples and tests.
//!
//! Each structure owns a precursor mass and a set of substructures. A
//! substructure contributes one fingerprint bit and one characteristic
//! fragment, so spectra of similar structures share peaks. Replicate
//! spectra jitter m/z by a few millidaltons and intensities by a few
//! percent, and occasionally lose a weak peak.

use rand::seq::index::sample;
use rand::Rng as _;

use crate::error::Result;
use crate::spectra::{Fingerprint, LabelTable, MoleculeRecord, Peak, Spectrum, PROPERTY_COUNT};
use crate::tensor::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub structures: usize,
    pub spectra_per_structure: usize,
    /// Substructure vocabulary; also the fingerprint width.
    pub substructures: usize,
    /// Substructures drawn per structure.
    pub per_structure: usize,
    pub mz_jitter: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            structures: 20,
            spectra_per_structure: 4,
            substructures: 64,
            per_structure: 8,
            mz_jitter: 0.002,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticLibrary {
    pub spectra: Vec<Spectrum>,
    pub labels: LabelTable,
}

/// m/z of substructure fragment `k`, with a mass defect typical of organic
/// fragments.
fn fragment_mz(k: usize) -> f64 {
    let nominal = 41 + 7 * k;
    nominal as f64 + 0.0005 * nominal as f64 + 0.0137 * ((k * 5) % 11) as f64
}

/// Properties as smooth functions of mass and substructure content.
fn properties(mass: f64, bits: &[usize]) -> [f64; PROPERTY_COUNT] {
    let count = |m: usize| bits.iter().filter(|b| *b % m == 0).count() as f64;
    let n = bits.len() as f64;
    let spread = bits.iter().map(|&b| b as f64).sum::<f64>() / n.max(1.0);
    [
        0.004 * mass - 0.3 * count(3) + 0.02 * spread,
        count(2) + 0.001 * mass,
        count(5),
        0.08 * mass * count(4) / n.max(1.0) + count(7),
        (mass / 90.0).floor() + count(6),
        count(9) + (spread / 20.0).floor(),
        count(8),
        count(2) + count(3),
        (0.9 - 0.0006 * mass + 0.03 * count(5)).clamp(0.0, 1.0),
        (1.2 - 0.001 * mass + 0.05 * count(11)).clamp(0.0, 1.0),
    ]
}

pub fn library(cfg: &SyntheticConfig) -> Result<SyntheticLibrary> {
    let mut r = rng::stream(cfg.seed, 0x7379_6e74);
    let mut spectra = Vec::new();
    let mut records = Vec::new();
    for s in 0..cfg.structures {
        let sid = format!("SYN{s:04}");
        let mut bits = sample(&mut r, cfg.substructures, cfg.per_structure.min(cfg.substructures)).into_vec();
        bits.sort_unstable();
        let mass: f64 = 150.0 + r.gen_range(0.0..750.0);
        let mass = (mass * 1e4).round() / 1e4;
        let base: Vec<(f64, f64)> = bits
            .iter()
            .filter(|&&b| fragment_mz(b) < mass - 1.0)
            .map(|&b| (fragment_mz(b), r.gen_range(0.05..1.0)))
            .collect();
        records.push(MoleculeRecord {
            structure_id: sid.clone(),
            fingerprint: Fingerprint::from_bits(cfg.substructures, &bits)?,
            properties: properties(mass, &bits),
        });
        for k in 0..cfg.spectra_per_structure {
            let mut frags = Vec::new();
            for (i, &(mz, inten)) in base.iter().enumerate() {
                if inten < 0.15 && k > 0 && r.gen_bool(0.3) && frags.len() + (base.len() - i) > 4 {
                    continue;
                }
                let mz = mz + r.gen_range(-cfg.mz_jitter..=cfg.mz_jitter);
                let inten = inten * r.gen_range(0.95..1.05);
                let mut p = Peak::new((mz * 1e4).round() / 1e4, (inten * 1e4).round() / 1e4)?;
                p.mz_decimals = Some(4);
                p.intensity_decimals = Some(4);
                frags.push(p);
            }
            if frags.is_empty() {
                frags.push(Peak::new(mass / 2.0, 1.0)?);
            }
            let mut spectrum = Spectrum::new(format!("{sid}_{k}"), sid.clone(), mass, frags)?;
            spectrum.precursor.mz_decimals = Some(4);
            spectra.push(spectrum);
        }
    }
    Ok(SyntheticLibrary {
        spectra,
        labels: LabelTable::from_records(records)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let cfg = SyntheticConfig::default();
        let a = library(&cfg).unwrap();
        let b = library(&cfg).unwrap();
        assert_eq!(a.spectra.len(), 80);
        assert_eq!(a.labels.len(), 20);
        assert_eq!(a.spectra, b.spectra);
        a.labels.check_resolves(&a.spectra).unwrap();
    }

    #[test]
    fn properties_vary() {
        let lib = library(&SyntheticConfig::default()).unwrap();
        let recs: Vec<_> = lib.labels.records().collect();
        for k in 0..PROPERTY_COUNT {
            let first = recs[0].properties[k];
            assert!(recs.iter().any(|r| r.properties[k] != first), "property {k}");
        }
    }
}
