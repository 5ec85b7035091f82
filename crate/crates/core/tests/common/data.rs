//! Engineered toy datasets.

use ms2embed::spectra::{Fingerprint, LabelTable, MoleculeRecord, Peak, Spectrum, PROPERTY_COUNT};
use ms2embed::tensor::rng;
use rand::seq::index::sample;
use rand::Rng as _;

pub fn record(id: &str, width: usize, bits: &[usize], properties: [f64; PROPERTY_COUNT]) -> MoleculeRecord {
    MoleculeRecord {
        structure_id: id.to_string(),
        fingerprint: Fingerprint::from_bits(width, bits).unwrap(),
        properties,
    }
}

pub fn peak(mz: f64, intensity: f64) -> Peak {
    Peak::new(mz, intensity).unwrap()
}

/// Random spectrum with `n` fragments below a precursor in [300, 900).
pub fn random_spectrum(id: &str, structure: &str, n: usize, r: &mut rng::Rng) -> Spectrum {
    let precursor = r.gen_range(300.0..900.0);
    let frags = (0..n)
        .map(|_| peak(r.gen_range(50.0..precursor - 1.0), r.gen_range(0.01..1.0)))
        .collect();
    Spectrum::new(id, structure, precursor, frags).unwrap()
}

/// Five structures with nested fingerprints (2, 4, …, 10 leading bits) and
/// four replicate spectra each. Each bit contributes one fragment.
pub fn nested_toy(seed: u64) -> (Vec<Spectrum>, LabelTable) {
    let mut r = rng::seeded(seed);
    let mut spectra = Vec::new();
    let mut records = Vec::new();
    for s in 0..5 {
        let id = format!("N{s}");
        let bits: Vec<usize> = (0..2 * (s + 1)).collect();
        let precursor = 400.0 + 90.0 * s as f64 + 0.1372;
        let base: Vec<(f64, f64)> = bits
            .iter()
            .map(|&b| (61.0 + 29.0 * b as f64 + 0.0123 * b as f64, r.gen_range(0.2..1.0)))
            .collect();
        records.push(record(&id, 32, &bits, [s as f64; PROPERTY_COUNT]));
        for k in 0..4 {
            let frags = base
                .iter()
                .map(|&(mz, i)| peak(mz + r.gen_range(-0.002..0.002), i * r.gen_range(0.9..1.1)))
                .collect();
            spectra.push(Spectrum::new(format!("{id}_{k}"), id.clone(), precursor, frags).unwrap());
        }
    }
    (spectra, LabelTable::from_records(records).unwrap())
}

/// Properties that vary smoothly with precursor mass.
pub fn mass_properties(mass: f64) -> [f64; PROPERTY_COUNT] {
    let x = (mass - 500.0) / 300.0;
    std::array::from_fn(|k| match k % 3 {
        0 => (k as f64 + 1.0) * x,
        1 => x * x + 0.1 * k as f64 * x,
        _ => (2.0 * x + k as f64).sin(),
    })
}

/// `n` structures with masses spread over [200, 800], four spectra each.
/// Every spectrum holds a water-loss fragment at precursor − 18.0106 and
/// three random fragments.
pub fn mass_property_toy(n: usize, seed: u64) -> (Vec<Spectrum>, LabelTable) {
    let mut r = rng::seeded(seed);
    let mut spectra = Vec::new();
    let mut records = Vec::new();
    for s in 0..n {
        let id = format!("M{s}");
        let mass: f64 = 200.0 + 600.0 * (s as f64 + r.gen_range(0.0..1.0)) / n as f64;
        records.push(record(&id, 16, &[s % 16], mass_properties(mass)));
        for k in 0..4 {
            let mut frags = vec![peak(mass - 18.0106 + r.gen_range(-0.002..0.002), 1.0)];
            for _ in 0..3 {
                frags.push(peak(r.gen_range(50.0..mass - 20.0), r.gen_range(0.1..0.9)));
            }
            spectra.push(Spectrum::new(format!("{id}_{k}"), id.clone(), mass, frags).unwrap());
        }
    }
    (spectra, LabelTable::from_records(records).unwrap())
}

/// Structure number of an id such as `M12` or `F3`.
pub fn structure_number(s: &Spectrum) -> usize {
    s.structure_id[1..].parse().unwrap()
}

pub const SHARED_NOMINALS: [f64; 8] = [523.0, 561.0, 598.0, 634.0, 677.0, 702.0, 745.0, 781.0];

/// 24 structures alternating between two families that share nominal
/// fragment masses and differ only in mass defect (0.02 vs 0.22 Da).
/// Fingerprints carry eight family bits plus random bits.
pub fn defect_families(seed: u64) -> (Vec<Spectrum>, LabelTable) {
    let mut r = rng::seeded(seed);
    let mut spectra = Vec::new();
    let mut records = Vec::new();
    for s in 0..24 {
        let id = format!("F{s}");
        let family = s % 2;
        let defect = if family == 0 { 0.02 } else { 0.22 };
        let mut bits: Vec<usize> = (0..8).map(|b| b + 8 * family).collect();
        while bits.len() < 10 {
            let b = r.gen_range(12..64);
            if !bits.contains(&b) {
                bits.push(b);
            }
        }
        records.push(record(&id, 64, &bits, [0.0; PROPERTY_COUNT]));
        let precursor = r.gen_range(800..1000) as f64 + defect;
        let nominals: Vec<f64> = sample(&mut r, 8, 4).into_iter().map(|i| SHARED_NOMINALS[i]).collect();
        for k in 0..3 {
            let frags = nominals
                .iter()
                .map(|n| peak(n + defect + r.gen_range(-0.003..0.003), r.gen_range(0.3..1.0)))
                .collect();
            spectra.push(Spectrum::new(format!("{id}_{k}"), id.clone(), precursor, frags).unwrap());
        }
    }
    (spectra, LabelTable::from_records(records).unwrap())
}

/// Structures whose pairwise Tanimoto similarities cover all ten bins:
/// fingerprint `k` keeps the first `20 − k` of 20 shared bits and adds `k`
/// private bits. Each structure has two spectra.
pub fn graded_structures() -> (Vec<Spectrum>, LabelTable) {
    let mut r = rng::seeded(7);
    let mut spectra = Vec::new();
    let mut records = Vec::new();
    for k in 0..=20usize {
        let id = format!("G{k}");
        let mut bits: Vec<usize> = (0..20 - k).collect();
        bits.extend((0..k).map(|j| 20 + 20 * k + j));
        records.push(record(&id, 512, &bits, [0.0; PROPERTY_COUNT]));
        for j in 0..2 {
            spectra.push(random_spectrum(&format!("{id}_{j}"), &id, 5, &mut r));
        }
    }
    (spectra, LabelTable::from_records(records).unwrap())
}
