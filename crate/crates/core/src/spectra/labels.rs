//! Molecule label tables: fingerprints and the ten regression properties.
//!
//! Fingerprint file, one record per line:
//!
//! ```text
//! structure_id<TAB>hex bit-set
//! ```
//!
//! Hex digit `k` (from the left) holds bits `4k..4k+3`, most significant bit
//! first, so `"8"` is bit 0 and `"1"` is bit 3. Width is four bits per digit.
//!
//! Property file: tab-separated, a header `structure_id` followed by
//! [`PROPERTY_NAMES`] in order, then one row per structure.

use std::collections::BTreeMap;
use std::path::Path;

use super::Spectrum;
use crate::error::{Error, Result};

pub const PROPERTY_COUNT: usize = 10;

/// Column names of the property file, in model output order.
pub const PROPERTY_NAMES: [&str; PROPERTY_COUNT] = [
    "logp",
    "h_bond_acceptors",
    "h_bond_donors",
    "polar_surface_area",
    "rotatable_bonds",
    "aromatic_rings",
    "aliphatic_rings",
    "heteroatoms",
    "fraction_sp3_carbons",
    "qed",
];

/// Fixed-width bit-set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    width: usize,
    words: Vec<u64>,
}

impl Fingerprint {
    pub fn empty(width: usize) -> Self {
        Fingerprint {
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn from_bits(width: usize, bits: &[usize]) -> Result<Self> {
        let mut fp = Fingerprint::empty(width);
        for &b in bits {
            if b >= width {
                return Err(Error::Label(format!("bit {b} outside width {width}")));
            }
            fp.words[b / 64] |= 1 << (b % 64);
        }
        Ok(fp)
    }

    pub fn from_hex(hex: &str) -> Result<Self> {
        let mut fp = Fingerprint::empty(hex.len() * 4);
        for (k, c) in hex.chars().enumerate() {
            let v = c
                .to_digit(16)
                .ok_or_else(|| Error::Label(format!("invalid hex digit {c:?} in fingerprint")))?;
            for j in 0..4 {
                if v & (8 >> j) != 0 {
                    let b = 4 * k + j;
                    fp.words[b / 64] |= 1 << (b % 64);
                }
            }
        }
        Ok(fp)
    }

    pub fn to_hex(&self) -> String {
        (0..self.width.div_ceil(4))
            .map(|k| {
                let v = (0..4).fold(0u32, |acc, j| {
                    if self.contains(4 * k + j) {
                        acc | (8 >> j)
                    } else {
                        acc
                    }
                });
                char::from_digit(v, 16).unwrap()
            })
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn contains(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] & (1 << (bit % 64)) != 0
    }

    pub fn ones(&self) -> Vec<usize> {
        (0..self.width).filter(|&b| self.contains(b)).collect()
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeRecord {
    pub structure_id: String,
    pub fingerprint: Fingerprint,
    pub properties: [f64; PROPERTY_COUNT],
}

/// Structure-keyed labels with a uniform fingerprint width.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabelTable {
    records: BTreeMap<String, MoleculeRecord>,
    width: usize,
}

impl LabelTable {
    pub fn from_records(records: impl IntoIterator<Item = MoleculeRecord>) -> Result<Self> {
        let mut table = LabelTable::default();
        for r in records {
            if table.records.is_empty() {
                table.width = r.fingerprint.width();
            } else if r.fingerprint.width() != table.width {
                return Err(Error::Label(format!(
                    "fingerprint of {} has width {}, expected {}",
                    r.structure_id,
                    r.fingerprint.width(),
                    table.width
                )));
            }
            if r.properties.iter().any(|v| !v.is_finite()) {
                return Err(Error::Label(format!(
                    "non-finite property for {}",
                    r.structure_id
                )));
            }
            let id = r.structure_id.clone();
            if table.records.insert(id.clone(), r).is_some() {
                return Err(Error::Label(format!("duplicate structure {id}")));
            }
        }
        Ok(table)
    }

    /// Joins fingerprint and property text; every structure must appear in both.
    pub fn parse(fingerprints: &str, properties: &str) -> Result<Self> {
        let fps = parse_fingerprints(fingerprints)?;
        let mut props = parse_properties(properties)?;
        let mut records = Vec::with_capacity(fps.len());
        for (id, fingerprint) in fps {
            let properties = props
                .remove(&id)
                .ok_or_else(|| Error::Label(format!("structure {id} has no property row")))?;
            records.push(MoleculeRecord {
                structure_id: id,
                fingerprint,
                properties,
            });
        }
        if let Some(id) = props.keys().next() {
            return Err(Error::Label(format!("structure {id} has no fingerprint")));
        }
        LabelTable::from_records(records)
    }

    pub fn get(&self, structure_id: &str) -> Option<&MoleculeRecord> {
        self.records.get(structure_id)
    }

    pub fn require(&self, structure_id: &str) -> Result<&MoleculeRecord> {
        self.get(structure_id)
            .ok_or_else(|| Error::Label(format!("unresolved structure_id {structure_id}")))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn records(&self) -> impl Iterator<Item = &MoleculeRecord> {
        self.records.values()
    }

    /// Fails with every structure id referenced by `spectra` but absent here.
    pub fn check_resolves(&self, spectra: &[Spectrum]) -> Result<()> {
        let mut missing: Vec<&str> = spectra
            .iter()
            .map(|s| s.structure_id.as_str())
            .filter(|id| !self.records.contains_key(*id))
            .collect();
        missing.sort_unstable();
        missing.dedup();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Label(format!(
                "unresolved structure ids: {}",
                missing.join(", ")
            )))
        }
    }

    pub fn fingerprint_text(&self) -> String {
        self.records
            .values()
            .map(|r| format!("{}\t{}\n", r.structure_id, r.fingerprint.to_hex()))
            .collect()
    }

    pub fn property_text(&self) -> String {
        let mut out = String::from("structure_id");
        for n in PROPERTY_NAMES {
            out.push('\t');
            out.push_str(n);
        }
        out.push('\n');
        for r in self.records.values() {
            out.push_str(&r.structure_id);
            for v in r.properties {
                out.push('\t');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn parse_fingerprints(text: &str) -> Result<Vec<(String, Fingerprint)>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, hex) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: idx + 1,
            message: "fingerprint line needs structure_id<TAB>hex".into(),
        })?;
        let fp = Fingerprint::from_hex(hex.trim()).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((id.trim().to_string(), fp));
    }
    Ok(out)
}

fn parse_properties(text: &str) -> Result<BTreeMap<String, [f64; PROPERTY_COUNT]>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Label("property file has no header".into()))?;
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    if cols.len() != PROPERTY_COUNT + 1
        || cols[0] != "structure_id"
        || cols[1..] != PROPERTY_NAMES
    {
        return Err(Error::Label(format!(
            "property header must be structure_id followed by {}",
            PROPERTY_NAMES.join(", ")
        )));
    }
    let mut out = BTreeMap::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != PROPERTY_COUNT + 1 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!(
                    "expected {} property values, found {}",
                    PROPERTY_COUNT,
                    fields.len().saturating_sub(1)
                ),
            });
        }
        let mut values = [0.0; PROPERTY_COUNT];
        for (v, f) in values.iter_mut().zip(&fields[1..]) {
            *v = f.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("property value {f:?} is not numeric"),
            })?;
        }
        if out.insert(fields[0].to_string(), values).is_some() {
            return Err(Error::Label(format!("duplicate property row {}", fields[0])));
        }
    }
    Ok(out)
}

/// Reads and joins a fingerprint file and a property file.
pub fn load_labels(fingerprint_file: &Path, property_file: &Path) -> Result<LabelTable> {
    let fps = crate::io::read_text(fingerprint_file)?;
    let props = crate::io::read_text(property_file)?;
    LabelTable::parse(&fps, &props)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        format!("structure_id\t{}\n", PROPERTY_NAMES.join("\t"))
    }

    fn row(id: &str, n: usize) -> String {
        let vals: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        format!("{id}\t{}\n", vals.join("\t"))
    }

    #[test]
    fn hex_bit_order() {
        let fp = Fingerprint::from_hex("81").unwrap();
        assert_eq!(fp.width(), 8);
        assert_eq!(fp.ones(), vec![0, 7]);
        assert_eq!(fp.to_hex(), "81");
        assert!(Fingerprint::from_hex("zz").is_err());
    }

    #[test]
    fn two_records_of_width_eight() {
        let fps = "A\tff\nB\t0f\n";
        let props = header() + &row("A", 10) + &row("B", 10);
        let t = LabelTable::parse(fps, &props).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.width(), 8);
        assert_eq!(t.get("B").unwrap().fingerprint.count_ones(), 4);
    }

    #[test]
    fn nine_property_values_is_a_column_error() {
        let props = header() + &row("A", 9);
        let err = LabelTable::parse("A\tff\n", &props).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn unresolved_structure_is_named() {
        let props = header() + &row("A", 10);
        let t = LabelTable::parse("A\tff\n", &props).unwrap();
        let s = Spectrum::new("s1", "MISSING", 300.0, vec![]).unwrap();
        let err = t.check_resolves(&[s]).unwrap_err().to_string();
        assert!(err.contains("MISSING"), "{err}");
    }

    #[test]
    fn mixed_widths_are_rejected() {
        let props = header() + &row("A", 10) + &row("B", 10);
        assert!(LabelTable::parse("A\tff\nB\tfff\n", &props).is_err());
    }

    #[test]
    fn text_round_trip() {
        let props = header() + &row("A", 10) + &row("B", 10);
        let t = LabelTable::parse("A\tf0\nB\t0f\n", &props).unwrap();
        let again = LabelTable::parse(&t.fingerprint_text(), &t.property_text()).unwrap();
        assert_eq!(again, t);
    }
}
