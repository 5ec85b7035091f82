//! Spectrum data model, MGF ingestion, cleaning, label tables and
//! structure-disjoint dataset splits.

pub mod clean;
pub mod labels;
pub mod mgf;
pub mod split;

use std::cmp::Ordering;

use crate::error::{Error, Result};

pub use clean::{clean_spectra, CleanReport, Rejection};
pub use labels::{load_labels, Fingerprint, LabelTable, MoleculeRecord, PROPERTY_COUNT, PROPERTY_NAMES};
pub use mgf::{parse_mgf, serialize_mgf};
pub use split::{split_dataset, SplitAssignment, SplitCounts, SplitName};

/// One (m/z, intensity) pair.
///
/// `mz_decimals`/`intensity_decimals` record how many decimal places the
/// source text carried; `None` means the value was produced in memory and is
/// printed in shortest round-trip form.
#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub mz: f64,
    pub intensity: f64,
    pub mz_decimals: Option<u8>,
    pub intensity_decimals: Option<u8>,
}

impl Peak {
    pub fn new(mz: f64, intensity: f64) -> Result<Self> {
        if !(mz.is_finite() && mz > 0.0) {
            return Err(Error::Domain(format!("peak m/z must be positive, got {mz}")));
        }
        if !(intensity.is_finite() && intensity >= 0.0) {
            return Err(Error::Domain(format!(
                "peak intensity must be non-negative, got {intensity}"
            )));
        }
        Ok(Peak {
            mz,
            intensity,
            mz_decimals: None,
            intensity_decimals: None,
        })
    }

    /// Total order on (m/z, intensity), used wherever a canonical fragment
    /// order is needed.
    pub fn canonical_cmp(&self, other: &Peak) -> Ordering {
        self.mz
            .total_cmp(&other.mz)
            .then(self.intensity.total_cmp(&other.intensity))
    }
}

/// A tandem mass spectrum: precursor plus an unordered set of fragments.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub id: String,
    pub precursor: Peak,
    pub fragments: Vec<Peak>,
    pub structure_id: String,
    /// Whether the PEPMASS line carried an intensity.
    pub precursor_intensity_given: bool,
    /// Headers other than TITLE, PEPMASS and STRUCTUREID, in source order.
    pub metadata: Vec<(String, String)>,
}

impl Spectrum {
    pub fn new(
        id: impl Into<String>,
        structure_id: impl Into<String>,
        precursor_mz: f64,
        fragments: Vec<Peak>,
    ) -> Result<Self> {
        Ok(Spectrum {
            id: id.into(),
            precursor: Peak::new(precursor_mz, 0.0)?,
            fragments,
            structure_id: structure_id.into(),
            precursor_intensity_given: false,
            metadata: Vec::new(),
        })
    }

    /// Precursor plus fragments.
    pub fn peak_count(&self) -> usize {
        self.fragments.len() + 1
    }

    /// Fragments sorted by (m/z, intensity).
    pub fn sorted_fragments(&self) -> Vec<Peak> {
        let mut f = self.fragments.clone();
        f.sort_by(Peak::canonical_cmp);
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_invariants() {
        assert!(Peak::new(100.0, 0.0).is_ok());
        assert!(Peak::new(0.0, 1.0).is_err());
        assert!(Peak::new(-5.0, 1.0).is_err());
        assert!(Peak::new(100.0, -1.0).is_err());
        assert!(Peak::new(f64::NAN, 1.0).is_err());
    }
}
