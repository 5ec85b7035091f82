//! Data-cleaning filters: minimum peak count and minimum written m/z
//! resolution.

use std::fmt;

use super::Spectrum;

/// Precursor plus fragments.
pub const MIN_PEAKS: usize = 5;
pub const MIN_MZ_DECIMALS: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    TooFewPeaks { peaks: usize },
    LowResolution { mz_decimals: u8 },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::TooFewPeaks { peaks } => {
                write!(f, "too few peaks: {peaks} < {MIN_PEAKS}")
            }
            RejectReason::LowResolution { mz_decimals } => write!(
                f,
                "m/z written with {mz_decimals} decimal places < {MIN_MZ_DECIMALS}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub spectrum_id: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default)]
pub struct CleanReport {
    pub kept: Vec<Spectrum>,
    pub rejected: Vec<Rejection>,
}

impl CleanReport {
    /// Tab-separated `spectrum_id, reason` rows under a header line.
    pub fn rejection_log(&self) -> String {
        let mut out = String::from("spectrum_id\treason\n");
        for r in &self.rejected {
            out.push_str(&format!("{}\t{}\n", r.spectrum_id, r.reason));
        }
        out
    }
}

fn check(s: &Spectrum) -> Option<RejectReason> {
    if s.peak_count() < MIN_PEAKS {
        return Some(RejectReason::TooFewPeaks {
            peaks: s.peak_count(),
        });
    }
    // Values built in memory carry no written precision and always pass.
    let coarsest = std::iter::once(&s.precursor)
        .chain(&s.fragments)
        .filter_map(|p| p.mz_decimals)
        .min();
    match coarsest {
        Some(d) if d < MIN_MZ_DECIMALS => Some(RejectReason::LowResolution { mz_decimals: d }),
        _ => None,
    }
}

/// Splits spectra into those passing every filter and a rejection log.
pub fn clean_spectra(spectra: Vec<Spectrum>) -> CleanReport {
    let mut report = CleanReport::default();
    for s in spectra {
        match check(&s) {
            None => report.kept.push(s),
            Some(reason) => report.rejected.push(Rejection {
                spectrum_id: s.id.clone(),
                reason,
            }),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::parse_mgf;

    fn block(id: &str, peaks: &[&str]) -> String {
        let mut s = format!("BEGIN IONS\nTITLE={id}\nPEPMASS=500.1234\n");
        for p in peaks {
            s.push_str(p);
            s.push_str(" 1.0\n");
        }
        s + "END IONS\n"
    }

    #[test]
    fn four_peaks_total_is_rejected() {
        let s = parse_mgf(&block("a", &["100.001", "200.002", "300.003"])).unwrap();
        let r = clean_spectra(s);
        assert!(r.kept.is_empty());
        assert_eq!(r.rejected[0].reason, RejectReason::TooFewPeaks { peaks: 4 });
    }

    #[test]
    fn coarse_fragment_is_rejected() {
        let s = parse_mgf(&block("b", &["100.1", "200.002", "300.003", "400.004"])).unwrap();
        let r = clean_spectra(s);
        assert_eq!(
            r.rejected[0].reason,
            RejectReason::LowResolution { mz_decimals: 1 }
        );
    }

    #[test]
    fn fine_spectra_are_kept_and_cleaning_is_idempotent() {
        let peaks: Vec<String> = (1..=10).map(|i| format!("{}.1234", 100 + i)).collect();
        let refs: Vec<&str> = peaks.iter().map(String::as_str).collect();
        let s = parse_mgf(&block("c", &refs)).unwrap();
        let once = clean_spectra(s);
        assert_eq!(once.kept.len(), 1);
        let twice = clean_spectra(once.kept.clone());
        assert_eq!(twice.kept, once.kept);
        assert!(twice.rejected.is_empty());
    }

    #[test]
    fn rejection_log_format() {
        let s = parse_mgf(&block("a", &["100.001"])).unwrap();
        let log = clean_spectra(s).rejection_log();
        assert_eq!(log, "spectrum_id\treason\na\ttoo few peaks: 2 < 5\n");
    }
}
