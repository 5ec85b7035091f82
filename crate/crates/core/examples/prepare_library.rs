//! Parses an MGF library, applies the cleaning filters and makes a
//! structure-disjoint split.
//!
//! ```text
//! cargo run --example prepare_library -- library.mgf fingerprints.tsv properties.tsv
//! ```
//! Without arguments a synthetic library is used.

use std::path::Path;

use ms2embed::io::read_text;
use ms2embed::spectra::{clean_spectra, load_labels, parse_mgf, split_dataset, SplitCounts, SplitName};
use ms2embed::synthetic::{library, SyntheticConfig};

fn main() -> ms2embed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (spectra, labels) = if let [mgf, fp, props] = args.as_slice() {
        (parse_mgf(&read_text(Path::new(mgf))?)?, load_labels(Path::new(fp), Path::new(props))?)
    } else {
        let lib = library(&SyntheticConfig::default())?;
        (lib.spectra, lib.labels)
    };

    let report = clean_spectra(spectra);
    println!("kept {}, rejected {}", report.kept.len(), report.rejected.len());
    for r in report.rejected.iter().take(5) {
        println!("  {}: {}", r.spectrum_id, r.reason);
    }

    let counts = SplitCounts {
        novel_structures: 2,
        known_spectra: 8,
    };
    let split = split_dataset(&report.kept, &labels, counts, 0)?;
    for which in [SplitName::Train, SplitName::Known, SplitName::Novel] {
        println!("{which:>5}: {} spectra", split.select(&report.kept, which).len());
    }
    println!(
        "novel structures held out of training: {:?}",
        split.novel_structures()
    );
    Ok(())
}
