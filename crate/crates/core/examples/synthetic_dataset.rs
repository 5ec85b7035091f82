//! Writes a synthetic library (MGF, fingerprints, properties) and a config
//! file that the `ms2embed` binary can run on.
//!
//! ```text
//! cargo run --example synthetic_dataset -- /tmp/syn
//! cargo run --bin ms2embed -- --config /tmp/syn/run.cfg prepare
//! ```

use std::path::PathBuf;

use ms2embed::io::write_atomic;
use ms2embed::spectra::serialize_mgf;
use ms2embed::synthetic::{library, SyntheticConfig};

fn main() -> ms2embed::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic".into()));
    let lib = library(&SyntheticConfig {
        structures: 30,
        ..SyntheticConfig::default()
    })?;
    write_atomic(&dir.join("library.mgf"), serialize_mgf(&lib.spectra).as_bytes())?;
    write_atomic(&dir.join("fingerprints.tsv"), lib.labels.fingerprint_text().as_bytes())?;
    write_atomic(&dir.join("properties.tsv"), lib.labels.property_text().as_bytes())?;
    let cfg = format!(
        "schema_version = 1\n\
         output_dir = {out}\n\
         data.spectra = {d}/library.mgf\n\
         data.fingerprints = {d}/fingerprints.tsv\n\
         data.properties = {d}/properties.tsv\n\
         split.novel_structures = 3\n\
         split.known_spectra = 10\n\
         encoder.d = 32\n\
         encoder.layers = 2\n\
         encoder.heads = 4\n\
         encoder.hidden = 64\n\
         train.epochs = 5\n\
         train.batch_size = 16\n\
         train.pairs_per_epoch = 64\n\
         train.eval_pairs = 200\n\
         train.learning_rate = 0.001\n",
        d = dir.display(),
        out = dir.join("out").display(),
    );
    write_atomic(&dir.join("run.cfg"), cfg.as_bytes())?;
    println!("{} spectra, {} structures -> {}", lib.spectra.len(), lib.labels.len(), dir.display());
    Ok(())
}
