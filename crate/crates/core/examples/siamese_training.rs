//! Trains a small encoder so that embedding cosine tracks fingerprint
//! Tanimoto similarity, on a synthetic library.
//!
//! ```text
//! cargo run --release --example siamese_training
//! ```

use ms2embed::encoder::{EncoderConfig, SpectrumEncoder};
use ms2embed::similarity::{train_siamese, SiameseData, TrainConfig};
use ms2embed::spectra::{split_dataset, SplitCounts, SplitName};
use ms2embed::synthetic::{library, SyntheticConfig};
use ms2embed::tensor::optim::AdamConfig;
use ms2embed::tensor::{rng, ParamStore, Precision};

fn main() -> ms2embed::Result<()> {
    let lib = library(&SyntheticConfig::default())?;
    let counts = SplitCounts {
        novel_structures: 3,
        known_spectra: 8,
    };
    let split = split_dataset(&lib.spectra, &lib.labels, counts, 0)?;
    let data = SiameseData {
        train: split.select(&lib.spectra, SplitName::Train),
        known: split.select(&lib.spectra, SplitName::Known),
        novel: split.select(&lib.spectra, SplitName::Novel),
        labels: &lib.labels,
    };

    let mut store = ParamStore::new(Precision::Binary32);
    let encoder = SpectrumEncoder::new(&EncoderConfig::small(32, 2, 4), &mut store, "encoder", &mut rng::seeded(0))?;
    let cfg = TrainConfig {
        epochs: 10,
        batch_size: 32,
        pairs_per_epoch: 128,
        eval_pairs: 500,
        adam: AdamConfig {
            learning_rate: 1e-3,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let run = train_siamese(&encoder, &mut store, &data, &cfg)?;
    print!("{}", run.log.to_text());
    Ok(())
}
