//! Predicts ten molecular properties from spectra with the transformer and
//! with the binned-spectrum baseline, and compares R².
//!
//! ```text
//! cargo run --release --example property_prediction
//! ```

use ms2embed::encoder::{EncoderConfig, SpectrumEncoder};
use ms2embed::property::{train_properties, BaselineConfig, PropertyData, PropertyModel};
use ms2embed::similarity::TrainConfig;
use ms2embed::spectra::{split_dataset, SplitCounts, SplitName};
use ms2embed::synthetic::{library, SyntheticConfig};
use ms2embed::tensor::optim::AdamConfig;
use ms2embed::tensor::{rng, ParamStore, Precision};

fn main() -> ms2embed::Result<()> {
    let lib = library(&SyntheticConfig {
        structures: 30,
        ..SyntheticConfig::default()
    })?;
    let counts = SplitCounts {
        novel_structures: 4,
        known_spectra: 10,
    };
    let split = split_dataset(&lib.spectra, &lib.labels, counts, 0)?;
    let data = PropertyData {
        train: split.select(&lib.spectra, SplitName::Train),
        known: split.select(&lib.spectra, SplitName::Known),
        novel: split.select(&lib.spectra, SplitName::Novel),
        labels: &lib.labels,
    };
    let scaler = data.fit_scaler()?;
    let cfg = TrainConfig {
        epochs: 10,
        batch_size: 16,
        adam: AdamConfig {
            learning_rate: 1e-3,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };

    let mut store = ParamStore::new(Precision::Binary32);
    let mut r = rng::seeded(0);
    let encoder = SpectrumEncoder::new(&EncoderConfig::small(32, 2, 4), &mut store, "encoder", &mut r)?;
    let model = PropertyModel::transformer(encoder, &mut store, &mut r)?;
    let transformer = train_properties(&model, &mut store, &scaler, &data, &cfg, "properties")?;

    let mut store = ParamStore::new(Precision::Binary32);
    let model = PropertyModel::baseline(BaselineConfig::for_dim(32, 0.1), &mut store, &mut rng::seeded(0))?;
    let baseline = train_properties(&model, &mut store, &scaler, &data, &cfg, "properties-baseline")?;

    for run in [&transformer, &baseline] {
        print!("{}", run.report.to_text());
    }
    Ok(())
}
