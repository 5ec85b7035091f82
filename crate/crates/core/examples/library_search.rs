//! Searches queries against a reference library, by learned embedding and
//! by the modified-cosine baseline, and reports top-1 accuracy.
//!
//! ```text
//! cargo run --release --example library_search
//! ```

use ms2embed::encoder::{EncoderConfig, SpectrumEncoder};
use ms2embed::search::{accuracy_report, build_index, evaluate_search, search_all, search_modified_cosine};
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
    let reference = split.select(&lib.spectra, SplitName::Train);
    let known = split.select(&lib.spectra, SplitName::Known);
    let novel = split.select(&lib.spectra, SplitName::Novel);

    let mut store = ParamStore::new(Precision::Binary32);
    let encoder = SpectrumEncoder::new(&EncoderConfig::small(32, 2, 4), &mut store, "encoder", &mut rng::seeded(0))?;
    let cfg = TrainConfig {
        epochs: 10,
        batch_size: 32,
        pairs_per_epoch: 128,
        eval_pairs: 0,
        adam: AdamConfig {
            learning_rate: 1e-3,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let data = SiameseData {
        train: reference.clone(),
        known: Vec::new(),
        novel: Vec::new(),
        labels: &lib.labels,
    };
    train_siamese(&encoder, &mut store, &data, &cfg)?;

    let index = build_index(&encoder, &store, &reference)?;
    let mut rows = Vec::new();
    for (name, queries, exact) in [("known", &known, true), ("novel", &novel, false)] {
        let results = search_all(&encoder, &store, &index, queries, 5)?;
        rows.push(evaluate_search(name, queries, &results, &lib.labels, 0.6, exact)?.accuracy);
    }
    let cosine: Vec<_> = known
        .iter()
        .map(|q| search_modified_cosine(q, &reference, 5, 0.1))
        .collect::<ms2embed::Result<_>>()?;
    rows.push(evaluate_search("known_modified_cosine", &known, &cosine, &lib.labels, 0.6, true)?.accuracy);
    print!("{}", accuracy_report(&rows));

    let hit = &cosine[0].hits[0];
    println!("{} -> {} ({:.3})", cosine[0].query_id, hit.spectrum_id, hit.score);
    Ok(())
}
