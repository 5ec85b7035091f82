//! Saves parameters with a config digest and refuses to load them under a
//! different configuration.

use ms2embed::encoder::{EncoderConfig, SpectrumEncoder};
use ms2embed::tensor::checkpoint::{read_file, write_file, ConfigDigest};
use ms2embed::tensor::{rng, ParamStore, Precision};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut store = ParamStore::new(Precision::Binary32);
    SpectrumEncoder::new(&EncoderConfig::small(16, 1, 2), &mut store, "encoder", &mut rng::seeded(3))?;
    let digest = ConfigDigest::of_text("encoder.d = 16\nencoder.layers = 1\n");

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.ckpt");
    write_file(&path, &store, &digest)?;
    println!("{} bytes for {} tensors", std::fs::metadata(&path)?.len(), store.len());

    let loaded = read_file(&path)?;
    let same = store.iter().zip(loaded.params.iter()).all(|((a, x), (b, y))| a == b && x.data() == y.data());
    println!("weights restored bit for bit: {same}");

    let other = ConfigDigest::of_text("encoder.d = 32\nencoder.layers = 1\n");
    println!("digest matches the d=32 config: {}", loaded.digest == other);
    Ok(())
}
