//! Encodes a spectrum with a freshly initialized transformer and shows the
//! embedding does not depend on fragment order.

use ms2embed::encoder::{EncoderConfig, Mode, SpectrumEncoder};
use ms2embed::spectra::{Peak, Spectrum};
use ms2embed::tensor::{rng, ParamStore, Precision};

fn main() -> ms2embed::Result<()> {
    let cfg = EncoderConfig::small(32, 2, 4);
    let mut store = ParamStore::new(Precision::Binary32);
    let encoder = SpectrumEncoder::new(&cfg, &mut store, "encoder", &mut rng::seeded(0))?;
    println!("{} parameters", store.num_elements());

    let peaks = [(77.0386, 0.3), (105.0335, 1.0), (122.0600, 0.45), (150.0550, 0.2)];
    let frags: Vec<Peak> = peaks.iter().map(|&(m, i)| Peak::new(m, i)).collect::<Result<_, _>>()?;
    let forward = Spectrum::new("fwd", "benzamide", 168.0655, frags.clone())?;
    let reversed = Spectrum::new("rev", "benzamide", 168.0655, frags.into_iter().rev().collect())?;

    let a = encoder.encode(&store, &forward, Mode::Infer)?;
    let b = encoder.encode(&store, &reversed, Mode::Infer)?;
    println!("embedding[..4] = {:?}", &a[..4]);
    println!("identical under reordering: {}", a == b);
    Ok(())
}
