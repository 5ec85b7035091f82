//! Fixed-resolution m/z tokens, the alternative to the sinusoidal embedding.

use ms2embed::embed::{tokenize_mz, TokenVocab};

fn main() {
    let vocab = TokenVocab::default();
    println!("resolution {} Da, {} tokens incl. unknown", vocab.resolution, vocab.size());
    for mz in [55.0184, 55.0349, 91.0542, 1999.96, 2400.0] {
        println!("{mz:>10} -> {}", tokenize_mz(mz, &vocab));
    }
    // Two fragments 0.0165 Da apart share a token at 0.1 Da resolution.
    assert_eq!(tokenize_mz(55.0184, &vocab), tokenize_mz(55.0349, &vocab));
}
