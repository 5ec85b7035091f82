//! m/z featurization: sinusoidal and tokenized embeddings, precision
//! casting, intensity normalization and the binned baseline input.

pub mod export;
mod features;
pub mod peak;
pub mod precision;
pub mod sinusoidal;
pub mod token;

pub use export::{export_embeddings, mz_grid};
pub use features::{bin_count, bin_spectrum, fractional_mz, normalize_intensities, PRECURSOR_INTENSITY};
pub use peak::PeakEmbedding;
pub use precision::{cast_mz, Emulation, FloatFormat, PrecisionMode};
pub use sinusoidal::{sinusoidal_embed, sinusoidal_embed_with, SinusoidalConfig, LAMBDA_MAX, LAMBDA_MIN};
pub use token::{tokenize_mz, TokenVocab};
