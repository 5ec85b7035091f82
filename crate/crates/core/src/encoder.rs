//! Set-transformer spectrum encoder.
//!
//! The precursor peak and the fragment peaks are embedded and passed through
//! pre-norm transformer blocks with no positional encoding. In the last block
//! only the precursor slot issues a query, and its output is the spectrum
//! embedding.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::embed::{
    normalize_intensities, FloatFormat, PeakEmbedding, PrecisionMode, SinusoidalConfig, TokenVocab,
};
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::spectra::{Peak, Spectrum};
use crate::tensor::nn::{multi_head_attention, AttentionParams, Dropout, FeedForwardParams, LayerNormParams};
use crate::tensor::rng::{self, Rng};
use crate::tensor::{Bound, Graph, ParamStore, Precision, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmbeddingKind {
    Sinusoidal,
    Token,
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingKind::Sinusoidal => "sin",
            EmbeddingKind::Token => "token",
        })
    }
}

impl FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sin" | "sinusoidal" => Ok(EmbeddingKind::Sinusoidal),
            "token" | "tokenized" => Ok(EmbeddingKind::Token),
            other => Err(Error::Config(format!("unknown embedding kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub d: usize,
    pub layers: usize,
    pub heads: usize,
    /// Hidden width of the feed-forward sublayers.
    pub hidden: usize,
    pub dropout: f64,
    pub embedding: EmbeddingKind,
    /// Precision the m/z inputs are cast through before embedding.
    pub mz_precision: PrecisionMode,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub vocab: TokenVocab,
    /// Fragments beyond this count are dropped, lowest intensity first.
    pub max_fragments: usize,
    pub weight_precision: Precision,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        let sin = SinusoidalConfig::default();
        EncoderConfig {
            d: 512,
            layers: 6,
            heads: 32,
            hidden: 512,
            dropout: 0.1,
            embedding: EmbeddingKind::Sinusoidal,
            mz_precision: PrecisionMode::BINARY64,
            lambda_min: sin.lambda_min,
            lambda_max: sin.lambda_max,
            vocab: TokenVocab::default(),
            max_fragments: 512,
            weight_precision: Precision::Binary32,
        }
    }
}

impl EncoderConfig {
    /// A small configuration for desk-scale experiments.
    pub fn small(d: usize, layers: usize, heads: usize) -> Self {
        EncoderConfig {
            d,
            layers,
            heads,
            hidden: d,
            ..EncoderConfig::default()
        }
    }

    pub fn sinusoidal(&self) -> SinusoidalConfig {
        SinusoidalConfig {
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            d: self.d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("encoder needs at least one layer".into()));
        }
        if self.heads == 0 || self.d % self.heads != 0 {
            return Err(Error::Config(format!(
                "d = {} is not divisible by {} heads",
                self.d, self.heads
            )));
        }
        if self.hidden == 0 || self.max_fragments == 0 {
            return Err(Error::Config("hidden width and fragment cap must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        match self.embedding {
            EmbeddingKind::Sinusoidal => self.sinusoidal().validate(),
            EmbeddingKind::Token => self.vocab.validate(),
        }
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.set("encoder.d", self.d);
        kv.set("encoder.layers", self.layers);
        kv.set("encoder.heads", self.heads);
        kv.set("encoder.hidden", self.hidden);
        kv.set("encoder.dropout", self.dropout);
        kv.set("encoder.embedding", self.embedding);
        kv.set("encoder.mz_precision", self.mz_precision.format.name());
        kv.set(
            "encoder.mz_emulation",
            match self.mz_precision.emulation {
                crate::embed::Emulation::InputOnly => "input",
                crate::embed::Emulation::Full => "full",
            },
        );
        kv.set("encoder.lambda_min", self.lambda_min);
        kv.set("encoder.lambda_max", self.lambda_max);
        kv.set("encoder.token_resolution", self.vocab.resolution);
        kv.set("encoder.token_max_mz", self.vocab.max_mz);
        kv.set("encoder.max_fragments", self.max_fragments);
        kv.set(
            "encoder.weights",
            match self.weight_precision {
                Precision::Binary32 => "binary32",
                Precision::Binary64 => "binary64",
            },
        );
    }

    /// Reads `encoder.*` keys, falling back to defaults for absent ones.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let def = EncoderConfig::default();
        let d = kv.get_or("encoder.d", def.d)?;
        let format: FloatFormat = kv.get_or("encoder.mz_precision", def.mz_precision.format)?;
        let emulation = match kv.raw("encoder.mz_emulation").unwrap_or("input") {
            "input" => crate::embed::Emulation::InputOnly,
            "full" => crate::embed::Emulation::Full,
            other => return Err(Error::Config(format!("unknown emulation {other:?}"))),
        };
        let weight_precision = match kv.raw("encoder.weights").unwrap_or("binary32") {
            "binary32" => Precision::Binary32,
            "binary64" => Precision::Binary64,
            other => return Err(Error::Config(format!("unknown weight precision {other:?}"))),
        };
        let cfg = EncoderConfig {
            d,
            layers: kv.get_or("encoder.layers", def.layers)?,
            heads: kv.get_or("encoder.heads", def.heads)?,
            hidden: kv.get_or("encoder.hidden", d)?,
            dropout: kv.get_or("encoder.dropout", def.dropout)?,
            embedding: kv.get_or("encoder.embedding", def.embedding)?,
            mz_precision: PrecisionMode { format, emulation },
            lambda_min: kv.get_or("encoder.lambda_min", def.lambda_min)?,
            lambda_max: kv.get_or("encoder.lambda_max", def.lambda_max)?,
            vocab: TokenVocab {
                resolution: kv.get_or("encoder.token_resolution", def.vocab.resolution)?,
                max_mz: kv.get_or("encoder.token_max_mz", def.vocab.max_mz)?,
            },
            max_fragments: kv.get_or("encoder.max_fragments", def.max_fragments)?,
            weight_precision,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
struct Block {
    norm_attn: LayerNormParams,
    attn: AttentionParams,
    norm_ff: LayerNormParams,
    ff: FeedForwardParams,
}

/// Encoder parameter layout. The tensors themselves live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct SpectrumEncoder {
    cfg: EncoderConfig,
    peak: PeakEmbedding,
    blocks: Vec<Block>,
}

/// Whether a forward pass is stochastic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train { seed: u64 },
    Infer,
}

impl SpectrumEncoder {
    /// Registers all encoder parameters in `store` under `prefix`.
    pub fn new(
        cfg: &EncoderConfig,
        store: &mut ParamStore,
        prefix: &str,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let peak = match cfg.embedding {
            EmbeddingKind::Sinusoidal => PeakEmbedding::sinusoidal(
                store,
                &format!("{prefix}.peak"),
                cfg.sinusoidal(),
                cfg.mz_precision,
                rng,
            )?,
            EmbeddingKind::Token => {
                PeakEmbedding::token(store, &format!("{prefix}.peak"), cfg.vocab, cfg.d, rng)?
            }
        };
        let blocks = (0..cfg.layers)
            .map(|l| {
                let name = format!("{prefix}.layer{l}");
                Ok(Block {
                    norm_attn: LayerNormParams::new(store, &format!("{name}.norm_attn"), cfg.d)?,
                    attn: AttentionParams::new(store, &format!("{name}.attn"), cfg.d, rng)?,
                    norm_ff: LayerNormParams::new(store, &format!("{name}.norm_ff"), cfg.d)?,
                    ff: FeedForwardParams::new(
                        store,
                        &format!("{name}.ff"),
                        cfg.d,
                        cfg.hidden,
                        cfg.d,
                        rng,
                    )?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SpectrumEncoder {
            cfg: cfg.clone(),
            peak,
            blocks,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn peak_embedding(&self) -> &PeakEmbedding {
        &self.peak
    }

    /// Precursor first, then fragments in canonical (m/z, intensity) order,
    /// capped at `max_fragments` by intensity. Intensities are normalized.
    pub fn input_peaks(&self, s: &Spectrum) -> Result<Vec<Peak>> {
        if s.fragments.is_empty() {
            return Err(Error::Contract(format!("spectrum {} has no fragments", s.id)));
        }
        let s = normalize_intensities(s)?;
        let mut frags = s.fragments;
        if frags.len() > self.cfg.max_fragments {
            frags.sort_by(|a, b| {
                b.intensity
                    .total_cmp(&a.intensity)
                    .then(a.canonical_cmp(b))
            });
            frags.truncate(self.cfg.max_fragments);
        }
        frags.sort_by(Peak::canonical_cmp);
        let mut peaks = Vec::with_capacity(frags.len() + 1);
        peaks.push(s.precursor);
        peaks.extend(frags);
        Ok(peaks)
    }

    /// Records the forward pass of one spectrum on `g`; returns a `[d]` node.
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &Bound,
        store: &ParamStore,
        s: &Spectrum,
        dropout: &mut Dropout<'_>,
    ) -> Result<Var> {
        let peaks = self.input_peaks(s)?;
        let mut x = self.peak.forward(g, p, store, &peaks)?;
        let (last, body) = self.blocks.split_last().expect("at least one layer");
        for b in body {
            let a = b.norm_attn.forward(g, p, x)?;
            let att =
                multi_head_attention(g, p, &b.attn, a, a, a, self.cfg.heads, dropout)?;
            let att = dropout.apply(g, att)?;
            x = g.add(x, att)?;
            let h = b.norm_ff.forward(g, p, x)?;
            let h = b.ff.forward(g, p, h)?;
            let h = dropout.apply(g, h)?;
            x = g.add(x, h)?;
        }
        let a = last.norm_attn.forward(g, p, x)?;
        let query = g.slice_rows(a, 0, 1)?;
        let att = multi_head_attention(g, p, &last.attn, query, a, a, self.cfg.heads, dropout)?;
        let att = dropout.apply(g, att)?;
        let head = g.slice_rows(x, 0, 1)?;
        let head = g.add(head, att)?;
        let h = last.norm_ff.forward(g, p, head)?;
        let h = last.ff.forward(g, p, h)?;
        let h = dropout.apply(g, h)?;
        let out = g.add(head, h)?;
        g.reshape(out, &[self.cfg.d])
    }

    /// Embedding of one spectrum. `Mode::Infer` is deterministic; a training
    /// pass draws its dropout masks from `seed`.
    pub fn encode(&self, store: &ParamStore, s: &Spectrum, mode: Mode) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let p = store.bind(&mut g, false);
        let out = match mode {
            Mode::Infer => self.forward(&mut g, &p, store, s, &mut Dropout::inference())?,
            Mode::Train { seed } => {
                let mut r = rng::seeded(seed);
                let mut d = Dropout::training(self.cfg.dropout, &mut r);
                self.forward(&mut g, &p, store, s, &mut d)?
            }
        };
        Ok(g.value(out).data().to_vec())
    }

    /// Inference embeddings for many spectra, in input order.
    pub fn encode_all<'a, I>(&self, store: &ParamStore, spectra: I) -> Result<Vec<Vec<f64>>>
    where
        I: IntoParallelIterator<Item = &'a Spectrum>,
        I::Iter: IndexedParallelIterator,
    {
        spectra
            .into_par_iter()
            .map(|s| {
                self.encode(store, s, Mode::Infer).map_err(|e| match e {
                    Error::Contract(m) => Error::Contract(format!("{}: {m}", s.id)),
                    other => other,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(frags: &[(f64, f64)]) -> Spectrum {
        let peaks = frags.iter().map(|&(m, i)| Peak::new(m, i).unwrap()).collect();
        Spectrum::new("s", "k", 412.1234, peaks).unwrap()
    }

    fn model(cfg: &EncoderConfig) -> (ParamStore, SpectrumEncoder) {
        let mut store = ParamStore::new(cfg.weight_precision);
        let enc = SpectrumEncoder::new(cfg, &mut store, "encoder", &mut rng::seeded(1)).unwrap();
        (store, enc)
    }

    #[test]
    fn output_dimension_is_independent_of_fragment_count() {
        let cfg = EncoderConfig::small(16, 2, 4);
        let (store, enc) = model(&cfg);
        for n in [1, 4, 33] {
            let frags: Vec<(f64, f64)> = (0..n).map(|i| (50.0 + 7.3 * i as f64, 1.0 + i as f64)).collect();
            let e = enc.encode(&store, &spectrum(&frags), Mode::Infer).unwrap();
            assert_eq!(e.len(), 16);
        }
    }

    #[test]
    fn fragment_order_does_not_matter() {
        let cfg = EncoderConfig::small(16, 2, 4);
        let (store, enc) = model(&cfg);
        let a = spectrum(&[(101.1, 3.0), (202.2, 1.0), (55.5, 2.0), (303.3, 0.5)]);
        let mut b = a.clone();
        b.fragments.reverse();
        let ea = enc.encode(&store, &a, Mode::Infer).unwrap();
        let eb = enc.encode(&store, &b, Mode::Infer).unwrap();
        assert_eq!(ea, eb);
    }

    #[test]
    fn empty_spectrum_is_a_contract_error() {
        let cfg = EncoderConfig::small(8, 1, 2);
        let (store, enc) = model(&cfg);
        let err = enc.encode(&store, &spectrum(&[]), Mode::Infer);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn training_forward_is_seeded() {
        let cfg = EncoderConfig {
            dropout: 0.3,
            ..EncoderConfig::small(16, 2, 4)
        };
        let (store, enc) = model(&cfg);
        let s = spectrum(&[(101.1, 3.0), (202.2, 1.0), (55.5, 2.0), (303.3, 0.5)]);
        let a = enc.encode(&store, &s, Mode::Train { seed: 3 }).unwrap();
        let b = enc.encode(&store, &s, Mode::Train { seed: 3 }).unwrap();
        let c = enc.encode(&store, &s, Mode::Train { seed: 4 }).unwrap();
        let inf = enc.encode(&store, &s, Mode::Infer).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, inf);
    }

    #[test]
    fn fragment_cap_keeps_most_intense() {
        let cfg = EncoderConfig {
            max_fragments: 2,
            ..EncoderConfig::small(8, 1, 2)
        };
        let (_, enc) = model(&cfg);
        let peaks = enc
            .input_peaks(&spectrum(&[(100.0, 1.0), (200.0, 5.0), (300.0, 3.0)]))
            .unwrap();
        let mz: Vec<f64> = peaks.iter().map(|p| p.mz).collect();
        assert_eq!(mz, [412.1234, 200.0, 300.0]);
        assert_eq!(peaks[0].intensity, 2.0);
    }

    #[test]
    fn parameter_count_is_a_function_of_config() {
        let cfg = EncoderConfig::small(16, 2, 4);
        let (a, _) = model(&cfg);
        let mut other = ParamStore::new(cfg.weight_precision);
        SpectrumEncoder::new(&cfg, &mut other, "encoder", &mut rng::seeded(99)).unwrap();
        assert_eq!(a.num_elements(), other.num_elements());
        let d = 16;
        let ff = |i: usize, h: usize, o: usize| i * h + h + h * o + o;
        let peak = ff(d, d, d) + ff(d + 1, d, d);
        let layer = 4 * (d * d + d) + 2 * 2 * d + ff(d, d, d);
        assert_eq!(a.num_elements(), peak + 2 * layer);
    }

    #[test]
    fn config_text_round_trip() {
        let cfg = EncoderConfig {
            embedding: EmbeddingKind::Token,
            mz_precision: PrecisionMode::input_only(FloatFormat::Binary16),
            ..EncoderConfig::small(32, 2, 4)
        };
        let mut kv = KeyValues::default();
        cfg.write_kv(&mut kv);
        let back = EncoderConfig::from_kv(&KeyValues::parse(&kv.to_text()).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_configs() {
        assert!(EncoderConfig::small(10, 1, 4).validate().is_err());
        assert!(EncoderConfig::small(8, 0, 2).validate().is_err());
    }
}
