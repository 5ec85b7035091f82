//! Learned peak embeddings: a peak `(m/z, I)` becomes a `d`-vector.
//!
//! * sinusoidal: `FF(FF(SE(m/z)) ∥ I)`
//! * tokenized:  `FF(TE(m/z) ∥ I)` with `TE` a learned lookup table

use super::precision::{Emulation, PrecisionMode};
use super::sinusoidal::{embed_binary64, sinusoidal_embed_with, SinusoidalConfig};
use super::token::{tokenize_mz, TokenVocab};
use crate::error::Result;
use crate::spectra::Peak;
use crate::tensor::nn::FeedForwardParams;
use crate::tensor::rng::Rng;
use crate::tensor::{Bound, Graph, ParamId, ParamStore, Tensor, Var};

#[derive(Debug, Clone)]
pub enum PeakEmbedding {
    Sinusoidal {
        cfg: SinusoidalConfig,
        mode: PrecisionMode,
        inner: FeedForwardParams,
        outer: FeedForwardParams,
    },
    Token {
        vocab: TokenVocab,
        table: ParamId,
        ff: FeedForwardParams,
        d: usize,
    },
}

impl PeakEmbedding {
    pub fn sinusoidal(
        store: &mut ParamStore,
        prefix: &str,
        cfg: SinusoidalConfig,
        mode: PrecisionMode,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d;
        Ok(PeakEmbedding::Sinusoidal {
            cfg,
            mode,
            inner: FeedForwardParams::new(store, &format!("{prefix}.inner"), d, d, d, rng)?,
            outer: FeedForwardParams::new(store, &format!("{prefix}.outer"), d + 1, d, d, rng)?,
        })
    }

    pub fn token(
        store: &mut ParamStore,
        prefix: &str,
        vocab: TokenVocab,
        d: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        vocab.validate()?;
        let table = store.add_weight(format!("{prefix}.table"), vocab.size(), d, rng)?;
        Ok(PeakEmbedding::Token {
            vocab,
            table,
            ff: FeedForwardParams::new(store, &format!("{prefix}.ff"), d + 1, d, d, rng)?,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            PeakEmbedding::Sinusoidal { cfg, .. } => cfg.d,
            PeakEmbedding::Token { d, .. } => *d,
        }
    }

    /// Fixed sinusoidal features for `peaks`, one row each, rounded to the
    /// weight precision of `store`.
    pub fn sinusoidal_features(
        cfg: &SinusoidalConfig,
        mode: PrecisionMode,
        peaks: &[Peak],
        store: &ParamStore,
    ) -> Result<Tensor> {
        let mut data = Vec::with_capacity(peaks.len() * cfg.d);
        match mode.emulation {
            Emulation::InputOnly => {
                let w = cfg.wavelengths();
                for p in peaks {
                    data.extend(embed_binary64(mode.format.quantize(p.mz)?, &w));
                }
            }
            Emulation::Full => {
                for p in peaks {
                    data.extend(sinusoidal_embed_with(p.mz, cfg, mode)?);
                }
            }
        }
        Ok(Tensor::matrix(peaks.len(), cfg.d, data)?.with_precision(store.precision()))
    }

    /// Embeds `peaks` (intensities already normalized) as rows of `[n, d]`.
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &Bound,
        store: &ParamStore,
        peaks: &[Peak],
    ) -> Result<Var> {
        let n = peaks.len();
        let intensities = g.constant(Tensor::matrix(
            n,
            1,
            peaks.iter().map(|pk| pk.intensity).collect(),
        )?);
        match self {
            PeakEmbedding::Sinusoidal {
                cfg,
                mode,
                inner,
                outer,
            } => {
                let se = g.constant(Self::sinusoidal_features(cfg, *mode, peaks, store)?);
                let h = inner.forward(g, p, se)?;
                let joined = g.concat_cols(&[h, intensities])?;
                outer.forward(g, p, joined)
            }
            PeakEmbedding::Token {
                vocab, table, ff, ..
            } => {
                let ids: Vec<usize> = peaks.iter().map(|pk| tokenize_mz(pk.mz, vocab)).collect();
                let te = g.gather_rows(p.get(*table), &ids)?;
                let joined = g.concat_cols(&[te, intensities])?;
                ff.forward(g, p, joined)
            }
        }
    }

    /// Inference helper: one embedding per peak.
    pub fn embed(&self, store: &ParamStore, peaks: &[Peak]) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new();
        let p = store.bind(&mut g, false);
        let out = self.forward(&mut g, &p, store, peaks)?;
        let d = self.dim();
        Ok(g.value(out).data().chunks(d).map(<[f64]>::to_vec).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::precision::FloatFormat;
    use crate::tensor::{rng, Precision};

    fn peak(mz: f64, i: f64) -> Peak {
        Peak::new(mz, i).unwrap()
    }

    fn sin_model(d: usize) -> (ParamStore, PeakEmbedding) {
        let mut store = ParamStore::new(Precision::Binary64);
        let pe = PeakEmbedding::sinusoidal(
            &mut store,
            "pe",
            SinusoidalConfig::with_dim(d),
            PrecisionMode::BINARY64,
            &mut rng::seeded(4),
        )
        .unwrap();
        (store, pe)
    }

    fn token_model(d: usize) -> (ParamStore, PeakEmbedding) {
        let mut store = ParamStore::new(Precision::Binary64);
        let vocab = TokenVocab {
            resolution: 0.1,
            max_mz: 500.0,
        };
        let pe = PeakEmbedding::token(&mut store, "pe", vocab, d, &mut rng::seeded(4)).unwrap();
        (store, pe)
    }

    #[test]
    fn output_shape_is_d() {
        let (store, pe) = sin_model(16);
        let e = pe.embed(&store, &[peak(101.234, 0.5), peak(88.8, 1.0)]).unwrap();
        assert_eq!(e.len(), 2);
        assert!(e.iter().all(|r| r.len() == 16));
        let (store, pe) = token_model(8);
        let e = pe.embed(&store, &[peak(101.234, 0.5)]).unwrap();
        assert_eq!(e[0].len(), 8);
    }

    #[test]
    fn intensity_changes_the_sinusoidal_embedding() {
        let (store, pe) = sin_model(16);
        let e = pe.embed(&store, &[peak(150.0, 0.2), peak(150.0, 0.9)]).unwrap();
        assert_ne!(e[0], e[1]);
    }

    #[test]
    fn token_cells_collide_and_sinusoids_do_not() {
        let (ts, te) = token_model(8);
        let t = te.embed(&ts, &[peak(123.41, 1.0), peak(123.44, 1.0)]).unwrap();
        assert_eq!(t[0], t[1]);
        let (ss, se) = sin_model(16);
        let s = se.embed(&ss, &[peak(123.41, 1.0), peak(123.44, 1.0)]).unwrap();
        assert_ne!(s[0], s[1]);
    }

    #[test]
    fn token_table_gradient_is_sparse() {
        let (store, pe) = token_model(4);
        let PeakEmbedding::Token { table, vocab, .. } = &pe else {
            unreachable!()
        };
        let mut g = Graph::new();
        let p = store.bind(&mut g, true);
        let out = pe.forward(&mut g, &p, &store, &[peak(100.0, 1.0), peak(250.04, 0.3)]).unwrap();
        let loss = g.sum(out);
        g.backward(loss).unwrap();
        let grad = g.grad(p.get(*table)).unwrap();
        let touched: Vec<usize> = grad
            .data()
            .chunks(4)
            .enumerate()
            .filter(|(_, row)| row.iter().any(|v| *v != 0.0))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(touched, vec![tokenize_mz(100.0, vocab), tokenize_mz(250.04, vocab)]);
    }

    #[test]
    fn features_follow_the_precision_mode() {
        let cfg = SinusoidalConfig::with_dim(8);
        let store = ParamStore::new(Precision::Binary64);
        let half = PrecisionMode::input_only(FloatFormat::Binary16);
        let a = PeakEmbedding::sinusoidal_features(&cfg, half, &[peak(500.0005, 1.0)], &store).unwrap();
        let b = PeakEmbedding::sinusoidal_features(&cfg, half, &[peak(500.0, 1.0)], &store).unwrap();
        assert_eq!(a, b);
    }
}
