//! Siamese similarity training: Tanimoto labels, similarity-uniform pair
//! sampling, the cosine regression loss and the training loop.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::encoder::SpectrumEncoder;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::spectra::{Fingerprint, LabelTable, Spectrum};
use crate::tensor::nn::{cosine, Dropout};
use crate::tensor::optim::{AdamConfig, OptimizerState};
use crate::tensor::{rng, Graph, ParamStore, Tensor, Var};
use crate::train::{gradient_step, StepPosition};

/// Structure counts up to this are enumerated pairwise when building
/// reservoirs; larger sets are rejection sampled.
pub const EXACT_PAIR_LIMIT: usize = 2000;
const RESERVOIR_CAP: usize = 20_000;
const RESERVOIR_STREAM: u64 = 0x7265_7376;
const PAIR_STREAM: u64 = 0x7061_6972;

/// `|a ∧ b| / |a ∨ b|`; two empty fingerprints score 0.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64> {
    if a.width() != b.width() {
        return Err(Error::Contract(format!(
            "fingerprint widths differ: {} and {}",
            a.width(),
            b.width()
        )));
    }
    let (mut both, mut either) = (0u32, 0u32);
    for (x, y) in a.words().iter().zip(b.words()) {
        both += (x & y).count_ones();
        either += (x | y).count_ones();
    }
    Ok(if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub spectrum_a: String,
    pub spectrum_b: String,
    pub label: f64,
}

/// Structure pairs bucketed by Tanimoto similarity into equal-width bins
/// over `[0, 1]`; 1.0 falls in the last bin.
#[derive(Debug, Clone)]
pub struct SimilarityBins {
    count: usize,
    structures: Vec<String>,
    spectra: Vec<Vec<String>>,
    reservoirs: Vec<Vec<(u32, u32, f64)>>,
}

impl SimilarityBins {
    /// Pairs among the structures of `spectra`. A structure pairs with
    /// itself only when it has at least two spectra.
    pub fn build(labels: &LabelTable, spectra: &[&Spectrum], count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("need at least one similarity bin".into()));
        }
        let mut grouped: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for s in spectra {
            grouped.entry(&s.structure_id).or_default().push(s.id.clone());
        }
        let structures: Vec<String> = grouped.keys().map(|s| s.to_string()).collect();
        let fps: Vec<&Fingerprint> = structures
            .iter()
            .map(|s| labels.require(s).map(|r| &r.fingerprint))
            .collect::<Result<_>>()?;
        let spectra: Vec<Vec<String>> = grouped.into_values().collect();
        let mut bins = SimilarityBins {
            count,
            structures,
            spectra,
            reservoirs: vec![Vec::new(); count],
        };
        let n = fps.len();
        let pairable = |i: usize, j: usize| i != j || bins.spectra[i].len() > 1;
        if n <= EXACT_PAIR_LIMIT {
            let rows: Vec<Vec<(u32, u32, f64)>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    (i..n)
                        .filter(|&j| pairable(i, j))
                        .map(|j| Ok((i as u32, j as u32, tanimoto(fps[i], fps[j])?)))
                        .collect::<Result<_>>()
                })
                .collect::<Result<_>>()?;
            for (i, j, t) in rows.into_iter().flatten() {
                let b = bins.bin_of(t);
                bins.reservoirs[b].push((i, j, t));
            }
        } else {
            let mut rng = rng::stream(seed, RESERVOIR_STREAM);
            let budget = 50 * RESERVOIR_CAP * count;
            for _ in 0..budget {
                if bins.reservoirs.iter().all(|r| r.len() >= RESERVOIR_CAP) {
                    break;
                }
                let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
                let (i, j) = (i.min(j), i.max(j));
                if !pairable(i, j) {
                    continue;
                }
                let t = tanimoto(fps[i], fps[j])?;
                let b = bins.bin_of(t);
                if bins.reservoirs[b].len() < RESERVOIR_CAP {
                    bins.reservoirs[b].push((i as u32, j as u32, t));
                }
            }
        }
        Ok(bins)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn bin_of(&self, similarity: f64) -> usize {
        ((similarity * self.count as f64) as usize).min(self.count - 1)
    }

    pub fn reservoir_len(&self, bin: usize) -> usize {
        self.reservoirs[bin].len()
    }

    pub fn reachable(&self) -> Vec<usize> {
        (0..self.count).filter(|&b| !self.reservoirs[b].is_empty()).collect()
    }

    pub fn unreachable(&self) -> Vec<usize> {
        (0..self.count).filter(|&b| self.reservoirs[b].is_empty()).collect()
    }

    /// `count` pairs: a reachable bin uniformly, a structure pair from it
    /// uniformly, then one spectrum per structure uniformly.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<PairSample>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let reachable = self.reachable();
        if reachable.is_empty() {
            return Err(Error::Sampling("no similarity bin contains a pair".into()));
        }
        let mut rng = rng::stream(seed, PAIR_STREAM);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let bin = *reachable.choose(&mut rng).unwrap();
            let &(i, j, label) = self.reservoirs[bin].choose(&mut rng).unwrap();
            let (si, sj) = (&self.spectra[i as usize], &self.spectra[j as usize]);
            let (a, b) = if i == j {
                let picked: Vec<&String> = si.choose_multiple(&mut rng, 2).collect();
                (picked[0], picked[1])
            } else {
                (si.choose(&mut rng).unwrap(), sj.choose(&mut rng).unwrap())
            };
            out.push(PairSample {
                spectrum_a: a.clone(),
                spectrum_b: b.clone(),
                label,
            });
        }
        Ok(out)
    }

    pub fn structures(&self) -> &[String] {
        &self.structures
    }
}

/// Builds bins over `spectra` and draws `count` pairs.
pub fn sample_uniform_pairs(
    labels: &LabelTable,
    spectra: &[&Spectrum],
    bins: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<PairSample>> {
    SimilarityBins::build(labels, spectra, bins, seed)?.sample(count, seed)
}

/// `(cos(a, b) − label)²` as a graph node.
pub fn siamese_loss(g: &mut Graph, a: Var, b: Var, label: f64) -> Result<Var> {
    let c = cosine(g, a, b)?;
    let target = g.constant(Tensor::scalar(label));
    let diff = g.sub(c, target)?;
    Ok(g.square(diff))
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Numeric("cosine of a zero-norm embedding".into()));
    }
    Ok(dot / (na * nb))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub pairs_per_epoch: usize,
    /// Pairs per evaluation set (train, known, novel).
    pub eval_pairs: usize,
    pub bins: usize,
    pub adam: AdamConfig,
    pub clip: f64,
    pub seed: u64,
}

pub const MAX_EPOCHS: usize = 100_000;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 25,
            batch_size: 64,
            pairs_per_epoch: 1024,
            eval_pairs: 10_000,
            bins: 10,
            adam: AdamConfig::default(),
            clip: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        let positive = [a.learning_rate, a.eps, self.clip];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("learning rate, eps and clip must be positive".into()));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.weight_decay < 0.0 {
            return Err(Error::Config("betas must lie in [0, 1) and weight decay be non-negative".into()));
        }
        if self.batch_size == 0 || self.pairs_per_epoch == 0 || self.bins == 0 {
            return Err(Error::Config("batch size, pairs per epoch and bins must be positive".into()));
        }
        if self.epochs > MAX_EPOCHS {
            return Err(Error::Config(format!("epochs must be at most {MAX_EPOCHS}")));
        }
        Ok(())
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.set("train.epochs", self.epochs);
        kv.set("train.batch_size", self.batch_size);
        kv.set("train.pairs_per_epoch", self.pairs_per_epoch);
        kv.set("train.eval_pairs", self.eval_pairs);
        kv.set("train.bins", self.bins);
        kv.set("train.learning_rate", self.adam.learning_rate);
        kv.set("train.beta1", self.adam.beta1);
        kv.set("train.beta2", self.adam.beta2);
        kv.set("train.eps", self.adam.eps);
        kv.set("train.weight_decay", self.adam.weight_decay);
        kv.set("train.clip", self.clip);
        kv.set("train.seed", self.seed);
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            epochs: kv.get_or("train.epochs", d.epochs)?,
            batch_size: kv.get_or("train.batch_size", d.batch_size)?,
            pairs_per_epoch: kv.get_or("train.pairs_per_epoch", d.pairs_per_epoch)?,
            eval_pairs: kv.get_or("train.eval_pairs", d.eval_pairs)?,
            bins: kv.get_or("train.bins", d.bins)?,
            adam: AdamConfig {
                learning_rate: kv.get_or("train.learning_rate", d.adam.learning_rate)?,
                beta1: kv.get_or("train.beta1", d.adam.beta1)?,
                beta2: kv.get_or("train.beta2", d.adam.beta2)?,
                eps: kv.get_or("train.eps", d.adam.eps)?,
                weight_decay: kv.get_or("train.weight_decay", d.adam.weight_decay)?,
            },
            clip: kv.get_or("train.clip", d.clip)?,
            seed: kv.get_or("train.seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Spectra of each split plus the label table.
#[derive(Debug, Clone)]
pub struct SiameseData<'a> {
    pub train: Vec<&'a Spectrum>,
    pub known: Vec<&'a Spectrum>,
    pub novel: Vec<&'a Spectrum>,
    pub labels: &'a LabelTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub known_mse: Option<f64>,
    pub novel_mse: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    /// Evaluation pair counts for train, known and novel.
    pub eval_pairs: [usize; 3],
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_text(&self) -> String {
        let [t, k, n] = self.eval_pairs;
        let mut out = format!("# eval_pairs train={t} known={k} novel={n}\n");
        out.push_str("epoch\ttrain_mse\tknown_mse\tnovel_mse\twall_seconds\n");
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        for e in &self.epochs {
            out.push_str(&format!(
                "{}\t{:.6}\t{}\t{}\t{:.3}\n",
                e.epoch,
                e.train_mse,
                opt(e.known_mse),
                opt(e.novel_mse),
                e.wall_seconds
            ));
        }
        out
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// `epoch<TAB>spectrum_a<TAB>spectrum_b<TAB>label` rows.
pub fn pair_cache_text(epochs: &[Vec<PairSample>]) -> String {
    let mut out = String::from("epoch\tspectrum_a\tspectrum_b\tlabel\n");
    for (e, pairs) in epochs.iter().enumerate() {
        for p in pairs {
            out.push_str(&format!("{}\t{}\t{}\t{:?}\n", e + 1, p.spectrum_a, p.spectrum_b, p.label));
        }
    }
    out
}

pub fn parse_pair_cache(text: &str) -> Result<Vec<Vec<PairSample>>> {
    let mut epochs: Vec<Vec<PairSample>> = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            line: idx + 1,
            message,
        };
        let f: Vec<&str> = line.split('\t').collect();
        let [e, a, b, l] = f[..] else {
            return Err(bad("pair rows need epoch, spectrum_a, spectrum_b, label".into()));
        };
        let e: usize = e.parse().map_err(|_| bad(format!("bad epoch {e:?}")))?;
        let label: f64 = l.parse().map_err(|_| bad(format!("bad label {l:?}")))?;
        if e == 0 || e < epochs.len() || e > epochs.len() + 1 {
            return Err(bad(format!("epoch {e} out of sequence")));
        }
        if !(0.0..=1.0).contains(&label) {
            return Err(bad(format!("label {label} outside [0, 1]")));
        }
        if e > epochs.len() {
            epochs.push(Vec::new());
        }
        epochs[e - 1].push(PairSample {
            spectrum_a: a.to_string(),
            spectrum_b: b.to_string(),
            label,
        });
    }
    Ok(epochs)
}

/// Mean `(cos − label)²` over `pairs` in inference mode.
pub fn pair_mse(
    encoder: &SpectrumEncoder,
    store: &ParamStore,
    spectra: &[&Spectrum],
    pairs: &[PairSample],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Evaluation("no pairs to evaluate".into()));
    }
    let by_id: HashMap<&str, &Spectrum> = spectra.iter().map(|s| (s.id.as_str(), *s)).collect();
    let mut needed: Vec<&str> = pairs
        .iter()
        .flat_map(|p| [p.spectrum_a.as_str(), p.spectrum_b.as_str()])
        .collect();
    needed.sort_unstable();
    needed.dedup();
    let chosen: Vec<&Spectrum> = needed
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| Error::Contract(format!("pair refers to unknown spectrum {id}")))
        })
        .collect::<Result<_>>()?;
    let embs = encoder.encode_all(store, chosen)?;
    let emb: HashMap<&str, &Vec<f64>> = needed.iter().copied().zip(&embs).collect();
    let mut total = 0.0;
    for p in pairs {
        let c = cosine_similarity(emb[p.spectrum_a.as_str()], emb[p.spectrum_b.as_str()])?;
        total += (c - p.label).powi(2);
    }
    Ok(total / pairs.len() as f64)
}

#[derive(Debug, Clone)]
pub struct SiameseRun {
    pub log: TrainLog,
    /// Training pairs drawn for each epoch.
    pub pairs: Vec<Vec<PairSample>>,
}

const EVAL_SEEDS: [u64; 3] = [0xe0, 0xe1, 0xe2];

fn eval_set(data: &SiameseData<'_>, spectra: &[&Spectrum], cfg: &TrainConfig, which: usize) -> Result<Option<Vec<PairSample>>> {
    if spectra.is_empty() || cfg.eval_pairs == 0 {
        return Ok(None);
    }
    let bins = SimilarityBins::build(data.labels, spectra, cfg.bins, cfg.seed)?;
    if bins.reachable().is_empty() {
        return Ok(None);
    }
    bins.sample(cfg.eval_pairs, cfg.seed ^ EVAL_SEEDS[which] << 32).map(Some)
}

/// Samples fresh pairs every epoch under `cfg.seed` and trains.
pub fn train_siamese(
    encoder: &SpectrumEncoder,
    store: &mut ParamStore,
    data: &SiameseData<'_>,
    cfg: &TrainConfig,
) -> Result<SiameseRun> {
    cfg.validate()?;
    let bins = SimilarityBins::build(data.labels, &data.train, cfg.bins, cfg.seed)?;
    let epochs = (0..cfg.epochs)
        .map(|e| bins.sample(cfg.pairs_per_epoch, rng::keyed(cfg.seed, &[PAIR_STREAM, e as u64]).gen()))
        .collect::<Result<Vec<_>>>()?;
    train_siamese_on_pairs(encoder, store, data, cfg, epochs)
}

/// Trains on explicitly given per-epoch pair lists; `cfg.epochs` and
/// `cfg.pairs_per_epoch` are taken from `epochs` instead.
pub fn train_siamese_on_pairs(
    encoder: &SpectrumEncoder,
    store: &mut ParamStore,
    data: &SiameseData<'_>,
    cfg: &TrainConfig,
    epochs: Vec<Vec<PairSample>>,
) -> Result<SiameseRun> {
    cfg.validate()?;
    let by_id: HashMap<&str, &Spectrum> = data.train.iter().map(|s| (s.id.as_str(), *s)).collect();
    for p in epochs.iter().flatten() {
        for id in [&p.spectrum_a, &p.spectrum_b] {
            if !by_id.contains_key(id.as_str()) {
                return Err(Error::Contract(format!("training pair uses non-train spectrum {id}")));
            }
        }
    }
    let mut log = TrainLog::default();
    if epochs.is_empty() {
        return Ok(SiameseRun { log, pairs: epochs });
    }
    let train_eval = eval_set(data, &data.train, cfg, 0)?;
    let known_eval = eval_set(data, &data.known, cfg, 1)?;
    let novel_eval = eval_set(data, &data.novel, cfg, 2)?;
    let len = |s: &Option<Vec<PairSample>>| s.as_ref().map_or(0, Vec::len);
    log.eval_pairs = [len(&train_eval), len(&known_eval), len(&novel_eval)];

    let mut opt = OptimizerState::new(store, cfg.adam);
    let dropout = encoder.config().dropout;
    let start = Instant::now();
    for (e, pairs) in epochs.iter().enumerate() {
        for (step, batch) in pairs.chunks(cfg.batch_size).enumerate() {
            let at = StepPosition { epoch: e + 1, step };
            gradient_step(store, &mut opt, cfg.clip, at, batch, |g, p, params, k, pair| {
                let mut r = rng::keyed(cfg.seed, &[e as u64, step as u64, k as u64]);
                let mut drop = Dropout::training(dropout, &mut r);
                let a = encoder.forward(g, p, params, by_id[pair.spectrum_a.as_str()], &mut drop)?;
                let b = encoder.forward(g, p, params, by_id[pair.spectrum_b.as_str()], &mut drop)?;
                siamese_loss(g, a, b, pair.label)
            })?;
        }
        let eval = |set: &Option<Vec<PairSample>>, spectra: &[&Spectrum]| -> Result<Option<f64>> {
            set.as_ref().map(|s| pair_mse(encoder, store, spectra, s)).transpose()
        };
        let train_mse = eval(&train_eval, &data.train)?.unwrap_or(f64::NAN);
        if train_mse.is_nan() && train_eval.is_some() {
            return Err(Error::Divergence {
                epoch: e + 1,
                step: pairs.len().div_ceil(cfg.batch_size),
                detail: "train evaluation MSE is NaN".into(),
            });
        }
        log.epochs.push(EpochRecord {
            epoch: e + 1,
            train_mse,
            known_mse: eval(&known_eval, &data.known)?,
            novel_mse: eval(&novel_eval, &data.novel)?,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(SiameseRun { log, pairs: epochs })
}
