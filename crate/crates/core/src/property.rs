//! Ten-property regression from spectra: the encoder with a feed-forward
//! head, a binned feed-forward baseline, label standardization and R².

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::embed::{bin_count, bin_spectrum};
use crate::encoder::SpectrumEncoder;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::similarity::TrainConfig;
use crate::spectra::{LabelTable, Spectrum, PROPERTY_COUNT, PROPERTY_NAMES};
use crate::tensor::nn::{Dropout, FeedForwardParams, LinearParams};
use crate::tensor::optim::OptimizerState;
use crate::tensor::rng::{self, Rng};
use crate::tensor::{Bound, Graph, ParamStore, Precision, Tensor, Var};
use crate::train::{gradient_step, StepPosition};

pub type Properties = [f64; PROPERTY_COUNT];

/// Per-property standardization fitted on training labels. The statistics
/// are held at binary32 so they survive a checkpoint round trip unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelScaler {
    pub mean: Properties,
    pub std: Properties,
}

impl LabelScaler {
    /// Mean and population standard deviation of each property.
    pub fn fit(labels: &[Properties]) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Label(format!(
                "scaler needs at least 2 training molecules, got {}",
                labels.len()
            )));
        }
        let n = labels.len() as f64;
        let mut mean = [0.0; PROPERTY_COUNT];
        let mut std = [0.0; PROPERTY_COUNT];
        for k in 0..PROPERTY_COUNT {
            let m = labels.iter().map(|l| l[k]).sum::<f64>() / n;
            let v = labels.iter().map(|l| (l[k] - m).powi(2)).sum::<f64>() / n;
            mean[k] = Precision::Binary32.round(m);
            std[k] = Precision::Binary32.round(v.sqrt());
            if !(std[k] > 0.0) {
                return Err(Error::Label(format!(
                    "property {} is constant on the training split",
                    PROPERTY_NAMES[k]
                )));
            }
        }
        Ok(LabelScaler { mean, std })
    }

    pub fn apply(&self, x: &Properties) -> Properties {
        std::array::from_fn(|k| (x[k] - self.mean[k]) / self.std[k])
    }

    pub fn invert(&self, z: &Properties) -> Properties {
        std::array::from_fn(|k| self.std[k] * z[k] + self.mean[k])
    }

    /// Stores the statistics as `scaler.mean` and `scaler.std`. Add them to
    /// a checkpoint copy, not to a store that is still being trained.
    pub fn add_to(&self, store: &mut ParamStore) -> Result<()> {
        store.add("scaler.mean", Tensor::vector(self.mean.to_vec()))?;
        store.add("scaler.std", Tensor::vector(self.std.to_vec()))?;
        Ok(())
    }

    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let get = |name: &str| -> Result<Properties> {
            let t = store
                .by_name(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing {name}")))?;
            t.data()
                .try_into()
                .map_err(|_| Error::Checkpoint(format!("{name} must have {PROPERTY_COUNT} values")))
        };
        let s = LabelScaler {
            mean: get("scaler.mean")?,
            std: get("scaler.std")?,
        };
        if s.std.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Checkpoint("scaler has a non-positive deviation".into()));
        }
        Ok(s)
    }
}

/// Coefficient of determination `1 − Σ(y−ŷ)²/Σ(y−ȳ)²`.
pub fn r2_score(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() || actual.len() < 2 {
        return Err(Error::Metric(format!(
            "r2 needs equal lengths of at least 2, got {} and {}",
            predicted.len(),
            actual.len()
        )));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Metric("r2 is undefined for constant actual values".into()));
    }
    let ss_res: f64 = predicted.iter().zip(actual).map(|(p, y)| (y - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub bin_width: f64,
    pub max_mz: f64,
    /// Width of both hidden layers.
    pub hidden: usize,
    pub dropout: f64,
}

impl BaselineConfig {
    /// Hidden width `2·d` over 0.1 Da bins up to 2000 Da.
    pub fn for_dim(d: usize, dropout: f64) -> Self {
        BaselineConfig {
            bin_width: 0.1,
            max_mz: 2000.0,
            hidden: 2 * d,
            dropout,
        }
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.set("baseline.bin_width", self.bin_width);
        kv.set("baseline.max_mz", self.max_mz);
        kv.set("baseline.hidden", self.hidden);
        kv.set("baseline.dropout", self.dropout);
    }

    pub fn from_kv(kv: &KeyValues, d: usize, dropout: f64) -> Result<Self> {
        let def = BaselineConfig::for_dim(d, dropout);
        let cfg = BaselineConfig {
            bin_width: kv.get_or("baseline.bin_width", def.bin_width)?,
            max_mz: kv.get_or("baseline.max_mz", def.max_mz)?,
            hidden: kv.get_or("baseline.hidden", def.hidden)?,
            dropout: kv.get_or("baseline.dropout", def.dropout)?,
        };
        if !(cfg.bin_width > 0.0 && cfg.max_mz > cfg.bin_width) || cfg.hidden == 0 {
            return Err(Error::Config("baseline needs bin_width > 0, max_mz > bin_width, hidden > 0".into()));
        }
        Ok(cfg)
    }
}

/// Regression model: either the spectrum encoder with a feed-forward head,
/// or a feed-forward network over binned spectra.
#[derive(Debug, Clone)]
pub enum PropertyModel {
    Transformer {
        encoder: SpectrumEncoder,
        head: FeedForwardParams,
        dropout: f64,
    },
    Baseline {
        cfg: BaselineConfig,
        layers: [LinearParams; 3],
    },
}

impl PropertyModel {
    /// Head on top of `encoder`, hidden width `d`, registered as `head`.
    pub fn transformer(encoder: SpectrumEncoder, store: &mut ParamStore, rng: &mut Rng) -> Result<Self> {
        let d = encoder.config().d;
        let head = FeedForwardParams::new(store, "head", d, d, PROPERTY_COUNT, rng)?;
        let dropout = encoder.config().dropout;
        Ok(PropertyModel::Transformer {
            encoder,
            head,
            dropout,
        })
    }

    pub fn baseline(cfg: BaselineConfig, store: &mut ParamStore, rng: &mut Rng) -> Result<Self> {
        let inputs = bin_count(cfg.bin_width, cfg.max_mz);
        let layers = [
            LinearParams::new(store, "baseline.0", cfg.hidden, inputs, rng)?,
            LinearParams::new(store, "baseline.1", cfg.hidden, cfg.hidden, rng)?,
            LinearParams::new(store, "baseline.2", PROPERTY_COUNT, cfg.hidden, rng)?,
        ];
        Ok(PropertyModel::Baseline { cfg, layers })
    }

    pub fn dropout(&self) -> f64 {
        match self {
            PropertyModel::Transformer { dropout, .. } => *dropout,
            PropertyModel::Baseline { cfg, .. } => cfg.dropout,
        }
    }

    /// Scaled-space predictions, a `[10]` node.
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &Bound,
        store: &ParamStore,
        s: &Spectrum,
        dropout: &mut Dropout<'_>,
    ) -> Result<Var> {
        match self {
            PropertyModel::Transformer { encoder, head, .. } => {
                let e = encoder.forward(g, p, store, s, dropout)?;
                head.forward(g, p, e)
            }
            PropertyModel::Baseline { cfg, layers } => {
                let x = g.constant(Tensor::vector(bin_spectrum(s, cfg.bin_width, cfg.max_mz)?));
                let mut h = x;
                for layer in &layers[..2] {
                    h = layer.forward(g, p, h)?;
                    h = g.relu(h);
                    h = dropout.apply(g, h)?;
                }
                layers[2].forward(g, p, h)
            }
        }
    }

    pub fn predict_scaled(&self, store: &ParamStore, s: &Spectrum) -> Result<Properties> {
        let mut g = Graph::new();
        let p = store.bind(&mut g, false);
        let out = self.forward(&mut g, &p, store, s, &mut Dropout::inference())?;
        Ok(g.value(out).data().try_into().expect("head has ten outputs"))
    }

    /// Predictions in natural units.
    pub fn predict(&self, store: &ParamStore, scaler: &LabelScaler, s: &Spectrum) -> Result<Properties> {
        Ok(scaler.invert(&self.predict_scaled(store, s)?))
    }

    pub fn predict_all(&self, store: &ParamStore, scaler: &LabelScaler, spectra: &[&Spectrum]) -> Result<Vec<Properties>> {
        use rayon::prelude::*;
        spectra.par_iter().map(|s| self.predict(store, scaler, s)).collect()
    }
}

/// Joint MSE over the ten scaled outputs.
pub fn property_loss(g: &mut Graph, predicted: Var, target: &Properties) -> Result<Var> {
    let t = g.constant(Tensor::vector(target.to_vec()));
    let diff = g.sub(predicted, t)?;
    let sq = g.square(diff);
    Ok(g.mean(sq))
}

#[derive(Debug, Clone)]
pub struct PropertyData<'a> {
    pub train: Vec<&'a Spectrum>,
    pub known: Vec<&'a Spectrum>,
    pub novel: Vec<&'a Spectrum>,
    pub labels: &'a LabelTable,
}

impl PropertyData<'_> {
    /// Scaler over the distinct training structures only.
    pub fn fit_scaler(&self) -> Result<LabelScaler> {
        let structures: BTreeSet<&str> = self.train.iter().map(|s| s.structure_id.as_str()).collect();
        let labels = structures
            .into_iter()
            .map(|sid| self.labels.require(sid).map(|r| r.properties))
            .collect::<Result<Vec<_>>>()?;
        LabelScaler::fit(&labels)
    }

    fn targets(&self, spectra: &[&Spectrum]) -> Result<Vec<Properties>> {
        spectra
            .iter()
            .map(|s| self.labels.require(&s.structure_id).map(|r| r.properties))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyEpoch {
    pub epoch: usize,
    pub train_mse: f64,
    pub known_mse: Option<f64>,
    pub novel_mse: Option<f64>,
    pub wall_seconds: f64,
}

/// R² per property for one split; `None` where undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitR2 {
    pub per_property: [Option<f64>; PROPERTY_COUNT],
    pub spectra: usize,
}

impl SplitR2 {
    /// Mean over the properties where R² is defined.
    pub fn average(&self) -> Option<f64> {
        let v: Vec<f64> = self.per_property.iter().flatten().copied().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

pub fn split_r2(predicted: &[Properties], actual: &[Properties]) -> SplitR2 {
    let per_property = std::array::from_fn(|k| {
        let p: Vec<f64> = predicted.iter().map(|x| x[k]).collect();
        let a: Vec<f64> = actual.iter().map(|x| x[k]).collect();
        r2_score(&p, &a).ok()
    });
    SplitR2 {
        per_property,
        spectra: actual.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub model: String,
    pub train: SplitR2,
    pub known: SplitR2,
    pub novel: SplitR2,
}

impl PropertyReport {
    /// `property<TAB>train_r2<TAB>known_r2<TAB>novel_r2`, then an average row.
    pub fn to_text(&self) -> String {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        let mut out = format!(
            "# model={} r2_unit=spectrum train_spectra={} known_spectra={} novel_spectra={}\n",
            self.model, self.train.spectra, self.known.spectra, self.novel.spectra
        );
        out.push_str("property\ttrain_r2\tknown_r2\tnovel_r2\n");
        for (k, name) in PROPERTY_NAMES.iter().enumerate() {
            out.push_str(&format!(
                "{name}\t{}\t{}\t{}\n",
                f(self.train.per_property[k]),
                f(self.known.per_property[k]),
                f(self.novel.per_property[k])
            ));
        }
        out.push_str(&format!(
            "average\t{}\t{}\t{}\n",
            f(self.train.average()),
            f(self.known.average()),
            f(self.novel.average())
        ));
        out
    }
}

#[derive(Debug, Clone)]
pub struct PropertyRun {
    pub epochs: Vec<PropertyEpoch>,
    pub report: PropertyReport,
}

impl PropertyRun {
    pub fn log_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        let mut out = String::from("epoch\ttrain_mse\tknown_mse\tnovel_mse\twall_seconds\n");
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
}

fn scaled_mse(model: &PropertyModel, store: &ParamStore, scaler: &LabelScaler, spectra: &[&Spectrum], targets: &[Properties]) -> Result<Option<f64>> {
    if spectra.is_empty() {
        return Ok(None);
    }
    let preds = model.predict_all(store, scaler, spectra)?;
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        let (zp, zt) = (scaler.apply(p), scaler.apply(t));
        total += zp.iter().zip(&zt).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / PROPERTY_COUNT as f64;
    }
    Ok(Some(total / spectra.len() as f64))
}

/// R² of `model` on every split.
pub fn evaluate_properties(
    model: &PropertyModel,
    store: &ParamStore,
    scaler: &LabelScaler,
    data: &PropertyData<'_>,
    name: &str,
) -> Result<PropertyReport> {
    let split = |spectra: &[&Spectrum]| -> Result<SplitR2> {
        let preds = model.predict_all(store, scaler, spectra)?;
        Ok(split_r2(&preds, &data.targets(spectra)?))
    };
    Ok(PropertyReport {
        model: name.to_string(),
        train: split(&data.train)?,
        known: split(&data.known)?,
        novel: split(&data.novel)?,
    })
}

const SHUFFLE_STREAM: u64 = 0x7368_7566;

/// Trains on scaled labels with the joint ten-output MSE. Each epoch is one
/// shuffled pass over the training spectra.
pub fn train_properties(
    model: &PropertyModel,
    store: &mut ParamStore,
    scaler: &LabelScaler,
    data: &PropertyData<'_>,
    cfg: &TrainConfig,
    name: &str,
) -> Result<PropertyRun> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::Contract("no training spectra".into()));
    }
    let train_targets = data.targets(&data.train)?;
    let known_targets = data.targets(&data.known)?;
    let novel_targets = data.targets(&data.novel)?;
    let scaled: Vec<Properties> = train_targets.iter().map(|t| scaler.apply(t)).collect();
    let mut opt = OptimizerState::new(store, cfg.adam);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let start = Instant::now();
    let p_drop = model.dropout();
    for e in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        order.shuffle(&mut rng::keyed(cfg.seed, &[SHUFFLE_STREAM, e as u64]));
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let at = StepPosition { epoch: e + 1, step };
            gradient_step(store, &mut opt, cfg.clip, at, batch, |g, p, params, k, &i| {
                let mut r = rng::keyed(cfg.seed, &[e as u64, step as u64, k as u64]);
                let mut drop = Dropout::training(p_drop, &mut r);
                let out = model.forward(g, p, params, data.train[i], &mut drop)?;
                property_loss(g, out, &scaled[i])
            })?;
        }
        let train_mse = scaled_mse(model, store, scaler, &data.train, &train_targets)?.unwrap_or(f64::NAN);
        if !train_mse.is_finite() {
            return Err(Error::Divergence {
                epoch: e + 1,
                step: 0,
                detail: format!("train MSE is {train_mse}"),
            });
        }
        epochs.push(PropertyEpoch {
            epoch: e + 1,
            train_mse,
            known_mse: scaled_mse(model, store, scaler, &data.known, &known_targets)?,
            novel_mse: scaled_mse(model, store, scaler, &data.novel, &novel_targets)?,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    let report = evaluate_properties(model, store, scaler, data, name)?;
    Ok(PropertyRun { epochs, report })
}

/// `spectrum_id<TAB>property…` prediction table.
pub fn predictions_text(ids: &[&str], preds: &[Properties]) -> String {
    let mut out = String::from("spectrum_id");
    for n in PROPERTY_NAMES {
        out.push('\t');
        out.push_str(n);
    }
    out.push('\n');
    for (id, p) in ids.iter().zip(preds) {
        out.push_str(id);
        for v in p {
            out.push_str(&format!("\t{v:.6}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_scaler() {
        let mut a = [1.0; PROPERTY_COUNT];
        let mut b = [3.0; PROPERTY_COUNT];
        a[0] = 0.0;
        b[0] = 2.0;
        let s = LabelScaler::fit(&[a, b]).unwrap();
        assert_eq!(s.mean[0], 1.0);
        assert_eq!(s.std[0], 1.0);
        assert_eq!(s.apply(&b)[0], 1.0);
    }

    #[test]
    fn constant_property_is_named() {
        let mut a = [1.0; PROPERTY_COUNT];
        let b = [2.0; PROPERTY_COUNT];
        a[3] = 2.0;
        let err = LabelScaler::fit(&[a, b]).unwrap_err().to_string();
        assert!(err.contains("polar_surface_area"), "{err}");
        assert!(LabelScaler::fit(&[a]).is_err());
    }

    #[test]
    fn r2_cases() {
        let y = [1.0, 2.0, 4.0, 7.0];
        assert_eq!(r2_score(&y, &y).unwrap(), 1.0);
        assert!(r2_score(&[3.5; 4], &y).unwrap().abs() < 1e-15);
        assert!(r2_score(&[7.0, 4.0, 2.0, 1.0], &y).unwrap() < 0.0);
        assert!(matches!(r2_score(&y, &[2.0; 4]), Err(Error::Metric(_))));
        assert!(r2_score(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn scaler_survives_the_store() {
        let labels: Vec<Properties> = (0..5).map(|i| std::array::from_fn(|k| (i * k) as f64 + 0.1 * i as f64)).collect();
        let s = LabelScaler::fit(&labels).unwrap();
        let mut store = ParamStore::new(Precision::Binary32);
        s.add_to(&mut store).unwrap();
        let bytes = crate::tensor::checkpoint::to_bytes(&store, &crate::tensor::checkpoint::ConfigDigest::of_text(""));
        let back = crate::tensor::checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(LabelScaler::from_store(&back.params).unwrap(), s);
    }
}
