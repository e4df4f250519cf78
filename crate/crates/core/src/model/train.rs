use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::config::ModelConfig;
use super::metrics::{evaluate, EpochRecord, EvalReport};
use super::network::{S2sModel, Sample};
use crate::error::{Error, Result};
use crate::features::general::NormStats;
use crate::nn::{
    adam_step, clip_global_norm, dense_backward, dense_forward, read_checkpoint, softmax, softmax_xent,
    softmax_xent_backward, xavier_uniform, Activation, AdamConfig, Grads, ParamId, ParamStore, Tensor,
};
use crate::scalar::Scalar;
use crate::seed::rng_for;

/// Samples per gradient chunk. Chunks are summed in a fixed order, so results do
/// not depend on the thread count.
const CHUNK: usize = 8;

/// Anything trainable by [`fit`].
pub trait Classifier<T: Scalar>: Sync {
    fn store(&self) -> &ParamStore<T>;
    fn store_mut(&mut self) -> &mut ParamStore<T>;
    fn probabilities(&self, s: &Sample<T>) -> Result<Vec<T>>;
    /// Adds the sample's loss gradient into `grads` and returns its loss.
    fn accumulate(&self, s: &Sample<T>, grads: &mut Grads<T>) -> Result<T>;
}

impl<T: Scalar> Classifier<T> for S2sModel<T> {
    fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    fn probabilities(&self, s: &Sample<T>) -> Result<Vec<T>> {
        Ok(self.forward(&s.fm, &s.fu, &s.general)?.probs)
    }

    fn accumulate(&self, s: &Sample<T>, grads: &mut Grads<T>) -> Result<T> {
        S2sModel::accumulate(self, &s.fm, &s.fu, &s.general, s.label, grads)
    }
}

/// Argmax with ties to the lower class.
pub fn argmax<T: Scalar>(p: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub fn predict<T: Scalar, C: Classifier<T>>(model: &C, s: &Sample<T>) -> Result<(usize, Vec<T>)> {
    let p = model.probabilities(s)?;
    Ok((argmax(&p), p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub clip_norm: f64,
    pub classes: usize,
    pub seed: u64,
}

impl From<&ModelConfig> for TrainOptions {
    fn from(c: &ModelConfig) -> Self {
        TrainOptions {
            lr: c.lr,
            batch_size: c.batch_size,
            epochs: c.epochs,
            clip_norm: c.clip_norm,
            classes: c.classes,
            seed: c.seed,
        }
    }
}

fn batch_gradient<T: Scalar, C: Classifier<T>>(model: &C, batch: &[&Sample<T>]) -> Result<(T, Grads<T>)> {
    let parts: Vec<(T, Grads<T>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = Grads::zeros_like(model.store());
            let mut loss = T::zero();
            for s in chunk {
                loss += model.accumulate(s, &mut g)?;
            }
            Ok((loss, g))
        })
        .collect::<Result<_>>()?;
    let mut it = parts.into_iter();
    let (mut loss, mut g) = it.next().ok_or(Error::Empty("empty batch"))?;
    for (l, gi) in it {
        loss += l;
        g.add_assign(&gi)?;
    }
    Ok((loss, g))
}

/// Mean loss and predictions over `samples`, in order.
pub fn score<T: Scalar, C: Classifier<T>>(model: &C, samples: &[Sample<T>]) -> Result<(f64, Vec<usize>)> {
    let out: Vec<(f64, usize)> = samples
        .par_iter()
        .map(|s| {
            let p = model.probabilities(s)?;
            let loss = -p.get(s.label).ok_or(Error::IndexOutOfRange { index: s.label, len: p.len() })?.as_f64().ln();
            Ok((loss, argmax(&p)))
        })
        .collect::<Result<_>>()?;
    let mean = out.iter().map(|o| o.0).sum::<f64>() / out.len().max(1) as f64;
    Ok((mean, out.into_iter().map(|o| o.1).collect()))
}

/// Mini-batch Adam over `train`, scoring `test` after every epoch.
pub fn fit<T: Scalar, C: Classifier<T>>(
    model: &mut C,
    train: &[Sample<T>],
    test: &[Sample<T>],
    opts: &TrainOptions,
) -> Result<Vec<EpochRecord>> {
    if train.is_empty() {
        return Err(Error::Empty("no training samples"));
    }
    let adam = AdamConfig {
        lr: opts.lr,
        ..AdamConfig::default()
    };
    let mut rng = rng_for(opts.seed, "shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();
    let test_labels: Vec<usize> = test.iter().map(|s| s.label).collect();
    let mut history = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(opts.batch_size.max(1)) {
            let batch: Vec<&Sample<T>> = idx.iter().map(|&i| &train[i]).collect();
            let (loss, mut g) = batch_gradient(model, &batch)?;
            total += loss.as_f64();
            g.scale(T::one() / T::from_usize_lossy(batch.len()));
            let store = model.store_mut();
            store.set_grads(g)?;
            clip_global_norm(store, opts.clip_norm);
            adam_step(store, &adam);
        }
        if !model.store().params().iter().all(|p| p.value.is_finite()) {
            return Err(Error::shape(format!("non-finite parameters after epoch {}", epoch + 1)));
        }
        let (test_loss, test_macro_f1) = if test.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let (l, preds) = score(model, test)?;
            (l, evaluate(&preds, &test_labels, opts.classes)?.macro_f1)
        };
        let rec = EpochRecord {
            epoch: epoch + 1,
            train_loss: total / train.len() as f64,
            test_loss,
            test_macro_f1,
        };
        log::info!(
            "epoch {} train_loss {:.4} test_loss {:.4} test_macro_f1 {:.4}",
            rec.epoch,
            rec.train_loss,
            rec.test_loss,
            rec.test_macro_f1
        );
        history.push(rec);
    }
    Ok(history)
}

/// Indices of the training and held-out users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class seeded shuffle, `round(fraction · n_c)` of each class to training,
/// keeping at least one user on each side when the class has two or more.
pub fn stratified_split<R: Rng + ?Sized>(labels: &[usize], classes: usize, fraction: f64, rng: &mut R) -> Result<Split> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let Some(mut idx) = by_class.remove(&c) else {
            return Err(Error::config(format!("class {c} is absent from the training split")));
        };
        idx.shuffle(rng);
        let n = idx.len();
        let k = ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    if let Some((&c, _)) = by_class.iter().next() {
        return Err(Error::IndexOutOfRange { index: c, len: classes });
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// A fitted model with the normalization it was trained under.
#[derive(Debug, Clone)]
pub struct Trained<M, T> {
    pub model: M,
    pub norm: NormStats<T>,
    pub split: Split,
    pub report: EvalReport,
}

fn normalized<T: Scalar>(samples: &[Sample<T>], idx: &[usize], norm: &NormStats<T>) -> Vec<Sample<T>> {
    idx.iter()
        .map(|&i| {
            let s = &samples[i];
            Sample {
                general: norm.normalize(&s.general),
                ..s.clone()
            }
        })
        .collect()
}

struct Prepared<T> {
    split: Split,
    norm: NormStats<T>,
    train: Vec<Sample<T>>,
    test: Vec<Sample<T>>,
}

fn prepare<T: Scalar>(samples: &[Sample<T>], cfg: &ModelConfig) -> Result<Prepared<T>> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("no labeled users"));
    }
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let split = stratified_split(&labels, cfg.classes, cfg.train_fraction, &mut rng_for(cfg.seed, "split"))?;
    let rows: Vec<Vec<T>> = split.train.iter().map(|&i| samples[i].general.clone()).collect();
    let norm = NormStats::fit(&rows)?;
    Ok(Prepared {
        train: normalized(samples, &split.train, &norm),
        test: normalized(samples, &split.test, &norm),
        split,
        norm,
    })
}

fn final_report<T: Scalar, C: Classifier<T>>(model: &C, test: &[Sample<T>], classes: usize, history: Vec<EpochRecord>) -> Result<EvalReport> {
    let (_, preds) = score(model, test)?;
    let labels: Vec<usize> = test.iter().map(|s| s.label).collect();
    let mut report = evaluate(&preds, &labels, classes)?;
    report.history = history;
    Ok(report)
}

/// Stratified split, normalization fitted on the training part, training, and
/// evaluation on the held-out part. `samples` carry raw general vectors.
pub fn train<T: Scalar>(samples: &[Sample<T>], cfg: &ModelConfig) -> Result<Trained<S2sModel<T>, T>> {
    let seq_len = samples.first().map_or(0, Sample::seq_len);
    if samples.iter().any(|s| s.seq_len() != seq_len) {
        return Err(Error::shape("users have sequences of different length"));
    }
    let general_dim = samples.first().map_or(0, |s| s.general.len());
    let prep = prepare(samples, cfg)?;
    let mut model = S2sModel::new(cfg, seq_len, general_dim, &mut rng_for(cfg.seed, "init"))?;
    let history = fit(&mut model, &prep.train, &prep.test, &TrainOptions::from(cfg))?;
    let report = final_report(&model, &prep.test, cfg.classes, history)?;
    Ok(Trained {
        model,
        norm: prep.norm,
        split: prep.split,
        report,
    })
}

/// Multinomial logistic regression on the general vector.
#[derive(Debug, Clone)]
pub struct LogisticModel<T> {
    pub store: ParamStore<T>,
    w: ParamId,
    b: ParamId,
}

impl<T: Scalar> LogisticModel<T> {
    pub fn new<R: Rng + ?Sized>(dim: usize, classes: usize, rng: &mut R) -> Result<Self> {
        let mut store = ParamStore::new();
        let w = store.add("logit.w", xavier_uniform(rng, &[classes, dim], dim, classes))?;
        let b = store.add("logit.b", Tensor::zeros(&[classes]))?;
        Ok(LogisticModel { store, w, b })
    }
}

impl<T: Scalar> Classifier<T> for LogisticModel<T> {
    fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    fn probabilities(&self, s: &Sample<T>) -> Result<Vec<T>> {
        let z = dense_forward(self.store.value(self.w), self.store.value(self.b), &s.general, Activation::Identity)?;
        Ok(softmax(&z))
    }

    fn accumulate(&self, s: &Sample<T>, grads: &mut Grads<T>) -> Result<T> {
        let (w, b) = (self.store.value(self.w), self.store.value(self.b));
        let z = dense_forward(w, b, &s.general, Activation::Identity)?;
        let (p, loss) = softmax_xent(&z, s.label)?;
        let dz = softmax_xent_backward(&p, s.label)?;
        let [gw, gb] = grads.disjoint_mut([self.w, self.b]);
        dense_backward(w, &s.general, &z, &dz, Activation::Identity, gw, gb)?;
        Ok(loss)
    }
}

/// Logistic regression under the same split, normalization and optimizer settings
/// as [`train`].
pub fn logistic_baseline<T: Scalar>(samples: &[Sample<T>], cfg: &ModelConfig) -> Result<Trained<LogisticModel<T>, T>> {
    let general_dim = samples.first().map_or(0, |s| s.general.len());
    if general_dim == 0 {
        return Err(Error::config("logistic baseline needs general features"));
    }
    let prep = prepare(samples, cfg)?;
    let mut model = LogisticModel::new(general_dim, cfg.classes, &mut rng_for(cfg.seed, "logistic_init"))?;
    let history = fit(&mut model, &prep.train, &prep.test, &TrainOptions::from(cfg))?;
    let report = final_report(&model, &prep.test, cfg.classes, history)?;
    Ok(Trained {
        model,
        norm: prep.norm,
        split: prep.split,
        report,
    })
}

pub const NORM_MEAN: &str = "norm.mean";
pub const NORM_STD: &str = "norm.std";
pub const MODEL_DIMS: &str = "model.dims";

/// Parameters, input dimensions and normalization as named tensors.
pub fn checkpoint_tensors<T: Scalar>(t: &Trained<S2sModel<T>, T>) -> Vec<(String, Tensor<T>)> {
    let mut out: Vec<(String, Tensor<T>)> = t.model.store.params().iter().map(|p| (p.name.clone(), p.value.clone())).collect();
    out.push((MODEL_DIMS.into(), t.model.dims_tensor()));
    out.push((NORM_MEAN.into(), Tensor::from_vec(t.norm.mean.clone())));
    out.push((NORM_STD.into(), Tensor::from_vec(t.norm.std.clone())));
    out
}

/// Rebuilds a model and its normalization from a checkpoint and the config it was
/// trained with.
pub fn load_checkpoint<R: std::io::Read>(reader: R, cfg: &ModelConfig) -> Result<(S2sModel<f64>, NormStats<f64>)> {
    let tensors = read_checkpoint(reader)?;
    let find = |name: &str| {
        tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))
    };
    let dims = find(MODEL_DIMS)?.data();
    let [seq_len, general_dim] = dims else {
        return Err(Error::Checkpoint("malformed model.dims".into()));
    };
    let mut model = S2sModel::new(cfg, *seq_len as usize, *general_dim as usize, &mut rng_for(0, "load"))?;
    model.store.load_values(tensors.iter().map(|(n, t)| (n.as_str(), t)))?;
    let norm = NormStats {
        mean: find(NORM_MEAN)?.data().to_vec(),
        std: find(NORM_STD)?.data().to_vec(),
    };
    Ok((model, norm))
}
