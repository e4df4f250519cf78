use rand::Rng;

use super::config::{ModelConfig, Pooling};
use crate::error::{Error, Result};
use crate::features::sequence::{FmCategory, FuCategory, SequenceFeature};
use crate::nn::{
    dense_backward, dense_forward, embed_backward, embed_forward, lstm_backward, lstm_forward, softmax_xent,
    softmax_xent_backward, xavier_uniform, Activation, Grads, LstmTrace, ParamId, ParamStore, Tensor,
};
use crate::scalar::Scalar;

/// One user as the model sees it. `general` is already normalized when fed to the
/// network; the training entry point normalizes raw vectors itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub card_id: String,
    /// [`FmCategory::index`] per bin.
    pub fm: Vec<u8>,
    /// [`FuCategory::index`] per bin.
    pub fu: Vec<u8>,
    pub general: Vec<T>,
    pub label: usize,
}

impl<T: Scalar> Sample<T> {
    pub fn new(card_id: impl Into<String>, seq: &SequenceFeature, general: Vec<T>, label: usize) -> Self {
        Sample {
            card_id: card_id.into(),
            fm: seq.fm.iter().map(|c| c.index() as u8).collect(),
            fu: seq.fu.iter().map(|c| c.index() as u8).collect(),
            general,
            label,
        }
    }

    pub fn seq_len(&self) -> usize {
        self.fm.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct SeqIds {
    time: ParamId,
    fm: ParamId,
    fu: ParamId,
    wx: ParamId,
    wh: ParamId,
    b: ParamId,
    w_hs: ParamId,
    b_hs: ParamId,
    w_s: ParamId,
    b_s: ParamId,
    v_s: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct GenIds {
    w_hg: ParamId,
    b_hg: ParamId,
    w_g: ParamId,
    b_g: ParamId,
    v_g: ParamId,
}

/// The two-branch classifier. Only the parameters of active branches exist.
#[derive(Debug, Clone)]
pub struct S2sModel<T> {
    pub cfg: ModelConfig,
    pub seq_len: usize,
    pub general_dim: usize,
    pub store: ParamStore<T>,
    seq: Option<SeqIds>,
    gen: Option<GenIds>,
    w_out: ParamId,
    b_out: ParamId,
}

/// Every intermediate of one forward pass. Vectors of an inactive branch are empty.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    /// Holds the embedded inputs and all hidden states.
    pub lstm: Option<LstmTrace<T>>,
    /// Pooled hidden states (`H_N` under concat pooling).
    pub pooled: Vec<T>,
    pub h_s: Vec<T>,
    pub y_s: Vec<T>,
    pub x_g: Vec<T>,
    pub h_g: Vec<T>,
    pub y_g: Vec<T>,
    pub fused: Vec<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Scalar> S2sModel<T> {
    pub fn new<R: Rng + ?Sized>(cfg: &ModelConfig, seq_len: usize, general_dim: usize, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let v = cfg.variant;
        if v.uses_sequence() && seq_len == 0 {
            return Err(Error::config("sequence branch needs at least one bin"));
        }
        if v.uses_general() && general_dim == 0 {
            return Err(Error::config("general branch needs at least one feature"));
        }
        let mut store = ParamStore::new();
        let (h, e, f) = (cfg.lstm_hidden, cfg.embed_width(), cfg.fusion);
        let seq = if v.uses_sequence() {
            let pooled = match cfg.pooling {
                Pooling::Concat => seq_len * h,
                Pooling::Last | Pooling::Mean => h,
            };
            let mut lstm_b = Tensor::zeros(&[4 * h]);
            lstm_b.data_mut()[h..2 * h].fill(T::one());
            Some(SeqIds {
                time: store.add("embed.time", xavier_uniform(rng, &[seq_len, cfg.time_embed], seq_len, cfg.time_embed))?,
                fm: store.add("embed.fm", xavier_uniform(rng, &[FmCategory::COUNT, cfg.fm_embed], FmCategory::COUNT, cfg.fm_embed))?,
                fu: store.add("embed.fu", xavier_uniform(rng, &[FuCategory::COUNT, cfg.fu_embed], FuCategory::COUNT, cfg.fu_embed))?,
                wx: store.add("lstm.wx", xavier_uniform(rng, &[4 * h, e], e, 4 * h))?,
                wh: store.add("lstm.wh", xavier_uniform(rng, &[4 * h, h], h, 4 * h))?,
                b: store.add("lstm.b", lstm_b)?,
                w_hs: store.add("seq.w_hs", xavier_uniform(rng, &[cfg.seq_dense, pooled], pooled, cfg.seq_dense))?,
                b_hs: store.add("seq.b_hs", Tensor::zeros(&[cfg.seq_dense]))?,
                w_s: store.add("seq.w_s", xavier_uniform(rng, &[f, cfg.seq_dense], cfg.seq_dense, f))?,
                b_s: store.add("seq.b_s", Tensor::zeros(&[f]))?,
                v_s: store.add("fusion.v_s", Tensor::filled(&[f], T::one()))?,
            })
        } else {
            None
        };
        let gen = if v.uses_general() {
            let g = cfg.general_hidden;
            Some(GenIds {
                w_hg: store.add("gen.w_hg", xavier_uniform(rng, &[g, general_dim], general_dim, g))?,
                b_hg: store.add("gen.b_hg", Tensor::zeros(&[g]))?,
                w_g: store.add("gen.w_g", xavier_uniform(rng, &[f, g], g, f))?,
                b_g: store.add("gen.b_g", Tensor::zeros(&[f]))?,
                v_g: store.add("fusion.v_g", Tensor::filled(&[f], T::one()))?,
            })
        } else {
            None
        };
        let w_out = store.add("out.w", xavier_uniform(rng, &[cfg.classes, f], f, cfg.classes))?;
        let b_out = store.add("out.b", Tensor::zeros(&[cfg.classes]))?;
        Ok(S2sModel {
            cfg: cfg.clone(),
            seq_len,
            general_dim,
            store,
            seq,
            gen,
            w_out,
            b_out,
        })
    }

    fn check_inputs(&self, fm: &[u8], fu: &[u8], x_g: &[T]) -> Result<()> {
        if self.seq.is_some() && (fm.len() != self.seq_len || fu.len() != self.seq_len) {
            return Err(Error::shape(format!(
                "sequence of {}/{} bins, model expects {}",
                fm.len(),
                fu.len(),
                self.seq_len
            )));
        }
        if self.gen.is_some() && x_g.len() != self.general_dim {
            return Err(Error::shape(format!(
                "general vector of width {}, model expects {}",
                x_g.len(),
                self.general_dim
            )));
        }
        Ok(())
    }

    pub fn forward(&self, fm: &[u8], fu: &[u8], x_g: &[T]) -> Result<ForwardTrace<T>> {
        self.check_inputs(fm, fu, x_g)?;
        let p = |id| self.store.value(id);
        let f = self.cfg.fusion;
        let mut tr = ForwardTrace {
            lstm: None,
            pooled: Vec::new(),
            h_s: Vec::new(),
            y_s: Vec::new(),
            x_g: Vec::new(),
            h_g: Vec::new(),
            y_g: Vec::new(),
            fused: vec![T::zero(); f],
            logits: Vec::new(),
            probs: Vec::new(),
        };
        if let Some(ids) = self.seq {
            let e = self.cfg.embed_width();
            let mut xs = Vec::with_capacity(self.seq_len * e);
            for t in 0..self.seq_len {
                xs.extend_from_slice(embed_forward(p(ids.time), t)?);
                xs.extend_from_slice(embed_forward(p(ids.fm), usize::from(fm[t]))?);
                xs.extend_from_slice(embed_forward(p(ids.fu), usize::from(fu[t]))?);
            }
            let lstm = lstm_forward(p(ids.wx), p(ids.wh), p(ids.b), &xs, self.seq_len)?;
            tr.pooled = pool(&lstm, self.cfg.pooling);
            tr.h_s = dense_forward(p(ids.w_hs), p(ids.b_hs), &tr.pooled, Activation::Relu)?;
            tr.y_s = dense_forward(p(ids.w_s), p(ids.b_s), &tr.h_s, Activation::Tanh)?;
            for (u, (&v, &y)) in tr.fused.iter_mut().zip(p(ids.v_s).data().iter().zip(&tr.y_s)) {
                *u += v * y;
            }
            tr.lstm = Some(lstm);
        }
        if let Some(ids) = self.gen {
            tr.x_g = x_g.to_vec();
            tr.h_g = dense_forward(p(ids.w_hg), p(ids.b_hg), x_g, Activation::Relu)?;
            tr.y_g = dense_forward(p(ids.w_g), p(ids.b_g), &tr.h_g, Activation::Tanh)?;
            for (u, (&v, &y)) in tr.fused.iter_mut().zip(p(ids.v_g).data().iter().zip(&tr.y_g)) {
                *u += v * y;
            }
        }
        tr.logits = dense_forward(p(self.w_out), p(self.b_out), &tr.fused, Activation::Identity)?;
        tr.probs = crate::nn::softmax(&tr.logits);
        Ok(tr)
    }

    /// Adds the cross-entropy gradient of one sample into `grads`; returns the loss.
    pub fn accumulate(&self, fm: &[u8], fu: &[u8], x_g: &[T], class: usize, grads: &mut Grads<T>) -> Result<T> {
        let tr = self.forward(fm, fu, x_g)?;
        let (_, loss) = softmax_xent(&tr.logits, class)?;
        self.backward(&tr, fm, fu, class, grads)?;
        Ok(loss)
    }

    pub fn backward(&self, tr: &ForwardTrace<T>, fm: &[u8], fu: &[u8], class: usize, grads: &mut Grads<T>) -> Result<()> {
        let p = |id| self.store.value(id);
        let dlogits = softmax_xent_backward(&tr.probs, class)?;
        let [gw, gb] = grads.disjoint_mut([self.w_out, self.b_out]);
        let du = dense_backward(p(self.w_out), &tr.fused, &tr.logits, &dlogits, Activation::Identity, gw, gb)?;

        if let Some(ids) = self.seq {
            let lstm = tr.lstm.as_ref().ok_or_else(|| Error::shape("trace lacks the sequence branch"))?;
            let v_s = p(ids.v_s).data();
            let dy_s: Vec<T> = du.iter().zip(v_s).map(|(&d, &v)| d * v).collect();
            for ((g, &d), &y) in grads.get_mut(ids.v_s).data_mut().iter_mut().zip(&du).zip(&tr.y_s) {
                *g += d * y;
            }
            let [gw, gb] = grads.disjoint_mut([ids.w_s, ids.b_s]);
            let dh_s = dense_backward(p(ids.w_s), &tr.h_s, &tr.y_s, &dy_s, Activation::Tanh, gw, gb)?;
            let [gw, gb] = grads.disjoint_mut([ids.w_hs, ids.b_hs]);
            let dpooled = dense_backward(p(ids.w_hs), &tr.pooled, &tr.h_s, &dh_s, Activation::Relu, gw, gb)?;
            let dh = unpool(&dpooled, lstm, self.cfg.pooling);
            let [dwx, dwh, db] = grads.disjoint_mut([ids.wx, ids.wh, ids.b]);
            let dxs = lstm_backward(p(ids.wx), p(ids.wh), lstm, &dh, dwx, dwh, db)?;
            let (te, fe) = (self.cfg.time_embed, self.cfg.fm_embed);
            let e = self.cfg.embed_width();
            for t in 0..self.seq_len {
                let row = &dxs[t * e..(t + 1) * e];
                embed_backward(grads.get_mut(ids.time), t, &row[..te])?;
                embed_backward(grads.get_mut(ids.fm), usize::from(fm[t]), &row[te..te + fe])?;
                embed_backward(grads.get_mut(ids.fu), usize::from(fu[t]), &row[te + fe..])?;
            }
        }
        if let Some(ids) = self.gen {
            let v_g = p(ids.v_g).data();
            let dy_g: Vec<T> = du.iter().zip(v_g).map(|(&d, &v)| d * v).collect();
            for ((g, &d), &y) in grads.get_mut(ids.v_g).data_mut().iter_mut().zip(&du).zip(&tr.y_g) {
                *g += d * y;
            }
            let [gw, gb] = grads.disjoint_mut([ids.w_g, ids.b_g]);
            let dh_g = dense_backward(p(ids.w_g), &tr.h_g, &tr.y_g, &dy_g, Activation::Tanh, gw, gb)?;
            let [gw, gb] = grads.disjoint_mut([ids.w_hg, ids.b_hg]);
            dense_backward(p(ids.w_hg), &tr.x_g, &tr.h_g, &dh_g, Activation::Relu, gw, gb)?;
        }
        Ok(())
    }

    /// Checkpoint tensor for the input dimensions, so a model can be rebuilt.
    pub fn dims_tensor(&self) -> Tensor<T> {
        Tensor::from_vec(vec![T::from_usize_lossy(self.seq_len), T::from_usize_lossy(self.general_dim)])
    }
}

fn pool<T: Scalar>(lstm: &LstmTrace<T>, pooling: Pooling) -> Vec<T> {
    match pooling {
        Pooling::Concat => lstm.hidden_states().to_vec(),
        Pooling::Last => lstm.last_h().to_vec(),
        Pooling::Mean => {
            let n = T::from_usize_lossy(lstm.steps);
            let mut m = vec![T::zero(); lstm.hidden];
            for t in 0..lstm.steps {
                for (a, &h) in m.iter_mut().zip(lstm.h(t)) {
                    *a += h;
                }
            }
            m.into_iter().map(|v| v / n).collect()
        }
    }
}

/// Gradient w.r.t. every hidden state given the gradient of the pooled vector.
fn unpool<T: Scalar>(dpooled: &[T], lstm: &LstmTrace<T>, pooling: Pooling) -> Vec<T> {
    let (h, steps) = (lstm.hidden, lstm.steps);
    match pooling {
        Pooling::Concat => dpooled.to_vec(),
        Pooling::Last => {
            let mut dh = vec![T::zero(); steps * h];
            dh[(steps - 1) * h..].copy_from_slice(dpooled);
            dh
        }
        Pooling::Mean => {
            let n = T::from_usize_lossy(steps);
            let per: Vec<T> = dpooled.iter().map(|&d| d / n).collect();
            (0..steps).flat_map(|_| per.iter().copied()).collect()
        }
    }
}
