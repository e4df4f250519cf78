use std::collections::BTreeMap;

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a tensor registered in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A learnable tensor with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub m: Tensor<T>,
    pub v: Tensor<T>,
}

/// Named parameters in registration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    by_name: BTreeMap<String, ParamId>,
    /// Adam steps taken so far.
    pub step: u64,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            by_name: BTreeMap::new(),
            step: 0,
        }
    }

    pub fn add(&mut self, name: &str, value: Tensor<T>) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::config(format!("parameter {name:?} registered twice")));
        }
        let id = ParamId(self.params.len());
        let z = Tensor::zeros(value.shape());
        self.params.push(Param {
            name: name.to_owned(),
            grad: z.clone(),
            m: z.clone(),
            v: z,
            value,
        });
        self.by_name.insert(name.to_owned(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total scalar count over all tensors.
    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    /// Replaces the stored gradients.
    pub fn set_grads(&mut self, grads: Grads<T>) -> Result<()> {
        if grads.tensors.len() != self.params.len() {
            return Err(Error::shape(format!("{} gradients for {} parameters", grads.tensors.len(), self.params.len())));
        }
        for (p, g) in self.params.iter_mut().zip(grads.tensors) {
            p.value.same_shape(&g)?;
            p.grad = g;
        }
        Ok(())
    }

    /// Overwrites values from named tensors; every parameter must be present.
    pub fn load_values<'a>(&mut self, named: impl IntoIterator<Item = (&'a str, &'a Tensor<T>)>) -> Result<()> {
        let mut seen = vec![false; self.params.len()];
        for (name, t) in named {
            let Some(id) = self.id(name) else { continue };
            self.params[id.0].value.same_shape(t).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
            self.params[id.0].value = t.clone();
            seen[id.0] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Checkpoint(format!("missing parameter {:?}", self.params[i].name)));
        }
        Ok(())
    }
}

/// Gradient buffers aligned with a store, for per-sample accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Grads<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        Grads {
            tensors: store.params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    /// Several distinct gradient buffers at once. Panics on repeated ids.
    pub fn disjoint_mut<const N: usize>(&mut self, ids: [ParamId; N]) -> [&mut Tensor<T>; N] {
        self.tensors
            .get_disjoint_mut(ids.map(|id| id.0))
            .expect("distinct parameter ids")
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn add_assign(&mut self, other: &Grads<T>) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::shape("gradient sets of different length"));
        }
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, k: T) {
        for t in &mut self.tensors {
            t.scale(k);
        }
    }
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::lit(rng.random_range(-bound..=bound))).collect();
    Tensor::new(shape.to_vec(), data).expect("length matches shape")
}
