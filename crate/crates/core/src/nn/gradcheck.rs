use serde::Serialize;

use super::params::{Grads, ParamId, ParamStore};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub eps: f64,
    /// Pass threshold on the relative error.
    pub tolerance: f64,
    /// Denominator floor so that near-zero gradients compare absolutely.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    /// True iff every tensor is within tolerance; vacuously true with no tensors.
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.max_rel_error <= self.tolerance)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }
}

/// Compares analytic gradients from `f` with central differences over every
/// parameter value. `f` must be deterministic; the store is restored afterwards.
pub fn grad_check<T, F>(store: &mut ParamStore<T>, cfg: &GradCheckConfig, mut f: F) -> Result<GradCheckReport>
where
    T: Scalar,
    F: FnMut(&ParamStore<T>) -> Result<(T, Grads<T>)>,
{
    let (_, analytic) = f(store)?;
    let eps = T::lit(cfg.eps);
    let mut tensors = Vec::with_capacity(store.len());
    for pi in 0..store.len() {
        let id = store.id(&store.params()[pi].name).expect("registered name");
        let mut worst = (0.0, None);
        for i in 0..store.value(id).len() {
            let orig = store.value(id).data()[i];
            let up = eval_at(store, id, i, orig + eps, &mut f)?;
            let down = eval_at(store, id, i, orig - eps, &mut f)?;
            store.value_mut(id).data_mut()[i] = orig;
            let num = (up - down).as_f64() / (2.0 * cfg.eps);
            let ana = analytic.get(id).data()[i].as_f64();
            let rel = (ana - num).abs() / ana.abs().max(num.abs()).max(cfg.floor);
            if rel > worst.0 || worst.1.is_none() {
                worst = (rel, Some(i));
            }
        }
        tensors.push(TensorCheck {
            name: store.params()[pi].name.clone(),
            checked: store.value(id).len(),
            max_rel_error: worst.0,
            worst_index: worst.1,
        });
    }
    Ok(GradCheckReport {
        tolerance: cfg.tolerance,
        tensors,
    })
}

fn eval_at<T: Scalar, F>(store: &mut ParamStore<T>, id: ParamId, i: usize, v: T, f: &mut F) -> Result<T>
where
    F: FnMut(&ParamStore<T>) -> Result<(T, Grads<T>)>,
{
    store.value_mut(id).data_mut()[i] = v;
    Ok(f(store)?.0)
}
