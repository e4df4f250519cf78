use rand::Rng;

use super::config::ModelConfig;
use super::network::S2sModel;
use crate::error::Result;
use crate::nn::{grad_check, GradCheckConfig, GradCheckReport, Grads};
use crate::seed::rng_for;

/// Finite-difference check of the whole network on random inputs, one sample per
/// class. Every parameter of every active branch is perturbed.
pub fn check_model_gradients(
    cfg: &ModelConfig,
    seq_len: usize,
    general_dim: usize,
    check: &GradCheckConfig,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = rng_for(seed, "gradcheck");
    let mut model = S2sModel::<f64>::new(cfg, seq_len, general_dim, &mut rng)?;
    let inputs: Vec<(Vec<u8>, Vec<u8>, Vec<f64>, usize)> = (0..cfg.classes)
        .map(|class| {
            let fm = (0..seq_len).map(|_| rng.random_range(0..4)).collect();
            let fu = (0..seq_len).map(|_| rng.random_range(0..4)).collect();
            let g = (0..general_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            (fm, fu, g, class)
        })
        .collect();
    let mut store = model.store.clone();
    grad_check(&mut store, check, |st| {
        model.store = st.clone();
        let mut grads = Grads::zeros_like(st);
        let mut loss = 0.0;
        for (fm, fu, g, class) in &inputs {
            loss += model.accumulate(fm, fu, g, *class, &mut grads)?;
        }
        Ok((loss, grads))
    })
}
