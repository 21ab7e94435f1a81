use super::params::{Gradients, ParameterStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update with bias correction. Weight decay is coupled: `wd * θ` is
/// added to the gradient before the moment updates.
pub fn adam_step(params: &mut ParameterStore, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    if grads.tensors.len() != params.tensors.len() {
        return Err(Error::shape(
            "gradient tensors",
            params.tensors.len(),
            grads.tensors.len(),
        ));
    }
    for (i, (p, g)) in params.tensors.iter().zip(&grads.tensors).enumerate() {
        if p.dim() != g.dim() {
            return Err(Error::shape(
                format!("gradient tensor {i}"),
                format!("{:?}", p.dim()),
                format!("{:?}", g.dim()),
            ));
        }
    }

    params.adam.step += 1;
    let t = params.adam.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);

    let ParameterStore { tensors, adam, .. } = params;
    for (((theta, g), m), v) in tensors
        .iter_mut()
        .zip(&grads.tensors)
        .zip(adam.first.iter_mut())
        .zip(adam.second.iter_mut())
    {
        ndarray::Zip::from(theta)
            .and(g)
            .and(m)
            .and(v)
            .for_each(|theta, &g, m, v| {
                let g = g + cfg.weight_decay * *theta;
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *theta -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            });
    }
    Ok(())
}
