use crate::error::{Error, Result};
use crate::model::{ModelParams, Weights};
use crate::numcore::Tensor;

/// Inverse-square-root schedule with linear warm-up:
/// `d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)`.
pub fn lr_schedule(step: u64, d_model: usize, warmup_steps: u64) -> Result<f64> {
    if step == 0 {
        return Err(Error::contract("learning-rate steps start at 1"));
    }
    if warmup_steps == 0 {
        return Err(Error::Config("warmup_steps must be at least 1".into()));
    }
    let s = step as f64;
    let w = warmup_steps as f64;
    Ok((d_model as f64).powf(-0.5) * s.powf(-0.5).min(s * w.powf(-1.5)))
}

/// Scales all gradients by `clip_norm / g` when their global L2 norm `g`
/// exceeds `clip_norm`. Returns the norm before clipping.
pub fn clip_gradients(grads: &mut [&mut Tensor], clip_norm: f64) -> Result<f64> {
    let mut sq = 0.0;
    for (i, g) in grads.iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::Training(format!(
                "non-finite gradient in tensor {i} of {}",
                grads.len()
            )));
        }
        sq += g.norm_sq();
    }
    let norm = sq.sqrt();
    if norm > clip_norm {
        let s = clip_norm / norm;
        for g in grads.iter_mut() {
            g.scale_in_place(s);
        }
    }
    Ok(norm)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
        }
    }
}

/// First and second moment estimates, laid out like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Weights<Tensor>,
    pub v: Weights<Tensor>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros = params.map(|_, t| Tensor::zeros(t.shape()));
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

impl Adam {
    /// One bias-corrected update. `grads` are in [`Weights::values_mut`] order.
    pub fn step(&self, params: &mut ModelParams, state: &mut OptimizerState, grads: &[Tensor], lr: f64) -> Result<()> {
        let ps = params.values_mut();
        if ps.len() != grads.len() {
            return Err(Error::contract(format!(
                "{} gradients for {} parameters",
                grads.len(),
                ps.len()
            )));
        }
        state.step += 1;
        let t = state.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, m), v), g) in ps
            .into_iter()
            .zip(state.m.values_mut())
            .zip(state.v.values_mut())
            .zip(grads)
        {
            if g.shape() != p.shape() {
                return Err(Error::shape("adam update", p.shape(), g.shape()));
            }
            let p = std::sync::Arc::make_mut(p);
            let (pd, md, vd) = (p.data_mut(), m.data_mut(), v.data_mut());
            for (i, &gi) in g.data().iter().enumerate() {
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * gi;
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * gi * gi;
                let mh = md[i] / c1;
                let vh = vd[i] / c2;
                pd[i] -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
