use super::nn::ParamStore;
use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Updates every trainable parameter of `store`. `grads` has one entry
    /// per parameter; a missing gradient counts as zero.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<Vec<f64>>]) -> Result<()> {
        if grads.len() != store.len() {
            return Err(Error::Shape(format!(
                "{} gradients for {} parameters",
                grads.len(),
                store.len()
            )));
        }
        if self.m.is_empty() {
            self.m = store.ids().map(|id| vec![0.0; store.get(id).numel()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != store.len() {
            return Err(Error::Shape("optimizer state belongs to a different network".into()));
        }
        for (id, g) in store.ids().zip(grads) {
            if let Some(g) = g {
                if g.len() != store.get(id).numel() {
                    return Err(Error::Shape(format!(
                        "gradient for {:?} has {} values",
                        store.name(id),
                        g.len()
                    )));
                }
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, id) in store.ids().enumerate().collect::<Vec<_>>() {
            if !store.is_trainable(id) {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let p = &mut store.get_mut(id).data;
            let g = grads[i].as_deref();
            for j in 0..p.len() {
                let gj = g.map_or(0.0, |g| g[j]);
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                p[j] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
