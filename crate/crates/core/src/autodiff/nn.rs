//! Parameter storage and the layers the networks are assembled from.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::{Graph, Mode, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::standard_normal;

/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

static NEXT_TAG: AtomicU64 = AtomicU64::new(1);

#[derive(Debug)]
struct Entry {
    name: String,
    value: Tensor,
    trainable: bool,
}

/// Named tensors of one network. Non-trainable entries hold state such as
/// batch-norm running statistics.
#[derive(Debug)]
pub struct ParamStore {
    tag: u64,
    entries: Vec<Entry>,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl Clone for ParamStore {
    fn clone(&self) -> Self {
        ParamStore {
            tag: NEXT_TAG.fetch_add(1, Ordering::Relaxed),
            entries: self
                .entries
                .iter()
                .map(|e| Entry {
                    name: e.name.clone(),
                    value: e.value.clone(),
                    trainable: e.trainable,
                })
                .collect(),
        }
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            tag: NEXT_TAG.fetch_add(1, Ordering::Relaxed),
            entries: Vec::new(),
        }
    }

    pub(crate) fn tag(&self) -> u64 {
        self.tag
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> ParamId {
        self.entries.push(Entry {
            name: name.into(),
            value,
            trainable,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(|e| e.value.numel())
            .sum()
    }

    /// Replaces values by name; every entry must be present with a matching shape.
    pub fn load_values(&mut self, named: Vec<(String, Tensor)>) -> Result<()> {
        if named.len() != self.entries.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, network has {}",
                named.len(),
                self.entries.len()
            )));
        }
        for (name, t) in named {
            let id = self
                .find(&name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown tensor {name:?}")))?;
            if self.get(id).shape != t.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {name:?} has shape {:?}, expected {:?}",
                    t.shape,
                    self.get(id).shape
                )));
            }
            self.entries[id.0].value = t;
        }
        Ok(())
    }

    pub fn named_values(&self) -> Vec<(String, Tensor)> {
        self.entries.iter().map(|e| (e.name.clone(), e.value.clone())).collect()
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, shape: &[usize]) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in &mut t.data {
        *v = INIT_STD * standard_normal(rng);
    }
    t
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, n_in: usize, n_out: usize, rng: &mut R) -> Self {
        Linear {
            w: store.add(format!("{name}.weight"), gaussian(rng, &[n_out, n_in]), true),
            b: store.add(format!("{name}.bias"), Tensor::zeros(&[n_out]), true),
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let (w, b) = (g.param(store, self.w), g.param(store, self.b));
        g.linear(x, w, b)
    }
}

#[derive(Debug, Clone)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        Conv1d {
            w: store.add(format!("{name}.weight"), gaussian(rng, &[c_out, c_in, k]), true),
            b: store.add(format!("{name}.bias"), Tensor::zeros(&[c_out]), true),
            stride,
            pad,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let (w, b) = (g.param(store, self.w), g.param(store, self.b));
        g.conv1d(x, w, b, self.stride, self.pad)
    }
}

#[derive(Debug, Clone)]
pub struct ConvTranspose1d {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl ConvTranspose1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        ConvTranspose1d {
            w: store.add(format!("{name}.weight"), gaussian(rng, &[c_in, c_out, k]), true),
            b: store.add(format!("{name}.bias"), Tensor::zeros(&[c_out]), true),
            stride,
            pad,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let (w, b) = (g.param(store, self.w), g.param(store, self.b));
        g.conv_transpose1d(x, w, b, self.stride, self.pad)
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
}

impl BatchNorm1d {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Self {
        BatchNorm1d {
            gamma: store.add(format!("{name}.gamma"), Tensor::filled(&[channels], 1.0), true),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[channels]), true),
            running_mean: store.add(format!("{name}.running_mean"), Tensor::zeros(&[channels]), false),
            running_var: store.add(format!("{name}.running_var"), Tensor::filled(&[channels], 1.0), false),
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &mut ParamStore, x: Var, mode: Mode) -> Result<Var> {
        let (gamma, beta) = (g.param(store, self.gamma), g.param(store, self.beta));
        let mut rm = std::mem::take(&mut store.get_mut(self.running_mean).data);
        let mut rv = std::mem::take(&mut store.get_mut(self.running_var).data);
        let out = g.batch_norm(x, gamma, beta, mode, &mut rm, &mut rv);
        store.get_mut(self.running_mean).data = rm;
        store.get_mut(self.running_var).data = rv;
        out
    }
}
