//! Generator and discriminator architectures.

use rand::Rng;

use super::{GanConfig, Regime};
use crate::autodiff::nn::{BatchNorm1d, Conv1d, ConvTranspose1d, Linear};
use crate::autodiff::{Graph, Mode, ParamStore, Var};
use crate::error::{Error, Result};

pub const LEAK: f64 = 0.2;

fn width(base: f64, scale: f64) -> usize {
    ((base * scale).round() as usize).max(1)
}

fn bn_inputs(store: &ParamStore, layers: &[&str]) -> Vec<String> {
    layers
        .iter()
        .map(|l| format!("{l}.bias"))
        .filter(|b| store.find(b).is_some())
        .collect()
}

#[derive(Debug, Clone)]
enum GenLayers {
    Conv {
        channels0: usize,
        fc: Linear,
        bn0: BatchNorm1d,
        deconvs: Vec<ConvTranspose1d>,
        bns: Vec<BatchNorm1d>,
    },
    Dense {
        layers: Vec<Linear>,
        bns: Vec<BatchNorm1d>,
    },
}

/// Maps `[N, input_dim]` to `[N, beat_len]`.
#[derive(Debug, Clone)]
pub struct Generator {
    layers: GenLayers,
    pub store: ParamStore,
    pub input_dim: usize,
    pub beat_len: usize,
    pub pre_bn_biases: Vec<String>,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(config: &GanConfig, rng: &mut R) -> Result<Self> {
        let mut store = ParamStore::new();
        let input_dim = config.generator_input_dim();
        let layers = if config.regime.is_convolutional() {
            if config.beat_len != 216 {
                return Err(Error::Config("the convolutional generator produces 216 samples".into()));
            }
            let c0 = width(256.0, config.scale);
            let fc = Linear::new(&mut store, "g.fc", input_dim, c0 * 4, rng);
            let bn0 = BatchNorm1d::new(&mut store, "g.bn0", c0);
            let mut deconvs = Vec::new();
            let mut bns = Vec::new();
            let mut c_in = c0;
            for i in 1..=6 {
                let c_out = if i == 6 { 1 } else { (c0 >> i).max(1) };
                let (stride, pad) = if i == 1 { (1, 0) } else { (2, 1) };
                deconvs.push(ConvTranspose1d::new(
                    &mut store,
                    &format!("g.deconv{i}"),
                    c_in,
                    c_out,
                    4,
                    stride,
                    pad,
                    rng,
                ));
                if i < 6 {
                    bns.push(BatchNorm1d::new(&mut store, &format!("g.bn{i}"), c_out));
                }
                c_in = c_out;
            }
            GenLayers::Conv {
                channels0: c0,
                fc,
                bn0,
                deconvs,
                bns,
            }
        } else {
            let w = width(512.0, config.scale);
            let layers = vec![
                Linear::new(&mut store, "g.fc1", input_dim, w, rng),
                Linear::new(&mut store, "g.fc2", w, w, rng),
                Linear::new(&mut store, "g.fc3", w, config.beat_len, rng),
            ];
            let bns = vec![
                BatchNorm1d::new(&mut store, "g.bn1", w),
                BatchNorm1d::new(&mut store, "g.bn2", w),
            ];
            GenLayers::Dense { layers, bns }
        };
        let pre_bn_biases = bn_inputs(
            &store,
            &[
                "g.fc",
                "g.deconv1",
                "g.deconv2",
                "g.deconv3",
                "g.deconv4",
                "g.deconv5",
                "g.fc1",
                "g.fc2",
            ],
        );
        Ok(Generator {
            layers,
            store,
            input_dim,
            beat_len: config.beat_len,
            pre_bn_biases,
        })
    }

    pub fn forward(&mut self, g: &mut Graph, x: Var, mode: Mode) -> Result<Var> {
        let n = g.value(x).shape[0];
        let store = &mut self.store;
        match &self.layers {
            GenLayers::Conv {
                channels0,
                fc,
                bn0,
                deconvs,
                bns,
            } => {
                let h = fc.forward(g, store, x)?;
                let h = g.reshape(h, &[n, *channels0, 4])?;
                let h = bn0.forward(g, store, h, mode)?;
                let mut h = g.relu(h);
                for (i, dc) in deconvs.iter().enumerate() {
                    h = dc.forward(g, store, h)?;
                    // 14 -> 28 overshoots the 27-sample rung of the ladder
                    if i == 2 {
                        h = g.crop(h, 0, 27)?;
                    }
                    if let Some(bn) = bns.get(i) {
                        h = bn.forward(g, store, h, mode)?;
                        h = g.relu(h);
                    }
                }
                g.reshape(h, &[n, self.beat_len])
            }
            GenLayers::Dense { layers, bns } => {
                let mut h = x;
                for (i, l) in layers.iter().enumerate() {
                    h = l.forward(g, store, h)?;
                    if let Some(bn) = bns.get(i) {
                        h = bn.forward(g, store, h, mode)?;
                        h = g.relu(h);
                    }
                }
                Ok(h)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum DiscLayers {
    Conv {
        convs: Vec<Conv1d>,
        bns: Vec<Option<BatchNorm1d>>,
        fc: Linear,
        flat: usize,
    },
    Dense {
        layers: Vec<Linear>,
        bns: Vec<Option<BatchNorm1d>>,
    },
}

/// Maps `[N, beat_len]` to logits `[N, 1]`.
#[derive(Debug, Clone)]
pub struct Discriminator {
    layers: DiscLayers,
    pub store: ParamStore,
    pub beat_len: usize,
    pub pre_bn_biases: Vec<String>,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(config: &GanConfig, rng: &mut R) -> Result<Self> {
        let mut store = ParamStore::new();
        let first_bn = config.disc_first_layer_bn;
        let layers = if config.regime.is_convolutional() {
            let mut c = width(16.0, config.scale);
            let mut c_in = 1;
            let mut len = config.beat_len;
            let mut convs = Vec::new();
            let mut bns = Vec::new();
            for i in 1..=6 {
                let strided = (2..=5).contains(&i);
                if strided {
                    c *= 2;
                }
                let stride = if strided { 2 } else { 1 };
                convs.push(Conv1d::new(
                    &mut store,
                    &format!("d.conv{i}"),
                    c_in,
                    c,
                    5,
                    stride,
                    2,
                    rng,
                ));
                bns.push((i > 1 || first_bn).then(|| BatchNorm1d::new(&mut store, &format!("d.bn{i}"), c)));
                len = (len + 4 - 5) / stride + 1;
                c_in = c;
            }
            let flat = c_in * len;
            let fc = Linear::new(&mut store, "d.fc", flat, 1, rng);
            DiscLayers::Conv { convs, bns, fc, flat }
        } else {
            let w = width(512.0, config.scale);
            let layers = vec![
                Linear::new(&mut store, "d.fc1", config.beat_len, w, rng),
                Linear::new(&mut store, "d.fc2", w, w, rng),
                Linear::new(&mut store, "d.fc3", w, 1, rng),
            ];
            let bns = vec![
                first_bn.then(|| BatchNorm1d::new(&mut store, "d.bn1", w)),
                Some(BatchNorm1d::new(&mut store, "d.bn2", w)),
            ];
            DiscLayers::Dense { layers, bns }
        };
        let mut fed: Vec<String> = (2..=6).map(|i| format!("d.conv{i}")).collect();
        fed.push("d.fc2".into());
        if first_bn {
            fed.extend(["d.conv1".to_string(), "d.fc1".to_string()]);
        }
        let fed: Vec<&str> = fed.iter().map(String::as_str).collect();
        let pre_bn_biases = bn_inputs(&store, &fed);
        Ok(Discriminator {
            layers,
            store,
            beat_len: config.beat_len,
            pre_bn_biases,
        })
    }

    pub fn forward(&mut self, g: &mut Graph, x: Var, mode: Mode) -> Result<Var> {
        let n = g.value(x).shape[0];
        let store = &mut self.store;
        match &self.layers {
            DiscLayers::Conv { convs, bns, fc, flat } => {
                let mut h = g.reshape(x, &[n, 1, self.beat_len])?;
                for (conv, bn) in convs.iter().zip(bns) {
                    h = conv.forward(g, store, h)?;
                    if let Some(bn) = bn {
                        h = bn.forward(g, store, h, mode)?;
                    }
                    h = g.leaky_relu(h, LEAK);
                }
                let h = g.reshape(h, &[n, *flat])?;
                fc.forward(g, store, h)
            }
            DiscLayers::Dense { layers, bns } => {
                let mut h = x;
                for (i, l) in layers.iter().enumerate() {
                    h = l.forward(g, store, h)?;
                    if i < 2 {
                        if let Some(Some(bn)) = bns.get(i) {
                            h = bn.forward(g, store, h, mode)?;
                        }
                        h = g.leaky_relu(h, LEAK);
                    }
                }
                Ok(h)
            }
        }
    }

    /// Probabilities D(h) ∈ (0, 1).
    pub fn probabilities(&mut self, x: &[Vec<f64>], mode: Mode) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let xv = g.input(crate::autodiff::Tensor::from_rows(x)?);
        let logits = self.forward(&mut g, xv, mode)?;
        let p = g.sigmoid(logits);
        Ok(g.value(p).data.clone())
    }
}

impl Regime {
    pub fn is_convolutional(self) -> bool {
        matches!(self, Regime::Dcgan | Regime::SimDcgan | Regime::RefineGan)
    }
}
