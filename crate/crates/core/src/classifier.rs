//! Residual 1-D convolutional heartbeat classifier and its two-phase
//! training: first on real beats until the loss plateaus, then on real plus
//! synthetic beats.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::adam::Adam;
use crate::autodiff::checkpoint;
use crate::autodiff::gradcheck::{check_store, randomize_for_check, GradCheckReport, LossAndGrads};
use crate::autodiff::nn::{Conv1d, Linear, ParamStore};
use crate::autodiff::{softmax_in_place, Graph, Tensor, Var};
use crate::beats::{BeatDataset, Heartbeat, Label, Source, Split, Stats};
use crate::dynamics::BEAT_LEN;
use crate::error::{Error, Result};
use crate::rng::{normal_vec, seeded, standard_normal, substream};

/// Allowed augmentation multiples of a class's real beat count.
pub const AUGMENTATION_GRID: [f64; 7] = [0.1, 0.3, 0.5, 0.8, 1.0, 1.5, 2.0];

const POOL: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub n_blocks: usize,
    pub kernels_per_conv: usize,
    pub kernel_size: usize,
    pub fc_width: usize,
    pub n_classes: usize,
    pub scale: f64,
    pub lr: f64,
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Synthetic beats per class, as a multiple of that class's real count.
    pub augmentation: BTreeMap<Label, f64>,
    pub early_stop_delta: f64,
    pub early_stop_patience: usize,
    #[serde(skip_serializing)]
    pub diagnostics_dir: Option<PathBuf>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            n_blocks: 5,
            kernels_per_conv: 32,
            kernel_size: 5,
            fc_width: 32,
            n_classes: 4,
            scale: 1.0,
            lr: 1e-3,
            epochs_phase1: 50,
            epochs_phase2: 20,
            batch_size: 32,
            seed: 0,
            augmentation: BTreeMap::new(),
            early_stop_delta: 1e-4,
            early_stop_patience: 5,
            diagnostics_dir: None,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_classes != 4 {
            return bad("n_classes must be 4");
        }
        if self.kernel_size.is_multiple_of(2) || self.kernel_size == 0 {
            return bad("kernel_size must be odd");
        }
        if self.kernels_per_conv == 0 || self.fc_width == 0 || self.batch_size == 0 {
            return bad("widths and batch_size must be positive");
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) || !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("scale and lr must be positive");
        }
        if BEAT_LEN >> self.n_blocks == 0 {
            return bad("too many pooling blocks for a 216-sample beat");
        }
        for (label, m) in &self.augmentation {
            if !AUGMENTATION_GRID.iter().any(|g| (g - m).abs() < 1e-12) {
                return Err(Error::Config(format!(
                    "augmentation multiple {m} for class {label} is not one of {AUGMENTATION_GRID:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        ((self.kernels_per_conv as f64 * self.scale).round() as usize).max(1)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ClassifierConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Synthetic beats to request per class given the real training set.
    pub fn augmentation_counts(&self, base: &BeatDataset) -> BTreeMap<Label, usize> {
        self.augmentation
            .iter()
            .map(|(&label, &m)| (label, (m * base.count(label) as f64).round() as usize))
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Block {
    conv1: Conv1d,
    conv2: Conv1d,
}

#[derive(Debug, Clone)]
pub struct Classifier {
    pub config: ClassifierConfig,
    pub stats: Stats,
    pub store: ParamStore,
    stem: Conv1d,
    blocks: Vec<Block>,
    fc1: Linear,
    fc2: Linear,
    out: Linear,
    flat: usize,
}

impl Classifier {
    pub fn new(config: &ClassifierConfig, stats: Stats) -> Result<Self> {
        config.validate()?;
        let mut rng = substream(config.seed, 1);
        let mut store = ParamStore::new();
        let c = config.width();
        let (k, pad) = (config.kernel_size, config.kernel_size / 2);
        let stem = Conv1d::new(&mut store, "c.stem", 1, c, k, 1, pad, &mut rng);
        let mut blocks = Vec::new();
        let mut len = BEAT_LEN;
        for i in 1..=config.n_blocks {
            blocks.push(Block {
                conv1: Conv1d::new(&mut store, &format!("c.block{i}.conv1"), c, c, k, 1, pad, &mut rng),
                conv2: Conv1d::new(&mut store, &format!("c.block{i}.conv2"), c, c, k, 1, pad, &mut rng),
            });
            len /= POOL;
        }
        let flat = c * len;
        let fc1 = Linear::new(&mut store, "c.fc1", flat, config.fc_width, &mut rng);
        let fc2 = Linear::new(&mut store, "c.fc2", config.fc_width, config.fc_width, &mut rng);
        let out = Linear::new(&mut store, "c.out", config.fc_width, config.n_classes, &mut rng);
        // no normalization layers here, so weights start at 1/sqrt(fan_in)
        // rather than the small fixed scale the GAN uses
        for id in store.ids().collect::<Vec<_>>() {
            let t = store.get_mut(id);
            if t.shape.len() >= 2 {
                let std = 1.0 / (t.shape[1..].iter().product::<usize>() as f64).sqrt();
                t.data.iter_mut().for_each(|v| *v = std * standard_normal(&mut rng));
            }
        }
        Ok(Classifier {
            config: config.clone(),
            stats,
            store,
            stem,
            blocks,
            fc1,
            fc2,
            out,
            flat,
        })
    }

    /// Logits `[N, n_classes]` for standardized input `[N, 216]`.
    pub fn logits(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let n = g.value(x).shape[0];
        let s = &self.store;
        let h = g.reshape(x, &[n, 1, BEAT_LEN])?;
        let h = self.stem.forward(g, s, h)?;
        let mut h = g.relu(h);
        for b in &self.blocks {
            let y = b.conv1.forward(g, s, h)?;
            let y = g.relu(y);
            let y = b.conv2.forward(g, s, y)?;
            let y = g.relu(y);
            let y = g.max_pool1d(y, POOL, POOL)?;
            let skip = g.max_pool1d(h, POOL, POOL)?;
            h = g.add(y, skip)?;
        }
        let h = g.reshape(h, &[n, self.flat])?;
        let h = self.fc1.forward(g, s, h)?;
        let h = g.relu(h);
        let h = self.fc2.forward(g, s, h)?;
        let h = g.relu(h);
        self.out.forward(g, s, h)
    }

    fn input(&self, beats: &[&[f64]]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(beats.len() * BEAT_LEN);
        for b in beats {
            if b.len() != BEAT_LEN {
                return Err(Error::LengthMismatch {
                    expected: BEAT_LEN,
                    actual: b.len(),
                });
            }
            data.extend(b.iter().map(|&v| self.stats.apply(v)));
        }
        Tensor::new(vec![beats.len(), BEAT_LEN], data)
    }

    /// Class probabilities for raw (unstandardized) beats.
    pub fn predict_proba(&self, beats: &[Vec<f64>]) -> Result<Vec<[f64; 4]>> {
        let mut out = Vec::with_capacity(beats.len());
        for chunk in beats.chunks(256) {
            let refs: Vec<&[f64]> = chunk.iter().map(Vec::as_slice).collect();
            let mut g = Graph::new();
            let x = g.input(self.input(&refs)?);
            let l = self.logits(&mut g, x)?;
            for row in g.value(l).rows() {
                let mut p = [0.0; 4];
                p.copy_from_slice(&row);
                softmax_in_place(&mut p);
                out.push(p);
            }
        }
        Ok(out)
    }

    pub fn predict_beats(&self, beats: &[Heartbeat]) -> Result<Vec<[f64; 4]>> {
        let rows: Vec<Vec<f64>> = beats.iter().map(|b| b.samples.clone()).collect();
        self.predict_proba(&rows)
    }

    pub fn accuracy(&self, beats: &[Heartbeat]) -> Result<f64> {
        if beats.is_empty() {
            return Ok(0.0);
        }
        let p = self.predict_beats(beats)?;
        let hits = p
            .iter()
            .zip(beats)
            .filter(|(p, b)| argmax(&p[..]) == b.label.index())
            .count();
        Ok(hits as f64 / beats.len() as f64)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        checkpoint::save_store(&self.store, &dir.join("classifier.bin"))?;
        let meta = ClassifierMeta {
            stats_mean: self.stats.mean,
            stats_std: self.stats.std,
            config: self.config.clone(),
        };
        std::fs::write(
            dir.join("classifier.toml"),
            toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?,
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("classifier.toml"))?;
        let meta: ClassifierMeta =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
        let stats = Stats {
            mean: meta.stats_mean,
            std: meta.stats_std,
        };
        let mut model = Classifier::new(&meta.config, stats)?;
        checkpoint::load_into(&mut model.store, &dir.join("classifier.bin"))?;
        Ok(model)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassifierMeta {
    stats_mean: f64,
    stats_std: f64,
    config: ClassifierConfig,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub phase: u8,
    pub epoch: usize,
    pub loss: f64,
    /// Accuracy of the minibatch predictions made during the epoch.
    pub accuracy: f64,
    pub n_beats: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifierLog {
    pub epochs: Vec<EpochRecord>,
}

impl ClassifierLog {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "phase,epoch,loss,accuracy,n_beats")?;
        for r in &self.epochs {
            writeln!(out, "{},{},{},{},{}", r.phase, r.epoch, r.loss, r.accuracy, r.n_beats)?;
        }
        Ok(())
    }

    pub fn phase(&self, phase: u8) -> impl Iterator<Item = &EpochRecord> {
        self.epochs.iter().filter(move |r| r.phase == phase)
    }
}

struct Plateau {
    best: f64,
    since: usize,
    delta: f64,
    patience: usize,
}

impl Plateau {
    fn new(delta: f64, patience: usize) -> Self {
        Plateau {
            best: f64::INFINITY,
            since: 0,
            delta,
            patience,
        }
    }

    /// True once `patience` epochs pass without improving on the best loss by `delta`.
    fn update(&mut self, loss: f64) -> bool {
        if loss < self.best - self.delta {
            self.best = loss;
            self.since = 0;
        } else {
            self.since += 1;
        }
        self.patience > 0 && self.since >= self.patience
    }
}

/// Trains on `base` until the loss plateaus (phase 1), then, if `synth` is
/// non-empty, continues on `base` plus `synth` (phase 2).
///
/// Synthetic beats must come from a generator or the simulator; real beats
/// can only enter through `base`, which must be a training split.
pub fn train_classifier(
    config: &ClassifierConfig,
    base: &BeatDataset,
    synth: Option<&[Heartbeat]>,
) -> Result<(Classifier, ClassifierLog)> {
    config.validate()?;
    if base.split() != Split::Train {
        return Err(Error::Split("classifier training requires the train split".into()));
    }
    if base.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let synth = synth.unwrap_or(&[]);
    if let Some(b) = synth.iter().find(|b| b.source == Source::Real) {
        return Err(Error::Split(format!(
            "synthetic set contains recorded beat {:?}",
            b.record_id
        )));
    }
    let stats = Stats::compute(base.beats())?;
    let mut model = Classifier::new(config, stats)?;
    let mut opt = Adam::new(config.lr);
    let mut rng = substream(config.seed, 2);
    let mut log = ClassifierLog::default();

    let real: Vec<&Heartbeat> = base.beats().iter().collect();
    run_phase(&mut model, &mut opt, &mut rng, &real, 1, config.epochs_phase1, &mut log)?;
    if !synth.is_empty() {
        let all: Vec<&Heartbeat> = real.iter().copied().chain(synth.iter()).collect();
        run_phase(&mut model, &mut opt, &mut rng, &all, 2, config.epochs_phase2, &mut log)?;
    }
    Ok((model, log))
}

fn run_phase<R: Rng>(
    model: &mut Classifier,
    opt: &mut Adam,
    rng: &mut R,
    beats: &[&Heartbeat],
    phase: u8,
    epochs: usize,
    log: &mut ClassifierLog,
) -> Result<()> {
    let cfg = model.config.clone();
    let mut plateau = Plateau::new(cfg.early_stop_delta, cfg.early_stop_patience);
    let mut order: Vec<usize> = (0..beats.len()).collect();
    for epoch in 1..=epochs {
        order.shuffle(rng);
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for idx in order.chunks(cfg.batch_size) {
            let rows: Vec<&[f64]> = idx.iter().map(|&i| beats[i].samples.as_slice()).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| beats[i].label.index()).collect();
            let mut g = Graph::new();
            let x = g.input(model.input(&rows)?);
            let logits = model.logits(&mut g, x)?;
            let l = g.softmax_cross_entropy(logits, &labels)?;
            let loss = g.value(l).item();
            if !loss.is_finite() {
                if let Some(dir) = &cfg.diagnostics_dir {
                    std::fs::create_dir_all(dir)?;
                    checkpoint::save_store(&model.store, &dir.join("classifier.bin"))?;
                }
                return Err(Error::NonFiniteLoss {
                    step: opt.steps() as usize + 1,
                    what: "classifier loss".into(),
                });
            }
            hits += g
                .value(logits)
                .rows()
                .iter()
                .zip(&labels)
                .filter(|(r, &y)| argmax(r) == y)
                .count();
            loss_sum += loss * idx.len() as f64;
            let grads = g.backward(l)?.for_store(&model.store);
            opt.step(&mut model.store, &grads)?;
        }
        let loss = loss_sum / beats.len() as f64;
        log.epochs.push(EpochRecord {
            phase,
            epoch,
            loss,
            accuracy: hits as f64 / beats.len() as f64,
            n_beats: beats.len(),
        });
        if plateau.update(loss) {
            break;
        }
    }
    Ok(())
}

/// Finite-difference check of every classifier parameter on a random batch.
pub fn check_classifier_gradients(config: &ClassifierConfig, seed: u64, per_tensor: usize) -> Result<GradCheckReport> {
    let mut rng = seeded(seed);
    let mut model = Classifier::new(config, Stats::identity())?;
    randomize_for_check(&mut model.store, &mut rng);
    let n = 3;
    let x = Tensor::new(vec![n, BEAT_LEN], normal_vec(&mut rng, n * BEAT_LEN, 1.0))?;
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..config.n_classes)).collect();
    let eval = |m: &Classifier, grads: bool| -> Result<LossAndGrads> {
        let mut g = Graph::new();
        let xv = g.input(x.clone());
        let logits = m.logits(&mut g, xv)?;
        let l = g.softmax_cross_entropy(logits, &labels)?;
        let gr = if grads {
            Some(g.backward(l)?.for_store(&m.store))
        } else {
            None
        };
        Ok((g.value(l).item(), gr))
    };
    let analytic = eval(&model, true)?.1.expect("requested");
    let mut store = std::mem::take(&mut model.store);
    let report = check_store(
        &mut store,
        &analytic,
        |s| {
            std::mem::swap(&mut model.store, s);
            let v = eval(&model, false).map(|r| r.0);
            std::mem::swap(&mut model.store, s);
            v
        },
        per_tensor,
        &mut rng,
    )?;
    Ok(report)
}
