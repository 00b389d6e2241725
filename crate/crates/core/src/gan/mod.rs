//! Class-specific GANs. The simulator-guided regimes add the Euler loss of
//! each generated beat to the generator objective.
//!
//! Networks work on standardized beats. The Euler loss is evaluated on the
//! generator output mapped back to simulator units through the training
//! statistics, and its gradient is mapped forward again.

pub mod nets;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::adam::Adam;
use crate::autodiff::checkpoint;
use crate::autodiff::gradcheck::{check_store_where, randomize_for_check, GradCheckReport, LossAndGrads};
use crate::autodiff::{Graph, Mode, Tensor, Var};
use crate::beats::{Heartbeat, Label, Source, Stats};
use crate::dynamics::{SimulatorParams, BEAT_LEN};
use crate::error::{Error, Result};
use crate::estimate::{simulator_only_generate_with, EtaDistribution};
use crate::euler_loss::{euler_loss_with, SimDistance};
use crate::rng::{normal_vec, seeded, substream};
pub use nets::{Discriminator, Generator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Vgan,
    Dcgan,
    SimVgan,
    SimDcgan,
    RefineGan,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::Vgan,
        Regime::Dcgan,
        Regime::SimVgan,
        Regime::SimDcgan,
        Regime::RefineGan,
    ];

    pub fn uses_euler_loss(self) -> bool {
        matches!(self, Regime::SimVgan | Regime::SimDcgan)
    }

    pub fn needs_distribution(self) -> bool {
        matches!(self, Regime::SimVgan | Regime::SimDcgan | Regime::RefineGan)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Vgan => "vgan",
            Regime::Dcgan => "dcgan",
            Regime::SimVgan => "sim_vgan",
            Regime::SimDcgan => "sim_dcgan",
            Regime::RefineGan => "refine_gan",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown regime {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub regime: Regime,
    pub noise_dim: usize,
    pub beat_len: usize,
    /// Width multiplier applied to every layer.
    pub scale: f64,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub g_steps_per_iter: usize,
    pub d_steps_per_iter: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub lambda_eul: f64,
    pub n_eta_samples: usize,
    pub seed: u64,
    /// Batch-normalize the first discriminator layer as well.
    pub disc_first_layer_bn: bool,
    /// Parameter noise of the simulator beats fed to the refining generator.
    pub refine_noise_sigma: f64,
    pub probe_size: usize,
    /// Where parameters are dumped if a loss turns non-finite. Read from
    /// configs but not written back, so saved models stay path-free.
    #[serde(skip_serializing)]
    pub diagnostics_dir: Option<PathBuf>,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            regime: Regime::SimDcgan,
            noise_dim: 100,
            beat_len: BEAT_LEN,
            scale: 0.25,
            lr: 0.0002,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            g_steps_per_iter: 2,
            d_steps_per_iter: 1,
            batch_size: 32,
            iterations: 3000,
            lambda_eul: 1.0,
            n_eta_samples: 1,
            seed: 0,
            disc_first_layer_bn: false,
            refine_noise_sigma: 0.05,
            probe_size: 16,
            diagnostics_dir: None,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.noise_dim == 0 {
            return bad("noise_dim must be at least 1");
        }
        if self.beat_len != BEAT_LEN {
            return bad("beat_len must be 216");
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad("scale must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2)) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2 for batch normalization");
        }
        if self.g_steps_per_iter == 0 || self.d_steps_per_iter == 0 {
            return bad("step counts must be positive");
        }
        if self.n_eta_samples == 0 {
            return bad("n_eta_samples must be at least 1");
        }
        if !(self.lambda_eul >= 0.0 && self.lambda_eul.is_finite()) {
            return bad("lambda_eul must be non-negative");
        }
        if self.probe_size < 2 {
            return bad("probe_size must be at least 2");
        }
        Ok(())
    }

    pub fn generator_input_dim(&self) -> usize {
        if self.regime == Regime::RefineGan {
            self.beat_len
        } else {
            self.noise_dim
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: GanConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// One trained class-specific generator/discriminator pair.
#[derive(Debug, Clone)]
pub struct GanModel {
    pub config: GanConfig,
    pub class_label: Label,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub eta_dist: Option<EtaDistribution>,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub iter: usize,
    pub loss_d: f64,
    pub loss_g_ce: f64,
    /// Absent in regimes without the Euler loss.
    pub loss_g_eul: Option<f64>,
    pub loss_g: f64,
    /// Mean simulator distance of the fixed probe batch, when a parameter
    /// distribution is available.
    pub probe_sim_dist: Option<f64>,
    pub d_steps: u64,
    pub g_steps: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

impl TrainingLog {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(out);
        writeln!(w, "iter,loss_d,loss_g_ce,loss_g_eul,probe_sim_dist")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{},{}",
                r.iter,
                r.loss_d,
                r.loss_g_ce,
                opt(r.loss_g_eul),
                opt(r.probe_sim_dist)
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// L_D = −mean log D(real) − mean log(1 − D(fake)), from logits.
pub fn d_loss(g: &mut Graph, real_logits: Var, fake_logits: Var) -> Result<Var> {
    let nr = g.value(real_logits).numel();
    let nf = g.value(fake_logits).numel();
    let lr = g.bce_with_logits(real_logits, &vec![1.0; nr])?;
    let lf = g.bce_with_logits(fake_logits, &vec![0.0; nf])?;
    g.add(lr, lf)
}

/// Parts of the generator objective.
#[derive(Debug, Clone, Copy)]
pub struct GLoss {
    pub total: Var,
    pub ce: f64,
    pub eul: Option<f64>,
}

/// L_G = −mean log D(fake), plus λ times the Euler loss of `fake` in the
/// simulator-guided regimes. `fake` holds standardized beats `[N, L]`.
#[allow(clippy::too_many_arguments)]
pub fn g_loss<R: Rng + ?Sized>(
    g: &mut Graph,
    fake: Var,
    fake_logits: Var,
    regime: Regime,
    eta_dist: Option<&EtaDistribution>,
    lambda_eul: f64,
    n_eta_samples: usize,
    stats: &Stats,
    rng: &mut R,
) -> Result<GLoss> {
    let n = g.value(fake_logits).numel();
    let ce = g.bce_with_logits(fake_logits, &vec![1.0; n])?;
    let ce_value = g.value(ce).item();
    if !regime.uses_euler_loss() {
        return Ok(GLoss {
            total: ce,
            ce: ce_value,
            eul: None,
        });
    }
    let dist = eta_dist.ok_or_else(|| Error::Config(format!("regime {regime} needs a parameter distribution")))?;
    let batch: Vec<Vec<f64>> = g
        .value(fake)
        .rows()
        .into_iter()
        .map(|row| row.into_iter().map(|v| stats.invert(v)).collect())
        .collect();
    let eul = euler_loss_with(&batch, dist, n_eta_samples, rng)?;
    let grad: Vec<f64> = eul.grads.iter().flatten().map(|d| d * stats.std).collect();
    let e = g.external_loss(fake, eul.value, grad)?;
    let e = g.scale(e, lambda_eul);
    let total = g.add(ce, e)?;
    Ok(GLoss {
        total,
        ce: ce_value,
        eul: Some(eul.value),
    })
}

/// Simulator beats used as generator input by the refining regime, in
/// simulator units. Same draws as [`simulator_only_generate_with`].
pub fn refine_gan_input<R: Rng + ?Sized>(
    eta_dist: &EtaDistribution,
    batch_size: usize,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<Tensor> {
    let beats = simulator_only_generate_with(eta_dist, batch_size, noise_sigma, rng, "refine")?;
    let rows: Vec<Vec<f64>> = beats.into_iter().map(|b| b.samples).collect();
    if rows.is_empty() {
        return Ok(Tensor::zeros(&[0, BEAT_LEN]));
    }
    Tensor::from_rows(&rows)
}

impl GanModel {
    pub fn new(
        config: &GanConfig,
        class_label: Label,
        eta_dist: Option<EtaDistribution>,
        stats: Stats,
    ) -> Result<Self> {
        config.validate()?;
        if config.regime.needs_distribution() && eta_dist.is_none() {
            return Err(Error::Config(format!(
                "regime {} needs a parameter distribution",
                config.regime
            )));
        }
        if let Some(d) = &eta_dist {
            d.validate()?;
        }
        let mut rng = substream(config.seed, 1);
        let generator = Generator::new(config, &mut rng)?;
        let discriminator = Discriminator::new(config, &mut rng)?;
        Ok(GanModel {
            config: config.clone(),
            class_label,
            generator,
            discriminator,
            eta_dist,
            stats,
        })
    }

    /// Generator input batch: Gaussian noise, or standardized simulator beats
    /// for the refining regime.
    fn input_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Tensor> {
        if self.config.regime == Regime::RefineGan {
            let dist = self.eta_dist.as_ref().expect("checked at construction");
            let mut t = refine_gan_input(dist, n, self.config.refine_noise_sigma, rng)?;
            t.data.iter_mut().for_each(|v| *v = self.stats.apply(*v));
            Ok(t)
        } else {
            Tensor::new(
                vec![n, self.config.noise_dim],
                normal_vec(rng, n * self.config.noise_dim, 1.0),
            )
        }
    }

    /// Generator output without touching running statistics.
    pub fn sample_standardized(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut g = Graph::new();
        g.freeze(&self.generator.store);
        let x = g.input(input.clone());
        let out = self.generator.forward(&mut g, x, mode)?;
        Ok(g.value(out).clone())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        checkpoint::save_store(&self.generator.store, &dir.join("generator.bin"))?;
        checkpoint::save_store(&self.discriminator.store, &dir.join("discriminator.bin"))?;
        let meta = ModelMeta {
            class_label: self.class_label.to_string(),
            stats_mean: self.stats.mean,
            stats_std: self.stats.std,
            config: self.config.clone(),
        };
        std::fs::write(
            dir.join("model.toml"),
            toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?,
        )?;
        if let Some(d) = &self.eta_dist {
            EtaDistribution::save(std::slice::from_ref(d), &dir.join("eta.csv"))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("model.toml"))?;
        let meta: ModelMeta = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
        let eta_path = dir.join("eta.csv");
        let eta_dist = if eta_path.exists() {
            EtaDistribution::load(&eta_path)?.into_iter().next()
        } else {
            None
        };
        let stats = Stats {
            mean: meta.stats_mean,
            std: meta.stats_std,
        };
        let mut model = GanModel::new(&meta.config, meta.class_label.parse()?, eta_dist, stats)?;
        checkpoint::load_into(&mut model.generator.store, &dir.join("generator.bin"))?;
        checkpoint::load_into(&mut model.discriminator.store, &dir.join("discriminator.bin"))?;
        Ok(model)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelMeta {
    class_label: String,
    stats_mean: f64,
    stats_std: f64,
    config: GanConfig,
}

fn check_finite(v: f64, step: u64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss {
            step: step as usize,
            what: what.to_string(),
        })
    }
}

fn batch_from(real: &[Heartbeat], idx: &[usize]) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = idx.iter().map(|&i| real[i].samples.clone()).collect();
    Tensor::from_rows(&rows)
}

/// Trains one class-specific GAN on standardized beats of a single class.
/// Each iteration takes the configured number of discriminator steps, then
/// generator steps with fresh noise; the log row reports the last of each.
pub fn train(
    config: &GanConfig,
    real: &[Heartbeat],
    eta_dist: Option<&EtaDistribution>,
    stats: Stats,
) -> Result<(GanModel, TrainingLog)> {
    let first = real
        .first()
        .ok_or_else(|| Error::InvalidArgument("GAN training needs at least one real beat".into()))?;
    let class_label = first.label;
    if real.iter().any(|b| b.label != class_label) {
        return Err(Error::InvalidArgument("GAN training beats must share one class".into()));
    }
    let mut model = GanModel::new(config, class_label, eta_dist.cloned(), stats)?;
    let mut log = TrainingLog::default();
    if config.iterations == 0 {
        return Ok((model, log));
    }

    let mut rng = substream(config.seed, 2);
    let mut euler_rng = substream(config.seed, 3);
    let mut probe_rng = substream(config.seed, 4);
    let probe_input = model.input_batch(config.probe_size, &mut probe_rng)?;
    let probe_eval = match eta_dist {
        Some(d) => Some((SimDistance::new(&SimulatorParams::default())?, d.mean_eta())),
        None => None,
    };

    let mut opt_d = Adam::with_betas(config.lr, config.adam_beta1, config.adam_beta2);
    let mut opt_g = Adam::with_betas(config.lr, config.adam_beta1, config.adam_beta2);
    let bs = config.batch_size;

    for iter in 1..=config.iterations {
        let mut loss_d = f64::NAN;
        for _ in 0..config.d_steps_per_iter {
            let idx: Vec<usize> = (0..bs).map(|_| rng.random_range(0..real.len())).collect();
            let real_batch = batch_from(real, &idx)?;
            let input = model.input_batch(bs, &mut rng)?;
            let fake = model.sample_standardized(&input, Mode::BatchStats)?;

            let mut g = Graph::new();
            let rv = g.input(real_batch);
            let fv = g.input(fake);
            let real_logits = model.discriminator.forward(&mut g, rv, Mode::Train)?;
            let fake_logits = model.discriminator.forward(&mut g, fv, Mode::Train)?;
            let l = d_loss(&mut g, real_logits, fake_logits)?;
            loss_d = g.value(l).item();
            if let Err(e) = check_finite(loss_d, opt_d.steps() + 1, "discriminator loss") {
                dump_diagnostics(config, &model)?;
                return Err(e);
            }
            let grads = g.backward(l)?.for_store(&model.discriminator.store);
            opt_d.step(&mut model.discriminator.store, &grads)?;
        }

        let mut last = None;
        for _ in 0..config.g_steps_per_iter {
            let input = model.input_batch(bs, &mut rng)?;
            let mut g = Graph::new();
            g.freeze(&model.discriminator.store);
            let x = g.input(input);
            let fake = model.generator.forward(&mut g, x, Mode::Train)?;
            let logits = model.discriminator.forward(&mut g, fake, Mode::BatchStats)?;
            let parts = g_loss(
                &mut g,
                fake,
                logits,
                config.regime,
                eta_dist,
                config.lambda_eul,
                config.n_eta_samples,
                &model.stats,
                &mut euler_rng,
            )?;
            let total = g.value(parts.total).item();
            if let Err(e) = check_finite(total, opt_g.steps() + 1, "generator loss") {
                dump_diagnostics(config, &model)?;
                return Err(e);
            }
            let grads = g.backward(parts.total)?.for_store(&model.generator.store);
            opt_g.step(&mut model.generator.store, &grads)?;
            last = Some((parts, total));
        }
        let (parts, total) = last.expect("at least one generator step");

        let probe_sim_dist = match &probe_eval {
            Some((eval, eta)) => {
                let out = model.sample_standardized(&probe_input, Mode::BatchStats)?;
                let mut acc = 0.0;
                let rows = out.rows();
                for row in &rows {
                    let h: Vec<f64> = row.iter().map(|&v| model.stats.invert(v)).collect();
                    acc += eval.value_and_grad(&h, eta)?.0;
                }
                Some(acc / rows.len() as f64)
            }
            None => None,
        };

        log.records.push(LogRecord {
            iter,
            loss_d,
            loss_g_ce: parts.ce,
            loss_g_eul: parts.eul,
            loss_g: total,
            probe_sim_dist,
            d_steps: opt_d.steps(),
            g_steps: opt_g.steps(),
        });
    }
    Ok((model, log))
}

fn dump_diagnostics(config: &GanConfig, model: &GanModel) -> Result<()> {
    if let Some(dir) = &config.diagnostics_dir {
        std::fs::create_dir_all(dir)?;
        checkpoint::save_store(&model.generator.store, &dir.join("generator.bin"))?;
        checkpoint::save_store(&model.discriminator.store, &dir.join("discriminator.bin"))?;
    }
    Ok(())
}

/// Draws `n` beats of the model's class in the units of the training data.
pub fn generate(model: &mut GanModel, n: usize, seed: u64) -> Result<Vec<Heartbeat>> {
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(n);
    const CHUNK: usize = 64;
    while out.len() < n {
        let m = CHUNK.min(n - out.len());
        let input = model.input_batch(m, &mut rng)?;
        let samples = model.sample_standardized(&input, Mode::Eval)?;
        for row in samples.rows() {
            let id = format!("gan:{seed}:{}", out.len());
            let row = row.into_iter().map(|v| model.stats.invert(v)).collect();
            out.push(Heartbeat::with_source(row, model.class_label, Source::Gan, id)?);
        }
    }
    Ok(out)
}

/// Finite-difference check of both networks at a randomized parameter point:
/// the generator through `Σ c·G(z)`, the discriminator through `Σ c·D(h)`.
pub fn check_network_gradients(config: &GanConfig, seed: u64, per_tensor: usize) -> Result<GradCheckReport> {
    let mut rng = seeded(seed);
    let mut gen = Generator::new(config, &mut rng)?;
    let mut disc = Discriminator::new(config, &mut rng)?;
    randomize_for_check(&mut gen.store, &mut rng);
    randomize_for_check(&mut disc.store, &mut rng);
    let n = 3;
    let z = Tensor::new(vec![n, gen.input_dim], normal_vec(&mut rng, n * gen.input_dim, 1.0))?;
    let h = Tensor::new(vec![n, config.beat_len], normal_vec(&mut rng, n * config.beat_len, 1.0))?;
    // unit-scale projections keep the loss O(1) so FD round-off stays below the floor
    let proj_g = normal_vec(
        &mut rng,
        n * config.beat_len,
        1.0 / ((n * config.beat_len) as f64).sqrt(),
    );
    let proj_d = normal_vec(&mut rng, n, 1.0 / (n as f64).sqrt());

    fn projected(g: &mut Graph, y: Var, proj: &[f64]) -> Result<Var> {
        let m = g.value(y).numel();
        let flat = g.reshape(y, &[1, m])?;
        let p = g.input(Tensor::new(vec![1, m], proj.to_vec())?);
        let zero = g.input(Tensor::zeros(&[1]));
        let l = g.linear(flat, p, zero)?;
        Ok(g.sum(l))
    }

    let mut report = GradCheckReport::new();
    for mode in [Mode::BatchStats, Mode::Eval] {
        // batch statistics cancel a bias that feeds straight into batch norm
        let keep_g = |name: &str| mode == Mode::Eval || !gen.pre_bn_biases.iter().any(|b| b == name);
        let keep_g: Vec<bool> = gen.store.ids().map(|id| keep_g(gen.store.name(id))).collect();
        let gen_loss = |gen: &mut Generator, grads: bool| -> Result<LossAndGrads> {
            let mut g = Graph::new();
            let x = g.input(z.clone());
            let y = gen.forward(&mut g, x, mode)?;
            let l = projected(&mut g, y, &proj_g)?;
            let gr = if grads {
                Some(g.backward(l)?.for_store(&gen.store))
            } else {
                None
            };
            Ok((g.value(l).item(), gr))
        };
        let analytic = gen_loss(&mut gen, true)?.1.expect("requested");
        let mut store = std::mem::take(&mut gen.store);
        let names: Vec<String> = store
            .ids()
            .filter(|id| keep_g[id.0])
            .map(|id| store.name(id).to_string())
            .collect();
        let r = check_store_where(
            &mut store,
            &analytic,
            |s| {
                std::mem::swap(&mut gen.store, s);
                let v = gen_loss(&mut gen, false).map(|r| r.0);
                std::mem::swap(&mut gen.store, s);
                v
            },
            per_tensor,
            &mut rng,
            |name| names.iter().any(|k| k == name),
        )?;
        gen.store = store;
        report.merge(r);

        let keep_d: Vec<bool> = disc
            .store
            .ids()
            .map(|id| mode == Mode::Eval || !disc.pre_bn_biases.iter().any(|b| b == disc.store.name(id)))
            .collect();
        let disc_loss = |disc: &mut Discriminator, grads: bool| -> Result<LossAndGrads> {
            let mut g = Graph::new();
            let x = g.input(h.clone());
            let y = disc.forward(&mut g, x, mode)?;
            let l = projected(&mut g, y, &proj_d)?;
            let gr = if grads {
                Some(g.backward(l)?.for_store(&disc.store))
            } else {
                None
            };
            Ok((g.value(l).item(), gr))
        };
        let analytic = disc_loss(&mut disc, true)?.1.expect("requested");
        let mut store = std::mem::take(&mut disc.store);
        let names: Vec<String> = store
            .ids()
            .filter(|id| keep_d[id.0])
            .map(|id| store.name(id).to_string())
            .collect();
        let r = check_store_where(
            &mut store,
            &analytic,
            |s| {
                std::mem::swap(&mut disc.store, s);
                let v = disc_loss(&mut disc, false).map(|r| r.0);
                std::mem::swap(&mut disc.store, s);
                v
            },
            per_tensor,
            &mut rng,
            |name| names.iter().any(|k| k == name),
        )?;
        disc.store = store;
        report.merge(r);
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
