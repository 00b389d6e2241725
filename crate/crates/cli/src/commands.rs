use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cardioforge_core::beats::{
    load_beats, make_synthetic_corpus, save_beats, standardize, BeatDataset, CorpusSpec, Heartbeat, Label, Split,
};
use cardioforge_core::classifier::{train_classifier, Classifier, ClassifierConfig};
use cardioforge_core::dynamics::{Eta, SimulatorParams};
use cardioforge_core::estimate::{
    build_distribution, class_default_eta, fit_many, simulator_only_generate, EtaDistribution, FitOptions, FitResult,
};
use cardioforge_core::gan::{self, GanConfig, GanModel};
use cardioforge_core::report::{evaluate_regimes, RegimeScores};
use cardioforge_core::Error;

use crate::manifest::Run;
use crate::{ClassifyArgs, CorpusArgs, EvalArgs, FitArgs, GanGenerateArgs, GanTrainArgs, SimulateArgs};

pub const SEED_ENV: &str = "CARDIOFORGE_SEED";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_input_error() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_input_beats(path: &Path) -> Result<Vec<Heartbeat>, Failure> {
    if !path.is_file() {
        return Err(Failure::input(format!("{}: no such file", path.display())));
    }
    Ok(load_beats(path)?)
}

/// Flag, then the config file's own `seed` key, then the environment, then 0.
pub fn resolve_seed(flag: Option<u64>, config_text: Option<&str>) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(text) = config_text {
        let table: toml::Table = toml::from_str(text).map_err(|e| Failure::input(format!("config: {e}")))?;
        if let Some(v) = table.get("seed") {
            return v
                .as_integer()
                .and_then(|i| u64::try_from(i).ok())
                .ok_or_else(|| Failure::input("config: seed must be a non-negative integer"));
        }
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::input(format!("{SEED_ENV}={v:?} is not a seed"))),
        Err(_) => Ok(0),
    }
}

fn create_out(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))
}

fn write_with<F>(path: &Path, f: F) -> CmdResult
where
    F: FnOnce(&mut BufWriter<File>) -> cardioforge_core::Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> CmdResult {
    let seed = resolve_seed(a.seed, None)?;
    let mut run = Run::start("simulate", seed);
    let dists = match &a.eta_file {
        Some(p) => {
            if !p.is_file() {
                return Err(Failure::input(format!("{}: no such file", p.display())));
            }
            run.input(p);
            EtaDistribution::load(p)?
        }
        None => vec![EtaDistribution::point(a.class.unwrap_or(Label::N), &Eta::default())],
    };
    let dists: Vec<_> = dists
        .into_iter()
        .filter(|d| a.class.is_none_or(|c| d.class_label == c))
        .collect();
    if dists.is_empty() {
        return Err(Failure::input("no parameter distribution for the requested class"));
    }
    let mut beats = Vec::new();
    for (i, d) in dists.iter().enumerate() {
        beats.extend(simulator_only_generate(
            d,
            a.count,
            a.noise,
            seed.wrapping_add(i as u64),
        )?);
    }
    create_out(&a.out)?;
    save_beats(&beats, &a.out.join("beats.csv"))?;
    run.output("beats.csv");
    run.finish(&a.out)?;
    Ok(())
}

pub fn corpus(a: CorpusArgs) -> CmdResult {
    let seed = resolve_seed(a.seed, None)?;
    let mut run = Run::start("corpus", seed);
    if a.train.len() != 4 || a.test.len() != 4 {
        return Err(Failure::input("--train and --test take four counts, in N,S,V,F order"));
    }
    let mut counts = [(0, 0); 4];
    for (c, (tr, te)) in counts.iter_mut().zip(a.train.iter().zip(&a.test)) {
        *c = (*tr, *te);
    }
    let data = make_synthetic_corpus(&CorpusSpec::desk(counts, a.spread, a.noise, seed))?;
    create_out(&a.out)?;
    data.train.save_csv(&a.out.join("train.csv"))?;
    data.test.save_csv(&a.out.join("test.csv"))?;
    run.output("train.csv");
    run.output("test.csv");
    run.finish(&a.out)?;
    Ok(())
}

pub fn fit(a: FitArgs) -> CmdResult {
    let seed = resolve_seed(a.seed, None)?;
    let mut run = Run::start("fit", seed);
    run.input(&a.beats);
    let mut beats: Vec<Heartbeat> = load_input_beats(&a.beats)?
        .into_iter()
        .filter(|b| b.label == a.class)
        .collect();
    if beats.is_empty() {
        return Err(Failure::input(format!(
            "no beats of class {} in {}",
            a.class,
            a.beats.display()
        )));
    }
    if let Some(m) = a.max_beats {
        beats.truncate(m);
    }
    let defaults = FitOptions::default();
    let opts = FitOptions {
        budget: a.budget.unwrap_or(defaults.budget),
        restarts: a.restarts.unwrap_or(defaults.restarts),
        seed,
        ..defaults
    };
    let init = SimulatorParams::with_eta(class_default_eta(a.class));
    let fits = fit_many(&beats, &init, &opts)?;
    let dist = build_distribution(&fits, a.class)?;
    create_out(&a.out)?;
    write_with(&a.out.join("fits.csv"), |w| FitResult::write_csv(&fits, w))?;
    EtaDistribution::save(std::slice::from_ref(&dist), &a.out.join("eta.csv"))?;
    run.output("fits.csv");
    run.output("eta.csv");
    run.finish(&a.out)?;
    Ok(())
}

fn pick_class(beats: &[Heartbeat], class: Option<Label>) -> Result<Label, Failure> {
    if let Some(c) = class {
        return Ok(c);
    }
    let first = beats.first().ok_or_else(|| Failure::input("beat file is empty"))?.label;
    if beats.iter().any(|b| b.label != first) {
        return Err(Failure::input("beat file holds several classes; pass --class"));
    }
    Ok(first)
}

pub fn gan_train(a: GanTrainArgs) -> CmdResult {
    let text = a.config.as_deref().map(read_input).transpose()?;
    let mut config = match &text {
        Some(t) => GanConfig::from_toml(t)?,
        None => GanConfig::default(),
    };
    config.seed = resolve_seed(a.seed, text.as_deref())?;
    if let Some(r) = a.regime {
        config.regime = r;
    }
    if let Some(n) = a.iterations {
        config.iterations = n;
    }
    if let Some(s) = a.scale {
        config.scale = s;
    }
    if config.diagnostics_dir.is_none() {
        config.diagnostics_dir = Some(a.out.join("diagnostics"));
    }
    config.validate()?;
    let mut run = Run::start("gan-train", config.seed);
    run.config(a.config.as_deref());
    run.input(&a.beats);

    let all = load_input_beats(&a.beats)?;
    let class = pick_class(&all, a.class)?;
    let real: Vec<Heartbeat> = all.into_iter().filter(|b| b.label == class).collect();
    if real.is_empty() {
        return Err(Failure::input(format!("no beats of class {class}")));
    }
    let eta_dist = match &a.eta_dist {
        Some(p) => {
            if !p.is_file() {
                return Err(Failure::input(format!("{}: no such file", p.display())));
            }
            run.input(p);
            let d = EtaDistribution::load(p)?
                .into_iter()
                .find(|d| d.class_label == class)
                .ok_or_else(|| Failure::input(format!("{}: no distribution for class {class}", p.display())))?;
            Some(d)
        }
        None => None,
    };
    let (real, stats) = standardize(&real, None)?;
    create_out(&a.out)?;
    let (model, log) = gan::train(&config, &real, eta_dist.as_ref(), stats)?;
    model.save(&a.out)?;
    write_with(&a.out.join("log.csv"), |w| log.write_csv(w))?;
    for f in ["generator.bin", "discriminator.bin", "model.toml", "log.csv"] {
        run.output(f);
    }
    if eta_dist.is_some() {
        run.output("eta.csv");
    }
    run.finish(&a.out)?;
    Ok(())
}

pub fn gan_generate(a: GanGenerateArgs) -> CmdResult {
    let seed = resolve_seed(a.seed, None)?;
    let mut run = Run::start("gan-generate", seed);
    if !a.model.join("model.toml").is_file() {
        return Err(Failure::input(format!(
            "{}: not a GAN model directory",
            a.model.display()
        )));
    }
    run.input(&a.model);
    let mut model = GanModel::load(&a.model)?;
    let beats = gan::generate(&mut model, a.count, seed)?;
    create_out(&a.out)?;
    save_beats(&beats, &a.out.join("beats.csv"))?;
    run.output("beats.csv");
    run.finish(&a.out)?;
    Ok(())
}

/// Keeps the configured number of synthetic beats per class, or all of
/// them when no augmentation counts are configured.
fn select_synth(
    config: &ClassifierConfig,
    base: &BeatDataset,
    synth: Vec<Heartbeat>,
) -> Result<Vec<Heartbeat>, Failure> {
    if config.augmentation.is_empty() {
        return Ok(synth);
    }
    let mut out = Vec::new();
    for (label, want) in config.augmentation_counts(base) {
        let have: Vec<Heartbeat> = synth.iter().filter(|b| b.label == label).cloned().collect();
        if have.len() < want {
            return Err(Failure::input(format!(
                "class {label} needs {want} synthetic beats, only {} supplied",
                have.len()
            )));
        }
        out.extend(have.into_iter().take(want));
    }
    Ok(out)
}

pub fn classify(a: ClassifyArgs) -> CmdResult {
    let text = a.config.as_deref().map(read_input).transpose()?;
    let mut config = match &text {
        Some(t) => ClassifierConfig::from_toml(t)?,
        None => ClassifierConfig::default(),
    };
    config.seed = resolve_seed(a.seed, text.as_deref())?;
    if let Some(e) = a.epochs {
        config.epochs_phase1 = e;
    }
    if let Some(s) = a.scale {
        config.scale = s;
    }
    if config.diagnostics_dir.is_none() {
        config.diagnostics_dir = Some(a.out.join("diagnostics"));
    }
    config.validate()?;
    let mut run = Run::start("classify", config.seed);
    run.config(a.config.as_deref());
    run.input(&a.train);
    let base = BeatDataset::new(load_input_beats(&a.train)?, Split::Train);
    let mut synth = Vec::new();
    for p in &a.synth {
        run.input(p);
        synth.extend(load_input_beats(p)?);
    }
    let synth = select_synth(&config, &base, synth)?;
    create_out(&a.out)?;
    let (model, log) = train_classifier(&config, &base, Some(&synth))?;
    model.save(&a.out)?;
    write_with(&a.out.join("log.csv"), |w| log.write_csv(w))?;
    for f in ["classifier.bin", "classifier.toml", "log.csv"] {
        run.output(f);
    }
    run.finish(&a.out)?;
    Ok(())
}

fn named(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) => (name.to_string(), PathBuf::from(path)),
        None => {
            let path = PathBuf::from(spec);
            let name = path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            (name, path)
        }
    }
}

fn read_scores(path: &Path) -> Result<Vec<[f64; 4]>, Failure> {
    let text = read_input(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header.trim() != "p_N,p_S,p_V,p_F" {
        return Err(Failure::input(format!(
            "{}: expected header p_N,p_S,p_V,p_F",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = || Failure::input(format!("{}:{}: expected four numbers", path.display(), i + 2));
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        out.push(vals.try_into().map_err(|_| bad())?);
    }
    Ok(out)
}

fn write_scores(path: &Path, probs: &[[f64; 4]]) -> CmdResult {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "p_N,p_S,p_V,p_F")?;
    for p in probs {
        writeln!(w, "{},{},{},{}", p[0], p[1], p[2], p[3])?;
    }
    w.flush()?;
    Ok(())
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let mut run = Run::start("eval", 0);
    if a.model.is_empty() && a.scores.is_empty() {
        return Err(Failure::input("pass at least one --model or --scores"));
    }
    run.input(&a.test);
    let test = load_input_beats(&a.test)?;
    let labels: Vec<Label> = test.iter().map(|b| b.label).collect();
    let rows: Vec<Vec<f64>> = test.iter().map(|b| b.samples.clone()).collect();

    let mut entries = Vec::new();
    let mut fresh = Vec::new();
    for spec in &a.model {
        let (name, dir) = named(spec);
        let probs = if dir.join("classifier.toml").is_file() {
            run.input(&dir);
            let p = Classifier::load(&dir)?.predict_proba(&rows)?;
            fresh.push((name.clone(), p.clone()));
            Some(p)
        } else {
            None
        };
        entries.push(RegimeScores { regime: name, probs });
    }
    for spec in &a.scores {
        let (name, file) = named(spec);
        let probs = if file.is_file() {
            run.input(&file);
            let p = read_scores(&file)?;
            if p.len() != labels.len() {
                return Err(Failure::input(format!(
                    "{}: {} rows for {} test beats",
                    file.display(),
                    p.len(),
                    labels.len()
                )));
            }
            Some(p)
        } else {
            None
        };
        entries.push(RegimeScores { regime: name, probs });
    }
    let report = evaluate_regimes(&entries, &labels, &Label::ALL)?;
    create_out(&a.out)?;
    report.write(&a.out)?;
    run.output("summary.txt");
    run.output("curves/");
    if !fresh.is_empty() {
        std::fs::create_dir_all(a.out.join("scores"))?;
        for (name, p) in &fresh {
            write_scores(&a.out.join("scores").join(format!("{name}.csv")), p)?;
        }
        run.output("scores/");
    }
    print!("{}", report.summary());
    run.finish(&a.out)?;
    Ok(())
}
