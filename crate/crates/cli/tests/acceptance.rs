//! End-to-end acceptance checks. Each test writes one `criterion N: PASS|FAIL`
//! line to stderr (uncaptured) before asserting.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use cardioforge_core::autodiff::gradcheck::check_ops;
use cardioforge_core::beats::{
    load_beats, make_synthetic_corpus, save_beats, standardize, BeatDataset, CorpusSpec, Heartbeat, Label,
};
use cardioforge_core::classifier::{check_classifier_gradients, train_classifier, ClassifierConfig};
use cardioforge_core::dynamics::{event_sample_index, integrate, Eta, SimulatorParams, State};
use cardioforge_core::estimate::{
    build_distribution, class_default_eta, fit_many, simulator_only_generate, EtaDistribution, FitOptions,
};
use cardioforge_core::euler_loss::SimDistance;
use cardioforge_core::gan::{self, check_network_gradients, GanConfig, Regime};
use cardioforge_core::metrics::{pr_curve, PrPoint};
use cardioforge_core::report::evaluate_models;
use cardioforge_core::rng::{normal_vec, seeded};
use rand::Rng;

fn verdict(n: u32, pass: bool, detail: &str, started: Instant) {
    let status = if pass { "PASS" } else { "FAIL" };
    let secs = started.elapsed().as_secs_f64();
    // straight to the handle so the line survives output capture
    let _ = writeln!(std::io::stderr(), "criterion {n}: {status} ({detail}; {secs:.1}s)");
}

fn jittered_eta<R: Rng>(rng: &mut R, rel: f64) -> Eta {
    let mut v = Eta::default().to_array();
    for c in &mut v {
        *c *= 1.0 + rng.random_range(-rel..=rel);
    }
    Eta::from_slice(&v).unwrap()
}

#[test]
fn criterion_1_zero_residual_identity() {
    let started = Instant::now();
    let mut rng = seeded(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let params = SimulatorParams::with_eta(jittered_eta(&mut rng, 0.3));
        let z = integrate(&params, State::initial()).unwrap().z();
        let d = SimDistance::new(&params).unwrap();
        worst = worst.max(d.evaluate(&z, &params.eta).unwrap().value);
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = worst < 1e-9 && secs < 2.0;
    verdict(
        1,
        pass,
        &format!("max distance {worst:.2e} over 100 parameter sets"),
        started,
    );
    assert!(pass, "max distance {worst}, {secs}s");
}

fn sim_distance_fd_worst() -> f64 {
    let mut rng = seeded(202);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let params = SimulatorParams::with_eta(jittered_eta(&mut rng, 0.3));
        let d = SimDistance::new(&params).unwrap();
        let h = normal_vec(&mut rng, 216, 0.5);
        let (_, grad) = d.value_and_grad(&h, &params.eta).unwrap();
        let report = cardioforge_core::autodiff::gradcheck::check_input(&h, &grad, |x| {
            d.value_and_grad(x, &params.eta).map(|r| r.0)
        })
        .unwrap();
        worst = worst.max(report.worst);
    }
    worst
}

#[test]
fn criterion_2_gradient_suite() {
    let started = Instant::now();
    let sim = sim_distance_fd_worst();
    let ops = check_ops().unwrap();
    let (op_name, op_worst) = ops
        .iter()
        .fold(("", 0.0f64), |acc, &(n, w)| if w > acc.1 { (n, w) } else { acc });
    let mut nets = Vec::new();
    for regime in [Regime::Dcgan, Regime::Vgan] {
        let cfg = GanConfig {
            regime,
            scale: 0.125,
            ..GanConfig::default()
        };
        nets.push((regime.as_str(), check_network_gradients(&cfg, 7, 6).unwrap()));
    }
    let ccfg = ClassifierConfig {
        scale: 0.125,
        ..ClassifierConfig::default()
    };
    nets.push(("classifier", check_classifier_gradients(&ccfg, 7, 6).unwrap()));
    let net_worst = nets.iter().map(|(_, r)| r.worst).fold(0.0, f64::max);
    let secs = started.elapsed().as_secs_f64();
    let pass = sim < 1e-5 && op_worst < 1e-4 && net_worst < 1e-4 && secs < 60.0;
    let nets_detail: Vec<String> = nets.iter().map(|(n, r)| format!("{n} {:.1e}", r.worst)).collect();
    verdict(
        2,
        pass,
        &format!(
            "distance {sim:.1e}, worst op {op_name} {op_worst:.1e}, {}",
            nets_detail.join(", ")
        ),
        started,
    );
    assert!(pass, "{sim} {op_worst} {nets:?} {secs}s");
}

#[test]
fn criterion_3_morphology() {
    let started = Instant::now();
    let params = SimulatorParams::default();
    let z = integrate(&params, State::initial()).unwrap().z();
    let peak = z
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    // remove the respiratory drift, which is linear in the forcing
    let mut flat = params;
    flat.eta.a = [0.0; 5];
    let wander = integrate(&flat, State::initial()).unwrap().z();
    let wave: Vec<f64> = z.iter().zip(&wander).map(|(a, b)| a - b).collect();
    let mut signs_ok = true;
    let mut found = Vec::new();
    for i in 0..5 {
        let centre = event_sample_index(params.eta.theta[i], &params).round() as isize;
        let turning = (1..wave.len() - 1)
            .filter(|&j| (wave[j] - wave[j - 1]) * (wave[j + 1] - wave[j]) <= 0.0)
            .min_by_key(|&j| (j as isize - centre).abs())
            .unwrap();
        let ext = wave[turning];
        signs_ok &= ext.signum() == params.eta.a[i].signum();
        found.push(format!("{ext:+.3}"));
    }
    let pass = peak.abs_diff(72) <= 5 && signs_ok;
    verdict(
        3,
        pass,
        &format!("R peak at sample {peak}, event extrema {}", found.join(" ")),
        started,
    );
    assert!(pass, "peak {peak}, extrema {found:?}");
}

#[test]
fn criterion_4_parameter_recovery() {
    let started = Instant::now();
    let mut rng = seeded(404);
    let truths: Vec<Eta> = (0..20).map(|_| jittered_eta(&mut rng, 0.1)).collect();
    let beats: Vec<Heartbeat> = truths
        .iter()
        .map(|eta| {
            let z = integrate(&SimulatorParams::with_eta(*eta), State::initial())
                .unwrap()
                .z();
            Heartbeat::new(z, Label::N, "recovery").unwrap()
        })
        .collect();
    let fits = fit_many(&beats, &SimulatorParams::default(), &FitOptions::default()).unwrap();
    let recovered = fits
        .iter()
        .zip(&truths)
        .filter(|(fit, truth)| {
            let got = fit.eta();
            (0..5).all(|i| {
                (got.theta[i] - truth.theta[i]).abs() < 0.05
                    && ((got.a[i] - truth.a[i]) / truth.a[i]).abs() < 0.05
                    && ((got.b[i] - truth.b[i]) / truth.b[i]).abs() < 0.10
            })
        })
        .count();
    let secs = started.elapsed().as_secs_f64();
    let pass = recovered >= 18 && secs < 300.0;
    verdict(4, pass, &format!("{recovered}/20 recovered"), started);
    assert!(pass, "{recovered}/20 in {secs}s");
}

#[test]
fn criterion_5_euler_loss_training_signal() {
    let started = Instant::now();
    let dist = EtaDistribution::relative(Label::V, &class_default_eta(Label::V), 0.05);
    let corpus = make_synthetic_corpus(&CorpusSpec::desk([(0, 0), (0, 0), (200, 0), (0, 0)], 0.05, 0.0, 55)).unwrap();
    let (real, stats) = standardize(corpus.train.beats(), None).unwrap();
    let cfg = GanConfig {
        regime: Regime::SimDcgan,
        scale: 0.25,
        iterations: 2000,
        seed: 5,
        ..GanConfig::default()
    };
    let (_, log) = gan::train(&cfg, &real, Some(&dist), stats).unwrap();
    let probe = |iter: usize| log.records[iter - 1].probe_sim_dist.unwrap();
    let (early, last) = (probe(100), probe(2000));
    let finite = log.records.iter().all(|r| r.loss_d.is_finite());
    let secs = started.elapsed().as_secs_f64();
    let pass = last <= 0.5 * early && finite && secs < 900.0;
    verdict(
        5,
        pass,
        &format!(
            "probe distance {early:.3} at 100, {last:.3} at 2000, ratio {:.3}",
            last / early
        ),
        started,
    );
    assert!(pass, "{early} -> {last}, finite {finite}, {secs}s");
}

const C6_SEEDS: u64 = 5;
const C6_MAJORITY: usize = 400;
const C6_MINORITY: usize = 20;
const C6_MINORITY_CLASS: Label = Label::S;

/// Minority-class auprc of (no generation, SimDCGAN, simulator only).
fn augmentation_run(seed: u64) -> [f64; 3] {
    let mut counts = [(0, 0); 4];
    counts[Label::N.index()] = (C6_MAJORITY, 200);
    counts[C6_MINORITY_CLASS.index()] = (C6_MINORITY, 50);
    let corpus = make_synthetic_corpus(&CorpusSpec::desk(counts, 0.1, 0.05, 600 + seed)).unwrap();
    let minority = corpus.train.of_class(C6_MINORITY_CLASS);

    let opts = FitOptions {
        seed,
        ..FitOptions::default()
    };
    let init = SimulatorParams::with_eta(class_default_eta(C6_MINORITY_CLASS));
    let fits = fit_many(&minority, &init, &opts).unwrap();
    let dist = build_distribution(&fits, C6_MINORITY_CLASS).unwrap();

    let (real, stats) = standardize(&minority, None).unwrap();
    let gcfg = GanConfig {
        regime: Regime::SimDcgan,
        scale: 0.25,
        iterations: 600,
        seed,
        ..GanConfig::default()
    };
    let (mut model, _) = gan::train(&gcfg, &real, Some(&dist), stats).unwrap();
    let from_gan = gan::generate(&mut model, C6_MINORITY, seed).unwrap();
    let from_sim = simulator_only_generate(&dist, C6_MINORITY, 0.0, seed).unwrap();

    let ccfg = ClassifierConfig {
        scale: 0.25,
        seed,
        ..ClassifierConfig::default()
    };
    let (base, _) = train_classifier(&ccfg, &corpus.train, None).unwrap();
    let (with_gan, _) = train_classifier(&ccfg, &corpus.train, Some(&from_gan)).unwrap();
    let (with_sim, _) = train_classifier(&ccfg, &corpus.train, Some(&from_sim)).unwrap();
    let report = evaluate_models(
        &[
            ("baseline".into(), Some(&base)),
            ("sim_dcgan".into(), Some(&with_gan)),
            ("simulator".into(), Some(&with_sim)),
        ],
        &corpus.test,
    )
    .unwrap();
    let area = |r: &str| report.curve(r, C6_MINORITY_CLASS).unwrap().auprc;
    [area("baseline"), area("sim_dcgan"), area("simulator")]
}

#[test]
fn criterion_6_augmentation_benefit() {
    let started = Instant::now();
    let runs: Vec<[f64; 3]> = (0..C6_SEEDS).map(augmentation_run).collect();
    let gan_wins = runs.iter().filter(|r| r[1] >= r[0]).count();
    let sim_wins = runs.iter().filter(|r| r[2] >= r[0]).count();
    let secs = started.elapsed().as_secs_f64();
    let table: Vec<String> = runs
        .iter()
        .map(|r| format!("{:.3}/{:.3}/{:.3}", r[0], r[1], r[2]))
        .collect();
    let pass = gan_wins >= 4 && sim_wins >= 3 && secs < 2700.0;
    verdict(
        6,
        pass,
        &format!(
            "sim_dcgan >= baseline in {gan_wins}/5, simulator in {sim_wins}/5; base/gan/sim auprc {}",
            table.join(" ")
        ),
        started,
    );
    assert!(pass, "{runs:?} {secs}s");
}

fn brute_force(scores: &[f64], truth: &[bool]) -> Vec<PrPoint> {
    let positives = truth.iter().filter(|&&t| t).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    thresholds
        .into_iter()
        .map(|t| {
            let (mut tp, mut fp) = (0.0, 0.0);
            for (s, &y) in scores.iter().zip(truth) {
                if *s >= t {
                    if y {
                        tp += 1.0;
                    } else {
                        fp += 1.0;
                    }
                }
            }
            PrPoint {
                threshold: t,
                recall: tp / positives,
                precision: tp / (tp + fp),
            }
        })
        .collect()
}

#[test]
fn criterion_7_pr_curve_oracle() {
    let started = Instant::now();
    let mut rng = seeded(707);
    let mut equal = 0;
    for _ in 0..50 {
        let n = rng.random_range(1..=100);
        let levels = rng.random_range(1..=20);
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let mut truth: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        truth[rng.random_range(0..n)] = true;
        let curve = pr_curve(Label::S, &scores, &truth).unwrap();
        if curve.points == brute_force(&scores, &truth) {
            equal += 1;
        }
    }
    let pass = equal == 50;
    verdict(7, pass, &format!("{equal}/50 instances equal"), started);
    assert!(pass);
}

fn cardioforge(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_cardioforge"))
        .args(args)
        .env_remove("CARDIOFORGE_SEED")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Every regular file under `dir` except run manifests, with contents.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.toml" {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn pipeline(root: &Path) {
    let p = |s: &str| root.join(s).display().to_string();
    cardioforge(&[
        "simulate",
        "--count",
        "5",
        "--noise",
        "0.02",
        "--seed",
        "3",
        "--out",
        &p("sim"),
    ]);
    cardioforge(&[
        "corpus",
        "--train",
        "30,6,6,0",
        "--test",
        "10,4,4,0",
        "--seed",
        "4",
        "--out",
        &p("corpus"),
    ]);
    cardioforge(&[
        "fit",
        "--beats",
        &p("corpus/train.csv"),
        "--class",
        "S",
        "--max-beats",
        "2",
        "--budget",
        "300",
        "--restarts",
        "0",
        "--out",
        &p("fit"),
    ]);
    cardioforge(&[
        "gan-train",
        "--beats",
        &p("corpus/train.csv"),
        "--class",
        "S",
        "--eta-dist",
        &p("fit/eta.csv"),
        "--regime",
        "sim_dcgan",
        "--iterations",
        "5",
        "--scale",
        "0.125",
        "--seed",
        "8",
        "--out",
        &p("gan"),
    ]);
    cardioforge(&[
        "gan-generate",
        "--model",
        &p("gan"),
        "--count",
        "6",
        "--seed",
        "9",
        "--out",
        &p("gen"),
    ]);
    cardioforge(&[
        "classify",
        "--train",
        &p("corpus/train.csv"),
        "--synth",
        &p("gen/beats.csv"),
        "--epochs",
        "2",
        "--scale",
        "0.125",
        "--out",
        &p("clf"),
    ]);
    cardioforge(&[
        "eval",
        "--model",
        &format!("augmented={}", p("clf")),
        "--test",
        &p("corpus/test.csv"),
        "--out",
        &p("eval"),
    ]);
}

#[test]
fn criterion_8_reproducibility_and_round_trip() {
    let started = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    // absolute paths only appear in manifests, which are excluded
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let identical = !sa.is_empty() && sa == sb;
    for ((na, ca), (_, cb)) in sa.iter().zip(&sb) {
        if ca != cb {
            let _ = writeln!(std::io::stderr(), "differs: {na}");
        }
    }

    let beats = make_synthetic_corpus(&CorpusSpec::desk([(7, 0), (5, 0), (5, 0), (3, 0)], 0.05, 0.02, 8))
        .unwrap()
        .train;
    let mut all = beats.into_beats();
    all.extend(simulator_only_generate(&EtaDistribution::point(Label::N, &Eta::default()), 4, 0.05, 1).unwrap());
    let path = a.path().join("round_trip.csv");
    save_beats(&all, &path).unwrap();
    let lossless = load_beats(&path).unwrap() == all;
    let reloaded = BeatDataset::load_csv(&path, cardioforge_core::beats::Split::Train).unwrap();
    let lossless = lossless && reloaded.beats() == all.as_slice();

    let pass = identical && lossless;
    verdict(
        8,
        pass,
        &format!(
            "{} output files identical across reruns: {identical}; csv lossless: {lossless}",
            sa.len()
        ),
        started,
    );
    assert!(pass);
}
