use super::*;
use crate::dynamics::{integrate, Eta, State};
use crate::estimate::simulator_only_generate;
use crate::euler_loss::euler_loss;

fn small(regime: Regime) -> GanConfig {
    GanConfig {
        regime,
        scale: 0.125,
        batch_size: 8,
        iterations: 3,
        probe_size: 4,
        seed: 11,
        ..GanConfig::default()
    }
}

fn sim_beats(label: Label, n: usize, seed: u64) -> (Vec<Heartbeat>, EtaDistribution, Stats) {
    let dist = EtaDistribution::relative(label, &Eta::default(), 0.05);
    let raw = simulator_only_generate(&dist, n, 0.0, seed).unwrap();
    let (std, stats) = crate::beats::standardize(&raw, None).unwrap();
    (std, dist, stats)
}

#[test]
fn generator_shapes_and_determinism() {
    for regime in [Regime::Dcgan, Regime::Vgan] {
        let cfg = small(regime);
        let mut a = GanModel::new(&cfg, Label::N, None, Stats::identity()).unwrap();
        let mut b = GanModel::new(&cfg, Label::N, None, Stats::identity()).unwrap();
        let z = Tensor::new(vec![4, 100], normal_vec(&mut seeded(1), 400, 1.0)).unwrap();
        let ya = a.sample_standardized(&z, Mode::BatchStats).unwrap();
        let yb = b.sample_standardized(&z, Mode::BatchStats).unwrap();
        assert_eq!(ya.shape, vec![4, 216]);
        assert_eq!(ya, yb);
        let rows = ya.rows();
        assert_ne!(rows[0], rows[1]);
    }
}

#[test]
fn discriminator_range_and_init_mean() {
    let cfg = small(Regime::Dcgan);
    let mut model = GanModel::new(&cfg, Label::N, None, Stats::identity()).unwrap();
    let mut rng = seeded(2);
    let x: Vec<Vec<f64>> = (0..8).map(|_| normal_vec(&mut rng, 216, 1.0)).collect();
    let p = model.discriminator.probabilities(&x, Mode::BatchStats).unwrap();
    assert_eq!(p.len(), 8);
    assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));

    let mut total = 0.0;
    for _ in 0..10 {
        let x: Vec<Vec<f64>> = (0..100).map(|_| normal_vec(&mut rng, 216, 1.0)).collect();
        total += model
            .discriminator
            .probabilities(&x, Mode::BatchStats)
            .unwrap()
            .iter()
            .sum::<f64>();
    }
    let mean = total / 1000.0;
    assert!((mean - 0.5).abs() < 0.2, "{mean}");
}

#[test]
fn d_loss_examples() {
    let mut g = Graph::new();
    let zero = g.input(Tensor::zeros(&[4, 1]));
    let l = d_loss(&mut g, zero, zero).unwrap();
    assert!((g.value(l).item() - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);

    let hi = g.input(Tensor::filled(&[4, 1], 40.0));
    let lo = g.input(Tensor::filled(&[4, 1], -40.0));
    let l = d_loss(&mut g, hi, lo).unwrap();
    assert!(g.value(l).item() < 1e-15);

    let r = [0.3, -1.2, 2.0];
    let f = [-0.5, 0.8];
    let rv = g.input(Tensor::new(vec![3, 1], r.to_vec()).unwrap());
    let fv = g.input(Tensor::new(vec![2, 1], f.to_vec()).unwrap());
    let l = d_loss(&mut g, rv, fv).unwrap();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let want =
        -r.iter().map(|&v| sig(v).ln()).sum::<f64>() / 3.0 - f.iter().map(|&v| (1.0 - sig(v)).ln()).sum::<f64>() / 2.0;
    assert!((g.value(l).item() - want).abs() < 1e-14);
}

#[test]
fn g_loss_examples() {
    let mut rng = seeded(3);
    let mut g = Graph::new();
    let fake = g.input(Tensor::zeros(&[2, 216]));
    let logits = g.input(Tensor::zeros(&[2, 1]));
    let l = g_loss(
        &mut g,
        fake,
        logits,
        Regime::Dcgan,
        None,
        1.0,
        1,
        &Stats::identity(),
        &mut rng,
    )
    .unwrap();
    assert!((g.value(l.total).item() - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(l.eul.is_none());
    assert!(matches!(
        g_loss(
            &mut g,
            fake,
            logits,
            Regime::SimDcgan,
            None,
            1.0,
            1,
            &Stats::identity(),
            &mut rng
        ),
        Err(Error::Config(_))
    ));

    // exact simulator beats in standardized units, zero-variance distribution
    let z = integrate(&SimulatorParams::default(), State::initial()).unwrap().z();
    let stats = Stats { mean: 0.01, std: 0.02 };
    let rows: Vec<Vec<f64>> = (0..2).map(|_| z.iter().map(|&v| stats.apply(v)).collect()).collect();
    let exact = g.input(Tensor::from_rows(&rows).unwrap());
    let point = EtaDistribution::point(Label::N, &Eta::default());
    let l = g_loss(
        &mut g,
        exact,
        logits,
        Regime::SimDcgan,
        Some(&point),
        1.0,
        1,
        &stats,
        &mut rng,
    )
    .unwrap();
    assert!(l.eul.unwrap() < 1e-9);
    assert!((g.value(l.total).item() - std::f64::consts::LN_2).abs() < 1e-9);

    // random batch: CE + λ·(Euler loss module on the de-standardized rows)
    let dist = EtaDistribution::relative(Label::N, &Eta::default(), 0.1);
    let rows: Vec<Vec<f64>> = (0..3).map(|_| normal_vec(&mut rng, 216, 1.0)).collect();
    let fake = g.input(Tensor::from_rows(&rows).unwrap());
    let logits = g.input(Tensor::new(vec![3, 1], vec![0.2, -0.4, 1.0]).unwrap());
    let l = g_loss(
        &mut g,
        fake,
        logits,
        Regime::SimVgan,
        Some(&dist),
        0.3,
        2,
        &stats,
        &mut seeded(77),
    )
    .unwrap();
    let back: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| stats.invert(v)).collect())
        .collect();
    let want_eul = euler_loss(&back, &dist, 2, 77).unwrap().value;
    assert_eq!(l.eul.unwrap(), want_eul);
    let total = g.value(l.total).item();
    assert!((total - (l.ce + 0.3 * want_eul)).abs() <= 1e-12 * total.abs());
}

#[test]
fn euler_gradient_reaches_generator_output() {
    let mut rng = seeded(4);
    let stats = Stats { mean: 0.01, std: 0.02 };
    let dist = EtaDistribution::point(Label::N, &Eta::default());
    let row = normal_vec(&mut rng, 216, 1.0);
    let mut g = Graph::new();
    let fake = g.variable(Tensor::from_rows(std::slice::from_ref(&row)).unwrap());
    let logits = g.input(Tensor::zeros(&[1, 1]));
    let l = g_loss(
        &mut g,
        fake,
        logits,
        Regime::SimDcgan,
        Some(&dist),
        1.0,
        1,
        &stats,
        &mut rng,
    )
    .unwrap();
    let grad = g.backward(l.total).unwrap().wrt(fake).unwrap().to_vec();
    let report = crate::autodiff::gradcheck::check_input(&row, &grad, |x| {
        let h: Vec<f64> = x.iter().map(|&v| stats.invert(v)).collect();
        Ok(crate::euler_loss::sim_distance(&h, &SimulatorParams::default())?.value + std::f64::consts::LN_2)
    })
    .unwrap();
    assert!(report.worst < 1e-5, "{report:?}");
}

#[test]
fn zero_iterations_returns_fresh_model() {
    let (real, dist, stats) = sim_beats(Label::V, 10, 1);
    let cfg = GanConfig {
        iterations: 0,
        ..small(Regime::SimDcgan)
    };
    let (_, log) = train(&cfg, &real, Some(&dist), stats).unwrap();
    assert!(log.records.is_empty());
}

#[test]
fn training_is_reproducible_and_logged() {
    let (real, dist, stats) = sim_beats(Label::V, 20, 2);
    for regime in Regime::ALL {
        let cfg = small(regime);
        let (_, a) = train(&cfg, &real, Some(&dist), stats).unwrap();
        let (_, b) = train(&cfg, &real, Some(&dist), stats).unwrap();
        assert_eq!(a, b, "{regime}");
        assert_eq!(a.records.len(), 3);
        for (k, r) in a.records.iter().enumerate() {
            assert_eq!(r.iter, k + 1);
            assert_eq!(r.d_steps, (k + 1) as u64);
            assert_eq!(r.g_steps, 2 * (k + 1) as u64);
            assert!(r.loss_d.is_finite());
            match r.loss_g_eul {
                Some(e) => {
                    assert!(regime.uses_euler_loss());
                    assert!((r.loss_g - (r.loss_g_ce + cfg.lambda_eul * e)).abs() <= 1e-12 * r.loss_g.abs());
                }
                None => {
                    assert!(!regime.uses_euler_loss());
                    assert_eq!(r.loss_g, r.loss_g_ce);
                }
            }
            assert!(r.probe_sim_dist.is_some());
        }
    }
}

#[test]
fn sim_regime_without_distribution_is_rejected() {
    let (real, _, stats) = sim_beats(Label::V, 4, 3);
    assert!(matches!(
        train(&small(Regime::SimVgan), &real, None, stats),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        train(&small(Regime::RefineGan), &real, None, stats),
        Err(Error::Config(_))
    ));
    let (_, log) = train(&small(Regime::Dcgan), &real, None, stats).unwrap();
    assert!(log
        .records
        .iter()
        .all(|r| r.probe_sim_dist.is_none() && r.loss_g_eul.is_none()));
}

#[test]
fn mixed_classes_are_rejected() {
    let (mut real, dist, stats) = sim_beats(Label::V, 4, 3);
    real[1].label = Label::N;
    assert!(train(&small(Regime::SimDcgan), &real, Some(&dist), stats).is_err());
}

#[test]
fn generate_examples() {
    let (real, dist, stats) = sim_beats(Label::S, 16, 4);
    let (mut model, _) = train(&small(Regime::SimDcgan), &real, Some(&dist), stats).unwrap();
    assert!(generate(&mut model, 0, 1).unwrap().is_empty());
    let a = generate(&mut model, 100, 5).unwrap();
    let b = generate(&mut model, 100, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 100);
    assert!(a
        .iter()
        .all(|h| h.samples.len() == 216 && h.samples.iter().all(|v| v.is_finite())));
    assert!(a.iter().all(|h| h.label == Label::S && h.source == Source::Gan));

    // output is in the units of the training data
    model.stats = Stats { mean: 5.0, std: 1e-3 };
    let shifted = generate(&mut model, 3, 5).unwrap();
    for (s, a) in shifted.iter().zip(&a) {
        for (x, y) in s.samples.iter().zip(&a.samples) {
            let z = (y - stats.mean) / stats.std;
            assert!((x - (5.0 + 1e-3 * z)).abs() < 1e-9);
        }
    }
}

#[test]
fn refine_input_examples() {
    let point = EtaDistribution::point(Label::N, &Eta::default());
    let t = refine_gan_input(&point, 5, 0.0, &mut seeded(1)).unwrap();
    assert_eq!(t.shape, vec![5, 216]);
    let z = integrate(&SimulatorParams::default(), State::initial()).unwrap().z();
    assert!(t.rows().iter().all(|r| *r == z));

    let dist = EtaDistribution::relative(Label::N, &Eta::default(), 0.1);
    let t = refine_gan_input(&dist, 6, 0.05, &mut seeded(9)).unwrap();
    let sim = simulator_only_generate(&dist, 6, 0.05, 9).unwrap();
    for (row, beat) in t.rows().iter().zip(&sim) {
        assert_eq!(row, &beat.samples);
    }
}

#[test]
fn save_and_load_round_trip() {
    let (real, dist, stats) = sim_beats(Label::F, 12, 5);
    let (mut model, _) = train(&small(Regime::SimVgan), &real, Some(&dist), stats).unwrap();
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();
    let mut back = GanModel::load(dir.path()).unwrap();
    assert_eq!(back.config, model.config);
    assert_eq!(back.class_label, Label::F);
    assert_eq!(back.stats, model.stats);
    assert_eq!(generate(&mut back, 7, 3).unwrap(), generate(&mut model, 7, 3).unwrap());
}

#[test]
fn config_toml_round_trip() {
    let cfg = GanConfig {
        regime: Regime::RefineGan,
        lambda_eul: 0.5,
        ..GanConfig::default()
    };
    assert_eq!(GanConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    let partial = GanConfig::from_toml("regime = \"vgan\"\niterations = 7\n").unwrap();
    assert_eq!(partial.regime, Regime::Vgan);
    assert_eq!(partial.iterations, 7);
    assert_eq!(partial.g_steps_per_iter, 2);
    assert!(GanConfig::from_toml("bogus = 1").is_err());
    assert!(GanConfig::from_toml("noise_dim = 0").is_err());
}

#[test]
fn network_gradients_at_eighth_scale() {
    for regime in [Regime::Dcgan, Regime::Vgan, Regime::RefineGan] {
        let cfg = GanConfig {
            regime,
            scale: 0.125,
            ..GanConfig::default()
        };
        let report = check_network_gradients(&cfg, 21, 12).unwrap();
        assert!(report.worst < 1e-4, "{regime}: {report:?}");
    }
}
