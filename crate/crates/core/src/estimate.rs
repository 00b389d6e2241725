//! Wave-event parameter estimation and the per-class parameter distributions
//! used for sampling simulator beats and for the Euler loss.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::beats::{Heartbeat, Label, Source};
use crate::dynamics::{integrate, CycleTrack, Eta, SimulatorParams, State, ETA_LEN, INIT_X, INIT_Y};
use crate::error::{Error, Result};
use crate::optim::{LevenbergMarquardt, NelderMead};
use crate::rng::{seeded, standard_normal};

/// Lower bound applied to sampled or fitted event widths (rad).
pub const B_MIN: f64 = 0.01;

/// Diagonal Gaussian over the 15 wave-event parameters of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaDistribution {
    pub class_label: Label,
    pub mean: [f64; ETA_LEN],
    pub var: [f64; ETA_LEN],
    pub count: usize,
}

impl EtaDistribution {
    /// Point mass at `eta`.
    pub fn point(class_label: Label, eta: &Eta) -> Self {
        EtaDistribution {
            class_label,
            mean: eta.to_array(),
            var: [0.0; ETA_LEN],
            count: 1,
        }
    }

    /// Gaussian centred on `eta` with per-component std `rel_std · |eta_i|`.
    pub fn relative(class_label: Label, eta: &Eta, rel_std: f64) -> Self {
        let mean = eta.to_array();
        EtaDistribution {
            class_label,
            mean,
            var: mean.map(|m| (rel_std * m).powi(2)),
            count: 1,
        }
    }

    pub fn mean_eta(&self) -> Eta {
        Eta::from_slice(&self.mean).expect("fixed length").repaired(B_MIN)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("distribution built from zero fits".into()));
        }
        if let Some(i) = self.var.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "variance of {} must be finite and non-negative",
                Eta::component_names()[i]
            )));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("non-finite mean".into()));
        }
        Ok(())
    }

    /// Writes `class,component_name,mean,var` rows for each distribution.
    pub fn write_all<W: Write>(dists: &[EtaDistribution], mut out: W) -> Result<()> {
        writeln!(out, "class,component_name,mean,var")?;
        for d in dists {
            writeln!(out, "# class={} count={}", d.class_label, d.count)?;
            for (i, name) in Eta::component_names().iter().enumerate() {
                writeln!(out, "{},{},{:.16e},{:.16e}", d.class_label, name, d.mean[i], d.var[i])?;
            }
        }
        Ok(())
    }

    pub fn save(dists: &[EtaDistribution], path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        Self::write_all(dists, &mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vec<EtaDistribution>> {
        let file = std::fs::File::open(path)?;
        Self::read_all(std::io::BufReader::new(file), path)
    }

    pub fn read_all<R: BufRead>(reader: R, path: &Path) -> Result<Vec<EtaDistribution>> {
        let names = Eta::component_names();
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line as u64,
            message,
        };
        let mut out: Vec<(EtaDistribution, [bool; ETA_LEN])> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || (idx == 0 && trimmed == "class,component_name,mean,var") {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                // optional `# class=X count=N` annotation
                let mut label = None;
                let mut count = None;
                for kv in comment.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("class", v)) => label = Some(v.parse::<Label>()?),
                        Some(("count", v)) => count = v.parse::<usize>().ok(),
                        _ => {}
                    }
                }
                if let (Some(label), Some(count)) = (label, count) {
                    entry(&mut out, label).0.count = count.max(1);
                }
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(parse_err(lineno, format!("expected 4 fields, found {}", fields.len())));
            }
            let label: Label = fields[0].parse()?;
            let comp = names
                .iter()
                .position(|n| n == fields[1])
                .ok_or_else(|| parse_err(lineno, format!("unknown component {:?}", fields[1])))?;
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| parse_err(lineno, format!("bad number {s:?}: {e}")))
            };
            let (mean, var) = (num(fields[2])?, num(fields[3])?);
            let (dist, seen) = entry(&mut out, label);
            if seen[comp] {
                return Err(parse_err(lineno, format!("duplicate component {}", fields[1])));
            }
            seen[comp] = true;
            dist.mean[comp] = mean;
            dist.var[comp] = var;
        }
        let mut dists = Vec::with_capacity(out.len());
        for (dist, seen) in out {
            if let Some(i) = seen.iter().position(|s| !s) {
                return Err(parse_err(
                    0,
                    format!("class {} is missing component {}", dist.class_label, names[i]),
                ));
            }
            dist.validate()?;
            dists.push(dist);
        }
        Ok(dists)
    }
}

fn entry(out: &mut Vec<(EtaDistribution, [bool; ETA_LEN])>, label: Label) -> &mut (EtaDistribution, [bool; ETA_LEN]) {
    let pos = match out.iter().position(|(d, _)| d.class_label == label) {
        Some(p) => p,
        None => {
            out.push((
                EtaDistribution {
                    class_label: label,
                    mean: [0.0; ETA_LEN],
                    var: [0.0; ETA_LEN],
                    count: 1,
                },
                [false; ETA_LEN],
            ));
            out.len() - 1
        }
    };
    &mut out[pos]
}

/// Result of fitting the wave-event parameters to one beat.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: SimulatorParams,
    /// Mean squared distance between the fitted simulator z and the beat.
    pub residual: f64,
    /// Objective evaluations spent.
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn eta(&self) -> &Eta {
        &self.params.eta
    }

    pub fn write_csv<W: Write>(fits: &[FitResult], mut out: W) -> Result<()> {
        write!(out, "index,residual,iterations,converged")?;
        for name in Eta::component_names() {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for (i, fit) in fits.iter().enumerate() {
            write!(out, "{i},{:.16e},{},{}", fit.residual, fit.iterations, fit.converged)?;
            for v in fit.params.eta.to_array() {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Knobs of the fitting procedure.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Objective evaluations per simplex run.
    pub budget: usize,
    /// Simplex restarts from a jittered copy of the incumbent.
    pub restarts: usize,
    /// Relative jitter of restart points.
    pub jitter: f64,
    /// Finish with a Levenberg-Marquardt refinement.
    pub polish: bool,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            budget: 2000,
            restarts: 3,
            jitter: 0.05,
            polish: true,
            seed: 0x5eed,
        }
    }
}

// absolute step floors per group (theta, a, b) so zero components still move
const STEP_FLOOR: [f64; 3] = [0.02, 0.05, 0.005];

fn step_sizes(x: &[f64], rel: f64) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, v)| (rel * v.abs()).max(STEP_FLOOR[i / 5]))
        .collect()
}

struct Objective<'a> {
    track: CycleTrack,
    target: &'a [f64],
    dt: f64,
}

impl Objective<'_> {
    fn project(x: &[f64]) -> Eta {
        Eta::from_slice(x).expect("fixed length").repaired(B_MIN)
    }

    fn residuals(&self, x: &[f64]) -> Result<Vec<f64>> {
        let eta = Self::project(x);
        let z = self
            .track
            .simulate_z(&eta, self.target[0], self.dt)
            .map_err(|e| Error::FitDiverged(e.to_string()))?;
        let r: Vec<f64> = z.iter().zip(self.target).map(|(a, b)| a - b).collect();
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::FitDiverged("non-finite residual".into()));
        }
        Ok(r)
    }

    fn mse(&self, x: &[f64]) -> Result<f64> {
        let r = self.residuals(x)?;
        Ok(r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64)
    }
}

/// Per-class starting point for fits: the standard parameters for N, an
/// early weak P for S, a wide QRS with inverted T for V and a blend of the
/// two for F.
pub fn class_default_eta(label: Label) -> Eta {
    let mut e = Eta::default();
    match label {
        Label::N => {}
        Label::S => {
            e.theta[0] *= 1.3;
            e.a[0] *= 0.4;
            e.b[0] *= 0.8;
        }
        Label::V => {
            e.a[0] *= 0.1;
            for i in 1..4 {
                e.b[i] *= 2.2;
            }
            e.a[2] *= 0.7;
            e.a[3] *= 1.6;
            e.a[4] *= -1.2;
            e.b[4] *= 1.3;
        }
        Label::F => {
            e.a[0] *= 0.7;
            for i in 1..4 {
                e.b[i] *= 1.5;
            }
            e.a[2] *= 0.85;
            e.a[4] *= 0.2;
        }
    }
    e
}

/// Fits the 15 wave-event parameters of `init` to `beat` with default options.
pub fn fit_eta(beat: &[f64], init: &SimulatorParams, budget: usize) -> Result<FitResult> {
    fit_eta_with(
        beat,
        init,
        &FitOptions {
            budget,
            ..Default::default()
        },
    )
}

/// Simplex search from `init`, simplex restarts around the incumbent, then a
/// Levenberg-Marquardt refinement. The simulated beat starts at the beat's
/// first sample; the global constants of `init` are never changed.
pub fn fit_eta_with(beat: &[f64], init: &SimulatorParams, opts: &FitOptions) -> Result<FitResult> {
    if beat.len() != init.len {
        return Err(Error::LengthMismatch {
            expected: init.len,
            actual: beat.len(),
        });
    }
    if beat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("beat contains non-finite samples".into()));
    }
    init.validate()?;
    let objective = Objective {
        track: CycleTrack::new(init, INIT_X, INIT_Y)?,
        target: beat,
        dt: init.dt(),
    };
    let x0 = init.eta.to_array().to_vec();
    let mut best_x = x0.clone();
    let mut best = objective.mse(&x0)?;
    let mut evaluations = 1;
    let mut converged = false;

    let consider = |x: Vec<f64>, value: f64, conv: bool, best_x: &mut Vec<f64>, best: &mut f64| {
        if value < *best {
            *best = value;
            *best_x = x;
            return Some(conv);
        }
        None
    };

    if best > 0.0 {
        let nm = NelderMead {
            max_evaluations: opts.budget,
            ..Default::default()
        };
        let mut rng = seeded(opts.seed);
        for run in 0..=opts.restarts {
            let start: Vec<f64> = if run == 0 {
                x0.clone()
            } else {
                let floors = step_sizes(&best_x, opts.jitter);
                best_x
                    .iter()
                    .zip(&floors)
                    .map(|(v, s)| v + s * rng.random_range(-1.0..=1.0))
                    .collect()
            };
            let steps = step_sizes(&start, 0.05);
            let m = nm.minimize(|x| objective.mse(x), &start, &steps)?;
            evaluations += m.evaluations;
            if let Some(c) = consider(m.x, m.value, m.converged, &mut best_x, &mut best) {
                converged = c;
            }
        }

        if opts.polish {
            let lm = LevenbergMarquardt::default();
            let scale: Vec<f64> = (0..ETA_LEN).map(|i| STEP_FLOOR[i / 5]).collect();
            for start in [x0.clone(), best_x.clone()] {
                let m = lm.minimize(|x| objective.residuals(x), &start, &scale)?;
                evaluations += m.evaluations;
                if let Some(c) = consider(m.x, m.value, m.converged, &mut best_x, &mut best) {
                    converged = c;
                }
            }
        }
    } else {
        converged = true;
    }

    let eta = Objective::project(&best_x);
    // report the residual of the projected point that is actually returned
    let residual = objective.mse(&eta.to_array())?;
    Ok(FitResult {
        params: SimulatorParams { eta, ..*init },
        residual,
        iterations: evaluations,
        converged,
    })
}

/// Fits every beat independently; results keep the input order.
pub fn fit_many(beats: &[Heartbeat], init: &SimulatorParams, opts: &FitOptions) -> Result<Vec<FitResult>> {
    beats.par_iter().map(|b| fit_eta_with(&b.samples, init, opts)).collect()
}

/// Sample mean and population variance of the fitted parameters.
pub fn build_distribution(fits: &[FitResult], class_label: Label) -> Result<EtaDistribution> {
    if fits.is_empty() {
        return Err(Error::InvalidArgument("no fits to build a distribution from".into()));
    }
    let n = fits.len() as f64;
    let mut mean = [0.0; ETA_LEN];
    for f in fits {
        for (m, v) in mean.iter_mut().zip(f.params.eta.to_array()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; ETA_LEN];
    for f in fits {
        for ((s, v), m) in var.iter_mut().zip(f.params.eta.to_array()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    Ok(EtaDistribution {
        class_label,
        mean,
        var,
        count: fits.len(),
    })
}

/// Draws one parameter vector from `dist` and repairs it onto the valid set.
pub fn sample_eta_with<R: Rng + ?Sized>(dist: &EtaDistribution, rng: &mut R) -> SimulatorParams {
    let mut x = [0.0; ETA_LEN];
    for (i, xi) in x.iter_mut().enumerate() {
        *xi = if dist.var[i] > 0.0 {
            dist.mean[i] + dist.var[i].sqrt() * standard_normal(rng)
        } else {
            dist.mean[i]
        };
    }
    SimulatorParams::with_eta(Eta::from_slice(&x).expect("fixed length").repaired(B_MIN))
}

pub fn sample_eta(dist: &EtaDistribution, seed: u64) -> SimulatorParams {
    sample_eta_with(dist, &mut seeded(seed))
}

/// Beats straight from the simulator: each draws η from `dist`, adds
/// zero-mean noise with per-component std `noise_sigma · |mean_i|`, and
/// integrates from the fixed initial state.
pub fn simulator_only_generate(
    dist: &EtaDistribution,
    n: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<Heartbeat>> {
    let mut rng = seeded(seed);
    simulator_only_generate_with(dist, n, noise_sigma, &mut rng, &format!("sim:{seed}"))
}

pub fn simulator_only_generate_with<R: Rng + ?Sized>(
    dist: &EtaDistribution,
    n: usize,
    noise_sigma: f64,
    rng: &mut R,
    record_prefix: &str,
) -> Result<Vec<Heartbeat>> {
    dist.validate()?;
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise sigma {noise_sigma}")));
    }
    let mut beats = Vec::with_capacity(n);
    let mut failures = 0usize;
    while beats.len() < n {
        let sampled = sample_eta_with(dist, rng);
        let mut x = sampled.eta.to_array();
        if noise_sigma > 0.0 {
            for (v, m) in x.iter_mut().zip(&dist.mean) {
                *v += noise_sigma * m.abs() * standard_normal(rng);
            }
        }
        let params = SimulatorParams::with_eta(Eta::from_slice(&x)?.repaired(B_MIN));
        match integrate(&params, State::initial()) {
            Ok(traj) => {
                let record = format!("{record_prefix}:{}", beats.len());
                match Heartbeat::with_source(traj.z(), dist.class_label, Source::Simulator, record) {
                    Ok(beat) => beats.push(beat),
                    Err(_) => failures += 1,
                }
            }
            Err(Error::IntegrationDiverged { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
        if failures > 10 * n {
            return Err(Error::IntegrationDiverged { step: 0 });
        }
    }
    Ok(beats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn perturbed(scale: &[f64; ETA_LEN]) -> Eta {
        let base = Eta::default().to_array();
        let mut x = [0.0; ETA_LEN];
        for i in 0..ETA_LEN {
            x[i] = base[i] * (1.0 + scale[i]);
        }
        Eta::from_slice(&x).unwrap()
    }

    #[test]
    fn fit_from_truth_is_exact() {
        let p = SimulatorParams::default();
        let z = integrate(&p, State::initial()).unwrap().z();
        let fit = fit_eta(&z, &p, 2000).unwrap();
        assert!(fit.residual < 1e-12);
        assert_eq!(fit.params.eta, p.eta);
        assert!(fit.converged);
    }

    #[test]
    fn fit_recovers_perturbed_parameters() {
        let truth = perturbed(&[
            0.08, -0.06, 0.0, 0.07, -0.05, -0.09, 0.04, 0.08, -0.03, 0.1, 0.06, -0.08, 0.05, -0.04, 0.09,
        ]);
        let target = integrate(&SimulatorParams::with_eta(truth), State::initial())
            .unwrap()
            .z();
        let init = SimulatorParams::default();
        let start_residual = {
            let z = integrate(&init, State::initial()).unwrap().z();
            z.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 216.0
        };
        let fit = fit_eta(&target, &init, 2000).unwrap();
        assert!(fit.residual <= start_residual);
        let got = fit.params.eta;
        for i in 0..5 {
            assert!((got.theta[i] - truth.theta[i]).abs() < 0.05);
            assert!(((got.a[i] - truth.a[i]) / truth.a[i]).abs() < 0.05);
            assert!(((got.b[i] - truth.b[i]) / truth.b[i]).abs() < 0.10);
        }
        got.validate().unwrap();
    }

    #[test]
    fn fit_rejects_wrong_length() {
        let err = fit_eta(&[0.0; 100], &SimulatorParams::default(), 10).unwrap_err();
        assert!(matches!(
            err,
            Error::LengthMismatch {
                expected: 216,
                actual: 100
            }
        ));
    }

    #[test]
    fn distribution_single_and_pair() {
        let p = SimulatorParams::default();
        let fit = |eta: Eta| FitResult {
            params: SimulatorParams::with_eta(eta),
            residual: 0.0,
            iterations: 0,
            converged: true,
        };
        let one = build_distribution(&[fit(p.eta)], Label::N).unwrap();
        assert_eq!(one.mean, p.eta.to_array());
        assert_eq!(one.var, [0.0; ETA_LEN]);

        let delta = 0.01;
        let shifted = Eta::from_slice(&p.eta.to_array().map(|v| v + 2.0 * delta)).unwrap();
        let two = build_distribution(&[fit(p.eta), fit(shifted)], Label::V).unwrap();
        for i in 0..ETA_LEN {
            assert_relative_eq!(two.mean[i], p.eta.to_array()[i] + delta, epsilon = 1e-12);
            assert_relative_eq!(two.var[i], delta * delta, epsilon = 1e-12);
        }
        assert!(build_distribution(&[], Label::N).is_err());
    }

    #[test]
    fn zero_variance_sampling_returns_mean() {
        let dist = EtaDistribution::point(Label::S, &Eta::default());
        assert_eq!(sample_eta(&dist, 3).eta, Eta::default());
        let d2 = EtaDistribution::relative(Label::S, &Eta::default(), 0.05);
        assert_eq!(sample_eta(&d2, 11), sample_eta(&d2, 11));
    }

    #[test]
    fn sampling_clt_bound() {
        let mut dist = EtaDistribution::point(Label::N, &Eta::default());
        dist.var = [0.01; ETA_LEN];
        // keep the draws away from the b floor so the mean is not biased by repair
        for b in &mut dist.mean[10..] {
            *b += 1.0;
        }
        // widen the angle gaps so reordering is vanishingly rare
        dist.mean[..5].copy_from_slice(&[-2.5, -1.2, 0.0, 1.2, 2.5]);
        let mut rng = seeded(42);
        let n = 10_000;
        let mut sums = [0.0; ETA_LEN];
        for _ in 0..n {
            let s = sample_eta_with(&dist, &mut rng);
            for (acc, v) in sums.iter_mut().zip(s.eta.to_array()) {
                *acc += v;
            }
        }
        for i in 0..ETA_LEN {
            let m = sums[i] / n as f64;
            assert!((m - dist.mean[i]).abs() < 4.0 * (0.1 / 100.0), "{i}: {m}");
        }
    }

    #[test]
    fn sampled_params_are_valid() {
        let mut dist = EtaDistribution::relative(Label::F, &Eta::default(), 0.5);
        dist.var[12] = 1.0; // wide b_R forces clamping
        let mut rng = seeded(7);
        for _ in 0..500 {
            sample_eta_with(&dist, &mut rng).validate().unwrap();
        }
    }

    #[test]
    fn simulator_only_degenerate_and_reproducible() {
        let dist = EtaDistribution::point(Label::V, &Eta::default());
        let beats = simulator_only_generate(&dist, 1, 0.0, 9).unwrap();
        let z = integrate(&SimulatorParams::default(), State::initial()).unwrap().z();
        assert_eq!(beats[0].samples, z);
        assert_eq!(beats[0].label, Label::V);
        assert_eq!(beats[0].source, Source::Simulator);

        let noisy = EtaDistribution::relative(Label::V, &Eta::default(), 0.05);
        let a = simulator_only_generate(&noisy, 5, 0.05, 21).unwrap();
        let b = simulator_only_generate(&noisy, 5, 0.05, 21).unwrap();
        assert_eq!(a, b);
        assert!(simulator_only_generate(&noisy, 0, 0.05, 21).unwrap().is_empty());
    }

    #[test]
    fn simulator_only_r_peaks_stay_put() {
        let dist = EtaDistribution::point(Label::N, &Eta::default());
        let beats = simulator_only_generate(&dist, 100, 0.05, 5).unwrap();
        assert_eq!(beats.len(), 100);
        // z is linear in the forcing, so the wander response is the a = 0 trace;
        // the R wave is small next to the end-of-window drift
        let mut flat = Eta::default();
        flat.a = [0.0; 5];
        let wander = integrate(&SimulatorParams::with_eta(flat), State::initial())
            .unwrap()
            .z();
        for beat in &beats {
            let corrected: Vec<f64> = beat.samples.iter().zip(&wander).map(|(z, w)| z - w).collect();
            let argmax = (0..216).max_by(|&i, &j| corrected[i].total_cmp(&corrected[j])).unwrap();
            assert!((argmax as i64 - 72).abs() <= 10, "argmax {argmax}");
        }
    }

    #[test]
    fn distribution_file_round_trip() {
        let dists = vec![
            EtaDistribution::relative(Label::N, &Eta::default(), 0.1),
            EtaDistribution {
                count: 17,
                ..EtaDistribution::point(Label::V, &Eta::default())
            },
        ];
        let mut buf = Vec::new();
        EtaDistribution::write_all(&dists, &mut buf).unwrap();
        let back = EtaDistribution::read_all(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, dists);
    }

    #[test]
    fn distribution_file_errors() {
        let bad = "class,component_name,mean,var\nN,theta_X,0,0\n";
        let err = EtaDistribution::read_all(bad.as_bytes(), Path::new("f")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let missing = "class,component_name,mean,var\nN,theta_P,0,0\n";
        assert!(EtaDistribution::read_all(missing.as_bytes(), Path::new("f")).is_err());
        let label = "class,component_name,mean,var\nQ,theta_P,0,0\n";
        assert!(matches!(
            EtaDistribution::read_all(label.as_bytes(), Path::new("f")),
            Err(Error::UnknownLabel(_))
        ));
    }
}
