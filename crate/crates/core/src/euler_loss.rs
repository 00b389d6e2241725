//! Discrete ODE residual of a candidate beat (the simulator distance) and its
//! Monte-Carlo expectation over a parameter distribution.

use rand::Rng;

use crate::dynamics::{CycleTrack, Eta, SimulatorParams, INIT_X, INIT_Y};
use crate::error::{Error, Result};
use crate::estimate::{sample_eta_with, EtaDistribution};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct SimDistanceResult {
    pub value: f64,
    pub grad: Vec<f64>,
    pub x_traj: Vec<f64>,
    pub y_traj: Vec<f64>,
}

/// Residual evaluator for a fixed cycle (ω, sampling grid, wander). The x/y
/// solution does not depend on the wave events, so one evaluator serves every
/// η drawn from a distribution.
#[derive(Debug, Clone)]
pub struct SimDistance {
    track: CycleTrack,
    dt: f64,
    len: usize,
}

impl SimDistance {
    pub fn new(params: &SimulatorParams) -> Result<Self> {
        params.validate()?;
        Ok(SimDistance {
            track: CycleTrack::new(params, INIT_X, INIT_Y)?,
            dt: params.dt(),
            len: params.len,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn track(&self) -> &CycleTrack {
        &self.track
    }

    /// Residuals r_ℓ = (h_{ℓ+1} − h_ℓ)/dt − f_z(x_ℓ, y_ℓ, h_ℓ, t_ℓ) for
    /// ℓ = 0..L−2.
    pub fn residuals(&self, h: &[f64], eta: &Eta) -> Result<Vec<f64>> {
        if h.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: h.len(),
            });
        }
        let forcing = self.track.forcing(eta);
        Ok((0..self.len.saturating_sub(1))
            .map(|l| {
                let fz = forcing[l] - (h[l] - self.track.baseline[l]);
                (h[l + 1] - h[l]) / self.dt - fz
            })
            .collect())
    }

    /// Sum of squared residuals and its gradient with respect to `h`.
    pub fn value_and_grad(&self, h: &[f64], eta: &Eta) -> Result<(f64, Vec<f64>)> {
        let r = self.residuals(h, eta)?;
        let mut grad = vec![0.0; self.len];
        let mut value = 0.0;
        let d_lo = 1.0 - 1.0 / self.dt;
        let d_hi = 1.0 / self.dt;
        for (l, &rl) in r.iter().enumerate() {
            value += rl * rl;
            grad[l] += 2.0 * rl * d_lo;
            grad[l + 1] += 2.0 * rl * d_hi;
        }
        Ok((value, grad))
    }

    pub fn evaluate(&self, h: &[f64], eta: &Eta) -> Result<SimDistanceResult> {
        let (value, grad) = self.value_and_grad(h, eta)?;
        Ok(SimDistanceResult {
            value,
            grad,
            x_traj: self.track.x.clone(),
            y_traj: self.track.y.clone(),
        })
    }
}

pub fn sim_distance(h: &[f64], params: &SimulatorParams) -> Result<SimDistanceResult> {
    SimDistance::new(params)?.evaluate(h, &params.eta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerLossResult {
    /// Mean simulator distance over batch elements and η draws.
    pub value: f64,
    /// Gradient of `value` with respect to each batch element.
    pub grads: Vec<Vec<f64>>,
}

/// Monte-Carlo Euler loss. η is drawn `n_eta_samples` times per element,
/// element by element, from one stream seeded with `seed`.
pub fn euler_loss(
    batch: &[Vec<f64>],
    dist: &EtaDistribution,
    n_eta_samples: usize,
    seed: u64,
) -> Result<EulerLossResult> {
    euler_loss_with(batch, dist, n_eta_samples, &mut seeded(seed))
}

pub fn euler_loss_with<R: Rng + ?Sized>(
    batch: &[Vec<f64>],
    dist: &EtaDistribution,
    n_eta_samples: usize,
    rng: &mut R,
) -> Result<EulerLossResult> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("euler loss needs a nonempty batch".into()));
    }
    if n_eta_samples == 0 {
        return Err(Error::InvalidArgument("n_eta_samples must be at least 1".into()));
    }
    dist.validate()?;
    let evaluator = SimDistance::new(&SimulatorParams::default())?;
    let weight = 1.0 / (batch.len() * n_eta_samples) as f64;
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(batch.len());
    for h in batch {
        let mut g = vec![0.0; h.len()];
        for _ in 0..n_eta_samples {
            let params = sample_eta_with(dist, rng);
            let (v, dg) = evaluator.value_and_grad(h, &params.eta)?;
            value += v;
            for (a, b) in g.iter_mut().zip(&dg) {
                *a += b * weight;
            }
        }
        grads.push(g);
    }
    Ok(EulerLossResult {
        value: value * weight,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beats::Label;
    use crate::dynamics::{f_z, integrate, State};
    use crate::estimate::sample_eta;
    use crate::rng::normal_vec;
    use proptest::prelude::*;

    fn oracle(h: &[f64], params: &SimulatorParams) -> f64 {
        let dt = params.dt();
        let (mut x, mut y) = (-0.41f64, -0.91f64);
        let mut total = 0.0;
        for l in 0..h.len() - 1 {
            let t = l as f64 * dt;
            let fz = f_z(x, y, h[l], t, params).unwrap();
            let r = (h[l + 1] - h[l]) / dt - fz;
            total += r * r;
            let a = 1.0 - (x * x + y * y).sqrt();
            let (nx, ny) = (x + (a * x - params.omega * y) * dt, y + (a * y + params.omega * x) * dt);
            x = nx;
            y = ny;
        }
        total
    }

    fn random_eta(seed: u64) -> SimulatorParams {
        let dist = EtaDistribution::relative(Label::N, &Eta::default(), 0.1);
        sample_eta(&dist, seed)
    }

    #[test]
    fn euler_solution_has_zero_distance() {
        let p = SimulatorParams::default();
        let z = integrate(&p, State::initial()).unwrap().z();
        let r = sim_distance(&z, &p).unwrap();
        assert!(r.value < 1e-18 * z.len() as f64 / (p.dt() * p.dt()), "{}", r.value);
        let mut bumped = z.clone();
        bumped[100] += 0.1;
        assert!(sim_distance(&bumped, &p).unwrap().value > 0.0);
    }

    #[test]
    fn zero_residual_for_random_eta() {
        for seed in 0..100 {
            let p = random_eta(seed);
            let z = integrate(&p, State::initial()).unwrap().z();
            let v = sim_distance(&z, &p).unwrap().value;
            assert!(v < 1e-9, "seed {seed}: {v}");
        }
    }

    #[test]
    fn zeros_match_double_loop() {
        let p = SimulatorParams::default();
        let h = vec![0.0; 216];
        let got = sim_distance(&h, &p).unwrap().value;
        let want = oracle(&h, &p);
        assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn residual_count_and_length_check() {
        let e = SimDistance::new(&SimulatorParams::default()).unwrap();
        assert_eq!(e.residuals(&[0.0; 216], &Eta::default()).unwrap().len(), 215);
        assert!(matches!(
            sim_distance(&[0.0; 10], &SimulatorParams::default()),
            Err(Error::LengthMismatch {
                expected: 216,
                actual: 10
            })
        ));
    }

    #[test]
    fn euler_loss_examples() {
        let p = SimulatorParams::default();
        let z = integrate(&p, State::initial()).unwrap().z();
        let point = EtaDistribution::point(Label::N, &Eta::default());
        let r = euler_loss(&[z.clone()], &point, 1, 3).unwrap();
        assert!(r.value < 1e-9);

        let dist = EtaDistribution::relative(Label::N, &Eta::default(), 0.1);
        let mut rng = crate::rng::seeded(44);
        let h = normal_vec(&mut rng, 216, 1.0);
        let one = euler_loss(&[h.clone()], &dist, 1, 17).unwrap();
        let direct = sim_distance(&h, &sample_eta(&dist, 17)).unwrap();
        assert_eq!(one.value, direct.value);
        assert_eq!(one.grads[0], direct.grad);

        assert!(euler_loss(&[], &dist, 1, 0).is_err());
    }

    #[test]
    fn euler_loss_is_mean_of_individual_terms() {
        let dist = EtaDistribution::relative(Label::V, &Eta::default(), 0.1);
        let mut rng = crate::rng::seeded(5);
        let batch: Vec<Vec<f64>> = (0..4).map(|_| normal_vec(&mut rng, 216, 1.0)).collect();
        let got = euler_loss(&batch, &dist, 8, 99).unwrap();

        let mut draw = crate::rng::seeded(99);
        let mut terms = Vec::new();
        let mut grads = vec![vec![0.0; 216]; 4];
        for (b, h) in batch.iter().enumerate() {
            for _ in 0..8 {
                let p = sample_eta_with(&dist, &mut draw);
                let r = sim_distance(h, &p).unwrap();
                terms.push(r.value);
                for (g, d) in grads[b].iter_mut().zip(&r.grad) {
                    *g += d / 32.0;
                }
            }
        }
        assert_eq!(terms.len(), 32);
        let mean = terms.iter().sum::<f64>() / 32.0;
        assert!(((got.value - mean) / mean).abs() < 1e-12);
        for (a, b) in got.grads.iter().flatten().zip(grads.iter().flatten()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gradient_matches_finite_differences(seed in 0u64..10_000) {
            let p = random_eta(seed);
            let mut rng = crate::rng::seeded(seed ^ 0xabc);
            let h = normal_vec(&mut rng, 216, 1.0);
            let e = SimDistance::new(&p).unwrap();
            let (_, grad) = e.value_and_grad(&h, &p.eta).unwrap();
            let step = 1e-5;
            let mut worst = 0.0f64;
            for i in 0..216 {
                let mut hp = h.clone();
                let mut hm = h.clone();
                hp[i] += step;
                hm[i] -= step;
                let fd = (e.value_and_grad(&hp, &p.eta).unwrap().0 - e.value_and_grad(&hm, &p.eta).unwrap().0) / (2.0 * step);
                let rel = (fd - grad[i]).abs() / grad[i].abs().max(fd.abs()).max(1.0);
                worst = worst.max(rel);
            }
            prop_assert!(worst < 1e-5, "max relative error {}", worst);
        }

        #[test]
        fn nonnegative_and_xy_independent(seed in 0u64..10_000, bump in -5.0f64..5.0, at in 0usize..216) {
            let p = random_eta(seed);
            let mut rng = crate::rng::seeded(seed);
            let h = normal_vec(&mut rng, 216, 1.0);
            let a = sim_distance(&h, &p).unwrap();
            let mut h2 = h.clone();
            h2[at] += bump;
            let b = sim_distance(&h2, &p).unwrap();
            prop_assert!(a.value >= 0.0 && b.value >= 0.0);
            prop_assert!(a.grad.iter().all(|g| g.is_finite()));
            prop_assert_eq!(&a.x_traj, &b.x_traj);
            prop_assert_eq!(&a.y_traj, &b.y_traj);
        }
    }
}
