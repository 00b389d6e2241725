//! Three-variable ODE heartbeat model and its explicit Euler solution.
//!
//! The trajectory revolves around a unit limit cycle in the (x, y) plane
//! while z, the synthetic ECG, is pushed up or down by five Gaussian wave
//! events (P, Q, R, S, T) placed at fixed angles on the cycle, and relaxes
//! toward a slow respiratory baseline.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};

/// Names of the wave events, in parameter order.
pub const WAVE_EVENTS: [&str; 5] = ["P", "Q", "R", "S", "T"];

/// Number of free simulator parameters (angle, magnitude and width per event).
pub const ETA_LEN: usize = 15;

/// Sampling frequency of the beat windows, in Hz.
pub const SAMPLING_HZ: f64 = 360.0;

/// Samples per beat window (600 ms at 360 Hz).
pub const BEAT_LEN: usize = 216;

/// Initial (x, y) on the limit cycle.
pub const INIT_X: f64 = -0.41;
pub const INIT_Y: f64 = -0.91;

/// Version tag of the default wave-event constants below.
pub const DEFAULT_ETA_VERSION: u32 = 1;

/// Normal-sinus-rhythm event angles (rad).
pub const DEFAULT_THETA: [f64; 5] = [-PI / 3.0, -PI / 12.0, 0.0, PI / 12.0, PI / 2.0];
/// Normal-sinus-rhythm event magnitudes.
pub const DEFAULT_A: [f64; 5] = [1.2, -5.0, 30.0, -7.5, 0.75];
/// Normal-sinus-rhythm event widths (rad).
pub const DEFAULT_B: [f64; 5] = [0.25, 0.1, 0.1, 0.1, 0.4];

/// Baseline wander amplitude (mV).
pub const DEFAULT_WANDER_AMPLITUDE: f64 = 0.15;
/// Respiratory frequency (Hz).
pub const DEFAULT_RESP_FREQ: f64 = 0.25;

/// The 15 wave-event parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eta {
    pub theta: [f64; 5],
    pub a: [f64; 5],
    pub b: [f64; 5],
}

impl Default for Eta {
    fn default() -> Self {
        Eta {
            theta: DEFAULT_THETA,
            a: DEFAULT_A,
            b: DEFAULT_B,
        }
    }
}

impl Eta {
    /// Flat vector ordered θ_P..θ_T, a_P..a_T, b_P..b_T.
    pub fn to_array(&self) -> [f64; ETA_LEN] {
        let mut out = [0.0; ETA_LEN];
        out[..5].copy_from_slice(&self.theta);
        out[5..10].copy_from_slice(&self.a);
        out[10..].copy_from_slice(&self.b);
        out
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != ETA_LEN {
            return Err(Error::LengthMismatch {
                expected: ETA_LEN,
                actual: v.len(),
            });
        }
        let mut eta = Eta {
            theta: [0.0; 5],
            a: [0.0; 5],
            b: [0.0; 5],
        };
        eta.theta.copy_from_slice(&v[..5]);
        eta.a.copy_from_slice(&v[5..10]);
        eta.b.copy_from_slice(&v[10..]);
        Ok(eta)
    }

    /// Component names in flat-vector order, e.g. `theta_P`, `a_R`, `b_T`.
    pub fn component_names() -> [String; ETA_LEN] {
        std::array::from_fn(|i| {
            let group = ["theta", "a", "b"][i / 5];
            format!("{group}_{}", WAVE_EVENTS[i % 5])
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &th) in self.theta.iter().enumerate() {
            if !(th.is_finite() && (-PI..PI).contains(&th)) {
                return Err(Error::InvalidParams(format!(
                    "theta_{} = {th} outside [-pi, pi)",
                    WAVE_EVENTS[i]
                )));
            }
        }
        if self.theta.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams(format!(
                "event angles not strictly increasing: {:?}",
                self.theta
            )));
        }
        if let Some(i) = self.b.iter().position(|&b| !(b.is_finite() && b > 0.0)) {
            return Err(Error::InvalidParams(format!(
                "b_{} = {} must be positive",
                WAVE_EVENTS[i], self.b[i]
            )));
        }
        if let Some(i) = self.a.iter().position(|a| !a.is_finite()) {
            return Err(Error::InvalidParams(format!("a_{} not finite", WAVE_EVENTS[i])));
        }
        Ok(())
    }

    /// Projects onto the valid set: wraps and sorts the angles, floors the widths.
    pub fn repaired(mut self, b_min: f64) -> Self {
        for th in &mut self.theta {
            if !(-PI..PI).contains(th) {
                *th = wrap_angle(*th);
            }
        }
        if self.theta.windows(2).any(|w| w[0] > w[1]) {
            self.theta.sort_by(f64::total_cmp);
        }
        for b in &mut self.b {
            // also catches NaN
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(*b >= b_min) {
                *b = b_min;
            }
        }
        self
    }
}

/// Full simulator configuration: wave events plus global constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatorParams {
    pub eta: Eta,
    /// Angular velocity around the limit cycle (rad/s).
    pub omega: f64,
    /// Baseline wander amplitude (mV).
    pub wander_amplitude: f64,
    /// Respiratory frequency (Hz).
    pub resp_freq: f64,
    /// Sampling frequency (Hz); the step is `1 / fs`.
    pub fs: f64,
    /// Samples per trajectory.
    pub len: usize,
}

impl Default for SimulatorParams {
    fn default() -> Self {
        SimulatorParams {
            eta: Eta::default(),
            // one revolution per 216-sample window
            omega: 2.0 * PI * SAMPLING_HZ / BEAT_LEN as f64,
            wander_amplitude: DEFAULT_WANDER_AMPLITUDE,
            resp_freq: DEFAULT_RESP_FREQ,
            fs: SAMPLING_HZ,
            len: BEAT_LEN,
        }
    }
}

impl SimulatorParams {
    pub fn with_eta(eta: Eta) -> Self {
        SimulatorParams {
            eta,
            ..Default::default()
        }
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn validate(&self) -> Result<()> {
        self.eta.validate()?;
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return bad("omega must be positive");
        }
        if !(self.resp_freq.is_finite() && self.resp_freq > 0.0) {
            return bad("respiratory frequency must be positive");
        }
        if !(self.wander_amplitude.is_finite() && self.wander_amplitude >= 0.0) {
            return bad("wander amplitude must be non-negative");
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return bad("sampling frequency must be positive");
        }
        if self.len == 0 {
            return bad("trajectory length must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
}

impl State {
    pub fn new(x: f64, y: f64, z: f64, t: f64) -> Self {
        State { x, y, z, t }
    }

    /// The fixed starting point used throughout: (−0.41, −0.91, 0) at t = 0.
    pub fn initial() -> Self {
        State::new(INIT_X, INIT_Y, 0.0, 0.0)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.t.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub params: SimulatorParams,
}

impl Trajectory {
    pub fn z(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.z).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Writes `t,x,y,z` rows at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,x,y,z")?;
        for s in &self.states {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", s.t, s.x, s.y, s.z)?;
        }
        Ok(())
    }
}

/// Wraps an angle difference to [−π, π).
#[inline]
pub fn wrap_angle(d: f64) -> f64 {
    let r = (d + PI).rem_euclid(2.0 * PI) - PI;
    if r >= PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[inline]
pub fn alpha(x: f64, y: f64) -> f64 {
    1.0 - (x * x + y * y).sqrt()
}

pub fn theta_of(x: f64, y: f64) -> Result<f64> {
    if x == 0.0 && y == 0.0 {
        return Err(Error::Domain);
    }
    Ok(y.atan2(x))
}

/// Signed angular distance from the event angle, wrapped to [−π, π).
pub fn delta_theta(x: f64, y: f64, theta_event: f64) -> Result<f64> {
    Ok(wrap_angle(theta_of(x, y)? - theta_event))
}

/// Respiratory baseline z₀(t) = A sin(2π f₂ t).
#[inline]
pub fn baseline(t: f64, amplitude: f64, resp_freq: f64) -> f64 {
    amplitude * (2.0 * PI * resp_freq * t).sin()
}

#[inline]
pub fn f_x(x: f64, y: f64, params: &SimulatorParams) -> f64 {
    alpha(x, y) * x - params.omega * y
}

#[inline]
pub fn f_y(x: f64, y: f64, params: &SimulatorParams) -> f64 {
    alpha(x, y) * y + params.omega * x
}

/// Wave-event forcing −Σ a Δθ exp(−Δθ²/2b²) at cycle phase `phase`.
#[inline]
pub fn event_forcing(phase: f64, eta: &Eta) -> f64 {
    let mut acc = 0.0;
    for i in 0..5 {
        let d = wrap_angle(phase - eta.theta[i]);
        let b = eta.b[i];
        acc += eta.a[i] * d * (-d * d / (2.0 * b * b)).exp();
    }
    -acc
}

/// z rate. The phase is only needed when some event has nonzero magnitude,
/// so the origin is a valid input for an event-free model.
pub fn f_z(x: f64, y: f64, z: f64, t: f64, params: &SimulatorParams) -> Result<f64> {
    let forcing = if params.eta.a.iter().all(|&a| a == 0.0) {
        0.0
    } else {
        event_forcing(theta_of(x, y)?, &params.eta)
    };
    let z0 = baseline(t, params.wander_amplitude, params.resp_freq);
    Ok(forcing - (z - z0))
}

/// One explicit Euler step; all derivatives are taken at the input state.
pub fn euler_step(state: &State, params: &SimulatorParams) -> Result<State> {
    let dt = params.dt();
    let dx = f_x(state.x, state.y, params);
    let dy = f_y(state.x, state.y, params);
    let dz = f_z(state.x, state.y, state.z, state.t, params)?;
    Ok(State {
        x: state.x + dx * dt,
        y: state.y + dy * dt,
        z: state.z + dz * dt,
        t: state.t + dt,
    })
}

/// Integration scheme. Euler is normative; RK4 exists only as a cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Euler,
    RungeKutta4,
}

/// Solves the system for `params.len` samples starting at `init`.
pub fn integrate(params: &SimulatorParams, init: State) -> Result<Trajectory> {
    integrate_with(params, init, Scheme::Euler)
}

pub fn integrate_with(params: &SimulatorParams, init: State, scheme: Scheme) -> Result<Trajectory> {
    params.validate()?;
    if !init.is_finite() {
        return Err(Error::InvalidArgument("initial state not finite".into()));
    }
    let dt = params.dt();
    let mut states = Vec::with_capacity(params.len);
    states.push(init);
    for step in 1..params.len {
        let prev = &states[step - 1];
        let next = match scheme {
            Scheme::Euler => euler_step(prev, params),
            Scheme::RungeKutta4 => rk4_step(prev, params),
        }
        .map_err(|e| match e {
            Error::Domain => Error::IntegrationDiverged { step },
            other => other,
        })?;
        // keep t on the exact grid rather than an accumulated sum
        let next = State {
            t: step as f64 * dt,
            ..next
        };
        if !next.is_finite() {
            return Err(Error::IntegrationDiverged { step });
        }
        states.push(next);
    }
    Ok(Trajectory {
        states,
        params: *params,
    })
}

fn rk4_step(s: &State, p: &SimulatorParams) -> Result<State> {
    let dt = p.dt();
    let deriv = |x: f64, y: f64, z: f64, t: f64| -> Result<(f64, f64, f64)> {
        Ok((f_x(x, y, p), f_y(x, y, p), f_z(x, y, z, t, p)?))
    };
    let k1 = deriv(s.x, s.y, s.z, s.t)?;
    let h = dt / 2.0;
    let k2 = deriv(s.x + h * k1.0, s.y + h * k1.1, s.z + h * k1.2, s.t + h)?;
    let k3 = deriv(s.x + h * k2.0, s.y + h * k2.1, s.z + h * k2.2, s.t + h)?;
    let k4 = deriv(s.x + dt * k3.0, s.y + dt * k3.1, s.z + dt * k3.2, s.t + dt)?;
    let comb = |a: f64, b: f64, c: f64, d: f64| dt / 6.0 * (a + 2.0 * b + 2.0 * c + d);
    Ok(State {
        x: s.x + comb(k1.0, k2.0, k3.0, k4.0),
        y: s.y + comb(k1.1, k2.1, k3.1, k4.1),
        z: s.z + comb(k1.2, k2.2, k3.2, k4.2),
        t: s.t + dt,
    })
}

/// The (x, y) part of the Euler solution. It does not depend on the wave
/// events, only on ω, the step and the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTrack {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// atan2(y, x) at every sample.
    pub phase: Vec<f64>,
    /// Baseline z₀(t_ℓ) at every sample.
    pub baseline: Vec<f64>,
}

impl CycleTrack {
    pub fn new(params: &SimulatorParams, x0: f64, y0: f64) -> Result<Self> {
        let n = params.len;
        let dt = params.dt();
        let (mut x, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let (mut cx, mut cy) = (x0, y0);
        for step in 0..n {
            if !(cx.is_finite() && cy.is_finite()) {
                return Err(Error::IntegrationDiverged { step });
            }
            x.push(cx);
            y.push(cy);
            let (dx, dy) = (f_x(cx, cy, params), f_y(cx, cy, params));
            cx += dx * dt;
            cy += dy * dt;
        }
        let phase = x
            .iter()
            .zip(&y)
            .map(|(&x, &y)| theta_of(x, y))
            .collect::<Result<Vec<_>>>()?;
        let baseline = (0..n)
            .map(|l| baseline(l as f64 * dt, params.wander_amplitude, params.resp_freq))
            .collect();
        Ok(CycleTrack { x, y, phase, baseline })
    }

    /// Event forcing at every sample for the given wave events.
    pub fn forcing(&self, eta: &Eta) -> Vec<f64> {
        self.phase.iter().map(|&ph| event_forcing(ph, eta)).collect()
    }

    /// z component of the Euler solution, starting from `z_init`. Produces the
    /// same values as [`integrate`] with the matching initial (x, y).
    pub fn simulate_z(&self, eta: &Eta, z_init: f64, dt: f64) -> Result<Vec<f64>> {
        let n = self.phase.len();
        let mut z = Vec::with_capacity(n);
        if n == 0 {
            return Ok(z);
        }
        let mut cur = z_init;
        z.push(cur);
        for l in 0..n - 1 {
            let dz = event_forcing(self.phase[l], eta) - (cur - self.baseline[l]);
            cur += dz * dt;
            if !cur.is_finite() {
                return Err(Error::IntegrationDiverged { step: l + 1 });
            }
            z.push(cur);
        }
        Ok(z)
    }
}

/// Sample index at which the default starting point reaches `theta`.
pub fn event_sample_index(theta: f64, params: &SimulatorParams) -> f64 {
    let start = INIT_Y.atan2(INIT_X);
    let advance = wrap_angle(theta - start).rem_euclid(2.0 * PI);
    advance / (params.omega * params.dt())
}
