//! Fixed-step simulation of the velocity and formation error dynamics with a
//! constant communication delay.
//!
//! The integrator is classical RK4. Delayed terms are read from a history
//! buffer holding every accepted step; half-step stage times are filled in by
//! cubic Lagrange interpolation through the four nearest stored samples.
//! History before `t = 0` is the constant initial state.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::robustness::Dynamics;
use crate::spectral;
use crate::topology::GroundedSystem;

/// Runs whose state norm exceeds this are cut short and marked diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;
/// A run is stable when the trailing-window decay ratio is below this.
pub const STABLE_RATIO: f64 = 0.2;
/// Fraction of the horizon used as the trailing classification window.
pub const TRAILING_FRACTION: f64 = 0.25;
/// Fraction of the trailing window over which each end's envelope is taken.
const ENVELOPE_FRACTION: f64 = 0.1;
pub const MAX_HORIZON: f64 = 500.0;

/// Linear error dynamics of the follower vehicles.
#[derive(Debug, Clone)]
pub struct SimSystem {
    kind: Dynamics,
    lg: DMatrix<f64>,
    l12: Option<DMatrix<f64>>,
    u_ref: f64,
    kp: f64,
    ku: f64,
    delta: Option<DMatrix<f64>>,
    // Lg as sparse rows, diagonal included
    rows: Vec<Vec<(usize, f64)>>,
}

impl SimSystem {
    pub fn new(kind: Dynamics, gs: &GroundedSystem) -> Self {
        let mut sys = Self::from_lg(kind, gs.lg_f64());
        sys.l12 = Some(gs.l12_f64());
        sys
    }

    pub fn velocity(gs: &GroundedSystem) -> Self {
        Self::new(Dynamics::Velocity, gs)
    }

    pub fn formation(gs: &GroundedSystem) -> Self {
        Self::new(Dynamics::Formation, gs)
    }

    /// System defined directly by a (symmetric) grounded Laplacian.
    pub fn from_lg(kind: Dynamics, lg: DMatrix<f64>) -> Self {
        let rows = (0..lg.nrows())
            .map(|i| {
                (0..lg.ncols())
                    .filter(|&j| lg[(i, j)] != 0.0)
                    .map(|j| (j, lg[(i, j)]))
                    .collect()
            })
            .collect();
        Self {
            kind,
            lg,
            l12: None,
            u_ref: 0.0,
            kp: 1.0,
            ku: 1.0,
            delta: None,
            rows,
        }
    }

    pub fn with_gains(mut self, kp: f64, ku: f64) -> Result<Self> {
        if !(kp > 0.0 && ku > 0.0) {
            return Err(Error::param(format!("gains must be positive, got kp={kp}, ku={ku}")));
        }
        self.kp = kp;
        self.ku = ku;
        Ok(self)
    }

    pub fn with_reference_velocity(mut self, u_ref: f64) -> Self {
        self.u_ref = u_ref;
        self
    }

    /// Desired spacings `Δ[i][j]` between followers. Must satisfy
    /// `Δij = Δik + Δkj`.
    pub fn with_spacing(mut self, delta: DMatrix<f64>) -> Result<Self> {
        let m = self.followers();
        if delta.nrows() != m || delta.ncols() != m {
            return Err(Error::param(format!("spacing matrix must be {m}x{m}")));
        }
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    if (delta[(i, j)] - delta[(i, k)] - delta[(k, j)]).abs() > 1e-9 {
                        return Err(Error::param(format!(
                            "spacing is inconsistent at ({},{},{})",
                            i + 1,
                            j + 1,
                            k + 1
                        )));
                    }
                }
            }
        }
        self.delta = Some(delta);
        Ok(self)
    }

    pub fn kind(&self) -> Dynamics {
        self.kind
    }

    pub fn lg(&self) -> &DMatrix<f64> {
        &self.lg
    }

    pub fn followers(&self) -> usize {
        self.lg.nrows()
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            Dynamics::Velocity => self.followers(),
            Dynamics::Formation => 2 * self.followers(),
        }
    }

    /// Converts error coordinates back to physical quantities at time `t`:
    /// follower velocities for the velocity dynamics, follower positions for
    /// the formation dynamics (anchored so the first follower's desired
    /// position is `u_ref * t`).
    pub fn physical_state(&self, error: &[f64], t: f64) -> Result<Vec<f64>> {
        let m = self.followers();
        match self.kind {
            Dynamics::Velocity => {
                let ss = match &self.l12 {
                    Some(l12) => {
                        let rhs = -(l12 * nalgebra::DVector::from_element(l12.ncols(), self.u_ref));
                        self.lg.clone().lu().solve(&rhs).ok_or(Error::Singular)?
                    }
                    None => nalgebra::DVector::from_element(m, self.u_ref),
                };
                Ok((0..m).map(|i| error[i] + ss[i]).collect())
            }
            Dynamics::Formation => Ok((0..m)
                .map(|i| {
                    let offset = self.delta.as_ref().map_or(0.0, |d| d[(i, 0)]);
                    error[i] + self.u_ref * t + offset
                })
                .collect()),
        }
    }

    fn lg_row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * x[j]).sum()
    }
}

/// How the communication delay enters the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayMode {
    /// Every state read is delayed: `x' = A x(t - τ)`.
    FullDelay,
    /// Each vehicle reads its own state instantly and its neighbors' with
    /// delay: `x' = -D x(t) + A x(t - τ)`. Velocity dynamics only.
    SelfUndelayed,
    /// No delay.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelaySpec {
    pub tau: f64,
    pub mode: DelayMode,
}

impl DelaySpec {
    pub fn none() -> Self {
        Self {
            tau: 0.0,
            mode: DelayMode::None,
        }
    }

    pub fn full(tau: f64) -> Self {
        Self {
            tau,
            mode: DelayMode::FullDelay,
        }
    }

    pub fn self_undelayed(tau: f64) -> Self {
        Self {
            tau,
            mode: DelayMode::SelfUndelayed,
        }
    }

    fn is_delayed(&self) -> bool {
        self.mode != DelayMode::None && self.tau > 0.0
    }
}

/// External disturbance `w(t)` entering through the input matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Disturbance {
    Zero,
    /// `w_i(t) = amplitude * sin(omega * t + i * phase_step)`.
    Sinusoid {
        amplitude: f64,
        omega: f64,
        phase_step: f64,
    },
    /// Uniform noise in `[-amplitude, amplitude]`, held over each step.
    Noise { amplitude: f64, seed: u64 },
}

impl Disturbance {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Disturbance::Noise { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

/// Integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub horizon: f64,
    pub step: f64,
    /// Upper bound on stored samples; the integrator still keeps its own
    /// full-resolution history.
    pub max_samples: usize,
}

impl SimParams {
    pub fn new(horizon: f64, step: f64) -> Self {
        Self {
            horizon,
            step,
            max_samples: 4000,
        }
    }
}

/// `min(1e-3, τ/40)` for delayed runs, `1e-3` otherwise.
pub fn default_step(tau: f64) -> f64 {
    if tau > 0.0 {
        (tau / 40.0).min(1e-3)
    } else {
        1e-3
    }
}

/// `200/λ₁` capped at [`MAX_HORIZON`].
pub fn default_horizon(lambda1: f64) -> f64 {
    (200.0 / lambda1).min(MAX_HORIZON)
}

/// Horizon for runs where only the neighbor terms are delayed. The slowest
/// mode then decays at roughly `λ₁/(1 + d·τ)`, so the undelayed horizon is
/// stretched by that factor before the cap.
pub fn default_horizon_offdiagonal(lambda1: f64, dmax: f64, tau: f64) -> f64 {
    (200.0 * (1.0 + dmax * tau) / lambda1).min(MAX_HORIZON)
}

/// Sampled state history of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    /// State at the last integrated step (which may fall between samples).
    pub final_time: f64,
    pub final_state: Vec<f64>,
    /// Integration step.
    pub step: f64,
    pub horizon: f64,
    pub tau_requested: f64,
    /// Delay actually simulated after rounding to a whole number of steps.
    pub tau_effective: f64,
    /// Time at which the norm exceeded [`DIVERGENCE_NORM`] or went non-finite.
    pub diverged_at: Option<f64>,
}

/// Metadata written ahead of a trajectory CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryMeta {
    pub n: usize,
    pub k: usize,
    pub seed: Option<u64>,
}

impl Trajectory {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn final_norm(&self) -> f64 {
        l2(&self.final_state)
    }

    /// `t,norm,x_1,…,x_m` rows behind a `#` metadata block.
    pub fn write_csv<W: Write>(&self, meta: &TrajectoryMeta, mut w: W) -> std::io::Result<()> {
        let seed = meta.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        writeln!(
            w,
            "# n={}, k={}, tau={}, step={}, seed={}",
            meta.n, meta.k, self.tau_effective, self.step, seed
        )?;
        writeln!(w, "# tau_requested={}, history=constant", self.tau_requested)?;
        if let Some(t) = self.diverged_at {
            writeln!(w, "# diverged_at={t}")?;
        }
        let dim = self.states.first().map_or(0, Vec::len);
        write!(w, "t,norm")?;
        for i in 1..=dim {
            write!(w, ",x_{i}")?;
        }
        writeln!(w)?;
        for ((t, nrm), x) in self.times.iter().zip(&self.norms).zip(&self.states) {
            write!(w, "{t},{nrm}")?;
            for v in x {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Lagrange weights for the value at `x` through nodes `0, 1, 2, 3`.
fn lagrange4(x: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for (i, wi) in w.iter_mut().enumerate() {
        for j in 0..4 {
            if i != j {
                *wi *= (x - j as f64) / (i as f64 - j as f64);
            }
        }
    }
    w
}

/// Full-resolution ring buffer of past states indexed by absolute step.
struct History {
    x0: Vec<f64>,
    buf: Vec<Vec<f64>>,
}

impl History {
    fn new(x0: &[f64], lag: usize) -> Self {
        let cap = lag + 4;
        Self {
            x0: x0.to_vec(),
            buf: vec![x0.to_vec(); cap],
        }
    }

    fn push(&mut self, idx: usize, x: &[f64]) {
        let cap = self.buf.len();
        self.buf[idx % cap].copy_from_slice(x);
    }

    fn get(&self, idx: i64) -> &[f64] {
        if idx < 0 {
            &self.x0
        } else {
            &self.buf[idx as usize % self.buf.len()]
        }
    }
}

struct Rhs<'a> {
    sys: &'a SimSystem,
    mode: DelayMode,
}

impl Rhs<'_> {
    fn eval(&self, now: &[f64], delayed: &[f64], w: Option<&[f64]>, out: &mut [f64]) {
        let sys = self.sys;
        let m = sys.followers();
        match sys.kind {
            Dynamics::Velocity => {
                for (i, o) in out.iter_mut().enumerate().take(m) {
                    *o = match self.mode {
                        DelayMode::FullDelay => -sys.ku * sys.lg_row_dot(i, delayed),
                        DelayMode::None => -sys.ku * sys.lg_row_dot(i, now),
                        DelayMode::SelfUndelayed => {
                            let mut acc = 0.0;
                            for &(j, v) in &sys.rows[i] {
                                acc += if j == i { v * now[j] } else { v * delayed[j] };
                            }
                            -sys.ku * acc
                        }
                    };
                }
                if let Some(w) = w {
                    for i in 0..m {
                        out[i] += w[i];
                    }
                }
            }
            Dynamics::Formation => {
                let src = if self.mode == DelayMode::None { now } else { delayed };
                let (pos, vel) = src.split_at(m);
                for i in 0..m {
                    out[i] = vel[i];
                    let mut acc = 0.0;
                    for &(j, v) in &sys.rows[i] {
                        acc += v * (sys.kp * pos[j] + sys.ku * vel[j]);
                    }
                    out[m + i] = -acc;
                }
                if let Some(w) = w {
                    for i in 0..m {
                        out[m + i] += w[i];
                    }
                }
            }
        }
    }
}

struct DisturbanceSampler<'a> {
    kind: &'a Disturbance,
    rng: Option<ChaCha8Rng>,
    held: Vec<f64>,
}

impl<'a> DisturbanceSampler<'a> {
    fn new(kind: &'a Disturbance, channels: usize) -> Self {
        let rng = match kind {
            Disturbance::Noise { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        Self {
            kind,
            rng,
            held: vec![0.0; channels],
        }
    }

    /// Called once per step before the stages.
    fn advance(&mut self) {
        if let (Disturbance::Noise { amplitude, .. }, Some(rng)) = (self.kind, self.rng.as_mut()) {
            for v in &mut self.held {
                *v = amplitude * rng.random_range(-1.0..=1.0);
            }
        }
    }

    fn at(&mut self, t: f64) -> Option<&[f64]> {
        match *self.kind {
            Disturbance::Zero => None,
            Disturbance::Sinusoid {
                amplitude,
                omega,
                phase_step,
            } => {
                for (i, v) in self.held.iter_mut().enumerate() {
                    *v = amplitude * (omega * t + i as f64 * phase_step).sin();
                }
                Some(&self.held)
            }
            Disturbance::Noise { .. } => Some(&self.held),
        }
    }
}

/// Integrates `sys` from `x0` over `[0, horizon]`.
pub fn simulate(
    sys: &SimSystem,
    delay: DelaySpec,
    x0: &[f64],
    params: &SimParams,
    disturbance: Option<&Disturbance>,
) -> Result<Trajectory> {
    let SimParams {
        horizon,
        step,
        max_samples,
    } = *params;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::param(format!("step must be positive, got {step}")));
    }
    if !(horizon >= 10.0 * step) {
        return Err(Error::param(format!(
            "horizon {horizon} must cover at least 10 steps of {step}"
        )));
    }
    if !(delay.tau >= 0.0 && delay.tau.is_finite()) {
        return Err(Error::param(format!("delay must be nonnegative, got {}", delay.tau)));
    }
    if delay.mode == DelayMode::SelfUndelayed && sys.kind != Dynamics::Velocity {
        return Err(Error::param("self-undelayed mode applies to the velocity dynamics only"));
    }
    let dim = sys.state_dim();
    if x0.len() != dim {
        return Err(Error::param(format!(
            "initial state has length {}, expected {dim}",
            x0.len()
        )));
    }

    let nsteps = (horizon / step).round() as usize;
    let (mode, lag) = if delay.is_delayed() {
        (delay.mode, ((delay.tau / step).round() as usize).max(1))
    } else {
        (DelayMode::None, 0)
    };
    let tau_effective = lag as f64 * step;
    let stride = nsteps.div_ceil(max_samples.max(1)).max(1);

    let rhs = Rhs { sys, mode };
    let mut history = History::new(x0, lag);
    let mut dist = disturbance.map(|d| DisturbanceSampler::new(d, sys.followers()));

    // Interpolation weights for the half-step delayed read. With lag >= 2 the
    // nodes j-1..j+2 straddle the point; with lag == 1 only j-2..j+1 exist.
    let mid_centered = lagrange4(1.5);
    let mid_shifted = lagrange4(2.5);

    let mut x = x0.to_vec();
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let mut norms = vec![l2(&x)];
    let mut diverged_at = None;

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut d_mid = vec![0.0; dim];
    let empty: Vec<f64> = Vec::new();

    let mut last_step = 0;
    for n in 0..nsteps {
        let t = n as f64 * step;
        if let Some(d) = dist.as_mut() {
            d.advance();
        }
        let (d0, d1): (&[f64], &[f64]) = if lag > 0 {
            let j = n as i64 - lag as i64;
            let (start, w) = if lag >= 2 {
                (j - 1, &mid_centered)
            } else {
                (j - 1 - 1, &mid_shifted)
            };
            for (c, dm) in d_mid.iter_mut().enumerate() {
                *dm = (0..4).map(|q| w[q] * history.get(start + q as i64)[c]).sum();
            }
            (history.get(j), history.get(j + 1))
        } else {
            (&empty, &empty)
        };
        let d_half: &[f64] = if lag > 0 { &d_mid } else { &empty };

        let w0 = dist.as_mut().and_then(|d| d.at(t).map(<[f64]>::to_vec));
        rhs.eval(&x, d0, w0.as_deref(), &mut k1);

        let wh = dist.as_mut().and_then(|d| d.at(t + 0.5 * step).map(<[f64]>::to_vec));
        for c in 0..dim {
            tmp[c] = x[c] + 0.5 * step * k1[c];
        }
        rhs.eval(&tmp, d_half, wh.as_deref(), &mut k2);
        for c in 0..dim {
            tmp[c] = x[c] + 0.5 * step * k2[c];
        }
        rhs.eval(&tmp, d_half, wh.as_deref(), &mut k3);

        let w1 = dist.as_mut().and_then(|d| d.at(t + step).map(<[f64]>::to_vec));
        for c in 0..dim {
            tmp[c] = x[c] + step * k3[c];
        }
        rhs.eval(&tmp, d1, w1.as_deref(), &mut k4);

        for c in 0..dim {
            x[c] += step / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        let idx = n + 1;
        history.push(idx, &x);
        last_step = idx;
        let norm = l2(&x);
        let t_next = idx as f64 * step;
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            diverged_at = Some(t_next);
            if norm.is_finite() {
                times.push(t_next);
                states.push(x.clone());
                norms.push(norm);
            }
            break;
        }
        if idx % stride == 0 {
            times.push(t_next);
            states.push(x.clone());
            norms.push(norm);
        }
    }

    Ok(Trajectory {
        times,
        states,
        norms,
        final_time: last_step as f64 * step,
        final_state: x,
        step,
        horizon,
        tau_requested: delay.tau,
        tau_effective,
        diverged_at,
    })
}

/// Velocity dynamics where each vehicle sees its own state without delay.
pub fn simulate_offdiagonal(
    sys: &SimSystem,
    tau: f64,
    x0: &[f64],
    params: &SimParams,
) -> Result<Trajectory> {
    if sys.kind != Dynamics::Velocity {
        return Err(Error::param("off-diagonal delay is defined for the velocity dynamics only"));
    }
    simulate(sys, DelaySpec::self_undelayed(tau), x0, params, None)
}

/// Stable/unstable call for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// Norm envelope at the end of the trailing window over the envelope at
    /// its start (0/0 counts as 0).
    pub decay_ratio: f64,
    pub horizon: f64,
}

/// Stable iff the norm envelope shrinks by more than [`STABLE_RATIO`] across
/// the trailing quarter of the horizon. Diverged runs are unstable.
pub fn classify(traj: &Trajectory) -> StabilityVerdict {
    let horizon = traj.horizon;
    if traj.diverged() {
        return StabilityVerdict {
            stable: false,
            decay_ratio: f64::INFINITY,
            horizon,
        };
    }
    let t_end = traj.times.last().copied().unwrap_or(0.0);
    let window = TRAILING_FRACTION * t_end;
    let t_start = t_end - window;
    let env = ENVELOPE_FRACTION * window;
    let envelope = |lo: f64, hi: f64| {
        traj.times
            .iter()
            .zip(&traj.norms)
            .filter(|(t, _)| **t >= lo - 1e-12 && **t <= hi + 1e-12)
            .map(|(_, n)| *n)
            .fold(0.0, f64::max)
    };
    let start = envelope(t_start, t_start + env);
    let end = envelope(t_end - env, t_end).max(if t_end == traj.final_time {
        0.0
    } else {
        traj.final_norm()
    });
    let decay_ratio = if end == 0.0 {
        0.0
    } else if start == 0.0 {
        f64::INFINITY
    } else {
        end / start
    };
    StabilityVerdict {
        stable: decay_ratio < STABLE_RATIO,
        decay_ratio,
        horizon,
    }
}

/// Deterministic initial state, uniform in `[-1, 1]`.
pub fn random_state(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Settings for [`threshold_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub mode: DelayMode,
    pub horizon: f64,
    /// Fixed step, or `None` for [`default_step`] at each probed delay.
    pub step: Option<f64>,
    pub seed: u64,
    /// Decay ratio below which a probe counts as stable. The scan uses 1
    /// (any net decay) so the located delay sits on the sharp boundary
    /// rather than where decay becomes fast.
    pub stable_ratio: f64,
}

impl ScanOptions {
    /// Horizon long enough for both the slowest mode (λ₁) and the
    /// near-critical fastest mode (λ_max) to separate.
    pub fn for_system(sys: &SimSystem) -> Result<Self> {
        let spec = spectral::eig_sym(sys.lg())?;
        let horizon = (200.0 / spec.min()).max(2000.0 / spec.max()).min(MAX_HORIZON);
        Ok(Self {
            mode: DelayMode::FullDelay,
            horizon,
            step: None,
            seed: 0x5eed,
            stable_ratio: 1.0,
        })
    }
}

/// Runs one delayed simulation and classifies it against
/// `opts.stable_ratio`.
pub fn verdict_at(sys: &SimSystem, tau: f64, opts: &ScanOptions) -> Result<StabilityVerdict> {
    let x0 = random_state(sys.state_dim(), opts.seed);
    let step = opts.step.unwrap_or_else(|| default_step(tau));
    let delay = DelaySpec {
        tau,
        mode: opts.mode,
    };
    let traj = simulate(sys, delay, &x0, &SimParams::new(opts.horizon, step), None)?;
    let mut v = classify(&traj);
    v.stable = v.decay_ratio < opts.stable_ratio;
    Ok(v)
}

/// Bisects on τ between a stable `tau_lo` and an unstable `tau_hi` until the
/// bracket is narrower than `tolerance`; returns the bracket midpoint.
pub fn threshold_scan(
    sys: &SimSystem,
    tau_lo: f64,
    tau_hi: f64,
    tolerance: f64,
    opts: &ScanOptions,
) -> Result<f64> {
    if !(tau_lo >= 0.0 && tau_hi > tau_lo) {
        return Err(Error::Bracket {
            lo: tau_lo,
            hi: tau_hi,
            reason: "need 0 <= lo < hi".into(),
        });
    }
    if !(tolerance > 0.0) {
        return Err(Error::param("tolerance must be positive"));
    }
    if !verdict_at(sys, tau_lo, opts)?.stable {
        return Err(Error::Bracket {
            lo: tau_lo,
            hi: tau_hi,
            reason: "lower delay is already unstable".into(),
        });
    }
    if verdict_at(sys, tau_hi, opts)?.stable {
        return Err(Error::Bracket {
            lo: tau_lo,
            hi: tau_hi,
            reason: "upper delay is still stable".into(),
        });
    }
    let (mut lo, mut hi) = (tau_lo, tau_hi);
    while hi - lo >= tolerance {
        let mid = 0.5 * (lo + hi);
        if verdict_at(sys, mid, opts)?.stable {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
