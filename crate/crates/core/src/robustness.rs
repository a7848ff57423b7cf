//! Closed-form robustness metrics (H∞ norms, stability and delay margins) and
//! a frequency sweep that checks the H∞ values numerically.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{self, BoundCertificate, Spectrum};
use crate::topology::{md_reference_count, GroundedSystem};

/// Eigenvalues at or below this are treated as "not grounded".
pub const GROUNDING_TOL: f64 = 1e-12;

/// An H∞ value or bound that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HinfValue {
    Finite(f64),
    Unbounded,
}

impl HinfValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            HinfValue::Finite(v) => Some(v),
            HinfValue::Unbounded => None,
        }
    }
}

impl fmt::Display for HinfValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HinfValue::Finite(v) => write!(f, "{v}"),
            HinfValue::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for HinfValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HinfValue::Finite(v) => s.serialize_f64(*v),
            HinfValue::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

/// Which error dynamics a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    /// First order: `u' = -Lg u`.
    Velocity,
    /// Second order: `p'' = -Lg (p + p')`.
    Formation,
}

impl fmt::Display for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dynamics::Velocity => "velocity",
            Dynamics::Formation => "formation",
        })
    }
}

/// H∞ norm of the velocity dynamics, `1/λ₁`.
pub fn hinf_velocity(spec: &Spectrum) -> HinfValue {
    let l1 = spec.min();
    if l1 > GROUNDING_TOL {
        HinfValue::Finite(1.0 / l1)
    } else {
        HinfValue::Unbounded
    }
}

/// Peak over frequency of `|1 / (s² + λs + λ)|` on the imaginary axis.
pub fn peak_amplitude(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveEigenvalue(lambda));
    }
    Ok(if lambda <= 2.0 {
        2.0 / (lambda.powf(1.5) * (4.0 - lambda).sqrt())
    } else {
        1.0 / lambda
    })
}

/// H∞ norm of the formation dynamics, the largest per-mode peak amplitude.
/// Every eigenvalue is checked rather than assuming the smallest dominates.
pub fn hinf_formation(spec: &Spectrum) -> Result<f64> {
    spec.values()
        .iter()
        .map(|&l| peak_amplitude(l))
        .try_fold(0.0f64, |acc, v| Ok(acc.max(v?)))
}

/// Graph-theoretic bracket on the velocity H∞ norm:
/// `1/max β <= |F|/|∂R| <= ‖G‖∞ <= 1/min β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityHinfBounds {
    pub lower_max_beta: f64,
    pub lower_boundary: f64,
    pub upper_min_beta: HinfValue,
}

pub fn velocity_hinf_bounds(gs: &GroundedSystem) -> VelocityHinfBounds {
    let upper = match gs.min_beta() {
        0 => HinfValue::Unbounded,
        b => HinfValue::Finite(1.0 / b as f64),
    };
    VelocityHinfBounds {
        lower_max_beta: 1.0 / gs.max_beta() as f64,
        lower_boundary: gs.follower_count() as f64 / gs.boundary_size() as f64,
        upper_min_beta: upper,
    }
}

/// Sorted, deduplicated, nonnegative frequencies in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub const DEFAULT_POINTS: usize = 4000;
    pub const DEFAULT_LO: f64 = 1e-4;
    pub const DEFAULT_HI: f64 = 1e3;

    pub fn from_points(points: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut omegas: Vec<f64> = points.into_iter().collect();
        if let Some(bad) = omegas.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::param(format!("frequency {bad} is not a finite nonnegative value")));
        }
        omegas.sort_by(f64::total_cmp);
        omegas.dedup();
        if omegas.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { omegas })
    }

    /// `points` log-spaced values over `[lo, hi]`.
    pub fn logspace(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::param(format!("bad log grid bounds [{lo}, {hi}]")));
        }
        if points == 0 {
            return Err(Error::EmptyGrid);
        }
        let (a, b) = (lo.log10(), hi.log10());
        let step = if points > 1 { (b - a) / (points - 1) as f64 } else { 0.0 };
        Self::from_points((0..points).map(|i| 10f64.powf(a + step * i as f64)))
    }

    /// Default log grid plus the analytic peak locations for the given
    /// dynamics: `ω = 0` for velocity, `ω² = λ(1 - λ/2)` for each `λ <= 2`
    /// for formation.
    pub fn default_for(dynamics: Dynamics, spec: &Spectrum) -> Self {
        let base = Self::logspace(Self::DEFAULT_LO, Self::DEFAULT_HI, Self::DEFAULT_POINTS)
            .expect("default grid is valid");
        let extra: Vec<f64> = match dynamics {
            Dynamics::Velocity => vec![0.0],
            Dynamics::Formation => spec
                .values()
                .iter()
                .filter(|&&l| l > 0.0 && l <= 2.0)
                .map(|&l| (l * (1.0 - l / 2.0)).sqrt())
                .collect(),
        };
        Self::from_points(base.omegas.into_iter().chain(extra)).expect("nonempty")
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }
}

/// Largest singular value of the transfer matrix over a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub dynamics: Dynamics,
    pub omegas: Vec<f64>,
    pub gains: Vec<f64>,
    pub peak: (f64, f64),
}

impl FrequencyResponse {
    /// `omega,gain` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "omega,gain")?;
        for (o, g) in self.omegas.iter().zip(&self.gains) {
            writeln!(w, "{o},{g}")?;
        }
        Ok(())
    }
}

/// Gain of one mode with eigenvalue `lambda` at frequency `omega`.
pub fn modal_gain(dynamics: Dynamics, lambda: f64, omega: f64) -> f64 {
    match dynamics {
        // 1 / |jω + λ|
        Dynamics::Velocity => 1.0 / lambda.hypot(omega),
        // 1 / |λ - ω² + jλω|
        Dynamics::Formation => 1.0 / (lambda - omega * omega).hypot(lambda * omega),
    }
}

/// Frequency sweep using the eigenvalues of the symmetric `Lg`: both transfer
/// matrices are diagonalized by its eigenvectors, so the largest singular
/// value at each ω is the largest modal gain.
pub fn sweep_hinf_spectrum(
    spec: &Spectrum,
    dynamics: Dynamics,
    grid: &FrequencyGrid,
) -> Result<FrequencyResponse> {
    if let Some(&bad) = spec.values().iter().find(|&&l| l <= GROUNDING_TOL) {
        return Err(Error::NonPositiveEigenvalue(bad));
    }
    let omegas = grid.omegas().to_vec();
    let gains = par::map(&omegas, |&w| {
        spec.values()
            .iter()
            .map(|&l| modal_gain(dynamics, l, w))
            .fold(0.0, f64::max)
    });
    let (i, g) = par::argmax(&gains).ok_or(Error::EmptyGrid)?;
    Ok(FrequencyResponse {
        dynamics,
        peak: (omegas[i], g),
        omegas,
        gains,
    })
}

/// [`sweep_hinf_spectrum`] on the grounded Laplacian of `gs`.
pub fn sweep_hinf(
    gs: &GroundedSystem,
    dynamics: Dynamics,
    grid: &FrequencyGrid,
) -> Result<FrequencyResponse> {
    let spec = spectral::lg_spectrum(gs)?;
    sweep_hinf_spectrum(&spec, dynamics, grid)
}

/// Threshold predicates for `‖G‖∞ < γ` on the velocity dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GammaConditions {
    /// `max β > floor(1/γ)`.
    pub necessary_ok: bool,
    /// `min β > ceil(1/γ)`, as literally stated.
    pub sufficient_ok: bool,
    /// `min β >= ceil(1/γ)`, which is what guarantees `‖G‖∞ <= γ`.
    pub sufficient_nonstrict_ok: bool,
    /// `1/γ` is an integer, where the strict and non-strict readings differ
    /// in what they certify.
    pub strictness_ambiguous: bool,
}

pub fn gamma_conditions(gs: &GroundedSystem, gamma: f64) -> Result<GammaConditions> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("gamma must be a positive finite value, got {gamma}")));
    }
    let inv = 1.0 / gamma;
    let floor = inv.floor();
    let ceil = inv.ceil();
    let (min_b, max_b) = (gs.min_beta() as f64, gs.max_beta() as f64);
    Ok(GammaConditions {
        necessary_ok: max_b > floor,
        sufficient_ok: min_b > ceil,
        sufficient_nonstrict_ok: min_b >= ceil,
        strictness_ambiguous: floor == ceil,
    })
}

/// Fewest references that admit `‖G‖∞ <= 1`, `ceil(n/(2k+1))`.
pub fn min_refs_nonexpansive(n: usize, k: usize) -> usize {
    md_reference_count(n, k)
}

/// Exact delay threshold `π/(2 λ_max)` of the delayed velocity dynamics;
/// stable iff τ is strictly below it.
pub fn delay_margin_velocity(spec: &Spectrum) -> Result<f64> {
    let lmax = spec.max();
    if !(lmax > 0.0) {
        return Err(Error::NonPositiveEigenvalue(lmax));
    }
    Ok(PI / (2.0 * lmax))
}

/// Connectivity-only delay thresholds of the velocity dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayBoundsK {
    /// Stable for τ <= π/(8k).
    pub sufficient: f64,
    /// Unstable for τ > π/(2k).
    pub necessary: f64,
}

pub fn delay_bounds_k(k: usize) -> DelayBoundsK {
    let k = k as f64;
    DelayBoundsK {
        sufficient: PI / (8.0 * k),
        necessary: PI / (2.0 * k),
    }
}

/// Sufficient delay thresholds of the formation dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormationDelayBounds {
    /// `1/ρ(B)`.
    pub rho_bound: f64,
    /// `1/(4k)`.
    pub k_bound: f64,
}

pub fn delay_margin_formation(spec: &Spectrum, k: usize) -> Result<FormationDelayBounds> {
    let fs = spectral::map_formation_spectrum(spec)?;
    let rho = spectral::spectral_radius_formation(&fs)?;
    Ok(FormationDelayBounds {
        rho_bound: 1.0 / rho,
        k_bound: 1.0 / (4.0 * k as f64),
    })
}

/// Exact delay margin of `ẋ = B·x(t − τ)`: each mode `μ = r·e^{jφ}` of `B`
/// reaches the imaginary axis at `τ = (|φ| − π/2)/r`, and the margin is the
/// smallest such delay.
pub fn delay_margin_formation_exact(spec: &Spectrum) -> Result<f64> {
    let fs = spectral::map_formation_spectrum(spec)?;
    let mut best = f64::INFINITY;
    for mu in fs.values() {
        let r = mu.abs();
        if !(mu.re < 0.0) || r == 0.0 {
            return Err(Error::NonPositiveEigenvalue(-mu.re));
        }
        let phi = mu.im.abs().atan2(mu.re);
        best = best.min((phi - FRAC_PI_2) / r);
    }
    Ok(best)
}

/// Every closed-form robustness figure for one grounded platoon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub n: usize,
    pub k: usize,
    pub refs: Vec<usize>,
    pub lg_spectrum: Vec<f64>,
    pub lambda1: f64,
    pub lambda_max: f64,
    pub hinf_velocity: HinfValue,
    pub hinf_velocity_bounds: VelocityHinfBounds,
    pub hinf_formation: f64,
    pub margin_velocity: f64,
    pub margin_formation: f64,
    pub margin_formation_lb: f64,
    pub formation_spectral_radius: f64,
    pub delay_velocity_max: f64,
    pub delay_formation_sufficient: f64,
    pub delay_formation_k_sufficient: f64,
    pub delay_formation_exact: f64,
    pub delay_k_sufficient: f64,
    pub delay_k_necessary: f64,
    pub min_refs_nonexpansive: usize,
    pub betas: Vec<usize>,
    pub boundary_size: usize,
    pub dmax_f: usize,
    pub stochasticity_defect: f64,
    pub lambda_min_certificate: BoundCertificate,
    pub lambda_max_certificate: BoundCertificate,
}

impl RobustnessReport {
    pub fn compute(gs: &GroundedSystem) -> Result<Self> {
        let spec = spectral::lg_spectrum(gs)?;
        Self::from_spectrum(gs, spec)
    }

    pub fn from_spectrum(gs: &GroundedSystem, spec: Spectrum) -> Result<Self> {
        let fs = spectral::map_formation_spectrum(&spec)?;
        let rho = spectral::spectral_radius_formation(&fs)?;
        let k_bounds = delay_bounds_k(gs.k());
        let f_bounds = delay_margin_formation(&spec, gs.k())?;
        Ok(Self {
            n: gs.n(),
            k: gs.k(),
            refs: gs.refs().refs().to_vec(),
            lambda1: spec.min(),
            lambda_max: spec.max(),
            hinf_velocity: hinf_velocity(&spec),
            hinf_velocity_bounds: velocity_hinf_bounds(gs),
            hinf_formation: hinf_formation(&spec)?,
            margin_velocity: spec.min(),
            margin_formation: fs.stability_margin(),
            margin_formation_lb: spec.min() / 2.0,
            formation_spectral_radius: rho,
            delay_velocity_max: delay_margin_velocity(&spec)?,
            delay_formation_sufficient: f_bounds.rho_bound,
            delay_formation_k_sufficient: f_bounds.k_bound,
            delay_formation_exact: delay_margin_formation_exact(&spec)?,
            delay_k_sufficient: k_bounds.sufficient,
            delay_k_necessary: k_bounds.necessary,
            min_refs_nonexpansive: min_refs_nonexpansive(gs.n(), gs.k()),
            betas: gs.betas().to_vec(),
            boundary_size: gs.boundary_size(),
            dmax_f: gs.dmax_f(),
            stochasticity_defect: spectral::stochasticity_defect(gs)?,
            lambda_min_certificate: spectral::certify_lambda_min(gs, &spec),
            lambda_max_certificate: spectral::certify_lambda_max(gs, &spec),
            lg_spectrum: spec.values().to_vec(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plain-text summary for terminals.
    pub fn summary(&self) -> String {
        let yes = |b: bool| if b { "holds" } else { "VIOLATED" };
        format!(
            "P({n},{k}) with references {refs:?}\n\
             lambda_1(Lg)               {l1:.9}\n\
             lambda_max(Lg)             {lm:.9}\n\
             H-inf velocity             {hv}\n\
             H-inf formation            {hf:.9}\n\
             formation margin           {mf:.9} (>= {mflb:.9})\n\
             spectral radius (formation) {rho:.9}\n\
             delay margin velocity      {dv:.9}\n\
             delay bounds (k)           stable <= {ks:.6}, unstable > {kn:.6}\n\
             formation delay (suff.)    {df:.9} (1/(4k) = {dk:.6})\n\
             formation delay (exact)    {dfe:.9}\n\
             min refs for H-inf <= 1    {mr}\n\
             lambda_1 certificate       {c1}\n\
             lambda_max certificate     {c2}\n\
             stochasticity defect       {sd:e}\n",
            n = self.n,
            k = self.k,
            refs = self.refs,
            l1 = self.lambda1,
            lm = self.lambda_max,
            hv = self.hinf_velocity,
            hf = self.hinf_formation,
            mf = self.margin_formation,
            mflb = self.margin_formation_lb,
            rho = self.formation_spectral_radius,
            dv = self.delay_velocity_max,
            ks = self.delay_k_sufficient,
            kn = self.delay_k_necessary,
            df = self.delay_formation_sufficient,
            dk = self.delay_formation_k_sufficient,
            dfe = self.delay_formation_exact,
            mr = self.min_refs_nonexpansive,
            c1 = yes(self.lambda_min_certificate.holds),
            c2 = yes(self.lambda_max_certificate.holds),
            sd = self.stochasticity_defect,
        )
    }
}
