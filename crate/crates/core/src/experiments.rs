//! Scenario runners behind the CLI. Each runner returns its outputs as
//! in-memory files so callers decide where they land; contents depend only
//! on the config (and its seed).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{DisturbanceKind, Experiment, ScenarioConfig, SweepMode};
use crate::dde_sim::{
    self, classify, random_state, DelaySpec, Disturbance, SimParams, SimSystem, StabilityVerdict,
    TrajectoryMeta,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::par;
use crate::robustness::{
    self, Dynamics, FrequencyGrid, HinfValue, RobustnessReport,
};
use crate::spectral::{self, Spectrum};
use crate::topology::{GroundedSystem, PlatoonTopology, ReferenceSet};

/// Bound on the formation H∞ norm under an MD placement, `2/√3`.
pub fn md_formation_bound() -> f64 {
    2.0 / 3f64.sqrt()
}

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// Everything a run produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub files: Vec<OutputFile>,
    pub summary: String,
    /// Failed checks (only `verify` and the delay grid populate this).
    pub violations: Vec<String>,
}

impl RunOutput {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push(OutputFile {
            name: name.to_string(),
            contents,
        });
    }

    /// Writes every file under `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for f in &self.files {
            let p = dir.join(&f.name);
            std::fs::write(&p, &f.contents)?;
            out.push(p);
        }
        Ok(out)
    }
}

/// Dispatches on `cfg.experiment`.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    match cfg.experiment {
        Experiment::Report => run_report(cfg),
        Experiment::AddRemove => run_remove_add_sweep(cfg),
        Experiment::DelayGrid => run_delay_grid(cfg),
        Experiment::HinfSweep => run_hinf_sweep(cfg),
        Experiment::Scaling => run_scaling(cfg),
        Experiment::Simulate => run_simulate(cfg),
        Experiment::Verify => run_verify(cfg),
    }
}

fn meta_line(gs: &GroundedSystem) -> String {
    format!("# n={}, k={}, refs={:?}", gs.n(), gs.k(), gs.refs().refs())
}

pub fn run_report(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let gs = cfg.grounded()?;
    let report = RobustnessReport::compute(&gs)?;
    let mut out = RunOutput::default();
    let mut json = serde_json::to_value(&report)?;
    if let Some(g) = cfg.gamma {
        json["gamma"] = serde_json::json!(g);
        json["gamma_conditions"] = serde_json::to_value(robustness::gamma_conditions(&gs, g)?)?;
    }
    out.file("report.json", serde_json::to_string_pretty(&json)? + "\n");
    out.summary = report.summary();
    out.file("report.txt", out.summary.clone());
    Ok(out)
}

/// H∞ norms after one reference change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemoveAddRow {
    pub removed: bool,
    pub position: usize,
    pub lambda1: f64,
    pub hinf_velocity: HinfValue,
    pub hinf_formation: HinfValue,
}

/// Norms for the (possibly empty) reference set `refs`; no references means
/// the grounded Laplacian is the singular full Laplacian.
fn norms_for(topo: &PlatoonTopology, refs: Option<ReferenceSet>) -> Result<(f64, HinfValue, HinfValue)> {
    let Some(refs) = refs else {
        return Ok((0.0, HinfValue::Unbounded, HinfValue::Unbounded));
    };
    let gs = GroundedSystem::new(topo, &refs)?;
    let spec = spectral::lg_spectrum(&gs)?;
    let hv = robustness::hinf_velocity(&spec);
    let hf = match hv {
        HinfValue::Finite(_) => HinfValue::Finite(robustness::hinf_formation(&spec)?),
        HinfValue::Unbounded => HinfValue::Unbounded,
    };
    Ok((spec.min(), hv, hf))
}

/// Demotes each reference (remove) and/or promotes each follower (add) in
/// turn and recomputes both H∞ norms.
pub fn remove_add_rows(gs: &GroundedSystem, mode: SweepMode) -> Result<Vec<RemoveAddRow>> {
    let topo = PlatoonTopology::new(gs.n(), gs.k())?;
    let refs = gs.refs();
    let mut jobs: Vec<(bool, usize)> = Vec::new();
    if mode != SweepMode::Add {
        jobs.extend(refs.refs().iter().map(|&r| (true, r)));
    }
    if mode != SweepMode::Remove {
        // promoting the last follower would leave no dynamics
        if refs.followers().len() > 1 {
            jobs.extend(refs.followers().iter().map(|&f| (false, f)));
        }
    }
    par::map(&jobs, |&(removed, position)| {
        let next = if removed {
            if refs.refs().len() == 1 {
                None
            } else {
                Some(refs.without(position)?)
            }
        } else {
            Some(refs.with(position)?)
        };
        let (lambda1, hinf_velocity, hinf_formation) = norms_for(&topo, next)?;
        Ok(RemoveAddRow {
            removed,
            position,
            lambda1,
            hinf_velocity,
            hinf_formation,
        })
    })
    .into_iter()
    .collect()
}

pub fn run_remove_add_sweep(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let gs = cfg.grounded()?;
    let spec = spectral::lg_spectrum(&gs)?;
    let base_v = robustness::hinf_velocity(&spec);
    let base_f = robustness::hinf_formation(&spec)?;
    let rows = remove_add_rows(&gs, cfg.sweep.mode)?;

    let mut out = RunOutput::default();
    let mut summary = format!(
        "baseline: H-inf velocity {base_v}, formation {base_f}\n"
    );
    for (removed, name) in [(true, "remove"), (false, "add")] {
        let part: Vec<&RemoveAddRow> = rows.iter().filter(|r| r.removed == removed).collect();
        if part.is_empty() {
            continue;
        }
        let mut csv = meta_line(&gs) + "\n";
        writeln!(
            csv,
            "# action={name}, baseline_hinf_velocity={base_v}, baseline_hinf_formation={base_f}"
        )
        .unwrap();
        csv.push_str("position,lambda1,hinf_velocity,hinf_formation\n");
        for r in &part {
            writeln!(csv, "{},{},{},{}", r.position, r.lambda1, r.hinf_velocity, r.hinf_formation).unwrap();
        }
        out.file(&format!("sweep_{name}.csv"), csv);

        let finite = |h: HinfValue| h.finite().unwrap_or(f64::INFINITY);
        let vmin = part.iter().map(|r| finite(r.hinf_velocity)).fold(f64::INFINITY, f64::min);
        let vmax = part.iter().map(|r| finite(r.hinf_velocity)).fold(0.0, f64::max);
        let fmin = part.iter().map(|r| finite(r.hinf_formation)).fold(f64::INFINITY, f64::min);
        let fmax = part.iter().map(|r| finite(r.hinf_formation)).fold(0.0, f64::max);
        writeln!(
            summary,
            "{name} ({} positions): velocity in [{vmin}, {vmax}], formation in [{fmin}, {fmax}]",
            part.len()
        )
        .unwrap();
    }
    out.summary = summary;
    Ok(out)
}

/// Verdicts and threshold annotations at one delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayGridRow {
    pub tau: f64,
    pub velocity: StabilityVerdict,
    pub formation: StabilityVerdict,
    /// τ <= π/(8k)
    pub below_k_sufficient: bool,
    /// τ <= π/(2k)
    pub below_k_necessary: bool,
    /// τ < 1/(4k)
    pub below_formation_k: bool,
    /// τ < π/(2 λ_max)
    pub below_velocity_exact: bool,
    /// τ < 1/ρ(B)
    pub below_formation_rho: bool,
}

/// Settings shared by delay-grid runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayGridOptions {
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub seed: u64,
}

pub fn delay_grid_rows(
    gs: &GroundedSystem,
    taus: &[f64],
    opts: &DelayGridOptions,
) -> Result<Vec<DelayGridRow>> {
    let spec = spectral::lg_spectrum(gs)?;
    let horizon = opts.horizon.unwrap_or_else(|| dde_sim::default_horizon(spec.min()));
    let kb = robustness::delay_bounds_k(gs.k());
    let fb = robustness::delay_margin_formation(&spec, gs.k())?;
    let exact = robustness::delay_margin_velocity(&spec)?;
    let vel = SimSystem::velocity(gs);
    let form = SimSystem::formation(gs);

    let jobs: Vec<(usize, Dynamics)> = (0..taus.len())
        .flat_map(|i| [(i, Dynamics::Velocity), (i, Dynamics::Formation)])
        .collect();
    let verdicts: Vec<StabilityVerdict> = par::map(&jobs, |&(i, dyn_)| {
        let tau = taus[i];
        let sys = match dyn_ {
            Dynamics::Velocity => &vel,
            Dynamics::Formation => &form,
        };
        let step = opts.step.unwrap_or_else(|| dde_sim::default_step(tau));
        let x0 = random_state(sys.state_dim(), opts.seed);
        let delay = if tau > 0.0 { DelaySpec::full(tau) } else { DelaySpec::none() };
        dde_sim::simulate(sys, delay, &x0, &SimParams::new(horizon, step), None).map(|t| classify(&t))
    })
    .into_iter()
    .collect::<Result<_>>()?;

    Ok(taus
        .iter()
        .enumerate()
        .map(|(i, &tau)| DelayGridRow {
            tau,
            velocity: verdicts[2 * i],
            formation: verdicts[2 * i + 1],
            below_k_sufficient: tau <= kb.sufficient,
            below_k_necessary: tau <= kb.necessary,
            below_formation_k: tau < fb.k_bound,
            below_velocity_exact: tau < exact,
            below_formation_rho: tau < fb.rho_bound,
        })
        .collect())
}

/// Verdicts that contradict a degree-based sufficient condition. The
/// spectral-radius and exact-margin columns are annotations only, since a
/// finite-horizon verdict close to those thresholds is not conclusive.
pub fn delay_grid_contradictions(rows: &[DelayGridRow]) -> Vec<String> {
    let mut v = Vec::new();
    for r in rows {
        if r.below_k_sufficient && !r.velocity.stable {
            v.push(format!("velocity unstable at tau={} <= pi/(8k)", r.tau));
        }
        if r.below_formation_k && !r.formation.stable {
            v.push(format!("formation unstable at tau={} < 1/(4k)", r.tau));
        }
    }
    v
}

pub fn run_delay_grid(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let gs = cfg.grounded()?;
    let opts = DelayGridOptions {
        horizon: cfg.delay.horizon,
        step: cfg.delay.step,
        seed: cfg.delay.seed,
    };
    let rows = delay_grid_rows(&gs, &cfg.delay.taus, &opts)?;
    let spec = spectral::lg_spectrum(&gs)?;
    let kb = robustness::delay_bounds_k(gs.k());
    let fb = robustness::delay_margin_formation(&spec, gs.k())?;
    let exact = robustness::delay_margin_velocity(&spec)?;
    let exact_f = robustness::delay_margin_formation_exact(&spec)?;

    let mut csv = meta_line(&gs) + "\n";
    writeln!(
        csv,
        "# seed={}, pi/(8k)={}, pi/(2k)={}, 1/(4k)={}, pi/(2lambda_max)={}, 1/rho={}, formation_exact={}",
        opts.seed, kb.sufficient, kb.necessary, fb.k_bound, exact, fb.rho_bound, exact_f
    )
    .unwrap();
    csv.push_str(
        "tau,velocity_stable,velocity_ratio,formation_stable,formation_ratio,\
         below_pi_8k,below_pi_2k,below_1_4k,below_pi_2lmax,below_1_rho\n",
    );
    let mut summary = String::new();
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.tau,
            r.velocity.stable,
            r.velocity.decay_ratio,
            r.formation.stable,
            r.formation.decay_ratio,
            r.below_k_sufficient,
            r.below_k_necessary,
            r.below_formation_k,
            r.below_velocity_exact,
            r.below_formation_rho
        )
        .unwrap();
        let word = |s: bool| if s { "stable" } else { "unstable" };
        writeln!(
            summary,
            "tau={:<8} velocity {:<8} formation {}",
            r.tau,
            word(r.velocity.stable),
            word(r.formation.stable)
        )
        .unwrap();
    }
    let mut out = RunOutput::default();
    out.file("delay_grid.csv", csv);
    out.violations = delay_grid_contradictions(&rows);
    for v in &out.violations {
        writeln!(summary, "contradiction: {v}").unwrap();
    }
    out.summary = summary;
    Ok(out)
}

pub fn run_hinf_sweep(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let gs = cfg.grounded()?;
    let spec = spectral::lg_spectrum(&gs)?;
    let mut out = RunOutput::default();
    let mut summary = String::new();
    for dynamics in cfg.sweep.dynamics.expand() {
        let grid = match cfg.sweep.points {
            Some(p) => FrequencyGrid::logspace(FrequencyGrid::DEFAULT_LO, FrequencyGrid::DEFAULT_HI, p)?,
            None => FrequencyGrid::default_for(dynamics, &spec),
        };
        let fr = robustness::sweep_hinf_spectrum(&spec, dynamics, &grid)?;
        let analytic = match dynamics {
            Dynamics::Velocity => robustness::hinf_velocity(&spec).finite().unwrap_or(f64::INFINITY),
            Dynamics::Formation => robustness::hinf_formation(&spec)?,
        };
        let mut csv = Vec::new();
        fr.write_csv(&mut csv)?;
        out.file(
            &format!("hinf_{dynamics}.csv"),
            String::from_utf8(csv).expect("ascii"),
        );
        writeln!(
            summary,
            "{dynamics}: swept peak {} at omega={} (analytic {analytic}, rel. diff {:e})",
            fr.peak.1,
            fr.peak.0,
            (fr.peak.1 - analytic).abs() / analytic
        )
        .unwrap();
    }
    out.summary = summary;
    Ok(out)
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Log-log slope fit that drops the smallest-n point when its residual is
/// more than three times the median residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub excluded_smallest: bool,
}

pub fn fit_loglog(ns: &[usize], values: &[f64]) -> SlopeFit {
    let mut pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(values)
        .map(|(&n, &v)| ((n as f64).ln(), v.ln()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let (slope, intercept) = fit_line(&xs, &ys);
    let mut resid: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).abs())
        .collect();
    let first = resid[0];
    resid.sort_by(f64::total_cmp);
    let median = if resid.len() % 2 == 1 {
        resid[resid.len() / 2]
    } else {
        0.5 * (resid[resid.len() / 2 - 1] + resid[resid.len() / 2])
    };
    if xs.len() > 2 && first > 3.0 * median {
        let (slope, intercept) = fit_line(&xs[1..], &ys[1..]);
        SlopeFit {
            slope,
            intercept,
            excluded_smallest: true,
        }
    } else {
        SlopeFit {
            slope,
            intercept,
            excluded_smallest: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub single_hinf_velocity: f64,
    pub single_hinf_formation: f64,
    pub md_refs: usize,
    pub md_hinf_velocity: f64,
    pub md_hinf_formation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingResult {
    pub k: usize,
    pub rows: Vec<ScalingRow>,
    pub velocity_fit: SlopeFit,
    pub formation_fit: SlopeFit,
    pub md_velocity_bounded: bool,
    pub md_formation_bounded: bool,
}

/// Single reference at vehicle 1 versus the MD placement, for each `n`.
pub fn scaling(ns: &[usize], k: usize) -> Result<ScalingResult> {
    let rows: Vec<ScalingRow> = par::map(ns, |&n| -> Result<ScalingRow> {
        let single = spectral::lg_spectrum(&GroundedSystem::from_parts(n, k, [1])?)?;
        let topo = PlatoonTopology::new(n, k)?;
        let md = ReferenceSet::minimally_dense(n, k)?;
        let md_spec = spectral::lg_spectrum(&GroundedSystem::new(&topo, &md)?)?;
        let finite = |h: HinfValue| h.finite().ok_or(Error::NonPositiveEigenvalue(0.0));
        Ok(ScalingRow {
            n,
            single_hinf_velocity: finite(robustness::hinf_velocity(&single))?,
            single_hinf_formation: robustness::hinf_formation(&single)?,
            md_refs: md.refs().len(),
            md_hinf_velocity: finite(robustness::hinf_velocity(&md_spec))?,
            md_hinf_formation: robustness::hinf_formation(&md_spec)?,
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let ns_: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let v: Vec<f64> = rows.iter().map(|r| r.single_hinf_velocity).collect();
    let f: Vec<f64> = rows.iter().map(|r| r.single_hinf_formation).collect();
    let tol = 1e-9;
    Ok(ScalingResult {
        k,
        velocity_fit: fit_loglog(&ns_, &v),
        formation_fit: fit_loglog(&ns_, &f),
        md_velocity_bounded: rows.iter().all(|r| r.md_hinf_velocity <= 1.0 + tol),
        md_formation_bounded: rows.iter().all(|r| r.md_hinf_formation <= md_formation_bound() + tol),
        rows,
    })
}

pub fn run_scaling(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let res = scaling(&cfg.scaling.ns, cfg.k)?;
    let mut csv = format!("# k={}, single reference at vehicle 1\n", res.k);
    writeln!(
        csv,
        "# velocity_slope={}, velocity_excluded_smallest={}, formation_slope={}, formation_excluded_smallest={}",
        res.velocity_fit.slope,
        res.velocity_fit.excluded_smallest,
        res.formation_fit.slope,
        res.formation_fit.excluded_smallest
    )
    .unwrap();
    csv.push_str("n,single_hinf_velocity,single_hinf_formation,md_refs,md_hinf_velocity,md_hinf_formation\n");
    for r in &res.rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.n, r.single_hinf_velocity, r.single_hinf_formation, r.md_refs, r.md_hinf_velocity, r.md_hinf_formation
        )
        .unwrap();
    }
    let mut out = RunOutput::default();
    out.file("scaling.csv", csv);
    out.file("scaling.json", serde_json::to_string_pretty(&res)? + "\n");
    out.summary = format!(
        "single reference: velocity slope {:.4}{}, formation slope {:.4}{}\n\
         md placement: velocity <= 1 {}, formation <= 2/sqrt(3) {}\n",
        res.velocity_fit.slope,
        if res.velocity_fit.excluded_smallest { " (smallest n excluded)" } else { "" },
        res.formation_fit.slope,
        if res.formation_fit.excluded_smallest { " (smallest n excluded)" } else { "" },
        res.md_velocity_bounded,
        res.md_formation_bounded
    );
    Ok(out)
}

pub fn run_simulate(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let gs = cfg.grounded()?;
    let s = &cfg.simulate;
    let sys = SimSystem::new(s.dynamics, &gs).with_reference_velocity(s.u_ref);
    let spec = spectral::lg_spectrum(&gs)?;
    let horizon = cfg.delay.horizon.unwrap_or_else(|| dde_sim::default_horizon(spec.min()));
    let step = cfg.delay.step.unwrap_or_else(|| dde_sim::default_step(s.tau));
    let disturbance = match s.disturbance {
        DisturbanceKind::Zero => Disturbance::Zero,
        DisturbanceKind::Sinusoid => Disturbance::Sinusoid {
            amplitude: s.amplitude,
            omega: s.omega,
            phase_step: s.phase_step,
        },
        DisturbanceKind::Noise => Disturbance::Noise {
            amplitude: s.amplitude,
            seed: cfg.delay.seed,
        },
    };
    let x0 = random_state(sys.state_dim(), cfg.delay.seed);
    let delay = DelaySpec {
        tau: s.tau,
        mode: s.mode.into(),
    };
    let params = SimParams::new(horizon, step);
    let traj = dde_sim::simulate(&sys, delay, &x0, &params, Some(&disturbance))?;
    // a persistent input never decays, so stability is judged on the same
    // run without it
    let disturbed = disturbance != Disturbance::Zero;
    let verdict = if disturbed {
        classify(&dde_sim::simulate(&sys, delay, &x0, &params, None)?)
    } else {
        classify(&traj)
    };
    let t_tail = traj.times.last().copied().unwrap_or(0.0) * 0.75;
    let trailing_peak = traj
        .times
        .iter()
        .zip(&traj.norms)
        .filter(|(t, _)| **t >= t_tail)
        .map(|(_, n)| *n)
        .fold(0.0, f64::max);
    let mut csv = Vec::new();
    traj.write_csv(
        &TrajectoryMeta {
            n: gs.n(),
            k: gs.k(),
            seed: Some(cfg.delay.seed),
        },
        &mut csv,
    )?;
    let mut out = RunOutput::default();
    out.file("trajectory.csv", String::from_utf8(csv).expect("ascii"));
    let info = serde_json::json!({
        "dynamics": s.dynamics,
        "delay": delay,
        "tau_effective": traj.tau_effective,
        "step": traj.step,
        "horizon": horizon,
        "seed": cfg.delay.seed,
        "history": "constant",
        "disturbance": disturbance,
        "diverged_at": traj.diverged_at,
        "verdict": verdict,
        "verdict_from_undisturbed_run": disturbed,
        "trailing_peak_norm": trailing_peak,
        "final_time": traj.final_time,
        "physical_final_state": sys.physical_state(&traj.final_state, traj.final_time)?,
    });
    out.file("verdict.json", serde_json::to_string_pretty(&info)? + "\n");
    out.summary = format!(
        "{} dynamics, tau={} ({} steps of {}): {} (decay ratio {}{}), trailing peak norm {}\n",
        s.dynamics,
        traj.tau_effective,
        (traj.tau_effective / traj.step).round(),
        traj.step,
        if verdict.stable { "stable" } else { "unstable" },
        verdict.decay_ratio,
        if disturbed { ", undisturbed run" } else { "" },
        trailing_peak
    );
    Ok(out)
}

/// One named pass/fail check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Cross-checks every closed-form quantity of the configured platoon against
/// its independent route.
pub fn verify_checks(gs: &GroundedSystem, gamma: Option<f64>) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let lg = gs.lg_f64();
    let spec = spectral::lg_spectrum(gs)?;

    let oracle = linalg::bisection_eigenvalues(&lg)?;
    let diff = spec
        .values()
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new("eigensolver-oracle", diff <= 1e-9, format!("max diff {diff:e}")));

    let trace: f64 = (0..lg.nrows()).map(|i| lg[(i, i)]).sum();
    let sum: f64 = spec.values().iter().sum();
    let rel = (trace - sum).abs() / trace.abs().max(1.0);
    checks.push(Check::new("trace", rel <= 1e-8, format!("relative diff {rel:e}")));

    let c1 = spectral::certify_lambda_min(gs, &spec);
    checks.push(Check::new(
        "lambda1-chain",
        c1.holds,
        format!("{} <= {} <= {}", c1.lower, c1.witnessed, c1.upper),
    ));
    let c2 = spectral::certify_lambda_max(gs, &spec);
    checks.push(Check::new(
        "lambda-max-bracket",
        c2.holds,
        format!("{} <= {} <= {}", c2.lower, c2.witnessed, c2.upper),
    ));

    let fs = spectral::map_formation_spectrum(&spec)?;
    if gs.follower_count() <= 60 {
        let dense = spectral::dense_eigenvalues(&spectral::build_formation_matrix(gs))?;
        let mm = spectral::spectrum_mismatch(fs.values(), &dense);
        checks.push(Check::new("formation-spectrum", mm <= 1e-7, format!("max mismatch {mm:e}")));
    }
    let margin = fs.stability_margin();
    checks.push(Check::new(
        "formation-margin",
        margin >= spec.min() / 2.0 - 1e-9,
        format!("{margin} >= {}", spec.min() / 2.0),
    ));

    for dynamics in [Dynamics::Velocity, Dynamics::Formation] {
        let grid = FrequencyGrid::default_for(dynamics, &spec);
        let fr = robustness::sweep_hinf_spectrum(&spec, dynamics, &grid)?;
        let analytic = match dynamics {
            Dynamics::Velocity => 1.0 / spec.min(),
            Dynamics::Formation => robustness::hinf_formation(&spec)?,
        };
        let rel = (fr.peak.1 - analytic).abs() / analytic;
        checks.push(Check::new(
            &format!("hinf-sweep-{dynamics}"),
            rel <= 5e-3,
            format!("swept {} vs analytic {analytic}", fr.peak.1),
        ));
    }

    let defect = spectral::stochasticity_defect(gs)?;
    checks.push(Check::new("row-stochastic", defect <= 1e-9, format!("defect {defect:e}")));

    let dv = robustness::delay_margin_velocity(&spec)?;
    let d = gs.dmax_f() as f64;
    checks.push(Check::new(
        "delay-margin-bracket",
        dv >= PI / (4.0 * d) - 1e-12 && dv <= PI / (2.0 * d) + 1e-12,
        format!("{} in [{}, {}]", dv, PI / (4.0 * d), PI / (2.0 * d)),
    ));

    let md = ReferenceSet::minimally_dense(gs.n(), gs.k())?;
    if gs.refs() == &md {
        let hv = 1.0 / spec.min();
        let hf = robustness::hinf_formation(&spec)?;
        checks.push(Check::new("md-velocity-nonexpansive", hv <= 1.0 + 1e-9, format!("{hv}")));
        checks.push(Check::new(
            "md-formation-bound",
            hf <= md_formation_bound() + 1e-9,
            format!("{hf} <= {}", md_formation_bound()),
        ));
        let fb = robustness::delay_margin_formation(&spec, gs.k())?;
        checks.push(Check::new(
            "md-formation-delay",
            fb.rho_bound >= fb.k_bound,
            format!("1/rho={} >= 1/(4k)={}", fb.rho_bound, fb.k_bound),
        ));
    }

    if let Some(g) = gamma {
        // the non-strict sufficient reading must imply the norm bound
        let gc = robustness::gamma_conditions(gs, g)?;
        let hv = 1.0 / spec.min();
        let ok = !gc.sufficient_nonstrict_ok || hv <= g + 1e-9;
        checks.push(Check::new("gamma-sufficient", ok, format!("{gc:?}, norm {hv}")));
        let ok = hv >= g - 1e-9 || gc.necessary_ok;
        checks.push(Check::new("gamma-necessary", ok, format!("{gc:?}, norm {hv}")));
    }
    Ok(checks)
}

pub fn run_verify(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let gs = cfg.grounded()?;
    let checks = verify_checks(&gs, cfg.gamma)?;
    let mut out = RunOutput::default();
    let mut summary = String::new();
    for c in &checks {
        writeln!(
            summary,
            "[{}] {:<28} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )
        .unwrap();
        if !c.passed {
            out.violations.push(format!("{}: {}", c.name, c.detail));
        }
    }
    out.file("verify.json", serde_json::to_string_pretty(&checks)? + "\n");
    out.summary = summary;
    Ok(out)
}

/// Spectrum helper for callers that already hold a grounded system.
pub fn spectrum(gs: &GroundedSystem) -> Result<Spectrum> {
    spectral::lg_spectrum(gs)
}
