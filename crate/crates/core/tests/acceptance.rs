//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its own PASS/FAIL line; exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DVector;
use platoon_core::dde_sim::{
    self, classify, random_state, simulate, simulate_offdiagonal, DelaySpec, ScanOptions,
    SimParams, SimSystem,
};
use platoon_core::experiments::{self, md_formation_bound, DelayGridOptions};
use platoon_core::config::SweepMode;
use platoon_core::robustness::{self, FrequencyGrid};
use platoon_core::{linalg, par, spectral, Dynamics, GroundedSystem, PlatoonTopology, ReferenceSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Random platoon with a random nonempty reference set that leaves at least
/// one follower and at most `max_followers` of them.
fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_k: usize, max_followers: usize) -> GroundedSystem {
    loop {
        let n = rng.random_range(2..=max_n);
        let k = rng.random_range(1..=max_k);
        let p: f64 = rng.random_range(0.05..0.6);
        let mut refs: Vec<usize> = (1..=n).filter(|_| rng.random_bool(p)).collect();
        if refs.is_empty() {
            refs.push(rng.random_range(1..=n));
        }
        let followers = n - refs.len();
        if followers == 0 || followers > max_followers {
            continue;
        }
        return GroundedSystem::from_parts(n, k, refs).unwrap();
    }
}

fn instances(seed: u64, count: usize, max_n: usize, max_k: usize, max_followers: usize) -> Vec<GroundedSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_instance(&mut rng, max_n, max_k, max_followers))
        .collect()
}

fn p36_md() -> GroundedSystem {
    let topo = PlatoonTopology::new(36, 4).unwrap();
    GroundedSystem::new(&topo, &ReferenceSet::minimally_dense(36, 4).unwrap()).unwrap()
}

fn certificates() -> Outcome {
    let start = Instant::now();
    let cases = instances(1, 500, 60, 6, usize::MAX);
    let bad: usize = par::map(&cases, |gs| {
        let spec = spectral::lg_spectrum(gs).unwrap();
        let a = spectral::certify_lambda_min(gs, &spec).holds;
        let b = spectral::certify_lambda_max(gs, &spec).holds;
        usize::from(!a) + usize::from(!b)
    })
    .iter()
    .sum();
    let secs = start.elapsed().as_secs_f64();
    outcome(bad == 0 && secs < 30.0, format!("500 instances, {bad} violated chains, {secs:.2} s"))
}

fn spectrum_mapping() -> Outcome {
    let cases = instances(2, 100, 40, 6, 20);
    let worst = par::map(&cases, |gs| {
        let mapped = spectral::map_formation_spectrum(&spectral::lg_spectrum(gs).unwrap()).unwrap();
        let dense = spectral::dense_eigenvalues(&spectral::build_formation_matrix(gs)).unwrap();
        spectral::spectrum_mismatch(mapped.values(), &dense)
    })
    .into_iter()
    .fold(0.0, f64::max);
    outcome(worst <= 1e-7, format!("100 instances, worst mismatch {worst:.3e} (tol 1e-7)"))
}

fn hinf_oracle() -> Outcome {
    let cases = instances(3, 200, 60, 6, usize::MAX);
    let worst = par::map(&cases, |gs| {
        let spec = spectral::lg_spectrum(gs).unwrap();
        let mut w = 0.0f64;
        for d in [Dynamics::Velocity, Dynamics::Formation] {
            let fr = robustness::sweep_hinf_spectrum(&spec, d, &FrequencyGrid::default_for(d, &spec)).unwrap();
            let analytic = match d {
                Dynamics::Velocity => robustness::hinf_velocity(&spec).finite().unwrap(),
                Dynamics::Formation => robustness::hinf_formation(&spec).unwrap(),
            };
            w = w.max((fr.peak.1 - analytic).abs() / analytic);
        }
        w
    })
    .into_iter()
    .fold(0.0, f64::max);
    outcome(worst <= 5e-3, format!("200 instances x 2 dynamics, worst relative gap {worst:.3e} (tol 5e-3)"))
}

fn desk_values() -> Outcome {
    let spec = spectral::lg_spectrum(&p36_md()).unwrap();
    let l1 = spec.min();
    let hv = robustness::hinf_velocity(&spec).finite().unwrap();
    let hf = robustness::hinf_formation(&spec).unwrap();
    let ok = (l1 - 1.0).abs() <= 1e-9 && (hv - 1.0).abs() <= 1e-9 && (hf - md_formation_bound()).abs() <= 1e-9;
    outcome(ok, format!("lambda_1 = {l1:.12}, velocity {hv:.12}, formation {hf:.12}"))
}

fn remove_add() -> Outcome {
    let rows = experiments::remove_add_rows(&p36_md(), SweepMode::Both).unwrap();
    let tol = 1e-9;
    let mut bad = Vec::new();
    for r in &rows {
        let v = r.hinf_velocity.finite().unwrap_or(f64::INFINITY);
        let f = r.hinf_formation.finite().unwrap_or(f64::INFINITY);
        if r.removed {
            if !(v > 1.0 + tol && f > md_formation_bound() + tol) {
                bad.push(format!("remove {}: {v}, {f}", r.position));
            }
        } else if v >= 1.0 - tol {
            bad.push(format!("add {}: {v}", r.position));
        }
    }
    let removed = rows.iter().filter(|r| r.removed).count();
    outcome(
        bad.is_empty() && removed == 4 && rows.len() == 36,
        format!("{removed} removals, {} additions, violations {bad:?}", rows.len() - removed),
    )
}

fn delay_grid() -> Outcome {
    let start = Instant::now();
    let gs = p36_md();
    let opts = DelayGridOptions {
        horizon: Some(200.0),
        step: Some(1e-3),
        seed: 7,
    };
    let rows = experiments::delay_grid_rows(&gs, &[0.05, 0.09, 0.1, 0.4], &opts).unwrap();
    let [r05, r09, r10, r40] = [&rows[0], &rows[1], &rows[2], &rows[3]];
    let claims = [
        ("velocity stable at 0.09", r09.velocity.stable),
        ("velocity unstable at 0.4", !r40.velocity.stable),
        ("formation stable at 0.05", r05.formation.stable),
        ("formation unstable at 0.1", !r10.formation.stable),
    ];
    let secs = start.elapsed().as_secs_f64();
    let failed: Vec<&str> = claims.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty() && secs < 120.0,
        format!(
            "{secs:.1} s, failed claims {failed:?} (formation decay ratio at 0.1 = {:.3e})",
            r10.formation.decay_ratio
        ),
    )
}

fn sharpness() -> Outcome {
    let cases = instances(4, 20, 16, 4, 10);
    let errs = par::map(&cases, |gs| {
        let spec = spectral::lg_spectrum(gs).unwrap();
        let predicted = PI / (2.0 * spec.max());
        let sys = SimSystem::velocity(gs);
        let opts = ScanOptions::for_system(&sys).unwrap();
        let tc = dde_sim::threshold_scan(&sys, 0.5 * predicted, 1.5 * predicted, 0.005 * predicted, &opts).unwrap();
        (tc - predicted).abs() / predicted
    });
    let worst = errs.iter().copied().fold(0.0, f64::max);
    outcome(worst <= 0.03, format!("20 instances, worst relative error {worst:.4} (tol 0.03)"))
}

fn scaling() -> Outcome {
    let res = experiments::scaling(&[8, 16, 32, 64, 128], 1).unwrap();
    let v = res.velocity_fit.slope;
    let f = res.formation_fit.slope;
    let ok = (v - 2.0).abs() <= 0.3 && (f - 3.0).abs() <= 0.3 && res.md_velocity_bounded && res.md_formation_bounded;
    outcome(
        ok,
        format!(
            "velocity slope {v:.4}, formation slope {f:.4}, md bounded {} / {}",
            res.md_velocity_bounded, res.md_formation_bounded
        ),
    )
}

fn stochasticity() -> Outcome {
    let cases = instances(5, 200, 60, 6, usize::MAX);
    let worst = par::map(&cases, |gs| spectral::stochasticity_defect(gs).unwrap())
        .into_iter()
        .fold(0.0, f64::max);
    outcome(worst <= 1e-9, format!("200 instances, worst defect {worst:.3e}"))
}

fn offdiagonal() -> Outcome {
    let gs = p36_md();
    let sys = SimSystem::velocity(&gs);
    let x0 = random_state(sys.state_dim(), 11);
    let spec = spectral::lg_spectrum(&gs).unwrap();
    let horizon = dde_sim::default_horizon_offdiagonal(spec.min(), gs.dmax_f() as f64, 5.0);
    let traj = simulate_offdiagonal(&sys, 5.0, &x0, &SimParams::new(horizon, 1e-3)).unwrap();
    let v = classify(&traj);
    outcome(v.stable, format!("tau = 5, horizon {horizon}, decay ratio {:.3e}", v.decay_ratio))
}

fn integrator() -> Outcome {
    let cases = instances(6, 40, 12, 4, 8);
    let mut worst = 0.0f64;
    for (i, gs) in cases.iter().enumerate() {
        for kind in [Dynamics::Velocity, Dynamics::Formation] {
            let sys = SimSystem::new(kind, gs);
            let x0 = random_state(sys.state_dim(), i as u64);
            let traj = simulate(&sys, DelaySpec::none(), &x0, &SimParams::new(1.0, 1e-3), None).unwrap();
            let a = match kind {
                Dynamics::Velocity => -gs.lg_f64(),
                Dynamics::Formation => spectral::build_formation_matrix(gs),
            };
            let exact = linalg::expm(&a) * DVector::from_column_slice(&x0);
            let got = DVector::from_column_slice(&traj.final_state);
            worst = worst.max((got - &exact).norm() / exact.norm());
        }
    }

    let gs = GroundedSystem::from_parts(5, 2, [3]).unwrap();
    let sys = SimSystem::velocity(&gs);
    let x0 = random_state(4, 99);
    let run = |h: f64| {
        let t = simulate(&sys, DelaySpec::none(), &x0, &SimParams::new(1.0, h), None).unwrap();
        DVector::from_column_slice(&t.final_state)
    };
    let (a, b, c) = (run(1e-2), run(5e-3), run(2.5e-3));
    let ratio = (&a - &b).norm() / (&b - &c).norm();
    let order = ratio.log2();
    outcome(
        worst <= 1e-6 && order >= 3.5,
        format!("worst relative error vs expm {worst:.3e}, step-halving ratio {ratio:.2}, order {order:.2}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("bound certificates", certificates),
        ("spectrum mapping oracle", spectrum_mapping),
        ("H-inf sweep vs analytic", hinf_oracle),
        ("P(36,4) MD desk values", desk_values),
        ("reference removal / addition", remove_add),
        ("P(36,4) MD delay grid", delay_grid),
        ("exact delay margin sharpness", sharpness),
        ("single-reference scaling", scaling),
        ("row-stochastic steady state", stochasticity),
        ("off-diagonal delay at tau = 5", offdiagonal),
        ("integrator validity", integrator),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<32} {}  {}",
            i + 1,
            name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
