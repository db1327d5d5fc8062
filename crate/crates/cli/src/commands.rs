use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::anyhow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use mrho_core::diagnostics::{
    check_nondegeneracy, fourier_coeffs, nonpersistence_conditions, resonance_min, AngleFn, DiagnosticsReport,
    NonpersistenceInput, WronskianRows, DEFAULT_ZERO_THRESHOLD,
};
use mrho_core::export::{write_ftle_csv, write_poincare_csv, write_sweep_csv, write_trajectory_csv};
use mrho_core::poincare::{build_first_order_map, scaling_study, sine_example, DEFAULT_ORACLE_STEPS};
use mrho_core::systems::{benchmark_system, check_weighted_divergence, DEFAULT_DIVERGENCE_STEP, DEFAULT_DOMAIN_HALF_WIDTH};
use mrho_core::{compute_m_rho, convergence_study, integrate_flow, sweep_alpha, Analytic, PhaseState, SmoothFn, TOOL_VERSION};

use crate::config::RunConfig;
use crate::output::{sidecar_path, suffixed, write_atomic, write_json};
use crate::Failure;

type Outcome = Result<(), Failure>;

/// Params block written into every output file.
fn embedded(cfg: &RunConfig, command: &str) -> serde_json::Value {
    json!({ "command": command, "params": cfg.params, "tool_version": TOOL_VERSION })
}

fn with_params(cfg: &RunConfig, command: &str, body: impl Serialize) -> serde_json::Value {
    let mut v = serde_json::to_value(body).expect("serializable report");
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("params".into(), json!(cfg.params));
        map.insert("command".into(), json!(command));
        map.insert("tool_version".into(), json!(TOOL_VERSION));
    }
    v
}

fn write_csv(
    cfg: &RunConfig,
    command: &str,
    path: &Path,
    body: impl FnOnce(&mut dyn std::io::Write) -> std::io::Result<()>,
) -> Outcome {
    write_atomic(path, body).map_err(Failure::config)?;
    write_json(&sidecar_path(path), &embedded(cfg, command)).map_err(Failure::config)
}

fn out_or(cfg: &RunConfig, default: &str) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

pub fn compute(cfg: &RunConfig) -> Outcome {
    let system = benchmark_system(cfg.benchmark().map_err(Failure::config)?).map_err(Failure::core)?;
    let started = Instant::now();
    let report = compute_m_rho(&system, &cfg.grid(), &cfg.integration(), &cfg.functional()).map_err(Failure::core)?;
    log::info!("computed {} orbits in {:.2?}", report.n_total, started.elapsed());

    let ftle_path = cfg.ftle_csv.clone().unwrap_or_else(|| PathBuf::from("ftle.csv"));
    write_csv(cfg, "compute", &ftle_path, |w| write_ftle_csv(w, &report.records))?;
    write_json(&out_or(cfg, "m_rho_report.json"), &with_params(cfg, "compute", &report)).map_err(Failure::config)?;

    println!(
        "m_rho = {:.6} (regular {}/{}, escaped {}, alpha = {})",
        report.m_rho, report.n_regular, report.n_total, report.n_escaped, cfg.params.alpha
    );
    if report.all_escaped() {
        return Err(Failure::numerical(anyhow!("all {} orbits escaped; m_rho is 0 by construction", report.n_total)));
    }
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Outcome {
    let base = cfg.benchmark().map_err(Failure::config)?;
    let alphas = cfg.params.alphas.clone().unwrap_or_else(|| vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
    let rows = sweep_alpha(
        |a| benchmark_system(base.with_alpha(a)),
        &alphas,
        &cfg.grid(),
        &cfg.integration(),
        &cfg.functional(),
    )
    .map_err(Failure::core)?;
    write_csv(cfg, "sweep", &out_or(cfg, "sweep.csv"), |w| write_sweep_csv(w, &rows))?;
    for (a, r) in &rows {
        println!("alpha = {a}: m_rho = {:.6} (regular {}/{}, escaped {})", r.m_rho, r.n_regular, r.n_total, r.n_escaped);
    }
    Ok(())
}

pub fn converge(cfg: &RunConfig) -> Outcome {
    let system = benchmark_system(cfg.benchmark().map_err(Failure::config)?).map_err(Failure::core)?;
    let table = convergence_study(&system, &cfg.grid(), &cfg.integration(), &cfg.functional()).map_err(Failure::core)?;
    write_json(&out_or(cfg, "convergence.json"), &with_params(cfg, "converge", &table)).map_err(Failure::config)?;
    println!("baseline m_rho = {:.6} (escaped {})", table.baseline_m_rho, table.baseline_n_escaped);
    for r in &table.rows {
        let dl = r.mean_abs_delta_lambda.map_or("-".to_string(), |v| format!("{v:.3e}"));
        println!(
            "{:<11} m_rho = {:.6}  |dm| = {:.4}  rel = {:.4}  mean|dlambda| = {dl}  escaped {}",
            r.label, r.m_rho, r.delta_m_abs, r.delta_m_rel, r.n_escaped
        );
    }
    Ok(())
}

pub fn trajectory(cfg: &RunConfig) -> Outcome {
    let base = cfg.benchmark().map_err(Failure::config)?;
    let p = &cfg.params;
    let u0 = PhaseState::new(vec![p.x1, p.y1, p.x2, p.y2]).map_err(Failure::core)?;
    let alphas = p.alphas.clone().unwrap_or_else(|| vec![0.0, 0.1, 0.5]);
    let template = cfg.traj_csv.clone().unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    for a in alphas {
        let system = benchmark_system(base.with_alpha(a)).map_err(Failure::core)?;
        let flow = integrate_flow(&system, &u0, &cfg.integration()).map_err(Failure::core)?;
        let path = suffixed(&template, a);
        write_csv(cfg, "trajectory", &path, |w| write_trajectory_csv(w, &flow.trajectory))?;
        match &flow.escape {
            Some(e) => println!("alpha = {a}: escaped at t = {:.2} -> {}", e.time, path.display()),
            None => println!("alpha = {a}: bounded to t = {} -> {}", p.t_max, path.display()),
        }
    }
    Ok(())
}

pub fn poincare(cfg: &RunConfig) -> Outcome {
    let (model, pert) = sine_example();
    let map = build_first_order_map(&model, &pert, cfg.params.quad_nodes).map_err(Failure::core)?;
    let epsilons = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    let dt_fine = model.period() / DEFAULT_ORACLE_STEPS as f64;
    let rows = scaling_study(&map, &pert, 0.5, &[0.0], &epsilons, dt_fine).map_err(Failure::core)?;
    write_csv(cfg, "poincare", &out_or(cfg, "poincare.csv"), |w| write_poincare_csv(w, &rows))?;
    for pair in rows.windows(2) {
        println!(
            "epsilon = {:.3e}: error = {:.3e}, ratio to epsilon/2 = {:.3}",
            pair[0].epsilon,
            pair[0].error,
            pair[0].error / pair[1].error
        );
    }
    Ok(())
}

/// Reference diagnostics on the decoupled small-amplitude limit of the
/// benchmark. With `I = |u|^2 / 2` the unperturbed frequencies are
/// `(1 +- delta) / (1 + 2 epsilon I)`, and the cubic term of one oscillator
/// contributes `dI/dt = 4 alpha I^2 cos(4 theta)`.
pub fn diagnose(cfg: &RunConfig) -> Outcome {
    let p = cfg.params.clone();
    let freq = move |scale: f64| {
        let eps = p.epsilon;
        Analytic(move |k: usize, x: f64| {
            // d^k/dI^k scale / (1 + 2 eps I)
            let base = 1.0 + 2.0 * eps * x;
            let mut c = scale;
            for j in 1..=k {
                c *= -2.0 * eps * j as f64;
            }
            c / base.powi(k as i32 + 1)
        })
    };
    let f1 = freq(1.0 + p.delta);
    let f2 = freq(1.0 - p.delta);
    let fs: [&dyn SmoothFn; 2] = [&f1, &f2];
    let wronskian =
        check_nondegeneracy(&fs, (0.0, 2.0), 201, DEFAULT_ZERO_THRESHOLD, WronskianRows::FromValue).map_err(Failure::core)?;

    let u_ref = [p.x1, p.y1, p.x2, p.y2];
    let r2: f64 = u_ref.iter().map(|x| x * x).sum();
    let action = 0.5 * r2;
    let resonance = resonance_min(&[f1.value(action), f2.value(action)], 10).map_err(Failure::core)?;

    let alpha = p.alpha;
    let fourier = fourier_coeffs(|th| 4.0 * alpha * action * action * (4.0 * th).cos(), 8, 64).map_err(Failure::core)?;

    let g: Box<AngleFn> = Box::new(move |i: &[f64], th: f64| 4.0 * alpha * i[0] * i[0] * (4.0 * th).cos());
    let f0 = move |i: &[f64]| i[0] - action;
    let grad = |_: &[f64]| vec![1.0];
    let omega = |i: &[f64]| f1.value(i[0]);
    let samples = vec![vec![action]];
    let input = NonpersistenceInput {
        f0: &f0,
        grad_f0: &grad,
        g: vec![g.as_ref()],
        frequency: &omega,
        samples: &samples,
        max_j: 8,
        nodes: 64,
        threshold: DEFAULT_ZERO_THRESHOLD,
        tol_f: DEFAULT_ZERO_THRESHOLD,
    };
    let nonpersistence = nonpersistence_conditions(&input).map_err(Failure::core)?;
    let report = DiagnosticsReport { wronskian, resonance, fourier, nonpersistence };
    write_json(&out_or(cfg, "diagnostics.json"), &with_params(cfg, "diagnose", &report)).map_err(Failure::config)?;
    println!(
        "wronskian min = {:.3e} (pass = {}), resonance min = {:.3e} at p = {:?}, verdict = {:?}",
        report.wronskian.min, report.wronskian.pass, report.resonance.min, report.resonance.p, report.nonpersistence.verdict
    );
    Ok(())
}

pub const DIVERGENCE_BOUND: f64 = 1e-8;

/// Uniform samples in `[-2, 2]^4`, reproducible from `seed`.
pub fn divergence_samples(count: usize, seed: u64) -> Vec<PhaseState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DEFAULT_DOMAIN_HALF_WIDTH;
    (0..count)
        .map(|_| PhaseState::new((0..4).map(|_| rng.random_range(-w..=w)).collect()).expect("finite sample"))
        .collect()
}

pub fn verify_divergence(cfg: &RunConfig) -> Outcome {
    let system = benchmark_system(cfg.benchmark().map_err(Failure::config)?).map_err(Failure::core)?;
    let pts = divergence_samples(cfg.params.samples, cfg.params.seed);
    let max = check_weighted_divergence(&system, &pts, DEFAULT_DIVERGENCE_STEP).map_err(Failure::core)?;
    println!("max |div(rho V)| = {max:.3e} over {} samples (bound {DIVERGENCE_BOUND:e})", pts.len());
    if let Some(out) = &cfg.out {
        let body = json!({ "max_abs_divergence": max, "samples": pts.len(), "bound": DIVERGENCE_BOUND });
        write_json(out, &with_params(cfg, "verify-divergence", body)).map_err(Failure::config)?;
    }
    if max > DIVERGENCE_BOUND {
        return Err(Failure::numerical(anyhow!("weighted divergence {max:e} exceeds {DIVERGENCE_BOUND:e}")));
    }
    Ok(())
}
