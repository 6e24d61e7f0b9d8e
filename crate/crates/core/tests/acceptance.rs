//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{
    apply_open_loop, impulse_map, kkt_solve, model_at, preset_config, random_edges, random_graph,
    random_positions, rng,
};
use consensus_fdi::accommodation::{gramian, AccommodationController, ControllerOptions, FaultEstimate};
use consensus_fdi::dynamics::{build_model, centroid, FaultEvent, FormationSpec, StateVector};
use consensus_fdi::fif::{detectability_index, FilterBank, KbarPolicy};
use consensus_fdi::scenario::{presets, run_scenario};
use nalgebra::{DVector, Vector2};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn synthesis_identities() -> Check {
    let start = Instant::now();
    let mut r = rng(101);
    let mut filters = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let model = model_at(random_graph(&mut r, 2, 12), 0.9);
        for obs in 0..model.n() {
            let bank = FilterBank::new(&model, obs, KbarPolicy::Zero).map_err(|e| e.to_string())?;
            let m_o = model.graph().degree(obs);
            for f in bank.filters() {
                let (pd, sd, closed) = f.identity_residuals();
                worst = worst.max(pd).max(sd).max(closed);
                ensure(pd <= 1e-10 && sd <= 1e-10 && closed <= 1e-10, || {
                    format!("observer {obs} target {}: {pd:e} {sd:e} {closed:e}", f.target)
                })?;
                let rank = if m_o > 1 { f.sigma_rank() } else { 0 };
                ensure(f.sigma.nrows() == m_o - 1 && rank == m_o - 1, || {
                    format!("observer {obs} target {}: rank {rank}, expected {}", f.target, m_o - 1)
                })?;
                filters += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{filters} filters, worst identity residual {worst:.1e}"))
}

fn detectability_equals_geodesic() -> Check {
    let start = Instant::now();
    let mut r = rng(202);
    let mut pairs = 0;
    for g_idx in 0..200 {
        let model = model_at(random_graph(&mut r, 2, 12), 0.9);
        let table = model.graph().geodesics();
        for o in 0..model.n() {
            for t in (0..model.n()).filter(|&t| t != o) {
                let rho = detectability_index(&model, o, t).map_err(|e| e.to_string())?;
                ensure(rho == table.get(o, t), || {
                    format!("graph {g_idx}: rho({o},{t}) = {rho}, geodesic {}", table.get(o, t))
                })?;
                pairs += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{pairs} pairs, 0 mismatches"))
}

fn stochastic_step_bound() -> Check {
    let mut r = rng(303);
    for _ in 0..100 {
        let n = r.random_range(2..=12);
        let g = consensus_fdi::Graph::new(n, &random_edges(&mut r, n)).map_err(|e| e.to_string())?;
        let bound = 1.0 / g.max_degree() as f64;
        for eps in [bound, bound * r.random_range(0.01..1.0)] {
            let m = build_model(g.clone(), eps, None).map_err(|e| e.to_string())?;
            for i in 0..n {
                let row = m.a().row(i);
                ensure((row.sum() - 1.0).abs() <= 1e-14, || format!("row {i} sums to {}", row.sum()))?;
                ensure(row.iter().all(|&v| v >= -1e-15), || format!("row {i} has a negative entry"))?;
            }
            ensure(m.step_warning().is_none(), || "flag raised below the bound".into())?;
        }
        let big = build_model(g, bound * r.random_range(1.01..3.0), None).map_err(|e| e.to_string())?;
        ensure(big.step_warning().is_some(), || "flag missing above the bound".into())?;
    }
    Ok("100 graphs at and below the bound, flag fires above".into())
}

fn consensus_detection() -> Check {
    let start = Instant::now();
    let out = run_scenario(&preset_config("consensus-fig2")).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let det = out.report.detection.as_ref().ok_or("no detection")?;
    ensure(det.faulty_agent == 7, || format!("detected agent {}", det.faulty_agent))?;
    // α of the matched filter at the end of the run
    let last_k = out.report.steps - 1;
    let &(_, _, ax, ay, _, _) = out
        .traces
        .residuals
        .iter()
        .find(|row| row.0 == last_k && row.1 == 7)
        .ok_or("missing residual row")?;
    ensure((ax - 2.0).abs() <= 1e-3 && (ay - 1.0).abs() <= 1e-3, || {
        format!("matched alpha ends at ({ax}, {ay})")
    })?;
    ensure(det.matched_gamma_norm < 1e-3, || format!("gamma {}", det.matched_gamma_norm))?;
    ensure(det.max_unmatched_alpha_norm < 0.1, || {
        format!("unmatched alpha {}", det.max_unmatched_alpha_norm)
    })?;
    let latency = det.latency.ok_or("no latency")?;
    ensure(latency >= det.rho, || format!("latency {latency} < rho {}", det.rho))?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "agent 7 at k={}, delta_hat=({:.6}, {:.6}), latency {latency} >= rho {}, {elapsed:.0?}",
        det.k_detect, det.delta_hat[0], det.delta_hat[1], det.rho
    ))
}

fn directional_decoupling() -> Check {
    let mut r = rng(505);
    let mut worst: f64 = 0.0;
    for s in 0..20 {
        let n = r.random_range(3..=12);
        let edges = random_edges(&mut r, n);
        let mut cfg = preset_config("consensus-accommodation");
        cfg.name = format!("decoupling-{s}");
        cfg.seed = s;
        cfg.steps = 300;
        cfg.graph.n = n;
        cfg.graph.edges = edges.iter().map(|&(a, b)| [a, b]).collect();
        let max_deg = consensus_fdi::Graph::new(n, &edges).map_err(|e| e.to_string())?.max_degree();
        cfg.eps = 0.9 / max_deg as f64;
        cfg.observer = r.random_range(1..=n);
        cfg.leader = Some(cfg.observer);
        cfg.filter.init = if s % 2 == 0 {
            consensus_fdi::scenario::FilterInit::Zero
        } else {
            consensus_fdi::scenario::FilterInit::Known
        };
        let fault = cfg.fault.as_mut().ok_or("preset without fault")?;
        fault.agent = r.random_range(1..=n);
        fault.delta = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)];
        fault.k_d = r.random_range(0..20);
        let out = run_scenario(&cfg).map_err(|e| format!("scenario {s}: {e}"))?;
        let gap = out.report.decoupling_gap.ok_or("no twin run")?;
        ensure(gap <= 1e-9, || format!("scenario {s}: gap {gap:e}"))?;
        worst = worst.max(gap);
    }
    Ok(format!("20 scenarios, largest gamma gap {worst:.1e}"))
}

fn centroid_hold() -> Check {
    let start = Instant::now();
    let cfg = preset_config("consensus-accommodation");
    let out = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let err = out.report.final_centroid_error.ok_or("no target")?;
    ensure(err < 1e-2, || format!("final centroid error {err}"))?;

    let mut open = cfg.clone();
    open.accommodation.enabled = false;
    let drift = run_scenario(&open).map_err(|e| e.to_string())?;
    let fault = cfg.fault.as_ref().ok_or("preset without fault")?;
    let slope = cfg.eps * fault.delta[0].hypot(fault.delta[1]) / cfg.graph.n as f64;
    let mut worst: f64 = 0.0;
    for w in drift.traces.centroid.windows(2).skip(fault.k_d) {
        let step = (w[1].1 - w[0].1).hypot(w[1].2 - w[0].2);
        worst = worst.max((step - slope).abs());
    }
    ensure(worst <= 1e-10, || format!("drift slope off by {worst:e}"))?;
    within(elapsed, Duration::from_secs(2))?;
    Ok(format!("final error {err:.1e}, open-loop slope error {worst:.1e}, {elapsed:.0?}"))
}

fn optimal_control_oracle() -> Check {
    let mut r = rng(707);
    let mut worst_terminal: f64 = 0.0;
    let mut worst_energy: f64 = 0.0;
    for instance in 0..30 {
        let g = random_graph(&mut r, 2, 9);
        let n = g.n();
        let model = if instance % 3 == 0 {
            let spec = FormationSpec::new(random_positions(&mut r, n, 3.0)).map_err(|e| e.to_string())?;
            let eps = r.random_range(0.2..=1.0) / g.max_degree() as f64;
            build_model(g, eps, Some(&spec)).map_err(|e| e.to_string())?
        } else {
            model_at(g, r.random_range(0.2..=1.0))
        };
        let horizon = r.random_range(1..=20);
        let leader = r.random_range(0..n);
        let fault = FaultEvent {
            agent: r.random_range(0..n),
            delta: Vector2::new(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)),
            onset: 0,
        };
        let x0 = StateVector::new(random_positions(&mut r, n, 5.0));
        let x_f = Vector2::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0));
        let opts = ControllerOptions {
            horizon,
            ..ControllerOptions::default()
        };
        let ctrl = AccommodationController::new(&model, leader, x_f, opts).map_err(|e| e.to_string())?;
        let est = FaultEstimate {
            agent: fault.agent,
            delta: fault.delta,
        };
        let seq = ctrl.sequence(&x0.positions, Some(&est)).map_err(|e| e.to_string())?;
        let end = apply_open_loop(&model, &x0, Some(&fault), leader, &seq);
        let terminal = (centroid(&end) - x_f).norm();
        ensure(terminal <= 1e-8, || format!("instance {instance}: terminal error {terminal:e}"))?;

        let (gm, c0) = impulse_map(&model, &x0, &fault, leader, horizon);
        let oracle = kkt_solve(&gm, &(DVector::from_column_slice(x_f.as_slice()) - c0));
        let energy: f64 = seq.iter().map(|u| u.norm_squared()).sum();
        let rel = (energy - oracle.norm_squared()).abs() / oracle.norm_squared().max(1e-300);
        ensure(rel <= 1e-6, || format!("instance {instance}: energy mismatch {rel:e}"))?;
        worst_terminal = worst_terminal.max(terminal);
        worst_energy = worst_energy.max(rel);
    }
    Ok(format!(
        "30 instances, terminal error <= {worst_terminal:.1e}, energy rel. error <= {worst_energy:.1e}"
    ))
}

fn gramian_closed_form() -> Check {
    let mut r = rng(808);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let model = model_at(random_graph(&mut r, 2, 12), r.random_range(0.05..=1.0));
        let n = model.n() as f64;
        let horizon = r.random_range(1..=40);
        let g = gramian(&model, r.random_range(0..model.n()), horizon).map_err(|e| e.to_string())?;
        let expect = horizon as f64 * model.eps().powi(2) / (n * n);
        let err = (g.core - nalgebra::Matrix2::identity() * expect).amax();
        ensure(err <= 1e-12, || format!("core off by {err:e}"))?;
        worst = worst.max(err);
    }
    Ok(format!("50 stochastic models, largest deviation {worst:.1e}"))
}

fn formation_recovery() -> Check {
    let start = Instant::now();
    let out = run_scenario(&preset_config("formation-recovery")).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let c = out.report.final_centroid;
    let norm = c[0].hypot(c[1]);
    ensure(norm < 1e-2, || format!("final centroid norm {norm}"))?;
    let pre = out.report.pre_fault_formation_residual;
    ensure(pre < 1e-6, || format!("pre-fault formation residual {pre}"))?;
    within(elapsed, Duration::from_secs(2))?;
    Ok(format!("final centroid norm {norm:.1e}, pre-fault residual {pre:.1e}, {elapsed:.0?}"))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files = ["positions.csv", "residuals.csv", "centroid.csv", "control.csv", "report.json"];
    for name in presets::names() {
        let mut outputs = Vec::new();
        for attempt in 0..2 {
            let out = dir.path().join(format!("{name}-{attempt}"));
            let status = Command::new(env!("CARGO_BIN_EXE_consensus-fdi"))
                .args(["run", "--preset", name, "--seed", "7", "--out"])
                .arg(&out)
                .env_remove(consensus_fdi::cli::OUT_ENV)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), || format!("{name}: run failed"))?;
            outputs.push(out);
        }
        for f in files {
            let a = fs::read(outputs[0].join(f)).map_err(|e| e.to_string())?;
            let b = fs::read(outputs[1].join(f)).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{name}/{f} differs between runs"))?;
        }
    }
    Ok(format!("{} presets, {} files each, byte-identical", presets::names().len(), files.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("synthesis identities", synthesis_identities),
        ("detectability index equals geodesic distance", detectability_equals_geodesic),
        ("row-stochastic step bound", stochastic_step_bound),
        ("consensus fault detection", consensus_detection),
        ("directional decoupling", directional_decoupling),
        ("centroid hold under accommodation", centroid_hold),
        ("minimum-energy control oracle", optimal_control_oracle),
        ("gramian closed form", gramian_closed_form),
        ("formation recovery", formation_recovery),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({elapsed:.2?}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({elapsed:.2?}): {why}", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
