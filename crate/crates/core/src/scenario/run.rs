use nalgebra::{DMatrix, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{FilterInit, InitialKind, ScenarioConfig, Target};
use super::ScenarioError;
use crate::accommodation::{
    AccommodationController, AccommodationSession, ControllerOptions, FaultEstimate,
    LeaderEstimate,
};
use crate::dynamics::{
    build_model, centroid_of, formation_residual, measurement, step, FaultEvent, LeaderInput,
    ModelKind, StateVector, SystemModel,
};
use crate::fif::{synthesize, DetectionResult, Detector, FilterBank, Verdict};

/// RNG stream used for random initial positions.
const STREAM_INITIAL: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    /// 1-based.
    pub faulty_agent: usize,
    pub delta_hat: [f64; 2],
    pub k_d_hat: usize,
    pub k_detect: usize,
    pub rho: usize,
    /// `k_detect - k_d` when a fault was injected.
    pub latency: Option<usize>,
    pub matched_gamma_norm: f64,
    pub max_unmatched_alpha_norm: f64,
    /// Whether the isolated agent is the injected one.
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterReport {
    /// 1-based.
    pub target: usize,
    pub rho: usize,
    pub peak_alpha_norm: f64,
    pub final_gamma_norm: f64,
    pub spectral_radius_obs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccommodationReport {
    pub enabled: bool,
    pub active_from: Option<usize>,
    pub target: Option<[f64; 2]>,
    /// `inactive`, `converged` or `non_convergence`.
    pub outcome: String,
    pub settled_after: Option<usize>,
    pub control_steps: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub steps: usize,
    pub n: usize,
    pub eps: f64,
    pub kind: ModelKind,
    pub observer: usize,
    pub leader: usize,
    pub stochastic: bool,
    pub step_too_large: bool,
    pub detection: Option<DetectionReport>,
    pub ambiguous_steps: usize,
    pub filters: Vec<FilterReport>,
    /// Largest gap between the matched filter's `γ` and the same filter's `γ`
    /// on the fault-free twin run.
    pub decoupling_gap: Option<f64>,
    pub accommodation: AccommodationReport,
    pub initial_centroid: [f64; 2],
    pub final_centroid: [f64; 2],
    pub final_centroid_error: Option<f64>,
    pub pre_fault_formation_residual: f64,
    pub final_formation_residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Traces {
    /// `(k, agent, x, y)`, agent 1-based.
    pub positions: Vec<(usize, usize, f64, f64)>,
    /// `(k, filter, alpha_x, alpha_y, alpha_norm, gamma_norm)`, filter 1-based.
    pub residuals: Vec<(usize, usize, f64, f64, f64, f64)>,
    /// `(k, cx, cy, cx_hat, cy_hat)`
    pub centroid: Vec<(usize, f64, f64, f64, f64)>,
    /// `(k, ux, uy)` in the scaled convention.
    pub control: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub report: RunReport,
    pub traces: Traces,
}

/// Initial configuration described by the config (`n × 2`).
pub fn initial_positions(cfg: &ScenarioConfig) -> Result<DMatrix<f64>, ScenarioError> {
    let n = cfg.graph.n;
    let x = match cfg.initial.kind {
        InitialKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(STREAM_INITIAL);
            let b = cfg.initial.half_width;
            let flat: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-b..=b)).collect();
            DMatrix::from_row_slice(n, 2, &flat)
        }
        InitialKind::Explicit => {
            let flat: Vec<f64> = cfg.initial.positions.iter().flatten().copied().collect();
            DMatrix::from_row_slice(n, 2, &flat)
        }
        InitialKind::Formation => {
            let spec = cfg.formation_spec()?.ok_or_else(|| ScenarioError::Validation {
                path: "initial.kind".into(),
                message: "\"formation\" needs a [formation] section".into(),
            })?;
            let mut x = spec.targets().clone();
            for mut row in x.row_iter_mut() {
                row[0] += cfg.initial.offset[0];
                row[1] += cfg.initial.offset[1];
            }
            x
        }
    };
    Ok(x)
}

fn translated(x: &DMatrix<f64>, t: [f64; 2]) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        row[0] += t[0];
        row[1] += t[1];
    }
    out
}

fn arr(v: Vector2<f64>) -> [f64; 2] {
    [v.x, v.y]
}

/// Fault effects injected but not yet visible to the matched filter:
/// `Σ_{s<ρ} A^s ε e_{i*} δ̂`.
fn pending_injections(model: &SystemModel, det: &DetectionResult) -> DMatrix<f64> {
    let n = model.n();
    let mut col = DMatrix::zeros(n, 2);
    col[(det.faulty_agent, 0)] = model.eps() * det.delta_hat.x;
    col[(det.faulty_agent, 1)] = model.eps() * det.delta_hat.y;
    let mut sum = DMatrix::zeros(n, 2);
    for _ in 0..det.rho {
        sum += &col;
        col = model.a() * col;
    }
    sum
}

struct Pending {
    det: DetectionResult,
    active_from: usize,
}

/// Runs a validated scenario end to end.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, ScenarioError> {
    cfg.validate()?;
    let graph = cfg.graph()?;
    let n = graph.n();
    let formation = cfg.formation_spec()?;
    let model = build_model(graph, cfg.eps, formation.as_ref())?;
    let observer = cfg.observer - 1;
    let leader = cfg.leader() - 1;
    let policy = cfg.filter.policy();

    let mut warnings = Vec::new();
    if let Some(w) = model.step_warning() {
        warnings.push(format!(
            "step size {} exceeds 1/max degree = {}; detectability guarantees do not hold",
            w.eps, w.bound
        ));
    }

    let fault = cfg.fault.as_ref().map(|f| FaultEvent {
        agent: f.agent - 1,
        delta: Vector2::new(f.delta[0], f.delta[1]),
        onset: f.k_d,
    });

    let x0 = initial_positions(cfg)?;
    let mut x = StateVector::new(x0.clone());
    let mut twin = fault.map(|_| StateVector::new(x0.clone()));

    let mut bank = FilterBank::new(&model, observer, policy)?;
    match cfg.filter.init {
        FilterInit::Zero => {}
        FilterInit::Known => bank.reset_estimates(&translated(&x0, cfg.filter.translation)),
    }
    let mut twin_bank = twin.as_ref().map(|_| bank.clone());
    let mut detector = Detector::new(cfg.detection.detector(), &bank)?;
    let target = cfg.target()?;
    let options = ControllerOptions {
        horizon: cfg.accommodation.horizon,
        stop_tol: cfg.accommodation.stop_tol,
        max_steps: cfg.accommodation.max_steps,
    };

    let mut traces = Traces::default();
    let mut peak_alpha = vec![0.0f64; n];
    let mut last_gamma = vec![0.0f64; n];
    let mut ambiguous_steps = 0usize;
    let mut decoupling_gap: Option<f64> = None;
    let mut detection_report: Option<DetectionReport> = None;
    let mut pending: Option<Pending> = None;
    let mut session: Option<AccommodationSession> = None;
    let mut active_from = None;
    let mut x_f: Option<Vector2<f64>> = match target {
        Target::Point(p) if cfg.accommodation.enabled => Some(Vector2::new(p[0], p[1])),
        _ => None,
    };
    let mut settled_after = None;
    let mut control_steps = 0usize;
    let mut energy = 0.0;
    let mut pre_fault_residual = None;

    for k in 0..cfg.steps {
        for i in 0..n {
            traces.positions.push((k, i + 1, x.positions[(i, 0)], x.positions[(i, 1)]));
        }
        if fault.is_some_and(|f| f.onset == k) {
            pre_fault_residual = Some(formation_residual(&model, &x));
        }
        let leader_pos = x.position(leader);

        // start accommodation once the detection is old enough
        if let Some(p) = pending.as_ref().filter(|p| k >= p.active_from) {
            let det = p.det;
            let matched = bank.filter(det.faulty_agent);
            let xhat = &matched.xhat + pending_injections(&model, &det);
            let estimate = LeaderEstimate::new(leader, xhat);
            let target_point = match target {
                Target::Point(pt) => Vector2::new(pt[0], pt[1]),
                Target::Hold => {
                    let since = (k - det.k_d_hat) as f64;
                    centroid_of(&estimate.corrected(leader_pos))
                        - det.delta_hat * (since * model.eps() / n as f64)
                }
            };
            x_f = Some(target_point);
            let gain = if leader == observer {
                matched.gain.clone()
            } else {
                synthesize(&model, leader, det.faulty_agent, policy)?.gain
            };
            let ctrl = AccommodationController::new(&model, leader, target_point, options)?;
            let fault_estimate = FaultEstimate {
                agent: det.faulty_agent,
                delta: det.delta_hat,
            };
            session = Some(AccommodationSession::new(
                ctrl,
                estimate,
                gain,
                model.measurement_matrix(leader),
                Some(fault_estimate),
            ));
            active_from = Some(k);
            pending = None;
        }

        let mut input: Option<LeaderInput> = None;
        let centroid_hat;
        match session.as_mut().filter(|s| s.steps() < options.max_steps) {
            Some(s) => {
                let y_l = measurement(&model, &x, leader);
                let sample = s.step(&model, k, &y_l, leader_pos)?;
                centroid_hat = sample.centroid_hat;
                input = Some(s.physical(sample.u));
                traces.control.push((k, sample.u.x, sample.u.y));
                control_steps += 1;
                energy += sample.u.norm_squared();
                if settled_after.is_none() && s.settled() {
                    settled_after = Some(s.steps());
                }
            }
            None => {
                let est = LeaderEstimate::new(leader, bank.filter(leader).xhat.clone());
                centroid_hat = crate::accommodation::estimate_centroid(&est, leader_pos);
            }
        }

        let y_o = measurement(&model, &x, observer);
        let samples = bank.step(k, &y_o, input.as_ref());
        if let (Some(tb), Some(tx), Some(f)) = (twin_bank.as_mut(), twin.as_ref(), fault.as_ref()) {
            let y_twin = measurement(&model, tx, observer);
            let twin_samples = tb.step(k, &y_twin, input.as_ref());
            let gap = (&samples[f.agent].gamma - &twin_samples[f.agent].gamma).norm();
            decoupling_gap = Some(decoupling_gap.map_or(gap, |g: f64| g.max(gap)));
        }

        for (i, s) in samples.iter().enumerate() {
            let a = s.alpha_norm();
            peak_alpha[i] = peak_alpha[i].max(a);
            last_gamma[i] = s.gamma_norm();
            traces
                .residuals
                .push((k, i + 1, s.alpha.x, s.alpha.y, a, last_gamma[i]));
        }
        traces.centroid.push((
            k,
            centroid_of(&x.positions).x,
            centroid_of(&x.positions).y,
            centroid_hat.x,
            centroid_hat.y,
        ));

        if detection_report.is_none() {
            match detector.observe(&samples) {
                Verdict::Detected(det) => {
                    let i = det.faulty_agent;
                    let max_unmatched = samples
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, s)| s.alpha_norm())
                        .fold(0.0, f64::max);
                    detection_report = Some(DetectionReport {
                        faulty_agent: i + 1,
                        delta_hat: arr(det.delta_hat),
                        k_d_hat: det.k_d_hat,
                        k_detect: det.k_detect,
                        rho: det.rho,
                        latency: fault.map(|f| det.k_detect.saturating_sub(f.onset)),
                        matched_gamma_norm: samples[i].gamma_norm(),
                        max_unmatched_alpha_norm: max_unmatched,
                        correct: fault.map(|f| f.agent == i),
                    });
                    if cfg.accommodation.enabled {
                        pending = Some(Pending {
                            det,
                            active_from: (det.k_detect + 1).max(det.k_d_hat + det.rho + 1),
                        });
                    }
                }
                Verdict::Ambiguous(_) => ambiguous_steps += 1,
                Verdict::Quiet | Verdict::Pending { .. } => {}
            }
        }

        x = step(&model, &x, fault.as_ref(), input.as_ref());
        if let Some(tx) = twin.as_mut() {
            *tx = step(&model, tx, None, input.as_ref());
        }
    }

    let final_centroid = centroid_of(&x.positions);
    let final_residual = formation_residual(&model, &x);
    let outcome = match (&session, settled_after) {
        (None, _) => "inactive",
        (Some(_), Some(_)) => "converged",
        (Some(_), None) => "non_convergence",
    };

    let filters = bank
        .filters()
        .iter()
        .enumerate()
        .map(|(i, f)| FilterReport {
            target: i + 1,
            rho: f.rho,
            peak_alpha_norm: peak_alpha[i],
            final_gamma_norm: last_gamma[i],
            spectral_radius_obs: f.spectral_radius_obs,
        })
        .collect();

    let report = RunReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        steps: cfg.steps,
        n,
        eps: cfg.eps,
        kind: model.kind(),
        observer: cfg.observer,
        leader: cfg.leader(),
        stochastic: model.is_stochastic(),
        step_too_large: model.step_warning().is_some(),
        detection: detection_report,
        ambiguous_steps,
        filters,
        decoupling_gap,
        accommodation: AccommodationReport {
            enabled: cfg.accommodation.enabled,
            active_from,
            target: x_f.map(arr),
            outcome: outcome.into(),
            settled_after,
            control_steps,
            energy,
        },
        initial_centroid: arr(centroid_of(&x0)),
        final_centroid: arr(final_centroid),
        final_centroid_error: x_f.map(|t| (final_centroid - t).norm()),
        pre_fault_formation_residual: pre_fault_residual.unwrap_or(final_residual),
        final_formation_residual: final_residual,
        warnings,
    };

    Ok(RunOutput {
        config: cfg.clone(),
        report,
        traces,
    })
}
