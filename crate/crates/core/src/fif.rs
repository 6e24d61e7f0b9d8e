//! Bank of fault-identification filters hosted on the observer agent.
//!
//! Filter `i` assumes the fault sits on agent `i`. Its innovation splits into
//! a coupled residual `α_i` (2-vector, estimates the fault) and a decoupled
//! residual `γ_i` that the fault at agent `i` cannot reach. Only the matched
//! filter sees a clean `α = δ` with `γ → 0`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, RowDVector, Vector2};
use thiserror::Error;

use crate::dynamics::{measurement_matrix, LeaderInput, SystemModel};
use crate::numerics::{self, NumericsError, DEFAULT_TOL};

/// Magnitude below which `C_o A^{v-1} e_i` counts as zero.
pub const DETECTABILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("fault on agent {target} is not visible to observer {observer}")]
    NotDetectable { observer: usize, target: usize },
    #[error("detectability matrix for target {0} lost rank")]
    SynthesisRankFailure(usize),
    #[error("agent index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("invalid detection thresholds: {0}")]
    InvalidThresholds(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Choice of the free gain `K̄_i`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum KbarPolicy {
    #[default]
    Zero,
    /// `K̄ = s · A · C_o⁺ · βᵀ`.
    ScaledIdentityProjection(f64),
}

/// Smallest `v ≥ 1` with `C_o A^{v-1} e_target ≠ 0`, searched up to `v = n`.
pub fn detectability_index(
    model: &SystemModel,
    observer: usize,
    target: usize,
) -> Result<usize, FilterError> {
    let n = model.n();
    if observer >= n {
        return Err(FilterError::IndexOutOfRange(observer));
    }
    if target >= n {
        return Err(FilterError::IndexOutOfRange(target));
    }
    let c = model.measurement_matrix(observer);
    let mut col = DVector::zeros(n);
    col[target] = 1.0;
    for v in 1..=n {
        let seen = &c * &col;
        if seen.amax() > DETECTABILITY_TOL {
            return Ok(v);
        }
        col = model.a() * col;
    }
    Err(FilterError::NotDetectable { observer, target })
}

/// Read-only data shared by every filter of one bank.
#[derive(Debug, Clone, PartialEq)]
struct Shared {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    /// `ε φ`, the known formation drive.
    drive: DMatrix<f64>,
}

/// One synthesized filter plus its running estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultFilter {
    pub target: usize,
    pub rho: usize,
    /// `ψ = A^{ρ-1} ε e_target`
    pub psi: DVector<f64>,
    /// `d = C_o ψ`
    pub d: DVector<f64>,
    /// `π = d⁺`
    pub pi: RowDVector<f64>,
    /// Orthonormal rows spanning the left null space of `d`.
    pub sigma: DMatrix<f64>,
    /// `ω = A ψ`
    pub omega: DVector<f64>,
    pub kbar: DMatrix<f64>,
    /// `K = ω π + K̄ Σ`
    pub gain: DMatrix<f64>,
    /// Spectral radius of `A - K C_o` off the translation direction.
    pub spectral_radius_obs: f64,
    pub xhat: DMatrix<f64>,
    shared: Arc<Shared>,
}

/// Residuals emitted by one filter at one step (computed from the innovation
/// before the estimate update).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSample {
    pub k: usize,
    pub alpha: Vector2<f64>,
    /// `(m_o - 1) × 2`
    pub gamma: DMatrix<f64>,
}

impl ResidualSample {
    pub fn alpha_norm(&self) -> f64 {
        self.alpha.norm()
    }

    pub fn gamma_norm(&self) -> f64 {
        self.gamma.norm()
    }
}

fn shared_for(model: &SystemModel, observer: usize) -> Arc<Shared> {
    Arc::new(Shared {
        a: model.a().clone(),
        c: model.measurement_matrix(observer),
        drive: model.phi() * model.eps(),
    })
}

/// Builds the filter for `target` on `observer`.
pub fn synthesize(
    model: &SystemModel,
    observer: usize,
    target: usize,
    policy: KbarPolicy,
) -> Result<FaultFilter, FilterError> {
    synthesize_with(model, shared_for(model, observer), observer, target, policy)
}

fn synthesize_with(
    model: &SystemModel,
    shared: Arc<Shared>,
    observer: usize,
    target: usize,
    policy: KbarPolicy,
) -> Result<FaultFilter, FilterError> {
    let rho = detectability_index(model, observer, target)?;
    let n = model.n();
    let a = &shared.a;
    let c = &shared.c;

    let mut unit = DVector::zeros(n);
    unit[target] = model.eps();
    let psi = numerics::matrix_power(a, (rho - 1) as u32)? * unit;
    let d = c * &psi;
    if d.amax() <= DETECTABILITY_TOL {
        return Err(FilterError::SynthesisRankFailure(target));
    }
    let d_mat = DMatrix::from_column_slice(d.len(), 1, d.as_slice());
    let pi_mat = numerics::pseudoinverse(&d_mat, DEFAULT_TOL)?;
    let pi = RowDVector::from_row_slice(pi_mat.as_slice());
    let sigma = numerics::left_null_basis(&d_mat, DEFAULT_TOL)?;
    if sigma.nrows() + 1 != d.len() {
        return Err(FilterError::SynthesisRankFailure(target));
    }
    let omega = a * &psi;

    let kbar = match policy {
        KbarPolicy::Zero => DMatrix::zeros(n, sigma.nrows()),
        KbarPolicy::ScaledIdentityProjection(s) => {
            let c_pinv = numerics::pseudoinverse(c, DEFAULT_TOL)?;
            a * c_pinv * sigma.transpose() * s
        }
    };
    let gain = &omega * &pi + &kbar * &sigma;
    let closed = a - &gain * c;
    let spectral_radius_obs = numerics::spectral_radius_off_consensus(&closed)?;

    Ok(FaultFilter {
        target,
        rho,
        psi,
        d,
        pi,
        sigma,
        omega,
        kbar,
        gain,
        spectral_radius_obs,
        xhat: DMatrix::zeros(n, 2),
        shared,
    })
}

impl FaultFilter {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.shared.a
    }

    /// Observer measurement matrix `C_o`.
    pub fn c(&self) -> &DMatrix<f64> {
        &self.shared.c
    }

    /// `‖Π D - 1‖`, `‖Σ D‖` and `‖(A - K C_o) ψ‖`.
    pub fn identity_residuals(&self) -> (f64, f64, f64) {
        let pd = (&self.pi * &self.d)[(0, 0)];
        let sd = (&self.sigma * &self.d).norm();
        let closed = self.a() - &self.gain * self.c();
        (
            (pd - 1.0).abs(),
            sd,
            (closed * &self.psi).norm(),
        )
    }

    pub fn sigma_rank(&self) -> usize {
        if self.sigma.nrows() == 0 {
            return 0;
        }
        numerics::rank(&self.sigma, DEFAULT_TOL).unwrap_or(0)
    }

    /// Innovation split, then `x̂ ← A x̂ + ω α + K̄ γ + ε φ`, plus the leader
    /// input when the observer knows it.
    pub fn step(&mut self, k: usize, y: &DMatrix<f64>, input: Option<&LeaderInput>) -> ResidualSample {
        let innovation = y - self.c() * &self.xhat;
        let alpha_row = &self.pi * &innovation;
        let gamma = &self.sigma * &innovation;

        let mut next = self.a() * &self.xhat + &self.omega * &alpha_row + &self.kbar * &gamma;
        next += &self.shared.drive;
        if let Some(inp) = input {
            next[(inp.leader, 0)] += inp.u.x;
            next[(inp.leader, 1)] += inp.u.y;
        }
        self.xhat = next;

        ResidualSample {
            k,
            alpha: Vector2::new(alpha_row[(0, 0)], alpha_row[(0, 1)]),
            gamma,
        }
    }
}

/// All `n` filters of one observer.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    observer: usize,
    filters: Vec<FaultFilter>,
}

impl FilterBank {
    pub fn new(model: &SystemModel, observer: usize, policy: KbarPolicy) -> Result<Self, FilterError> {
        if observer >= model.n() {
            return Err(FilterError::IndexOutOfRange(observer));
        }
        let shared = shared_for(model, observer);
        let filters = (0..model.n())
            .map(|t| synthesize_with(model, Arc::clone(&shared), observer, t, policy))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { observer, filters })
    }

    pub fn observer(&self) -> usize {
        self.observer
    }

    pub fn filters(&self) -> &[FaultFilter] {
        &self.filters
    }

    pub fn filter(&self, target: usize) -> &FaultFilter {
        &self.filters[target]
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    /// Sets every filter's estimate to `xhat`.
    pub fn reset_estimates(&mut self, xhat: &DMatrix<f64>) {
        for f in &mut self.filters {
            f.xhat = xhat.clone();
        }
    }

    pub fn step(
        &mut self,
        k: usize,
        y: &DMatrix<f64>,
        input: Option<&LeaderInput>,
    ) -> Vec<ResidualSample> {
        self.filters.iter_mut().map(|f| f.step(k, y, input)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma_tol: f64,
    pub debounce: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            kappa1: 0.5,
            kappa2: 0.1,
            gamma_tol: 1e-3,
            debounce: 2,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.kappa1) && positive(self.kappa2) && positive(self.gamma_tol)) {
            return Err(FilterError::InvalidThresholds(
                "thresholds must be finite and positive".into(),
            ));
        }
        if self.kappa2 >= self.kappa1 {
            return Err(FilterError::InvalidThresholds(format!(
                "kappa2 ({}) must be below kappa1 ({})",
                self.kappa2, self.kappa1
            )));
        }
        if self.debounce == 0 {
            return Err(FilterError::InvalidThresholds("debounce must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionResult {
    pub faulty_agent: usize,
    pub delta_hat: Vector2<f64>,
    /// Inferred onset: first step of the qualifying window minus `ρ`.
    pub k_d_hat: usize,
    pub k_detect: usize,
    pub rho: usize,
}

/// Instantaneous outcome of the detection condition at one step.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Quiet,
    Single(usize),
    Ambiguous(Vec<usize>),
}

/// Evaluates the threshold test on one step of bank residuals.
pub fn condition(samples: &[ResidualSample], cfg: &DetectorConfig) -> Condition {
    let above: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.alpha_norm() > cfg.kappa1)
        .map(|(i, _)| i)
        .collect();
    if above.is_empty() {
        return Condition::Quiet;
    }
    let rest_small = samples
        .iter()
        .enumerate()
        .filter(|(i, _)| !above.contains(i))
        .all(|(_, s)| s.alpha_norm() < cfg.kappa2);
    let gammas_small = above
        .iter()
        .all(|&i| samples[i].gamma_norm() < cfg.gamma_tol);
    if !(rest_small && gammas_small) {
        return Condition::Quiet;
    }
    if above.len() == 1 {
        Condition::Single(above[0])
    } else {
        Condition::Ambiguous(above)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Quiet,
    Pending { candidate: usize, count: usize },
    Detected(DetectionResult),
    Ambiguous(Vec<usize>),
}

/// Debounced detector: the same single filter must satisfy the condition on
/// `debounce` consecutive steps.
#[derive(Debug, Clone)]
pub struct Detector {
    cfg: DetectorConfig,
    rho: Vec<usize>,
    candidate: Option<(usize, usize, usize)>,
    result: Option<DetectionResult>,
}

impl Detector {
    pub fn new(cfg: DetectorConfig, bank: &FilterBank) -> Result<Self, FilterError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rho: bank.filters().iter().map(|f| f.rho).collect(),
            candidate: None,
            result: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn result(&self) -> Option<&DetectionResult> {
        self.result.as_ref()
    }

    /// Feeds one step of residuals. After a detection the verdict stays
    /// `Detected` with the original result.
    pub fn observe(&mut self, samples: &[ResidualSample]) -> Verdict {
        if let Some(r) = self.result {
            return Verdict::Detected(r);
        }
        let k = samples.first().map_or(0, |s| s.k);
        match condition(samples, &self.cfg) {
            Condition::Quiet => {
                self.candidate = None;
                Verdict::Quiet
            }
            Condition::Ambiguous(list) => {
                self.candidate = None;
                Verdict::Ambiguous(list)
            }
            Condition::Single(i) => {
                let (start, count) = match self.candidate {
                    Some((c, start, count)) if c == i && k == start + count => (start, count + 1),
                    _ => (k, 1),
                };
                self.candidate = Some((i, start, count));
                if count < self.cfg.debounce {
                    return Verdict::Pending { candidate: i, count };
                }
                let rho = self.rho[i];
                let r = DetectionResult {
                    faulty_agent: i,
                    delta_hat: samples[i].alpha,
                    k_d_hat: start.saturating_sub(rho),
                    k_detect: k,
                    rho,
                };
                self.result = Some(r);
                Verdict::Detected(r)
            }
        }
    }
}

/// Convenience: reduced measurement matrix of `observer` on `model`.
pub fn observer_matrix(model: &SystemModel, observer: usize) -> DMatrix<f64> {
    measurement_matrix(model.graph(), observer)
}
