//! Leader-side fault accommodation.
//!
//! After detection the leader runs its own state-estimation filter, corrects
//! the unobservable translation with its absolute position, and applies the
//! first element of the minimum-energy `N`-step input that puts the centroid
//! on `x_f`.
//!
//! Inputs here use the scaled convention `B_l = ε e_l`; the simulator applies
//! `ε u` (see [`LeaderInput::from_scaled`]).

use nalgebra::{DMatrix, Matrix2, RowDVector, Vector2};
use thiserror::Error;

use crate::dynamics::{LeaderInput, SystemModel};

/// Consecutive in-tolerance steps required before the loop reports convergence.
pub const SETTLE_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccommodationError {
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("agent index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("centroid Gramian is singular (core {0:e}); the leader cannot steer the centroid")]
    SingularGramian(f64),
    #[error("estimate has shape {0}x{1}, expected {2}x2")]
    ShapeMismatch(usize, usize, usize),
}

/// Leader's estimate of the full team state.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderEstimate {
    pub leader: usize,
    pub xhat: DMatrix<f64>,
}

impl LeaderEstimate {
    pub fn new(leader: usize, xhat: DMatrix<f64>) -> Self {
        Self { leader, xhat }
    }

    /// Estimate shifted so that the leader's own entry equals its measured
    /// position.
    pub fn corrected(&self, leader_position: Vector2<f64>) -> DMatrix<f64> {
        let shift = Vector2::new(
            self.xhat[(self.leader, 0)] - leader_position.x,
            self.xhat[(self.leader, 1)] - leader_position.y,
        );
        let mut out = self.xhat.clone();
        for mut row in out.row_iter_mut() {
            row[0] -= shift.x;
            row[1] -= shift.y;
        }
        out
    }
}

/// Translation-corrected centroid estimate.
pub fn estimate_centroid(est: &LeaderEstimate, leader_position: Vector2<f64>) -> Vector2<f64> {
    crate::dynamics::centroid_of(&est.corrected(leader_position))
}

/// Known fault information fed forward by the leader.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultEstimate {
    pub agent: usize,
    pub delta: Vector2<f64>,
}

/// `x̂ ← A x̂ + K (y_l - C_l x̂) + ε e_l u + ε e_{i*} δ̂ + ε φ`.
///
/// `gain` is `n × m_l` and `c_l` the leader's reduced measurement matrix.
#[allow(clippy::too_many_arguments)]
pub fn leader_filter_step(
    est: &LeaderEstimate,
    model: &SystemModel,
    gain: &DMatrix<f64>,
    c_l: &DMatrix<f64>,
    y_l: &DMatrix<f64>,
    u: Vector2<f64>,
    fault: Option<&FaultEstimate>,
) -> LeaderEstimate {
    let eps = model.eps();
    let innovation = y_l - c_l * &est.xhat;
    let mut next = model.a() * &est.xhat + gain * innovation + model.phi() * eps;
    next[(est.leader, 0)] += eps * u.x;
    next[(est.leader, 1)] += eps * u.y;
    if let Some(f) = fault {
        next[(f.agent, 0)] += eps * f.delta.x;
        next[(f.agent, 1)] += eps * f.delta.y;
    }
    LeaderEstimate {
        leader: est.leader,
        xhat: next,
    }
}

/// Centroid projection of the `N`-step controllability Gramian.
#[derive(Debug, Clone, PartialEq)]
pub struct Gramian {
    /// `M W_c Mᵀ`
    pub core: Matrix2<f64>,
    /// Reduced scalars `M A^τ b_l`, `τ = 0..N`.
    pub factors: Vec<f64>,
}

/// `Σ_{τ<N} (M A^τ B_l)(M A^τ B_l)ᵀ` in reduced form.
pub fn gramian(model: &SystemModel, leader: usize, horizon: usize) -> Result<Gramian, AccommodationError> {
    let rows = centroid_rows(model, horizon)?;
    if leader >= model.n() {
        return Err(AccommodationError::IndexOutOfRange(leader));
    }
    build_gramian(&rows, leader, model.eps(), horizon)
}

/// `M A^s` for `s = 0..=N` as reduced row vectors.
fn centroid_rows(model: &SystemModel, horizon: usize) -> Result<Vec<RowDVector<f64>>, AccommodationError> {
    if horizon == 0 {
        return Err(AccommodationError::InvalidHorizon);
    }
    let n = model.n();
    let mut rows = Vec::with_capacity(horizon + 1);
    let mut row = RowDVector::from_element(n, 1.0 / n as f64);
    for _ in 0..=horizon {
        let next = &row * model.a();
        rows.push(row);
        row = next;
    }
    Ok(rows)
}

fn build_gramian(
    rows: &[RowDVector<f64>],
    leader: usize,
    eps: f64,
    horizon: usize,
) -> Result<Gramian, AccommodationError> {
    let factors: Vec<f64> = rows[..horizon].iter().map(|r| r[leader] * eps).collect();
    let s: f64 = factors.iter().map(|f| f * f).sum();
    if !(s.is_finite() && s > f64::EPSILON * eps * eps) {
        return Err(AccommodationError::SingularGramian(s));
    }
    Ok(Gramian {
        core: Matrix2::identity() * s,
        factors,
    })
}

/// One control decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSample {
    pub k: usize,
    /// Scaled-convention input.
    pub u: Vector2<f64>,
    pub centroid_hat: Vector2<f64>,
    /// `‖x̄̂ - x_f‖`
    pub error: f64,
    /// `M x(k+N)` predicted under the full open-loop sequence.
    pub predicted: Vector2<f64>,
}

/// Tuning of the accommodation loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOptions {
    pub horizon: usize,
    pub stop_tol: f64,
    pub max_steps: usize,
}

impl Default for ControllerOptions {
    fn default() -> Self {
        Self {
            horizon: 20,
            stop_tol: 1e-3,
            max_steps: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccommodationController {
    leader: usize,
    eps: f64,
    options: ControllerOptions,
    x_f: Vector2<f64>,
    gramian: Gramian,
    rows: Vec<RowDVector<f64>>,
    /// `ε Σ_{s<N} M A^s`
    drift_row: RowDVector<f64>,
    phi: DMatrix<f64>,
    pub active_from: usize,
}

impl AccommodationController {
    pub fn new(
        model: &SystemModel,
        leader: usize,
        x_f: Vector2<f64>,
        options: ControllerOptions,
    ) -> Result<Self, AccommodationError> {
        if leader >= model.n() {
            return Err(AccommodationError::IndexOutOfRange(leader));
        }
        let rows = centroid_rows(model, options.horizon)?;
        let gramian = build_gramian(&rows, leader, model.eps(), options.horizon)?;
        let drift_row = rows[..options.horizon]
            .iter()
            .fold(RowDVector::zeros(model.n()), |acc, r| acc + r)
            * model.eps();
        Ok(Self {
            leader,
            eps: model.eps(),
            options,
            x_f,
            gramian,
            rows,
            drift_row,
            phi: model.phi().clone(),
            active_from: 0,
        })
    }

    pub fn leader(&self) -> usize {
        self.leader
    }

    pub fn target(&self) -> Vector2<f64> {
        self.x_f
    }

    pub fn options(&self) -> &ControllerOptions {
        &self.options
    }

    pub fn gramian(&self) -> &Gramian {
        &self.gramian
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn project(row: &RowDVector<f64>, x: &DMatrix<f64>) -> Vector2<f64> {
        let p = row * x;
        Vector2::new(p[(0, 0)], p[(0, 1)])
    }

    /// Constraint residual `r = x_f - M A^N x̂ - ε Σ M A^s (e_{i*} δ̂ + φ)`.
    fn residual(&self, xhat: &DMatrix<f64>, fault: Option<&FaultEstimate>) -> Vector2<f64> {
        let n_h = self.options.horizon;
        let mut r = self.x_f - Self::project(&self.rows[n_h], xhat);
        r -= Self::project(&self.drift_row, &self.phi);
        if let Some(f) = fault {
            r -= f.delta * self.drift_row[f.agent];
        }
        r
    }

    /// Minimum-energy open-loop sequence `u_0 .. u_{N-1}` from `xhat`.
    pub fn sequence(
        &self,
        xhat: &DMatrix<f64>,
        fault: Option<&FaultEstimate>,
    ) -> Result<Vec<Vector2<f64>>, AccommodationError> {
        self.check_shape(xhat)?;
        let r = self.residual(xhat, fault);
        let core = self.gramian.core[(0, 0)];
        let n_h = self.options.horizon;
        Ok((0..n_h)
            .map(|tau| r * (self.gramian.factors[n_h - 1 - tau] / core))
            .collect())
    }

    fn check_shape(&self, xhat: &DMatrix<f64>) -> Result<(), AccommodationError> {
        if xhat.nrows() != self.phi.nrows() || xhat.ncols() != 2 {
            return Err(AccommodationError::ShapeMismatch(
                xhat.nrows(),
                xhat.ncols(),
                self.phi.nrows(),
            ));
        }
        Ok(())
    }

    /// First element of [`Self::sequence`], with diagnostics.
    pub fn control(
        &self,
        k: usize,
        xhat: &DMatrix<f64>,
        fault: Option<&FaultEstimate>,
    ) -> Result<ControlSample, AccommodationError> {
        let seq = self.sequence(xhat, fault)?;
        let n_h = self.options.horizon;
        let mut predicted = self.x_f - self.residual(xhat, fault);
        for (tau, u) in seq.iter().enumerate() {
            predicted += u * self.gramian.factors[n_h - 1 - tau];
        }
        let centroid_hat = crate::dynamics::centroid_of(xhat);
        Ok(ControlSample {
            k,
            u: seq[0],
            centroid_hat,
            error: (centroid_hat - self.x_f).norm(),
            predicted,
        })
    }
}

/// Free-function form of [`AccommodationController::control`].
pub fn optimal_control(
    ctrl: &AccommodationController,
    k: usize,
    xhat: &DMatrix<f64>,
    fault: Option<&FaultEstimate>,
) -> Result<ControlSample, AccommodationError> {
    ctrl.control(k, xhat, fault)
}

/// Leader filter plus controller, advanced one step at a time.
#[derive(Debug, Clone)]
pub struct AccommodationSession {
    pub ctrl: AccommodationController,
    pub estimate: LeaderEstimate,
    pub fault: Option<FaultEstimate>,
    gain: DMatrix<f64>,
    c_l: DMatrix<f64>,
    streak: usize,
    steps: usize,
}

impl AccommodationSession {
    pub fn new(
        ctrl: AccommodationController,
        estimate: LeaderEstimate,
        gain: DMatrix<f64>,
        c_l: DMatrix<f64>,
        fault: Option<FaultEstimate>,
    ) -> Self {
        Self {
            ctrl,
            estimate,
            fault,
            gain,
            c_l,
            streak: 0,
            steps: 0,
        }
    }

    /// Computes the control from the current estimate, then advances the
    /// leader filter with the measurement `y_l` taken at step `k`.
    pub fn step(
        &mut self,
        model: &SystemModel,
        k: usize,
        y_l: &DMatrix<f64>,
        leader_position: Vector2<f64>,
    ) -> Result<ControlSample, AccommodationError> {
        let corrected = self.estimate.corrected(leader_position);
        let sample = self.ctrl.control(k, &corrected, self.fault.as_ref())?;
        self.estimate = leader_filter_step(
            &self.estimate,
            model,
            &self.gain,
            &self.c_l,
            y_l,
            sample.u,
            self.fault.as_ref(),
        );
        self.steps += 1;
        if sample.error < self.ctrl.options.stop_tol {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        Ok(sample)
    }

    pub fn settled(&self) -> bool {
        self.streak >= SETTLE_STEPS
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Simulator-convention input for a scaled control.
    pub fn physical(&self, u: Vector2<f64>) -> LeaderInput {
        LeaderInput::from_scaled(self.ctrl.leader, u, self.ctrl.eps)
    }
}

/// What the controlled system exposes to the leader.
pub trait Plant {
    fn k(&self) -> usize;
    /// Leader's stacked relative measurements (`m_l × 2`).
    fn leader_measurement(&self) -> DMatrix<f64>;
    fn leader_position(&self) -> Vector2<f64>;
    fn advance(&mut self, input: LeaderInput);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccommodationOutcome {
    Converged { steps: usize },
    NonConvergence { steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccommodationTrace {
    pub samples: Vec<ControlSample>,
    pub outcome: AccommodationOutcome,
}

/// Receding-horizon loop: stops after [`SETTLE_STEPS`] consecutive steps
/// within `stop_tol`, or after `max_steps`.
pub fn accommodate_loop<P: Plant>(
    session: &mut AccommodationSession,
    model: &SystemModel,
    plant: &mut P,
) -> Result<AccommodationTrace, AccommodationError> {
    let mut samples = Vec::new();
    let max_steps = session.ctrl.options.max_steps;
    while samples.len() < max_steps {
        let y = plant.leader_measurement();
        let sample = session.step(model, plant.k(), &y, plant.leader_position())?;
        plant.advance(session.physical(sample.u));
        samples.push(sample);
        if session.settled() {
            let steps = samples.len();
            return Ok(AccommodationTrace {
                samples,
                outcome: AccommodationOutcome::Converged { steps },
            });
        }
    }
    let steps = samples.len();
    Ok(AccommodationTrace {
        samples,
        outcome: AccommodationOutcome::NonConvergence { steps },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::build_model;
    use crate::graph::Graph;

    fn model() -> SystemModel {
        let g = Graph::new(4, &[(1, 2), (2, 3), (3, 4), (4, 1)]).unwrap();
        build_model(g, 0.2, None).unwrap()
    }

    #[test]
    fn core_closed_form() {
        let m = model();
        for n_h in [1, 5, 20] {
            let g = gramian(&m, 2, n_h).unwrap();
            let expect = n_h as f64 * 0.04 / 16.0;
            assert!((g.core - Matrix2::identity() * expect).norm() < 1e-15);
            assert!(g.factors.iter().all(|f| (f - 0.05).abs() < 1e-15));
        }
        assert_eq!(gramian(&m, 0, 0), Err(AccommodationError::InvalidHorizon));
    }

    #[test]
    fn zero_residual_zero_input() {
        let m = model();
        let xf = Vector2::new(1.0, 2.0);
        let ctrl = AccommodationController::new(&m, 0, xf, ControllerOptions::default()).unwrap();
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 2.0, 3.0, 1.0, 2.0, 1.0, 2.0]);
        let s = ctrl.control(0, &x, None).unwrap();
        assert!(s.u.norm() < 1e-12);
    }

    #[test]
    fn holding_against_fault_cancels_it() {
        let m = model();
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 2.0, 3.0, 1.0, 2.0, 1.0, 2.0]);
        let xf = crate::dynamics::centroid_of(&x);
        let ctrl = AccommodationController::new(&m, 0, xf, ControllerOptions::default()).unwrap();
        let fault = FaultEstimate {
            agent: 3,
            delta: Vector2::new(2.0, 1.0),
        };
        let seq = ctrl.sequence(&x, Some(&fault)).unwrap();
        for u in seq {
            assert!((u + Vector2::new(2.0, 1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn correction_removes_translation() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 2.0, 0.0, 1.0, 3.0]);
        let mut shifted = x.clone();
        for mut r in shifted.row_iter_mut() {
            r[0] += 4.0;
            r[1] -= 1.5;
        }
        let est = LeaderEstimate::new(1, shifted);
        let c = estimate_centroid(&est, Vector2::new(2.0, 0.0));
        assert!((c - Vector2::new(1.0, 1.0)).norm() < 1e-15);
        assert_eq!(est.corrected(Vector2::new(2.0, 0.0))[(1, 0)], 2.0);
    }

    #[test]
    fn exact_leader_filter_tracks() {
        let m = model();
        let c = m.measurement_matrix(0);
        let gain = DMatrix::zeros(4, c.nrows());
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 2.0, 3.0, 1.0, 2.0, 1.0, 2.0]);
        let est = LeaderEstimate::new(0, x.clone());
        let y = &c * &x;
        let next = leader_filter_step(&est, &m, &gain, &c, &y, Vector2::zeros(), None);
        assert!((next.xhat - m.a() * x).norm() < 1e-15);
    }
}
