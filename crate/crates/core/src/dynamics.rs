//! Discrete-time consensus and formation dynamics with a single constant fault.
//!
//! Every system matrix has the Kronecker form `M ⊗ I_2`, so the state is kept
//! as an `n × 2` matrix (one row per agent, columns x and y) and only the
//! `n × n` factor `A = I - εL` is ever stored.

use nalgebra::{DMatrix, Vector2};
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("step size must be finite and positive, got {0}")]
    InvalidStep(f64),
    #[error("formation targets must be {expected}x2, got {rows}x{cols}")]
    FormationShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("formation targets contain non-finite entries")]
    NonFiniteFormation,
}

/// Raised (but not fatal) when `ε > 1 / max degree`: `A` is then no longer
/// row-stochastic and the detectability-index/geodesic equivalence is void.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTooLarge {
    pub eps: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Consensus,
    Formation,
}

/// Desired formation given as target positions in an arbitrary frame.
///
/// Only differences `x̃_i - x̃_j` matter, which keeps the relative offsets
/// antisymmetric and the formation equilibrium reachable by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationSpec {
    targets: DMatrix<f64>,
}

impl FormationSpec {
    pub fn new(targets: DMatrix<f64>) -> Result<Self, DynamicsError> {
        if targets.ncols() != 2 {
            return Err(DynamicsError::FormationShape {
                expected: targets.nrows(),
                rows: targets.nrows(),
                cols: targets.ncols(),
            });
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFiniteFormation);
        }
        Ok(Self { targets })
    }

    pub fn from_points(points: &[[f64; 2]]) -> Result<Self, DynamicsError> {
        let flat: Vec<f64> = points.iter().flat_map(|p| p.iter().copied()).collect();
        Self::new(DMatrix::from_row_slice(points.len(), 2, &flat))
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    /// Desired displacement `d_ij = x̃_i - x̃_j` (0-based).
    pub fn offset(&self, i: usize, j: usize) -> Vector2<f64> {
        Vector2::new(
            self.targets[(i, 0)] - self.targets[(j, 0)],
            self.targets[(i, 1)] - self.targets[(j, 1)],
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    graph: Graph,
    eps: f64,
    a: DMatrix<f64>,
    phi: DMatrix<f64>,
    kind: ModelKind,
    stochastic: bool,
}

/// Builds `A = I - εL` and the formation vector `φ_i = Σ_{j∈N_i} (x̃_i - x̃_j)`.
pub fn build_model(
    graph: Graph,
    eps: f64,
    formation: Option<&FormationSpec>,
) -> Result<SystemModel, DynamicsError> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(DynamicsError::InvalidStep(eps));
    }
    let n = graph.n();
    let lap = graph.laplacian();
    let a = DMatrix::identity(n, n) - lap * eps;

    let mut phi = DMatrix::zeros(n, 2);
    let kind = match formation {
        Some(spec) => {
            if spec.targets.nrows() != n {
                return Err(DynamicsError::FormationShape {
                    expected: n,
                    rows: spec.targets.nrows(),
                    cols: spec.targets.ncols(),
                });
            }
            for i in 0..n {
                let mut sum = Vector2::zeros();
                for &j in graph.neighbors(i) {
                    sum += spec.offset(i, j);
                }
                phi[(i, 0)] = sum.x;
                phi[(i, 1)] = sum.y;
            }
            ModelKind::Formation
        }
        None => ModelKind::Consensus,
    };

    let stochastic = a.iter().all(|&v| (0.0..=1.0).contains(&v));
    Ok(SystemModel {
        graph,
        eps,
        a,
        phi,
        kind,
        stochastic,
    })
}

impl SystemModel {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Reduced state matrix `I - εL`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Formation vector `φ` (`n × 2`), zero for pure consensus.
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Whether `A` is row-stochastic (entries in `[0, 1]`; row sums are 1 by
    /// construction).
    pub fn is_stochastic(&self) -> bool {
        self.stochastic
    }

    pub fn step_warning(&self) -> Option<StepTooLarge> {
        let bound = 1.0 / self.graph.max_degree() as f64;
        (self.eps > bound).then_some(StepTooLarge {
            eps: self.eps,
            bound,
        })
    }

    /// Reduced measurement matrix of `agent`: one row per neighbor (ascending),
    /// `+1` in the agent's column and `-1` in the neighbor's column.
    pub fn measurement_matrix(&self, agent: usize) -> DMatrix<f64> {
        measurement_matrix(&self.graph, agent)
    }
}

pub fn measurement_matrix(graph: &Graph, agent: usize) -> DMatrix<f64> {
    let nbrs = graph.neighbors(agent);
    let mut c = DMatrix::zeros(nbrs.len(), graph.n());
    for (r, &j) in nbrs.iter().enumerate() {
        c[(r, agent)] = 1.0;
        c[(r, j)] = -1.0;
    }
    c
}

/// Planar positions of all agents at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub positions: DMatrix<f64>,
    pub k: usize,
}

impl StateVector {
    pub fn new(positions: DMatrix<f64>) -> Self {
        Self { positions, k: 0 }
    }

    pub fn from_points(points: &[[f64; 2]]) -> Self {
        let flat: Vec<f64> = points.iter().flat_map(|p| p.iter().copied()).collect();
        Self::new(DMatrix::from_row_slice(points.len(), 2, &flat))
    }

    pub fn position(&self, agent: usize) -> Vector2<f64> {
        Vector2::new(self.positions[(agent, 0)], self.positions[(agent, 1)])
    }

    pub fn n(&self) -> usize {
        self.positions.nrows()
    }
}

/// A constant velocity fault `δ` on one agent, active for `k >= onset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultEvent {
    pub agent: usize,
    pub delta: Vector2<f64>,
    pub onset: usize,
}

impl FaultEvent {
    pub fn is_active(&self, k: usize) -> bool {
        k >= self.onset
    }
}

/// Leader velocity input in the simulator convention: added to the leader's
/// next position as is, without the `ε` factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderInput {
    pub leader: usize,
    pub u: Vector2<f64>,
}

impl LeaderInput {
    /// Converts a control computed with `B_l = ε (e_l ⊗ I_2)` into the
    /// simulator convention.
    pub fn from_scaled(leader: usize, u_scaled: Vector2<f64>, eps: f64) -> Self {
        Self {
            leader,
            u: u_scaled * eps,
        }
    }

    /// Inverse of [`LeaderInput::from_scaled`].
    pub fn scaled(&self, eps: f64) -> Vector2<f64> {
        self.u / eps
    }
}

/// One update: `x' = A x + εφ + ε e_{i*} δ^T [k >= k_d] + e_l u^T`.
pub fn step(
    model: &SystemModel,
    x: &StateVector,
    fault: Option<&FaultEvent>,
    input: Option<&LeaderInput>,
) -> StateVector {
    let eps = model.eps;
    let mut next = &model.a * &x.positions;
    if model.kind == ModelKind::Formation {
        next += &model.phi * eps;
    }
    if let Some(f) = fault.filter(|f| f.is_active(x.k)) {
        next[(f.agent, 0)] += eps * f.delta.x;
        next[(f.agent, 1)] += eps * f.delta.y;
    }
    if let Some(inp) = input {
        next[(inp.leader, 0)] += inp.u.x;
        next[(inp.leader, 1)] += inp.u.y;
    }
    StateVector {
        positions: next,
        k: x.k + 1,
    }
}

/// Stacked relative measurements `x_agent - x_j`, neighbors ascending (`m_i × 2`).
pub fn measurement(model: &SystemModel, x: &StateVector, agent: usize) -> DMatrix<f64> {
    let nbrs = model.graph.neighbors(agent);
    let mut y = DMatrix::zeros(nbrs.len(), 2);
    for (r, &j) in nbrs.iter().enumerate() {
        y[(r, 0)] = x.positions[(agent, 0)] - x.positions[(j, 0)];
        y[(r, 1)] = x.positions[(agent, 1)] - x.positions[(j, 1)];
    }
    y
}

/// Equivalent velocity fault of per-neighbor measurement biases: `δ = -Σ_j δ_{i*j}`.
pub fn faulty_measurement_bias(biases: &[Vector2<f64>]) -> Vector2<f64> {
    -biases.iter().fold(Vector2::zeros(), |acc, b| acc + b)
}

/// Mean position.
pub fn centroid(x: &StateVector) -> Vector2<f64> {
    centroid_of(&x.positions)
}

pub fn centroid_of(positions: &DMatrix<f64>) -> Vector2<f64> {
    let n = positions.nrows() as f64;
    Vector2::new(
        positions.column(0).sum() / n,
        positions.column(1).sum() / n,
    )
}

/// `‖L x - φ‖` (Frobenius): zero exactly at a formation (or consensus) equilibrium.
pub fn formation_residual(model: &SystemModel, x: &StateVector) -> f64 {
    (model.graph.laplacian() * &x.positions - &model.phi).norm()
}
