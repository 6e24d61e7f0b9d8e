//! Leader on agent 5 holds the centroid against a known fault with the
//! receding-horizon minimum-energy controller.
use consensus_fdi::accommodation::{AccommodationSession, ControllerOptions, FaultEstimate};
use consensus_fdi::{
    accommodate_loop, build_model, centroid, gramian, measurement, step, synthesize, AccommodationController,
    FaultEvent, Graph, KbarPolicy, LeaderEstimate, LeaderInput, Plant, StateVector, SystemModel,
};
use nalgebra::{DMatrix, Vector2};

struct Sim<'a> {
    model: &'a SystemModel,
    x: StateVector,
    fault: FaultEvent,
    leader: usize,
}

impl Plant for Sim<'_> {
    fn k(&self) -> usize {
        self.x.k
    }

    fn leader_measurement(&self) -> DMatrix<f64> {
        measurement(self.model, &self.x, self.leader)
    }

    fn leader_position(&self) -> Vector2<f64> {
        self.x.position(self.leader)
    }

    fn advance(&mut self, input: LeaderInput) {
        self.x = step(self.model, &self.x, Some(&self.fault), Some(&input));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let edges = [(1, 5), (1, 7), (2, 4), (2, 5), (2, 9), (3, 5), (3, 9), (4, 8), (4, 9), (5, 6), (6, 8), (7, 9)];
    let model = build_model(Graph::new(9, &edges)?, 0.02, None)?;
    let leader = 4;
    let fault = FaultEvent {
        agent: 6,
        delta: Vector2::new(2.0, 1.0),
        onset: 0,
    };
    let x0 = StateVector::from_points(&[
        [1.0, 2.0], [-3.0, 0.5], [2.5, -1.0], [0.0, 4.0], [-1.0, -2.0],
        [3.0, 3.0], [-4.0, 1.0], [1.5, -3.5], [0.5, 0.0],
    ]);
    let target = centroid(&x0);

    let opts = ControllerOptions {
        horizon: 20,
        stop_tol: 1e-6,
        max_steps: 5000,
    };
    let g = gramian(&model, leader, opts.horizon)?;
    println!("gramian core {:.3e}, eps^2 N / n^2 = {:.3e}", g.core[(0, 0)], 20.0 * 0.02f64.powi(2) / 81.0);

    let ctrl = AccommodationController::new(&model, leader, target, opts)?;
    let mut session = AccommodationSession::new(
        ctrl,
        LeaderEstimate::new(leader, DMatrix::zeros(9, 2)),
        synthesize(&model, leader, fault.agent, KbarPolicy::Zero)?.gain,
        model.measurement_matrix(leader),
        Some(FaultEstimate {
            agent: fault.agent,
            delta: fault.delta,
        }),
    );
    let mut plant = Sim {
        model: &model,
        x: x0,
        fault,
        leader,
    };
    let trace = accommodate_loop(&mut session, &model, &mut plant)?;
    for s in trace.samples.iter().step_by(100) {
        println!("k = {:>4} u = ({:+.4}, {:+.4}) centroid error {:.2e}", s.k, s.u.x, s.u.y, s.error);
    }
    let err = (centroid(&plant.x) - target).norm();
    println!("{:?}, true centroid error {err:.2e}", trace.outcome);
    Ok(())
}
