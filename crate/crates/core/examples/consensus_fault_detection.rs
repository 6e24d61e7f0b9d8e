//! Drives the filter bank by hand: consensus run, velocity fault on agent 7,
//! debounced detection on agent 5.
use consensus_fdi::{
    build_model, measurement, step, Detector, DetectorConfig, FaultEvent, FilterBank, Graph, KbarPolicy,
    StateVector,
};
use consensus_fdi::fif::Verdict;
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let edges = [(1, 5), (1, 7), (2, 4), (2, 5), (2, 9), (3, 5), (3, 9), (4, 8), (4, 9), (5, 6), (6, 8), (7, 9)];
    let model = build_model(Graph::new(9, &edges)?, 0.02, None)?;
    let observer = 4;
    let fault = FaultEvent {
        agent: 6,
        delta: Vector2::new(2.0, 1.0),
        onset: 8,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points: Vec<[f64; 2]> = (0..9)
        .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
        .collect();
    let mut x = StateVector::from_points(&points);

    let mut bank = FilterBank::new(&model, observer, KbarPolicy::Zero)?;
    // the observer only knows relative positions; a common shift is invisible
    let shifted = x.positions.map(|v| v + 1.5);
    bank.reset_estimates(&shifted);
    let mut detector = Detector::new(DetectorConfig::default(), &bank)?;

    for k in 0..300 {
        let y = measurement(&model, &x, observer);
        let samples = bank.step(k, &y, None);
        if let Verdict::Detected(r) = detector.observe(&samples) {
            if r.k_detect == k {
                println!(
                    "k = {k}: fault on agent {}, delta_hat = ({:.4}, {:.4}), onset estimate {}, rho {}",
                    r.faulty_agent + 1,
                    r.delta_hat.x,
                    r.delta_hat.y,
                    r.k_d_hat,
                    r.rho
                );
            }
        }
        if k % 50 == 0 || k == 299 {
            let alpha: Vec<String> = samples.iter().map(|s| format!("{:.3}", s.alpha_norm())).collect();
            println!("k = {k:>3} |alpha| = [{}]", alpha.join(" "));
        }
        x = step(&model, &x, Some(&fault), None);
    }
    Ok(())
}
