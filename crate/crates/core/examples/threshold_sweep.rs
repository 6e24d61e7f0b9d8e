//! Detection latency as a function of the alpha threshold, in parallel.
use consensus_fdi::run_scenario;
use consensus_fdi::scenario::{load_with_overrides, presets};
use rayon::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = presets::preset("consensus-fig2").ok_or("missing preset")?.text;
    let kappas = [0.5, 1.0, 2.0, 2.2, 2.5];
    let rows: Vec<_> = kappas
        .par_iter()
        .map(|&kappa| {
            let cfg = load_with_overrides(base, &[format!("detection.kappa1={kappa}")])?;
            let out = run_scenario(&cfg)?;
            Ok::<_, consensus_fdi::ScenarioError>((kappa, out.report.detection))
        })
        .collect();

    println!("kappa1  agent  k_detect  latency");
    for row in rows {
        match row? {
            (kappa, Some(d)) => println!(
                "{kappa:>6}  {:>5}  {:>8}  {:>7}",
                d.faulty_agent,
                d.k_detect,
                d.latency.map_or("-".into(), |l| l.to_string())
            ),
            (kappa, None) => println!("{kappa:>6}  no detection"),
        }
    }
    Ok(())
}
