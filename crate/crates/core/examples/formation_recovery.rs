//! Runs the formation preset and prints how the shape and centroid recover.
use consensus_fdi::scenario::presets;
use consensus_fdi::{run_scenario, scenario::load_scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = load_scenario(presets::preset("formation-recovery").ok_or("missing preset")?.text)?;
    let out = run_scenario(&cfg)?;
    let r = &out.report;

    println!("formation residual before the fault: {:.2e}", r.pre_fault_formation_residual);
    if let Some(d) = &r.detection {
        println!("fault on agent {} detected at k = {}", d.faulty_agent, d.k_detect);
    }
    for &(k, cx, cy, _, _) in out.traces.centroid.iter().step_by(50) {
        println!("k = {k:>4} centroid = ({cx:+.5}, {cy:+.5})");
    }
    println!(
        "final centroid ({:+.2e}, {:+.2e}), formation residual {:.2e}, {}",
        r.final_centroid[0], r.final_centroid[1], r.final_formation_residual, r.accommodation.outcome
    );
    Ok(())
}
