//! Loads a TOML scenario (a file path argument or the default preset), runs it
//! and writes the CSV traces and report.
use consensus_fdi::scenario::{load_scenario, presets, report_json, write_outputs};
use consensus_fdi::run_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => presets::preset("consensus-accommodation").ok_or("missing preset")?.text.to_string(),
    };
    let cfg = load_scenario(&text)?;
    let out = run_scenario(&cfg)?;
    let dir = std::env::temp_dir().join(format!("consensus-fdi-{}", cfg.name));
    for f in write_outputs(&out, &dir, true)? {
        println!("wrote {}", f.display());
    }
    println!("{}", report_json(&out.report));
    Ok(())
}
