//! Synthesizes the filter bank on agent 5 and checks the design identities.
use consensus_fdi::{build_model, FilterBank, Graph, KbarPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let edges = [(1, 5), (1, 7), (2, 4), (2, 5), (2, 9), (3, 5), (3, 9), (4, 8), (4, 9), (5, 6), (6, 8), (7, 9)];
    let model = build_model(Graph::new(9, &edges)?, 0.02, None)?;
    let observer = 4;

    for policy in [KbarPolicy::Zero, KbarPolicy::ScaledIdentityProjection(0.5)] {
        let bank = FilterBank::new(&model, observer, policy)?;
        println!("{policy:?}");
        println!("  agent rho   |d|        pi d - 1   |Sigma d|  |A K - omega pi|  radius");
        for f in bank.filters() {
            let (pd, sd, closed) = f.identity_residuals();
            println!(
                "  {:>5} {:>3}   {:.3e}  {pd:.1e}    {sd:.1e}    {closed:.1e}           {:.6}",
                f.target + 1,
                f.rho,
                f.d.norm(),
                f.spectral_radius_obs
            );
        }
    }
    Ok(())
}
