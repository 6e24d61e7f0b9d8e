//! Laplacian, step bound and hop distances for the nine-agent test graph.
use consensus_fdi::{build_model, Graph};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let edges = [(1, 5), (1, 7), (2, 4), (2, 5), (2, 9), (3, 5), (3, 9), (4, 8), (4, 9), (5, 6), (6, 8), (7, 9)];
    let g = Graph::new(9, &edges)?;
    println!("n = {}, edges = {}, max degree = {}", g.n(), g.edges().len(), g.max_degree());
    println!("degrees: {:?}", g.degrees());

    let bound = 1.0 / g.max_degree() as f64;
    for eps in [0.02, bound, 1.2 * bound] {
        let m = build_model(g.clone(), eps, None)?;
        let min_entry = m.a().iter().cloned().fold(f64::INFINITY, f64::min);
        match m.step_warning() {
            Some(w) => println!("eps = {eps:.4}: min entry {min_entry:+.4}, {w:?}"),
            None => println!("eps = {eps:.4}: row-stochastic, min entry {min_entry:+.4}"),
        }
    }

    let table = g.geodesics();
    println!("hop distances (diameter {}):", table.diameter());
    for row in table.rows() {
        let line: Vec<String> = row.iter().map(|d| d.to_string()).collect();
        println!("  {}", line.join(" "));
    }
    Ok(())
}
