#![allow(dead_code)]

use consensus_fdi::dynamics::{
    build_model, centroid, step, FaultEvent, LeaderInput, StateVector, SystemModel,
};
use consensus_fdi::graph::Graph;
use consensus_fdi::scenario::{presets, load_scenario, ScenarioConfig};
use nalgebra::{DMatrix, DVector, Vector2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STAND_IN_EDGES: [(usize, usize); 12] = [
    (1, 5),
    (1, 7),
    (2, 4),
    (2, 5),
    (2, 9),
    (3, 5),
    (3, 9),
    (4, 8),
    (4, 9),
    (5, 6),
    (6, 8),
    (7, 9),
];

pub fn stand_in() -> Graph {
    Graph::new(9, &STAND_IN_EDGES).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected graph: random spanning tree plus extra edges, 1-based.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = order[rng.random_range(0..i)];
        edges.push((order[i], parent));
    }
    let extra = rng.random_range(0..=n);
    for _ in 0..extra {
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        if a != b
            && !edges
                .iter()
                .any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
        {
            edges.push((a, b));
        }
    }
    edges
}

pub fn random_graph(rng: &mut ChaCha8Rng, n_min: usize, n_max: usize) -> Graph {
    let n = rng.random_range(n_min..=n_max);
    Graph::new(n, &random_edges(rng, n)).unwrap()
}

/// Model at `fraction / max degree`.
pub fn model_at(graph: Graph, fraction: f64) -> SystemModel {
    let eps = fraction / graph.max_degree() as f64;
    build_model(graph, eps, None).unwrap()
}

pub fn random_positions(rng: &mut ChaCha8Rng, n: usize, half: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, 2, |_, _| rng.random_range(-half..=half))
}

pub fn preset_config(name: &str) -> ScenarioConfig {
    load_scenario(presets::preset(name).unwrap().text).unwrap()
}

/// Plain triple-loop product, used as an oracle against library products.
pub fn naive_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// All-pairs shortest paths by Floyd–Warshall (0-based).
pub fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in edges {
        d[a - 1][b - 1] = 1;
        d[b - 1][a - 1] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Applies a scaled open-loop sequence from `x0` and returns the end state.
pub fn apply_open_loop(
    model: &SystemModel,
    x0: &StateVector,
    fault: Option<&FaultEvent>,
    leader: usize,
    seq: &[Vector2<f64>],
) -> StateVector {
    let mut x = x0.clone();
    for u in seq {
        let input = LeaderInput::from_scaled(leader, *u, model.eps());
        x = step(model, &x, fault, Some(&input));
    }
    x
}

/// Maps a stacked scaled sequence to the terminal centroid by impulse
/// responses of the simulator: returns `(G, c0)` with `M x(N) = G U + c0`.
pub fn impulse_map(
    model: &SystemModel,
    x0: &StateVector,
    fault: &FaultEvent,
    leader: usize,
    horizon: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let zero = vec![Vector2::zeros(); horizon];
    let c0 = centroid(&apply_open_loop(model, x0, Some(fault), leader, &zero));
    let mut g = DMatrix::zeros(2, 2 * horizon);
    for col in 0..2 * horizon {
        let mut seq = zero.clone();
        seq[col / 2][col % 2] = 1.0;
        let c = centroid(&apply_open_loop(model, x0, Some(fault), leader, &seq)) - c0;
        g[(0, col)] = c.x;
        g[(1, col)] = c.y;
    }
    (g, DVector::from_column_slice(c0.as_slice()))
}

/// Minimum-norm `U` with `G U = b` from the KKT system `[I Gᵀ; G 0]`.
pub fn kkt_solve(g: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let m = g.ncols();
    let mut kkt = DMatrix::zeros(m + 2, m + 2);
    kkt.view_mut((0, 0), (m, m)).fill_with_identity();
    kkt.view_mut((0, m), (m, 2)).copy_from(&g.transpose());
    kkt.view_mut((m, 0), (2, m)).copy_from(g);
    let mut rhs = DVector::zeros(m + 2);
    rhs.rows_mut(m, 2).copy_from(b);
    let sol = kkt.lu().solve(&rhs).expect("KKT system singular");
    sol.rows(0, m).into_owned()
}
