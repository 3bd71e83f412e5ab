//! Exact transition probabilities of a tiny voter model against simulation,
//! and the generator limit `(E f(X_t) - f(x)) / t -> Gf(x)`.
//!
//! cargo run --release --example oracle

use particle_forge::ips::{LocalState, Voter};
use particle_forge::verify::{
    cylinder_indicators, generator_consistency, render_table, simulation_vs_oracle, CtmcOracle,
    GENERATOR_TIMES,
};
use particle_forge::Graph;

fn main() -> particle_forge::Result<()> {
    let g = Graph::complete(3);
    let voter = Voter::new(1.0)?;
    let oracle = CtmcOracle::new(&voter, &g)?;
    let x: Vec<LocalState> = [1, 0, 0].map(LocalState::Spin).to_vec();
    let i = oracle.index_of(&x).expect("state is in the domain");
    println!("{} states, generator row sum error {:.1e}", oracle.len(), oracle.row_sum_error());
    for t in [0.1, 0.5, 2.0] {
        let row = oracle.transition_row(i, t);
        let consensus0 = row[oracle.index_of(&[LocalState::Spin(0); 3]).unwrap()];
        let consensus1 = row[oracle.index_of(&[LocalState::Spin(1); 3]).unwrap()];
        println!("t = {t}: P(all 0) = {consensus0:.5}, P(all 1) = {consensus1:.5}");
    }
    println!("Chapman-Kolmogorov error: {:.1e}", oracle.chapman_kolmogorov_error(0.3, 0.4)?);

    let sim = simulation_vs_oracle(&voter, &g, None, &x, 0.5, 50_000, 1)?;
    let domain = [LocalState::Spin(0), LocalState::Spin(1)];
    let gen = generator_consistency(&voter, &g, None, &cylinder_indicators(3, &domain, 5), &x, &GENERATOR_TIMES)?;
    print!("\n{}", render_table(&[sim, gen]));
    Ok(())
}
