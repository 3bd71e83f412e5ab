//! Frequency of the direct-affect tail event `E'_{δn}(v, far)` on a path
//! with unit rates, for a sweep of δ. For small δ the frequency falls off
//! geometrically in n; large δ shows the linear light cone.
//!
//! cargo run --release --example percolation_tail

use particle_forge::graphical::{direct_affect_tail, sample_clocks, ClockRealization, Direction, Mode};
use particle_forge::rng::replica_seed;
use particle_forge::Graph;

fn main() -> particle_forge::Result<()> {
    let g = Graph::path(81);
    let v = 40;
    let rates = vec![1.0; g.n()];
    let replicas = 2000;
    let ns = 1..=8;
    println!("delta  n:{}", ns.clone().map(|n| format!("{n:>9}")).collect::<String>());
    for delta in [0.05, 0.1, 0.2, 0.4, 0.8] {
        let horizon = delta * *ns.end() as f64;
        let ensemble: Vec<ClockRealization> = (0..replicas)
            .map(|r| sample_clocks(&g, &rates, horizon, replica_seed(17, r)))
            .collect::<particle_forge::Result<_>>()?;
        let mut row = format!("{delta:<6}");
        for n in ns.clone() {
            let est = direct_affect_tail(&g, &ensemble, v, delta, n, Mode::TwoStep, Direction::Outgoing)?;
            row += &format!(" {:>8.2e}", est.frequency);
        }
        println!("{row}");
    }
    Ok(())
}
