//! Simple and double jump rate trails on a small square grid, with the SAW
//! counts behind them.
//!
//! cargo run --release --example trails

use particle_forge::saw::{count_saws, enumerate_remnant_saws, trail_table};
use particle_forge::Graph;

fn grid(side: usize) -> Graph {
    let id = |i: usize, j: usize| i * side + j;
    let mut edges = Vec::new();
    for i in 0..side {
        for j in 0..side {
            if i + 1 < side {
                edges.push((id(i, j), id(i + 1, j)));
            }
            if j + 1 < side {
                edges.push((id(i, j), id(i, j + 1)));
            }
        }
    }
    Graph::from_edges(side * side, &edges).unwrap()
}

fn main() -> particle_forge::Result<()> {
    let g = grid(7);
    let center = 3 * 7 + 3;
    // unit rates count walks; a hot spot at the center's right neighbor
    // shows how a single fast vertex inflates every trail through it
    let mut rates = vec![1.0; g.n()];
    rates[center + 1] = 4.0;

    let counts = count_saws(&g, center, 7)?;
    println!("SAW counts from the center: {counts:?}");
    for n in 1..=4 {
        println!("  |SAW*_{n}| = {}", enumerate_remnant_saws(&g, center, n)?.len());
    }

    let table = trail_table(&g, &rates, center, 7)?;
    println!("\n n   raw simple    theta simple   raw double    theta double");
    for n in table.ns() {
        let i = n - 2;
        println!(
            "{n:>2} {:>12.1} {:>14.4} {:>12.1} {:>14.4}",
            table.raw_simple[i], table.theta_simple[i], table.raw_double[i], table.theta_double[i]
        );
    }
    let (simple, double) = table.growth_diagnostic();
    println!("\nlargest of the last three ratios: simple {simple:?}, double {double:?}");

    let mut csv = Vec::new();
    particle_forge::saw::write_trails_csv(&[table], &mut csv)?;
    println!("\n{}", String::from_utf8_lossy(&csv).lines().take(3).collect::<Vec<_>>().join("\n"));
    Ok(())
}
