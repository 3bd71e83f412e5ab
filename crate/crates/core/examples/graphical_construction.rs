//! Poisson clocks on a cycle, the clusters they induce, and the generation
//! partition of all clock events.
//!
//! cargo run --release --example graphical_construction

use particle_forge::graphical::{sample_clocks, Mode, SpaceTime};
use particle_forge::Graph;

fn main() -> particle_forge::Result<()> {
    let g = Graph::cycle(40);
    let rates = vec![1.0; g.n()];
    let horizon = 2.0;
    let clocks = sample_clocks(&g, &rates, horizon, 5)?;
    println!("{} clock events on C_40 up to t = {horizon}", clocks.event_count());

    for mode in [Mode::OneStep, Mode::TwoStep] {
        let st = SpaceTime::new(&g, &clocks, mode)?;
        println!("\n{mode:?}");
        for t in [0.25, 0.5, 1.0, 2.0] {
            let c = st.cluster(0, t)?;
            println!("  |C(0, {t})| = {:>2}  {c:?}", c.len());
        }
        let part = st.generations();
        part.check().expect("generation partition is consistent");
        let classes = part.classes();
        let sizes: Vec<usize> = classes.values().map(Vec::len).collect();
        println!("  generation sizes: {sizes:?}");
        println!("  0 affects 5 by t = 2: {}", st.affects(0, 5, 2.0)?);
    }
    Ok(())
}
