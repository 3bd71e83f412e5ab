//! Every built-in model on a small graph: the truncated process on a window,
//! generation-ordered replay, and a JSON-lines excerpt.
//!
//! cargo run --release --example simulate_models

use particle_forge::graphical::Mode;
use particle_forge::ips::{model_clocks, run, run_by_generations, LocalState, ModelSpec};
use particle_forge::{Graph, Window};

fn main() -> particle_forge::Result<()> {
    let g = Graph::cycle(12);
    let window = Window::new(&g, &(2..10).collect::<Vec<_>>())?;
    let horizon = 3.0;
    let models = [
        (ModelSpec::Voter { k: 1.0 }, LocalState::Spin(0)),
        (ModelSpec::Contact { lambda: 1.5, k: 1.0 }, LocalState::Spin(0)),
        (ModelSpec::DiscreteSandpile { k: 1.0 }, LocalState::Grains(2)),
        (ModelSpec::DivisibleSandpile { k: 1.0, lambda: 1.0 }, LocalState::Mass(0.8)),
        (ModelSpec::Urn { alpha: 1, beta: 1, m: 1, k: 1.0 }, LocalState::Urn { white: 1, black: 1 }),
        (ModelSpec::BirthDeath { b0: 1.0, d0: 1.0, lambda: 0.5, cap: 10 }, LocalState::Grains(0)),
    ];
    for (spec, base) in models {
        let kernel = spec.build()?;
        let mut x0 = vec![base; g.n()];
        // seed a disturbance at vertex 6
        x0[6] = match base {
            LocalState::Spin(_) => LocalState::Spin(1),
            LocalState::Grains(n) => LocalState::Grains(n + 2),
            LocalState::Mass(m) => LocalState::Mass(m + 1.5),
            other => other,
        };
        let clocks = model_clocks(kernel.as_ref(), &g, horizon, 3)?;
        let chrono = run(&g, &window, kernel.as_ref(), &x0, &clocks, horizon)?;
        let by_gen = run_by_generations(&g, &window, kernel.as_ref(), &x0, &clocks, horizon, Mode::TwoStep)?;
        println!(
            "{:<18} {:>4} jumps, generation replay agrees: {}",
            kernel.name(),
            chrono.events.len(),
            chrono.final_state() == by_gen.final_state()
        );
        println!("    final: {:?}", chrono.final_state());
    }

    let voter = ModelSpec::Voter { k: 1.0 }.build()?;
    let x0: Vec<_> = (0..g.n()).map(|v| LocalState::Spin(u8::from(v < 6))).collect();
    let clocks = model_clocks(voter.as_ref(), &g, 1.0, 9)?;
    let traj = run(&g, &Window::full(&g), voter.as_ref(), &x0, &clocks, 1.0)?;
    let mut out = Vec::new();
    traj.write_jsonl(&mut out)?;
    println!("\nvoter trajectory as JSON lines:");
    for line in String::from_utf8_lossy(&out).lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
