//! Long-range percolation and the Boolean random graph on windows of Z,
//! compared with their analytic summability constants.
//!
//! cargo run --release --example random_graphs

use particle_forge::random_graphs::{
    delone_check, p_sum, s_sum, sample_grg, sample_lrp, zeta, Coupling, CouplingField, PointSet,
    RadiusLaw,
};

fn degree_summary(g: &particle_forge::Graph) -> (f64, usize) {
    let mean = g.vertices().map(|v| g.degree(v) as f64).sum::<f64>() / g.n() as f64;
    (mean, g.max_degree())
}

fn main() -> particle_forge::Result<()> {
    let seed = 11;
    let field = CouplingField::new(Coupling::Power { exponent: 3.0, scale: 1.0 }, 1.5, 1.0)?;
    println!("LRP with J = |i-j|^-3, beta = 1, p = 3/2");
    println!("  limit of the p-sum on Z: {:.6}", field.analytic_sum_on_z(1.5).unwrap());
    for r in [10, 100, 1000] {
        let points = PointSet::integer_lattice(1, r);
        let sum = p_sum(&field, &points);
        let g = sample_lrp(&points, &field, seed);
        let (mean, max) = degree_summary(&g);
        println!(
            "  radius {r:>5}: sup p-sum {:.6}, {} edges, mean degree {mean:.3}, max {max}",
            sum.value,
            g.edge_count()
        );
    }

    let law = RadiusLaw::Uniform { max: 3.0 };
    println!("\nBoolean model, radii Uniform[0, 3], edge iff |u-v| < min(R_u, R_v)");
    println!("  sum of |z|^-2 over Z minus the origin: {:.6}", 2.0 * zeta(2.0));
    for r in [10, 100, 1000] {
        let points = PointSet::integer_lattice(1, r);
        let g = sample_grg(&points, &law, seed);
        let (mean, max) = degree_summary(&g);
        println!(
            "  radius {r:>5}: sup s-sum {:.6}, mean degree {mean:.3}, max {max}",
            s_sum(&points, 2.0)?.value
        );
    }

    let points = PointSet::integer_lattice(2, 15);
    let report = delone_check(&points, 0.5, 1.0, 2000, seed);
    println!("\nDelone check on Z^2 ∩ [-15, 15]^2: {report:?}");
    Ok(())
}
