//! Equilibrium occupation along the v1 axis for several exclusion parameters.

use haldane_kinetic::{equilibrium_field, occupation_ratio, EquilibriumSpec, PhaseGrid, SphereRule, StatisticsParam};
use std::sync::Arc;

fn main() -> haldane_kinetic::Result<()> {
    let g = Arc::new(PhaseGrid::build(1, 1, 6.0, 16, SphereRule::Lebedev26)?);
    let spec = EquilibriumSpec::new(0.0, 1.0, [0.0; 3])?;
    let axis: Vec<usize> = (0..g.num_nodes())
        .filter(|&i| {
            let v = g.velocities()[i];
            v[0] > 0.0 && (v[1] - g.dv() / 2.0).abs() < 1e-12 && (v[2] - g.dv() / 2.0).abs() < 1e-12
        })
        .collect();
    println!("{:>8} {:>12} {:>12} {:>12} {:>12}", "v1", "alpha=0.25", "alpha=0.5", "alpha=1", "ratio a=0.5");
    let fields: Vec<_> = [0.25, 0.5, 1.0]
        .iter()
        .map(|&a| {
            let s = StatisticsParam::regularized(a, 6.0)?;
            Ok((s, equilibrium_field(&s, &spec, &g)?))
        })
        .collect::<haldane_kinetic::Result<_>>()?;
    for &i in &axis {
        let y: Vec<f64> = fields.iter().map(|(_, f)| f.cell(0)[i]).collect();
        let ratio = occupation_ratio(&fields[1].0, y[1])?;
        println!("{:8.3} {:12.6} {:12.6} {:12.6} {:12.6}", g.velocities()[i][0], y[0], y[1], y[2], ratio);
    }
    Ok(())
}
