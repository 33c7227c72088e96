//! Gain, loss and entropy dissipation of a two-bump distribution in one cell.

use std::sync::Arc;

use haldane_kinetic::{
    make_maxwellian_type_kernel, CollisionOperator, DistributionField, PhaseGrid, SphereRule, StatisticsParam,
};

fn main() -> haldane_kinetic::Result<()> {
    let g = Arc::new(PhaseGrid::build(1, 1, 4.0, 10, SphereRule::Lebedev26)?);
    let s = StatisticsParam::regularized(0.5, 4.0)?;
    let ks = make_maxwellian_type_kernel(1.0, 0.1, 0.1)?;
    let data: Vec<f64> = g
        .velocities()
        .iter()
        .map(|v| {
            let a = (v[0] - 1.0).powi(2) + v[1] * v[1] + v[2] * v[2];
            let b = (v[0] + 1.0).powi(2) + v[1] * v[1] + v[2] * v[2];
            1.5 * ((-a).exp() + (-b).exp()).min(1.0)
        })
        .collect();
    let f = DistributionField::from_data(g.clone(), 0.5, data)?;
    let op = CollisionOperator::new(g.clone(), ks, s);
    println!("{} nodes, tabulated path: {}", g.num_nodes(), op.uses_lattice_path());
    let (r, bony) = op.rates_and_bony(f.cell(0));
    let q = op.operator_cell(f.cell(0));
    let total_gain: f64 = r.gain_rate.iter().zip(f.cell(0)).map(|(a, &y)| s.factor(y) * a).sum();
    let total_loss: f64 = r.loss_rate.iter().zip(f.cell(0)).map(|(l, &y)| l * y).sum();
    let w = g.velocity_weight();
    println!("integrated gain {:.6e}, loss {:.6e}", total_gain * w, total_loss * w);
    println!("entropy dissipation integrand {bony:.6e}");
    println!(
        "max |Q| raw {:.3e}; conservation correction {:.3e}",
        q.raw.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        q.projection.magnitude * w
    );
    Ok(())
}
