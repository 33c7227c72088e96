//! Space-homogeneous relaxation of two counter-streaming bumps.

use std::sync::Arc;

use haldane_kinetic::{
    make_maxwellian_type_kernel, run, DiagnosticsRecord, InitialData, PhaseGrid, SolverConfig, SphereRule,
    StatisticsParam,
};

fn main() -> haldane_kinetic::Result<()> {
    let (alpha, j) = (0.5, 4.0);
    let g = Arc::new(PhaseGrid::build(1, 1, j, 10, SphereRule::Lebedev26)?);
    let s = StatisticsParam::regularized(alpha, j)?;
    let ks = make_maxwellian_type_kernel(1.0, 0.1, 0.1)?;
    let data = InitialData::from_fn(alpha, j, |_, v| {
        let a = (v[0] - 1.2).powi(2) + v[1] * v[1] + v[2] * v[2];
        let b = (v[0] + 1.2).powi(2) + v[1] * v[1] + v[2] * v[2];
        1.6 * ((-2.0 * a).exp() + (-2.0 * b).exp()).min(1.0)
    })?;
    let cfg = SolverConfig {
        dt: 0.05,
        t_end: 2.0,
        homogeneous: true,
        cadence: 5,
        ..Default::default()
    };
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    run(&data, &ks, &s, &g, &cfg, &mut [&mut records])?;
    println!("{:>6} {:>14} {:>14} {:>12} {:>12}", "t", "dissipation", "cumulative", "mass drift", "max f");
    for r in &records {
        println!(
            "{:6.2} {:14.6e} {:14.6e} {:12.3e} {:12.6}",
            r.t, r.bony_rate, r.bony_cumulative, r.mass_drift, r.max_f
        );
    }
    Ok(())
}
