mod common;

use std::sync::Arc;

use common::STANDARD;
use haldane_kinetic::quadrature::linear_fit;
use haldane_kinetic::runner::{run_in_memory, RunConfig};
use haldane_kinetic::solver::Splitting;
use haldane_kinetic::{
    l1_distance, mollify_initial, DistributionField, EquilibriumSpec, InitialData, PhaseGrid, SphereRule,
    StatisticsParam,
};

fn slab(splitting: Splitting, nx: usize, dt: f64) -> DistributionField {
    let mut cfg = RunConfig::from_toml_str(STANDARD).unwrap();
    cfg.grid.nx = nx;
    cfg.grid.j_level = 4.0;
    cfg.grid.nv = 8;
    cfg.kernel.b0 = 0.1;
    cfg.solver.dt = dt;
    cfg.solver.t_end = 0.5;
    cfg.solver.splitting = splitting;
    cfg.validate().unwrap();
    assert_eq!(cfg.grid().unwrap().dv(), 1.0);
    run_in_memory(&cfg).unwrap().1
}

fn observed_order(splitting: Splitting, nx: usize) -> (f64, f64, f64) {
    let f: Vec<DistributionField> = [8.0, 16.0, 32.0].iter().map(|n| slab(splitting, nx, 1.0 / n)).collect();
    let d1 = l1_distance(&f[0], &f[1]).unwrap();
    let d2 = l1_distance(&f[1], &f[2]).unwrap();
    let order = (d1 / d2).log2();
    eprintln!("{splitting:?} nx = {nx}: distances {d1:.4e} {d2:.4e}, order {order:.3}");
    (d1, d2, order)
}

// Transport is exact only for whole-cell shifts. Velocities are half
// integers, so the half steps of dt = 1/32 need nx = 128.
#[test]
fn strang_splitting_is_second_order() {
    let (d1, d2, order) = observed_order(Splitting::Strang, 128);
    assert!((order - 2.0).abs() <= 0.3, "distances {d1:e} {d2:e}, order {order}");
}

#[test]
fn lie_splitting_is_first_order() {
    let (d1, d2, order) = observed_order(Splitting::Lie, 64);
    assert!((order - 1.0).abs() <= 0.3, "distances {d1:e} {d2:e}, order {order}");
}

#[test]
fn mollified_equilibrium_converges_like_one_over_j() {
    // A cold Fermi sea sits above the clamp level 1/α − 1/j on the same
    // core at every level; the lattice is fixed across levels.
    let alpha = 1.0;
    let spec = EquilibriumSpec::new(2.0, 0.1, [0.0; 3]).unwrap();
    let js = [8.0, 16.0, 32.0, 64.0];
    let mut errs = Vec::new();
    for &j in &js {
        let g = Arc::new(PhaseGrid::with_lattice(1, 8, j, 24, 6.0, SphereRule::Lebedev26).unwrap());
        let s = StatisticsParam::regularized(alpha, j).unwrap();
        let exact: Vec<f64> = (0..g.num_cells())
            .flat_map(|_| g.velocities().iter().map(|v| spec.occupation(&s, v).unwrap()))
            .collect();
        let f0 = DistributionField::from_data(g.clone(), alpha, exact.clone()).unwrap();
        let data = InitialData::from_samples(alpha, j, exact).unwrap();
        let m = mollify_initial(&data, &g).unwrap();
        errs.push(l1_distance(&m, &f0).unwrap());
    }
    let x: Vec<f64> = js.iter().map(|j| j.ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (slope, _) = linear_fit(&x, &y);
    eprintln!("mollifier errors {errs:?}, slope {slope:.3}");
    assert!((slope + 1.0).abs() <= 0.3, "errors {errs:?}, slope {slope}");
}
