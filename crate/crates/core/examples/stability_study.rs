//! Sensitivity of the small scenario to seeded initial perturbations.

use haldane_kinetic::runner::{run_stability_study, RunConfig};

fn main() -> haldane_kinetic::Result<()> {
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/small.toml").as_ref())?;
    let r = run_stability_study(&cfg, &[1e-2, 1e-3, 1e-4])?;
    println!("seed {}", r.seed);
    for e in &r.entries {
        println!(
            "eps {:7.0e}: |df(0)| {:.4e}, sup_t |df(t)| {:.4e}, ratio {:.4}, clamped {}",
            e.epsilon, e.initial_distance, e.sup_distance, e.ratio, e.clamped_nodes
        );
    }
    println!("ratio spread {:.3}", r.spread);
    Ok(())
}
