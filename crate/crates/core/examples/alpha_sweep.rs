//! The small scenario across exclusion parameters, boson-like to fermionic.

use haldane_kinetic::runner::{alpha_sweep, RunConfig};

fn main() -> haldane_kinetic::Result<()> {
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/small.toml").as_ref())?;
    println!("{:>6} {:>10} {:>10} {:>12} {:>12} {:>12}", "alpha", "mass", "min gap", "M(T)/M(0)", "dissipation", "mass drift");
    for e in alpha_sweep(&cfg, &cfg.study.alphas)? {
        println!(
            "{:6.2} {:10.5} {:10.5} {:12.6} {:12.5e} {:12.2e}",
            e.alpha, e.initial.mass, e.min_layer_gap, e.sup_mass_density_ratio, e.bony_cumulative, e.max_mass_drift
        );
    }
    Ok(())
}
