//! Full run of the small slab scenario: diagnostics, checkpoint and summary.

use haldane_kinetic::runner::{run_single, RunConfig};

fn main() -> haldane_kinetic::Result<()> {
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/small.toml").as_ref())?;
    let out = std::env::temp_dir().join("haldane-slab-run");
    let s = run_single(&cfg, &out, None)?;
    println!("{}: {} steps to t = {}", s.scenario, s.steps, s.t_end);
    println!("mass drift {:.2e}, energy drift {:.2e}", s.max_mass_drift, s.max_energy_drift);
    println!(
        "sup mass density {:.4} -> {:.4}, entropy dissipation {:.4e}",
        s.sup_mass_density_initial, s.sup_mass_density_final, s.bony_cumulative
    );
    println!("outputs in {}", out.display());
    Ok(())
}
