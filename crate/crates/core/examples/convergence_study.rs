//! Cauchy study in the truncation level on the small scenario.

use haldane_kinetic::runner::{run_convergence_study, RunConfig};

fn main() -> haldane_kinetic::Result<()> {
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/small.toml").as_ref())?;
    let r = run_convergence_study(&cfg, &cfg.study.j_levels)?;
    println!("levels {:?}", r.j_levels);
    for (t, d) in r.times.iter().zip(&r.distances) {
        println!("t = {t}: successive L1 distances {d:?}");
    }
    println!("fitted rates {:?}", r.rates);
    println!("study {}", r.status);
    Ok(())
}
