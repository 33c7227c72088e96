//! Interrupt a run at a checkpoint, resume it, and compare with a straight run.

use haldane_kinetic::runner::{run_single, RunConfig};

fn main() -> haldane_kinetic::Result<()> {
    let mut cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/small.toml").as_ref())?;
    cfg.output.checkpoint_every = 3;
    let base = std::env::temp_dir().join("haldane-checkpoint-restart");
    let (full, part) = (base.join("full"), base.join("part"));

    run_single(&cfg, &full, None)?;
    let end = cfg.solver.t_end;
    cfg.solver.t_end = 0.2;
    run_single(&cfg, &part, None)?;
    cfg.solver.t_end = end;
    run_single(&cfg, &part, Some(&part.join("checkpoint_000003.bin")))?;

    let a = std::fs::read_to_string(full.join("diagnostics.csv"))?;
    let b = std::fs::read_to_string(part.join("diagnostics.csv"))?;
    println!("resumed diagnostics identical to the straight run: {}", a == b);
    Ok(())
}
