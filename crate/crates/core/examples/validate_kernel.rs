//! Checks the kernel hypotheses for the band and soft models.

use haldane_kinetic::{make_maxwellian_type_kernel, make_soft_kernel, validate_kernel};

fn main() -> haldane_kinetic::Result<()> {
    let gammas = [1.0, 2.0, 4.0, 8.0];
    for (name, ks) in [
        ("band", make_maxwellian_type_kernel(1.0, 0.1, 0.1)?),
        ("soft", make_soft_kernel(1.0, 1.0, 0.1, 0.1)?),
    ] {
        let cert = validate_kernel(&ks, &gammas, 20_000);
        println!("== {name}: {}", if cert.passes() { "ok" } else { "hypotheses fail" });
        print!("{}", cert.report());
    }
    Ok(())
}
