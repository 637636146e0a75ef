//! Endpoint obstruction kernels for a few metrics, with the trivial ray
//! removed for even degree.

use killing_probe::metric::{catalog_default, perturb, PerturbationSpec};
use killing_probe::obstruction::{analyze, ObstructionSettings};

fn main() -> killing_probe::Result<()> {
    let settings = ObstructionSettings::default();
    let perturbed = perturb(&catalog_default("flat", 2)?, &PerturbationSpec::global(1e-2, 2, 3))?;
    let metrics = [
        catalog_default("flat", 2)?,
        catalog_default("sphere_cap", 2)?,
        catalog_default("liouville", 2)?,
        catalog_default("revolution", 2)?,
        perturbed,
    ];
    println!("{:<36} {:>2} {:>6} {:>10} {:>10} {:>10}", "metric", "d", "raw", "nontrivial", "gap", "noise");
    for m in &metrics {
        for d in 1..=2 {
            let r = analyze(m, d, &settings, 1)?.report;
            println!(
                "{:<36} {:>2} {:>6} {:>10} {:>10.1e} {:>10.1e}",
                m.label(),
                d,
                r.raw_kernel_dim.to_string(),
                r.nontrivial_kernel_dim.to_string(),
                r.gap_ratio,
                r.noise
            );
        }
    }
    Ok(())
}
