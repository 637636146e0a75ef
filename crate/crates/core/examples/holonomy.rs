//! Killing vector counts from the holonomy of the first prolongation.

use killing_probe::metric::{catalog_default, perturb, PerturbationSpec};
use killing_probe::oracles::holonomy_kernel_dim_d1;

fn main() -> killing_probe::Result<()> {
    let perturbed = perturb(&catalog_default("flat", 2)?, &PerturbationSpec::global(1e-2, 2, 1))?;
    let metrics = [
        catalog_default("flat", 2)?,
        catalog_default("sphere_cap", 2)?,
        catalog_default("revolution", 2)?,
        catalog_default("liouville", 2)?,
        catalog_default("sphere_cap", 3)?,
        perturbed,
    ];
    for m in &metrics {
        let h = holonomy_kernel_dim_d1(m, 12, 0, 1e6)?;
        let smallest = h.analysis.singular_values.last().copied().unwrap_or(0.0);
        println!(
            "{:<36} n = {} fibre {}: dim {}  max |Hol - I| {:.2e}  smallest σ {:.2e}",
            m.label(),
            m.dim(),
            h.fibre_dim,
            h.analysis.dim,
            h.max_deviation,
            smallest
        );
    }
    Ok(())
}
