//! Killing-equation collocation in both index positions.

use killing_probe::metric::{catalog_default, perturb, PerturbationSpec};
use killing_probe::oracles::collocation_kernel_dim;
use killing_probe::sym_poly::SymPolySpace;

fn main() -> killing_probe::Result<()> {
    let perturbed = perturb(&catalog_default("flat", 2)?, &PerturbationSpec::global(1e-2, 2, 1))?;
    let cases = [
        (catalog_default("flat", 2)?, 1, 1),
        (catalog_default("flat", 2)?, 2, 2),
        (catalog_default("sphere_cap", 2)?, 2, 4),
        (catalog_default("liouville", 2)?, 2, 4),
        (catalog_default("liouville", 2)?, 2, 8),
        (perturbed, 1, 4),
    ];
    for (m, d, x_degree) in &cases {
        let c = collocation_kernel_dim(m, &SymPolySpace::new(2, *d), *x_degree, 0, 1e6)?;
        println!(
            "{:<36} d = {d} m = {x_degree}: lower {}, upper {} -> {}",
            m.label(),
            c.lower.analysis.dim,
            c.upper.analysis.dim,
            c.dim()
        );
    }
    Ok(())
}
