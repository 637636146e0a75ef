//! Catalog metrics: coefficients, Christoffel symbols, curvature and a
//! seeded perturbation.

use killing_probe::metric::{catalog_default, perturb, PerturbationSpec, CATALOG_NAMES};

fn main() -> killing_probe::Result<()> {
    let x = [0.2, -0.1];
    for name in CATALOG_NAMES {
        let m = catalog_default(name, 2)?;
        let g = m.eval(&x)?;
        let gamma = m.christoffel(&x)?;
        // R^0_{101} = g^{00} K det g for a diagonal metric; storage is [d][a][b][c]
        let r0101 = m.riemann(&x)?[0b0101];
        let curvature = r0101 * g[(0, 0)] / g.determinant();
        println!(
            "{name:<16} g = [{:.4}, {:.4}; {:.4}, {:.4}]  Γ^0_00 = {:+.4}  K ≈ {:+.4}",
            g[(0, 0)],
            g[(0, 1)],
            g[(1, 0)],
            g[(1, 1)],
            gamma.get(0, 0, 0),
            curvature
        );
    }

    let spec = PerturbationSpec::global(1e-2, 2, 7);
    let p = perturb(&catalog_default("flat", 2)?, &spec)?;
    println!("\n{}: g(x) = {:.6}", p.label(), p.eval(&x)?);
    println!("C² bound of the perturbation: {:.3e}", spec.c2_bound());
    Ok(())
}
