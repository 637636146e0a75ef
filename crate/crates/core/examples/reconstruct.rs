//! Rebuild an integral of the revolution metric from its restriction to the
//! configuration points and audit its conservation along fresh geodesics.

use killing_probe::integrals::{known_integrals, CoefficientField};
use killing_probe::metric::catalog_default;
use killing_probe::obstruction::{analyze, ObstructionSettings, ReconstructedField};
use killing_probe::oracles::conservation_residual_at;

fn main() -> killing_probe::Result<()> {
    let m = catalog_default("revolution", 2)?;
    let settings = ObstructionSettings::default();
    let run = analyze(&m, 1, &settings, 4)?;
    let vector = run.report.kernel_basis[0].clone();
    let field = ReconstructedField { vector, cfg: &run.cfg, metric: &m, settings };

    let clairaut = known_integrals(&m, 1).pop().expect("Clairaut integral");
    for x in [[0.3, 0.1], [-0.2, 0.4], [0.0, -0.5]] {
        let got = field.coefficients(&x)?.coeffs;
        let want = clairaut.coefficients(&x)?.coeffs;
        // kernel vectors are defined up to scale
        let ratio = got[1] / want[1];
        println!("x = {x:?}: reconstructed {:.6?}, Clairaut × {ratio:.6} = {:.6?}", got.as_slice(), (want * ratio).as_slice());
    }
    let drift = conservation_residual_at(&m, &field, 20, 0, 9)?;
    println!("relative drift along 20 geodesics: {drift:.2e}");
    Ok(())
}
