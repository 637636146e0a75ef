//! Degree-d polynomials in velocities: Veronese vectors, decisive sets and
//! the induced action of a linear change of variables.

use killing_probe::sym_poly::{condition_number, SymPolySpace};
use nalgebra::{DMatrix, DVector};

fn main() {
    let space = SymPolySpace::new(2, 3);
    let names: Vec<String> = (0..space.dim()).map(|i| space.monomial_name(i)).collect();
    println!("S^3 of R^2 has dimension {}: {}", space.dim(), names.join(" "));

    let angles = (0..space.dim()).map(|k| 0.3 + k as f64 * std::f64::consts::PI / space.dim() as f64);
    let vectors: Vec<DVector<f64>> = angles.map(|a| DVector::from_vec(vec![a.cos(), a.sin()])).collect();
    let (ok, cond) = space.is_decisive(&vectors, 1e8);
    println!("spread directions decisive: {ok} (cond {cond:.2e})");
    let clustered: Vec<DVector<f64>> = (0..space.dim()).map(|k| DVector::from_vec(vec![1.0, 1e-3 * k as f64])).collect();
    println!("clustered directions: cond {:.2e}", condition_number(&space.veronese_matrix(&clustered)));

    let p = space.element(DVector::from_fn(space.dim(), |i, _| (i + 1) as f64));
    let sigma = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let rotated = p.transform(&space.induced_map(&sigma));
    let v = [0.3, 0.7];
    let sv = sigma.transpose() * DVector::from_row_slice(&v);
    println!("p(σᵀv) = {:.12}, (Mp)(v) = {:.12}", p.eval(sv.as_slice()), rotated.eval(&v));
}
