//! Initial- and boundary-value geodesic solves on the sphere cap.

use killing_probe::geodesic::{batch_connect, integrate_ivp, solve_bvp, Tolerances};
use killing_probe::metric::catalog_default;

fn main() -> killing_probe::Result<()> {
    let m = catalog_default("sphere_cap", 2)?;
    let tol = Tolerances::default();

    let seg = integrate_ivp(&m, &[0.0, 0.0], &[0.5, 0.2], 1.0, &tol)?;
    println!("IVP endpoint {:?}, relative energy drift {:.2e}", seg.end, seg.relative_drift());
    let (x, v) = seg.interpolate(0.5);
    println!("dense output at t = 0.5: x = {x:.6?}, v = {v:.6?}");

    let bvp = solve_bvp(&m, &[-0.3, 0.2], &[0.4, -0.1], &tol)?;
    println!("BVP initial velocity {:.8?}, residual {:.2e}", bvp.v_start, bvp.bvp_residual);

    let sources = vec![vec![-0.4, 0.0], vec![0.0, -0.4]];
    let targets = vec![vec![0.4, 0.1], vec![0.1, 0.4], vec![0.3, 0.3]];
    let all = batch_connect(&m, &sources, &targets, &tol)?;
    for (i, row) in all.iter().enumerate() {
        let worst = row.iter().map(|s| s.bvp_residual).fold(0.0, f64::max);
        println!("source {i}: {} geodesics, worst residual {worst:.2e}", row.len());
    }
    Ok(())
}
