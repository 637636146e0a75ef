//! Nontrivial kernel dimension against perturbation amplitude.

use killing_probe::runner::{run_sweep, sweep_csv, sweep_summary, RunConfig};

fn main() -> killing_probe::Result<()> {
    let cfg = RunConfig::from_json(
        r#"{
            "metric": {"name": "flat"},
            "degrees": [1, 2],
            "seeds": [1, 2],
            "oracles": {"collocation": false, "holonomy": false},
            "sweep": {"amplitudes": [0, 1e-4, 1e-3, 1e-2], "cutoff": 2, "perturbation_seed": 5}
        }"#,
    )?;
    let reports = run_sweep(&cfg)?;
    print!("{}", sweep_summary(&reports));
    println!();
    print!("{}", sweep_csv(&reports));
    Ok(())
}
