//! A full analyze run from an in-memory config, with the JSON report.

use killing_probe::runner::{report_json, run_analyze, summary_text, RunConfig};

fn main() -> killing_probe::Result<()> {
    let cfg = RunConfig::from_json(
        r#"{
            "metric": {"name": "liouville", "params": {"f": [1, 0, 1], "h": [1, 0, 0, 0, 1]}},
            "degrees": [1, 2],
            "seeds": [1, 2, 3],
            "oracles": {"x_degree": 8}
        }"#,
    )?;
    let report = run_analyze(&cfg)?;
    print!("{}", summary_text(&report));
    let json = report_json(&report);
    let d2 = &json["degrees"][1];
    println!("\nd = 2 verdict {}, first cell gap ratio {}", d2["verdict"], d2["cells"][0]["obstruction"]["gap_ratio"]);
    Ok(())
}
