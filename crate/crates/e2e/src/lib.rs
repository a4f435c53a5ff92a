//! Reference strip scenario and an in-process driver for the `cvimsim`
//! command line, shared by the end-to-end checks.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cvimsim::radio::{self, BaseStation};

/// Path of a file in the repository root, e.g. `configs/free_flow.conf`.
pub fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

/// Five stations every 2 km along the 10 km strip, 20 m off the road axis.
pub fn strip_stations() -> Vec<BaseStation> {
    let path = repo_path("configs/strip_stations.csv");
    let file = File::open(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    radio::parse_station_csv(file).expect("stations fixture parses")
}

/// Run `cvimsim <args>` in this process.
pub fn cli(args: &[&str]) -> Result<(), String> {
    let argv = std::iter::once("cvimsim").chain(args.iter().copied());
    if cvimsim_cli::run(argv) == ExitCode::SUCCESS {
        Ok(())
    } else {
        Err(format!("cvimsim {} failed", args.join(" ")))
    }
}

/// gen-traces, simulate and analyze for both default scenarios under
/// `root`: `<label>/{traces,results}.csv`, `<label>/summary.json` and
/// `analysis/` holding the comparison.
pub fn pipeline(root: &Path) -> Result<(), String> {
    let stations = repo_path("configs/strip_stations.csv");
    let text = |p: &Path| p.to_str().expect("UTF-8 path").to_owned();
    let mut results = Vec::new();
    for label in ["free_flow", "traffic_jam"] {
        let dir = root.join(label);
        let traces = text(&dir.join("traces.csv"));
        let config = text(&repo_path(&format!("configs/{label}.conf")));
        cli(&["gen-traces", "--config", &config, "--out", &traces])?;
        cli(&[
            "simulate",
            "--config",
            &config,
            "--traces",
            &traces,
            "--stations",
            &text(&stations),
            "--out-dir",
            &text(&dir),
        ])?;
        results.push(text(&dir.join("results.csv")));
    }
    cli(&[
        "analyze",
        &results[0],
        &results[1],
        "--out-dir",
        &text(&root.join("analysis")),
    ])
}
