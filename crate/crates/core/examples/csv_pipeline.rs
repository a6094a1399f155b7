// The command-line pipeline driven from code: simulate files, then run
// forecast and excess over them.

use std::path::Path;

use mortcast::cli::{run, CliError};

pub fn run_in(dir: &Path) -> Result<(), CliError> {
    let data = dir.join("data");
    let data = data.to_str().expect("UTF-8 path");
    let out = dir.join("out");
    let out = out.to_str().expect("UTF-8 path");
    run([
        "mortcast", "simulate", "--out", data, "--seed", "8", "--months", "150", "--population", "2500000",
        "--shock-start", "2020-03",
    ])?;
    let deaths = format!("{data}/deaths.csv");
    let population = format!("{data}/population.csv");
    for cmd in ["forecast", "excess"] {
        let written = run([
            "mortcast", cmd, "--deaths", &deaths, "--population", &population, "--model", "stfs", "--out", out,
        ])?;
        for path in written {
            println!("{cmd}: wrote {}", path.display());
        }
    }
    let periods = std::fs::read_to_string(dir.join("out/excess_periods_SIM.csv")).expect("periods file");
    print!("{periods}");
    Ok(())
}

pub fn run_example() -> Result<(), CliError> {
    let dir = std::env::temp_dir().join(format!("mortcast-pipeline-{}", std::process::id()));
    let result = run_in(&dir);
    let _ = std::fs::remove_dir_all(&dir);
    result
}

fn main() {
    run_example().expect("pipeline example");
}
