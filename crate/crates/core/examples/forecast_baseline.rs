// One-year forecast with 95% intervals from a ten-year window.

use mortcast::basis::SplineSettings;
use mortcast::design::{ModelKind, PenaltyConfig};
use mortcast::forecast::forecast;
use mortcast::simulate::{simulate, SimulationSpec};

pub fn run_example() -> mortcast::Result<()> {
    let sim = simulate(&SimulationSpec::default(), 5)?;
    let result = forecast(
        ModelKind::SpStfs,
        &sim.series,
        12,
        SplineSettings::default(),
        &PenaltyConfig::default(),
    )?;

    println!("month     expected   lower95   upper95");
    for i in result.horizon_start..result.months.len() {
        println!(
            "{}  {:>9.1} {:>9.1} {:>9.1}",
            result.months[i], result.expected[i], result.lower95[i], result.upper95[i]
        );
    }
    println!("intervals widen with the horizon: {}", result.intervals_widen());
    Ok(())
}

fn main() {
    run_example().expect("forecast example");
}
