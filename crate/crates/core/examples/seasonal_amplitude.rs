// Tracks a shrinking seasonal amplitude with the smooth-season model.

use mortcast::basis::SplineSettings;
use mortcast::design::{ModelKind, PenaltyConfig};
use mortcast::forecast::{forecast, seasonal_decomposition};
use mortcast::simulate::{simulate, SimulationSpec};

pub fn run_example() -> mortcast::Result<()> {
    let spec = SimulationSpec {
        amplitude_start: 0.25,
        amplitude_end: 0.08,
        sine: 0.0,
        ..SimulationSpec::default()
    };
    let sim = simulate(&spec, 2)?;
    let result = forecast(
        ModelKind::SpStss,
        &sim.series,
        12,
        SplineSettings::default(),
        &PenaltyConfig::default().with_lambdas(1e5, 1e4),
    )?;
    let y = sim.series.deaths_f64();
    let parts = seasonal_decomposition(&result.fit, &result.design, &y)?;

    println!("year  fitted amplitude  true amplitude");
    for year in 0..10 {
        let i = year * 12 + 11;
        let truth = spec.amplitude_start + (spec.amplitude_end - spec.amplitude_start) * i as f64 / 119.0;
        println!("{:>4}  {:>16.3}  {:>14.3}", year + 1, parts.amplitude[i], truth);
    }
    Ok(())
}

fn main() {
    run_example().expect("seasonal example");
}
