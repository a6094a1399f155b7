// Baseline from pre-shock years and excess deaths over labelled periods.

use mortcast::basis::SplineSettings;
use mortcast::design::{ModelKind, PenaltyConfig};
use mortcast::excess::{excess_report, Period};
use mortcast::forecast::forecast;
use mortcast::simulate::{simulate, Shock, SimulationSpec};
use mortcast::timeseries::{window, MonthKey};

pub fn run_example() -> mortcast::Result<()> {
    let month = |y, m| MonthKey::new(y, m).expect("valid month");
    let spec = SimulationSpec {
        months: 150,
        shock: Some(Shock {
            start: month(2020, 3),
            months: 4,
            factor: 1.3,
        }),
        ..SimulationSpec::default()
    };
    let sim = simulate(&spec, 17)?;

    let train = window(&sim.series, month(2010, 3), 120)?;
    let horizon = 150 - 122;
    let baseline = forecast(
        ModelKind::SpStfs,
        &train,
        horizon,
        SplineSettings::default(),
        &PenaltyConfig::default(),
    )?;
    let after = window(&sim.series, month(2020, 3), horizon)?;
    let report = excess_report(&after, &baseline, &Period::pandemic_presets()[..2])?;

    for row in &report.periods {
        println!(
            "{:<14} excess {:>8.0}  [{:>8.0}, {:>8.0}]  {}",
            row.label, row.excess, row.excess_lower95, row.excess_upper95, row.flag
        );
    }
    Ok(())
}

fn main() {
    run_example().expect("excess example");
}
