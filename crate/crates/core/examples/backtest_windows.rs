// Rolling one-year-ahead backtest on death rates.

use mortcast::basis::SplineSettings;
use mortcast::design::{ModelKind, PenaltyConfig};
use mortcast::evaluation::backtest;
use mortcast::simulate::{simulate, SimulationSpec};

pub fn run_example() -> mortcast::Result<()> {
    let spec = SimulationSpec {
        months: 180,
        population: Some(4.0e6),
        population_growth: 0.004,
        ..SimulationSpec::default()
    };
    let sim = simulate(&spec, 9)?;

    for kind in [ModelKind::Sp, ModelKind::SpStfs] {
        let report = backtest(&sim.series, kind, 10, &PenaltyConfig::default(), SplineSettings::default())?;
        println!("{kind}: {} windows on rates per 1000", report.windows.len());
        for w in &report.windows {
            println!(
                "  {}..{} -> {}  rmse {:.5}  mape {:.3}%",
                w.fit_start, w.fit_end, w.test_start, w.rmse, w.mape
            );
        }
        println!("  mean mape {:.3}%", report.mean_mape);
    }
    Ok(())
}

fn main() {
    run_example().expect("backtest example");
}
