// Compares difference orders for the trend and seasonal penalties.

use mortcast::basis::SplineSettings;
use mortcast::design::ModelKind;
use mortcast::evaluation::penalty_order_tournament;
use mortcast::simulate::{simulate, SimulationSpec};

pub fn run_example() -> mortcast::Result<()> {
    let sim = simulate(
        &SimulationSpec {
            months: 132,
            slope: -0.002,
            sine: 0.05,
            ..SimulationSpec::default()
        },
        21,
    )?;
    let ranking = penalty_order_tournament(&sim.series, ModelKind::SpStss, 10, (1e5, 1e5), SplineSettings::default())?;
    for row in &ranking {
        println!(
            "trend order {} season order {}  rmse {:.2}  mape {:.4}%",
            row.order_trend, row.order_season, row.mean_rmse, row.mean_mape
        );
    }
    Ok(())
}

fn main() {
    run_example().expect("order example");
}
