// Picks smoothing parameters for the smooth-season model by backtest MAPE.

use mortcast::basis::SplineSettings;
use mortcast::design::ModelKind;
use mortcast::evaluation::{grid_search, LambdaGrid};
use mortcast::simulate::{simulate, SimulationSpec};

pub fn run_example() -> mortcast::Result<()> {
    let sim = simulate(
        &SimulationSpec {
            months: 156,
            ..SimulationSpec::default()
        },
        4,
    )?;
    let grid = LambdaGrid {
        trend: vec![1e3, 1e5, 1e7],
        season: vec![1e3, 1e5, 1e7],
    };
    let result = grid_search(&sim.series, ModelKind::SpStss, 10, &grid, (2, 1), SplineSettings::default())?;
    for p in &result.points {
        println!("{:>8.0e} {:>8.0e}  mape {:.4}%", p.lambda_trend, p.lambda_season, p.mean_mape);
    }
    println!(
        "chosen: lambda_trend {:e}, lambda_season {:e}",
        result.chosen.lambda_trend, result.chosen.lambda_season
    );
    Ok(())
}

fn main() {
    run_example().expect("grid example");
}
