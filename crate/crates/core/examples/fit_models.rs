// Fits the three model variants to one simulated series and compares their
// deviance, effective dimension and BIC.

use mortcast::basis::SplineSettings;
use mortcast::design::{build_design, ModelKind, PenaltyConfig};
use mortcast::evaluation::bic;
use mortcast::simulate::{simulate, SimulationSpec};
use mortcast::solver::fit;

pub fn run_example() -> mortcast::Result<()> {
    let sim = simulate(
        &SimulationSpec {
            curvature: -4e-6,
            ..SimulationSpec::default()
        },
        11,
    )?;
    let y = sim.series.deaths_f64();
    let penalty = PenaltyConfig::default();

    println!("{:<8} {:>10} {:>8} {:>10} {:>5}", "model", "deviance", "ed", "bic", "iter");
    for kind in ModelKind::ALL {
        let design = build_design(kind, y.len(), 0, SplineSettings::default(), &penalty, None)?;
        let result = fit(&design, &y, &design.weights())?;
        println!(
            "{:<8} {:>10.2} {:>8.2} {:>10.2} {:>5}",
            kind.to_string(),
            result.deviance,
            result.ed,
            bic(&result, y.len()),
            result.iterations
        );
    }
    Ok(())
}

fn main() {
    run_example().expect("fit example");
}
