// Cubic B-splines on a monthly grid and the difference penalties used to
// smooth their coefficients.

use mortcast::basis::{make_basis, make_difference, SplineSettings};

pub fn run_example() -> mortcast::Result<()> {
    let spec = SplineSettings::default().for_domain(120);
    let basis = make_basis(&spec)?;
    println!(
        "{} months, {} segments, {} knots inside the domain, {} splines",
        spec.domain_length,
        basis.segments,
        basis.domain_knots().len(),
        basis.n_basis()
    );

    let row_sums: Vec<f64> = basis.values.row_iter().map(|r| r.sum()).collect();
    let worst = row_sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    println!("largest deviation from partition of unity: {worst:.2e}");

    for order in 1..=3 {
        let d = make_difference(order, basis.n_basis())?;
        let gram = d.gram();
        println!(
            "order {order}: D is {}x{}, penalty trace {}",
            d.values.nrows(),
            d.values.ncols(),
            gram.trace()
        );
    }
    Ok(())
}

fn main() {
    run_example().expect("basis example");
}
