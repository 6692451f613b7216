//! Build a series, its default branching law and the existence horizon.

use wave_cascade::branching::ScanSpec;
use wave_cascade::{BranchingLaw, Expression, InitialData, PowerSeries};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = InitialData::new(Expression::parse("0.1*exp(-x^2)")?, Expression::parse("0")?)
        .with_bounds(0.1, 0.0)?;

    for series in [
        PowerSeries::polynomial(vec![0.0, -1.0])?,
        PowerSeries::polynomial(vec![0.0, 0.0, 1.0])?,
        PowerSeries::from_named("exp", 0.5, 6)?,
    ] {
        let law = BranchingLaw::build_default(&series);
        println!("F(u) = {series}");
        for (k, p) in law.probabilities() {
            println!("  p_{k} = {p:.6}   b_{k} = {:+.6}", law.b(*k));
        }
        println!(
            "  mean offspring {:.4}, b* = {:.4}, T* = {:.5}",
            law.mean_offspring(),
            law.b_star(),
            law.t_star(&data, &ScanSpec::default())?
        );
    }
    Ok(())
}
