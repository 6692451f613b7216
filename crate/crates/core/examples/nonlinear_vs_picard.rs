//! u_tt - u_xx = u^2: Monte Carlo estimates against the Picard reference field.

use wave_cascade::branching::ScanSpec;
use wave_cascade::estimator::{estimate_grid, EstimateRecord, Problem, RunPlan, RunSettings};
use wave_cascade::oracle::{compare, picard_solve, PicardSpec};
use wave_cascade::{
    BranchingLaw, Expression, GridSpec, InitialData, PowerSeries, QuadratureSpec, SpaceTimePoint,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = PowerSeries::polynomial(vec![0.0, 0.0, 1.0])?;
    let law = BranchingLaw::build_default(&series);
    let data = InitialData::new(Expression::parse("0.1*exp(-x^2)")?, Expression::parse("0")?)
        .with_bounds(0.1, 0.0)?;
    let q = QuadratureSpec::default();
    let t_star = law.t_star(&data, &ScanSpec::default())?;

    let grid = GridSpec::new(-2.0, 2.0, 401, 0.3, 61)?;
    let reference = picard_solve(&series, &data, &grid, &q, &PicardSpec::default())?;
    println!(
        "Picard: {} iterations, residual {:.1e}",
        reference.iterations, reference.residual
    );

    let points = [(0.0, 0.25), (0.5, 0.2), (-1.0, 0.1)]
        .into_iter()
        .map(|(x, t)| SpaceTimePoint::new(x, t))
        .collect::<Result<Vec<_>, _>>()?;
    let problem = Problem {
        law,
        data,
        quadrature: q,
    };
    let settings = RunSettings::new(100_000, 7)
        .with_threads(4)
        .with_horizon(t_star, false);
    let estimates = estimate_grid(&problem, &RunPlan { points, settings })?;
    let records: Vec<EstimateRecord> = estimates.iter().map(EstimateRecord::from).collect();

    for row in compare(&records, &reference.field, 4.0, 1e-3)? {
        println!(
            "({:+.2}, {:.2})  mc {:.6} +- {:.1e}  picard {:.6}  z {:+.2}  {}",
            row.x,
            row.t,
            row.mc,
            row.stderr,
            row.oracle,
            row.z,
            if row.pass { "ok" } else { "MISMATCH" }
        );
    }
    Ok(())
}
