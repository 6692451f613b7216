//! Monte Carlo estimate for u_tt - u_xx = -u against the closed form
//! 0.4 cos(x) cos(sqrt(2) t).

use std::collections::BTreeMap;

use wave_cascade::branching::ScanSpec;
use wave_cascade::estimator::{estimate_grid, Problem, RunPlan, RunSettings};
use wave_cascade::{
    BranchingLaw, Expression, InitialData, PowerSeries, QuadratureSpec, SpaceTimePoint,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = PowerSeries::polynomial(vec![0.0, -1.0])?;
    let law = BranchingLaw::from_custom(BTreeMap::from([(0, 0.5), (1, 0.5)]), &series)?;
    let data = InitialData::new(Expression::parse("0.4*cos(x)")?, Expression::parse("0")?)
        .with_bounds(0.4, 0.0)?;
    let t_star = law.t_star(&data, &ScanSpec::default())?;
    let problem = Problem {
        law,
        data,
        quadrature: QuadratureSpec::default(),
    };

    let points = [(0.0, 0.25), (0.0, 0.5), (1.0, 0.75), (-0.5, 0.9)]
        .into_iter()
        .map(|(x, t)| SpaceTimePoint::new(x, t))
        .collect::<Result<Vec<_>, _>>()?;
    let settings = RunSettings::new(100_000, 2024)
        .with_threads(std::thread::available_parallelism().map_or(1, |n| n.get()))
        .with_horizon(t_star, false);
    let estimates = estimate_grid(&problem, &RunPlan { points, settings })?;

    println!("T* = {t_star}");
    println!(
        "{:>5} {:>5} {:>10} {:>9} {:>10} {:>6}",
        "x", "t", "mean", "stderr", "exact", "z"
    );
    for e in estimates {
        let (x, t) = (e.point.x, e.point.t);
        let exact = 0.4 * x.cos() * (2f64.sqrt() * t).cos();
        println!(
            "{x:>5.2} {t:>5.2} {:>10.6} {:>9.2e} {exact:>10.6} {:>6.2}",
            e.mean,
            e.stderr,
            (e.mean - exact) / e.stderr
        );
    }
    Ok(())
}
