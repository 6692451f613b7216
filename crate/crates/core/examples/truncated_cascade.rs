//! Cascades cut at generation n with the reference field at the cut.
//! The mean does not depend on n; the spread shrinks as n decreases.

use wave_cascade::cascade::evaluate_truncated;
use wave_cascade::estimator::Moments;
use wave_cascade::oracle::{picard_solve, PicardSpec};
use wave_cascade::rng::StreamKey;
use wave_cascade::{
    BranchingLaw, Caps, Expression, GridSpec, InitialData, PowerSeries, QuadratureSpec,
    SpaceTimePoint,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = PowerSeries::polynomial(vec![0.0, 0.0, 1.0])?;
    let law = BranchingLaw::build_default(&series);
    let data = InitialData::new(Expression::parse("0.1*exp(-x^2)")?, Expression::parse("0")?);
    let q = QuadratureSpec::default();
    let field = picard_solve(
        &series,
        &data,
        &GridSpec::new(-2.0, 2.0, 201, 0.3, 31)?,
        &q,
        &PicardSpec::default(),
    )?
    .field;
    let root = SpaceTimePoint::new(0.0, 0.25)?;
    println!("reference u(0, 0.25) = {:.6}", field.lookup(0.0, 0.25)?);

    for n in [0, 1, 2, 3, 5] {
        let mut m = Moments::default();
        for i in 0..50_000 {
            let mut rng = StreamKey::new(1, 0, i).stream();
            let s = evaluate_truncated(
                &mut rng,
                &law,
                &data,
                &q,
                root,
                n,
                &Caps::default(),
                |x, t| field.lookup(x, t),
            )?;
            m.push(s.value);
        }
        println!(
            "n = {n}: mean {:.6} +- {:.1e}",
            m.mean(),
            (m.variance() / m.count() as f64).sqrt()
        );
    }
    Ok(())
}
