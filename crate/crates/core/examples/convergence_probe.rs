//! How often a cascade reaches beyond generation n.

use std::collections::BTreeMap;

use wave_cascade::estimator::{convergence_probe, RunSettings};
use wave_cascade::{BranchingLaw, PowerSeries, SpaceTimePoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = PowerSeries::polynomial(vec![0.0, -1.0, 0.5])?;
    let root = SpaceTimePoint::new(0.0, 0.5)?;
    let generations = [0, 1, 2, 4, 8, 16, 32];

    for p1 in [0.2, 0.4, 0.6] {
        let law = BranchingLaw::from_custom(
            BTreeMap::from([(0, 1.0 - p1 - 0.1), (1, p1), (2, 0.1)]),
            &series,
        )?;
        let rows = convergence_probe(
            &law,
            0,
            root,
            &RunSettings::new(50_000, 5).with_threads(4),
            &generations,
        )?;
        let line: Vec<String> = rows
            .iter()
            .map(|r| format!("{}:{:.1e}", r.generation, r.fraction))
            .collect();
        println!(
            "mean offspring {:.2}  {}",
            law.mean_offspring(),
            line.join("  ")
        );
    }
    Ok(())
}
