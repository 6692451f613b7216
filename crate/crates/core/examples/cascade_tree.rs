//! Materialize one cascade and print it as an indented tree.

use std::collections::BTreeMap;

use wave_cascade::cascade::sample_tree;
use wave_cascade::rng::StreamKey;
use wave_cascade::{BranchingLaw, Caps, PowerSeries, SpaceTimePoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = PowerSeries::polynomial(vec![0.0, 0.5, 0.0, 1.0])?;
    let law = BranchingLaw::from_custom(BTreeMap::from([(0, 0.6), (1, 0.15), (3, 0.25)]), &series)?;
    let seed = std::env::args().nth(1).map_or(Ok(27), |s| s.parse())?;
    let mut rng = StreamKey::new(seed, 0, 0).stream();
    let tree = sample_tree(
        &mut rng,
        &law,
        SpaceTimePoint::new(0.0, 1.0)?,
        &Caps::default(),
    )?;

    for v in &tree.vertices {
        let indent = "  ".repeat(v.id.len());
        let kind = match v.kappa {
            Some(0) => "leaf".to_owned(),
            Some(k) => format!("{k} children"),
            None => "unexpanded".to_owned(),
        };
        println!("{indent}{:?} xi={:+.4} tau={:.4} {kind}", v.id, v.xi, v.tau);
    }
    println!(
        "{} vertices, truncated: {}",
        tree.vertices.len(),
        tree.truncated
    );
    Ok(())
}
