//! Homogeneous solution from the d'Alembert formula, checked against a standing wave.

use wave_cascade::{Expression, InitialData, QuadratureSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // phi = cos x, psi = 2 sin x  ->  v = cos x cos t + 2 sin x sin t
    let data = InitialData::new(Expression::parse("cos(x)")?, Expression::parse("2*sin(x)")?);
    let q = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    for (x, t) in [(0.0, 0.5), (1.0, 1.0), (-2.0, 3.0), (0.3, 10.0)] {
        let v = data.homogeneous_solution(&q, x, t)?;
        let exact = x.cos() * t.cos() + 2.0 * x.sin() * t.sin();
        worst = worst.max((v - exact).abs());
        println!("v({x:+.1}, {t:>4.1}) = {v:+.15}  exact {exact:+.15}");
    }
    println!("max error {worst:.2e}");
    Ok(())
}
