//! Parse and evaluate initial-data expressions.
//!
//! ```text
//! cargo run --example parse_expression -- "0.1*exp(-x^2)" 0.5
//! ```

use wave_cascade::Expression;

fn main() {
    let mut args = std::env::args().skip(1);
    let source = args
        .next()
        .unwrap_or_else(|| "sin(x)^2 + cos(x)^2".to_owned());
    let x: f64 = args
        .next()
        .map_or(0.7, |s| s.parse().expect("x must be a number"));

    match Expression::parse(&source) {
        Ok(e) => {
            println!("parsed:   {e}");
            println!("constant: {}", e.is_constant());
            match e.evaluate(x) {
                Ok(v) => println!("f({x}) = {v}"),
                Err(err) => println!("f({x}) fails: {err}"),
            }
        }
        Err(err) => {
            eprintln!("{err}");
            std::process::exit(2);
        }
    }
}
