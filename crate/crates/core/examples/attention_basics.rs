//! Attention scores and weights for a short irregular series, and the
//! output of a two-module stack before and after shifting every timestamp.
//!
//!     cargo run --example attention_basics

use simta::numerics::{softmax_rows, Activation, Matrix, Rng};
use simta::simta::{build_attention, AsyncSeries, SimTAStack};

fn print_matrix(name: &str, m: &Matrix) {
    println!("{name}:");
    for row in m.iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:8.4}")).collect();
        println!("  {}", cells.join(" "));
    }
}

fn main() -> simta::Result<()> {
    let tau = [1.0, 0.25, 2.0];
    let (scores, mask) = build_attention(&tau, 0.8, 0.5)?;
    print_matrix("pre-softmax scores (lambda 0.8, beta 0.5)", &scores);
    print_matrix("attention weights", &softmax_rows(&scores, &mask)?);

    let values = Matrix::from_rows(&[[0.2, 1.0], [0.4, 0.9], [0.1, 1.3], [0.8, 0.7]])?;
    let series = AsyncSeries::new(values, vec![0.0, 1.0, 1.25, 3.25])?;
    let stack = SimTAStack::new(&mut Rng::new(1), 2, &[8, 4], Activation::Tanh)?;
    let (summary, _) = stack.forward(&series)?;
    let (shifted, _) = stack.forward(&series.shifted(100.0)?)?;
    println!("summary          {summary:.4?}");
    println!("summary, shifted {shifted:.4?}");
    Ok(())
}
