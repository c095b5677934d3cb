//! The three LSTM input layouts on one series: values only, values with the
//! preceding interval, and values with the absolute timestamp.
//!
//!     cargo run --example lstm_baselines

use simta::lstm::{LstmParams, LstmVariant};
use simta::numerics::{Matrix, ParamSet, Rng};
use simta::simta::AsyncSeries;

fn main() -> simta::Result<()> {
    let series = AsyncSeries::new(
        Matrix::from_rows(&[[0.5], [0.1], [-0.3], [0.2]])?,
        vec![0.0, 0.7, 2.0, 2.4],
    )?;
    for variant in [
        LstmVariant::Plain,
        LstmVariant::Interval,
        LstmVariant::Stamp,
    ] {
        let lstm = LstmParams::new(&mut Rng::new(3), 1, 6, variant);
        let inputs = lstm.build_inputs(&series)?;
        let (h, _) = lstm.forward(&series)?;
        println!("{} ({} params)", variant.label(), lstm.num_params());
        for row in inputs.iter_rows() {
            println!("  input {row:?}");
        }
        println!("  last hidden {h:.4?}");
    }
    Ok(())
}
