//! Trains SimTA and the three LSTM baselines on the trigonometric benchmark
//! and prints the final validation MSE of each.
//!
//!     cargo run --release --example synthetic_benchmark -- [count] [epochs]

use rayon::prelude::*;
use simta::data::{gen_trig_series, SynthConfig};
use simta::numerics::Rng;
use simta::train::{train_synthetic, ModelKind, TrainConfig};

fn main() -> simta::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(2000, |s| s.parse().expect("count"));
    let epochs: usize = args.next().map_or(100, |s| s.parse().expect("epochs"));

    let cfg = SynthConfig {
        count,
        ..SynthConfig::default()
    };
    let entries = gen_trig_series(&mut Rng::new(7), &cfg)?;
    let runs: Vec<_> = ModelKind::SEQUENCE
        .par_iter()
        .map(|&kind| {
            let train = TrainConfig {
                epochs,
                ..TrainConfig::synthetic(kind, 7)
            };
            train_synthetic(&entries, &train)
        })
        .collect::<simta::Result<_>>()?;
    for run in &runs {
        let log = &run.log;
        println!(
            "{:8} train {:.3}  val {:.3}",
            run.kind.label(),
            log.final_train_loss().unwrap(),
            log.final_val_loss().unwrap()
        );
    }
    Ok(())
}
