//! Three-fold cross-validation of the fusion model on a generated cohort,
//! with and without the imaging branch.
//!
//!     cargo run --release --example cohort_fusion -- [subjects] [epochs]

use simta::data::{CohortConfig, CohortGenerator};
use simta::fusion::{Ablation, FusionConfig};
use simta::train::{cross_validate, ModelKind, TrainConfig};

fn main() -> simta::Result<()> {
    let mut args = std::env::args().skip(1);
    let subjects: usize = args.next().map_or(99, |s| s.parse().expect("subjects"));
    let epochs: usize = args.next().map_or(100, |s| s.parse().expect("epochs"));

    let cohort = CohortGenerator::new(
        CohortConfig {
            n_subjects: subjects,
            ..CohortConfig::default()
        },
        7,
    )?
    .generate()?;
    println!(
        "{} subjects, {} assessments",
        cohort.subjects.len(),
        cohort.n_assessments()
    );

    for ablate in [vec![], vec![Ablation::Radiomics]] {
        let cfg = TrainConfig {
            epochs,
            ablate: ablate.clone(),
            ..TrainConfig::cohort(ModelKind::Fusion, 7)
        };
        let fusion = FusionConfig {
            ablate: ablate.clone(),
            ..FusionConfig::default()
        };
        let cv = cross_validate(&cohort, &cfg, &fusion)?;
        let folds: Vec<String> = cv
            .folds
            .iter()
            .map(|f| f.auc.map_or("-".into(), |a| format!("{a:.3}")))
            .collect();
        println!(
            "ablate {ablate:?}: pooled AUC {:.3} (null SE {:.3}), folds [{}]",
            cv.pooled_auc,
            cv.null_stderr,
            folds.join(", ")
        );
    }
    Ok(())
}
