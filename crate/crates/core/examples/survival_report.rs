//! Risk stratification from cross-validated fusion predictions: group
//! sizes, Kaplan-Meier survival at one year and log-rank p-values. Writes
//! SVG curves when given an output directory.
//!
//!     cargo run --release --example survival_report -- [out_dir]

use std::path::PathBuf;

use simta::data::{CohortConfig, CohortGenerator};
use simta::fusion::FusionConfig;
use simta::output::atomic_write;
use simta::survival::{
    endpoint_report, endpoint_samples, km_svg, subject_risk, Endpoint, RiskGroup,
};
use simta::train::{cross_validate, ModelKind, TrainConfig};

fn main() -> simta::Result<()> {
    let out_dir = std::env::args().nth(1).map(PathBuf::from);
    let cohort = CohortGenerator::new(CohortConfig::default(), 7)?.generate()?;
    let cv = cross_validate(
        &cohort,
        &TrainConfig::cohort(ModelKind::Fusion, 7),
        &FusionConfig::default(),
    )?;
    let preds: Vec<_> = cv.predictions().cloned().collect();
    let risk = subject_risk(&preds);

    for endpoint in Endpoint::ALL {
        let report = endpoint_report(&endpoint_samples(&cohort, &risk, 0.5, endpoint), endpoint)?;
        let at_year = |g| {
            report
                .curves
                .get(&g)
                .map_or(f64::NAN, |c| c.survival_at(365.0))
        };
        println!(
            "{}: low {} (S(365) {:.2}), high {} (S(365) {:.2}), p {:.2e}",
            endpoint.label(),
            report.n_low,
            at_year(RiskGroup::Low),
            report.n_high,
            at_year(RiskGroup::High),
            report.logrank.map_or(f64::NAN, |l| l.p_value)
        );
        if let Some(dir) = &out_dir {
            let svg = km_svg(
                endpoint.label(),
                &report.curves,
                report.logrank.map(|l| l.p_value),
            );
            atomic_write(
                &dir.join(format!("km_{}.svg", endpoint.label())),
                svg.as_bytes(),
            )?;
        }
    }
    Ok(())
}
