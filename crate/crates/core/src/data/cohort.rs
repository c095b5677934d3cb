//! Synthetic multi-modal cohort with a planted response signal.
//!
//! Each subject carries a latent trajectory per serial modality. Lab and
//! imaging observations load on that trajectory in a few feature
//! directions; every other feature is noise. The response logit at an
//! assessment is a recency-weighted average of those directions over what
//! is visible at the cutoff, from both modalities, plus a static term. A
//! model that sees only one modality is therefore strictly less informed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Matrix, Rng};
use crate::simta::AsyncSeries;

pub const LAB: &str = "lab";
pub const IMAGING: &str = "imaging";
pub const INTERVENTION: &str = "intervention";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub t: f64,
    /// 1 = response (R), 0 = non-response.
    pub label: u8,
}

/// Time-to-event outcome, in days from the start of observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub time: f64,
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    pub static_features: Vec<f64>,
    /// Serial measurements by modality name. Absent modalities are absent keys.
    pub modalities: BTreeMap<String, AsyncSeries>,
    /// Intervention times (each a binary flag event).
    pub interventions: Vec<f64>,
    pub assessments: Vec<Assessment>,
    pub pfs: Option<Outcome>,
    pub os: Option<Outcome>,
}

impl SubjectRecord {
    /// Interventions as a one-channel series of ones, if there are any.
    pub fn intervention_series(&self) -> Option<AsyncSeries> {
        if self.interventions.is_empty() {
            return None;
        }
        AsyncSeries::new(
            Matrix::from_vec(
                self.interventions.len(),
                1,
                vec![1.0; self.interventions.len()],
            )
            .ok()?,
            self.interventions.clone(),
        )
        .ok()
    }

    /// Series for `name`, treating [`INTERVENTION`] as the flag series.
    pub fn serial(&self, name: &str) -> Option<AsyncSeries> {
        if name == INTERVENTION {
            self.intervention_series()
        } else {
            self.modalities.get(name).cloned()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub subjects: Vec<SubjectRecord>,
    /// Fold index in `0..3` for each subject, parallel to `subjects`.
    pub folds: Vec<usize>,
}

pub const N_FOLDS: usize = 3;

impl Cohort {
    pub fn new(subjects: Vec<SubjectRecord>, folds: Vec<usize>) -> Result<Self> {
        let c = Self { subjects, folds };
        c.validate()?;
        Ok(c)
    }

    /// Checks fold coverage and cohort-wide dimension consistency.
    pub fn validate(&self) -> Result<()> {
        if self.folds.len() != self.subjects.len() {
            return Err(Error::Schema(format!(
                "{} fold assignments for {} subjects",
                self.folds.len(),
                self.subjects.len()
            )));
        }
        if let Some(f) = self.folds.iter().find(|&&f| f >= N_FOLDS) {
            return Err(Error::Schema(format!("fold index {f} out of range")));
        }
        let mut static_dim = None;
        let mut dims: BTreeMap<&str, usize> = BTreeMap::new();
        let mut ids = std::collections::HashSet::new();
        for s in &self.subjects {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Schema(format!("duplicate subject id {}", s.id)));
            }
            match static_dim {
                None => static_dim = Some(s.static_features.len()),
                Some(d) if d != s.static_features.len() => {
                    return Err(Error::Schema(format!(
                        "subject {} has {} static features, expected {d}",
                        s.id,
                        s.static_features.len()
                    )))
                }
                _ => {}
            }
            for (name, series) in &s.modalities {
                let d = *dims.entry(name).or_insert(series.channels());
                if d != series.channels() {
                    return Err(Error::Schema(format!(
                        "subject {} modality {name} has {} channels, expected {d}",
                        s.id,
                        series.channels()
                    )));
                }
            }
            if s.interventions.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Schema(format!(
                    "subject {} interventions not increasing",
                    s.id
                )));
            }
            if let Some(a) = s.assessments.iter().find(|a| a.label > 1) {
                return Err(Error::Schema(format!(
                    "subject {} has label {}",
                    s.id, a.label
                )));
            }
        }
        Ok(())
    }

    pub fn static_dim(&self) -> usize {
        self.subjects.first().map_or(0, |s| s.static_features.len())
    }

    /// Channel count of each serial modality seen anywhere in the cohort.
    pub fn modality_dims(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for s in &self.subjects {
            for (k, v) in &s.modalities {
                out.entry(k.clone()).or_insert(v.channels());
            }
        }
        out
    }

    pub fn fold_members(&self, fold: usize) -> Vec<usize> {
        (0..self.subjects.len())
            .filter(|&i| self.folds[i] == fold)
            .collect()
    }

    pub fn n_assessments(&self) -> usize {
        self.subjects.iter().map(|s| s.assessments.len()).sum()
    }

    /// Copy of the cohort with assessment labels permuted across the whole
    /// cohort. Used as a no-signal control.
    pub fn with_shuffled_labels(&self, rng: &mut Rng) -> Cohort {
        let mut labels: Vec<u8> = self
            .subjects
            .iter()
            .flat_map(|s| s.assessments.iter().map(|a| a.label))
            .collect();
        rng.shuffle(&mut labels);
        let mut out = self.clone();
        let mut it = labels.into_iter();
        for s in &mut out.subjects {
            for a in &mut s.assessments {
                a.label = it.next().expect("same count");
            }
        }
        out
    }
}

/// Strength of each planted effect on the response logit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedWeights {
    pub lab: f64,
    pub imaging: f64,
    pub static_: f64,
    pub bias: f64,
}

impl Default for PlantedWeights {
    fn default() -> Self {
        Self {
            lab: 2.5,
            imaging: 2.5,
            static_: 1.0,
            bias: 0.0,
        }
    }
}

impl PlantedWeights {
    pub fn zero() -> Self {
        Self {
            lab: 0.0,
            imaging: 0.0,
            static_: 0.0,
            bias: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub n_subjects: usize,
    pub lab_dim: usize,
    pub imaging_dim: usize,
    pub static_dim: usize,
    /// Features per modality that load on the latent trajectory.
    pub signal_features: usize,
    pub window_days: (f64, f64),
    pub lab_gap_days: (f64, f64),
    pub imaging_gap_days: (f64, f64),
    pub intervention_gap_days: (f64, f64),
    pub first_assessment_days: (f64, f64),
    pub assessment_gap_days: (f64, f64),
    pub horizon_days: f64,
    pub recency_days: f64,
    /// Probability a subject has only its baseline CT.
    pub single_ct_fraction: f64,
    /// Per-feature observation noise in standardized units.
    pub noise: f64,
    pub weights: PlantedWeights,
    /// Survival hazards scale as `exp(−survival_effect · risk score)`.
    pub survival_effect: f64,
    pub pfs_median_days: f64,
    pub os_median_days: f64,
    pub censor_days: (f64, f64),
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_subjects: 99,
            lab_dim: 22,
            imaging_dim: 107,
            static_dim: 18,
            signal_features: 4,
            window_days: (180.0, 540.0),
            lab_gap_days: (5.0, 30.0),
            imaging_gap_days: (30.0, 90.0),
            intervention_gap_days: (18.0, 24.0),
            first_assessment_days: (120.0, 180.0),
            assessment_gap_days: (60.0, 90.0),
            horizon_days: 90.0,
            recency_days: 60.0,
            single_ct_fraction: 0.1,
            noise: 0.5,
            weights: PlantedWeights::default(),
            survival_effect: 0.6,
            pfs_median_days: 180.0,
            os_median_days: 420.0,
            censor_days: (360.0, 1080.0),
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 * N_FOLDS {
            return Err(Error::Config(format!(
                "need at least {} subjects for {N_FOLDS} folds, got {}",
                2 * N_FOLDS,
                self.n_subjects
            )));
        }
        if self.lab_dim == 0 || self.imaging_dim == 0 || self.static_dim == 0 {
            return Err(Error::Config("feature dimensions must be positive".into()));
        }
        let k = self.signal_features;
        if k == 0 || k > self.lab_dim || k > self.imaging_dim || k > self.static_dim {
            return Err(Error::Config(format!(
                "signal_features {k} must be in 1..=min(dims)"
            )));
        }
        for (name, (lo, hi)) in [
            ("window", self.window_days),
            ("lab gap", self.lab_gap_days),
            ("imaging gap", self.imaging_gap_days),
            ("intervention gap", self.intervention_gap_days),
            ("first assessment", self.first_assessment_days),
            ("assessment gap", self.assessment_gap_days),
            ("censoring", self.censor_days),
        ] {
            if !(lo > 0.0 && lo <= hi) {
                return Err(Error::Config(format!("{name} range ({lo}, {hi}) invalid")));
            }
        }
        if self.first_assessment_days.0 <= self.horizon_days {
            return Err(Error::Config(
                "first assessment must come after the horizon".into(),
            ));
        }
        if self.first_assessment_days.1 > self.window_days.0 {
            return Err(Error::Config(
                "first assessment must fall inside every window".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.single_ct_fraction) {
            return Err(Error::Config("single_ct_fraction must be in [0, 1]".into()));
        }
        if !(self.noise >= 0.0 && self.recency_days > 0.0 && self.horizon_days > 0.0) {
            return Err(Error::Config(
                "noise, recency and horizon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Raw-scale feature layout of one modality: per-feature location and scale
/// plus the unit loading direction of the planted signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub loading: Vec<f64>,
}

impl FeatureLayout {
    fn draw(rng: &mut Rng, dim: usize, k: usize) -> Self {
        let mean = (0..dim).map(|_| rng.uniform(-50.0, 150.0)).collect();
        let scale = (0..dim).map(|_| rng.uniform(0.5, 20.0)).collect();
        let mut loading = vec![0.0; dim];
        let mut norm = 0.0;
        for l in loading.iter_mut().take(k) {
            *l = rng.uniform(0.5, 1.0) * if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
            norm += *l * *l;
        }
        let norm = norm.sqrt();
        loading.iter_mut().for_each(|l| *l /= norm);
        Self {
            mean,
            scale,
            loading,
        }
    }

    /// Signal projection of one raw observation.
    pub fn project(&self, raw: &[f64]) -> f64 {
        raw.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .zip(&self.loading)
            .filter(|(_, &l)| l != 0.0)
            .map(|(((x, m), s), l)| (x - m) / s * l)
            .sum()
    }

    fn observe(&self, rng: &mut Rng, latent: f64, noise: f64) -> Vec<f64> {
        (0..self.mean.len())
            .map(|k| {
                let standardized = self.loading[k] * latent + noise * rng.normal();
                self.mean[k] + self.scale[k] * standardized
            })
            .collect()
    }
}

/// Generator state. Keeps the feature layouts so the planted logit can be
/// recomputed from a subject's visible data (the Bayes-optimal scorer).
#[derive(Debug, Clone)]
pub struct CohortGenerator {
    pub config: CohortConfig,
    pub seed: u64,
    pub lab: FeatureLayout,
    pub imaging: FeatureLayout,
    pub statics: FeatureLayout,
}

impl CohortGenerator {
    pub fn new(config: CohortConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::derive(seed, u64::MAX);
        let k = config.signal_features;
        let lab = FeatureLayout::draw(&mut rng, config.lab_dim, k);
        let imaging = FeatureLayout::draw(&mut rng, config.imaging_dim, k);
        let statics = FeatureLayout::draw(&mut rng, config.static_dim, k);
        Ok(Self {
            config,
            seed,
            lab,
            imaging,
            statics,
        })
    }

    /// Recency-weighted signal projection of the observations visible at `cutoff`.
    pub fn modality_signal(
        &self,
        layout: &FeatureLayout,
        series: Option<&AsyncSeries>,
        cutoff: f64,
    ) -> f64 {
        let Some(series) = series else { return 0.0 };
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &t) in series.timestamps().iter().enumerate() {
            if t > cutoff {
                break;
            }
            let w = (-(cutoff - t) / self.config.recency_days).exp();
            num += w * layout.project(series.values().row(i));
            den += w;
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// Planted response logit for an assessment at `assessment_t`.
    pub fn planted_logit(&self, subject: &SubjectRecord, assessment_t: f64) -> f64 {
        let cutoff = assessment_t - self.config.horizon_days;
        let w = &self.config.weights;
        w.bias
            + w.lab * self.modality_signal(&self.lab, subject.modalities.get(LAB), cutoff)
            + w.imaging
                * self.modality_signal(&self.imaging, subject.modalities.get(IMAGING), cutoff)
            + w.static_ * self.statics.project(&subject.static_features)
    }

    pub fn generate(&self) -> Result<Cohort> {
        let cfg = &self.config;
        let mut subjects = Vec::with_capacity(cfg.n_subjects);
        for i in 0..cfg.n_subjects {
            let mut rng = Rng::derive(self.seed, i as u64);
            subjects.push(self.subject(i, &mut rng)?);
        }
        // balanced folds: shuffled subject order, dealt round-robin
        let mut order: Vec<usize> = (0..cfg.n_subjects).collect();
        Rng::derive(self.seed, u64::MAX - 1).shuffle(&mut order);
        let mut folds = vec![0; cfg.n_subjects];
        for (rank, &idx) in order.iter().enumerate() {
            folds[idx] = rank % N_FOLDS;
        }
        Cohort::new(subjects, folds)
    }

    fn subject(&self, index: usize, rng: &mut Rng) -> Result<SubjectRecord> {
        let cfg = &self.config;
        let window = rng.uniform(cfg.window_days.0, cfg.window_days.1);

        let lab_level = rng.normal();
        let lab_slope = rng.normal();
        let img_level = rng.normal();
        let img_slope = rng.normal();
        let lab_latent = |t: f64| lab_level + lab_slope * t / 365.0;
        let img_latent = |t: f64| img_level + img_slope * t / 365.0;

        let mut lab_t = vec![rng.uniform(0.0, cfg.lab_gap_days.0)];
        while let Some(&last) = lab_t.last() {
            let next = last + rng.uniform(cfg.lab_gap_days.0, cfg.lab_gap_days.1);
            if next > window {
                break;
            }
            lab_t.push(next);
        }
        let lab_rows: Vec<Vec<f64>> = lab_t
            .iter()
            .map(|&t| self.lab.observe(rng, lab_latent(t), cfg.noise))
            .collect();

        let single_ct = rng.bernoulli(cfg.single_ct_fraction);
        let mut img_t = vec![0.0];
        if !single_ct {
            while let Some(&last) = img_t.last() {
                let next = last + rng.uniform(cfg.imaging_gap_days.0, cfg.imaging_gap_days.1);
                if next > window {
                    break;
                }
                img_t.push(next);
            }
        }
        let img_rows: Vec<Vec<f64>> = img_t
            .iter()
            .map(|&t| self.imaging.observe(rng, img_latent(t), cfg.noise))
            .collect();

        let mut interventions = vec![rng.uniform(0.0, 3.0)];
        while let Some(&last) = interventions.last() {
            let next = last + rng.uniform(cfg.intervention_gap_days.0, cfg.intervention_gap_days.1);
            if next > window {
                break;
            }
            interventions.push(next);
        }

        let static_latent: Vec<f64> = (0..cfg.static_dim).map(|_| rng.normal()).collect();
        let static_features = static_latent
            .iter()
            .enumerate()
            .map(|(k, z)| self.statics.mean[k] + self.statics.scale[k] * z)
            .collect();

        let mut modalities = BTreeMap::new();
        modalities.insert(
            LAB.to_string(),
            AsyncSeries::new(Matrix::from_rows(&lab_rows)?, lab_t)?,
        );
        modalities.insert(
            IMAGING.to_string(),
            AsyncSeries::new(Matrix::from_rows(&img_rows)?, img_t)?,
        );

        let mut subject = SubjectRecord {
            id: format!("S{index:03}"),
            static_features,
            modalities,
            interventions,
            assessments: Vec::new(),
            pfs: None,
            os: None,
        };

        let mut t = rng.uniform(cfg.first_assessment_days.0, cfg.first_assessment_days.1);
        let mut logits = Vec::new();
        while t <= window {
            let logit = self.planted_logit(&subject, t);
            let label = rng.bernoulli(sigmoid(logit)) as u8;
            subject.assessments.push(Assessment { t, label });
            logits.push(logit);
            t += rng.uniform(cfg.assessment_gap_days.0, cfg.assessment_gap_days.1);
        }

        // survival hazards follow the first assessment's planted score
        let risk = logits.first().copied().unwrap_or(0.0);
        let censor = rng.uniform(cfg.censor_days.0, cfg.censor_days.1);
        let hazard = |median: f64| 2f64.ln() / median * (-cfg.survival_effect * risk).exp();
        let draw = |rng: &mut Rng, median: f64| -(1.0 - rng.unit()).ln() / hazard(median);
        let pfs_t = draw(rng, cfg.pfs_median_days);
        let os_t = draw(rng, cfg.os_median_days).max(pfs_t);
        subject.pfs = Some(Outcome {
            time: pfs_t.min(censor),
            event: pfs_t <= censor,
        });
        subject.os = Some(Outcome {
            time: os_t.min(censor),
            event: os_t <= censor,
        });
        Ok(subject)
    }
}

/// Generates a cohort from `rng` and `config`.
pub fn gen_mia_cohort(rng: &mut Rng, config: &CohortConfig) -> Result<Cohort> {
    CohortGenerator::new(config.clone(), rng.next_u64())?.generate()
}
