//! Risk stratification, Kaplan-Meier curves and the two-group log-rank test.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{Cohort, Outcome};
use crate::error::{Error, Result};
use crate::train::Prediction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskGroup {
    Low,
    High,
}

impl RiskGroup {
    pub fn label(self) -> &'static str {
        match self {
            RiskGroup::Low => "low",
            RiskGroup::High => "high",
        }
    }
}

/// Probability of response at or above `cutoff` is low risk.
pub fn stratify(probabilities: &[f64], cutoff: f64) -> Vec<RiskGroup> {
    probabilities
        .iter()
        .map(|&p| {
            if p >= cutoff {
                RiskGroup::Low
            } else {
                RiskGroup::High
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSample {
    pub duration: f64,
    pub event: bool,
    pub group: RiskGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmPoint {
    pub time: f64,
    pub survival: f64,
    pub at_risk: usize,
    pub events: usize,
}

/// Product-limit estimate, one point per distinct event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub points: Vec<KmPoint>,
}

impl KmCurve {
    pub fn survival_at(&self, t: f64) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.time <= t)
            .last()
            .map_or(1.0, |p| p.survival)
    }
}

fn check_durations(samples: &[(f64, bool)]) -> Result<()> {
    match samples.iter().find(|(d, _)| !(*d >= 0.0 && d.is_finite())) {
        Some((d, _)) => Err(Error::Data(format!("duration {d} must be finite and >= 0"))),
        None => Ok(()),
    }
}

/// `(time, at_risk, events)` at each distinct time, sorted. Subjects
/// censored at a time still count as at risk there.
fn risk_table(samples: &[(f64, bool)]) -> Vec<(f64, usize, usize, usize)> {
    let mut sorted: Vec<(f64, bool)> = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        let at_risk = sorted.len() - i;
        let mut events = 0;
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == t {
            events += sorted[j].1 as usize;
            j += 1;
        }
        out.push((t, at_risk, events, j - i));
        i = j;
    }
    out
}

pub fn km_curve(samples: &[(f64, bool)]) -> Result<KmCurve> {
    if samples.is_empty() {
        return Err(Error::Data("Kaplan-Meier needs at least one sample".into()));
    }
    check_durations(samples)?;
    let mut s = 1.0;
    let mut points = Vec::new();
    for (time, at_risk, events, _) in risk_table(samples) {
        if events > 0 {
            s *= (at_risk - events) as f64 / at_risk as f64;
            points.push(KmPoint {
                time,
                survival: s,
                at_risk,
                events,
            });
        }
    }
    Ok(KmCurve { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRank {
    pub statistic: f64,
    pub p_value: f64,
    pub observed_a: usize,
    pub expected_a: f64,
    pub variance: f64,
}

/// Two-group log-rank test with hypergeometric variance.
pub fn logrank_test(a: &[(f64, bool)], b: &[(f64, bool)]) -> Result<LogRank> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Grouping(format!(
            "log-rank needs two non-empty groups, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_durations(a)?;
    check_durations(b)?;
    let mut all: Vec<(f64, bool, bool)> = a
        .iter()
        .map(|&(t, e)| (t, e, true))
        .chain(b.iter().map(|&(t, e)| (t, e, false)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (mut n_a, mut n_b) = (a.len(), b.len());
    // O_a - E_a accumulated as (d_a n_b - d_b n_a) / n so swapping groups
    // negates every term exactly
    let mut u = 0.0;
    let mut var = 0.0;
    let mut expected_a = 0.0;
    let mut observed_a = 0;
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        let (mut d_a, mut d_b, mut c_a, mut c_b) = (0usize, 0usize, 0usize, 0usize);
        while i < all.len() && all[i].0 == t {
            match (all[i].1, all[i].2) {
                (true, true) => d_a += 1,
                (true, false) => d_b += 1,
                (false, true) => c_a += 1,
                (false, false) => c_b += 1,
            }
            i += 1;
        }
        let d = d_a + d_b;
        if d > 0 {
            let n = (n_a + n_b) as f64;
            u += (d_a as f64 * n_b as f64 - d_b as f64 * n_a as f64) / n;
            expected_a += d as f64 * n_a as f64 / n;
            observed_a += d_a;
            if n > 1.0 {
                var += d as f64 * (n_a as f64 * n_b as f64) * (n - d as f64) / (n * n * (n - 1.0));
            }
        }
        n_a -= d_a + c_a;
        n_b -= d_b + c_b;
    }
    let total_events = a.iter().chain(b).filter(|s| s.1).count();
    if total_events == 0 {
        return Err(Error::UndefinedTest(
            "log-rank needs at least one event".into(),
        ));
    }
    if var <= 0.0 {
        return Err(Error::UndefinedTest("log-rank variance is zero".into()));
    }
    let statistic = u * u / var;
    Ok(LogRank {
        statistic,
        p_value: chi2_sf_1df(statistic),
        observed_a,
        expected_a,
        variance: var,
    })
}

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi2_sf_1df(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5, x / 2.0).clamp(0.0, 1.0)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = C[0];
    for (k, c) in C.iter().enumerate().skip(1) {
        sum += c / (x + k as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 1000;

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    // modified Lentz
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized upper incomplete gamma function Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Pfs,
    Os,
}

impl Endpoint {
    pub const ALL: [Endpoint; 2] = [Endpoint::Pfs, Endpoint::Os];

    pub fn label(self) -> &'static str {
        match self {
            Endpoint::Pfs => "pfs",
            Endpoint::Os => "os",
        }
    }
}

/// Risk score per subject: the predicted response probability at the
/// subject's earliest predicted assessment.
pub fn subject_risk(predictions: &[Prediction]) -> BTreeMap<String, f64> {
    let mut first: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for p in predictions {
        first
            .entry(p.subject_id.clone())
            .and_modify(|e| {
                if p.assessment_t < e.0 {
                    *e = (p.assessment_t, p.proba);
                }
            })
            .or_insert((p.assessment_t, p.proba));
    }
    first.into_iter().map(|(k, (_, p))| (k, p)).collect()
}

/// Samples for one endpoint for every subject that has both a risk score
/// and that outcome.
pub fn endpoint_samples(
    cohort: &Cohort,
    risk: &BTreeMap<String, f64>,
    cutoff: f64,
    endpoint: Endpoint,
) -> Vec<SurvivalSample> {
    cohort
        .subjects
        .iter()
        .filter_map(|s| {
            let p = *risk.get(&s.id)?;
            let outcome: Outcome = match endpoint {
                Endpoint::Pfs => s.pfs?,
                Endpoint::Os => s.os?,
            };
            Some(SurvivalSample {
                duration: outcome.time,
                event: outcome.event,
                group: stratify(&[p], cutoff)[0],
            })
        })
        .collect()
}

fn split_groups(samples: &[SurvivalSample]) -> (Vec<(f64, bool)>, Vec<(f64, bool)>) {
    let pick = |g| {
        samples
            .iter()
            .filter(|s| s.group == g)
            .map(|s| (s.duration, s.event))
            .collect()
    };
    (pick(RiskGroup::Low), pick(RiskGroup::High))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    pub endpoint: Endpoint,
    pub n_low: usize,
    pub n_high: usize,
    pub curves: BTreeMap<RiskGroup, KmCurve>,
    pub logrank: Option<LogRank>,
    pub error: Option<String>,
}

pub fn endpoint_report(samples: &[SurvivalSample], endpoint: Endpoint) -> Result<EndpointReport> {
    let (low, high) = split_groups(samples);
    let mut curves = BTreeMap::new();
    for (g, s) in [(RiskGroup::Low, &low), (RiskGroup::High, &high)] {
        if !s.is_empty() {
            curves.insert(g, km_curve(s)?);
        }
    }
    let (logrank, error) = match logrank_test(&low, &high) {
        Ok(l) => (Some(l), None),
        Err(e @ (Error::Grouping(_) | Error::UndefinedTest(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(EndpointReport {
        endpoint,
        n_low: low.len(),
        n_high: high.len(),
        curves,
        logrank,
        error,
    })
}

/// Kaplan-Meier points as CSV with a leading `(0, 1)` row per group.
pub fn km_csv(
    curves: &BTreeMap<RiskGroup, KmCurve>,
    group_sizes: &BTreeMap<RiskGroup, usize>,
) -> String {
    let mut out = String::from("time,survival,at_risk,events,group\n");
    for (g, c) in curves {
        let n = group_sizes.get(g).copied().unwrap_or(0);
        let _ = writeln!(out, "0,1,{n},0,{}", g.label());
        for p in &c.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.time,
                p.survival,
                p.at_risk,
                p.events,
                g.label()
            );
        }
    }
    out
}

/// Step plot of the curves, with the log-rank p-value in the title.
pub fn km_svg(title: &str, curves: &BTreeMap<RiskGroup, KmCurve>, p_value: Option<f64>) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let t_max = curves
        .values()
        .flat_map(|c| c.points.iter().map(|p| p.time))
        .fold(1.0, f64::max);
    let x = |t: f64| m + (w - 2.0 * m) * t / t_max;
    let y = |s: f64| h - m - (h - 2.0 * m) * s;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let p_text = p_value.map_or("n/a".to_string(), |p| format!("{p:.3e}"));
    let _ = writeln!(
        svg,
        "<text x=\"{m}\" y=\"25\">{title} (log-rank p = {p_text})</text>"
    );
    let _ = writeln!(
        svg,
        "<path d=\"M{m},{} V{} H{}\" fill=\"none\" stroke=\"black\"/>",
        m,
        h - m,
        w - m
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\">{t_max:.0}</text>",
        w - m - 20.0,
        h - m + 18.0
    );
    let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\">1.0</text>", m - 30.0, m + 4.0);
    for (g, c) in curves {
        let colour = match g {
            RiskGroup::Low => "#1f77b4",
            RiskGroup::High => "#d62728",
        };
        let mut d = format!("M{:.2},{:.2}", x(0.0), y(1.0));
        for p in &c.points {
            let _ = write!(d, " H{:.2} V{:.2}", x(p.time), y(p.survival));
        }
        let _ = write!(d, " H{:.2}", x(t_max));
        let _ = writeln!(
            svg,
            "<path d=\"{d}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"/>"
        );
        let ly = if *g == RiskGroup::Low { 45.0 } else { 60.0 };
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{ly}\" fill=\"{colour}\">{}-risk</text>",
            w - m - 70.0,
            g.label()
        );
    }
    svg.push_str("</svg>\n");
    svg
}
