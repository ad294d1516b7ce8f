//! Aggregation, rater-equivalence testing and cross-validation splits.

pub mod compare;
pub mod split;
pub mod wilcoxon;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{format_value, DistanceUnit, Metric, MetricReport};

pub use compare::{all_vs_all, ComparisonCell, ComparisonMatrix};
pub use split::{
    enumerate_folds, read_manifest, stratified_split, Assignment, Quota, Role, SplitPlan,
    Subject,
};
pub use wilcoxon::{
    wilcoxon_signed_rank, Alternative, Method, PairedSamples, WilcoxonOptions, WilcoxonResult,
    ZeroMethod,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub metric: Metric,
    /// Defined values the summary is based on.
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1); 0 for a single value.
    pub std: Option<f64>,
}

/// Mean and sample standard deviation of every metric, skipping NA entries.
/// Distances are expressed in the units of the first report.
pub fn aggregate(reports: &[MetricReport]) -> Result<Vec<Summary>> {
    let first = reports
        .first()
        .ok_or_else(|| Error::invalid("nothing to aggregate"))?;
    let converted: Vec<MetricReport> = reports.iter().map(|r| r.with_units(first.units)).collect();
    Ok(Metric::ALL
        .into_iter()
        .map(|metric| {
            let vals: Vec<f64> = converted.iter().filter_map(|r| r.get(metric)).collect();
            let (mean, std) = mean_std(&vals).unzip();
            Summary {
                metric,
                n: vals.len(),
                mean,
                std,
            }
        })
        .collect())
}

pub fn mean_std(vals: &[f64]) -> Option<(f64, f64)> {
    if vals.is_empty() {
        return None;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() == 1 {
        return Some((mean, 0.0));
    }
    let ss: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum();
    Some((mean, (ss / (n - 1.0)).sqrt()))
}

/// `rater,metric,n,mean,std` rows.
pub fn write_summary_csv<W: Write>(out: W, rows: &[(String, Vec<Summary>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rater", "metric", "n", "mean", "std"])?;
    for (rater, summaries) in rows {
        for s in summaries {
            w.write_record([
                rater.clone(),
                s.metric.name().to_string(),
                s.n.to_string(),
                format_value(s.mean),
                format_value(s.std),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Which vectors the rank test compares.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingMode {
    /// One pair per metric: the two raters' mean values.
    #[default]
    MetricMeans,
    /// One pair per subject and class for a single metric.
    PerSubject(Metric),
}

/// Builds paired samples from two report sets of the same subjects.
/// Pairs with an NA on either side are dropped.
pub fn pair_reports(
    label_a: &str,
    a: &[MetricReport],
    label_b: &str,
    b: &[MetricReport],
    mode: PairingMode,
) -> Result<PairedSamples> {
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    match mode {
        PairingMode::MetricMeans => {
            let units = a.first().map(|r| r.units).unwrap_or(DistanceUnit::Mm);
            let b: Vec<MetricReport> = b.iter().map(|r| r.with_units(units)).collect();
            let (sa, sb) = (aggregate(a)?, aggregate(&b)?);
            for (x, y) in sa.iter().zip(&sb) {
                if let (Some(x), Some(y)) = (x.mean, y.mean) {
                    xa.push(x);
                    xb.push(y);
                }
            }
        }
        PairingMode::PerSubject(metric) => {
            let index: BTreeMap<(&str, _), &MetricReport> = b
                .iter()
                .map(|r| ((r.subject.as_str(), r.class), r))
                .collect();
            for r in a {
                let Some(other) = index.get(&(r.subject.as_str(), r.class)) else {
                    continue;
                };
                let other = other.with_units(r.units);
                if let (Some(x), Some(y)) = (r.get(metric), other.get(metric)) {
                    xa.push(x);
                    xb.push(y);
                }
            }
        }
    }
    if xa.is_empty() {
        return Err(Error::invalid(format!(
            "no defined value pairs between {label_a} and {label_b}"
        )));
    }
    PairedSamples::new(label_a, label_b, xa, xb)
}
