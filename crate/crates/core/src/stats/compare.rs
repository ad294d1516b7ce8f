//! All-vs-all rater comparison with each rater taking a turn as ground truth.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{format_value, full_report, Metric, ReportOptions};
use crate::volume::{Label, LabelVolume};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub ground_truth: String,
    pub rater: String,
    /// One value per entry of [`ComparisonMatrix::metrics`].
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub raters: Vec<String>,
    pub class: Label,
    pub metrics: Vec<Metric>,
    /// Ordered by ground truth, then rater, both in `raters` order.
    pub cells: Vec<ComparisonCell>,
}

impl ComparisonMatrix {
    pub fn get(&self, ground_truth: &str, rater: &str, metric: Metric) -> Option<f64> {
        let k = self.metrics.iter().position(|&m| m == metric)?;
        self.cells
            .iter()
            .find(|c| c.ground_truth == ground_truth && c.rater == rater)
            .and_then(|c| c.values[k])
    }

    /// Long table: `metric,ground_truth,<rater...>`, one row per metric and
    /// ground truth. Diagonal cells are left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["metric".to_string(), "ground_truth".to_string()];
        header.extend(self.raters.iter().cloned());
        w.write_record(&header)?;
        for &m in &self.metrics {
            for g in &self.raters {
                let mut row = vec![m.name().to_string(), g.clone()];
                for r in &self.raters {
                    row.push(if r == g {
                        String::new()
                    } else {
                        format_value(self.get(g, r, m))
                    });
                }
                w.write_record(&row)?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Scores every ordered pair `(g, r)`, `g != r`, with `g` as ground truth.
pub fn all_vs_all(
    raters: &[(String, LabelVolume)],
    class: Label,
    metrics: &[Metric],
    opts: &ReportOptions,
) -> Result<ComparisonMatrix> {
    if raters.len() < 2 {
        return Err(Error::invalid("all-vs-all comparison needs at least two raters"));
    }
    let first = raters[0].1.geometry();
    for (name, v) in &raters[1..] {
        first.ensure_same(v.geometry(), &format!("rater {name}"))?;
    }
    let pairs: Vec<(usize, usize)> = (0..raters.len())
        .flat_map(|g| (0..raters.len()).filter(move |&r| r != g).map(move |r| (g, r)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(g, r)| {
            let report = full_report(&raters[r].0, &raters[r].1, &raters[g].1, class, opts)?;
            Ok(ComparisonCell {
                ground_truth: raters[g].0.clone(),
                rater: raters[r].0.clone(),
                values: metrics.iter().map(|&m| report.get(m)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonMatrix {
        raters: raters.iter().map(|(n, _)| n.clone()).collect(),
        class,
        metrics: metrics.to_vec(),
        cells,
    })
}
