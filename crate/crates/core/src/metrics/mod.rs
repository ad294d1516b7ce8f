//! Segmentation scores and metrics.
//!
//! Scores live in `[0, 1]` (PCC in `[-1, 1]`), metrics in `[0, ∞)`. A value
//! whose denominator vanishes is `None` and is written as `NA`.

pub mod boundary;
pub mod distance;
pub mod lesion;
pub mod loss;
pub mod object;
pub mod voxel;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::volume::{Connectivity, Label, LabelVolume, Orientation};

pub use boundary::{boundary_f1, DEFAULT_BF_TOLERANCE};
pub use distance::{euclidean_avg, hausdorff, surface_distance};
pub use lesion::{per_lesion_metrics, LesionMetrics, LesionOptions};
pub use loss::cross_entropy_loss;
pub use object::{object_scores, ObjectCounts, ObjectScores};
pub use voxel::{
    confusion_counts, image_dice, pcc, voxel_scores, ConfusionCounts, EmptySlicePolicy,
    VoxelScores,
};

pub(crate) fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

pub(crate) fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// The twenty reported entries, in report column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Sens,
    Osens,
    Spec,
    Acc,
    Ppv,
    Oppv,
    Dice,
    ImageDice,
    Iou,
    F1,
    Bf,
    Pcc,
    Ef,
    Der,
    Oer,
    Fde,
    Rae,
    Hd,
    Ed,
    Sd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    /// In `[0, 1]`.
    Score,
    /// In `[-1, 1]`.
    Correlation,
    /// Dimensionless, in `[0, ∞)`.
    Error,
    /// Length, in `[0, ∞)`, converted by the report units.
    Distance,
}

impl Metric {
    pub const ALL: [Metric; 20] = [
        Metric::Sens,
        Metric::Osens,
        Metric::Spec,
        Metric::Acc,
        Metric::Ppv,
        Metric::Oppv,
        Metric::Dice,
        Metric::ImageDice,
        Metric::Iou,
        Metric::F1,
        Metric::Bf,
        Metric::Pcc,
        Metric::Ef,
        Metric::Der,
        Metric::Oer,
        Metric::Fde,
        Metric::Rae,
        Metric::Hd,
        Metric::Ed,
        Metric::Sd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sens => "SENS",
            Metric::Osens => "OSENS",
            Metric::Spec => "SPEC",
            Metric::Acc => "ACC",
            Metric::Ppv => "PPV",
            Metric::Oppv => "OPPV",
            Metric::Dice => "Dice",
            Metric::ImageDice => "ImageDice",
            Metric::Iou => "IoU",
            Metric::F1 => "F1",
            Metric::Bf => "BF",
            Metric::Pcc => "PCC",
            Metric::Ef => "EF",
            Metric::Der => "DER",
            Metric::Oer => "OER",
            Metric::Fde => "FDE",
            Metric::Rae => "RAE",
            Metric::Hd => "HD",
            Metric::Ed => "ED",
            Metric::Sd => "SD",
        }
    }

    pub fn kind(self) -> MetricKind {
        match self {
            Metric::Pcc => MetricKind::Correlation,
            Metric::Ef | Metric::Der | Metric::Oer | Metric::Fde | Metric::Rae => {
                MetricKind::Error
            }
            Metric::Hd | Metric::Ed | Metric::Sd => MetricKind::Distance,
            _ => MetricKind::Score,
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    /// Case-insensitive; `Image Dice` and `image-dice` also parse.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Metric::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::invalid(format!("unknown metric {s:?}")))
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceUnit {
    #[default]
    Mm,
    Cm,
}

impl DistanceUnit {
    /// Multiplier applied to a length in millimetres.
    pub fn from_mm(self) -> f64 {
        match self {
            DistanceUnit::Mm => 1.0,
            DistanceUnit::Cm => 0.1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DistanceUnit::Mm => "mm",
            DistanceUnit::Cm => "cm",
        }
    }
}

impl fmt::Display for DistanceUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mm" => Ok(DistanceUnit::Mm),
            "cm" => Ok(DistanceUnit::Cm),
            _ => Err(Error::invalid(format!("unknown unit {s:?} (mm or cm)"))),
        }
    }
}

/// All twenty values for one subject and class.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub subject: String,
    pub class: Label,
    pub units: DistanceUnit,
    values: [Option<f64>; 20],
}

impl MetricReport {
    pub fn empty(subject: impl Into<String>, class: Label, units: DistanceUnit) -> Self {
        MetricReport {
            subject: subject.into(),
            class,
            units,
            values: [None; 20],
        }
    }

    pub fn get(&self, m: Metric) -> Option<f64> {
        self.values[m.slot()]
    }

    pub fn set(&mut self, m: Metric, value: Option<f64>) {
        self.values[m.slot()] = value;
    }

    /// Entries in column order.
    pub fn iter(&self) -> impl Iterator<Item = (Metric, Option<f64>)> + '_ {
        Metric::ALL.into_iter().map(|m| (m, self.get(m)))
    }

    /// Same report with distances expressed in `units`.
    pub fn with_units(&self, units: DistanceUnit) -> MetricReport {
        let mut r = self.clone();
        let k = units.from_mm() / self.units.from_mm();
        for m in Metric::ALL {
            if m.kind() == MetricKind::Distance {
                r.values[m.slot()] = self.get(m).map(|v| v * k);
            }
        }
        r.units = units;
        r
    }

    pub fn csv_header() -> Vec<&'static str> {
        let mut h = vec!["subject", "class"];
        h.extend(Metric::ALL.iter().map(|m| m.name()));
        h
    }

    fn csv_record(&self) -> Vec<String> {
        let mut row = vec![self.subject.clone(), self.class.name().to_string()];
        row.extend(self.iter().map(|(_, v)| format_value(v)));
        row
    }
}

pub fn format_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NA".to_string(),
    }
}

pub fn parse_value(s: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("na") || s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::invalid(format!("not a number or NA: {s:?}")))
}

struct Values<'a>(&'a MetricReport);

impl Serialize for Values<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(20))?;
        for (m, v) in self.0.iter() {
            match v {
                Some(x) => map.serialize_entry(m.name(), &x)?,
                None => map.serialize_entry(m.name(), "NA")?,
            }
        }
        map.end()
    }
}

impl Serialize for MetricReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(4))?;
        map.serialize_entry("subject", &self.subject)?;
        map.serialize_entry("class", &self.class)?;
        map.serialize_entry("units", &self.units)?;
        map.serialize_entry("metrics", &Values(self))?;
        map.end()
    }
}

/// Writes `subject,class,SENS,…,SD` followed by one row per report.
pub fn write_reports_csv<W: Write>(out: W, reports: &[MetricReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MetricReport::csv_header())?;
    for r in reports {
        w.write_record(r.csv_record())?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Inverse of [`write_reports_csv`]. Distances are taken to be in `units`.
pub fn read_reports_csv<R: Read>(input: R, units: DistanceUnit) -> Result<Vec<MetricReport>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let expected = MetricReport::csv_header();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::invalid(format!(
            "report header must be {}",
            expected.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let class: Label = rec[1].parse()?;
        let mut report = MetricReport::empty(&rec[0], class, units);
        for (k, m) in Metric::ALL.into_iter().enumerate() {
            report.set(m, parse_value(&rec[2 + k])?);
        }
        out.push(report);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub connectivity: Connectivity,
    pub orientation: Orientation,
    pub empty_slices: EmptySlicePolicy,
    pub bf_tolerance: f64,
    pub units: DistanceUnit,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            connectivity: Connectivity::Vertex,
            orientation: Orientation::Axial,
            empty_slices: EmptySlicePolicy::Exclude,
            bf_tolerance: DEFAULT_BF_TOLERANCE,
            units: DistanceUnit::Mm,
        }
    }
}

/// Every metric for `class`, with `gt` as ground truth.
pub fn full_report(
    subject: &str,
    pred: &LabelVolume,
    gt: &LabelVolume,
    class: Label,
    opts: &ReportOptions,
) -> Result<MetricReport> {
    pred.geometry().ensure_same(gt.geometry(), "report")?;
    let pm = pred.indicator(class);
    let gm = gt.indicator(class);
    let v = voxel_scores(&confusion_counts(&pm, &gm)?);
    let o = object_scores(&pm, &gm, opts.connectivity)?;
    let k = opts.units.from_mm();

    let mut r = MetricReport::empty(subject, class, opts.units);
    r.set(Metric::Sens, v.sens);
    r.set(Metric::Osens, o.osens);
    r.set(Metric::Spec, v.spec);
    r.set(Metric::Acc, v.acc);
    r.set(Metric::Ppv, v.ppv);
    r.set(Metric::Oppv, o.oppv);
    r.set(Metric::Dice, v.dice);
    r.set(
        Metric::ImageDice,
        image_dice(pred, gt, class, opts.orientation, opts.empty_slices)?,
    );
    r.set(Metric::Iou, v.iou);
    r.set(Metric::F1, o.f1);
    r.set(
        Metric::Bf,
        boundary_f1(pred, gt, class, opts.orientation, opts.bf_tolerance)?,
    );
    r.set(Metric::Pcc, pcc(&pm, &gm)?);
    r.set(Metric::Ef, v.ef);
    r.set(Metric::Der, o.der);
    r.set(Metric::Oer, o.oer);
    r.set(Metric::Fde, v.fde);
    r.set(Metric::Rae, v.rae);
    r.set(Metric::Hd, hausdorff(&pm, &gm)?.map(|d| d * k));
    r.set(Metric::Ed, euclidean_avg(&pm, &gm)?.map(|d| d * k));
    r.set(Metric::Sd, surface_distance(&pm, &gm)?.map(|d| d * k));
    Ok(r)
}
