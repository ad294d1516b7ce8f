//! Full 20-metric report for a noisy prediction, in mm and cm, plus the
//! per-lesion breakdown.

use lesionfuse::metrics::{full_report, per_lesion_metrics, write_reports_csv, DistanceUnit, LesionOptions, ReportOptions};
use lesionfuse::simclf::{make_phantom, perturb_volume, NoiseModel, NoisePreset, PhantomSpec};
use lesionfuse::volume::Label;

fn main() -> lesionfuse::Result<()> {
    let (_, gt) = make_phantom(&PhantomSpec { n_lesions: 5, seed: 8, ..PhantomSpec::default() })?;
    let pred = perturb_volume(&gt, &NoiseModel::preset(NoisePreset::Low, 8), 0)?;

    let mm = full_report("s01", &pred, &gt, Label::Lesion, &ReportOptions::default())?;
    let cm = mm.with_units(DistanceUnit::Cm);
    let mut out = Vec::new();
    write_reports_csv(&mut out, &[mm, cm])?;
    print!("{}", String::from_utf8_lossy(&out));

    for l in per_lesion_metrics(&pred, &gt, Label::Lesion, &LesionOptions::default())? {
        println!("lesion {} {:>5.0} mm3  dice {:.3}  f1 {:.3}  sd {:?}", l.lesion, l.volume_mm3, l.dice, l.f1, l.sd);
    }
    Ok(())
}
