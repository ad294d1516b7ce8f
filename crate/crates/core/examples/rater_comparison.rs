//! All-vs-all comparison of simulated raters, then a Wilcoxon test on two
//! raters' per-subject Dice.

use lesionfuse::metrics::{full_report, Metric, ReportOptions};
use lesionfuse::simclf::{make_phantom, perturb_volume, NoiseModel, NoisePreset, PhantomSpec};
use lesionfuse::stats::{all_vs_all, pair_reports, wilcoxon_signed_rank, PairingMode, WilcoxonOptions};
use lesionfuse::volume::Label;

fn main() -> lesionfuse::Result<()> {
    let opts = ReportOptions::default();
    let (_, gt) = make_phantom(&PhantomSpec { seed: 21, ..PhantomSpec::default() })?;
    let raters = vec![
        ("gt".to_string(), gt.clone()),
        ("low".to_string(), perturb_volume(&gt, &NoiseModel::preset(NoisePreset::Low, 1), 0)?),
        ("high".to_string(), perturb_volume(&gt, &NoiseModel::preset(NoisePreset::High, 1), 0)?),
    ];
    let m = all_vs_all(&raters, Label::Lesion, &[Metric::Dice, Metric::Hd], &opts)?;
    let mut csv = Vec::new();
    m.write_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));

    let (mut a, mut b) = (Vec::new(), Vec::new());
    for s in 0..12u64 {
        let (_, gt) = make_phantom(&PhantomSpec { seed: 100 + s, ..PhantomSpec::default() })?;
        let id = format!("s{s:02}");
        let low = perturb_volume(&gt, &NoiseModel::preset(NoisePreset::Low, s), 0)?;
        let high = perturb_volume(&gt, &NoiseModel::preset(NoisePreset::High, s), 0)?;
        a.push(full_report(&id, &low, &gt, Label::Lesion, &opts)?);
        b.push(full_report(&id, &high, &gt, Label::Lesion, &opts)?);
    }
    let pairs = pair_reports("low", &a, "high", &b, PairingMode::PerSubject(Metric::Dice))?;
    let r = wilcoxon_signed_rank(&pairs, &WilcoxonOptions::default())?;
    println!("Dice low vs high: W = {}, p = {:.3e}, significant = {}", r.w_statistic, r.p_value, r.significant);
    Ok(())
}
