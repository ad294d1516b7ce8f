//! Simulated six-classifier bundle fused with both confirmation rules.

use lesionfuse::fusion::{fuse_traced, ConfirmationRule, FusionConfig};
use lesionfuse::simclf::{make_phantom, simulate_bundle, NoiseModel, NoisePreset, PhantomSpec};
use lesionfuse::volume::Label;

fn main() -> lesionfuse::Result<()> {
    let (_, gt) = make_phantom(&PhantomSpec { seed: 3, ..PhantomSpec::default() })?;
    let bundle = simulate_bundle(&gt, &NoiseModel::preset(NoisePreset::Med, 3))?;

    let fp = |v: &lesionfuse::volume::LabelVolume| {
        v.data()
            .iter()
            .zip(gt.data())
            .filter(|(p, g)| **p == Label::Lesion && **g != Label::Lesion)
            .count()
    };
    for rule in [ConfirmationRule::Ordered, ConfirmationRule::Strict] {
        let cfg = FusionConfig { rule, ..FusionConfig::default() };
        let t = fuse_traced(&bundle, &cfg)?;
        println!(
            "{rule:>8}: lesion FP union {} -> fused {}, lesion voxels {} -> {}, downgraded in lesion pass {}",
            fp(&t.union),
            fp(&t.fused),
            t.union.count(Label::Lesion),
            t.fused.count(Label::Lesion),
            t.lesion_downgraded.count()
        );
    }
    Ok(())
}
