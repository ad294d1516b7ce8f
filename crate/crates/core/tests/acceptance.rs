//! The eleven acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test --test acceptance`. Exits non-zero if any criterion
//! fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lesionfuse::augment::{expand_dataset, AugmentConfig, SourceImage, Transform, OUTPUTS_PER_IMAGE};
use lesionfuse::bayesopt::{optimize, random_search, Dimension, OptimizerConfig, SearchSpace};
use lesionfuse::consensus::{build_ternary_consensus, RaterSet, DEFAULT_THRESHOLD};
use lesionfuse::error::Error;
use lesionfuse::fusion::{fuse, fuse_traced, ClassifierBundle, ConfirmationRule, Focus, FusionConfig};
use lesionfuse::metrics::{
    confusion_counts, euclidean_avg, full_report, hausdorff, object_scores, surface_distance,
    voxel_scores, Metric, ReportOptions,
};
use lesionfuse::rng;
use lesionfuse::simclf::{make_phantom, simulate_bundle, NoiseModel, NoisePreset, PhantomSpec};
use lesionfuse::stats::{wilcoxon_signed_rank, Method, PairedSamples, WilcoxonOptions};
use lesionfuse::volume::io::{decode, encode_lvol, load_labels, load_scalar, save_volume};
use lesionfuse::volume::{Connectivity, Geometry, Image2, Label, LabelVolume, Mask, Orientation, Volume};
use rand::Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, Option<f64>, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("fusion rule-table oracle", Some(1.0), fusion_rule_table),
        ("fusion monotonicity", Some(10.0), fusion_monotonicity),
        ("consensus exactness", Some(5.0), consensus_exactness),
        ("metric oracles", Some(30.0), metric_oracles),
        ("object metrics", Some(5.0), object_metrics),
        ("wilcoxon exactness", Some(10.0), wilcoxon_exactness),
        ("end-to-end identity", Some(10.0), end_to_end_identity),
        ("augmentation contract", Some(5.0), augmentation_contract),
        ("bayesian optimizer", Some(30.0), bayesian_optimizer),
        ("volume i/o", Some(1.0), volume_io),
        ("cli determinism", None, cli_determinism),
    ];
    let mut failed = 0;
    for (k, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let secs = start.elapsed().as_secs_f64();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if secs >= *l => Err(format!("took {secs:.2} s, limit {l} s")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({detail}; {secs:.2} s)", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({secs:.2} s)", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn label(code: usize) -> Label {
    Label::ALL[code]
}

fn single(l: Label) -> LabelVolume {
    Volume::filled(Geometry::with_dims([1, 1, 1]).unwrap(), l)
}

/// The rule table written out directly: union, Lesion pass, Uncertainty pass.
fn rule_oracle(axial: [Label; 2], confirmers: [Label; 4], strict: bool, double: bool) -> Label {
    let votes = |target: Label| {
        confirmers
            .iter()
            .filter(|&&c| if strict { c == target } else { c >= target })
            .count()
    };
    let mut v = axial[0].max(axial[1]);
    let mut frozen = false;
    if v == Label::Lesion && votes(Label::Lesion) < 2 {
        v = Label::Uncertainty;
        frozen = true;
    }
    if v == Label::Uncertainty && (double || !frozen) && votes(Label::Uncertainty) < 2 {
        v = Label::Background;
    }
    v
}

fn fusion_rule_table() -> Check {
    let mut checked = 0;
    for combo in 0..729usize {
        let mut digits = [0usize; 6];
        let mut c = combo;
        for d in &mut digits {
            *d = c % 3;
            c /= 3;
        }
        let ls: Vec<Label> = digits.iter().map(|&d| label(d)).collect();
        let bundle = ClassifierBundle::from_fn(|o, f| {
            let k = match (o, f) {
                (Orientation::Axial, Focus::Lesion) => 0,
                (Orientation::Axial, Focus::Background) => 1,
                (Orientation::Coronal, Focus::Lesion) => 2,
                (Orientation::Coronal, Focus::Background) => 3,
                (Orientation::Sagittal, Focus::Lesion) => 4,
                (Orientation::Sagittal, Focus::Background) => 5,
            };
            Ok(single(ls[k]))
        })
        .map_err(|e| e.to_string())?;
        for rule in [ConfirmationRule::Ordered, ConfirmationRule::Strict] {
            for double in [false, true] {
                let cfg = FusionConfig {
                    rule,
                    allow_double_downgrade: double,
                    ..FusionConfig::default()
                };
                let got = fuse(&bundle, &cfg).map_err(|e| e.to_string())?.data()[0];
                let want = rule_oracle(
                    [ls[0], ls[1]],
                    [ls[2], ls[3], ls[4], ls[5]],
                    rule == ConfirmationRule::Strict,
                    double,
                );
                ensure!(got == want, "{ls:?} {rule} double={double}: got {got}, want {want}");
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} cases"))
}

fn fusion_monotonicity() -> Check {
    let presets = [NoisePreset::Low, NoisePreset::Med, NoisePreset::High];
    for seed in 0..200u64 {
        let spec = PhantomSpec {
            dims: [16, 16, 16],
            n_lesions: 1 + (seed % 3) as usize,
            radius: (1.0, 2.5),
            seed,
            ..PhantomSpec::default()
        };
        let (_, gt) = make_phantom(&spec).map_err(|e| e.to_string())?;
        let nm = NoiseModel::preset(presets[(seed % 3) as usize], seed);
        let bundle = simulate_bundle(&gt, &nm).map_err(|e| e.to_string())?;
        let t = fuse_traced(&bundle, &FusionConfig::default()).map_err(|e| e.to_string())?;
        let (u, f) = (t.union.data(), t.fused.data());
        let mut fp_union = 0;
        let mut fp_fused = 0;
        for i in 0..u.len() {
            ensure!(f[i] <= u[i], "seed {seed}: voxel {i} upgraded {} -> {}", u[i], f[i]);
            ensure!(u[i].code() - f[i].code() <= 1, "seed {seed}: voxel {i} dropped two levels");
            let neg = gt.data()[i] != Label::Lesion;
            fp_union += (neg && u[i] == Label::Lesion) as usize;
            fp_fused += (neg && f[i] == Label::Lesion) as usize;
        }
        ensure!(fp_fused <= fp_union, "seed {seed}: fused FP {fp_fused} > union FP {fp_union}");
    }
    Ok("200 bundles".into())
}

fn consensus_exactness() -> Check {
    let g = Geometry::with_dims([16, 16, 16]).unwrap();
    for set in 0..100u64 {
        let mut r = rng::stream(101, set);
        let density = r.random_range(0.05..0.6);
        let raters: Vec<Mask> = (0..7).map(|_| common::random_mask(&mut r, g, density)).collect();
        let cons = common::random_mask(&mut r, g, density);
        let rs = RaterSet::new(format!("s{set}"), raters.clone(), cons.clone()).map_err(|e| e.to_string())?;
        let out = build_ternary_consensus(&rs, DEFAULT_THRESHOLD).map_err(|e| e.to_string())?;
        for i in 0..g.len() {
            let count = raters.iter().filter(|m| m.data()[i]).count();
            let want = if cons.data()[i] {
                Label::Lesion
            } else if count >= 3 {
                Label::Uncertainty
            } else {
                Label::Background
            };
            ensure!(out.data()[i] == want, "set {set} voxel {i}: got {}, want {want}", out.data()[i]);
        }
    }
    Ok("100 rater sets".into())
}

fn ratio(n: f64, d: f64) -> Option<f64> {
    (d != 0.0).then(|| n / d)
}

fn close(a: Option<f64>, b: Option<f64>, rel: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= rel * x.abs().max(y.abs()).max(1e-300),
        (None, None) => true,
        _ => false,
    }
}

fn metric_oracles() -> Check {
    let mut distance_pairs = 0;
    for case in 0..100u64 {
        let mut r = rng::stream(202, case);
        let g = common::random_geometry(&mut r, 8);
        let (da, db) = (r.random_range(0.0..0.6), r.random_range(0.0..0.6));
        let a = common::random_mask(&mut r, g, da);
        let b = common::random_mask(&mut r, g, db);

        let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..g.len() {
            match (a.data()[i], b.data()[i]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        let c = confusion_counts(&a, &b).map_err(|e| e.to_string())?;
        ensure!(
            (c.tp, c.fp, c.tn, c.fn_) == (tp, fp, tn, fn_),
            "case {case}: counts {c:?} vs ({tp},{fp},{tn},{fn_})"
        );
        let s = voxel_scores(&c);
        let (tp, fp, tn, fn_) = (tp as f64, fp as f64, tn as f64, fn_ as f64);
        let sens = ratio(tp, tp + fn_);
        let spec = ratio(tn, tn + fp);
        let want = [
            ("SENS", s.sens, sens),
            ("SPEC", s.spec, spec),
            ("ACC", s.acc, sens.zip(spec).map(|(x, y)| (x + y) / 2.0)),
            ("PPV", s.ppv, ratio(tp, tp + fp)),
            ("Dice", s.dice, ratio(2.0 * tp, 2.0 * tp + fp + fn_)),
            ("IoU", s.iou, ratio(tp, tp + fp + fn_)),
            ("EF", s.ef, ratio(fp, tp + fn_)),
            ("FDE", s.fde, ratio(fp, tp + fn_)),
            ("RAE", s.rae, ratio((tp + fp - (tp + fn_)).abs(), tp + fn_)),
        ];
        for (name, got, want) in want {
            ensure!(got == want, "case {case}: {name} {got:?} vs {want:?}");
        }
        if let (Some(d), Some(j)) = (s.dice, s.iou) {
            ensure!((d - 2.0 * j / (1.0 + j)).abs() <= 1e-12, "case {case}: Dice/IoU identity");
        }
        let swapped = voxel_scores(&confusion_counts(&b, &a).map_err(|e| e.to_string())?);
        ensure!(s.sens == swapped.ppv, "case {case}: SENS(a,b) != PPV(b,a)");

        let (pa, pb) = (common::positives(&a), common::positives(&b));
        let checks = [
            ("HD", hausdorff(&a, &b), common::hausdorff(&g, &pa, &pb)),
            ("ED", euclidean_avg(&a, &b), common::euclidean_avg(&g, &pa, &pb)),
            ("SD", surface_distance(&a, &b), common::surface_distance(&a, &b)),
        ];
        for (name, got, want) in checks {
            let got = got.map_err(|e| e.to_string())?;
            ensure!(close(got, want, 1e-9), "case {case}: {name} {got:?} vs oracle {want:?}");
        }
        distance_pairs += (!pa.is_empty() && !pb.is_empty()) as usize;
    }
    Ok(format!("100 pairs, {distance_pairs} with distances"))
}

fn object_metrics() -> Check {
    let g = Geometry::with_dims([10, 1, 1]).unwrap();
    let line = |on: &[usize]| {
        let pts: Vec<_> = on.iter().map(|&x| [x, 0, 0]).collect();
        Mask::from_points(g, &pts).unwrap()
    };
    let gt = line(&[2, 3, 4, 5]);
    let pred = line(&[3, 4, 5, 6, 8, 9]);
    let s = object_scores(&pred, &gt, Connectivity::Vertex).map_err(|e| e.to_string())?;
    ensure!(s.der == Some(0.4), "1D DER {:?}", s.der);
    ensure!(s.oer == Some(0.4), "1D OER {:?}", s.oer);
    ensure!(s.osens == Some(1.0), "1D OSENS {:?}", s.osens);
    ensure!(s.oppv == Some(0.5), "1D OPPV {:?}", s.oppv);

    let conns = [(Connectivity::Face, 1), (Connectivity::Edge, 2), (Connectivity::Vertex, 3)];
    for case in 0..50u64 {
        let mut r = rng::stream(303, case);
        let g = common::random_geometry(&mut r, 6);
        let d = r.random_range(0.05..0.4);
        let pred = common::random_mask(&mut r, g, d);
        let gt = common::random_mask(&mut r, g, d);
        let (conn, reach) = conns[(case % 3) as usize];
        let s = object_scores(&pred, &gt, conn).map_err(|e| e.to_string())?;
        let o = common::object_oracle(&pred, &gt, reach);
        let got = (s.counts.tp_o, s.counts.fp_o, s.counts.fn_o, s.detection_error, s.outline_error);
        let want = (o.tp_o, o.fp_o, o.fn_o, o.detection_error, o.outline_error);
        ensure!(got == want, "case {case} ({conn:?}): {got:?} vs oracle {want:?}");
        ensure!(s.mean_total_area == o.mean_total_area, "case {case}: MTA");
        if o.mean_total_area > 0.0 {
            let (tp, fp, fn_) = (o.tp_o as f64, o.fp_o as f64, o.fn_o as f64);
            ensure!(s.osens == ratio(tp, tp + fn_), "case {case}: OSENS");
            ensure!(s.oppv == ratio(tp, tp + fp), "case {case}: OPPV");
            ensure!(s.der == Some(o.detection_error as f64 / o.mean_total_area), "case {case}: DER");
            ensure!(s.oer == Some(o.outline_error as f64 / o.mean_total_area), "case {case}: OER");
        }
    }
    Ok("worked example and 50 random cases".into())
}

/// Two-sided p by listing every sign assignment over the non-zero
/// differences, ranked with midranks.
fn enumerated_p(d: &[f64]) -> f64 {
    let nz: Vec<f64> = d.iter().copied().filter(|&x| x != 0.0).collect();
    let n = nz.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| nz[i].abs().total_cmp(&nz[j].abs()));
    let mut rank = vec![0.0; n];
    let mut k = 0;
    while k < n {
        let mut e = k;
        while e + 1 < n && nz[order[e + 1]].abs() == nz[order[k]].abs() {
            e += 1;
        }
        let mid = (k + e) as f64 / 2.0 + 1.0;
        for &i in &order[k..=e] {
            rank[i] = mid;
        }
        k = e + 1;
    }
    let observed: f64 = (0..n).filter(|&i| nz[i] > 0.0).map(|i| rank[i]).sum();
    let (mut lo, mut hi) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| rank[i]).sum();
        lo += (w <= observed + 1e-9) as u64;
        hi += (w >= observed - 1e-9) as u64;
    }
    let total = (1u64 << n) as f64;
    (2.0 * lo.min(hi) as f64 / total).min(1.0)
}

fn wilcoxon_exactness() -> Check {
    let opts = WilcoxonOptions::default();
    let five = PairedSamples::from_differences(&[1.0, 2.0, 3.0, 4.0, 5.0]).map_err(|e| e.to_string())?;
    let p5 = wilcoxon_signed_rank(&five, &opts).map_err(|e| e.to_string())?.p_value;
    ensure!(p5 == 0.0625, "(1,2,3,4,5) gave p = {p5}");

    let mut tested = 0;
    for case in 0..100u64 {
        let mut r = rng::stream(404, case);
        let n = 1 + (case % 10) as usize;
        let d: Vec<f64> = loop {
            let d: Vec<f64> = (0..n)
                .map(|_| {
                    if r.random_bool(0.5) {
                        r.random_range(-4i32..=4) as f64
                    } else {
                        r.random_range(-3.0..3.0)
                    }
                })
                .collect();
            if d.iter().any(|&x| x != 0.0) {
                break d;
            }
        };
        let s = PairedSamples::from_differences(&d).map_err(|e| e.to_string())?;
        let res = wilcoxon_signed_rank(&s, &opts).map_err(|e| e.to_string())?;
        ensure!(res.method == Method::Exact, "case {case}: n = {n} not exact");
        let want = enumerated_p(&d);
        ensure!(
            (res.p_value - want).abs() <= 1e-12,
            "case {case} {d:?}: p {} vs enumeration {want}",
            res.p_value
        );
        tested += 1;
    }
    Ok(format!("{tested} vectors, n = 1..10"))
}

fn end_to_end_identity() -> Check {
    for seed in 0..10u64 {
        let spec = PhantomSpec {
            n_lesions: 1 + (seed % 4) as usize,
            seed: 1000 + seed,
            ..PhantomSpec::default()
        };
        let (_, gt) = make_phantom(&spec).map_err(|e| e.to_string())?;
        let bundle = simulate_bundle(&gt, &NoiseModel::zero(seed)).map_err(|e| e.to_string())?;
        let fused = fuse(&bundle, &FusionConfig::default()).map_err(|e| e.to_string())?;
        for class in [Label::Lesion, Label::Uncertainty] {
            ensure!(gt.count(class) > 0, "phantom {seed} has no {class} voxels");
            let rep = full_report("p", &fused, &gt, class, &ReportOptions::default()).map_err(|e| e.to_string())?;
            for (m, want) in [(Metric::Dice, 1.0), (Metric::Iou, 1.0), (Metric::Hd, 0.0), (Metric::Sd, 0.0)] {
                ensure!(rep.get(m) == Some(want), "phantom {seed} {class}: {m} = {:?}", rep.get(m));
            }
        }
    }
    Ok("10 phantoms".into())
}

fn augmentation_contract() -> Check {
    let n = 256;
    let amplitude = 2.0f32;
    let image = Image2::new(
        n,
        n,
        (0..n * n).map(|i| amplitude * ((i % n) as f32 / (n - 1) as f32)).collect(),
    )
    .map_err(|e| e.to_string())?;
    let labels = Image2::filled(n, n, Label::Background);
    let mut sources = vec![SourceImage::new("big", image, labels)];
    for k in 0..8 {
        let img = Image2::new(16, 16, (0..256).map(|i| (i * (k + 1)) as f32 / 256.0).collect()).unwrap();
        let lab = Image2::new(16, 16, (0..256).map(|i| label(i % 3)).collect()).unwrap();
        sources.push(SourceImage::new(format!("s{k}"), img, lab));
    }
    let cfg = AugmentConfig::with_seed(77);
    let out = expand_dataset(&sources, &cfg).map_err(|e| e.to_string())?;
    ensure!(
        out.len() == OUTPUTS_PER_IMAGE * sources.len() && OUTPUTS_PER_IMAGE == 5,
        "{} outputs for {} images",
        out.len(),
        sources.len()
    );
    let on_grid = |x: f64, lo: f64, hi: f64, step: f64| {
        let k = ((x - lo) / step).round();
        x >= lo - 1e-9 && x <= hi + 1e-9 && (lo + k * step - x).abs() < 1e-9
    };
    for (k, chunk) in out.chunks(5).enumerate() {
        let kinds: Vec<Transform> = chunk.iter().map(|a| a.provenance.transform).collect();
        ensure!(
            kinds
                == [
                    Transform::Original,
                    Transform::Rotation,
                    Transform::Rotation,
                    Transform::Scaling,
                    Transform::Noise
                ],
            "image {k}: transforms {kinds:?}"
        );
        for a in chunk {
            let p = a.provenance.parameter;
            match a.provenance.transform {
                Transform::Rotation => ensure!(on_grid(p, -13.0, 13.0, 1.0), "angle {p} off grid"),
                Transform::Scaling => ensure!(on_grid(p, 1.10, 1.30, 0.01), "scale {p} off grid"),
                _ => {}
            }
            ensure!(
                a.labels.data.iter().all(|l| Label::ALL.contains(l)),
                "labels outside the ternary set"
            );
        }
    }
    let orig = &out[0].image;
    let noisy = &out[4].image;
    let diffs: Vec<f64> = orig.data.iter().zip(&noisy.data).map(|(a, b)| (*b - *a) as f64).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
    let target = 0.001 * amplitude as f64;
    ensure!(
        (var - target).abs() <= 0.2 * target,
        "noise variance {var:.3e}, target {target:.3e}"
    );
    Ok(format!("noise variance {var:.4e} vs {target:.1e}"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn bayesian_optimizer() -> Check {
    let space = SearchSpace::new(vec![Dimension::new(0.0, 1.0, 0.01).map_err(|e| e.to_string())?])
        .map_err(|e| e.to_string())?;
    let f = |x: &[f64]| (x[0] - 0.3).powi(2);
    let mut hits = 0;
    let (mut bo, mut rs) = (Vec::new(), Vec::new());
    for seed in 0..10u64 {
        let cfg = OptimizerConfig {
            budget: 30,
            seed,
            ..OptimizerConfig::default()
        };
        let r = optimize(f, &space, &cfg).map_err(|e| e.to_string())?;
        ensure!(r.history.len() == 30, "seed {seed}: {} evaluations", r.history.len());
        hits += ((r.best.x[0] - 0.3).abs() <= 0.02 + 1e-12) as usize;
        bo.push(r.best.f);
        rs.push(random_search(f, &space, 30, seed).map_err(|e| e.to_string())?.best.f);
    }
    let (mb, mr) = (median(bo), median(rs));
    ensure!(hits >= 9, "only {hits}/10 runs within 0.02 of 0.30");
    ensure!(mb < mr, "median best f {mb:.2e} does not beat random search {mr:.2e}");
    Ok(format!("{hits}/10 hits, median f {mb:.1e} vs random {mr:.1e}"))
}

fn volume_io() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let g = Geometry::new([5, 4, 3], [0.5, 1.25, 3.0]).unwrap();
    let labels = LabelVolume::from_fn(g, |[x, y, z]| label((x + 2 * y + z) % 3)).unwrap();
    let scalar = Volume::<f32>::from_fn(g, |[x, y, z]| x as f32 * 0.1 - y as f32 + z as f32 * 7.5).unwrap();
    let bytes = encode_lvol(&labels);
    let path = dir.path().join("labels.lvol");
    save_volume(&labels, &path).map_err(|e| e.to_string())?;
    let back = load_labels(&path).map_err(|e| e.to_string())?;
    ensure!(back == labels, "label volume changed on reload");
    ensure!(encode_lvol(&back) == bytes, "label bytes differ after round trip");
    ensure!(std::fs::read(&path).unwrap() == bytes, "file bytes differ from encoding");
    let spath = dir.path().join("scalar.lvol");
    save_volume(&scalar, &spath).map_err(|e| e.to_string())?;
    let sback = load_scalar(&spath).map_err(|e| e.to_string())?;
    ensure!(encode_lvol(&sback) == encode_lvol(&scalar), "scalar bytes differ after round trip");

    let payload: Vec<u8> = (0..24u8).map(|i| i % 3).collect();
    let nii = common::nifti_bytes([4, 3, 2], [0.9, 1.1, 2.5], 2, &payload);
    let raw = decode(&nii).map_err(|e| e.to_string())?;
    ensure!(raw.geometry.dims == [4, 3, 2], "NIfTI dims {:?}", raw.geometry.dims);
    let sp = raw.geometry.spacing;
    ensure!(
        (sp[0] - 0.9f32 as f64).abs() < 1e-12 && (sp[1] - 1.1f32 as f64).abs() < 1e-12 && sp[2] == 2.5,
        "NIfTI spacing {sp:?}"
    );
    let v = raw.into_labels().map_err(|e| e.to_string())?;
    let codes: Vec<u8> = v.data().iter().map(|l| l.code()).collect();
    ensure!(codes == payload, "NIfTI voxels differ");

    let int16 = common::nifti_bytes([2, 2, 1], [1.0, 1.0, 1.0], 4, &[0u8; 8]);
    ensure!(
        matches!(decode(&int16), Err(Error::UnsupportedDataType(4))),
        "int16 NIfTI not rejected"
    );
    Ok("lvol round trip, NIfTI fixture, int16 rejected".into())
}

fn run_cli(cwd: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lesionfuse"))
        .current_dir(cwd)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("LESIONFUSE_SEED")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "lesionfuse {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(())
}

fn pipeline(cwd: &Path) -> Result<(), String> {
    std::fs::write(
        cwd.join("manifest.csv"),
        "subject_id,centre\na1,A\na2,A\na3,A\na4,A\na5,A\nb1,B\nb2,B\nb3,B\nb4,B\nb5,B\n",
    )
    .map_err(|e| e.to_string())?;
    let steps: &[&[&str]] = &[
        &["simulate", "--seed", "11", "--noise-preset", "med", "--out", "sim"],
        &["fuse", "--bundle", "sim", "--out", "fuse"],
        &["eval", "--pred", "fuse/fused.lvol", "--gt", "sim/gt.lvol", "--class", "lesion", "--per-lesion", "--out", "eval_fused"],
        &["eval", "--pred", "sim/axial_in.lvol", "--gt", "sim/gt.lvol", "--class", "lesion", "--out", "eval_axial"],
        &["wilcoxon", "--a", "eval_fused/report.csv", "--b", "eval_axial/report.csv", "--out", "wilcoxon"],
        &["compare", "--rater", "fused=fuse/fused.lvol", "--rater", "gt=sim/gt.lvol", "--rater", "axial=sim/axial_in.lvol", "--class", "lesion", "--out", "compare"],
        &["consensus", "--rater", "sim/axial_in.lvol", "--rater", "sim/coronal_in.lvol", "--rater", "sim/sagittal_in.lvol", "--threshold", "2", "--consensus", "sim/gt.lvol", "--out", "consensus"],
        &["split", "--manifest", "manifest.csv", "--seed", "5", "--out", "split"],
        &["optimize", "--volume", "sim/phantom.lvol", "--gt", "sim/gt.lvol", "--class", "lesion", "--budget", "12", "--seed", "3", "--out", "optimize"],
        &["report", "--summary", "fused=eval_fused/report.csv", "--summary", "axial=eval_axial/report.csv", "--per-lesion", "--pred", "fuse/fused.lvol", "--gt", "sim/gt.lvol", "--class", "lesion", "--out", "report"],
    ];
    for s in steps {
        run_cli(cwd, s)?;
    }
    std::fs::create_dir_all(cwd.join("aug_in")).map_err(|e| e.to_string())?;
    std::fs::copy(cwd.join("sim/phantom.lvol"), cwd.join("aug_in/p.lvol")).map_err(|e| e.to_string())?;
    std::fs::copy(cwd.join("sim/gt.lvol"), cwd.join("aug_in/p.labels.lvol")).map_err(|e| e.to_string())?;
    run_cli(cwd, &["augment", "--input", "aug_in", "--seed", "9", "--out", "augment"])
}

fn files_under(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn cli_determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    pipeline(a.path())?;
    pipeline(b.path())?;
    let (fa, fb) = (files_under(a.path()), files_under(b.path()));
    ensure!(fa == fb, "runs wrote different file sets");
    let mut compared = 0;
    for rel in &fa {
        let ext = rel.extension().and_then(|e| e.to_str()).unwrap_or("");
        let x = std::fs::read(a.path().join(rel)).unwrap();
        let y = std::fs::read(b.path().join(rel)).unwrap();
        ensure!(x == y, "{} differs between runs", rel.display());
        compared += matches!(ext, "csv" | "json") as usize;
    }
    Ok(format!("{compared} CSV/JSON files, {} files total", fa.len()))
}
