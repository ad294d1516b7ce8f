use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::OutDir;
use super::*;
use crate::augment::{self, AugmentConfig, SourceImage};
use crate::bayesopt::{self, OptimizerConfig};
use crate::consensus::{build_ternary_consensus, RaterSet};
use crate::error::Result;
use crate::fusion::{fuse_traced, ClassifierBundle, Focus, FusionConfig};
use crate::metrics::{
    full_report, per_lesion_metrics, write_reports_csv, LesionMetrics, LesionOptions,
    MetricReport, ReportOptions,
};
use crate::simclf::{make_phantom, simulate_bundle, NoiseModel, PhantomSpec};
use crate::stats::{
    self, all_vs_all, enumerate_folds, pair_reports, read_manifest, stratified_split,
    wilcoxon_signed_rank, PairingMode, Quota, WilcoxonOptions,
};
use crate::volume::io::{load_labels, load_mask, load_scalar};
use crate::volume::{extract_slices, Geometry, LabelVolume, Volume};

pub(super) fn dispatch(command: Command, args: &[String]) -> Result<PathBuf> {
    match command {
        Command::Consensus(a) => consensus(a, args),
        Command::Fuse(a) => fuse(a, args),
        Command::Eval(a) => eval(a, args),
        Command::Compare(a) => compare(a, args),
        Command::Wilcoxon(a) => wilcoxon(a, args),
        Command::Split(a) => split(a, args),
        Command::Augment(a) => augment(a, args),
        Command::Simulate(a) => simulate(a, args),
        Command::Optimize(a) => optimize(a, args),
        Command::Report(a) => report(a, args),
    }
}

fn resolve_seed(arg: &SeedArg) -> (u64, bool) {
    match arg.seed {
        Some(s) => (s, false),
        None => {
            let nanos = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_nanos() as u64)
                .unwrap_or(0);
            (nanos ^ ((std::process::id() as u64) << 32), true)
        }
    }
}

fn report_options(m: &MetricOpts) -> ReportOptions {
    ReportOptions {
        connectivity: m.connectivity,
        orientation: m.orientation,
        units: m.units,
        ..ReportOptions::default()
    }
}

fn named_path(spec: &str) -> Result<(String, PathBuf)> {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(Error::invalid(format!("expected NAME=PATH, got {spec:?}"))),
    }
}

fn labels_in(out: &mut OutDir, path: &Path) -> Result<LabelVolume> {
    out.record_input(path)?;
    load_labels(path)
}

fn consensus(a: ConsensusArgs, args: &[String]) -> Result<PathBuf> {
    let mut out = OutDir::create(&a.out.out, "consensus", args)?;
    let mut raters = Vec::with_capacity(a.raters.len());
    for p in &a.raters {
        out.record_input(p)?;
        raters.push(load_mask(p)?);
    }
    out.record_input(&a.consensus)?;
    let cons = load_mask(&a.consensus)?;
    let rs = RaterSet::new(a.subject, raters, cons)?;
    let ternary = build_ternary_consensus(&rs, a.threshold)?;
    out.save("ternary.lvol", &ternary)?;
    out.finish()
}

fn bundle_paths(a: &FuseArgs) -> Result<Vec<(Orientation, Focus, PathBuf)>> {
    let explicit = [
        (Orientation::Axial, Focus::Lesion, &a.axial_in),
        (Orientation::Axial, Focus::Background, &a.axial_out),
        (Orientation::Coronal, Focus::Lesion, &a.coronal_in),
        (Orientation::Coronal, Focus::Background, &a.coronal_out),
        (Orientation::Sagittal, Focus::Lesion, &a.sagittal_in),
        (Orientation::Sagittal, Focus::Background, &a.sagittal_out),
    ];
    explicit
        .into_iter()
        .map(|(o, f, p)| {
            let path = match (p, &a.bundle) {
                (Some(p), _) => p.clone(),
                (None, Some(dir)) => dir.join(bundle_file(o, f)),
                (None, None) => {
                    return Err(Error::invalid(format!(
                        "missing --{}-{} (or --bundle)",
                        o.name(),
                        f.tag()
                    )))
                }
            };
            Ok((o, f, path))
        })
        .collect()
}

pub(crate) fn bundle_file(o: Orientation, f: Focus) -> String {
    format!("{}_{}.lvol", o.name(), f.tag())
}

fn fuse(a: FuseArgs, args: &[String]) -> Result<PathBuf> {
    let cfg = FusionConfig {
        min_votes: a.min_votes,
        rule: a.rule,
        allow_double_downgrade: a.allow_double_downgrade,
        preferred: a.preferred,
    };
    cfg.validate()?;
    let paths = bundle_paths(&a)?;
    let mut out = OutDir::create(&a.out.out, "fuse", args)?;
    let mut loaded = Vec::new();
    for (o, f, p) in &paths {
        loaded.push((*o, *f, labels_in(&mut out, p)?));
    }
    let bundle = ClassifierBundle::from_fn(|o, f| {
        let k = loaded.iter().position(|(oo, ff, _)| (*oo, *ff) == (o, f)).unwrap();
        Ok(loaded[k].2.clone())
    })?;
    let trace = fuse_traced(&bundle, &cfg)?;
    out.save("union.lvol", &trace.union)?;
    out.save("fused.lvol", &trace.fused)?;
    out.finish()
}

#[derive(Debug, Deserialize)]
struct PairRow {
    subject: String,
    pred: PathBuf,
    gt: PathBuf,
}

fn eval(a: EvalArgs, args: &[String]) -> Result<PathBuf> {
    let mut out = OutDir::create(&a.out.out, "eval", args)?;
    let pairs: Vec<PairRow> = match (&a.pred, &a.gt, &a.pairs) {
        (Some(p), Some(g), None) => vec![PairRow {
            subject: a.subject.clone(),
            pred: p.clone(),
            gt: g.clone(),
        }],
        (None, None, Some(csv_path)) => {
            out.record_input(csv_path)?;
            let text = fs::read(csv_path).map_err(|e| Error::io(csv_path, e))?;
            let mut r = csv::Reader::from_reader(text.as_slice());
            let rows = r.deserialize().collect::<std::result::Result<Vec<PairRow>, _>>()?;
            if rows.is_empty() {
                return Err(Error::invalid("pairs file lists no subjects"));
            }
            rows
        }
        _ => return Err(Error::invalid("give either --pred and --gt, or --pairs")),
    };
    for p in &pairs {
        out.record_input(&p.pred)?;
        out.record_input(&p.gt)?;
    }
    let opts = report_options(&a.metric);
    let lesion_opts = LesionOptions {
        margin: a.margin,
        connectivity: a.metric.connectivity,
    };
    type Subject = (Vec<MetricReport>, Vec<(Label, Vec<LesionMetrics>)>);
    let mut results: Vec<(String, Subject)> = pairs
        .par_iter()
        .map(|p| {
            let pred = load_labels(&p.pred)?;
            let gt = load_labels(&p.gt)?;
            let mut reports = Vec::new();
            let mut lesions = Vec::new();
            for &class in &a.classes {
                reports.push(full_report(&p.subject, &pred, &gt, class, &opts)?);
                if a.per_lesion {
                    lesions.push((class, per_lesion_metrics(&pred, &gt, class, &lesion_opts)?));
                }
            }
            Ok((p.subject.clone(), (reports, lesions)))
        })
        .collect::<Result<_>>()?;
    results.sort_by(|x, y| x.0.cmp(&y.0));

    let reports: Vec<MetricReport> = results.iter().flat_map(|r| r.1 .0.clone()).collect();
    out.write_with("report.csv", |buf| write_reports_csv(buf, &reports))?;
    out.write_json("report.json", &reports)?;
    if a.per_lesion {
        let k = opts.units.from_mm();
        out.write_with("per_lesion.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["subject", "class", "lesion", "voxels", "volume_mm3", "dice", "f1", "sd"])?;
            for (subject, (_, lesions)) in &results {
                for (class, rows) in lesions {
                    for m in rows {
                        w.write_record([
                            subject.clone(),
                            class.to_string(),
                            m.lesion.to_string(),
                            m.voxels.to_string(),
                            m.volume_mm3.to_string(),
                            m.dice.to_string(),
                            m.f1.to_string(),
                            crate::metrics::format_value(m.sd.map(|d| d * k)),
                        ])?;
                    }
                }
            }
            w.flush().map_err(|e| Error::io("<csv>", e))
        })?;
    }
    out.finish()
}

fn load_named(out: &mut OutDir, specs: &[String]) -> Result<Vec<(String, LabelVolume)>> {
    let mut raters = Vec::new();
    for s in specs {
        let (name, path) = named_path(s)?;
        if raters.iter().any(|(n, _): &(String, LabelVolume)| *n == name) {
            return Err(Error::invalid(format!("rater name {name} given twice")));
        }
        raters.push((name, labels_in(out, &path)?));
    }
    Ok(raters)
}

fn compare(a: CompareArgs, args: &[String]) -> Result<PathBuf> {
    let mut out = OutDir::create(&a.out.out, "compare", args)?;
    let raters = load_named(&mut out, &a.raters)?;
    let metrics = if a.metrics.is_empty() {
        Metric::ALL.to_vec()
    } else {
        a.metrics.clone()
    };
    let m = all_vs_all(&raters, a.class, &metrics, &report_options(&a.metric))?;
    out.write_with("comparison.csv", |buf| m.write_csv(buf))?;
    out.write_json("comparison.json", &m)?;
    out.finish()
}

fn read_reports(out: &mut OutDir, path: &Path, units: crate::metrics::DistanceUnit) -> Result<Vec<MetricReport>> {
    out.record_input(path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    crate::metrics::read_reports_csv(bytes.as_slice(), units)
}

#[derive(Serialize)]
struct WilcoxonOutput<'a> {
    label_a: &'a str,
    label_b: &'a str,
    pairing: PairingMode,
    zero_method: ZeroMethod,
    n_pairs: usize,
    #[serde(flatten)]
    result: &'a crate::stats::WilcoxonResult,
}

fn wilcoxon(a: WilcoxonArgs, args: &[String]) -> Result<PathBuf> {
    let mut out = OutDir::create(&a.out.out, "wilcoxon", args)?;
    let ra = read_reports(&mut out, &a.a, a.units)?;
    let rb = read_reports(&mut out, &a.b, a.units)?;
    let pairing = match a.per_subject {
        Some(m) => PairingMode::PerSubject(m),
        None => PairingMode::MetricMeans,
    };
    let samples = pair_reports(&a.label_a, &ra, &a.label_b, &rb, pairing)?;
    let opts = WilcoxonOptions {
        alpha: a.alpha,
        alternative: a.alternative,
        zero_method: a.zero_method,
    };
    let result = wilcoxon_signed_rank(&samples, &opts)?;
    out.write_json(
        "wilcoxon.json",
        &WilcoxonOutput {
            label_a: &a.label_a,
            label_b: &a.label_b,
            pairing,
            zero_method: a.zero_method,
            n_pairs: samples.len(),
            result: &result,
        },
    )?;
    out.finish()
}

fn split(a: SplitArgs, args: &[String]) -> Result<PathBuf> {
    let mut out = OutDir::create(&a.out.out, "split", args)?;
    out.record_input(&a.manifest)?;
    let bytes = fs::read(&a.manifest).map_err(|e| Error::io(&a.manifest, e))?;
    let subjects = read_manifest(bytes.as_slice())?;
    let quota = Quota {
        train: a.train,
        validation: a.validation,
        test: a.test,
    };
    if a.enumerate {
        let folds = enumerate_folds(&subjects, &quota)?;
        out.write_json("folds.json", &folds)?;
    } else {
        let (seed, generated) = resolve_seed(&a.seed);
        out.record_seed("seed", seed, generated);
        let plan = stratified_split(&subjects, &quota, seed)?;
        out.write_json("split.json", &plan)?;
    }
    out.finish()
}

fn augment(a: AugmentArgs, args: &[String]) -> Result<PathBuf> {
    let mut out = OutDir::create(&a.out.out, "augment", args)?;
    let (seed, generated) = resolve_seed(&a.seed);
    out.record_seed("seed", seed, generated);
    let mut names: Vec<PathBuf> = fs::read_dir(&a.input)
        .map_err(|e| Error::io(&a.input, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let n = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            n.ends_with(".lvol") && !n.ends_with(".labels.lvol")
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::invalid(format!(
            "{} holds no .lvol intensity volumes",
            a.input.display()
        )));
    }
    let mut sources = Vec::new();
    let mut plane_spacing = Vec::new();
    for image_path in &names {
        let stem = image_path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap()
            .trim_end_matches(".lvol")
            .to_string();
        let label_path = a.input.join(format!("{stem}.labels.lvol"));
        out.record_input(image_path)?;
        out.record_input(&label_path)?;
        let image = load_scalar(image_path)?;
        let labels = load_labels(&label_path)?;
        image
            .geometry()
            .ensure_same(labels.geometry(), &format!("labels of {stem}"))?;
        let amplitude = image.max_amplitude();
        let is = extract_slices(&image, a.orientation);
        let ls = extract_slices(&labels, a.orientation);
        let (ua, va, _) = a.orientation.axes();
        let sp = image.spacing();
        for (k, (img, lab)) in is.slices.into_iter().zip(ls.slices).enumerate() {
            sources.push(SourceImage {
                id: format!("{stem}_{}{k:03}", &a.orientation.name()[..1]),
                image: img,
                labels: lab,
                amplitude,
            });
            plane_spacing.push([sp[ua], sp[va], sp[3 - ua - va]]);
        }
    }
    let cfg = AugmentConfig::with_seed(seed);
    let items = augment::expand_dataset(&sources, &cfg)?;
    for (k, item) in items.iter().enumerate() {
        let spacing = plane_spacing[k / augment::OUTPUTS_PER_IMAGE];
        let g = Geometry::new([item.image.width, item.image.height, 1], spacing)?;
        let name = &item.provenance.output;
        out.save(&format!("slices/{name}.lvol"), &Volume::new(g, item.image.data.clone())?)?;
        out.save(
            &format!("slices/{name}.labels.lvol"),
            &Volume::new(g, item.labels.data.clone())?,
        )?;
    }
    out.write_with("provenance.csv", |buf| augment::write_provenance_csv(buf, &items))?;
    out.finish()
}

fn simulate(a: SimulateArgs, args: &[String]) -> Result<PathBuf> {
    if a.dims.len() != 3 || a.spacing.len() != 3 {
        return Err(Error::invalid("--dims and --spacing take three comma-separated values"));
    }
    let mut out = OutDir::create(&a.out.out, "simulate", args)?;
    let (seed, generated) = resolve_seed(&a.seed);
    out.record_seed("seed", seed, generated);
    let spec = PhantomSpec {
        dims: [a.dims[0], a.dims[1], a.dims[2]],
        spacing: [a.spacing[0], a.spacing[1], a.spacing[2]],
        n_lesions: a.lesions,
        radius: (a.radius_min, a.radius_max),
        shell: a.shell,
        seed,
    };
    let (image, gt) = make_phantom(&spec)?;
    let nm = NoiseModel::preset(a.noise_preset, seed);
    let bundle = simulate_bundle(&gt, &nm)?;
    out.save("phantom.lvol", &image)?;
    out.save("gt.lvol", &gt)?;
    for (o, f, v) in bundle.iter() {
        out.save(&bundle_file(o, f), v)?;
    }
    out.write_json(
        "simulation.json",
        &serde_json::json!({ "phantom": spec, "noise_preset": a.noise_preset, "noise_model": nm }),
    )?;
    out.finish()
}

#[derive(Serialize)]
struct BestParams {
    class: Label,
    t_low: f64,
    t_high: f64,
    objective: f64,
    iteration: usize,
    evaluations: usize,
}

fn optimize(a: OptimizeArgs, args: &[String]) -> Result<PathBuf> {
    let mut out = OutDir::create(&a.out.out, "optimize", args)?;
    let (seed, generated) = resolve_seed(&a.seed);
    out.record_seed("seed", seed, generated);
    out.record_input(&a.volume)?;
    let volume = load_scalar(&a.volume)?;
    let gt = labels_in(&mut out, &a.gt)?;
    volume.geometry().ensure_same(gt.geometry(), "optimize")?;
    let space = bayesopt::threshold_space(a.resolution)?;
    let cfg = OptimizerConfig {
        n_initial: a.n_initial,
        budget: a.budget,
        seed,
        ..OptimizerConfig::default()
    };
    let mut failure = None;
    let result = bayesopt::optimize(
        |x| match bayesopt::objective_one_minus_iou(x, &volume, &gt, a.class) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &space,
        &cfg,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    out.write_with("history.csv", |buf| result.write_history_csv(buf))?;
    let b = &result.best;
    out.write_json(
        "best.json",
        &BestParams {
            class: a.class,
            t_low: b.x[0].min(b.x[1]),
            t_high: b.x[0].max(b.x[1]),
            objective: b.f,
            iteration: b.iteration,
            evaluations: result.history.len(),
        },
    )?;
    out.finish()
}

fn report(a: ReportArgs, args: &[String]) -> Result<PathBuf> {
    if a.summaries.is_empty() && !a.per_lesion && a.matrix.is_empty() {
        return Err(Error::invalid("report needs --summary, --per-lesion or --matrix"));
    }
    let mut out = OutDir::create(&a.out.out, "report", args)?;
    if !a.summaries.is_empty() {
        let mut rows = Vec::new();
        for s in &a.summaries {
            let (name, path) = named_path(s)?;
            let reports = read_reports(&mut out, &path, a.metric.units)?;
            rows.push((name, stats::aggregate(&reports)?));
        }
        out.write_with("summary.csv", |buf| stats::write_summary_csv(buf, &rows))?;
    }
    if a.per_lesion {
        let pred = labels_in(&mut out, a.pred.as_ref().unwrap())?;
        let gt = labels_in(&mut out, a.gt.as_ref().unwrap())?;
        let opts = LesionOptions {
            margin: a.margin,
            connectivity: a.metric.connectivity,
        };
        let mut rows = per_lesion_metrics(&pred, &gt, a.class, &opts)?;
        rows.sort_by(|x, y| x.volume_mm3.total_cmp(&y.volume_mm3).then(x.lesion.cmp(&y.lesion)));
        let k = a.metric.units.from_mm();
        out.write_with("per_lesion.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["lesion_volume_mm3", "dice", "f1", "sd"])?;
            for m in &rows {
                w.write_record([
                    m.volume_mm3.to_string(),
                    m.dice.to_string(),
                    m.f1.to_string(),
                    crate::metrics::format_value(m.sd.map(|d| d * k)),
                ])?;
            }
            w.flush().map_err(|e| Error::io("<csv>", e))
        })?;
    }
    if !a.matrix.is_empty() {
        let raters = load_named(&mut out, &a.matrix)?;
        let m = all_vs_all(&raters, a.class, &Metric::ALL, &report_options(&a.metric))?;
        out.write_with("matrix.csv", |buf| m.write_csv(buf))?;
    }
    out.finish()
}
