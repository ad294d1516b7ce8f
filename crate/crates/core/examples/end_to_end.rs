//! simulate -> fuse -> eval through the command-line entry point.

fn main() {
    let dir = std::env::temp_dir().join("lesionfuse_end_to_end");
    let d = dir.to_str().unwrap();
    let steps = [
        format!("simulate --seed 42 --noise-preset med --out {d}/sim"),
        format!("fuse --bundle {d}/sim --out {d}/fuse"),
        format!("eval --pred {d}/fuse/fused.lvol --gt {d}/sim/gt.lvol --class lesion --out {d}/eval_fused"),
        format!("eval --pred {d}/sim/axial_in.lvol --gt {d}/sim/gt.lvol --class lesion --out {d}/eval_axial"),
    ];
    for s in &steps {
        let args = std::iter::once("lesionfuse").chain(s.split_whitespace());
        let code = lesionfuse::cli::run(args);
        assert_eq!(code, 0, "{s}");
    }
    for name in ["eval_axial", "eval_fused"] {
        let csv = std::fs::read_to_string(dir.join(name).join("report.csv")).unwrap();
        println!("{name}:\n{csv}");
    }
}
