//! Per-centre 3/1/1 splits: one seeded draw and the full fold count.

use lesionfuse::stats::{enumerate_folds, read_manifest, stratified_split, Quota, Role};

fn main() -> lesionfuse::Result<()> {
    let mut csv = String::from("subject_id,centre\n");
    for centre in ["01", "07", "08"] {
        for i in 1..=5 {
            csv.push_str(&format!("{centre}{i:02},{centre}\n"));
        }
    }
    let subjects = read_manifest(csv.as_bytes())?;
    let plan = stratified_split(&subjects, &Quota::default(), 2024)?;
    for role in [Role::Train, Role::Validation, Role::Test] {
        let ids = plan.subjects(role);
        println!("{role:?}: {}", ids.join(" "));
    }
    println!("distinct folds: {}", enumerate_folds(&subjects, &Quota::default())?.len());
    Ok(())
}
