//! Axial slices of a phantom expanded five-fold.

use lesionfuse::augment::{expand_dataset, write_provenance_csv, AugmentConfig, SourceImage};
use lesionfuse::simclf::{make_phantom, PhantomSpec};
use lesionfuse::volume::{extract_slices, Orientation};

fn main() -> lesionfuse::Result<()> {
    let (image, labels) = make_phantom(&PhantomSpec { seed: 5, ..PhantomSpec::default() })?;
    let amplitude = image.max_amplitude();
    let imgs = extract_slices(&image, Orientation::Axial);
    let labs = extract_slices(&labels, Orientation::Axial);
    let sources: Vec<SourceImage> = imgs
        .slices
        .into_iter()
        .zip(labs.slices)
        .enumerate()
        .take(3)
        .map(|(k, (image, labels))| SourceImage { id: format!("z{k:02}"), image, labels, amplitude })
        .collect();
    let out = expand_dataset(&sources, &AugmentConfig::with_seed(9))?;
    let mut csv = Vec::new();
    write_provenance_csv(&mut csv, &out)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
