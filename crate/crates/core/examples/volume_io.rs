//! Writes a label volume, reads it back, and decodes a gzipped copy.

use std::io::Write;

use flate2::{write::GzEncoder, Compression};
use lesionfuse::volume::io::{decode, encode_lvol, load_labels, save_volume};
use lesionfuse::volume::{Geometry, Label, LabelVolume};

fn main() -> lesionfuse::Result<()> {
    let g = Geometry::new([8, 6, 4], [0.75, 0.75, 3.0])?;
    let v = LabelVolume::from_fn(g, |[x, y, _]| if x + y < 4 { Label::Lesion } else { Label::Background })?;
    let path = std::env::temp_dir().join("lesionfuse_example.lvol");
    save_volume(&v, &path)?;
    let back = load_labels(&path)?;
    println!("{} -> dims {:?}, spacing {:?}, equal: {}", path.display(), back.dims(), back.spacing(), back == v);

    let mut gz = GzEncoder::new(Vec::new(), Compression::default());
    gz.write_all(&encode_lvol(&v)).unwrap();
    let raw = decode(&gz.finish().unwrap())?;
    println!("gzip copy decodes to {:?}", raw.geometry.dims);
    std::fs::remove_file(&path).ok();
    Ok(())
}
