//! Seven raters plus a consensus mask become a ternary ground truth.

use lesionfuse::consensus::{build_ternary_consensus, RaterSet, DEFAULT_THRESHOLD};
use lesionfuse::volume::{Geometry, Label, Mask};
use rand::Rng;

fn main() -> lesionfuse::Result<()> {
    let g = Geometry::new([24, 24, 12], [1.0, 1.0, 3.0])?;
    let mut rng = lesionfuse::rng::stream(1, 0);
    let core = |[x, y, z]: [usize; 3]| {
        let d2 = (x as f64 - 12.0).powi(2) + (y as f64 - 12.0).powi(2) + (3.0 * (z as f64 - 6.0)).powi(2);
        d2.sqrt()
    };
    // Each rater draws the same blob with a personal radius.
    let raters: Vec<Mask> = (0..7)
        .map(|_| {
            let r = rng.random_range(4.0..7.0);
            Mask::from_fn(g, |c| core(c) <= r)
        })
        .collect::<Result<_, _>>()?;
    let consensus = Mask::from_fn(g, |c| core(c) <= 5.0)?;

    let rs = RaterSet::new("demo", raters, consensus)?;
    let gt = build_ternary_consensus(&rs, DEFAULT_THRESHOLD)?;
    for l in Label::ALL {
        println!("{l:>12}: {} voxels", gt.count(l));
    }
    Ok(())
}
