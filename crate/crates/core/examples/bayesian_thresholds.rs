//! Threshold search on a phantom: Bayesian optimisation against random
//! search with the same budget.

use lesionfuse::bayesopt::{objective_one_minus_iou, optimize, random_search, threshold_space, OptimizerConfig};
use lesionfuse::simclf::{make_phantom, PhantomSpec};
use lesionfuse::volume::Label;

fn main() -> lesionfuse::Result<()> {
    let (image, gt) = make_phantom(&PhantomSpec { seed: 13, ..PhantomSpec::default() })?;
    let space = threshold_space(0.01)?;
    let f = |x: &[f64]| objective_one_minus_iou(x, &image, &gt, Label::Lesion).unwrap_or(f64::NAN);

    let bo = optimize(f, &space, &OptimizerConfig { budget: 25, seed: 1, ..OptimizerConfig::default() })?;
    let rs = random_search(f, &space, 25, 1)?;
    println!("bayesian: thresholds {:?}, 1 - IoU = {:.4} (trial {})", bo.best.x, bo.best.f, bo.best.iteration);
    println!("random:   thresholds {:?}, 1 - IoU = {:.4}", rs.best.x, rs.best.f);
    Ok(())
}
