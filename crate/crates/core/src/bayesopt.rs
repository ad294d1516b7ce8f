//! Bayesian optimisation over a quantised box.
//!
//! A Latin-hypercube design seeds the history. Each later point maximises
//! expected improvement under a Gaussian-process surrogate
//! (squared-exponential kernel on inputs scaled to `[0, 1]`, standardised
//! outputs) over random grid candidates that have not been evaluated yet.

use std::collections::HashSet;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::metrics::{confusion_counts, voxel_scores};
use crate::rng::{self, Rng};
use crate::volume::{Label, LabelVolume, ScalarVolume};

const GRID_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub lower: f64,
    pub upper: f64,
    pub resolution: f64,
}

impl Dimension {
    pub fn new(lower: f64, upper: f64, resolution: f64) -> Result<Self> {
        let d = Dimension {
            lower,
            upper,
            resolution,
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::invalid(format!(
                "dimension bounds [{}, {}] need lower < upper",
                self.lower, self.upper
            )));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::invalid(format!("resolution {} must be positive", self.resolution)));
        }
        let n = (self.upper - self.lower) / self.resolution;
        if (n - n.round()).abs() > GRID_TOL * n.max(1.0) {
            return Err(Error::invalid(format!(
                "resolution {} does not divide [{}, {}]",
                self.resolution, self.lower, self.upper
            )));
        }
        Ok(())
    }

    /// Number of grid points.
    pub fn points(&self) -> usize {
        ((self.upper - self.lower) / self.resolution).round() as usize + 1
    }

    /// Rounded to 1e-12, like the augmentation grids.
    pub fn value(&self, k: usize) -> f64 {
        ((self.lower + k as f64 * self.resolution) * 1e12).round() / 1e12
    }

    /// Nearest grid index, clamped to the bounds.
    pub fn snap(&self, x: f64) -> usize {
        let k = ((x - self.lower) / self.resolution).round();
        k.clamp(0.0, (self.points() - 1) as f64) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("search space has no dimensions"));
        }
        for d in &dims {
            d.validate()?;
        }
        Ok(SearchSpace { dims })
    }

    pub fn grid_size(&self) -> f64 {
        self.dims.iter().map(|d| d.points() as f64).product()
    }

    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        self.dims.iter().zip(idx).map(|(d, &k)| d.value(k)).collect()
    }

    /// Grid point as fractions of each range.
    fn unit(&self, idx: &[usize]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(idx)
            .map(|(d, &k)| k as f64 / (d.points() - 1) as f64)
            .collect()
    }

    /// Whether `x` is inside the bounds and on the grid.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims.len()
            && self.dims.iter().zip(x).all(|(d, &v)| {
                let k = d.snap(v);
                (d.value(k) - v).abs() <= 1e-9 * d.resolution.max(1.0)
                    && v >= d.lower - 1e-12
                    && v <= d.upper + 1e-12
            })
    }

    fn random_index(&self, rng: &mut Rng) -> Vec<usize> {
        self.dims.iter().map(|d| rng.random_range(0..d.points())).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Latin-hypercube points evaluated before the surrogate is used.
    pub n_initial: usize,
    /// Total objective evaluations.
    pub budget: usize,
    /// Random candidates scored by the acquisition function per step.
    pub n_candidates: usize,
    /// Kernel length scale as a fraction of each range.
    pub length_scale: f64,
    /// Added to the kernel diagonal.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            n_initial: 5,
            budget: 30,
            n_candidates: 1024,
            length_scale: 0.2,
            jitter: 1e-6,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("budget must be at least 1"));
        }
        if self.n_initial == 0 || self.n_initial > self.budget {
            return Err(Error::invalid(format!(
                "n_initial {} must be in 1..={}",
                self.n_initial, self.budget
            )));
        }
        if self.n_candidates == 0 {
            return Err(Error::invalid("n_candidates must be positive"));
        }
        if !(self.length_scale > 0.0 && self.jitter >= 0.0) {
            return Err(Error::invalid("length scale must be positive and jitter non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub iteration: usize,
    pub x: Vec<f64>,
    /// Objective value; `+inf` when the objective returned a non-finite value.
    pub f: f64,
    pub non_finite: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best: Trial,
    /// May be shorter than the budget if every grid point was evaluated.
    pub history: Vec<Trial>,
}

impl OptimizationResult {
    /// Best objective value after each trial.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.history
            .iter()
            .scan(f64::INFINITY, |b, t| {
                *b = b.min(t.f);
                Some(*b)
            })
            .collect()
    }

    /// `iter,x0,…,f,best_f` rows.
    pub fn write_history_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.best.x.len();
        let mut header = vec!["iter".to_string()];
        header.extend((0..d).map(|k| format!("x{k}")));
        header.extend(["f".to_string(), "best_f".to_string()]);
        w.write_record(&header)?;
        for (t, b) in self.history.iter().zip(self.best_so_far()) {
            let mut row = vec![t.iteration.to_string()];
            row.extend(t.x.iter().map(|v| format!("{v}")));
            row.extend([format!("{}", t.f), format!("{b}")]);
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// `EI = (best - μ) Φ(z) + σ φ(z)`, `z = (best - μ) / σ`, for minimisation.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    if std <= 0.0 {
        return (best - mean).max(0.0);
    }
    let n = Normal::standard();
    let z = (best - mean) / std;
    ((best - mean) * n.cdf(z) + std * n.pdf(z)).max(0.0)
}

struct History<'a> {
    space: &'a SearchSpace,
    seen: HashSet<Vec<usize>>,
    idx: Vec<Vec<usize>>,
    trials: Vec<Trial>,
}

impl History<'_> {
    fn exhausted(&self) -> bool {
        self.seen.len() as f64 >= self.space.grid_size()
    }

    fn evaluate(&mut self, idx: Vec<usize>, objective: &mut impl FnMut(&[f64]) -> f64) {
        let x = self.space.point(&idx);
        let raw = objective(&x);
        let non_finite = !raw.is_finite();
        self.trials.push(Trial {
            iteration: self.trials.len(),
            x,
            f: if non_finite { f64::INFINITY } else { raw },
            non_finite,
        });
        self.seen.insert(idx.clone());
        self.idx.push(idx);
    }

    /// A random unseen grid point, or `None` when the grid is exhausted.
    fn fresh(&self, rng: &mut Rng) -> Option<Vec<usize>> {
        if self.exhausted() {
            return None;
        }
        for _ in 0..10_000 {
            let c = self.space.random_index(rng);
            if !self.seen.contains(&c) {
                return Some(c);
            }
        }
        self.unseen_points().into_iter().next()
    }

    fn unseen_points(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut idx = vec![0usize; self.space.dims.len()];
        loop {
            if !self.seen.contains(&idx) {
                out.push(idx.clone());
            }
            let mut a = 0;
            loop {
                if a == idx.len() {
                    return out;
                }
                idx[a] += 1;
                if idx[a] < self.space.dims[a].points() {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }

    fn into_result(self) -> OptimizationResult {
        let best = self
            .trials
            .iter()
            .min_by(|a, b| a.f.total_cmp(&b.f))
            .cloned()
            .expect("at least one trial");
        OptimizationResult {
            best,
            history: self.trials,
        }
    }
}

fn latin_hypercube(space: &SearchSpace, n: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let columns: Vec<Vec<usize>> = space
        .dims
        .iter()
        .map(|_| {
            let mut strata: Vec<usize> = (0..n).collect();
            strata.shuffle(rng);
            strata
        })
        .collect();
    (0..n)
        .map(|i| {
            space
                .dims
                .iter()
                .zip(&columns)
                .map(|(dim, col)| {
                    let u = (col[i] as f64 + rng.random::<f64>()) / n as f64;
                    dim.snap(dim.lower + u * (dim.upper - dim.lower))
                })
                .collect()
        })
        .collect()
}

struct Surrogate {
    xs: Vec<Vec<f64>>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
    length: f64,
    y_mean: f64,
    y_scale: f64,
}

impl Surrogate {
    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| ((x - y) / self.length).powi(2)).sum();
        (-0.5 * d2).exp()
    }

    fn fit(xs: Vec<Vec<f64>>, ys: &[f64], length: f64, jitter: f64) -> Result<Surrogate> {
        let n = xs.len();
        let y_mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let y = DVector::from_iterator(n, ys.iter().map(|v| (v - y_mean) / y_scale));
        let mut s = Surrogate {
            xs,
            chol: Cholesky::new(DMatrix::identity(1, 1)).unwrap(),
            alpha: DVector::zeros(n),
            length,
            y_mean,
            y_scale,
        };
        let mut jit = jitter.max(1e-12);
        loop {
            let k = DMatrix::from_fn(n, n, |i, j| {
                s.kernel(&s.xs[i], &s.xs[j]) + if i == j { jit } else { 0.0 }
            });
            if let Some(c) = Cholesky::new(k) {
                s.alpha = c.solve(&y);
                s.chol = c;
                return Ok(s);
            }
            jit *= 10.0;
            if jit > 1.0 {
                return Err(Error::invalid("kernel matrix is not positive definite"));
            }
        }
    }

    /// Posterior mean and standard deviation in the original units.
    fn predict(&self, x: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(self.xs.len(), self.xs.iter().map(|p| self.kernel(p, x)));
        let mean = ks.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&ks).unwrap_or_else(|| ks.clone());
        let var = (1.0 - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}

/// Minimises `objective` over the grid of `space`.
pub fn optimize(
    mut objective: impl FnMut(&[f64]) -> f64,
    space: &SearchSpace,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, 0);
    let mut h = History {
        space,
        seen: HashSet::new(),
        idx: Vec::new(),
        trials: Vec::new(),
    };
    for p in latin_hypercube(space, cfg.n_initial, &mut rng) {
        let p = if h.seen.contains(&p) {
            match h.fresh(&mut rng) {
                Some(q) => q,
                None => break,
            }
        } else {
            p
        };
        h.evaluate(p, &mut objective);
    }

    while h.trials.len() < cfg.budget && !h.exhausted() {
        let finite_max = h
            .trials
            .iter()
            .filter(|t| !t.non_finite)
            .map(|t| t.f)
            .fold(f64::NEG_INFINITY, f64::max);
        let fill = if finite_max.is_finite() { finite_max } else { 1.0 };
        let ys: Vec<f64> = h
            .trials
            .iter()
            .map(|t| if t.non_finite { fill } else { t.f })
            .collect();
        let best = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let xs: Vec<Vec<f64>> = h.idx.iter().map(|i| space.unit(i)).collect();
        let gp = Surrogate::fit(xs, &ys, cfg.length_scale, cfg.jitter)?;

        let mut candidates: Vec<Vec<usize>> = (0..cfg.n_candidates)
            .map(|_| space.random_index(&mut rng))
            .filter(|c| !h.seen.contains(c))
            .collect();
        if candidates.is_empty() {
            candidates = if space.grid_size() <= 1e5 {
                h.unseen_points()
            } else {
                h.fresh(&mut rng).into_iter().collect()
            };
        }
        let mut pick: Option<(f64, Vec<usize>)> = None;
        for c in candidates {
            let (m, s) = gp.predict(&space.unit(&c));
            let ei = expected_improvement(m, s, best);
            if pick.as_ref().is_none_or(|(e, _)| ei > *e) {
                pick = Some((ei, c));
            }
        }
        match pick {
            Some((_, c)) => h.evaluate(c, &mut objective),
            None => break,
        }
    }
    Ok(h.into_result())
}

/// Uniform sampling of distinct grid points; the baseline for [`optimize`].
pub fn random_search(
    mut objective: impl FnMut(&[f64]) -> f64,
    space: &SearchSpace,
    budget: usize,
    seed: u64,
) -> Result<OptimizationResult> {
    if budget == 0 {
        return Err(Error::invalid("budget must be at least 1"));
    }
    let mut rng = rng::stream(seed, 1);
    let mut h = History {
        space,
        seen: HashSet::new(),
        idx: Vec::new(),
        trials: Vec::new(),
    };
    while h.trials.len() < budget {
        match h.fresh(&mut rng) {
            Some(p) => h.evaluate(p, &mut objective),
            None => break,
        }
    }
    Ok(h.into_result())
}

/// Min-max normalises `v`, then labels `>= t_high` Lesion and
/// `[t_low, t_high)` Uncertainty.
pub fn threshold_segmenter(v: &ScalarVolume, t_low: f64, t_high: f64) -> Result<LabelVolume> {
    if !(0.0 <= t_low && t_low <= t_high && t_high <= 1.0) {
        return Err(Error::invalid(format!(
            "thresholds must satisfy 0 <= t_low <= t_high <= 1, got ({t_low}, {t_high})"
        )));
    }
    let (lo, hi) = v
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let range = (hi - lo) as f64;
    Ok(v.map(|x| {
        let n = if range > 0.0 { (x - lo) as f64 / range } else { 0.0 };
        if n >= t_high {
            Label::Lesion
        } else if n >= t_low {
            Label::Uncertainty
        } else {
            Label::Background
        }
    }))
}

/// `1 - IoU` of the thresholded volume against `gt` for `class`.
/// `params` is `(t_a, t_b)`; the smaller is used as the lower threshold.
/// Both masks empty counts as a perfect match.
pub fn objective_one_minus_iou(
    params: &[f64],
    v: &ScalarVolume,
    gt: &LabelVolume,
    class: Label,
) -> Result<f64> {
    let [a, b] = params else {
        return Err(Error::invalid(format!(
            "threshold segmenter takes 2 parameters, got {}",
            params.len()
        )));
    };
    let seg = threshold_segmenter(v, a.min(*b), a.max(*b))?;
    let c = confusion_counts(&seg.indicator(class), &gt.indicator(class))?;
    Ok(1.0 - voxel_scores(&c).iou.unwrap_or(1.0))
}

/// The two-threshold search space on `[0, 1]` with the given resolution.
pub fn threshold_space(resolution: f64) -> Result<SearchSpace> {
    let d = Dimension::new(0.0, 1.0, resolution)?;
    SearchSpace::new(vec![d, d])
}
