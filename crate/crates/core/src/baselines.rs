//! Real-image baselines and the learning-rate / epoch grid they are judged on.
//!
//! Every baseline produces ordinary labeled images that are fed through the
//! same step machinery as distilled data, with a constant rate per grid cell.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::data::{subsample, LabeledDataset};
use crate::distillation::{apply_steps, DistilledStep, StepTargets};
use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamVector};
use crate::objectives::Objective;
use crate::rng::{self, streams};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    RandomReal,
    OptimizedReal,
    KMeans,
    AverageReal,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::RandomReal => "random_real",
            BaselineKind::OptimizedReal => "optimized_real",
            BaselineKind::KMeans => "kmeans",
            BaselineKind::AverageReal => "average_real",
        }
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// `per_class` real images per class, uniformly without replacement.
pub fn select_random_real(
    data: &LabeledDataset,
    per_class: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    subsample(data, per_class, seed)
}

/// Split class-interleaved images into `steps` consecutive batches.
pub fn split_steps(images: &LabeledDataset, steps: usize) -> Result<Vec<DistilledStep>> {
    if steps == 0 || !images.len().is_multiple_of(steps) {
        return Err(Error::Config(alloc::format!(
            "{} images do not split into {steps} equal steps",
            images.len()
        )));
    }
    let per = images.len() / steps;
    (0..steps)
        .map(|s| {
            let rows: Vec<usize> = (s * per..(s + 1) * per).collect();
            let batch = images.select(&rows)?;
            Ok(DistilledStep {
                inputs: batch.inputs().clone(),
                targets: StepTargets::Classes(batch.labels().to_vec()),
            })
        })
        .collect()
}

/// The same images reused as every one of `steps` batches.
pub fn repeat_steps(images: &LabeledDataset, steps: usize) -> Vec<DistilledStep> {
    let step = DistilledStep {
        inputs: images.inputs().clone(),
        targets: StepTargets::Classes(images.labels().to_vec()),
    };
    vec![step; steps]
}

/// Elementwise mean of the given rows, summed in index order.
fn mean_rows(x: &Tensor, rows: &[usize]) -> Vec<f64> {
    let dim = x.shape()[1];
    let mut acc = vec![0.0; dim];
    for &r in rows {
        for (a, v) in acc.iter_mut().zip(x.row(r)) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// One mean image per class, in class order.
pub fn average_real(data: &LabeledDataset) -> Result<LabeledDataset> {
    let by_class = data.class_indices();
    let mut out = Vec::with_capacity(by_class.len() * data.dim());
    for (class, rows) in by_class.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::EmptyClass(class));
        }
        out.extend(mean_rows(data.inputs(), rows));
    }
    LabeledDataset::new(
        Tensor::matrix(by_class.len(), data.dim(), out)?,
        (0..by_class.len()).collect(),
        data.num_classes(),
    )
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub const KMEANS_MAX_ITERS: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;

/// Lloyd's algorithm with k-means++ seeding on the given rows, squared
/// Euclidean distance. Empty clusters are re-seeded at the point farthest
/// from its centroid.
pub fn kmeans(x: &Tensor, rows: &[usize], k: usize, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    let point = |i: usize| x.row(rows[i]);
    let n = rows.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.push(point(first).to_vec());
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(point(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.push(point(pick).to_vec());
        let c = centroids.last().expect("just pushed");
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(point(i), c));
        }
    }

    for _ in 0..KMEANS_MAX_ITERS {
        let assign: Vec<(usize, f64)> = (0..n).map(|i| nearest(point(i), &centroids)).collect();
        let mut members = vec![Vec::new(); k];
        for (i, &(c, _)) in assign.iter().enumerate() {
            members[c].push(rows[i]);
        }
        let mut taken = vec![false; n];
        let mut next = Vec::with_capacity(k);
        for (c, m) in members.iter().enumerate() {
            if m.is_empty() {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| assign[a].1.total_cmp(&assign[b].1).then(b.cmp(&a)))
                    .unwrap_or(0);
                taken[far] = true;
                next.push(point(far).to_vec());
            } else {
                next.push(mean_rows(x, m));
            }
            let _ = c;
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| libm::sqrt(sq_dist(a, b)))
            .fold(0.0, f64::max);
        centroids = next;
        if shift <= KMEANS_TOL {
            break;
        }
    }
    centroids
}

/// `k` centroids per class, class-interleaved (row `i` has class `i % C`).
pub fn kmeans_centroids(data: &LabeledDataset, k: usize, seed: u64) -> Result<LabeledDataset> {
    let mut rng = rng::stream(seed, streams::KMEANS);
    let by_class = data.class_indices();
    let mut per_class = Vec::with_capacity(by_class.len());
    for (class, rows) in by_class.iter().enumerate() {
        if rows.len() < k || k == 0 {
            return Err(Error::InsufficientData {
                class,
                available: rows.len(),
                requested: k,
            });
        }
        per_class.push(kmeans(data.inputs(), rows, k, &mut rng));
    }
    let c = by_class.len();
    let mut out = Vec::with_capacity(k * c * data.dim());
    for j in 0..k {
        for centroids in &per_class {
            out.extend_from_slice(&centroids[j]);
        }
    }
    LabeledDataset::new(
        Tensor::matrix(k * c, data.dim(), out)?,
        (0..k * c).map(|i| i % c).collect(),
        data.num_classes(),
    )
}

/// Within-class sum of squared distances to the nearest centroid.
pub fn inertia(data: &LabeledDataset, centroids: &LabeledDataset) -> f64 {
    let mut total = 0.0;
    for (i, &y) in data.labels().iter().enumerate() {
        let best = centroids
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == y)
            .map(|(j, _)| sq_dist(data.inputs().row(i), centroids.inputs().row(j)))
            .fold(f64::INFINITY, f64::min);
        total += best;
    }
    total
}

/// Learning rates and epoch counts to search.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lrs: Vec<f64>,
    pub epochs: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            lrs: vec![0.001, 0.003, 0.01, 0.03, 0.1, 0.3],
            epochs: vec![1, 3, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub lr: f64,
    pub epochs: usize,
    /// True for the cell using the distilled method's learned rate.
    pub learned: bool,
    /// One accuracy per (set, model) pair, set-major.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub cells: Vec<GridCell>,
    pub best: usize,
}

impl GridResult {
    pub fn winner(&self) -> &GridCell {
        &self.cells[self.best]
    }
}

/// Accuracy of every `(set, model)` pair after applying `sets[i]` with a
/// constant rate for `epochs` passes.
pub fn evaluate_schedule(
    model: &ModelSpec,
    sets: &[Vec<DistilledStep>],
    pool: &[ParamVector],
    testset: &LabeledDataset,
    lr: f64,
    epochs: usize,
    objective: &Objective,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(sets.len() * pool.len());
    for steps in sets {
        let rates = vec![lr; steps.len() * epochs];
        for theta0 in pool {
            let trained = apply_steps(model, theta0, steps, &rates, epochs, objective)?;
            out.push(model.evaluate(&trained, testset)?);
        }
    }
    Ok(out)
}

/// Evaluate every `(lr, epochs)` combination (plus the learned rate, when
/// given, listed first) over all sets and pool models; the winner is the
/// highest mean accuracy, earliest cell on ties. Diverging cells score 0.
pub fn baseline_grid_eval(
    model: &ModelSpec,
    sets: &[Vec<DistilledStep>],
    pool: &[ParamVector],
    testset: &LabeledDataset,
    grid: &Grid,
    learned_lr: Option<f64>,
    objective: &Objective,
) -> Result<GridResult> {
    if pool.is_empty() || sets.is_empty() {
        return Err(Error::Config(
            "grid evaluation needs a non-empty pool and at least one set".into(),
        ));
    }
    let lrs: Vec<(f64, bool)> = learned_lr
        .map(|lr| (lr, true))
        .into_iter()
        .chain(grid.lrs.iter().map(|&lr| (lr, false)))
        .collect();
    let mut cells = Vec::with_capacity(lrs.len() * grid.epochs.len());
    for &(lr, learned) in &lrs {
        for &epochs in &grid.epochs {
            let accuracies =
                match evaluate_schedule(model, sets, pool, testset, lr, epochs, objective) {
                    Ok(a) => a,
                    Err(e) if e.is_numeric() => vec![0.0; sets.len() * pool.len()],
                    Err(e) => return Err(e),
                };
            let (mean, std) = mean_std(&accuracies);
            cells.push(GridCell {
                lr,
                epochs,
                learned,
                accuracies,
                mean,
                std,
            });
        }
    }
    let best = best_cell(&cells);
    Ok(GridResult { cells, best })
}

fn best_cell(cells: &[GridCell]) -> usize {
    let mut best = 0;
    for (i, c) in cells.iter().enumerate() {
        if c.mean > cells[best].mean {
            best = i;
        }
    }
    best
}

/// Settings for picking the best random real sets.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedRealConfig {
    pub per_class: usize,
    pub steps: usize,
    pub candidates: usize,
    pub keep: usize,
    pub probe_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for OptimizedRealConfig {
    fn default() -> Self {
        OptimizedRealConfig {
            per_class: 1,
            steps: 1,
            candidates: 50,
            keep: 10,
            probe_size: 1024,
            lr: 0.1,
            epochs: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    pub images: LabeledDataset,
    pub score: f64,
    pub candidate: usize,
}

/// Mean probe accuracy over `eval_models` after training on `images`.
pub fn score_set(
    model: &ModelSpec,
    images: &LabeledDataset,
    eval_models: &[ParamVector],
    probe: &LabeledDataset,
    cfg: &OptimizedRealConfig,
    objective: &Objective,
) -> Result<f64> {
    let steps = split_steps(images, cfg.steps)?;
    let accs = evaluate_schedule(
        model,
        &[steps],
        eval_models,
        probe,
        cfg.lr,
        cfg.epochs,
        objective,
    )?;
    Ok(mean_std(&accs).0)
}

/// Sample `candidates` random real sets, score each on a random probe subset
/// of `data` across `eval_models`, and keep the `keep` best (best first).
pub fn select_optimized_real(
    model: &ModelSpec,
    data: &LabeledDataset,
    eval_models: &[ParamVector],
    cfg: &OptimizedRealConfig,
    objective: &Objective,
) -> Result<Vec<ScoredSet>> {
    if eval_models.is_empty() || cfg.keep == 0 || cfg.keep > cfg.candidates {
        return Err(Error::Config(
            "optimized real needs eval models and 1 <= keep <= candidates".into(),
        ));
    }
    let mut rng = rng::stream(cfg.seed, streams::PROBE);
    let probe_rows =
        rand::seq::index::sample(&mut rng, data.len(), cfg.probe_size.min(data.len())).into_vec();
    let probe = data.select(&probe_rows)?;
    let mut scored = Vec::with_capacity(cfg.candidates);
    for c in 0..cfg.candidates {
        let images = select_random_real(data, cfg.per_class, cfg.seed.wrapping_add(1 + c as u64))?;
        let score = score_set(model, &images, eval_models, &probe, cfg, objective)?;
        scored.push(ScoredSet {
            images,
            score,
            candidate: c,
        });
    }
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.candidate.cmp(&b.candidate))
    });
    scored.truncate(cfg.keep);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> LabeledDataset {
        let pts = [
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.2],
            [5.0, 5.0],
            [5.2, 5.1],
            [1.0, 1.0],
            [1.1, 0.9],
            [9.0, 9.0],
        ];
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1];
        LabeledDataset::new(
            Tensor::matrix(8, 2, pts.iter().flatten().copied().collect()).unwrap(),
            labels,
            2,
        )
        .unwrap()
    }

    #[test]
    fn k1_equals_average() {
        let data = blobs();
        assert_eq!(
            kmeans_centroids(&data, 1, 4).unwrap(),
            average_real(&data).unwrap()
        );
    }

    #[test]
    fn k_equal_class_size_recovers_points() {
        let data = blobs();
        let c = kmeans_centroids(&data, 3, 1).unwrap();
        let class1: Vec<&[f64]> = (0..6)
            .filter(|i| i % 2 == 1)
            .map(|i| c.inputs().row(i))
            .collect();
        for r in [5, 6, 7] {
            assert!(class1.iter().any(|p| *p == data.inputs().row(r)));
        }
    }

    #[test]
    fn average_of_two_is_midpoint() {
        let data = LabeledDataset::new(
            Tensor::matrix(2, 2, vec![0.0, 1.0, 1.0, 3.0]).unwrap(),
            vec![0, 0],
            1,
        )
        .unwrap();
        assert_eq!(average_real(&data).unwrap().inputs().data(), &[0.5, 2.0]);
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert_eq!(mean_std(&[0.5]).1, 0.0);
    }

    #[test]
    fn split_requires_even_division() {
        let data = blobs();
        assert_eq!(split_steps(&data, 4).unwrap().len(), 4);
        assert!(split_steps(&data, 3).is_err());
    }
}
