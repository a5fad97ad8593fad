//! In-memory datasets, synthetic problem generators and preprocessing.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, streams};
use crate::tensor::Tensor;

/// Real inputs (`N x D`, flattened) with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    inputs: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let (n, _) = inputs.dims2("LabeledDataset")?;
        if n != labels.len() {
            return Err(Error::shape(
                "LabeledDataset",
                inputs.shape(),
                &[labels.len()],
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Config(alloc::format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if !inputs.is_finite() {
            return Err(Error::Numeric {
                op: "LabeledDataset",
            });
        }
        Ok(LabeledDataset {
            inputs,
            labels,
            num_classes,
        })
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.shape()[1]
    }

    /// Indices of the examples of each class, in dataset order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        by_class
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn select(&self, rows: &[usize]) -> Result<LabeledDataset> {
        Ok(LabeledDataset {
            inputs: self.inputs.select_rows(rows)?,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            num_classes: self.num_classes,
        })
    }

    pub fn with_labels(&self, labels: Vec<usize>) -> Result<LabeledDataset> {
        LabeledDataset::new(self.inputs.clone(), labels, self.num_classes)
    }

    /// Concatenation of two datasets with the same dimension and class count.
    pub fn concat(&self, other: &LabeledDataset) -> Result<LabeledDataset> {
        if self.dim() != other.dim() || self.num_classes != other.num_classes {
            return Err(Error::shape(
                "concat",
                self.inputs.shape(),
                other.inputs.shape(),
            ));
        }
        let mut data = self.inputs.data().to_vec();
        data.extend_from_slice(other.inputs.data());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        LabeledDataset::new(
            Tensor::matrix(labels.len(), self.dim(), data)?,
            labels,
            self.num_classes,
        )
    }
}

/// Linear regression data: `d` is `N x D`, `t` is `N x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProblem {
    pub d: Tensor,
    pub t: Tensor,
    /// Generating weights, when the problem was synthesized.
    pub theta_true: Option<Tensor>,
}

impl LinearProblem {
    pub fn new(d: Tensor, t: Tensor) -> Result<Self> {
        let (n, dim) = d.dims2("LinearProblem")?;
        let (tn, tc) = t.dims2("LinearProblem")?;
        if tn != n || tc != 1 {
            return Err(Error::shape("LinearProblem", d.shape(), t.shape()));
        }
        if n < dim {
            return Err(Error::Config(alloc::format!(
                "linear problem needs N >= D, got N={n}, D={dim}"
            )));
        }
        Ok(LinearProblem {
            d,
            t,
            theta_true: None,
        })
    }

    pub fn n(&self) -> usize {
        self.d.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.d.shape()[1]
    }
}

/// `d ~ N(0, 1)`, `t = d * theta_true + noise_sigma * N(0, 1)`.
pub fn gen_linear_problem(
    n: usize,
    dim: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<LinearProblem> {
    let mut rng = rng::stream(seed, streams::LINEAR_PROBLEM);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let d = Tensor::matrix(n, dim, (0..n * dim).map(|_| normal()).collect())?;
    let theta = Tensor::matrix(dim, 1, (0..dim).map(|_| normal()).collect())?;
    let clean = d.matmul(&theta)?;
    let noise: Vec<f64> = (0..n).map(|_| normal()).collect();
    let t = Tensor::matrix(
        n,
        1,
        clean
            .data()
            .iter()
            .zip(&noise)
            .map(|(c, e)| c + noise_sigma * e)
            .collect(),
    )?;
    let mut problem = LinearProblem::new(d, t)?;
    problem.theta_true = Some(theta);
    Ok(problem)
}

/// Class-stratified sample without replacement of `per_class` examples per
/// class. The output is interleaved: row `i` has class `i % C`.
pub fn subsample(dataset: &LabeledDataset, per_class: usize, seed: u64) -> Result<LabeledDataset> {
    let mut rng = rng::stream(seed, streams::SUBSAMPLE);
    let by_class = dataset.class_indices();
    let mut chosen = Vec::with_capacity(by_class.len());
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < per_class {
            return Err(Error::InsufficientData {
                class,
                available: members.len(),
                requested: per_class,
            });
        }
        let picks: Vec<usize> = index::sample(&mut rng, members.len(), per_class)
            .into_iter()
            .map(|i| members[i])
            .collect();
        chosen.push(picks);
    }
    let rows: Vec<usize> = (0..per_class)
        .flat_map(|k| chosen.iter().map(move |picks| picks[k]))
        .collect();
    dataset.select(&rows)
}

/// Mean-pool square images by `factor` along each side.
pub fn downscale(dataset: &LabeledDataset, factor: usize) -> Result<LabeledDataset> {
    if factor == 1 {
        return Ok(dataset.clone());
    }
    let dim = dataset.dim();
    let side = integer_sqrt(dim).ok_or_else(|| {
        Error::Config(alloc::format!(
            "input dimension {dim} is not a square image"
        ))
    })?;
    if factor == 0 || side % factor != 0 {
        return Err(Error::Config(alloc::format!(
            "downscale factor {factor} does not divide image side {side}"
        )));
    }
    let out_side = side / factor;
    let norm = 1.0 / (factor * factor) as f64;
    let n = dataset.len();
    let mut data = Vec::with_capacity(n * out_side * out_side);
    for i in 0..n {
        let img = dataset.inputs.row(i);
        for oy in 0..out_side {
            for ox in 0..out_side {
                let mut total = 0.0;
                for dy in 0..factor {
                    let row = (oy * factor + dy) * side + ox * factor;
                    total += img[row..row + factor].iter().sum::<f64>();
                }
                data.push(total * norm);
            }
        }
    }
    LabeledDataset::new(
        Tensor::matrix(n, out_side * out_side, data)?,
        dataset.labels.clone(),
        dataset.num_classes,
    )
}

pub fn integer_sqrt(n: usize) -> Option<usize> {
    let r = libm::sqrt(n as f64) as usize;
    (r.saturating_sub(1)..=r + 1).find(|&s| s * s == n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n_per_class: usize, classes: usize) -> LabeledDataset {
        let n = n_per_class * classes;
        let inputs = Tensor::matrix(
            n,
            4,
            (0..n * 4).map(|v| v as f64 / (n * 4) as f64).collect(),
        )
        .unwrap();
        LabeledDataset::new(inputs, (0..n).map(|i| i % classes).collect(), classes).unwrap()
    }

    #[test]
    fn subsample_is_balanced_and_interleaved() {
        let ds = toy(5, 3);
        let s = subsample(&ds, 2, 9).unwrap();
        assert_eq!(s.labels(), &[0, 1, 2, 0, 1, 2]);
        assert_eq!(s.class_counts(), vec![2, 2, 2]);
        assert_eq!(s, subsample(&ds, 2, 9).unwrap());
    }

    #[test]
    fn subsample_insufficient() {
        let ds = toy(2, 3);
        assert!(matches!(
            subsample(&ds, 3, 0),
            Err(Error::InsufficientData { requested: 3, .. })
        ));
    }

    #[test]
    fn downscale_identity_and_constant() {
        let ds = toy(1, 2);
        assert_eq!(downscale(&ds, 1).unwrap(), ds);

        let c = LabeledDataset::new(Tensor::full(&[1, 16], 0.25), vec![0], 1).unwrap();
        let d = downscale(&c, 2).unwrap();
        assert_eq!(d.inputs().shape(), &[1, 4]);
        assert!(d.inputs().data().iter().all(|&v| v == 0.25));
        assert!(downscale(&c, 3).is_err());
    }

    #[test]
    fn linear_problem_is_seeded() {
        let a = gen_linear_problem(10, 3, 0.1, 5).unwrap();
        assert_eq!(a, gen_linear_problem(10, 3, 0.1, 5).unwrap());
        assert_ne!(a, gen_linear_problem(10, 3, 0.1, 6).unwrap());
        let one = gen_linear_problem(4, 1, 0.0, 1).unwrap();
        assert_eq!(one.dim(), 1);
    }

    #[test]
    fn concat_preserves_rows() {
        let a = toy(1, 2);
        let b = toy(2, 2);
        let c = a.concat(&b).unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c.inputs().row(3), b.inputs().row(1));
    }
}
