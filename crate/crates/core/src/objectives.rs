//! Loss objectives: classification, quadratic regression, and targeted
//! poisoning (class `attacked` is pushed towards class `target`).

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Graph, Var};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamVector};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Objective {
    CrossEntropy,
    QuadraticMse,
    /// Cross-entropy with every label `attacked` rewritten to `target`.
    Poison {
        attacked: usize,
        target: usize,
    },
}

impl Objective {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if let Objective::Poison { attacked, target } = *self {
            if attacked == target {
                return Err(Error::Config(
                    "poison attacked and target classes must differ".into(),
                ));
            }
            if attacked >= num_classes || target >= num_classes {
                return Err(Error::Config(alloc::format!(
                    "poison classes ({attacked}, {target}) out of range for {num_classes} classes"
                )));
            }
        }
        Ok(())
    }

    /// Loss used when training on (distilled) data: poisoning only changes
    /// what the trained model is judged against, not how it is trained.
    pub fn training_loss(&self) -> Objective {
        match self {
            Objective::Poison { .. } => Objective::CrossEntropy,
            other => *other,
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, Objective::QuadraticMse)
    }
}

/// Targets fed to a loss head.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes(&'a [usize]),
    /// Real-valued `N x 1` targets; may require grad.
    Values(Var),
}

pub fn one_hot(labels: &[usize], num_classes: usize) -> Tensor {
    let mut data = vec![0.0; labels.len() * num_classes];
    for (i, &l) in labels.iter().enumerate() {
        data[i * num_classes + l] = 1.0;
    }
    Tensor::matrix(labels.len(), num_classes, data).expect("one-hot shape")
}

/// Apply `objective` to model outputs.
pub fn head_loss(
    g: &mut Graph,
    objective: &Objective,
    output: Var,
    targets: Targets<'_>,
) -> Result<Var> {
    match (objective, targets) {
        (Objective::QuadraticMse, Targets::Values(t)) => g.half_mse(output, t),
        (Objective::CrossEntropy, Targets::Classes(labels)) => {
            let (_, classes) = g.value(output).dims2("head_loss")?;
            let y = g.constant(one_hot(labels, classes));
            g.softmax_cross_entropy(output, y)
        }
        (Objective::Poison { attacked, target }, Targets::Classes(labels)) => {
            let relabeled = relabel(labels, *attacked, *target);
            head_loss(
                g,
                &Objective::CrossEntropy,
                output,
                Targets::Classes(&relabeled),
            )
        }
        _ => Err(Error::Config("objective does not match target kind".into())),
    }
}

pub fn relabel(labels: &[usize], attacked: usize, target: usize) -> Vec<usize> {
    labels
        .iter()
        .map(|&l| if l == attacked { target } else { l })
        .collect()
}

/// `batch` with every label `attacked` replaced by `target`.
pub fn poison_relabel(
    batch: &LabeledDataset,
    attacked: usize,
    target: usize,
) -> Result<LabeledDataset> {
    if attacked == target {
        return Err(Error::Config(
            "poison attacked and target classes must differ".into(),
        ));
    }
    batch.with_labels(relabel(batch.labels(), attacked, target))
}

/// Cross-entropy of `params` on the relabeled batch, as a graph node.
pub fn poison_loss(
    g: &mut Graph,
    model: &ModelSpec,
    params: &[Var],
    batch: &LabeledDataset,
    attacked: usize,
    target: usize,
) -> Result<Var> {
    let objective = Objective::Poison { attacked, target };
    objective.validate(batch.num_classes())?;
    let x = g.constant(batch.inputs().clone());
    model.loss(g, params, x, Targets::Classes(batch.labels()), &objective)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackMetrics {
    /// Fraction of true-`attacked` examples predicted as `target`.
    pub attack_success: f64,
    /// Accuracy on examples whose true class is not `attacked`.
    pub other_accuracy: f64,
    /// Accuracy against the relabeled ground truth.
    pub relabeled_accuracy: f64,
}

pub fn attack_metrics(
    model: &ModelSpec,
    params: &ParamVector,
    testset: &LabeledDataset,
    attacked: usize,
    target: usize,
) -> Result<AttackMetrics> {
    let predictions = model.predict(params, testset.inputs())?;
    attack_metrics_from_predictions(&predictions, testset.labels(), attacked, target)
}

pub fn attack_metrics_from_predictions(
    predictions: &[usize],
    labels: &[usize],
    attacked: usize,
    target: usize,
) -> Result<AttackMetrics> {
    let (mut k_total, mut k_hit, mut other_total, mut other_hit) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        if y == attacked {
            k_total += 1;
            k_hit += usize::from(p == target);
        } else {
            other_total += 1;
            other_hit += usize::from(p == y);
        }
    }
    if k_total == 0 {
        return Err(Error::EmptyClass(attacked));
    }
    if other_total == 0 {
        return Err(Error::Config(
            "attack metrics need at least one non-attacked example".into(),
        ));
    }
    Ok(AttackMetrics {
        attack_success: k_hit as f64 / k_total as f64,
        other_accuracy: other_hit as f64 / other_total as f64,
        relabeled_accuracy: (k_hit + other_hit) as f64 / (k_total + other_total) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabel_examples() {
        assert_eq!(relabel(&[3, 5, 0], 3, 5), vec![5, 5, 0]);
        assert_eq!(relabel(&[1, 2], 3, 5), vec![1, 2]);
        let once = relabel(&[3, 5, 3, 1], 3, 5);
        assert_eq!(relabel(&once, 3, 5), once);
    }

    #[test]
    fn poison_classes_validated() {
        assert!(Objective::Poison {
            attacked: 2,
            target: 2
        }
        .validate(10)
        .is_err());
        assert!(Objective::Poison {
            attacked: 2,
            target: 10
        }
        .validate(10)
        .is_err());
        assert!(Objective::Poison {
            attacked: 2,
            target: 3
        }
        .validate(10)
        .is_ok());
    }

    #[test]
    fn metrics_perfect_and_collapsed() {
        let labels = [0, 1, 2, 1, 2, 2];
        let m = attack_metrics_from_predictions(&labels, &labels, 1, 2).unwrap();
        assert_eq!(m.attack_success, 0.0);
        assert_eq!(m.other_accuracy, 1.0);

        let all_target = [2; 6];
        let m = attack_metrics_from_predictions(&all_target, &labels, 1, 2).unwrap();
        assert_eq!(m.attack_success, 1.0);
        // non-attacked rows: 0,2,2,2 -> three are class 2
        assert_eq!(m.other_accuracy, 0.75);
        assert_eq!(m.relabeled_accuracy, (2.0 + 3.0) / 6.0);
    }

    #[test]
    fn metrics_need_attacked_class() {
        assert_eq!(
            attack_metrics_from_predictions(&[0, 0], &[0, 2], 1, 2),
            Err(Error::EmptyClass(1))
        );
    }
}
