//! Experiment configuration: JSON on disk, CLI overrides, and a fingerprint
//! over the resolved form.

use std::fs;
use std::path::{Path, PathBuf};

use distill_core::baselines::Grid;
use distill_core::distillation::DistillConfig;
use distill_core::linear_case::LowerBoundOptions;
use distill_core::models::{InitKind, InitSpec, ModelSpec, ParamVector};
use distill_core::Objective;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

/// Reference protocols evaluate on 200 held-out models; anything smaller is
/// reported as a desk-scale result.
pub const REFERENCE_HELDOUT: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitConfig {
    FixedSeed {
        seed: u64,
    },
    RandomXavier,
    RandomHe,
    /// Pretrained models read from a pool file; the last `heldout` entries
    /// are reserved for evaluation.
    PretrainedPool {
        path: Option<PathBuf>,
        heldout: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataConfig {
    /// IDX files. Test paths default to the `t10k-*` siblings of the
    /// training files.
    Mnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        #[serde(default)]
        test_images: Option<PathBuf>,
        #[serde(default)]
        test_labels: Option<PathBuf>,
        /// Mean-pooling factor applied to every image.
        #[serde(default = "one")]
        downscale: usize,
        /// Keep only the first `n` training / test examples.
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
    /// Gaussian linear-regression problem.
    Linear {
        n: usize,
        dim: usize,
        noise_sigma: f64,
        seed: u64,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub lrs: Vec<f64>,
    pub epochs: Vec<usize>,
    /// Independent random-real sets pooled into each grid cell.
    pub random_sets: usize,
    pub optimized_candidates: usize,
    pub optimized_keep: usize,
    pub optimized_eval_models: usize,
    pub optimized_probe: usize,
    pub optimized_lr: f64,
    pub optimized_epochs: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let grid = Grid::default();
        BaselineConfig {
            lrs: grid.lrs,
            epochs: grid.epochs,
            random_sets: 5,
            optimized_candidates: 50,
            optimized_keep: 10,
            optimized_eval_models: 10,
            optimized_probe: 1024,
            optimized_lr: 0.1,
            optimized_epochs: 3,
        }
    }
}

impl BaselineConfig {
    pub fn grid(&self) -> Grid {
        Grid {
            lrs: self.lrs.clone(),
            epochs: self.epochs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub count: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            count: 50,
            lr: 0.1,
            epochs: 3,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearCheckConfig {
    pub ms: Vec<usize>,
    pub trials: usize,
    pub iterations: usize,
    pub meta_lr: f64,
    pub inits_per_iter: usize,
    pub lr_init: f64,
    pub tolerance: f64,
}

impl Default for LinearCheckConfig {
    fn default() -> Self {
        let o = LowerBoundOptions::default();
        LinearCheckConfig {
            ms: vec![2, 4, 8, 16],
            trials: 100,
            iterations: o.iterations,
            meta_lr: o.meta_lr,
            inits_per_iter: o.inits_per_iter,
            lr_init: o.lr_init,
            tolerance: o.tolerance,
        }
    }
}

impl LinearCheckConfig {
    pub fn options(&self, seed: u64) -> LowerBoundOptions {
        LowerBoundOptions {
            iterations: self.iterations,
            meta_lr: self.meta_lr,
            inits_per_iter: self.inits_per_iter,
            lr_init: self.lr_init,
            seed,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run_id: String,
    pub model: ModelSpec,
    pub init: InitConfig,
    pub data: DataConfig,
    pub objective: Objective,
    /// Its `seed` is replaced by the top-level seed on resolution.
    pub distill: DistillConfig,
    /// Held-out initializations drawn for evaluation.
    pub heldout: usize,
    pub baseline: BaselineConfig,
    pub pretrain: PretrainConfig,
    pub linear: LinearCheckConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            run_id: "run".into(),
            model: ModelSpec::Mlp {
                dim: 196,
                hidden: 64,
                classes: 10,
            },
            init: InitConfig::RandomXavier,
            data: DataConfig::Mnist {
                train_images: "train-images-idx3-ubyte".into(),
                train_labels: "train-labels-idx1-ubyte".into(),
                test_images: None,
                test_labels: None,
                downscale: 2,
                train_limit: None,
                test_limit: None,
            },
            objective: Objective::CrossEntropy,
            distill: DistillConfig::default(),
            heldout: 20,
            baseline: BaselineConfig::default(),
            pretrain: PretrainConfig::default(),
            linear: LinearCheckConfig::default(),
            out: "out".into(),
            seed: 0,
        }
    }
}

/// Values given on the command line; `None` leaves the config untouched.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mnist_images: Option<PathBuf>,
    pub mnist_labels: Option<PathBuf>,
    pub pool: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Apply overrides, propagate the seed and check invariants.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self, HarnessError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if o.mnist_images.is_some() || o.mnist_labels.is_some() {
            match &mut self.data {
                DataConfig::Mnist {
                    train_images,
                    train_labels,
                    ..
                } => {
                    if let Some(p) = &o.mnist_images {
                        *train_images = p.clone();
                    }
                    if let Some(p) = &o.mnist_labels {
                        *train_labels = p.clone();
                    }
                }
                DataConfig::Linear { .. } => {
                    return Err(HarnessError::Validation(
                        "--mnist-images/--mnist-labels given but the config uses a linear problem"
                            .into(),
                    ))
                }
            }
        }
        if let Some(p) = &o.pool {
            match &mut self.init {
                InitConfig::PretrainedPool { path, .. } => *path = Some(p.clone()),
                _ => {
                    let heldout = self.heldout;
                    self.init = InitConfig::PretrainedPool {
                        path: Some(p.clone()),
                        heldout,
                    };
                }
            }
        }
        self.distill.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.model.validate()?;
        self.distill.validate()?;
        if let Some(c) = self.model.num_classes() {
            self.objective.validate(c)?;
        } else if self.objective != Objective::QuadraticMse {
            return Err(HarnessError::Validation(
                "a regression model needs the quadratic objective".into(),
            ));
        }
        if self.heldout == 0 {
            return Err(HarnessError::Validation(
                "heldout must be at least 1".into(),
            ));
        }
        if self.run_id.is_empty() || self.run_id.contains(',') {
            return Err(HarnessError::Validation(
                "run_id must be non-empty and contain no commas".into(),
            ));
        }
        if let InitConfig::PretrainedPool { heldout, .. } = self.init {
            if heldout == 0 {
                return Err(HarnessError::Validation(
                    "pretrained pool needs at least one held-out model".into(),
                ));
            }
        }
        if let DataConfig::Mnist { downscale: 0, .. } = self.data {
            return Err(HarnessError::Validation(
                "downscale factor must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Pretty JSON; field order is fixed so equal configs give equal text.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the resolved JSON.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Number of evaluation models: one for a fixed init, the reserved
    /// slice for a pretrained pool, `heldout` otherwise.
    pub fn eval_pool_size(&self, pool_len: usize) -> usize {
        match &self.init {
            InitConfig::FixedSeed { .. } => 1,
            InitConfig::PretrainedPool { heldout, .. } => (*heldout).min(pool_len),
            _ => self.heldout,
        }
    }

    /// Init distribution for training. A pretrained pool is split into the
    /// training part (returned here) and the held-out tail.
    pub fn init_spec(&self, pool: Option<&[ParamVector]>) -> Result<InitSpec, HarnessError> {
        let kind = match &self.init {
            InitConfig::FixedSeed { seed } => InitKind::FixedSeed(*seed),
            InitConfig::RandomXavier => InitKind::RandomXavier,
            InitConfig::RandomHe => InitKind::RandomHe,
            InitConfig::PretrainedPool { heldout, .. } => {
                let pool = pool
                    .ok_or_else(|| HarnessError::Validation("pretrained pool not loaded".into()))?;
                if pool.len() <= *heldout {
                    return Err(HarnessError::Validation(format!(
                        "pool of {} models cannot reserve {heldout} held-out models",
                        pool.len()
                    )));
                }
                InitKind::PretrainedPool(pool[..pool.len() - heldout].to_vec())
            }
        };
        let spec = InitSpec::new(kind, self.seed);
        spec.validate(&self.model)?;
        Ok(spec)
    }

    pub fn pool_path(&self) -> Option<&Path> {
        match &self.init {
            InitConfig::PretrainedPool { path, .. } => path.as_deref(),
            _ => None,
        }
    }
}

/// `train-images-idx3-ubyte` -> `t10k-images-idx3-ubyte`, same directory.
pub fn sibling_test_path(train: &Path) -> PathBuf {
    let name = train
        .file_name()
        .map(|n| n.to_string_lossy().replacen("train", "t10k", 1))
        .unwrap_or_default();
    train.with_file_name(name)
}
