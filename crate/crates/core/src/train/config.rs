use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curvature::{DEFAULT_GRID_POINTS, DEFAULT_ITERATIONS, DEFAULT_PROBES, DEFAULT_RUNS};
use crate::dataset::PreprocessConfig;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fsio;
use crate::model::GnConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub init: u64,
    pub shuffle: u64,
    pub probes: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            init: 0,
            shuffle: 1,
            probes: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurvatureConfig {
    pub probes: usize,
    pub lanczos_iterations: usize,
    pub runs: usize,
    pub grid_points: usize,
    /// Kernel width; `None` scales with the Ritz range.
    pub sigma: Option<f64>,
    /// Evaluate curvature on the first `n` training graphs instead of all.
    pub subset: Option<usize>,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        CurvatureConfig {
            probes: DEFAULT_PROBES,
            lanczos_iterations: DEFAULT_ITERATIONS,
            runs: DEFAULT_RUNS,
            grid_points: DEFAULT_GRID_POINTS,
            sigma: None,
            subset: None,
        }
    }
}

/// Everything a training run depends on. Serialized verbatim into checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay_rate: f64,
    /// Last epoch trained at the initial rate.
    pub decay_after: usize,
    pub adamw: AdamWConfig,
    /// `None` selects 0, the powers of two and the final epoch.
    pub snapshot_epochs: Option<Vec<usize>>,
    pub seeds: Seeds,
    pub curvature: CurvatureConfig,
    /// Graphs per gradient work item; a minibatch is split into chunks of
    /// this size whose gradients are summed in order.
    pub grad_chunk: usize,
    pub execution: Execution,
    pub model: GnConfig,
    pub preprocess: PreprocessConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 512,
            batch_size: 32,
            lr0: 1e-3,
            decay_rate: 0.997,
            decay_after: 256,
            adamw: AdamWConfig::default(),
            snapshot_epochs: None,
            seeds: Seeds::default(),
            curvature: CurvatureConfig::default(),
            grad_chunk: 8,
            execution: Execution::default(),
            model: GnConfig::default(),
            preprocess: PreprocessConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: TrainConfig = fsio::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 || self.grad_chunk == 0 {
            return bad("batch_size and grad_chunk must be positive".into());
        }
        let a = &self.adamw;
        for (name, v) in [("lr0", self.lr0), ("decay_rate", self.decay_rate), ("eps", a.eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return bad("AdamW betas must lie in [0, 1)".into());
        }
        if a.weight_decay.is_nan() || a.weight_decay < 0.0 {
            return bad("weight_decay must be nonnegative".into());
        }
        let c = &self.curvature;
        if c.probes == 0 || c.lanczos_iterations == 0 || c.runs == 0 || c.grid_points < 2 {
            return bad("curvature probes, iterations and runs must be positive".into());
        }
        if let Some(epochs) = &self.snapshot_epochs {
            if let Some(e) = epochs.iter().find(|&&e| e > self.epochs) {
                return bad(format!("snapshot epoch {e} is past the last epoch {}", self.epochs));
            }
        }
        self.model.validate()
    }

    /// Sorted, deduplicated snapshot epochs.
    pub fn snapshot_schedule(&self) -> Vec<usize> {
        let mut epochs = match &self.snapshot_epochs {
            Some(list) => list.clone(),
            None => {
                let mut v = vec![0, self.epochs];
                v.extend(std::iter::successors(Some(1usize), |p| p.checked_mul(2)).take_while(|&p| p <= self.epochs));
                v
            }
        };
        epochs.sort_unstable();
        epochs.dedup();
        epochs
    }
}

/// Learning rate used during `epoch`: constant through `decay_after`, then
/// decayed geometrically once per epoch.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    if epoch <= cfg.decay_after {
        cfg.lr0
    } else {
        cfg.lr0 * cfg.decay_rate.powi((epoch - cfg.decay_after) as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at(0, &cfg), 1e-3);
        assert_eq!(lr_at(256, &cfg), 1e-3);
        assert!((lr_at(258, &cfg) - 9.94009e-4).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for e in 0..600 {
            let lr = lr_at(e, &cfg);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn default_snapshots() {
        let cfg = TrainConfig {
            epochs: 20,
            ..Default::default()
        };
        assert_eq!(cfg.snapshot_schedule(), vec![0, 1, 2, 4, 8, 16, 20]);
        let cfg = TrainConfig {
            snapshot_epochs: Some(vec![]),
            ..Default::default()
        };
        assert!(cfg.snapshot_schedule().is_empty());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epochs": 3, "lr": 0.1}"#).is_err());
        let cfg: TrainConfig = serde_json::from_str(r#"{"epochs": 3, "model": {"latent_dim": 8}}"#).unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.model.latent_dim, 8);
        assert_eq!(cfg.batch_size, 32);
    }

    #[test]
    fn validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for cfg in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { lr0: 0.0, ..Default::default() },
            TrainConfig { snapshot_epochs: Some(vec![999]), ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
