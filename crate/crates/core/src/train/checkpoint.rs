use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::autodiff::{ParamRecord, ParamSet};
use crate::dataset::Sidecar;
use crate::error::{Error, Result};
use crate::fsio;
use crate::model::GnModel;

pub const FORMAT_VERSION: &str = "gncurv-checkpoint/1";

/// Serialized model state with the config and preprocessing that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: String,
    pub epoch: usize,
    pub config: TrainConfig,
    pub preprocessing: Sidecar,
    /// Canonical parameter order.
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn new(epoch: usize, config: &TrainConfig, preprocessing: Sidecar, params: &ParamSet) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION.to_string(),
            epoch,
            config: config.clone(),
            preprocessing,
            params: params.to_records(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_json_atomic(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = fsio::read_json(path)?;
        if ck.format_version != FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "{}: unsupported checkpoint format {:?}",
                path.display(),
                ck.format_version
            )));
        }
        Ok(ck)
    }

    /// Rebuilds the model and checks the stored parameters against its layout.
    pub fn restore(&self) -> Result<(GnModel, ParamSet)> {
        let model = GnModel::new(self.config.model.clone())?;
        let params = ParamSet::from_records(self.params.clone())?;
        model.check_params(&params)?;
        Ok((model, params))
    }
}
