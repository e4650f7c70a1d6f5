//! Serialized model state: everything needed for frozen-parameter inference.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::CatmConfig;
use super::counts::CountTables;
use super::kernels::{AbsTimeParams, PairTime, RelTimeParams};
use super::prior::GlobalPrior;
use crate::error::{CatmError, Result};

pub const CHECKPOINT_VERSION: &str = "catm-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub config: CatmConfig,
    pub n_human_words: usize,
    pub n_object_words: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub reltime: Vec<Vec<PairTime>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_time: Option<AbsTimeParams>,
    pub n_kw: Vec<Vec<u32>>,
    pub n_kpw: Vec<Vec<Vec<u32>>>,
}

impl Checkpoint {
    pub fn new(
        config: CatmConfig,
        prior: &GlobalPrior,
        reltime: &RelTimeParams,
        abs_time: Option<AbsTimeParams>,
        counts: &CountTables,
    ) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION.to_string(),
            config,
            n_human_words: counts.n_human_words(),
            n_object_words: counts.n_object_words(),
            mu: prior.mu.clone(),
            sigma: prior.sigma.clone(),
            reltime: reltime.to_rows(),
            abs_time,
            n_kw: counts.human_table(),
            n_kpw: counts.object_table(),
        }
    }

    pub fn prior(&self) -> GlobalPrior {
        GlobalPrior {
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
        }
    }

    pub fn reltime(&self) -> Result<RelTimeParams> {
        RelTimeParams::from_rows(self.reltime.clone())
    }

    pub fn counts(&self) -> Result<CountTables> {
        CountTables::from_tables(&self.n_kw, &self.n_kpw)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(CatmError::InvalidInput(format!(
                "unsupported checkpoint version {:?}",
                self.version
            )));
        }
        self.config.validate()?;
        let k = self.config.n_action_topics;
        let p = self.config.effective_object_topics();
        if self.n_kw.len() != k || self.n_kpw.len() != k || self.reltime.len() != k {
            return Err(CatmError::InvalidInput(
                "checkpoint tables disagree with the configured topic count".into(),
            ));
        }
        if self.n_kw.iter().any(|r| r.len() != self.n_human_words)
            || self
                .n_kpw
                .iter()
                .any(|r| r.len() != p || r.iter().any(|c| c.len() != self.n_object_words))
        {
            return Err(CatmError::InvalidInput(
                "checkpoint count tables are ragged".into(),
            ));
        }
        if self.mu.len() != self.config.prior_dim() {
            return Err(CatmError::InvalidInput(
                "checkpoint prior dimension disagrees with its configuration".into(),
            ));
        }
        self.reltime()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| CatmError::io(path, e))?;
        let ckpt: Checkpoint =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| CatmError::Parse {
                line: e.line(),
                msg: e.to_string(),
            })?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| CatmError::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self).map_err(|e| CatmError::io(path, e.into()))?;
        writeln!(w).map_err(|e| CatmError::io(path, e))?;
        w.flush().map_err(|e| CatmError::io(path, e))
    }
}
