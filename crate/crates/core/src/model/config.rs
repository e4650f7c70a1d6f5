use serde::{Deserialize, Serialize};

use crate::error::{CatmError, Result};

/// How per-document topic proportions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// Logistic-normal stick-breaking prior with a learned mean and covariance.
    Correlated,
    /// Independent symmetric Dirichlet priors, collapsed out as in LDA.
    Dirichlet {
        alpha_action: f64,
        alpha_object: f64,
    },
}

impl PriorMode {
    /// Symmetric Dirichlet with the usual 50/K heuristic.
    pub fn dirichlet_for(n_action_topics: usize, n_object_topics: usize) -> Self {
        PriorMode::Dirichlet {
            alpha_action: 50.0 / n_action_topics as f64,
            alpha_object: 50.0 / n_object_topics as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    /// Pairwise relative-time densities between action-topics.
    Relative,
    /// One normal over absolute timestamps per action-topic.
    Absolute,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectMode {
    On,
    Off,
}

/// Named ablations of the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Tm,
    Ctm,
    TmAt,
    CtmAt,
    TmRt,
    CatmA,
    CatmAo,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Tm,
        Preset::Ctm,
        Preset::TmAt,
        Preset::CtmAt,
        Preset::TmRt,
        Preset::CatmA,
        Preset::CatmAo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Tm => "tm",
            Preset::Ctm => "ctm",
            Preset::TmAt => "tm-at",
            Preset::CtmAt => "ctm-at",
            Preset::TmRt => "tm-rt",
            Preset::CatmA => "catm-a",
            Preset::CatmAo => "catm-ao",
        }
    }

    pub fn parse(name: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    fn correlated(self) -> bool {
        matches!(
            self,
            Preset::Ctm | Preset::CtmAt | Preset::CatmA | Preset::CatmAo
        )
    }

    fn time_mode(self) -> TimeMode {
        match self {
            Preset::Tm | Preset::Ctm => TimeMode::None,
            Preset::TmAt | Preset::CtmAt => TimeMode::Absolute,
            Preset::TmRt | Preset::CatmA | Preset::CatmAo => TimeMode::Relative,
        }
    }

    fn object_mode(self) -> ObjectMode {
        if self == Preset::CatmAo {
            ObjectMode::On
        } else {
            ObjectMode::Off
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatmConfig {
    /// Number of action-topics K.
    pub n_action_topics: usize,
    /// Number of object-topics P.
    pub n_object_topics: usize,
    pub beta1: f64,
    pub beta12: f64,
    pub prior_mode: PriorMode,
    pub time_mode: TimeMode,
    pub object_mode: ObjectMode,
    pub iters: usize,
    pub burnin: usize,
    pub seed: u64,
    pub var_floor: f64,
    pub min_pair_count: usize,
    /// Number of final post-burn-in sweeps whose per-token mode is reported.
    pub modal_window: usize,
    /// Ridge added to the prior covariance, relative to its mean variance.
    pub ridge_scale: f64,
}

impl CatmConfig {
    /// Full model with both topic families and default hyperparameters.
    pub fn new(n_action_topics: usize, n_object_topics: usize) -> Self {
        CatmConfig {
            n_action_topics,
            n_object_topics,
            beta1: 0.01,
            beta12: 0.01,
            prior_mode: PriorMode::Correlated,
            time_mode: TimeMode::Relative,
            object_mode: ObjectMode::On,
            iters: 200,
            burnin: 100,
            seed: 0,
            var_floor: 1e-4,
            min_pair_count: 5,
            modal_window: 20,
            ridge_scale: 1e-6,
        }
    }

    pub fn with_preset(mut self, preset: Preset) -> Self {
        self.prior_mode = if preset.correlated() {
            PriorMode::Correlated
        } else {
            PriorMode::dirichlet_for(self.n_action_topics, self.n_object_topics)
        };
        self.time_mode = preset.time_mode();
        self.object_mode = preset.object_mode();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iters(mut self, iters: usize, burnin: usize) -> Self {
        self.iters = iters;
        self.burnin = burnin;
        self
    }

    /// Object-topic count actually sampled: ablations without objects
    /// collapse to a single object-topic.
    pub fn effective_object_topics(&self) -> usize {
        match self.object_mode {
            ObjectMode::On => self.n_object_topics,
            ObjectMode::Off => 1,
        }
    }

    /// Length of the packed prior vector `[v_action, v_object]`.
    pub fn prior_dim(&self) -> usize {
        (self.n_action_topics - 1) + (self.effective_object_topics() - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_action_topics == 0 || self.n_object_topics == 0 {
            return Err(CatmError::Config("topic counts must be positive".into()));
        }
        if !(self.beta1 > 0.0 && self.beta12 > 0.0) {
            return Err(CatmError::Config(
                "beta1 and beta12 must be positive".into(),
            ));
        }
        if let PriorMode::Dirichlet {
            alpha_action,
            alpha_object,
        } = self.prior_mode
        {
            if !(alpha_action > 0.0 && alpha_object > 0.0) {
                return Err(CatmError::Config(
                    "Dirichlet alphas must be positive".into(),
                ));
            }
        }
        if self.iters == 0 || self.burnin >= self.iters {
            return Err(CatmError::Config(format!(
                "need 0 <= burnin < iters, got burnin {} iters {}",
                self.burnin, self.iters
            )));
        }
        if !(self.var_floor > 0.0) {
            return Err(CatmError::Config("var_floor must be positive".into()));
        }
        if self.modal_window == 0 {
            return Err(CatmError::Config("modal_window must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_names() {
        for p in Preset::ALL {
            assert_eq!(Preset::parse(p.name()), Some(p));
        }
        assert_eq!(Preset::parse("lda"), None);
    }

    #[test]
    fn preset_triples() {
        let c = CatmConfig::new(5, 3).with_preset(Preset::Tm);
        assert!(matches!(c.prior_mode, PriorMode::Dirichlet { .. }));
        assert_eq!(c.time_mode, TimeMode::None);
        assert_eq!(c.object_mode, ObjectMode::Off);
        assert_eq!(c.prior_dim(), 4);
        let c = CatmConfig::new(5, 3).with_preset(Preset::CatmAo);
        assert_eq!(c.prior_mode, PriorMode::Correlated);
        assert_eq!(c.time_mode, TimeMode::Relative);
        assert_eq!(c.prior_dim(), 6);
        let c = CatmConfig::new(5, 3).with_preset(Preset::CtmAt);
        assert_eq!(c.time_mode, TimeMode::Absolute);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(CatmConfig::new(3, 1).validate().is_ok());
        assert!(CatmConfig::new(3, 1).with_iters(10, 10).validate().is_err());
        let mut c = CatmConfig::new(3, 1);
        c.beta1 = 0.0;
        assert!(c.validate().is_err());
    }
}
