//! Experiment configuration and its flat `key = value` file format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionKind, AggregationKind};
use crate::data::TaskKind;
use crate::error::{Error, Result};
use crate::pool::Granularity;

use super::train::ClassWeighting;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub granularity: Granularity,
    pub acquisition: AcquisitionKind,
    pub aggregation: AggregationKind,
    /// Monte-Carlo passes T.
    pub mc_passes: usize,
    pub dropout: f64,
    pub initial_fraction: f64,
    pub step_fraction: f64,
    pub final_fraction: f64,
    pub epochs: usize,
    pub cost_threshold: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Minibatch size in frames.
    pub batch_size: usize,
    pub init_seed: u64,
    pub mc_seed: u64,
    pub data_seed: u64,
    pub baseline_repetitions: usize,
    pub segment_length: usize,
    /// DICE class weights for the multilabel task.
    pub class_weighting: ClassWeighting,
    /// Dataset file; when absent the default synthetic task for `task` is
    /// generated from `data_seed`.
    pub dataset: Option<String>,
}

pub const KEYS: [&str; 21] = [
    "task",
    "granularity",
    "acquisition",
    "aggregation",
    "mc_passes",
    "dropout",
    "initial_fraction",
    "step_fraction",
    "final_fraction",
    "epochs",
    "cost_threshold",
    "learning_rate",
    "weight_decay",
    "batch_size",
    "init_seed",
    "mc_seed",
    "data_seed",
    "baseline_repetitions",
    "segment_length",
    "class_weighting",
    "dataset",
];

impl ExperimentConfig {
    /// Defaults for `task`. Learning rates are 1e-6 (multilabel) and 5e-5
    /// (phase); desk-scale synthetic runs normally override them.
    pub fn for_task(task: TaskKind) -> Self {
        let (granularity, acquisition, aggregation, learning_rate) = match task {
            TaskKind::MultiLabel => (
                Granularity::Frame,
                AcquisitionKind::Variance,
                AggregationKind::Mean,
                1e-6,
            ),
            TaskKind::Phase => (
                Granularity::Segment,
                AcquisitionKind::Entropy,
                AggregationKind::Max,
                5e-5,
            ),
        };
        Self {
            task,
            granularity,
            acquisition,
            aggregation,
            mc_passes: 20,
            dropout: 0.5,
            initial_fraction: 0.10,
            step_fraction: 0.10,
            final_fraction: 0.60,
            epochs: 100,
            cost_threshold: 5e-4,
            learning_rate,
            weight_decay: 1e-4,
            batch_size: 128,
            init_seed: 0,
            mc_seed: 0,
            data_seed: 0,
            baseline_repetitions: 4,
            segment_length: 300,
            class_weighting: ClassWeighting::InverseFrequency,
            dataset: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.initial_fraction > 0.0 && self.initial_fraction <= self.final_fraction && self.final_fraction <= 1.0)
        {
            return bad(format!(
                "need 0 < initial_fraction ({}) <= final_fraction ({}) <= 1",
                self.initial_fraction, self.final_fraction
            ));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction.is_finite()) {
            return bad(format!("step_fraction must be > 0, got {}", self.step_fraction));
        }
        if self.mc_passes == 0 {
            return bad("mc_passes must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1], got {}", self.dropout));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.segment_length == 0 {
            return bad("segment_length must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if !(self.cost_threshold >= 0.0) {
            return bad(format!("cost_threshold must be >= 0, got {}", self.cost_threshold));
        }
        Ok(())
    }

    /// Nominal annotated fractions at which the model is evaluated:
    /// `initial, initial + step, ...` up to `final`.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let f = self.initial_fraction + k as f64 * self.step_fraction;
            if f > self.final_fraction + 1e-9 {
                break;
            }
            // round away accumulated binary noise so fractions print cleanly
            out.push((f * 1e9).round() / 1e9);
            k += 1;
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key '{k}'", n + 1)));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", n + 1)));
            }
        }
        let task = match values.get("task") {
            Some(t) => t.parse()?,
            None => TaskKind::MultiLabel,
        };
        let mut cfg = Self::for_task(task);
        for (k, v) in &values {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
        }
        match key {
            "task" => self.task = value.parse()?,
            "granularity" => self.granularity = value.parse()?,
            "acquisition" => self.acquisition = value.parse()?,
            "aggregation" => self.aggregation = value.parse()?,
            "mc_passes" => self.mc_passes = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "initial_fraction" => self.initial_fraction = num(key, value)?,
            "step_fraction" => self.step_fraction = num(key, value)?,
            "final_fraction" => self.final_fraction = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "cost_threshold" => self.cost_threshold = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "init_seed" => self.init_seed = num(key, value)?,
            "mc_seed" => self.mc_seed = num(key, value)?,
            "data_seed" => self.data_seed = num(key, value)?,
            "baseline_repetitions" => self.baseline_repetitions = num(key, value)?,
            "segment_length" => self.segment_length = num(key, value)?,
            "class_weighting" => self.class_weighting = value.parse()?,
            "dataset" => {
                self.dataset = if value.is_empty() {
                    None
                } else {
                    Some(value.to_string())
                }
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Renders the config in the file format accepted by [`Self::parse`].
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut w = |k: &str, v: String| {
            writeln!(s, "{k} = {v}").expect("write to string");
        };
        w("task", self.task.to_string());
        w("granularity", self.granularity.to_string());
        w("acquisition", self.acquisition.to_string());
        w("aggregation", self.aggregation.to_string());
        w("mc_passes", self.mc_passes.to_string());
        w("dropout", self.dropout.to_string());
        w("initial_fraction", self.initial_fraction.to_string());
        w("step_fraction", self.step_fraction.to_string());
        w("final_fraction", self.final_fraction.to_string());
        w("epochs", self.epochs.to_string());
        w("cost_threshold", self.cost_threshold.to_string());
        w("learning_rate", self.learning_rate.to_string());
        w("weight_decay", self.weight_decay.to_string());
        w("batch_size", self.batch_size.to_string());
        w("init_seed", self.init_seed.to_string());
        w("mc_seed", self.mc_seed.to_string());
        w("data_seed", self.data_seed.to_string());
        w("baseline_repetitions", self.baseline_repetitions.to_string());
        w("segment_length", self.segment_length.to_string());
        w("class_weighting", self.class_weighting.to_string());
        if let Some(d) = &self.dataset {
            w("dataset", d.clone());
        }
        s
    }

    /// Short method label such as `entropy+max` (or `random`).
    pub fn method_label(&self) -> String {
        if self.acquisition == AcquisitionKind::Random {
            "random".into()
        } else {
            format!("{}+{}", self.acquisition, self.aggregation)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_has_six_checkpoints() {
        let cfg = ExperimentConfig::for_task(TaskKind::MultiLabel);
        assert_eq!(cfg.schedule(), vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
    }

    #[test]
    fn parse_round_trip() {
        let mut cfg = ExperimentConfig::for_task(TaskKind::Phase);
        cfg.learning_rate = 3e-3;
        cfg.dataset = Some("data/phase.balds".into());
        let back = ExperimentConfig::parse(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn task_sets_defaults() {
        let cfg = ExperimentConfig::parse("task = phase\n").unwrap();
        assert_eq!(cfg.learning_rate, 5e-5);
        let cfg = ExperimentConfig::parse("# comment only\n").unwrap();
        assert_eq!(cfg.learning_rate, 1e-6);
        assert_eq!(cfg.weight_decay, 1e-4);
        assert_eq!(cfg.batch_size, 128);
        assert_eq!(cfg.baseline_repetitions, 4);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(ExperimentConfig::parse("epoch = 3"), Err(Error::Config(_))));
        assert!(matches!(
            ExperimentConfig::parse("epochs = three"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("epochs = 3\nepochs = 4"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("initial_fraction = 0.7"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("step_fraction = 0"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("no equals sign"),
            Err(Error::Config(_))
        ));
    }
}
