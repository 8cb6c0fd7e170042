//! Run configuration: flat `section.key = value` text files, fully resolved
//! before execution and serialized verbatim into every run directory so a
//! run can be reproduced from its own artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::corpus::synth::SynthSpec;
use crate::corpus::LabelClass;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::hmm::TrainOptions;
use crate::pipeline::{LoopConfig, ModelParams, PolicySpec, SchemeSpec};
use crate::selector::{Scheme, ScoreKind};

/// Everything a command needs, resolved from defaults, a config file, and
/// command-line overrides (in that order).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: usize,
    pub min_overlap: f64,
    pub features: FeatureConfig,
    pub model: ModelParams,
    pub scheme: Scheme,
    pub growth_factor: f64,
    /// Score axis used by fixed-threshold selection and sweeps.
    pub score_kind: ScoreKind,
    /// Global S2 threshold, in `score_kind` units.
    pub threshold: f64,
    /// Per-class overrides of the global threshold.
    pub class_thresholds: [Option<f64>; 6],
    pub include_background: bool,
    pub max_iterations: usize,
    pub accuracy_drop: f64,
    pub synth: SynthSpec,
    /// Eval corpus event counts as a multiple of the gold counts.
    pub synth_eval_scale: f64,
    /// Unlabeled corpus event counts as a multiple of the gold counts.
    pub synth_unlabeled_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: 0,
            min_overlap: 0.5,
            features: FeatureConfig::default(),
            model: ModelParams::default(),
            scheme: Scheme::VolumeHalving,
            growth_factor: 0.5,
            score_kind: ScoreKind::Confidence,
            threshold: -0.05,
            class_thresholds: [None; 6],
            include_background: false,
            max_iterations: 7,
            accuracy_drop: 0.02,
            synth: SynthSpec::default_spec(),
            synth_eval_scale: 3.0,
            synth_unlabeled_scale: 8.0,
        }
    }
}

impl RunConfig {
    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            max_iterations: self.max_iterations,
            accuracy_drop: self.accuracy_drop,
            seed: self.seed,
        }
    }

    /// Resolved per-class S2 thresholds.
    pub fn thresholds(&self) -> [f64; 6] {
        std::array::from_fn(|i| self.class_thresholds[i].unwrap_or(self.threshold))
    }

    pub fn policy_spec(&self) -> PolicySpec {
        let scheme = match self.scheme {
            Scheme::VolumeHalving => SchemeSpec::Volume {
                growth_factor: self.growth_factor,
            },
            Scheme::FixedThreshold => SchemeSpec::Threshold {
                thresholds: self.thresholds(),
                score_kind: self.score_kind,
            },
        };
        PolicySpec {
            scheme,
            include_background: self.include_background,
        }
    }

    /// Apply `section.key = value` pairs from a config file.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(path, lineno + 1, "expected key = value")
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| {
                Error::parse(path, lineno + 1, e.to_string())
            })?;
        }
        Ok(())
    }

    /// Set one dotted key. Unknown keys are errors so typos cannot silently
    /// fall back to defaults.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse::<T>()
                .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
        }
        fn flag(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::Config(format!("bad flag {value:?} for {key}"))),
            }
        }

        if let Some(rest) = key.strip_prefix("select.threshold.") {
            let class = LabelClass::from_name(rest)
                .ok_or_else(|| Error::Config(format!("unknown class {rest:?}")))?;
            self.class_thresholds[class.index()] = Some(num(key, value)?);
            return Ok(());
        }
        if let Some(rest) = key.strip_prefix("synth.class.") {
            let (name, field) = rest
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("expected synth.class.<CLASS>.<field>, got {key}")))?;
            let class = LabelClass::from_name(name)
                .ok_or_else(|| Error::Config(format!("unknown class {name:?}")))?;
            let spec = &mut self.synth.classes[class.index()];
            match field {
                "events" => spec.events = num(key, value)?,
                "duration_min" => spec.duration_min = num(key, value)?,
                "duration_max" => spec.duration_max = num(key, value)?,
                "freq" => spec.signature.base_freq = num(key, value)?,
                "amplitude" => spec.signature.amplitude = num(key, value)?,
                "noise_std" => spec.signature.noise_std = num(key, value)?,
                _ => return Err(Error::Config(format!("unknown key {key}"))),
            }
            return Ok(());
        }

        match key {
            "seed" => self.seed = num(key, value)?,
            "jobs" => self.jobs = num(key, value)?,
            "min_overlap" => self.min_overlap = num(key, value)?,
            "features.epoch_duration" => self.features.epoch_duration = num(key, value)?,
            "features.frame_step" => self.features.frame_step = num(key, value)?,
            "features.window_length" => self.features.window_length = num(key, value)?,
            "features.num_cepstral" => self.features.num_cepstral = num(key, value)?,
            "features.include_energy" => self.features.include_energy = flag(key, value)?,
            "features.include_differential_energy" => {
                self.features.include_differential_energy = flag(key, value)?
            }
            "model.states" => self.model.states = num(key, value)?,
            "model.mixtures" => self.model.mixtures = num(key, value)?,
            "model.max_iters" => self.model.train.max_iters = num(key, value)?,
            "model.tol" => self.model.train.tol = num(key, value)?,
            "select.scheme" => {
                self.scheme = Scheme::parse(value)
                    .ok_or_else(|| Error::Config(format!("unknown scheme {value:?}")))?
            }
            "select.growth_factor" => self.growth_factor = num(key, value)?,
            "select.score" => {
                self.score_kind = ScoreKind::parse(value)
                    .ok_or_else(|| Error::Config(format!("unknown score kind {value:?}")))?
            }
            "select.threshold" => self.threshold = num(key, value)?,
            "select.include_background" => self.include_background = flag(key, value)?,
            "loop.max_iterations" => self.max_iterations = num(key, value)?,
            "loop.accuracy_drop" => self.accuracy_drop = num(key, value)?,
            "synth.record_duration" => self.synth.record_duration = num(key, value)?,
            "synth.channels" => self.synth.channels = num(key, value)?,
            "synth.background_fill" => self.synth.background_fill = num(key, value)?,
            "synth.sample_rate" => self.synth.sample_rate = num(key, value)?,
            "synth.eval_scale" => self.synth_eval_scale = num(key, value)?,
            "synth.unlabeled_scale" => self.synth_unlabeled_scale = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    /// Every resolved key, sorted, for provenance files.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("seed", self.seed.to_string());
        put("jobs", self.jobs.to_string());
        put("min_overlap", self.min_overlap.to_string());
        put("features.epoch_duration", self.features.epoch_duration.to_string());
        put("features.frame_step", self.features.frame_step.to_string());
        put("features.window_length", self.features.window_length.to_string());
        put("features.num_cepstral", self.features.num_cepstral.to_string());
        put("features.include_energy", self.features.include_energy.to_string());
        put(
            "features.include_differential_energy",
            self.features.include_differential_energy.to_string(),
        );
        put("model.states", self.model.states.to_string());
        put("model.mixtures", self.model.mixtures.to_string());
        put("model.max_iters", self.model.train.max_iters.to_string());
        put("model.tol", self.model.train.tol.to_string());
        put("select.scheme", self.scheme.as_str().to_string());
        put("select.growth_factor", self.growth_factor.to_string());
        put("select.score", self.score_kind.as_str().to_string());
        put("select.threshold", self.threshold.to_string());
        for c in LabelClass::ALL {
            if let Some(t) = self.class_thresholds[c.index()] {
                put(&format!("select.threshold.{c}"), t.to_string());
            }
        }
        put("select.include_background", self.include_background.to_string());
        put("loop.max_iterations", self.max_iterations.to_string());
        put("loop.accuracy_drop", self.accuracy_drop.to_string());
        put("synth.record_duration", self.synth.record_duration.to_string());
        put("synth.channels", self.synth.channels.to_string());
        put("synth.background_fill", self.synth.background_fill.to_string());
        put("synth.sample_rate", self.synth.sample_rate.to_string());
        put("synth.eval_scale", self.synth_eval_scale.to_string());
        put("synth.unlabeled_scale", self.synth_unlabeled_scale.to_string());
        for c in LabelClass::ALL {
            let spec = &self.synth.classes[c.index()];
            put(&format!("synth.class.{c}.events"), spec.events.to_string());
            put(&format!("synth.class.{c}.duration_min"), spec.duration_min.to_string());
            put(&format!("synth.class.{c}.duration_max"), spec.duration_max.to_string());
            put(&format!("synth.class.{c}.freq"), spec.signature.base_freq.to_string());
            put(&format!("synth.class.{c}.amplitude"), spec.signature.amplitude.to_string());
            put(&format!("synth.class.{c}.noise_std"), spec.signature.noise_std.to_string());
        }
        map
    }

    /// Serialize the resolved config; `apply_file` of the output reproduces
    /// this config exactly.
    pub fn to_resolved_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_map() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn write_resolved(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_resolved_text()).map_err(|e| Error::io(path, e))
    }
}

/// EM options come from the model section.
pub fn train_options(cfg: &RunConfig) -> TrainOptions {
    cfg.model.train
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_then_file_then_override() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        fs::write(
            &p,
            "# comment\nseed = 9\nfeatures.frame_step = 0.05\nselect.scheme = s2\nselect.threshold.SPSW = -0.125\n",
        )
        .unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_file(&p).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.features.frame_step, 0.05);
        assert_eq!(cfg.scheme, Scheme::FixedThreshold);
        assert_eq!(
            cfg.class_thresholds[LabelClass::Spsw.index()],
            Some(-0.125)
        );
        // Flag-style override wins last.
        cfg.set("seed", "11").unwrap();
        assert_eq!(cfg.seed, 11);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("features.frame_stepp", "0.1").is_err());
        assert!(cfg.set("synth.class.SPSW.wavelength", "3").is_err());
        assert!(cfg.set("select.threshold.SPAM", "-1").is_err());
    }

    #[test]
    fn resolved_text_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("seed", "123").unwrap();
        cfg.set("synth.class.GPED.events", "77").unwrap();
        cfg.set("select.threshold.PLED", "-0.25").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("resolved.cfg");
        cfg.write_resolved(&p).unwrap();

        let mut reloaded = RunConfig::default();
        reloaded.apply_file(&p).unwrap();
        assert_eq!(reloaded.to_resolved_text(), cfg.to_resolved_text());
    }

    #[test]
    fn thresholds_resolve_per_class() {
        let mut cfg = RunConfig::default();
        cfg.set("select.threshold", "-0.4").unwrap();
        cfg.set("select.threshold.SPSW", "-0.1").unwrap();
        let t = cfg.thresholds();
        assert_eq!(t[LabelClass::Spsw.index()], -0.1);
        assert_eq!(t[LabelClass::Gped.index()], -0.4);
    }
}
