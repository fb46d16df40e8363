//! INI run configuration with `[model]`, `[train]` and `[simulate]` sections.
//! Command-line `--set section.key=value` overrides are applied on top and
//! the effective values are echoed at startup.

use std::path::{Path, PathBuf};

use hdrestore::model::ModelConfig;
use hdrestore::sim::{NoiseSource, Split, Subset};
use hdrestore::train::TrainConfig;
use hdrestore::{Error, Result};
use ini::Ini;

#[derive(Clone, Debug)]
pub struct SimulateConfig {
    pub subset: Subset,
    pub split: Split,
    pub seed: u64,
    /// `None` uses one record per clean file.
    pub count: Option<usize>,
    pub noise: NoiseSource,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            subset: Subset::N,
            split: Split::Test,
            seed: 0,
            count: None,
            noise: NoiseSource::Synthetic,
        }
    }
}

impl SimulateConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = || Error::Config(format!("bad value `{v}` for simulate.{key}"));
        match key {
            "subset" => self.subset = v.parse()?,
            "split" => self.split = v.parse()?,
            "seed" => self.seed = v.parse().map_err(|_| bad())?,
            "count" => {
                self.count = match v {
                    "auto" => None,
                    _ => Some(v.parse().map_err(|_| bad())?),
                }
            }
            "noise" => {
                self.noise = match v {
                    "synthetic" => NoiseSource::Synthetic,
                    _ => NoiseSource::Dir(PathBuf::from(v.strip_prefix("dir:").unwrap_or(v))),
                }
            }
            _ => return Err(Error::Config(format!("unknown key simulate.{key}"))),
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let count = self.count.map_or("auto".to_string(), |c| c.to_string());
        let noise = match &self.noise {
            NoiseSource::Synthetic => "synthetic".to_string(),
            NoiseSource::Dir(p) => format!("dir:{}", p.display()),
        };
        vec![
            ("subset".into(), self.subset.to_string()),
            ("split".into(), self.split.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("count".into(), count),
            ("noise".into(), noise),
        ]
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub simulate: SimulateConfig,
}

impl RunConfig {
    /// Applies `section.key = value`. Unknown sections and keys are errors.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        match section {
            "model" => self.model.set(key, value),
            "train" => self.train.set(key, value),
            "simulate" => self.simulate.set(key, value),
            _ => Err(Error::Config(format!("unknown section [{section}]"))),
        }
    }

    /// Applies one `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (lhs, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not section.key=value")))?;
        let (section, key) = lhs
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not section.key=value")))?;
        self.set(section, key, value)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::Config(format!("line {}: {}", e.line, e.msg)))?;
        let mut cfg = Self::default();
        for (section, props) in ini.iter() {
            match section {
                None => {
                    if let Some((k, _)) = props.iter().next() {
                        return Err(Error::Config(format!("key `{k}` outside of any section")));
                    }
                }
                Some(s) => {
                    for (k, v) in props.iter() {
                        cfg.set(s, k, v)?;
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// File (if any) plus overrides, validated.
    pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        for o in overrides {
            cfg.apply_override(o)?;
        }
        cfg.model.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    /// Every effective value as `section.key = value`.
    pub fn effective_lines(&self) -> Vec<String> {
        let sections = [
            ("model", self.model.to_pairs()),
            ("train", self.train.to_pairs()),
            ("simulate", self.simulate.to_pairs()),
        ];
        sections
            .into_iter()
            .flat_map(|(s, pairs)| pairs.into_iter().map(move |(k, v)| format!("{s}.{k} = {v}")))
            .collect()
    }

    /// Round-trippable INI text of the effective configuration.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        for (s, pairs) in [
            ("model", self.model.to_pairs()),
            ("train", self.train.to_pairs()),
            ("simulate", self.simulate.to_pairs()),
        ] {
            out.push_str(&format!("[{s}]\n"));
            for (k, v) in pairs {
                out.push_str(&format!("{k} = {v}\n"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hdrestore::model::Variant;

    #[test]
    fn sections_and_overrides() {
        let text = "[model]\nhidden = 8\nvariant = refinement_only\n\n[train]\nlr = 0.001\n\n[simulate]\nsubset = B\nnoise = dir:/tmp/n\n";
        let mut cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.model.hidden, 8);
        assert_eq!(cfg.model.variant, Variant::RefinementOnly);
        assert_eq!(cfg.train.lr, 0.001);
        assert_eq!(cfg.simulate.subset, Subset::B);
        assert_eq!(cfg.simulate.noise, NoiseSource::Dir("/tmp/n".into()));
        cfg.apply_override("train.total_steps=7").unwrap();
        assert_eq!(cfg.train.total_steps, 7);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(RunConfig::parse("[model]\nhiden = 8\n").is_err());
        assert!(RunConfig::parse("[optim]\nlr = 1\n").is_err());
        assert!(RunConfig::parse("lr = 1\n").is_err());
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_override("train.lr").is_err());
        assert!(cfg.apply_override("lr=1").is_err());
    }

    #[test]
    fn effective_config_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply_override("model.hidden=4").unwrap();
        cfg.apply_override("simulate.count=3").unwrap();
        let again = RunConfig::parse(&cfg.to_ini()).unwrap();
        assert_eq!(again.effective_lines(), cfg.effective_lines());
        assert!(cfg.effective_lines().iter().any(|l| l == "model.hidden = 4"));
    }
}
