//! Scenario files.
//!
//! A scenario is a TOML document. The top-level `seed` is mandatory (it may
//! also come from `--seed`); `[run]` holds experiment controls, `[link]` a
//! link scenario and `[system]` a system scenario. Every omitted key takes
//! its documented default and unknown keys are rejected.

use std::path::{Path, PathBuf};

use hbf_core::linksim::LinkScenario;
use hbf_core::syssim::SystemScenario;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Which link experiment `link` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkMode {
    /// Hybrid receiver with the tracker.
    #[default]
    Trial,
    /// Hybrid against the single directive element.
    Ab,
    /// Tracking over the scenario's trajectory channel.
    Trajectory,
}

/// Experiment controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: LinkMode,
    pub subframes: usize,
    pub trials: usize,
    pub drops: usize,
    pub out: PathBuf,
    /// Worker threads; absent means one per core.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Also write the noiseless transmitted first frame as cf32 IQ.
    pub iq_dump: bool,
    /// Also write every rate sample of a system run.
    pub rate_samples: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: LinkMode::Trial,
            subframes: 600,
            trials: 1,
            drops: 1000,
            out: PathBuf::from("hbfsim-out"),
            workers: None,
            iq_dump: false,
            rate_samples: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub link: LinkScenario,
    #[serde(default)]
    pub system: SystemScenario,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub subframes: Option<usize>,
    pub drops: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// Scenario with overrides applied and the seed resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: ScenarioConfig,
    pub seed: u64,
    /// SHA-256 of the canonical TOML of `config`.
    pub sha256: String,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

impl ScenarioConfig {
    /// Parses a scenario document. Errors carry the line and column.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().trim_end().to_string();
            match e.span() {
                Some(span) => {
                    let (line, col) = line_col(text, span.start);
                    CliError::Config(format!("{origin}:{line}:{col}: {msg}"))
                }
                None => CliError::Config(format!("{origin}: {msg}")),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))
    }

    pub fn resolve(mut self, o: &Overrides) -> Result<Resolved, CliError> {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(n) = o.subframes {
            self.run.subframes = n;
        }
        if let Some(n) = o.drops {
            self.run.drops = n;
        }
        if let Some(p) = &o.out {
            self.run.out = p.clone();
        }
        if let Some(w) = o.workers {
            self.run.workers = Some(w);
        }
        let seed = self.seed.ok_or_else(|| {
            CliError::Config("missing required key `seed` (top level of the scenario, or --seed)".into())
        })?;
        if self.run.trials == 0 {
            return Err(CliError::Config("run.trials must be at least 1".into()));
        }
        if self.run.workers == Some(0) {
            return Err(CliError::Config("run.workers must be at least 1".into()));
        }
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Resolved {
            config: self,
            seed,
            sha256,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ScenarioConfig {
            seed: Some(7),
            ..Default::default()
        };
        let text = c.to_toml().unwrap();
        assert_eq!(ScenarioConfig::parse(&text, "x").unwrap(), c);
    }

    #[test]
    fn unknown_key_is_anchored() {
        let text = "seed = 1\n\n[run]\nsubframes = 10\nbogus = 3\n";
        let CliError::Config(msg) = ScenarioConfig::parse(text, "s.toml").unwrap_err() else {
            panic!("expected config error");
        };
        assert!(msg.starts_with("s.toml:5:"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn missing_seed_names_the_key() {
        let c = ScenarioConfig::parse("[run]\ntrials = 2\n", "s").unwrap();
        let CliError::Config(msg) = c.resolve(&Overrides::default()).unwrap_err() else {
            panic!("expected config error");
        };
        assert!(msg.contains("`seed`"));
    }

    #[test]
    fn overrides_win_and_change_the_hash() {
        let c = ScenarioConfig::parse("seed = 3\n[run]\nsubframes = 50\n", "s").unwrap();
        let a = c.clone().resolve(&Overrides::default()).unwrap();
        let b = c
            .resolve(&Overrides {
                seed: Some(4),
                subframes: Some(60),
                ..Default::default()
            })
            .unwrap();
        assert_eq!((a.seed, a.config.run.subframes), (3, 50));
        assert_eq!((b.seed, b.config.run.subframes), (4, 60));
        assert_ne!(a.sha256, b.sha256);
        assert_eq!(a.sha256.len(), 64);
    }

    #[test]
    fn line_col_counts_from_one() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }
}
