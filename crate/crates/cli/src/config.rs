use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use s2s_core::context::{ContextConfig, LabelPolicy, Thresholds, DEFAULT_CLASS_SHARES, DEFAULT_HIGH_THRESHOLD};
use s2s_core::features::sequence::GapSplit;
use s2s_core::ingest::DEFAULT_MIN_DAYS;
use s2s_core::model::ModelConfig;
use s2s_core::pipeline::FeatureConfig;
use s2s_core::synth::SynthConfig;

use crate::CliError;

/// Keys owned by the command-line tool rather than a core config block.
const PIPELINE_KEYS: &[&str] = &[
    "min_days",
    "label_policy",
    "high_threshold",
    "low_threshold",
    "low_share",
    "label_shares",
    "price_radius_km",
    "bin_minutes",
    "window_start",
    "window_days",
    "gap_split",
    "k",
    "rms_rg",
    "topk_centroid",
    "include_td",
    "include_returner_flag",
    "gradcheck_bins",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    Calibrate,
    Quantile,
    Fixed,
}

/// Every tunable of every stage, built from defaults plus `key=value` overrides.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub model: ModelConfig,
    pub min_days: usize,
    pub policy: PolicyKind,
    pub high_threshold: f64,
    pub low_threshold: f64,
    pub low_share: f64,
    pub label_shares: [f64; 3],
    pub context: ContextConfig,
    pub features: FeatureConfig,
    pub gradcheck_bins: usize,
    /// The overrides as given, after the last write for each key.
    pub overrides: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            synth: SynthConfig::default(),
            model: ModelConfig::default(),
            min_days: DEFAULT_MIN_DAYS,
            policy: PolicyKind::Calibrate,
            high_threshold: DEFAULT_HIGH_THRESHOLD,
            low_threshold: 40_000.0,
            low_share: DEFAULT_CLASS_SHARES[0],
            label_shares: DEFAULT_CLASS_SHARES,
            context: ContextConfig::default(),
            features: FeatureConfig::default(),
            gradcheck_bins: 8,
            overrides: BTreeMap::new(),
        }
    }
}

fn bad(key: &str, value: &str) -> CliError {
    CliError::Usage(format!("{key}: cannot parse {value:?}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| bad(key, value))
}

impl RunConfig {
    pub fn is_key(key: &str) -> bool {
        SynthConfig::KEYS.contains(&key) || ModelConfig::KEYS.contains(&key) || PIPELINE_KEYS.contains(&key)
    }

    /// Applies one override. `seed` reaches both the generator and the model.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let usage = |e: s2s_core::Error| CliError::Usage(e.to_string());
        if SynthConfig::KEYS.contains(&key) {
            self.synth.set(key, value).map_err(usage)?;
        }
        if ModelConfig::KEYS.contains(&key) {
            self.model.set(key, value).map_err(usage)?;
        }
        if PIPELINE_KEYS.contains(&key) {
            self.set_pipeline(key, value)?;
        }
        if !Self::is_key(key) {
            return Err(CliError::Usage(format!("unknown config key {key:?}")));
        }
        self.overrides.insert(key.to_owned(), value.trim().to_owned());
        Ok(())
    }

    fn set_pipeline(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        let f = &mut self.features;
        match key {
            "min_days" => self.min_days = num(key, v)?,
            "label_policy" => {
                self.policy = match v.trim() {
                    "calibrate" => PolicyKind::Calibrate,
                    "quantile" => PolicyKind::Quantile,
                    "fixed" => PolicyKind::Fixed,
                    _ => return Err(bad(key, v)),
                }
            }
            "high_threshold" => self.high_threshold = num(key, v)?,
            "low_threshold" => self.low_threshold = num(key, v)?,
            "low_share" => self.low_share = num(key, v)?,
            "label_shares" => {
                let parts: Vec<f64> = v.split(',').map(|p| num(key, p)).collect::<Result<_, _>>()?;
                self.label_shares = parts.try_into().map_err(|_| bad(key, v))?;
            }
            "price_radius_km" => self.context.price_radius_km = num(key, v)?,
            "bin_minutes" => f.bin_minutes = num(key, v)?,
            "window_start" => {
                f.window_start = Some(chrono::NaiveDate::parse_from_str(v.trim(), "%Y-%m-%d").map_err(|_| bad(key, v))?)
            }
            "window_days" => f.window_days = Some(num(key, v)?),
            "gap_split" => {
                f.gap_split = match v.trim() {
                    "alight" => GapSplit::AlightStation,
                    "origin" => GapSplit::TripOrigin,
                    _ => return Err(bad(key, v)),
                }
            }
            "k" => f.general.k = num(key, v)?,
            "rms_rg" => f.general.rms_rg = num(key, v)?,
            "topk_centroid" => f.general.topk_centroid = num(key, v)?,
            "include_td" => f.layout.include_td = num(key, v)?,
            "include_returner_flag" => f.layout.include_returner_flag = num(key, v)?,
            "gradcheck_bins" => self.gradcheck_bins = num(key, v)?,
            _ => unreachable!("listed in PIPELINE_KEYS"),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data("config", path, e))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn label_policy(&self) -> LabelPolicy {
        match self.policy {
            PolicyKind::Calibrate => LabelPolicy::CalibrateLow {
                high: self.high_threshold,
                low_share: self.low_share,
            },
            PolicyKind::Quantile => LabelPolicy::Quantile {
                shares: self.label_shares,
            },
            PolicyKind::Fixed => LabelPolicy::Fixed(Thresholds {
                low: self.low_threshold,
                high: self.high_threshold,
            }),
        }
    }

    /// SHA-256 over the stage name and the sorted overrides.
    pub fn hash(&self, stage: &str) -> String {
        let mut h = Sha256::new();
        h.update(stage.as_bytes());
        h.update(b"\n");
        for (k, v) in &self.overrides {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
