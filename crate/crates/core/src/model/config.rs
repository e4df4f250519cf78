use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which branches feed the fused output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "S2S-SG")]
    SequenceAndGeneral,
    #[serde(rename = "S2S-S")]
    SequenceOnly,
    #[serde(rename = "S2S-G")]
    GeneralOnly,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::SequenceAndGeneral, Variant::SequenceOnly, Variant::GeneralOnly];

    pub fn uses_sequence(self) -> bool {
        self != Variant::GeneralOnly
    }

    pub fn uses_general(self) -> bool {
        self != Variant::SequenceOnly
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::SequenceAndGeneral => "S2S-SG",
            Variant::SequenceOnly => "S2S-S",
            Variant::GeneralOnly => "S2S-G",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().trim_start_matches("s2s-") {
            "sg" => Ok(Variant::SequenceAndGeneral),
            "s" => Ok(Variant::SequenceOnly),
            "g" => Ok(Variant::GeneralOnly),
            _ => Err(Error::config(format!("unknown variant {s:?}"))),
        }
    }
}

/// Reduction of the LSTM hidden states before the sequential dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// All hidden states side by side (`N × hidden` inputs).
    Concat,
    Last,
    Mean,
}

impl Pooling {
    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::Concat => "concat",
            Pooling::Last => "last",
            Pooling::Mean => "mean",
        }
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "concat" => Ok(Pooling::Concat),
            "last" => Ok(Pooling::Last),
            "mean" => Ok(Pooling::Mean),
            _ => Err(Error::config(format!("unknown pooling {s:?}"))),
        }
    }
}

/// Architecture and training hyperparameters.
///
/// `Y_s` and `Y_g` both have width `fusion`, so the element-wise fusion is always
/// well-formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub time_embed: usize,
    pub fm_embed: usize,
    pub fu_embed: usize,
    pub lstm_hidden: usize,
    /// Width of `H_s`.
    pub seq_dense: usize,
    /// Width of `H_g`.
    pub general_hidden: usize,
    pub fusion: usize,
    pub classes: usize,
    pub pooling: Pooling,
    pub variant: Variant,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub clip_norm: f64,
    pub train_fraction: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            time_embed: 11,
            fm_embed: 2,
            fu_embed: 2,
            lstm_hidden: 64,
            seq_dense: 64,
            general_hidden: 24,
            fusion: 24,
            classes: 3,
            pooling: Pooling::Concat,
            variant: Variant::SequenceAndGeneral,
            lr: 0.001,
            batch_size: 256,
            epochs: 20,
            seed: 0,
            clip_norm: crate::nn::DEFAULT_CLIP_NORM,
            train_fraction: 0.8,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse {value:?}")))
}

impl ModelConfig {
    pub const KEYS: &'static [&'static str] = &[
        "time_embed",
        "fm_embed",
        "fu_embed",
        "lstm_hidden",
        "seq_dense",
        "general_hidden",
        "fusion",
        "classes",
        "pooling",
        "variant",
        "lr",
        "batch_size",
        "epochs",
        "seed",
        "clip_norm",
        "train_fraction",
    ];

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "time_embed" => self.time_embed = parse(key, value)?,
            "fm_embed" => self.fm_embed = parse(key, value)?,
            "fu_embed" => self.fu_embed = parse(key, value)?,
            "lstm_hidden" => self.lstm_hidden = parse(key, value)?,
            "seq_dense" => self.seq_dense = parse(key, value)?,
            "general_hidden" => self.general_hidden = parse(key, value)?,
            "fusion" => self.fusion = parse(key, value)?,
            "classes" => self.classes = parse(key, value)?,
            "pooling" => self.pooling = value.trim().parse()?,
            "variant" => self.variant = value.trim().parse()?,
            "lr" => self.lr = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "clip_norm" => self.clip_norm = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            _ => return Err(Error::config(format!("unknown model key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            ("time_embed", self.time_embed),
            ("fm_embed", self.fm_embed),
            ("fu_embed", self.fu_embed),
            ("lstm_hidden", self.lstm_hidden),
            ("seq_dense", self.seq_dense),
            ("general_hidden", self.general_hidden),
            ("fusion", self.fusion),
            ("batch_size", self.batch_size),
        ];
        if let Some((k, _)) = widths.iter().find(|(_, w)| *w == 0) {
            return Err(Error::config(format!("{k} must be at least 1")));
        }
        if self.classes < 2 {
            return Err(Error::config("need at least two classes"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr must be finite and non-negative"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("train_fraction must lie in (0, 1)"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::config("clip_norm must be positive"));
        }
        Ok(())
    }

    /// Width of one embedded bin.
    pub fn embed_width(&self) -> usize {
        self.time_embed + self.fm_embed + self.fu_embed
    }
}
