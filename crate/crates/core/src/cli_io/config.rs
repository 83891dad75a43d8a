use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `K` as configured: a fixed value or the `choose_k` rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSetting {
    #[default]
    #[serde(with = "auto_tag")]
    Auto,
    Fixed(usize),
}

mod auto_tag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(())
        } else {
            Err(serde::de::Error::custom(format!("expected \"auto\" or an integer, got {s:?}")))
        }
    }
}

impl FromStr for KSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KSetting::Auto);
        }
        s.parse::<usize>()
            .map(KSetting::Fixed)
            .map_err(|_| Error::config("/k", format!("`{s}` is neither `auto` nor a count")))
    }
}

impl fmt::Display for KSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KSetting::Auto => f.write_str("auto"),
            KSetting::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl KSetting {
    pub fn validate(self) -> Result<()> {
        match self {
            KSetting::Fixed(k) if k < 2 => Err(Error::config("/k", "K must be at least 2")),
            _ => Ok(()),
        }
    }

    pub fn fixed(self) -> Option<usize> {
        match self {
            KSetting::Auto => None,
            KSetting::Fixed(k) => Some(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Replication presets: `paper` is 500 tests with `M = 500`, `ci` is 100
/// tests with `M = 100`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Ci,
}

impl Preset {
    pub fn n_tests(self) -> usize {
        match self {
            Preset::Paper => 500,
            Preset::Ci => 100,
        }
    }

    pub fn m(self) -> usize {
        match self {
            Preset::Paper => 500,
            Preset::Ci => 100,
        }
    }
}

/// Turns a `serde_path_to_error` path into a JSON pointer.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    path.iter()
        .filter_map(|seg| match seg {
            Segment::Seq { index } => Some(format!("/{index}")),
            Segment::Map { key } => Some(format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { .. } | Segment::Unknown => None,
        })
        .collect()
}

/// Deserializes a document already parsed to JSON values, reporting the
/// failing location as a JSON pointer.
pub fn from_value<T: DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = pointer(e.path());
        Error::config(path, e.into_inner().to_string())
    })
}

/// Parses TOML text (or JSON when `json` is set) into `T`.
pub fn parse_document<T: DeserializeOwned>(text: &str, json: bool) -> Result<T> {
    let value: serde_json::Value = if json {
        serde_json::from_str(text).map_err(|e| Error::config("", e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| Error::config("", e.to_string()))?
    };
    from_value(value)
}

/// Reads a configuration document; `.json` files are JSON, anything else TOML.
pub fn load_document<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse_document(&text, json)
}
