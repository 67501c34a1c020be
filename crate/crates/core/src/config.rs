//! Plain-text `key=value` files, used for both run configuration and dataset
//! manifests.
//!
//! Blank lines and lines starting with `#` are ignored. Keys and values are
//! trimmed; a value may itself contain `=`.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key=value, got {line:?}",
                    i + 1
                )));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            map.insert(key.to_string(), value.trim().to_string());
        }
        Ok(KeyValues(map))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.insert(key.into(), value.to_string());
    }

    /// Parses `key` as `T`, falling back to `default` when absent.
    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {raw:?}"))),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Everything the CLI reads from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub llm_base_url: Option<String>,
    pub llm_model: String,
    pub llm_temperature: f64,
    pub llm_max_tokens_gen: u32,
    pub llm_max_tokens_sum: u32,
    pub llm_concurrency: usize,
    pub llm_k_shots: usize,
    pub llm_api_key_env: String,
    pub llm_requests_per_second: f64,
    pub embed_base_url: Option<String>,
    pub embed_batch_size: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            llm_base_url: None,
            llm_model: "mock".to_string(),
            llm_temperature: 1.0,
            llm_max_tokens_gen: 256,
            llm_max_tokens_sum: 128,
            llm_concurrency: 4,
            llm_k_shots: 4,
            llm_api_key_env: "OPENAI_API_KEY".to_string(),
            llm_requests_per_second: 0.0,
            embed_base_url: None,
            embed_batch_size: 64,
            bm25_k1: 0.9,
            bm25_b: 0.4,
            seed: 0,
        }
    }
}

impl Config {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = Config::default();
        let cfg = Config {
            llm_base_url: kv.get("llm.base_url").map(str::to_string),
            llm_model: kv.get("llm.model").map(str::to_string).unwrap_or(d.llm_model),
            llm_temperature: kv.get_or("llm.temperature", d.llm_temperature)?,
            llm_max_tokens_gen: kv.get_or("llm.max_tokens.gen", d.llm_max_tokens_gen)?,
            llm_max_tokens_sum: kv.get_or("llm.max_tokens.sum", d.llm_max_tokens_sum)?,
            llm_concurrency: kv.get_or("llm.concurrency", d.llm_concurrency)?,
            llm_k_shots: kv.get_or("llm.k_shots", d.llm_k_shots)?,
            llm_api_key_env: kv
                .get("llm.api_key_env")
                .map(str::to_string)
                .unwrap_or(d.llm_api_key_env),
            llm_requests_per_second: kv
                .get_or("llm.requests_per_second", d.llm_requests_per_second)?,
            embed_base_url: kv.get("embed.base_url").map(str::to_string),
            embed_batch_size: kv.get_or("embed.batch_size", d.embed_batch_size)?,
            bm25_k1: kv.get_or("bm25.k1", d.bm25_k1)?,
            bm25_b: kv.get_or("bm25.b", d.bm25_b)?,
            seed: kv.get_or("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::read(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.llm_temperature.is_nan() || self.llm_temperature < 0.0 {
            return Err(Error::Config("llm.temperature must be >= 0".into()));
        }
        if self.llm_max_tokens_gen == 0 || self.llm_max_tokens_sum == 0 {
            return Err(Error::Config("llm.max_tokens.* must be > 0".into()));
        }
        if self.llm_concurrency == 0 {
            return Err(Error::Config("llm.concurrency must be >= 1".into()));
        }
        if self.embed_batch_size == 0 {
            return Err(Error::Config("embed.batch_size must be >= 1".into()));
        }
        if self.bm25_k1.is_nan() || self.bm25_k1 < 0.0 || !(0.0..=1.0).contains(&self.bm25_b) {
            return Err(Error::Config("bm25.k1 must be >= 0 and bm25.b in [0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values_with_equals() {
        let kv = KeyValues::parse("# comment\n\nllm.base_url = http://x/?a=b\n seed=7 \n").unwrap();
        assert_eq!(kv.get("llm.base_url"), Some("http://x/?a=b"));
        assert_eq!(kv.get("seed"), Some("7"));
        assert_eq!(KeyValues::parse(&kv.render()).unwrap(), kv);
    }

    #[test]
    fn rejects_line_without_equals() {
        assert!(matches!(KeyValues::parse("oops"), Err(Error::Config(_))));
    }

    #[test]
    fn config_defaults() {
        let cfg = Config::from_key_values(&KeyValues::new()).unwrap();
        assert_eq!(cfg.llm_temperature, 1.0);
        assert_eq!(cfg.llm_max_tokens_gen, 256);
        assert_eq!(cfg.llm_max_tokens_sum, 128);
        assert_eq!(cfg.llm_k_shots, 4);
        assert_eq!((cfg.bm25_k1, cfg.bm25_b), (0.9, 0.4));
    }

    #[test]
    fn config_rejects_negative_temperature() {
        let kv = KeyValues::parse("llm.temperature=-1").unwrap();
        assert!(matches!(Config::from_key_values(&kv), Err(Error::Config(_))));
        let kv = KeyValues::parse("llm.max_tokens.gen=zero").unwrap();
        assert!(matches!(Config::from_key_values(&kv), Err(Error::Config(_))));
    }
}
