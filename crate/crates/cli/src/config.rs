//! Experiment configuration: command-line flags over an optional config file.

use momentlab::models::config::{model_from_name, model_from_section, Config};
use momentlab::models::StationaryModel;
use momentlab::{LabError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

/// Everything a run depends on. Output locations are deliberately absent so
/// the same experiment written to two places hashes identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: String,
    /// Preset name, or the canonical text of a model config file.
    pub model: String,
    pub p: f64,
    pub n_grid: Vec<usize>,
    pub paths: usize,
    pub seed: u64,
    pub theorems: Vec<String>,
    pub mode: String,
    pub tol: Option<f64>,
    /// Command-specific options (kernel, budget, ...).
    pub options: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configs serialize");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn option(&self, key: &str) -> Option<&str> {
        self.options.get(key).map(String::as_str)
    }

    pub fn option_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.option(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| LabError::Argument(format!("{key}: '{v}' is not a number"))),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        self.option(key) == Some("true")
    }

    /// The model named or described by `self.model`.
    pub fn build_model(&self) -> Result<StationaryModel> {
        if self.model.contains('=') {
            let cfg = Config::parse(&self.model)?;
            let sec = cfg
                .section("model")
                .filter(|s| !s.is_empty())
                .or_else(|| cfg.section(""))
                .ok_or_else(|| LabError::Argument("model config has no keys".into()))?;
            model_from_section(sec)
        } else {
            model_from_name(&self.model)
        }
    }
}

/// A model flag is either a preset name or a path to a config file; files
/// are replaced by their canonical text.
pub fn resolve_model(arg: &str) -> Result<String> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Argument(format!("{arg}: {e}")))?;
        let cfg = Config::parse(&text)?;
        let mut model = Config::default();
        let sec = cfg.section("model").filter(|s| !s.is_empty()).or_else(|| cfg.section("")).cloned().unwrap_or_default();
        model.sections.insert("model".into(), sec);
        Ok(model.canonical())
    } else if arg.ends_with(".cfg") {
        Err(LabError::Argument(format!("model file {arg} not found")))
    } else {
        Ok(arg.to_string())
    }
}

/// `a..b` doubles from a up to b; `a,b,c` lists horizons; a single number is
/// a one-point grid.
pub fn parse_grid(s: &str) -> Result<Vec<usize>> {
    let bad = || LabError::Argument(format!("cannot parse grid '{s}' (use a..b or a,b,c)"));
    let num = |t: &str| -> Result<usize> {
        let t = t.trim();
        if let Some(e) = t.strip_prefix("2^") {
            let e: u32 = e.parse().map_err(|_| bad())?;
            return 1usize.checked_shl(e).ok_or_else(bad);
        }
        t.parse().map_err(|_| bad())
    };
    let grid = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a == 0 || a > b {
            return Err(bad());
        }
        let mut g = vec![];
        let mut n = a;
        while n <= b {
            g.push(n);
            n *= 2;
        }
        g
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() || grid.contains(&0) {
        return Err(bad());
    }
    Ok(grid)
}

/// Keys of the `[experiment]` section of a `--config` file.
pub fn experiment_section(path: &str) -> Result<(BTreeMap<String, String>, Option<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::Argument(format!("{path}: {e}")))?;
    let cfg = Config::parse(&text)?;
    let exp = cfg.section("experiment").cloned().unwrap_or_default();
    let model = cfg.section("model").filter(|s| !s.is_empty()).map(|s| {
        let mut m = Config::default();
        m.sections.insert("model".into(), s.clone());
        m.canonical()
    });
    Ok((exp, model))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("4..32").unwrap(), vec![4, 8, 16, 32]);
        assert_eq!(parse_grid("2^4..2^6").unwrap(), vec![16, 32, 64]);
        assert_eq!(parse_grid("3,5,9").unwrap(), vec![3, 5, 9]);
        assert_eq!(parse_grid("100").unwrap(), vec![100]);
        assert!(parse_grid("8..4").is_err());
        assert!(parse_grid("0..4").is_err());
        assert!(parse_grid("x").is_err());
    }

    #[test]
    fn hash_ignores_nothing_it_holds() {
        let c = ExperimentConfig {
            command: "verify".into(),
            model: "coin".into(),
            p: 4.0,
            n_grid: vec![4, 8],
            paths: 10,
            seed: 1,
            theorems: vec!["directprop".into()],
            mode: "exact".into(),
            tol: None,
            options: BTreeMap::new(),
        };
        let mut d = c.clone();
        assert_eq!(c.hash(), d.hash());
        d.seed = 2;
        assert_ne!(c.hash(), d.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn inline_model_text() {
        let c = ExperimentConfig {
            command: "profile".into(),
            model: "[model]\nkind=coin\n".into(),
            p: 4.0,
            n_grid: vec![4],
            paths: 1,
            seed: 0,
            theorems: vec![],
            mode: "exact".into(),
            tol: None,
            options: BTreeMap::new(),
        };
        assert!(matches!(c.build_model().unwrap(), StationaryModel::Chain(_)));
    }
}
