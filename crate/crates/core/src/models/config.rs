//! Plain-text model configuration: `key = value` lines grouped under
//! `[section]` headers; `#` starts a comment.

use super::{ArchProcess, DeltaNuChain, DeltaNuSpec, FiniteChain, LinearFunctionalProcess, Noise, PowerH, StationaryModel};
use crate::error::{LabError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub type Section = BTreeMap<String, String>;

/// Sections by name; keys before any header live in section "".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub sections: BTreeMap<String, Section>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        let mut current = String::new();
        cfg.sections.insert(current.clone(), Section::new());
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| LabError::Argument(format!("line {}: unterminated section header", lineno + 1)))?;
                current = name.trim().to_string();
                cfg.sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::Argument(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.sections
                .get_mut(&current)
                .expect("section exists")
                .insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.get(name)
    }

    /// Canonical text form, stable under reordering of the input.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (name, sec) in &self.sections {
            if sec.is_empty() {
                continue;
            }
            out.push_str(&format!("[{name}]\n"));
            for (k, v) in sec {
                out.push_str(&format!("{k}={v}\n"));
            }
        }
        out
    }
}

fn get_f64(sec: &Section, key: &str, default: f64) -> Result<f64> {
    match sec.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| LabError::Argument(format!("{key}: cannot parse '{v}' as a number"))),
    }
}

fn get_usize(sec: &Section, key: &str, default: usize) -> Result<usize> {
    match sec.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| LabError::Argument(format!("{key}: cannot parse '{v}' as an integer"))),
    }
}

fn parse_vec(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| LabError::Argument(format!("cannot parse '{t}'"))))
        .collect()
}

/// Rows separated by `;`.
fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';').filter(|r| !r.trim().is_empty()).map(parse_vec).collect()
}

fn get_noise(sec: &Section) -> Result<Noise> {
    match sec.get("noise") {
        None => Ok(Noise::Gaussian),
        Some(v) => Noise::parse(v).ok_or_else(|| LabError::Argument(format!("unknown noise '{v}'"))),
    }
}

/// Build a model from one section. `kind` selects the family; the
/// remaining keys are family parameters with defaults.
pub fn model_from_section(sec: &Section) -> Result<StationaryModel> {
    let kind = sec.get("kind").map(String::as_str).unwrap_or("eigen");
    model_from_kind(kind, sec)
}

/// Named presets for the CLI `--model` flag.
pub fn model_from_name(name: &str) -> Result<StationaryModel> {
    model_from_kind(name, &Section::new())
}

fn model_from_kind(kind: &str, sec: &Section) -> Result<StationaryModel> {
    let m = match kind {
        "coin" => StationaryModel::Chain(FiniteChain::coin()),
        "eigen" => StationaryModel::Chain(FiniteChain::eigen()),
        "swap" => StationaryModel::Chain(FiniteChain::swap()),
        "mds" => {
            let base = match sec.get("base").map(String::as_str).unwrap_or("eigen") {
                "coin" => FiniteChain::coin(),
                "swap" => FiniteChain::swap(),
                _ => FiniteChain::eigen(),
            };
            StationaryModel::Chain(FiniteChain::sign_randomized(&base))
        }
        "chain" => {
            let q = parse_matrix(sec.get("q").ok_or_else(|| LabError::Argument("chain needs q".into()))?)?;
            let f = parse_vec(sec.get("f").ok_or_else(|| LabError::Argument("chain needs f".into()))?)?;
            if sec.get("center").map(|v| v == "true").unwrap_or(false) {
                StationaryModel::Chain(FiniteChain::centered(q, f)?)
            } else {
                StationaryModel::Chain(FiniteChain::new(q, f)?)
            }
        }
        "random" => {
            let s = get_usize(sec, "states", 3)?;
            if s < 2 {
                return Err(LabError::Argument("random chains need at least 2 states".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(get_usize(sec, "seed", 0)? as u64);
            StationaryModel::Chain(FiniteChain::random(s, &mut rng))
        }
        "delta_nu" => {
            let mut spec = DeltaNuSpec::new(get_f64(sec, "p", 4.0)?, get_f64(sec, "lambda", 5.0)?);
            spec.taper = get_f64(sec, "taper", spec.taper)?;
            spec.cells = get_usize(sec, "cells", spec.cells)?;
            spec.lower = get_f64(sec, "lower", spec.lower)?;
            spec.f_scale = get_f64(sec, "f_scale", spec.f_scale)?;
            StationaryModel::DeltaNu(DeltaNuChain::new(spec)?)
        }
        "arch" => {
            let noise = get_noise(sec)?;
            let c = get_f64(sec, "c", 1.0)?;
            let mut a = match sec.get("coeffs") {
                Some(v) => ArchProcess::new(c, parse_vec(v)?, noise)?,
                None => ArchProcess::geometric(
                    c,
                    get_f64(sec, "kappa", 0.125)?,
                    get_f64(sec, "rho", 0.5)?,
                    get_usize(sec, "lags", 64)?,
                    noise,
                )?,
            };
            a.burn_in = get_usize(sec, "burn_in", a.burn_in)?;
            a.depth = get_usize(sec, "depth", a.depth)?;
            StationaryModel::Arch(a)
        }
        "linear" => {
            let alpha = get_f64(sec, "alpha", 0.0)?;
            let gamma = get_f64(sec, "gamma", 1.0)?;
            let h = match sec.get("h").map(String::as_str).unwrap_or("odd") {
                "odd" => PowerH::Odd { alpha, gamma },
                "even" => PowerH::Even { alpha, gamma },
                other => return Err(LabError::Argument(format!("h must be odd or even, got '{other}'"))),
            };
            StationaryModel::Linear(LinearFunctionalProcess::power_decay(
                get_f64(sec, "decay", 1.5)?,
                get_usize(sec, "window", 200)?,
                h,
                get_noise(sec)?,
            )?)
        }
        other => return Err(LabError::Argument(format!("unknown model kind '{other}'"))),
    };
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let cfg = Config::parse("seed = 3\n# note\n[model]\nkind = arch  # inline\nlags=8\n").unwrap();
        assert_eq!(cfg.section("").unwrap()["seed"], "3");
        let m = cfg.section("model").unwrap();
        assert_eq!(m["kind"], "arch");
        match model_from_section(m).unwrap() {
            StationaryModel::Arch(a) => assert_eq!(a.lags(), 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn canonical_ignores_order() {
        let a = Config::parse("[m]\nx=1\ny=2\n").unwrap();
        let b = Config::parse("[m]\ny=2\nx=1\n").unwrap();
        assert_eq!(a.canonical(), b.canonical());
    }

    #[test]
    fn explicit_chain() {
        let cfg = Config::parse("[m]\nkind=chain\nq=0.9 0.1; 0.2 0.8\nf=1 -2\n").unwrap();
        match model_from_section(cfg.section("m").unwrap()).unwrap() {
            StationaryModel::Chain(c) => {
                assert_eq!(c.matrix(), FiniteChain::eigen().matrix());
                assert!((c.pi()[0] - 2.0 / 3.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_input_rejected() {
        assert!(Config::parse("[m\n").is_err());
        assert!(Config::parse("novalue\n").is_err());
        assert!(model_from_name("nope").is_err());
        let cfg = Config::parse("kind=arch\nkappa=0.9\nrho=1\nlags=4\n").unwrap();
        assert!(matches!(model_from_section(cfg.section("").unwrap()), Err(LabError::Construction(_))));
    }
}
