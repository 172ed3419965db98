use std::path::Path;

use anyhow::{bail, Context, Result};
use plaquette::gibbs::BoundaryFamily;
use plaquette::mcmc::{ChainSpec, Observable};
use plaquette::Site;
use serde::Deserialize;

pub const SCHEMA: u32 = 1;

/// Parses `"x1,x2 x1,x2 ..."` (`;` also separates sites) or a JSON list
/// `[[x1,x2], ...]`.
pub fn parse_sites(s: &str) -> Result<Vec<Site>> {
    if s.trim_start().starts_with('[') {
        return serde_json::from_str(s).context("parsing JSON site list");
    }
    s.split(|c: char| c.is_whitespace() || c == ';')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (a, b) = t.split_once(',').with_context(|| format!("site '{t}' is not of the form x1,x2"))?;
            let a: i32 = a.trim().parse().with_context(|| format!("bad coordinate in '{t}'"))?;
            let b: i32 = b.trim().parse().with_context(|| format!("bad coordinate in '{t}'"))?;
            Ok(Site::new(a, b))
        })
        .collect()
}

/// `exhaustive` or `declared:K`; the latter needs a seed.
pub fn parse_family(s: &str, seed: Option<u64>) -> Result<BoundaryFamily> {
    if s == "exhaustive" {
        return Ok(BoundaryFamily::Exhaustive);
    }
    let Some(k) = s.strip_prefix("declared:") else {
        bail!("family must be 'exhaustive' or 'declared:K', got '{s}'");
    };
    let k: u32 = k.parse().with_context(|| format!("bad member count '{k}'"))?;
    let Some(seed) = seed else {
        bail!("--seed is required for a declared family");
    };
    Ok(BoundaryFamily::declared(k, seed))
}

/// Parses `"a..=b"`, `"a..b"` or a comma list.
pub fn parse_ells(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (inclusive, b) = match b.strip_prefix('=') {
            Some(b) => (true, b),
            None => (false, b),
        };
        let a: u64 = a.trim().parse().context("bad range start")?;
        let b: u64 = b.trim().parse().context("bad range end")?;
        let end = if inclusive { b + 1 } else { b };
        return Ok((a..end).collect());
    }
    s.split(',').map(|t| t.trim().parse::<u64>().with_context(|| format!("bad ell '{t}'"))).collect()
}

pub fn parse_betas(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().with_context(|| format!("bad beta '{t}'"))).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    pub schema: u32,
    pub chain: ChainSpec,
    pub observables: Vec<Observable>,
    /// Reference values, one per observable; `null` skips the comparison.
    #[serde(default)]
    pub targets: Vec<Option<f64>>,
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
    /// Independent copies pooled per observable.
    #[serde(default = "default_chains")]
    pub chains: u64,
}

fn default_sigmas() -> f64 {
    4.0
}

fn default_chains() -> u64 {
    1
}

impl McmcConfig {
    pub fn load(path: &Path) -> Result<McmcConfig> {
        let text = if path.as_os_str() == "-" {
            std::io::read_to_string(std::io::stdin()).context("reading config from stdin")?
        } else {
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
        };
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<McmcConfig> {
        let cfg: McmcConfig = serde_json::from_str(text).context("parsing chain config")?;
        if cfg.schema != SCHEMA {
            bail!("unsupported schema {} (expected {SCHEMA})", cfg.schema);
        }
        if cfg.observables.is_empty() {
            bail!("no observables given");
        }
        if !cfg.targets.is_empty() && cfg.targets.len() != cfg.observables.len() {
            bail!("{} targets for {} observables", cfg.targets.len(), cfg.observables.len());
        }
        if cfg.chains == 0 {
            bail!("chains must be at least 1");
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sites() {
        assert_eq!(parse_sites("0,0 1,-2;3,4").unwrap(), vec![Site::new(0, 0), Site::new(1, -2), Site::new(3, 4)]);
        assert!(parse_sites("0;1").is_err());
        assert_eq!(parse_sites("[[0,0],[2,-1]]").unwrap(), vec![Site::new(0, 0), Site::new(2, -1)]);
    }

    #[test]
    fn ells() {
        assert_eq!(parse_ells("1..=3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_ells("1..3").unwrap(), vec![1, 2]);
        assert_eq!(parse_ells("4,8").unwrap(), vec![4, 8]);
    }

    #[test]
    fn families() {
        assert!(parse_family("declared:4", None).is_err());
        assert!(parse_family("declared:4", Some(1)).is_ok());
        assert!(parse_family("all", Some(1)).is_err());
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let ok = r#"{"schema":1,"chain":{"model":"spm","region":{"kind":"square","ell":2},"bc":{"kind":"all_plus"},
            "beta":1.0,"seed":1,"sweeps":10,"burn_in":1},"observables":[{"kind":"magnetization"}]}"#;
        McmcConfig::parse(ok).unwrap();
        assert!(McmcConfig::parse(&ok.replace("\"schema\":1", "\"schema\":2")).is_err());
        assert!(McmcConfig::parse(&ok.replace("\"schema\":1", "\"schema\":1,\"extra\":0")).is_err());
    }
}
