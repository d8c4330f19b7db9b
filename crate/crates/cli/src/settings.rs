//! Typed access to run configuration shared by the commands.

use std::path::PathBuf;

use anyhow::Result;
use partbias_core::io::{Config, Section};
use partbias_core::ldsc::Intercept;
use partbias_core::{Error, SelectionContext};

use crate::{Cli, CELL_BUDGET_ENV};

pub fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name: name.to_string(), reason: reason.into() }
}

pub fn load(cli: &Cli) -> Result<Option<Config>> {
    Ok(match &cli.config {
        Some(p) => Some(Config::read(p)?),
        None => None,
    })
}

pub fn require(cli: &Cli) -> Result<Config> {
    load(cli)?.ok_or_else(|| Error::MissingInput("--config is required for this command".into()).into())
}

pub fn section<'a>(cfg: &'a Config, name: &str) -> Result<&'a Section> {
    cfg.section(name)
        .ok_or_else(|| Error::MissingInput(format!("section [{name}] in {}", cfg.path.display())).into())
}

pub fn selection(cfg: &Config) -> Result<SelectionContext> {
    let alpha = section(cfg, "participation")?.require_f64(cfg, "alpha")?;
    Ok(SelectionContext::new(alpha)?)
}

/// Heritability of participation; there is deliberately no default.
pub fn h2x(cfg: &Config) -> Result<f64> {
    let sec = section(cfg, "participation")?;
    sec.f64(cfg, "h2x")?.ok_or_else(|| {
        Error::MissingInput(format!(
            "`h2x` in [participation] of {} (participation heritability has no default)",
            cfg.path.display()
        ))
        .into()
    })
}

/// `free` or a fixed numeric intercept.
pub fn intercept(cfg: &Config, sec: &Section, key: &str, default: Intercept) -> Result<Intercept> {
    match sec.get(key) {
        None => Ok(default),
        Some(e) if e.value.eq_ignore_ascii_case("free") => Ok(Intercept::Free),
        Some(e) => e
            .value
            .parse::<f64>()
            .map(Intercept::Fixed)
            .map_err(|_| cfg.parse_err(e.line, format!("{key}: expected `free` or a number, got `{}`", e.value)).into()),
    }
}

pub fn require_path(cfg: &Config, sec: &Section, key: &str) -> Result<PathBuf> {
    let v = sec
        .str(key)
        .ok_or_else(|| Error::MissingInput(format!("`{key}` in [{}] of {}", sec.name, cfg.path.display())))?;
    Ok(cfg.resolve(v))
}

/// Phenotype sections `[phenotype.NAME]` in file order.
pub fn phenotypes(cfg: &Config) -> Result<Vec<(String, &Section)>> {
    let list: Vec<(String, &Section)> =
        cfg.sections_with_prefix("phenotype").map(|(n, s)| (n.to_string(), s)).collect();
    if list.is_empty() {
        return Err(Error::MissingInput(format!("no [phenotype.NAME] sections in {}", cfg.path.display())).into());
    }
    Ok(list)
}

/// Pair sections `[pair.A:B]` as `(A, B, section)`.
pub fn pairs(cfg: &Config) -> Result<Vec<(String, String, &Section)>> {
    cfg.sections_with_prefix("pair")
        .map(|(name, s)| {
            let (a, b) = name
                .split_once(':')
                .ok_or_else(|| cfg.parse_err(s.line, format!("pair section `{name}` must be `pair.A:B`")))?;
            Ok((a.trim().to_string(), b.trim().to_string(), s))
        })
        .collect()
}

/// `--seed`, else `seed` in `[simulation]` or the root section, else 0.
pub fn seed(cli: &Cli, cfg: &Config) -> Result<u64> {
    if let Some(s) = cli.seed {
        return Ok(s);
    }
    for name in ["simulation", ""] {
        if let Some(sec) = cfg.section(name) {
            if let Some(s) = sec.get("seed") {
                return s.value.parse().map_err(|_| cfg.parse_err(s.line, "seed: expected an unsigned integer").into());
            }
        }
    }
    Ok(0)
}

pub fn threads(cli: &Cli) -> usize {
    cli.threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1)
}

pub fn cell_budget() -> Result<Option<u64>> {
    match std::env::var(CELL_BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| invalid(CELL_BUDGET_ENV, format!("`{v}` is not a cell count")).into()),
        Err(_) => Ok(None),
    }
}

/// `column:lo:hi` items, comma separated.
pub fn filters(cfg: &Config, sec: &Section, key: &str) -> Result<Vec<(String, f64, f64)>> {
    let line = sec.get(key).map(|e| e.line).unwrap_or(sec.line);
    sec.list(key)
        .iter()
        .map(|item| {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            let bad = || cfg.parse_err(line, format!("{key}: expected `column:lo:hi`, got `{item}`"));
            if parts.len() != 3 || parts[0].is_empty() {
                return Err(bad().into());
            }
            let lo: f64 = parts[1].parse().map_err(|_| bad())?;
            let hi: f64 = parts[2].parse().map_err(|_| bad())?;
            Ok((parts[0].to_string(), lo, hi))
        })
        .collect()
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}
