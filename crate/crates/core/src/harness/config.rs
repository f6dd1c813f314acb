//! Run configuration: platform parameters, simulator settings and controller
//! tuning, loaded from TOML with optional `section.key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::allocation::AllocationConfig;
use crate::controller::{LqiWeights, PidGains};
use crate::error::{Error, Result};
use crate::ftc::CompensationConfig;
use crate::model::{PlatformConfig, PlatformParams};
use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub platform: PlatformConfig,
    pub sim: SimConfig,
    pub allocation: AllocationConfig,
    pub lqi: LqiWeights,
    pub lowlevel: PidGains,
    pub compensation: CompensationConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Apply `a.b.c=value` overrides. Values are parsed as TOML, falling back
    /// to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (path, raw) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{}` is not key=value", o.as_ref())))?;
            set_path(&mut root, path.trim(), parse_value(raw.trim()))?;
        }
        let cfg: Self = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        PlatformParams::new(&self.platform)?;
        if !(self.sim.dt_physics > 0.0) {
            return Err(Error::Config("sim.dt_physics must be positive".into()));
        }
        if let Some(d) = self.sim.comm_delay {
            if !(d >= 0.0) {
                return Err(Error::Config("sim.comm_delay must be nonnegative".into()));
            }
        }
        let n = self.sim.noise;
        if [n.position, n.attitude, n.rate].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("noise standard deviations must be finite and nonnegative".into()));
        }
        let g = &self.lowlevel;
        if [g.kp, g.ki, g.kd, g.integral_limit].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("low-level gains must be nonnegative".into()));
        }
        let a = &self.allocation;
        if !(a.d_alpha_max > 0.0 && a.d_thrust_max > 0.0 && a.alpha_min < a.alpha_max) {
            return Err(Error::Config("allocation rate limits must be positive and alpha_min < alpha_max".into()));
        }
        if a.p_diag.iter().chain(a.q_diag.iter()).any(|v| !(*v > 0.0)) {
            return Err(Error::Config("allocation weights must be positive".into()));
        }
        let c = &self.compensation;
        if c.a_diag.iter().chain(c.b_diag.iter()).any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("compensation weights must be nonnegative".into()));
        }
        Ok(())
    }
}

fn parse_value(raw: &str) -> Value {
    match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{path}`")));
    }
    for (n, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{path}`: `{part}` is not inside a table")))?;
        if n + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrip() {
        let cfg = Config::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(Config::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = Config::from_toml_str("[platform]\nt_max = 0.2\n").unwrap();
        assert_eq!(cfg.platform.t_max, 0.2);
        assert_eq!(cfg.sim, SimConfig::default());
    }

    #[test]
    fn overrides() {
        let cfg = Config::default()
            .with_overrides(&["platform.t_max=0.2", "sim.seed=9", "lqi.pos=[1.0, 2.0, 3.0]", "sim.comm_delay=0.0"])
            .unwrap();
        assert_eq!(cfg.platform.t_max, 0.2);
        assert_eq!(cfg.sim.seed, 9);
        assert_eq!(cfg.lqi.pos, [1.0, 2.0, 3.0]);
        assert_eq!(cfg.sim.comm_delay, Some(0.0));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(Config::from_toml_str("[platform]\nbogus = 1\n").is_err());
        assert!(Config::default().with_overrides(&["platform.bogus=1"]).is_err());
        assert!(Config::default().with_overrides(&["platform.t_max=-1"]).is_err());
        assert!(Config::default().with_overrides(&["sim.dt_physics=0"]).is_err());
        assert!(Config::default().with_overrides(&["novalue"]).is_err());
    }
}
