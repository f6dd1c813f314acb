//! Scenario description and the built-in registry.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trajectory::{TrajectoryKind, TrajectorySpec};
use crate::controller::LowLevelVariant;
use crate::error::{Error, Result};
use crate::model::{PropellerSet, NUM_QUADS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationMode {
    /// Minimum-norm force decomposition, no limits.
    Fd,
    #[default]
    Nullspace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerVariant {
    pub allocation: AllocationMode,
    pub lowlevel: LowLevelVariant,
    pub compensation: bool,
}

impl ControllerVariant {
    /// Nominal allocation with the reduced low-level map.
    pub const NL: Self =
        Self { allocation: AllocationMode::Fd, lowlevel: LowLevelVariant::Reduced28, compensation: false };
    /// Nullspace allocation, reduced low-level map and compensation.
    pub const FTC: Self =
        Self { allocation: AllocationMode::Nullspace, lowlevel: LowLevelVariant::Reduced28, compensation: true };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureEvent {
    pub time: f64,
    pub quad: usize,
    pub propellers: PropellerSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    #[serde(default)]
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub failures: Vec<FailureEvent>,
    #[serde(default)]
    pub variant: ControllerVariant,
    /// Noise seed; falls back to the config's `sim.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::Config(format!("{}: duration must be positive", self.name)));
        }
        if !self.trajectory.is_valid() {
            return Err(Error::Config(format!("{}: invalid trajectory", self.name)));
        }
        for f in &self.failures {
            if !(f.time >= 0.0 && f.time <= self.duration) {
                return Err(Error::Config(format!("{}: failure time {} outside run", self.name, f.time)));
            }
            if f.quad >= NUM_QUADS {
                return Err(Error::Config(format!("{}: quad index {} out of range", self.name, f.quad)));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// First failure time, if any.
    pub fn first_failure(&self) -> Option<f64> {
        self.failures.iter().map(|f| f.time).min_by(f64::total_cmp)
    }
}

fn fail(time: f64, quad: usize, props: &[usize]) -> FailureEvent {
    FailureEvent { time, quad, propellers: PropellerSet::from_indices(props).expect("valid propeller index") }
}

fn attitude(attitude: [f64; 3], period: f64, start: f64) -> TrajectorySpec {
    TrajectorySpec { kind: TrajectoryKind::AttitudeSinusoid, attitude, position: [0.0; 3], period, start }
}

fn scenario(
    name: &str,
    duration: f64,
    trajectory: TrajectorySpec,
    failures: Vec<FailureEvent>,
    variant: ControllerVariant,
) -> Scenario {
    Scenario { name: name.to_string(), duration, trajectory, failures, variant, seed: None }
}

fn fig4_trajectory() -> TrajectorySpec {
    attitude([0.0, 0.35, 0.0], 3.0, 0.5)
}

fn fig5_trajectory() -> TrajectorySpec {
    TrajectorySpec {
        kind: TrajectoryKind::SixDof,
        attitude: [1.22, 0.0, 0.0],
        position: [0.0, 0.5, 0.0],
        period: 4.0,
        start: 0.5,
    }
}

fn case1_trajectory() -> TrajectorySpec {
    attitude([0.1, 0.35, 0.1], 3.0, 0.5)
}

fn case2_trajectory() -> TrajectorySpec {
    attitude([0.5, 0.2, 0.4], 2.0, 0.5)
}

fn case3_trajectory() -> TrajectorySpec {
    attitude([0.2, 0.2, 0.2], 1.5, 0.5)
}

/// Names of the built-in scenarios, and the groups that run several of them.
pub const SCENARIO_NAMES: &[&str] = &[
    "hover",
    "fig4-fullrank27",
    "fig4-reduced28",
    "fig5-fd",
    "fig5-nullspace",
    "case1-nl",
    "case1-ftc",
    "case2-nl",
    "case2-ftc",
    "case3-nl",
    "case3-ftc",
];

pub const SCENARIO_GROUPS: &[(&str, &[&str])] = &[
    ("fig4-strategy-compare", &["fig4-fullrank27", "fig4-reduced28"]),
    ("fig5-saturation", &["fig5-fd", "fig5-nullspace"]),
    ("case1-unsaturated", &["case1-nl", "case1-ftc"]),
    ("case2-saturated", &["case2-nl", "case2-ftc"]),
    ("case3-two-fail", &["case3-nl", "case3-ftc"]),
];

pub fn builtin(name: &str) -> Option<Scenario> {
    let fd_full = ControllerVariant { lowlevel: LowLevelVariant::FullRank27, ..ControllerVariant::NL };
    let s = match name {
        "hover" => scenario("hover", 5.0, TrajectorySpec::default(), vec![], ControllerVariant::FTC),
        "fig4-fullrank27" => scenario(name, 12.0, fig4_trajectory(), vec![fail(2.0, 3, &[0])], fd_full),
        "fig4-reduced28" => scenario(name, 12.0, fig4_trajectory(), vec![fail(2.0, 3, &[0])], ControllerVariant::NL),
        "fig5-fd" => scenario(name, 15.0, fig5_trajectory(), vec![], ControllerVariant::NL),
        "fig5-nullspace" => scenario(name, 15.0, fig5_trajectory(), vec![], ControllerVariant::FTC),
        "case1-nl" => scenario(name, 8.0, case1_trajectory(), vec![fail(1.0, 3, &[0])], ControllerVariant::NL),
        "case1-ftc" => scenario(name, 8.0, case1_trajectory(), vec![fail(1.0, 3, &[0])], ControllerVariant::FTC),
        "case2-nl" => scenario(name, 15.0, case2_trajectory(), vec![fail(1.0, 3, &[0])], ControllerVariant::NL),
        "case2-ftc" => scenario(name, 15.0, case2_trajectory(), vec![fail(1.0, 3, &[0])], ControllerVariant::FTC),
        "case3-nl" => scenario(name, 15.0, case3_trajectory(), vec![fail(1.0, 3, &[0, 1])], ControllerVariant::NL),
        "case3-ftc" => scenario(name, 15.0, case3_trajectory(), vec![fail(1.0, 3, &[0, 1])], ControllerVariant::FTC),
        _ => return None,
    };
    Some(s)
}

/// Resolve a scenario name, group name or path to a TOML scenario file.
pub fn resolve(spec: &str) -> Result<Vec<Scenario>> {
    if let Some(s) = builtin(spec) {
        return Ok(vec![s]);
    }
    if let Some((_, members)) = SCENARIO_GROUPS.iter().find(|(g, _)| *g == spec) {
        return Ok(members.iter().filter_map(|m| builtin(m)).collect());
    }
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(vec![Scenario::load(path)?]);
    }
    Err(Error::UnknownScenario(spec.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete_and_valid() {
        for name in SCENARIO_NAMES {
            let s = builtin(name).unwrap();
            assert_eq!(&s.name, name);
            s.validate().unwrap();
        }
        for (group, members) in SCENARIO_GROUPS {
            assert_eq!(resolve(group).unwrap().len(), members.len());
        }
        assert!(resolve("no-such-scenario").is_err());
    }

    #[test]
    fn case2_amplitudes() {
        assert_eq!(builtin("case2-ftc").unwrap().trajectory.attitude, [0.5, 0.2, 0.4]);
        assert_eq!(builtin("case3-nl").unwrap().trajectory.attitude, [0.2, 0.2, 0.2]);
    }

    #[test]
    fn toml_roundtrip() {
        let s = builtin("case3-ftc").unwrap();
        let text = s.to_toml_string().unwrap();
        assert_eq!(Scenario::from_toml_str(&text).unwrap(), s);
    }

    #[test]
    fn rejects_bad_failure_schedule() {
        let mut s = builtin("case1-ftc").unwrap();
        s.failures[0].time = 100.0;
        assert!(s.validate().is_err());
        let mut s = builtin("case1-ftc").unwrap();
        s.failures[0].quad = 4;
        assert!(s.validate().is_err());
    }
}
