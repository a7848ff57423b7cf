//! Scenario configuration: a TOML file of `key = value` entries and sections,
//! overlaid with command-line overrides, then validated into a typed config
//! before anything is computed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::dde_sim::DelayMode;
use crate::error::{Error, Result};
use crate::robustness::Dynamics;
use crate::topology::{GroundedSystem, PlatoonTopology, ReferenceSet};

/// How references are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arrangement {
    /// One reference in the middle of each length-(2k+1) segment.
    #[default]
    Md,
    /// The `refs` list.
    Explicit,
    /// A single reference at `position`.
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Report,
    DelayGrid,
    HinfSweep,
    AddRemove,
    Scaling,
    Simulate,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    Remove,
    Add,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsChoice {
    Velocity,
    Formation,
    #[default]
    Both,
}

impl DynamicsChoice {
    pub fn expand(self) -> Vec<Dynamics> {
        match self {
            DynamicsChoice::Velocity => vec![Dynamics::Velocity],
            DynamicsChoice::Formation => vec![Dynamics::Formation],
            DynamicsChoice::Both => vec![Dynamics::Velocity, Dynamics::Formation],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceKind {
    #[default]
    Zero,
    Sinusoid,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DelaySection {
    #[serde(default)]
    pub taus: Vec<f64>,
    /// Simulated time; defaults to 200/λ₁ capped at 500.
    pub horizon: Option<f64>,
    /// Integration step; defaults to min(1e-3, τ/40).
    pub step: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepSection {
    #[serde(default)]
    pub mode: SweepMode,
    #[serde(default)]
    pub dynamics: DynamicsChoice,
    /// Log-grid size for `hinf-sweep`.
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScalingSection {
    #[serde(default)]
    pub ns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateSection {
    pub dynamics: Dynamics,
    pub tau: f64,
    pub mode: DelayModeName,
    pub disturbance: DisturbanceKind,
    pub amplitude: f64,
    pub omega: f64,
    pub phase_step: f64,
    pub u_ref: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            dynamics: Dynamics::Velocity,
            tau: 0.0,
            mode: DelayModeName::FullDelay,
            disturbance: DisturbanceKind::Zero,
            amplitude: 0.0,
            omega: 1.0,
            phase_step: 0.0,
            u_ref: 0.0,
        }
    }
}

/// Config-file spelling of [`DelayMode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayModeName {
    FullDelay,
    SelfUndelayed,
    None,
}

impl From<DelayModeName> for DelayMode {
    fn from(m: DelayModeName) -> Self {
        match m {
            DelayModeName::FullDelay => DelayMode::FullDelay,
            DelayModeName::SelfUndelayed => DelayMode::SelfUndelayed,
            DelayModeName::None => DelayMode::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

/// Fully merged configuration for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScenarioConfig {
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub arrangement: Arrangement,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refs: Vec<usize>,
    pub position: Option<usize>,
    pub experiment: Experiment,
    /// Threshold for the γ predicates in reports and verification.
    pub gamma: Option<f64>,
    #[serde(default)]
    pub delay: DelaySection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub scaling: ScalingSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ScenarioConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn from_table(table: Table) -> Result<Self> {
        let cfg: Self = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` (if any), applies `overrides`, and validates.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut table = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                .parse::<Table>()
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => Table::new(),
        };
        overrides.apply(&mut table);
        Self::from_table(table)
    }

    /// Effective configuration as TOML.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn reference_set(&self) -> Result<ReferenceSet> {
        match self.arrangement {
            Arrangement::Md => ReferenceSet::minimally_dense(self.n, self.k),
            Arrangement::Explicit => ReferenceSet::new(self.n, self.refs.iter().copied()),
            Arrangement::Single => ReferenceSet::single(
                self.n,
                self.position
                    .ok_or_else(|| Error::Config("arrangement = \"single\" needs `position`".into()))?,
            ),
        }
    }

    pub fn grounded(&self) -> Result<GroundedSystem> {
        let topo = PlatoonTopology::new(self.n, self.k)?;
        GroundedSystem::new(&topo, &self.reference_set()?)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n < 2 {
            return bad(format!("n must be >= 2, got {}", self.n));
        }
        if self.k < 1 {
            return bad("k must be >= 1".into());
        }
        match self.arrangement {
            Arrangement::Explicit if self.refs.is_empty() => {
                return bad("arrangement = \"explicit\" needs a nonempty `refs` list".into())
            }
            Arrangement::Single if self.position.is_none() => {
                return bad("arrangement = \"single\" needs `position`".into())
            }
            _ => {}
        }
        if let Some(&r) = self.refs.iter().find(|&&r| r == 0 || r > self.n) {
            return bad(format!("reference index {r} outside 1..={}", self.n));
        }
        if let Some(p) = self.position {
            if p == 0 || p > self.n {
                return bad(format!("position {p} outside 1..={}", self.n));
            }
        }
        // the placement must leave at least one follower
        let refs = self.reference_set()?;
        if refs.followers().is_empty() {
            return bad("every vehicle is a reference".into());
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("gamma must be positive, got {g}"));
            }
        }
        if let Some(h) = self.delay.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("delay.horizon must be positive, got {h}"));
            }
        }
        if let Some(s) = self.delay.step {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("delay.step must be positive, got {s}"));
            }
        }
        if let Some(&t) = self.delay.taus.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return bad(format!("delay.taus entry {t} is not a nonnegative number"));
        }
        if self.sweep.points == Some(0) {
            return bad("sweep.points must be >= 1".into());
        }
        match self.experiment {
            Experiment::DelayGrid if self.delay.taus.is_empty() => {
                return bad("delay-grid needs a nonempty delay.taus list".into())
            }
            Experiment::Scaling => {
                if self.scaling.ns.len() < 5 {
                    return bad(format!(
                        "scaling needs at least 5 values in scaling.ns, got {}",
                        self.scaling.ns.len()
                    ));
                }
                if let Some(&n) = self.scaling.ns.iter().find(|&&n| n < 2) {
                    return bad(format!("scaling.ns entry {n} must be >= 2"));
                }
            }
            Experiment::AddRemove if self.arrangement != Arrangement::Md => {
                return bad("add/remove sweeps start from the md arrangement".into())
            }
            Experiment::Simulate => {
                let s = &self.simulate;
                if !(s.tau >= 0.0 && s.tau.is_finite()) {
                    return bad(format!("simulate.tau must be nonnegative, got {}", s.tau));
                }
                if s.mode == DelayModeName::SelfUndelayed && s.dynamics != Dynamics::Velocity {
                    return bad("simulate.mode = \"self-undelayed\" needs velocity dynamics".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Command-line overrides keyed by dotted config path (`delay.horizon`).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    entries: Vec<(String, Value)>,
}

impl Overrides {
    pub fn new() -> Self {
        Self::default()
    }

    fn set(&mut self, key: &str, value: Value) -> &mut Self {
        self.entries.push((key.to_string(), value));
        self
    }

    pub fn set_usize(&mut self, key: &str, v: usize) -> &mut Self {
        self.set(key, Value::Integer(v as i64))
    }

    pub fn set_u64(&mut self, key: &str, v: u64) -> &mut Self {
        self.set(key, Value::Integer(v as i64))
    }

    pub fn set_f64(&mut self, key: &str, v: f64) -> &mut Self {
        self.set(key, Value::Float(v))
    }

    pub fn set_str(&mut self, key: &str, v: &str) -> &mut Self {
        self.set(key, Value::String(v.to_string()))
    }

    pub fn set_usize_list(&mut self, key: &str, v: &[usize]) -> &mut Self {
        self.set(key, Value::Array(v.iter().map(|&x| Value::Integer(x as i64)).collect()))
    }

    pub fn set_f64_list(&mut self, key: &str, v: &[f64]) -> &mut Self {
        self.set(key, Value::Array(v.iter().map(|&x| Value::Float(x)).collect()))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn apply(&self, table: &mut Table) {
        for (key, value) in &self.entries {
            let mut parts: Vec<&str> = key.split('.').collect();
            let leaf = parts.pop().expect("nonempty key");
            let mut cur = &mut *table;
            for p in parts {
                let entry = cur
                    .entry(p.to_string())
                    .or_insert_with(|| Value::Table(Table::new()));
                if !entry.is_table() {
                    *entry = Value::Table(Table::new());
                }
                cur = entry.as_table_mut().expect("just ensured a table");
            }
            cur.insert(leaf.to_string(), value.clone());
        }
    }
}
