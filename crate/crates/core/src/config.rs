//! Campaign configuration files (TOML).
//!
//! ```toml
//! [space]
//! odd_name = "wall"
//! continuous = [{ name = "d", lower = 0.0, upper = 20.0 }]
//!
//! [resolution]
//! half_widths = [0.5]
//!
//! [episode]
//! duration = 5.0
//! step = 0.01
//! ego = { model = "longitudinal", v = 10.0, accel = [-5.0, 2.0] }
//! agents = [{ x = 30.0, behavior = "constant_velocity" }]
//!
//! [binding.params]
//! d = "agents.0.gap"
//!
//! [policy]
//! name = "brake"
//! kind = "white_box"
//! law = { law = "brake", decel = 5.0 }
//!
//! [spec]
//! clause = "the ego never touches another road user"
//! formula = "G[0,5] collision_free"
//!
//! [engine]
//! mode = "formal"
//! ```
//!
//! Every block is validated on load; a block a command needs but the file
//! lacks is reported when that command asks for it. Errors name the field
//! path they concern.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::coverage::{Campaign, CellTest, Mode, SafetySpec};
use crate::interval::IBox;
use crate::reachability::{model_by_name, DynamicalSystem, GridGeometry, ReachSpec};
use crate::scenario_space::{Resolution, ScenarioSpace};
use crate::stl::PredicateRegistry;
use crate::traffic_sim::{BlackBox, Binding, ControlLaw, EpisodeConfig, Policy, TermRealization};
use crate::verification::AprioriOptions;

pub const CONFIG_SCHEMA: &str = "scov-config/1";

/// Field path plus message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self { path: path.into(), message: message.to_string() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKindName {
    WhiteBox,
    GreyBox,
    /// The law is hidden behind an opaque interface, optionally with noise.
    BlackBox,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyBlock {
    pub name: String,
    pub kind: PolicyKindName,
    pub law: ControlLaw,
    /// Grey box: bounds of the unknown additive term, one pair per input.
    #[serde(default)]
    pub term: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub realization: Option<TermRealization>,
    /// Black box: amplitude of uniform acceleration noise.
    #[serde(default)]
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionBlock {
    pub half_widths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecBlock {
    pub clause: String,
    pub formula: String,
}

fn default_lookahead() -> f64 {
    AprioriOptions::default().lookahead
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineBlock {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub cell_test: CellTest,
    /// Tube lookahead in seconds.
    #[serde(default = "default_lookahead")]
    pub lookahead: f64,
}

fn default_mode() -> Mode {
    Mode::Formal
}

impl Default for EngineBlock {
    fn default() -> Self {
        Self { mode: default_mode(), cell_test: CellTest::default(), lookahead: default_lookahead() }
    }
}

/// Grid reachability problem for `scov reach`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachBlock {
    pub model: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub x_box: Vec<(f64, f64)>,
    pub u_box: Vec<(f64, f64)>,
    #[serde(default)]
    pub d_box: Vec<(f64, f64)>,
    /// Grid cells per state dimension.
    pub cells: Vec<usize>,
    /// Initial set for forward problems, target set for backward ones.
    pub seed_box: Vec<(f64, f64)>,
    pub horizon: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsBlock {
    pub ledger: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub reach: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    schema: Option<String>,
    space: Option<ScenarioSpace>,
    resolution: Option<ResolutionBlock>,
    episode: Option<EpisodeConfig>,
    #[serde(default)]
    binding: Binding,
    policy: Option<PolicyBlock>,
    spec: Option<SpecBlock>,
    #[serde(default)]
    engine: EngineBlock,
    reach: Option<ReachBlock>,
    #[serde(default)]
    outputs: OutputsBlock,
}

/// A validated configuration file.
#[derive(Debug, Clone)]
pub struct Config {
    /// SHA-256 of the file contents.
    pub hash: String,
    pub space: Option<(ScenarioSpace, Resolution)>,
    pub episode: Option<EpisodeConfig>,
    pub binding: Binding,
    pub policy: Option<Policy>,
    pub spec: Option<SafetySpec>,
    pub engine: EngineBlock,
    pub reach: Option<ReachSetup>,
    pub outputs: OutputsBlock,
    /// Directory relative output paths resolve against.
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ReachSetup {
    pub system: DynamicalSystem,
    pub geometry: GridGeometry,
    pub seed_box: IBox,
    pub horizon: f64,
    pub step: f64,
}

impl ReachSetup {
    /// Named reachability problem over the configured horizon.
    pub fn spec(&self, kind: &str) -> Result<ReachSpec, ConfigError> {
        let t = self.horizon;
        Ok(match kind {
            "maxfrs" => ReachSpec::max_frs(t),
            "minfrs" => ReachSpec::min_frs(t),
            "maxbrs" => ReachSpec::max_brs(t),
            "minbrs" => ReachSpec::min_brs(t),
            "maxfrt" => ReachSpec::max_frt(t),
            "adversarial" => ReachSpec::adversarial_frs(t),
            other => return Err(ConfigError::at("--spec-kind", format!("unknown reach kind `{other}`"))),
        })
    }
}

fn boxed(path: &str, pairs: &[(f64, f64)]) -> Result<IBox, ConfigError> {
    if let Some((lo, hi)) = pairs.iter().find(|(lo, hi)| !(lo <= hi) || lo.is_nan()) {
        return Err(ConfigError::at(path, format!("bounds [{lo}, {hi}] are not ordered")));
    }
    let lo: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let hi: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(IBox::from_bounds(&lo, &hi))
}

fn build_policy(p: &PolicyBlock, u_box: Option<&IBox>) -> Result<Policy, ConfigError> {
    if p.name.trim().is_empty() {
        return Err(ConfigError::at("policy.name", "must not be empty"));
    }
    let only = |field: &str, present: bool, kind: &str| {
        if present {
            Err(ConfigError::at(format!("policy.{field}"), format!("only allowed for {kind} policies")))
        } else {
            Ok(())
        }
    };
    let policy = match p.kind {
        PolicyKindName::WhiteBox => {
            only("term", p.term.is_some(), "grey_box")?;
            only("realization", p.realization.is_some(), "grey_box")?;
            only("noise", p.noise.is_some(), "black_box")?;
            Policy::white_box(&p.name, p.law.clone())
        }
        PolicyKindName::GreyBox => {
            only("noise", p.noise.is_some(), "black_box")?;
            let term = p.term.as_ref().ok_or_else(|| ConfigError::at("policy.term", "grey_box needs a term box"))?;
            let term = boxed("policy.term", term)?;
            Policy::grey_box(&p.name, p.law.clone(), term, p.realization.unwrap_or(TermRealization::Center))
        }
        PolicyKindName::BlackBox => {
            only("term", p.term.is_some(), "grey_box")?;
            only("realization", p.realization.is_some(), "grey_box")?;
            let noise = p.noise.unwrap_or(0.0);
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(ConfigError::at("policy.noise", "must be finite and nonnegative"));
            }
            p.law.validate().map_err(|e| ConfigError::at("policy.law", e))?;
            Policy::black_box(&p.name, BlackBox::noisy(p.law.clone(), noise))
        }
    };
    if let Some(u) = u_box {
        policy.validate(u).map_err(|e| ConfigError::at("policy", e))?;
    }
    Ok(policy)
}

fn build_reach(r: &ReachBlock) -> Result<ReachSetup, ConfigError> {
    let flow = model_by_name(&r.model, &r.params).map_err(|e| ConfigError::at("reach.model", e))?;
    let x = boxed("reach.x_box", &r.x_box)?;
    let u = boxed("reach.u_box", &r.u_box)?;
    let d = boxed("reach.d_box", &r.d_box)?;
    let system = DynamicalSystem::new(Arc::clone(&flow), x.clone(), u, d).map_err(|e| ConfigError::at("reach", e))?;
    let geometry = GridGeometry::new(&x, r.cells.clone()).map_err(|e| ConfigError::at("reach.cells", e))?;
    let seed_box = boxed("reach.seed_box", &r.seed_box)?;
    if seed_box.dim() != x.dim() {
        return Err(ConfigError::at("reach.seed_box", format!("needs {} dimension(s)", x.dim())));
    }
    ReachSpec::max_frs(r.horizon).steps(r.step).map_err(|e| ConfigError::at("reach.step", e))?;
    Ok(ReachSetup { system, geometry, seed_box, horizon: r.horizon, step: r.step })
}

/// Prefix a deserialization path, rendering the root as empty.
fn serde_path(p: &serde_path_to_error::Path) -> String {
    let s = p.to_string();
    if s == "." {
        String::new()
    } else {
        s
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = serde_path(e.path());
            ConfigError::at(path, e.into_inner().message().trim())
        })?;
        if let Some(s) = &raw.schema {
            if s != CONFIG_SCHEMA {
                return Err(ConfigError::at("schema", format!("`{s}`, expected `{CONFIG_SCHEMA}`")));
            }
        }
        let space = match (raw.space, raw.resolution) {
            (Some(space), Some(res)) => {
                let r = Resolution::new(&space, res.half_widths).map_err(|e| ConfigError::at("resolution.half_widths", e))?;
                Some((space, r))
            }
            (Some(_), None) => return Err(ConfigError::at("resolution", "missing block (the space needs a resolution)")),
            (None, Some(_)) => return Err(ConfigError::at("space", "missing block (the resolution needs a space)")),
            (None, None) => None,
        };
        if let Some(e) = &raw.episode {
            e.validate().map_err(|err| ConfigError::at("episode", err))?;
        }
        if let (Some((space, _)), Some(base)) = (&space, &raw.episode) {
            raw.binding.check(space, base).map_err(|e| ConfigError::at("binding", e))?;
        }
        let policy = match &raw.policy {
            Some(p) => Some(build_policy(p, raw.episode.as_ref().map(|e| e.ego.u_box()).as_ref())?),
            None => None,
        };
        let spec = match &raw.spec {
            Some(s) => {
                if s.clause.trim().is_empty() {
                    return Err(ConfigError::at("spec.clause", "must not be empty"));
                }
                Some(
                    SafetySpec::parse(&s.clause, &s.formula, &PredicateRegistry::with_builtins())
                        .map_err(|e| ConfigError::at("spec.formula", e))?,
                )
            }
            None => None,
        };
        if !(raw.engine.lookahead > 0.0 && raw.engine.lookahead.is_finite()) {
            return Err(ConfigError::at("engine.lookahead", "must be positive"));
        }
        let reach = raw.reach.as_ref().map(build_reach).transpose()?;
        Ok(Self {
            hash: hex::encode(Sha256::digest(text.as_bytes())),
            space,
            episode: raw.episode,
            binding: raw.binding,
            policy,
            spec,
            engine: raw.engine,
            reach,
            outputs: raw.outputs,
            base_dir: PathBuf::from("."),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::at("", format!("{}: {e}", path.display())))?;
        let mut c = Self::from_toml_str(&text)?;
        c.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    pub fn space(&self) -> Result<&(ScenarioSpace, Resolution), ConfigError> {
        self.space.as_ref().ok_or_else(|| ConfigError::at("space", "missing block"))
    }

    pub fn reach(&self) -> Result<&ReachSetup, ConfigError> {
        self.reach.as_ref().ok_or_else(|| ConfigError::at("reach", "missing block"))
    }

    /// The campaign the file describes, stamped with the file hash.
    pub fn campaign(&self) -> Result<Campaign, ConfigError> {
        let missing = |b: &str| ConfigError::at(b, "missing block");
        let (space, res) = self.space()?.clone();
        let base = self.episode.clone().ok_or_else(|| missing("episode"))?;
        let policy = self.policy.clone().ok_or_else(|| missing("policy"))?;
        let spec = self.spec.clone().ok_or_else(|| missing("spec"))?;
        let mut c = Campaign::new(space, res, spec, policy, self.engine.mode, base, self.binding.clone());
        c.cell_test = self.engine.cell_test;
        c.apriori = AprioriOptions { lookahead: self.engine.lookahead };
        c.config_hash = Some(self.hash.clone());
        Ok(c)
    }

    /// Output path resolved against the configuration's directory.
    pub fn output(&self, p: &Option<PathBuf>) -> Option<PathBuf> {
        p.as_ref().map(|p| if p.is_absolute() { p.clone() } else { self.base_dir.join(p) })
    }
}
