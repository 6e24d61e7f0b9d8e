//! Scenario documents (TOML), defaults, dotted-path overrides and validation.

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::dynamics::FormationSpec;
use crate::fif::{DetectorConfig, KbarPolicy};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub eps: f64,
    /// 1-based.
    pub observer: usize,
    /// 1-based; defaults to the observer.
    #[serde(default)]
    pub leader: Option<usize>,
    pub graph: GraphSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub formation: Option<FormationSection>,
    #[serde(default)]
    pub fault: Option<FaultSection>,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub detection: DetectionSection,
    #[serde(default)]
    pub accommodation: AccommodationSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_steps() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    #[default]
    Random,
    Explicit,
    Formation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub kind: InitialKind,
    /// Half-width of the uniform box for random starts.
    #[serde(default = "default_box", rename = "box")]
    pub half_width: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positions: Vec<[f64; 2]>,
    /// Added to the formation targets when `kind = "formation"`.
    #[serde(default)]
    pub offset: [f64; 2],
}

fn default_box() -> f64 {
    5.0
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: InitialKind::Random,
            half_width: default_box(),
            positions: Vec::new(),
            offset: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationSection {
    pub targets: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSection {
    /// 1-based.
    pub agent: usize,
    pub delta: [f64; 2],
    pub k_d: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FilterInit {
    #[default]
    Zero,
    /// True initial configuration shifted by `translation`.
    Known,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KbarChoice {
    #[default]
    Zero,
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    #[serde(default)]
    pub init: FilterInit,
    #[serde(default)]
    pub translation: [f64; 2],
    #[serde(default)]
    pub kbar: KbarChoice,
    #[serde(default = "one")]
    pub kbar_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            init: FilterInit::Zero,
            translation: [0.0, 0.0],
            kbar: KbarChoice::Zero,
            kbar_scale: 1.0,
        }
    }
}

impl FilterSection {
    pub fn policy(&self) -> KbarPolicy {
        match self.kbar {
            KbarChoice::Zero => KbarPolicy::Zero,
            KbarChoice::Projection => KbarPolicy::ScaledIdentityProjection(self.kbar_scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    #[serde(default = "d_kappa1")]
    pub kappa1: f64,
    #[serde(default = "d_kappa2")]
    pub kappa2: f64,
    #[serde(default = "d_gamma_tol")]
    pub gamma_tol: f64,
    #[serde(default = "d_debounce")]
    pub debounce: usize,
}

fn d_kappa1() -> f64 {
    DetectorConfig::default().kappa1
}
fn d_kappa2() -> f64 {
    DetectorConfig::default().kappa2
}
fn d_gamma_tol() -> f64 {
    DetectorConfig::default().gamma_tol
}
fn d_debounce() -> usize {
    DetectorConfig::default().debounce
}

impl Default for DetectionSection {
    fn default() -> Self {
        let d = DetectorConfig::default();
        Self {
            kappa1: d.kappa1,
            kappa2: d.kappa2,
            gamma_tol: d.gamma_tol,
            debounce: d.debounce,
        }
    }
}

impl DetectionSection {
    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            kappa1: self.kappa1,
            kappa2: self.kappa2,
            gamma_tol: self.gamma_tol,
            debounce: self.debounce,
        }
    }
}

/// Recovery target: `"hold"`, `"origin"` or an explicit point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Named(String),
    Point([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Hold,
    Point([f64; 2]),
}

impl TargetSpec {
    pub fn resolve(&self) -> Option<Target> {
        match self {
            TargetSpec::Named(s) if s == "hold" => Some(Target::Hold),
            TargetSpec::Named(s) if s == "origin" => Some(Target::Point([0.0, 0.0])),
            TargetSpec::Named(_) => None,
            TargetSpec::Point(p) => Some(Target::Point(*p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccommodationSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "d_horizon")]
    pub horizon: usize,
    #[serde(default = "d_target")]
    pub target: TargetSpec,
    #[serde(default = "d_stop_tol")]
    pub stop_tol: f64,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
}

fn yes() -> bool {
    true
}
fn d_horizon() -> usize {
    20
}
fn d_target() -> TargetSpec {
    TargetSpec::Named("hold".into())
}
fn d_stop_tol() -> f64 {
    1e-3
}
fn d_max_steps() -> usize {
    5000
}

impl Default for AccommodationSection {
    fn default() -> Self {
        Self {
            enabled: true,
            horizon: d_horizon(),
            target: d_target(),
            stop_tol: d_stop_tol(),
            max_steps: d_max_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "d_dir")]
    pub dir: String,
}

fn d_dir() -> String {
    "out".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: d_dir() }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    pub fn leader(&self) -> usize {
        self.leader.unwrap_or(self.observer)
    }

    pub fn graph(&self) -> Result<Graph, ScenarioError> {
        let edges: Vec<(usize, usize)> = self.graph.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::new(self.graph.n, &edges).map_err(|e| invalid("graph.edges", e.to_string()))
    }

    pub fn formation_spec(&self) -> Result<Option<FormationSpec>, ScenarioError> {
        self.formation
            .as_ref()
            .map(|f| {
                FormationSpec::from_points(&f.targets)
                    .map_err(|e| invalid("formation.targets", e.to_string()))
            })
            .transpose()
    }

    pub fn target(&self) -> Result<Target, ScenarioError> {
        self.accommodation.target.resolve().ok_or_else(|| {
            invalid(
                "accommodation.target",
                "expected \"hold\", \"origin\" or [x, y]",
            )
        })
    }

    /// Checks every cross-field constraint; the first violation is reported
    /// with its dotted path.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let graph = self.graph()?;
        let n = graph.n();
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(invalid("eps", "must be finite and positive"));
        }
        let in_range = |v: usize| (1..=n).contains(&v);
        if !in_range(self.observer) {
            return Err(invalid("observer", format!("must be in 1..={n}")));
        }
        if let Some(l) = self.leader {
            if !in_range(l) {
                return Err(invalid("leader", format!("must be in 1..={n}")));
            }
        }
        if let Some(f) = &self.fault {
            if !in_range(f.agent) {
                return Err(invalid("fault.agent", format!("must be in 1..={n}")));
            }
            if f.delta.iter().any(|v| !v.is_finite()) {
                return Err(invalid("fault.delta", "must be finite"));
            }
        }
        match self.initial.kind {
            InitialKind::Random => {
                if !(self.initial.half_width.is_finite() && self.initial.half_width > 0.0) {
                    return Err(invalid("initial.box", "must be finite and positive"));
                }
            }
            InitialKind::Explicit => {
                if self.initial.positions.len() != n {
                    return Err(invalid(
                        "initial.positions",
                        format!("expected {n} points, got {}", self.initial.positions.len()),
                    ));
                }
                if self.initial.positions.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(invalid("initial.positions", "must be finite"));
                }
            }
            InitialKind::Formation => {
                if self.formation.is_none() {
                    return Err(invalid("initial.kind", "\"formation\" needs a [formation] section"));
                }
            }
        }
        if let Some(f) = &self.formation {
            if f.targets.len() != n {
                return Err(invalid(
                    "formation.targets",
                    format!("expected {n} points, got {}", f.targets.len()),
                ));
            }
            self.formation_spec()?;
        }
        self.detection
            .detector()
            .validate()
            .map_err(|e| invalid("detection", e.to_string()))?;
        if self.filter.kbar == KbarChoice::Projection && !self.filter.kbar_scale.is_finite() {
            return Err(invalid("filter.kbar_scale", "must be finite"));
        }
        if self.accommodation.horizon == 0 {
            return Err(invalid("accommodation.horizon", "must be at least 1"));
        }
        if !(self.accommodation.stop_tol.is_finite() && self.accommodation.stop_tol > 0.0) {
            return Err(invalid("accommodation.stop_tol", "must be finite and positive"));
        }
        self.target()?;
        Ok(())
    }

    /// Canonical TOML with every default filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    load_with_overrides(text, &[])
}

/// Parses `text`, applies `key.path=value` overrides, then validates.
pub fn load_with_overrides(
    text: &str,
    overrides: &[String],
) -> Result<ScenarioConfig, ScenarioError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    let cfg: ScenarioConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Sets one dotted-path key. The value is read as a TOML value when possible
/// (`3`, `0.5`, `[2, 1]`, `true`) and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ScenarioError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(spec, "override must look like key.path=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(invalid(key, "empty key segment"));
    }
    let value = parse_value(raw);

    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("non-empty key");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry((*p).to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| invalid(key, format!("'{p}' is not a table")))?;
    }
    cur.insert((*last).to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
eps = 0.5
observer = 1
[graph]
n = 2
edges = [[1, 2]]
"#;

    #[test]
    fn minimal_gets_defaults() {
        let cfg = load_scenario(MINIMAL).unwrap();
        assert_eq!(cfg.accommodation.horizon, 20);
        assert_eq!(cfg.detection.kappa1, 0.5);
        assert_eq!(cfg.leader(), 1);
        assert_eq!(cfg.target().unwrap(), Target::Hold);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\n[detection]\nkappa3 = 1.0\n");
        assert!(matches!(load_scenario(&text), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn fault_index_path() {
        let err = load_with_overrides(
            MINIMAL,
            &["fault.agent=10".into(), "fault.delta=[2,1]".into(), "fault.k_d=3".into()],
        )
        .unwrap_err();
        match err {
            ScenarioError::Validation { path, .. } => assert_eq!(path, "fault.agent"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overrides_parse_values() {
        let cfg = load_with_overrides(
            MINIMAL,
            &[
                "accommodation.target=origin".into(),
                "detection.kappa1=0.75".into(),
                "name=demo run".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.target().unwrap(), Target::Point([0.0, 0.0]));
        assert_eq!(cfg.detection.kappa1, 0.75);
        assert_eq!(cfg.name, "demo run");
    }

    #[test]
    fn bad_target_name() {
        let err = load_with_overrides(MINIMAL, &["accommodation.target=sideways".into()]).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation { ref path, .. } if path == "accommodation.target"));
    }

    #[test]
    fn resolved_round_trip() {
        let cfg = load_scenario(MINIMAL).unwrap();
        let again = load_scenario(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }
}
