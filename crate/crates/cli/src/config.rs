//! Run settings per subcommand, merged from a JSON config file and command-line flags.

use crate::Failure;
use crlab_core::phstructure::GeometrySpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const DEFAULT_OUT: &str = "crlab-out";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct InvariantsTolerances {
    /// Bound on the largest structure-equation residual.
    pub structure: f64,
}

impl Default for InvariantsTolerances {
    fn default() -> Self {
        Self { structure: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct InvariantsSettings {
    pub geometry: String,
    pub res: Option<usize>,
    /// Sample count for embedded hypersurfaces.
    pub samples: usize,
    pub seed: u64,
    pub tolerances: InvariantsTolerances,
}

impl Default for InvariantsSettings {
    fn default() -> Self {
        Self { geometry: "t3-roto:n=1".into(), res: None, samples: 64, seed: 0, tolerances: Default::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FlowTolerances {
    /// A step whose structure residual exceeds this aborts the run.
    pub abort_residual: f64,
}

impl Default for FlowTolerances {
    fn default() -> Self {
        Self { abort_residual: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSettings {
    pub geometry: String,
    pub res: Option<usize>,
    pub flow: String,
    /// Defaults to the largest step under the stability guard that divides t_end.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Write β and λ every this many steps; 0 disables snapshots.
    pub snapshot_every: usize,
    pub seed: u64,
    pub tolerances: FlowTolerances,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self {
            geometry: "t3-roto:n=1".into(),
            res: None,
            flow: "torsion".into(),
            dt: None,
            t_end: 0.05,
            snapshot_every: 0,
            seed: 0,
            tolerances: Default::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FillTolerances {
    /// Relative residual at which the certificate iteration stops.
    pub solver: f64,
    /// Relative residual below which a stalled iteration is still accepted.
    pub accept: f64,
    /// Bound on the integrability residuals r1, r2.
    pub integrability: f64,
}

impl Default for FillTolerances {
    fn default() -> Self {
        Self { solver: 1e-13, accept: 1e-8, integrability: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FillSettings {
    pub geometry: String,
    pub res: Option<usize>,
    pub flow: String,
    /// Velocity on the right-hand side of the certificate equation; defaults to the flow's own.
    pub rhs: Option<String>,
    pub slices: usize,
    pub horizon: f64,
    /// Required margin min |Re u|.
    pub delta: f64,
    /// Write the certificate of every slice.
    pub snapshots: bool,
    pub seed: u64,
    pub tolerances: FillTolerances,
}

impl Default for FillSettings {
    fn default() -> Self {
        Self {
            geometry: "t3-roto:n=1".into(),
            res: None,
            flow: "torsion".into(),
            rhs: None,
            slices: 9,
            horizon: 0.1,
            delta: 1e-3,
            snapshots: false,
            seed: 0,
            tolerances: Default::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedTolerances {
    /// Bound on the ∂̄_b Y_f residual; defaults to 1e-5 (exact) or 1e-3 (difference).
    pub residual: Option<f64>,
    /// Bound on the disagreement of the two tangency routes.
    pub agreement: f64,
    /// Smallest accepted convergence order of the Lie transport.
    pub order: f64,
}

impl Default for EmbedTolerances {
    fn default() -> Self {
        Self { residual: None, agreement: 1e-5, order: 1.8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSettings {
    pub gamma: String,
    pub check: String,
    pub samples: usize,
    /// Test function; defaults to a seeded random quadratic (lemma62) or z1barsq (chi, tangency).
    pub function: Option<String>,
    pub differentiation: String,
    /// Central-difference step of the difference path.
    pub step: f64,
    /// Transport step (tangency, default 1e-3) or scale of f (chi, default 0.1).
    pub eps: Option<f64>,
    pub seed: u64,
    pub tolerances: EmbedTolerances,
}

impl Default for EmbedSettings {
    fn default() -> Self {
        Self {
            gamma: "sphere".into(),
            check: "lemma62".into(),
            samples: 200,
            function: None,
            differentiation: "exact".into(),
            step: crlab_core::embedded::DIFFERENCE_STEP,
            eps: None,
            seed: 0,
            tolerances: Default::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestTolerances {
    pub budget_seconds: f64,
}

impl Default for SelftestTolerances {
    fn default() -> Self {
        Self { budget_seconds: 600.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestSettings {
    /// Criterion ids to run; empty runs the full suite.
    pub criteria: Vec<usize>,
    pub seed: u64,
    pub tolerances: SelftestTolerances,
}

impl Default for SelftestSettings {
    fn default() -> Self {
        Self { criteria: Vec::new(), seed: 20240617, tolerances: Default::default() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_res(n: usize) -> Result<(), Failure> {
    if n.is_power_of_two() && (8..=128).contains(&n) {
        Ok(())
    } else {
        Err(usage(format!("resolution must be a power of two between 8 and 128, got {n}")))
    }
}

/// Geometry string with `--res` folded into its grid dimensions.
pub fn with_resolution(geometry: &str, res: Option<usize>) -> Result<String, Failure> {
    let g = GeometrySpec::parse(geometry).map_err(|e| usage(e.to_string()))?;
    if let Some(d) = &g.dims {
        for &n in d {
            check_res(n)?;
        }
    }
    let Some(n) = res else { return Ok(geometry.to_string()) };
    check_res(n)?;
    if g.dims.is_some() {
        return Err(usage(format!("{geometry}: give the resolution either as @dims or --res, not both")));
    }
    match g.name.as_str() {
        "t3-roto" => Ok(format!("{geometry}@{n}")),
        "nil-invariant" => Ok(format!("{geometry}@{n}x{n}")),
        other => Err(usage(format!("{other} has no grid resolution"))),
    }
}

impl InvariantsSettings {
    pub fn validate(&self) -> Result<(), Failure> {
        positive("tolerances.structure", self.tolerances.structure)?;
        if self.samples == 0 {
            return Err(usage("samples must be at least 1"));
        }
        if let Some(n) = self.res {
            check_res(n)?;
        }
        Ok(())
    }
}

impl FlowSettings {
    pub fn validate(&self) -> Result<(), Failure> {
        positive("tolerances.abort_residual", self.tolerances.abort_residual)?;
        positive("t_end", self.t_end)?;
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        Ok(())
    }
}

impl FillSettings {
    pub fn finalize(&mut self) {
        if self.rhs.is_none() {
            self.rhs = Some(self.flow.clone());
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        positive("tolerances.solver", self.tolerances.solver)?;
        positive("tolerances.accept", self.tolerances.accept)?;
        positive("tolerances.integrability", self.tolerances.integrability)?;
        positive("horizon", self.horizon)?;
        positive("delta", self.delta)?;
        if self.slices < 5 {
            return Err(usage(format!("slices must be at least 5, got {}", self.slices)));
        }
        Ok(())
    }
}

impl EmbedSettings {
    pub fn finalize(&mut self) {
        if self.function.is_none() {
            self.function = Some(match self.check.as_str() {
                "lemma62" => format!("random-quadratic:seed={}", self.seed),
                _ => "z1barsq".into(),
            });
        }
        if self.eps.is_none() {
            self.eps = Some(if self.check == "chi" { 0.1 } else { 1e-3 });
        }
        if self.tolerances.residual.is_none() {
            self.tolerances.residual = Some(if self.differentiation == "exact" { 1e-5 } else { 1e-3 });
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if !matches!(self.check.as_str(), "lemma62" | "chi" | "tangency") {
            return Err(usage(format!("unknown check {:?}; expected lemma62, chi or tangency", self.check)));
        }
        if !matches!(self.differentiation.as_str(), "exact" | "difference") {
            return Err(usage(format!("unknown differentiation {:?}; expected exact or difference", self.differentiation)));
        }
        if self.check == "tangency" && self.differentiation != "exact" {
            return Err(usage("the tangency check needs exact jets"));
        }
        if self.samples == 0 {
            return Err(usage("samples must be at least 1"));
        }
        positive("step", self.step)?;
        positive("eps", self.eps.unwrap_or(1.0))?;
        positive("tolerances.residual", self.tolerances.residual.unwrap_or(1.0))?;
        positive("tolerances.agreement", self.tolerances.agreement)?;
        positive("tolerances.order", self.tolerances.order)
    }
}

impl SelftestSettings {
    pub fn validate(&self) -> Result<(), Failure> {
        positive("tolerances.budget_seconds", self.tolerances.budget_seconds)?;
        let max = crlab_core::selftest::CRITERIA;
        if let Some(id) = self.criteria.iter().find(|&&id| id == 0 || id > max) {
            return Err(usage(format!("criterion ids run from 1 to {max}, got {id}")));
        }
        Ok(())
    }
}

/// Config file contents split into the settings object and the output directory.
#[derive(Debug, Default)]
pub struct FileConfig {
    pub settings: Map<String, Value>,
    pub out: Option<PathBuf>,
}

pub fn read_config(path: &Path, command: &str) -> Result<FileConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(usage(format!("config {} must hold a JSON object", path.display())));
    };
    if let Some(c) = map.remove("command") {
        if c.as_str() != Some(command) {
            return Err(usage(format!("config {} is for command {c}, not {command}", path.display())));
        }
    }
    let out = match map.remove("out") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(v) => return Err(usage(format!("config key out must be a string, got {v}"))),
    };
    Ok(FileConfig { settings: map, out })
}

/// File values, overridden key by key by flag values; `tolerances` merges one level deeper.
pub fn merge<S: DeserializeOwned>(file: Map<String, Value>, flags: Value, tolerances: &[(String, f64)]) -> Result<S, Failure> {
    let mut map = file;
    if let Value::Object(f) = flags {
        for (k, v) in f {
            map.insert(k, v);
        }
    }
    if !tolerances.is_empty() {
        let entry = map.entry("tolerances").or_insert_with(|| Value::Object(Map::new()));
        let Value::Object(t) = entry else {
            return Err(usage("config key tolerances must be an object"));
        };
        for (k, v) in tolerances {
            t.insert(k.clone(), Value::from(*v));
        }
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| usage(format!("invalid settings: {e}")))
}

/// Hex SHA-256 of the settings' JSON form.
pub fn config_hash(settings: &impl Serialize) -> String {
    let text = serde_json::to_string(settings).expect("settings serialize");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flags_override_file_values() {
        let file = json!({"geometry": "t3-roto:n=2", "t_end": 0.2, "tolerances": {"abort_residual": 1e-4}});
        let Value::Object(file) = file else { unreachable!() };
        let s: FlowSettings = merge(file, json!({"t_end": 0.1}), &[]).unwrap();
        assert_eq!(s.geometry, "t3-roto:n=2");
        assert_eq!(s.t_end, 0.1);
        assert_eq!(s.tolerances.abort_residual, 1e-4);
        assert_eq!(s.flow, "torsion");
    }

    #[test]
    fn tolerance_flags_merge_into_file_tolerances() {
        let Value::Object(file) = json!({"tolerances": {"solver": 1e-10}}) else { unreachable!() };
        let s: FillSettings = merge(file, json!({}), &[("integrability".into(), 1e-5)]).unwrap();
        assert_eq!(s.tolerances.solver, 1e-10);
        assert_eq!(s.tolerances.integrability, 1e-5);
        assert_eq!(s.tolerances.accept, 1e-8);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let Value::Object(file) = json!({"geometri": "x"}) else { unreachable!() };
        assert!(matches!(merge::<InvariantsSettings>(file, json!({}), &[]), Err(Failure::Usage(_))));
        assert!(matches!(merge::<InvariantsSettings>(Map::new(), json!({}), &[("bogus".into(), 1.0)]), Err(Failure::Usage(_))));
    }

    #[test]
    fn resolution_rules() {
        assert_eq!(with_resolution("t3-roto:n=1", Some(16)).unwrap(), "t3-roto:n=1@16");
        assert_eq!(with_resolution("nil-invariant:beta=0.1", Some(64)).unwrap(), "nil-invariant:beta=0.1@64x64");
        assert_eq!(with_resolution("t3-roto:n=1@16", None).unwrap(), "t3-roto:n=1@16");
        for bad in [Some(12), Some(4), Some(256)] {
            assert!(with_resolution("t3-roto:n=1", bad).is_err());
        }
        assert!(with_resolution("t3-roto:n=1@24", None).is_err());
        assert!(with_resolution("t3-roto:n=1@16", Some(16)).is_err());
        assert!(with_resolution("s3-homogeneous", Some(16)).is_err());
    }

    #[test]
    fn hash_tracks_settings() {
        let a = FlowSettings::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
        b.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn embed_defaults_depend_on_check() {
        let mut s = EmbedSettings { check: "chi".into(), ..Default::default() };
        s.finalize();
        assert_eq!(s.function.as_deref(), Some("z1barsq"));
        assert_eq!(s.eps, Some(0.1));
        let mut s = EmbedSettings { differentiation: "difference".into(), seed: 7, ..Default::default() };
        s.finalize();
        assert_eq!(s.function.as_deref(), Some("random-quadratic:seed=7"));
        assert_eq!(s.tolerances.residual, Some(1e-3));
    }
}
