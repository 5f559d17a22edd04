use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::{EtdOptions, EtdScheme, PicardOptions, DEFAULT_THETA_GATE};
use crate::exponent::{serde_q, serde_q_vec};
use crate::grid::{GridSpec, MultiIndex};

/// One experiment. Serialized as TOML with one table per section, so every
/// field has a dotted key such as `grid.n_per_axis` or `engine.etd.dt_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub label: String,
    /// Seeds randomized initial data; nothing else draws random numbers.
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    pub datum: DatumConfig,
    pub engine: EngineConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n_per_axis: usize,
    pub box_length: f64,
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec { dim: self.dim, n_per_axis: self.n_per_axis, box_length: self.box_length }
    }
}

/// Initial density, always rescaled on the grid to carry exactly `mass`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumConfig {
    /// `exp(-|x - center|^2 / (2 sigma^2))`.
    Gaussian {
        mass: f64,
        sigma: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        center: Vec<f64>,
    },
    /// Two equal Gaussians at `+-separation/2` along the first axis.
    TwoBump { mass: f64, sigma: f64, separation: f64 },
    /// `exp(-(|x| - radius)^2 / (2 width^2))`.
    Annulus { mass: f64, radius: f64, width: f64 },
    /// `count` equal Gaussians with centers drawn uniformly from
    /// `[-spread, spread]^d` by the config seed.
    RandomBumps { mass: f64, sigma: f64, count: usize, spread: f64 },
}

impl DatumConfig {
    pub fn mass(&self) -> f64 {
        match *self {
            DatumConfig::Gaussian { mass, .. }
            | DatumConfig::TwoBump { mass, .. }
            | DatumConfig::Annulus { mass, .. }
            | DatumConfig::RandomBumps { mass, .. } => mass,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DatumConfig::Gaussian { .. } => "gaussian",
            DatumConfig::TwoBump { .. } => "two_bump",
            DatumConfig::Annulus { .. } => "annulus",
            DatumConfig::RandomBumps { .. } => "random_bumps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Etd,
    Picard,
    HeatOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub kind: EngineKind,
    #[serde(default)]
    pub etd: EtdSettings,
    #[serde(default)]
    pub picard: PicardSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtdSettings {
    pub scheme: EtdScheme,
    pub dt_max: f64,
    pub dt_initial: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_rel: Option<f64>,
    pub tail_threshold: f64,
    pub collapse_threshold: f64,
    pub max_steps: usize,
}

impl Default for EtdSettings {
    fn default() -> Self {
        let d = EtdOptions::default();
        EtdSettings {
            scheme: d.scheme,
            dt_max: d.dt_max,
            dt_initial: d.dt_initial,
            dt_rel: d.dt_rel,
            tail_threshold: d.tail_threshold,
            collapse_threshold: d.collapse_threshold,
            max_steps: d.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSettings {
    pub max_iters: usize,
    pub tol: f64,
    pub mesh_nodes: usize,
    pub mesh_start: f64,
    pub quad_nodes: usize,
    /// Gate on the measured theta; a negative value disables it.
    pub theta_gate: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        let d = PicardOptions::default();
        PicardSettings {
            max_iters: d.max_iters,
            tol: d.tol,
            mesh_nodes: d.mesh_nodes,
            mesh_start: d.mesh_start,
            quad_nodes: d.quad_nodes,
            theta_gate: d.theta_gate.unwrap_or(DEFAULT_THETA_GATE),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    Geometric,
    Uniform,
}

/// Output times: `points` times ending at `t_final`, plus `include`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    pub mesh: MeshKind,
    pub points: usize,
    /// First time of a geometric mesh.
    #[serde(default = "default_t_start")]
    pub t_start: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub include: Vec<f64>,
}

fn default_t_start() -> f64 {
    1e-2
}

impl TimeConfig {
    /// Sorted, deduplicated output times.
    pub fn output_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = match self.mesh {
            MeshKind::Geometric => crate::evolution::geometric_times(self.t_start, self.t_final, self.points),
            MeshKind::Uniform => (1..=self.points).map(|i| self.t_final * i as f64 / self.points as f64).collect(),
        };
        ts.extend(self.include.iter().copied().filter(|&t| t <= self.t_final));
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        ts
    }
}

/// One requested `||D^beta d_t^k rho(t)||_q` decay fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    pub beta: MultiIndex,
    #[serde(default)]
    pub k: usize,
    #[serde(with = "serde_q")]
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Exponents tracked at every step.
    #[serde(with = "serde_q_vec")]
    pub q_list: Vec<f64>,
    /// Fit window; defaults to `[t_hi / 16, t_hi]` with `t_hi = min(T, horizon)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    pub decay: Vec<DecaySpec>,
    pub analyticity: bool,
    /// Use every `analyticity_stride`-th snapshot inside the window.
    pub analyticity_stride: usize,
    pub ladder_order: usize,
    /// Snapshot times for the derivative-growth fit.
    pub growth_times: Vec<f64>,
    pub growth_order: usize,
    pub blow_up: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            q_list: vec![1.0, 2.0, f64::INFINITY],
            window: None,
            decay: Vec::new(),
            analyticity: false,
            analyticity_stride: 1,
            ladder_order: crate::evolution::DEFAULT_LADDER_ORDER,
            growth_times: Vec::new(),
            growth_order: 6,
            blow_up: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Root directory; each run writes to `dir/<config hash>`.
    pub dir: PathBuf,
    pub trajectory: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("runs"), trajectory: true }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks ranges and cross-field consistency; nothing is computed.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        // TOML integers are signed
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed = {} exceeds {}", self.seed, i64::MAX));
        }
        let g = &self.grid;
        if !(1..=3).contains(&g.dim) {
            return bad(format!("grid.dim = {} must be 1, 2 or 3", g.dim));
        }
        if g.n_per_axis < 8 || g.n_per_axis % 2 != 0 {
            return bad(format!("grid.n_per_axis = {} must be even and at least 8", g.n_per_axis));
        }
        if !(g.box_length.is_finite() && g.box_length > 0.0) {
            return bad(format!("grid.box_length = {} must be positive", g.box_length));
        }
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must be positive")))
            }
        };
        match &self.datum {
            DatumConfig::Gaussian { mass, sigma, center } => {
                positive("datum.mass", *mass)?;
                positive("datum.sigma", *sigma)?;
                if !center.is_empty() && center.len() != g.dim {
                    return bad(format!("datum.center has {} entries for dimension {}", center.len(), g.dim));
                }
                if center.iter().any(|c| !c.is_finite() || c.abs() >= g.box_length / 2.0) {
                    return bad("datum.center must lie inside the box".into());
                }
            }
            DatumConfig::TwoBump { mass, sigma, separation } => {
                positive("datum.mass", *mass)?;
                positive("datum.sigma", *sigma)?;
                positive("datum.separation", *separation)?;
                if *separation >= g.box_length / 2.0 {
                    return bad("datum.separation must be below half the box".into());
                }
            }
            DatumConfig::Annulus { mass, radius, width } => {
                positive("datum.mass", *mass)?;
                positive("datum.radius", *radius)?;
                positive("datum.width", *width)?;
                if *radius >= g.box_length / 2.0 {
                    return bad("datum.radius must be below half the box".into());
                }
            }
            DatumConfig::RandomBumps { mass, sigma, count, spread } => {
                positive("datum.mass", *mass)?;
                positive("datum.sigma", *sigma)?;
                positive("datum.spread", *spread)?;
                if *count == 0 {
                    return bad("datum.count must be at least 1".into());
                }
                if *spread >= g.box_length / 2.0 {
                    return bad("datum.spread must be below half the box".into());
                }
            }
        }
        let e = &self.engine;
        positive("engine.etd.dt_max", e.etd.dt_max)?;
        positive("engine.etd.dt_initial", e.etd.dt_initial)?;
        if let Some(r) = e.etd.dt_rel {
            positive("engine.etd.dt_rel", r)?;
        }
        positive("engine.etd.tail_threshold", e.etd.tail_threshold)?;
        positive("engine.etd.collapse_threshold", e.etd.collapse_threshold)?;
        positive("engine.picard.tol", e.picard.tol)?;
        positive("engine.picard.mesh_start", e.picard.mesh_start)?;
        if e.picard.mesh_start >= 1.0 {
            return bad("engine.picard.mesh_start must be below 1".into());
        }
        if e.picard.max_iters == 0 || e.picard.mesh_nodes < 4 || e.picard.quad_nodes < 2 {
            return bad("engine.picard needs max_iters >= 1, mesh_nodes >= 4, quad_nodes >= 2".into());
        }
        let t = &self.time;
        positive("time.t_final", t.t_final)?;
        if t.points == 0 {
            return bad("time.points must be at least 1".into());
        }
        if t.mesh == MeshKind::Geometric {
            positive("time.t_start", t.t_start)?;
            if t.t_start >= t.t_final {
                return bad("time.t_start must be below time.t_final".into());
            }
        }
        if t.include.iter().any(|&v| !(v > 0.0 && v <= t.t_final)) {
            return bad("time.include entries must lie in (0, t_final]".into());
        }
        let d = &self.diagnostics;
        for &q in &d.q_list {
            if q.is_nan() || q < 1.0 {
                return bad(format!("diagnostics.q_list entry {q} outside [1, inf]"));
            }
        }
        if let Some([lo, hi]) = d.window {
            if !(lo > 0.0 && lo < hi) {
                return bad(format!("diagnostics.window [{lo}, {hi}] must satisfy 0 < lo < hi"));
            }
        }
        for spec in &d.decay {
            if spec.beta.dim() != g.dim {
                return bad(format!("decay multi-index {} does not match dimension {}", spec.beta, g.dim));
            }
            if spec.q.is_nan() || spec.q < 1.0 {
                return bad(format!("decay exponent {} outside [1, inf]", spec.q));
            }
        }
        if d.analyticity_stride == 0 {
            return bad("diagnostics.analyticity_stride must be at least 1".into());
        }
        if d.ladder_order < 4 || d.ladder_order > crate::evolution::MAX_LADDER_ORDER {
            return bad(format!(
                "diagnostics.ladder_order = {} must lie in 4..={}",
                d.ladder_order,
                crate::evolution::MAX_LADDER_ORDER
            ));
        }
        if d.growth_order < 4 || d.growth_order > crate::evolution::MAX_LADDER_ORDER {
            return bad(format!("diagnostics.growth_order = {} must lie in 4..=12", d.growth_order));
        }
        if d.growth_times.iter().any(|&v| !(v > 0.0 && v <= t.t_final)) {
            return bad("diagnostics.growth_times must lie in (0, t_final]".into());
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of every section except `output`.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
        }
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    /// Hash of the keys that determine the trajectory. Runs that differ only
    /// in post-processing or output share it.
    pub fn physics_hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
            map.remove("label");
            let d = &self.diagnostics;
            map.insert(
                "diagnostics".into(),
                serde_json::json!({
                    "q_list": serde_q_vec::serialize(&d.q_list, serde_json::value::Serializer)
                        .expect("exponents serialize"),
                    "growth_times": d.growth_times,
                }),
            );
        }
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    /// `output.dir / <first 16 hex digits of the hash>`.
    pub fn run_dir(&self) -> PathBuf {
        self.output.dir.join(&self.hash()[..16])
    }

    /// Sets a dotted key (`engine.etd.dt_max`, `diagnostics.decay.0.q`) from
    /// a TOML literal; bare words are taken as strings. The result is
    /// revalidated.
    pub fn set(&mut self, key: &str, literal: &str) -> Result<()> {
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let value = parse_literal(literal);
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("malformed key {key:?}")));
        }
        let mut node = &mut root;
        for (i, part) in parts.iter().enumerate() {
            let last = i + 1 == parts.len();
            node = match node {
                toml::Value::Table(table) => {
                    if last {
                        table.insert(part.to_string(), value);
                        break;
                    }
                    table
                        .get_mut(*part)
                        .ok_or_else(|| Error::Config(format!("unknown key {key:?}")))?
                }
                toml::Value::Array(items) => {
                    let idx: usize = part
                        .parse()
                        .map_err(|_| Error::Config(format!("{part:?} in {key:?} is not an index")))?;
                    let len = items.len();
                    let slot = items
                        .get_mut(idx)
                        .ok_or_else(|| Error::Config(format!("index {idx} in {key:?} out of range ({len})")))?;
                    if last {
                        *slot = value;
                        break;
                    }
                    slot
                }
                _ => return Err(Error::Config(format!("{key:?} descends into a scalar"))),
            };
        }
        let updated: RunConfig = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key} = {literal}: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    /// Applies `key=value` assignments in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, assignments: &[S]) -> Result<()> {
        for a in assignments {
            let (k, v) = a
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {:?} is not key=value", a.as_ref())))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn etd_options(&self) -> EtdOptions {
        let s = &self.engine.etd;
        EtdOptions {
            scheme: s.scheme,
            dt_max: s.dt_max,
            dt_initial: s.dt_initial,
            dt_rel: s.dt_rel,
            q_list: self.diagnostics.q_list.clone(),
            tail_threshold: s.tail_threshold,
            collapse_threshold: s.collapse_threshold,
            max_steps: s.max_steps,
        }
    }

    pub fn picard_options(&self) -> PicardOptions {
        let s = &self.engine.picard;
        PicardOptions {
            max_iters: s.max_iters,
            tol: s.tol,
            mesh_nodes: s.mesh_nodes,
            mesh_start: s.mesh_start,
            quad_nodes: s.quad_nodes,
            output_times: self.time.output_times(),
            q_list: self.diagnostics.q_list.clone(),
            theta_gate: (s.theta_gate >= 0.0).then_some(s.theta_gate),
            ..PicardOptions::default()
        }
    }
}

fn parse_literal(text: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {text}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::preset;

    #[test]
    fn dotted_overrides_reach_nested_keys() {
        let mut c = preset("small_mass_2d").unwrap();
        c.set("grid.n_per_axis", "256").unwrap();
        c.set("engine.etd.dt_max", "0.05").unwrap();
        c.set("diagnostics.decay.0.q", "\"4/3\"").unwrap();
        c.set("datum.mass", "1.5").unwrap();
        c.set("output.dir", "/tmp/elsewhere").unwrap();
        assert_eq!(c.grid.n_per_axis, 256);
        assert_eq!(c.engine.etd.dt_max, 0.05);
        assert_eq!(c.diagnostics.decay[0].q, 4.0 / 3.0);
        assert_eq!(c.datum.mass(), 1.5);
        assert_eq!(c.output.dir, PathBuf::from("/tmp/elsewhere"));
        // a bare word is taken as a string
        c.set("engine.kind", "picard").unwrap();
        assert_eq!(c.engine.kind, EngineKind::Picard);
    }

    #[test]
    fn bad_overrides_leave_the_config_untouched() {
        let mut c = preset("small_mass_2d").unwrap();
        let before = c.clone();
        for (k, v) in [
            ("grid.n_per_axes", "128"),
            ("datum.mass", "-1"),
            ("datum.sigma", "0"),
            ("datum.kind", "cube"),
            ("diagnostics.decay.9.q", "2"),
            ("grid.dim.x", "1"),
            ("engine.kind", "rk4"),
        ] {
            assert!(matches!(c.set(k, v), Err(Error::Config(_))), "{k}={v}");
        }
        assert_eq!(c, before);
    }

    #[test]
    fn hash_ignores_output_but_not_physics() {
        let a = preset("small_mass_2d").unwrap();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("/somewhere/else");
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.run_dir(), b.run_dir());
        b.set("diagnostics.decay.0.q", "3").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.physics_hash(), b.physics_hash());
        b.set("datum.mass", "0.3").unwrap();
        assert_ne!(a.physics_hash(), b.physics_hash());
    }

    #[test]
    fn output_times_merge_includes() {
        let t = TimeConfig { t_final: 4.0, mesh: MeshKind::Uniform, points: 4, t_start: 0.1, include: vec![2.0, 2.5] };
        assert_eq!(t.output_times(), vec![1.0, 2.0, 2.5, 3.0, 4.0]);
    }

    #[test]
    fn parses_minimal_toml() {
        let text = r#"
            [grid]
            dim = 1
            n_per_axis = 64
            box_length = 32.0

            [datum]
            kind = "gaussian"
            mass = 1.0
            sigma = 1.0

            [engine]
            kind = "heat_only"

            [time]
            t_final = 1.0
            mesh = "uniform"
            points = 10
        "#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.diagnostics, DiagnosticsConfig::default());
        assert!(RunConfig::from_toml(&text.replace("sigma = 1.0", "sigma = -1.0")).is_err());
        assert!(RunConfig::from_toml(&text.replace("gaussian", "blob")).is_err());
    }
}
