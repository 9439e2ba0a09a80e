//! Declarative scene configuration: a TOML document with one named section
//! per entity. See `docs/scene-config.md` for the schema reference.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use tetsim_core::Real;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: String,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("{location}: {message}")]
    Invalid { location: String, message: String },
}

pub fn invalid(location: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        location: location.into(),
        message: message.into(),
    }
}

/// Top-level scene description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default = "default_gravity")]
    pub gravity: [Real; 3],
    /// Penalty contact stiffness (N/m).
    #[serde(default = "default_contact_stiffness")]
    pub contact_stiffness: Real,
    #[serde(default)]
    pub scheduler: SchedulerSection,
    #[serde(default)]
    pub bodies: Vec<BodyConfig>,
    #[serde(default)]
    pub visuals: Vec<VisualConfig>,
    #[serde(default)]
    pub attachments: Vec<AttachmentSection>,
    #[serde(default)]
    pub devices: Vec<DeviceConfig>,
    #[serde(default)]
    pub trackers: Vec<TrackerConfig>,
    /// Base directory for relative mesh paths; filled in at load time.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_gravity() -> [Real; 3] {
    [0.0, -9.81, 0.0]
}

fn default_contact_stiffness() -> Real {
    1.0e3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerSection {
    /// Physics period T in seconds.
    #[serde(default = "default_period")]
    pub period: Real,
    /// Slack t_s in seconds.
    #[serde(default = "default_slack")]
    pub slack: Real,
    /// Visual/mapping sync rate in Hz.
    #[serde(default = "default_visual_rate")]
    pub visual_rate: Real,
}

fn default_period() -> Real {
    0.005
}

fn default_slack() -> Real {
    0.002
}

fn default_visual_rate() -> Real {
    60.0
}

impl Default for SchedulerSection {
    fn default() -> Self {
        Self {
            period: default_period(),
            slack: default_slack(),
            visual_rate: default_visual_rate(),
        }
    }
}

/// One physical body. `kind` selects soft, rigid, or the prefabricated
/// instrument/endoscope variants.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: BodyKindConfig,
    /// Volume mesh path (soft bodies).
    pub mesh: Option<String>,
    #[serde(default)]
    pub model: DeformationModelConfig,
    pub young_modulus: Option<Real>,
    pub poisson_ratio: Option<Real>,
    pub density: Option<Real>,
    pub stiffness: Option<Real>,
    pub total_mass: Option<Real>,
    #[serde(default)]
    pub rayleigh_mass: Real,
    #[serde(default)]
    pub rayleigh_stiffness: Real,
    pub integrator: Option<IntegratorConfig>,
    pub linear_solver: Option<LinearSolverConfig>,
    pub cg_tolerance: Option<Real>,
    pub cg_max_iterations: Option<usize>,
    /// Axis-aligned box [xmin,ymin,zmin,xmax,ymax,zmax]; rest nodes inside
    /// are pinned.
    pub pinned_region: Option<[Real; 6]>,
    #[serde(default)]
    pub pinned_nodes: Vec<usize>,
    #[serde(default)]
    pub dynamic_topology: bool,
    pub tearing_threshold: Option<Real>,
    /// Whether gravity acts on this body (default true).
    #[serde(default = "default_true")]
    pub gravity: bool,
    #[serde(default)]
    pub collision: Vec<CollisionConfig>,

    // Rigid-body fields.
    pub mass: Option<Real>,
    /// Radius of the equivalent solid sphere for the inertia tensor.
    pub inertia_radius: Option<Real>,
    #[serde(default)]
    pub position: [Real; 3],
    /// Roll-pitch-yaw in radians.
    #[serde(default)]
    pub orientation_rpy: [Real; 3],

    // Instrument prefab fields.
    pub jaw_count: Option<usize>,
    pub shaft_length: Option<Real>,
    pub jaw_length: Option<Real>,

    // Endoscope prefab fields.
    pub inclination: Option<Real>,
    pub scope_roll: Option<Real>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodyKindConfig {
    Soft,
    Rigid,
    Instrument,
    Endoscope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DeformationModelConfig {
    #[default]
    Fem,
    MassSpring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorConfig {
    ExplicitEuler,
    ImplicitEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearSolverConfig {
    Cg,
    Cholesky,
}

/// One collision model of a body. `mesh` defaults to the body's boundary
/// surface; dynamic-topology bodies must use the boundary so the shell can
/// be rebuilt after separations.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionConfig {
    #[serde(default = "default_primitives")]
    pub primitives: Vec<PrimitiveConfig>,
    #[serde(default)]
    pub proximity: Real,
    /// Collision group; 0 is the wildcard that matches every group.
    #[serde(default)]
    pub group: u32,
    #[serde(default)]
    pub self_collision: bool,
    #[serde(default)]
    pub cutting: bool,
    pub mesh: Option<String>,
}

fn default_primitives() -> Vec<PrimitiveConfig> {
    vec![PrimitiveConfig::Point, PrimitiveConfig::Line, PrimitiveConfig::Triangle]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrimitiveConfig {
    Point,
    Line,
    Triangle,
}

/// A visual body mapped to a physical body. The mapping scheme is selected
/// automatically: rigid bodies get a frame transform; soft bodies get the
/// identity map when the mesh shares the body's vertex indexing, barycentric
/// embedding otherwise, and the dynamic-topology variant when the body has
/// it enabled.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisualConfig {
    pub name: String,
    pub body: String,
    /// Surface path, or "boundary" for the body's boundary surface.
    #[serde(default = "default_visual_mesh")]
    pub mesh: String,
    #[serde(default)]
    pub subdivision: usize,
    /// Frame index for rigid bodies.
    #[serde(default)]
    pub frame: usize,
}

fn default_visual_mesh() -> String {
    "boundary".to_string()
}

/// Attachment of selected nodes of `body` to another body or to fixed world
/// points. Omitted stiffness means a hard pin (infinite stiffness).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttachmentSection {
    pub body: String,
    /// Explicit node list...
    #[serde(default)]
    pub nodes: Vec<usize>,
    /// ...or every rest node inside this box.
    pub nodes_region: Option<[Real; 6]>,
    /// Body name, or "world".
    pub target: String,
    pub stiffness: Option<Real>,
    #[serde(default)]
    pub barycentric: bool,
    /// Frame index when the target is rigid.
    #[serde(default)]
    pub frame: usize,
}

/// A scripted virtual haptic device coupled to a rigid body by a 6-DOF
/// spring.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub name: String,
    pub controlled_body: String,
    #[serde(default)]
    pub frame: usize,
    #[serde(default = "default_scale")]
    pub scale: Real,
    #[serde(default)]
    pub origin: PoseConfig,
    #[serde(default = "default_lin_k")]
    pub linear_stiffness: Real,
    #[serde(default = "default_ang_k")]
    pub angular_stiffness: Real,
    #[serde(default = "default_lin_c")]
    pub linear_damping: Real,
    #[serde(default = "default_ang_c")]
    pub angular_damping: Real,
    #[serde(default)]
    pub waypoints: Vec<WaypointConfig>,
}

fn default_scale() -> Real {
    1.0
}
fn default_lin_k() -> Real {
    100.0
}
fn default_ang_k() -> Real {
    1.0
}
fn default_lin_c() -> Real {
    1.0
}
fn default_ang_c() -> Real {
    0.01
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    #[serde(default)]
    pub translation: [Real; 3],
    /// Roll-pitch-yaw in radians.
    #[serde(default)]
    pub rotation_rpy: [Real; 3],
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointConfig {
    pub time: Real,
    pub pose: PoseConfig,
}

/// Observer writing per-step records of one body to a CSV file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    pub body: String,
    pub output: String,
}

impl SceneConfig {
    /// Loads and validates a scene file. Relative mesh paths resolve against
    /// the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let path_str = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path_str.clone(),
            source,
        })?;
        let mut config: SceneConfig = toml::from_str(&text).map_err(|source| ConfigError::Toml {
            path: path_str,
            source: Box::new(source),
        })?;
        config.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn from_str_for_tests(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ConfigError> {
        let mut config: SceneConfig = toml::from_str(text).map_err(|source| ConfigError::Toml {
            path: "<inline>".into(),
            source: Box::new(source),
        })?;
        config.base_dir = base_dir.into();
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_path(&self, relative: &str) -> PathBuf {
        let p = Path::new(relative);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Cross-reference and range validation; every error carries its config
    /// location.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut names = BTreeSet::new();
        for (i, body) in self.bodies.iter().enumerate() {
            let loc = format!("bodies[{i}] ('{}')", body.name);
            if !names.insert(body.name.clone()) {
                return Err(invalid(loc, "duplicate body name"));
            }
            match body.kind {
                BodyKindConfig::Soft => {
                    if body.mesh.is_none() {
                        return Err(invalid(loc, "soft body needs a volume mesh"));
                    }
                    if let Some(nu) = body.poisson_ratio {
                        if !(0.0..0.5).contains(&nu) {
                            return Err(invalid(loc, format!("poisson_ratio {nu} outside [0, 0.5)")));
                        }
                    }
                    if body.dynamic_topology && body.tearing_threshold.is_none() {
                        return Err(invalid(loc, "dynamic_topology needs tearing_threshold"));
                    }
                    for (c, col) in body.collision.iter().enumerate() {
                        let cloc = format!("{loc}.collision[{c}]");
                        if col.primitives.is_empty() {
                            return Err(invalid(cloc, "primitives must be non-empty"));
                        }
                        if col.proximity < 0.0 {
                            return Err(invalid(cloc, "proximity must be >= 0"));
                        }
                        if body.dynamic_topology && col.mesh.is_some() {
                            return Err(invalid(
                                cloc,
                                "dynamic-topology bodies rebuild their shells; use the boundary surface (omit mesh)",
                            ));
                        }
                    }
                }
                BodyKindConfig::Rigid | BodyKindConfig::Instrument | BodyKindConfig::Endoscope => {
                    if body.kind == BodyKindConfig::Instrument {
                        let jaws = body.jaw_count.unwrap_or(2);
                        if !(1..=2).contains(&jaws) {
                            return Err(invalid(loc, format!("jaw_count {jaws} not in 1..=2")));
                        }
                    }
                }
            }
        }
        for (i, visual) in self.visuals.iter().enumerate() {
            let loc = format!("visuals[{i}] ('{}')", visual.name);
            if !names.contains(&visual.body) {
                return Err(invalid(loc, format!("unknown body '{}'", visual.body)));
            }
            if visual.subdivision > tetsim_core::subdivide::MAX_LEVEL {
                return Err(invalid(loc, format!("subdivision {} above max", visual.subdivision)));
            }
        }
        for (i, att) in self.attachments.iter().enumerate() {
            let loc = format!("attachments[{i}]");
            if !names.contains(&att.body) {
                return Err(invalid(loc, format!("unknown body '{}'", att.body)));
            }
            if att.target != "world" && !names.contains(&att.target) {
                return Err(invalid(loc, format!("unknown target '{}'", att.target)));
            }
            if att.nodes.is_empty() && att.nodes_region.is_none() {
                return Err(invalid(loc, "needs nodes or nodes_region"));
            }
            if let Some(k) = att.stiffness {
                if !(k > 0.0) {
                    return Err(invalid(loc, "stiffness must be > 0 (omit for a pin)"));
                }
            }
        }
        for (i, dev) in self.devices.iter().enumerate() {
            let loc = format!("devices[{i}] ('{}')", dev.name);
            if !names.contains(&dev.controlled_body) {
                return Err(invalid(loc, format!("unknown body '{}'", dev.controlled_body)));
            }
        }
        for (i, tracker) in self.trackers.iter().enumerate() {
            let loc = format!("trackers[{i}]");
            if !names.contains(&tracker.body) {
                return Err(invalid(loc, format!("unknown body '{}'", tracker.body)));
            }
        }
        if !(self.scheduler.period > 0.0) {
            return Err(invalid("scheduler", "period must be > 0"));
        }
        if self.scheduler.slack < 0.0 {
            return Err(invalid("scheduler", "slack must be >= 0"));
        }
        if !(self.scheduler.visual_rate > 0.0) {
            return Err(invalid("scheduler", "visual_rate must be > 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_rigid_body_scene_parses() {
        let cfg = SceneConfig::from_str_for_tests(
            r#"
            [[bodies]]
            name = "ball"
            type = "rigid"
            mass = 1.0
            "#,
            ".",
        )
        .unwrap();
        assert_eq!(cfg.bodies.len(), 1);
        assert_eq!(cfg.gravity, [0.0, -9.81, 0.0]);
        assert_eq!(cfg.scheduler.period, 0.005);
    }

    #[test]
    fn unknown_reference_is_named_in_the_error() {
        let err = SceneConfig::from_str_for_tests(
            r#"
            [[bodies]]
            name = "ball"
            type = "rigid"

            [[visuals]]
            name = "skin"
            body = "missing"
            "#,
            ".",
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("visuals[0]"), "{text}");
        assert!(text.contains("missing"), "{text}");
    }

    #[test]
    fn dynamic_topology_requires_threshold() {
        let err = SceneConfig::from_str_for_tests(
            r#"
            [[bodies]]
            name = "soft"
            type = "soft"
            mesh = "x.tet"
            dynamic_topology = true
            "#,
            ".",
        )
        .unwrap_err();
        assert!(err.to_string().contains("tearing_threshold"));
    }

    #[test]
    fn attachment_without_nodes_is_rejected() {
        let err = SceneConfig::from_str_for_tests(
            r#"
            [[bodies]]
            name = "a"
            type = "soft"
            mesh = "x.tet"

            [[attachments]]
            body = "a"
            target = "world"
            "#,
            ".",
        )
        .unwrap_err();
        assert!(err.to_string().contains("nodes"));
    }
}
