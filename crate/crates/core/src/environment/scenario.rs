//! Scenario description (TOML) and its loaded form.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::centerline::{extract_centerline, load_centerline, openings};
use super::observation::RayFan;
use super::reward::RewardConfig;
use super::spaces::{Spaces, TargetRegion};
use crate::error::{Error, Result};
use crate::geometry::{TriMesh, TubeBuilder, Vec3};
use crate::kinematics::{CatheterSpec, TipPose};
use crate::softbody::{HeartbeatDriver, SoftBodyConfig, SoftBodyWorld};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPose {
    pub position: Vec3<f64>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl From<&StartPose> for TipPose<f64> {
    fn from(s: &StartPose) -> Self {
        TipPose::new(s.position, s.alpha, s.gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeartbeatConfig {
    pub enabled: bool,
    /// mm
    pub amplitude: Vec3<f64>,
    /// s
    pub period: f64,
    /// Center of the moving (annulus) region; weights fall to zero at `radius`.
    pub center: Vec3<f64>,
    /// mm
    pub radius: f64,
}

impl Default for HeartbeatConfig {
    fn default() -> Self {
        Self { enabled: false, amplitude: Vec3::new(0.0, 0.0, 2.0), period: 1.0, center: Vec3::zero(), radius: 30.0 }
    }
}

/// On-disk scenario. Paths are relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    /// ASCII OBJ vessel surface.
    pub mesh: String,
    /// `"auto"` to extract from the mesh, otherwise a centerline text file.
    #[serde(default = "auto")]
    pub centerline: String,
    /// Wall deformation from tip contact (and heartbeat when enabled).
    #[serde(default)]
    pub deformable: bool,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    pub start_poses: Vec<StartPose>,
    pub target: TargetRegion,
    #[serde(default)]
    pub catheter: CatheterSpec<f64>,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub rays: RayFan,
    #[serde(default)]
    pub softbody: SoftBodyConfig<f64>,
    #[serde(default)]
    pub heartbeat: HeartbeatConfig,
}

fn auto() -> String {
    "auto".into()
}

fn default_max_steps() -> usize {
    2000
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }
}

/// A validated scenario with its mesh, spaces and a rest-state world.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub mesh: TriMesh<f64>,
    pub spaces: Spaces,
    /// World at rest; environments clone it.
    pub world: SoftBodyWorld<f64>,
    /// Hex digest over the scenario description and mesh geometry.
    pub hash: String,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Arc<Self>> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read scenario {}: {e}", path.display())))?;
        let file = ScenarioFile::parse(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mesh_path = base.join(&file.mesh);
        if !mesh_path.exists() {
            return Err(Error::config(format!("mesh file {} not found", mesh_path.display())));
        }
        let mesh = TriMesh::load_obj(&mesh_path)?;
        let centerline = match file.centerline.as_str() {
            "auto" => None,
            p => Some(load_centerline(resolve(&base, p))?),
        };
        Self::build(file, mesh, centerline).map(Arc::new)
    }

    /// Assembles a scenario from an in-memory mesh; `centerline` overrides
    /// extraction.
    pub fn build(file: ScenarioFile, mesh: TriMesh<f64>, centerline: Option<Vec<Vec3<f64>>>) -> Result<Self> {
        file.catheter.validate()?;
        file.reward.validate()?;
        file.rays.validate()?;
        if file.max_steps == 0 {
            return Err(Error::config("max_steps must be positive"));
        }
        let starts: Vec<TipPose<f64>> = file.start_poses.iter().map(TipPose::from).collect();
        let hint = starts.first().map(|p| p.position);
        let centerline = match centerline {
            Some(c) => c,
            None => extract_centerline(&mesh, hint, file.reward.waypoint_radius)?,
        };
        let heartbeat = if file.heartbeat.enabled {
            let hb = &file.heartbeat;
            if !(hb.period > 0.0) || !(hb.radius > 0.0) {
                return Err(Error::config("heartbeat period and radius must be positive"));
            }
            HeartbeatDriver::with_falloff(hb.amplitude, hb.period, &mesh.vertices, hb.center, hb.radius)
        } else {
            HeartbeatDriver::off()
        };
        let world = SoftBodyWorld::from_mesh(&mesh, file.softbody, heartbeat)?;
        let spaces = Spaces::new(centerline, file.target, starts, openings(&mesh)?, &world)?;
        let hash = scenario_hash(&file, &mesh);
        Ok(Self { file, mesh, spaces, world, hash })
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    /// Same scenario with heartbeat and contact deformation switched on or
    /// off (used for static vs. dynamic evaluation).
    pub fn with_dynamics(&self, deformable: bool, heartbeat: bool) -> Result<Self> {
        let mut file = self.file.clone();
        file.deformable = deformable;
        file.heartbeat.enabled = heartbeat;
        Self::build(file, self.mesh.clone(), Some(self.spaces.centerline.clone()))
    }

    pub fn schema_hash(&self) -> String {
        self.file.rays.schema_hash()
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn scenario_hash(file: &ScenarioFile, mesh: &TriMesh<f64>) -> String {
    let mut h = Sha256::new();
    // the mesh path is irrelevant once the geometry is hashed
    let mut canon = file.clone();
    canon.mesh.clear();
    canon.centerline.clear();
    h.update(serde_json::to_vec(&canon).expect("scenario serializes"));
    for v in &mesh.vertices {
        for c in v.to_f64() {
            h.update(c.to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        for i in t {
            h.update((*i as u64).to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Built-in procedural vessels.
pub mod toy {
    use super::*;

    pub const LUMEN_RADIUS: f64 = 8.0;

    pub fn curved_tube() -> TubeBuilder {
        TubeBuilder::new(LUMEN_RADIUS)
            .segments(16)
            .spacing(2.0)
            .straight(30.0)
            .arc(60.0, 75f64.to_radians())
            .straight(30.0)
    }

    pub fn straight_tube() -> TubeBuilder {
        TubeBuilder::new(LUMEN_RADIUS).segments(16).spacing(2.0).straight(100.0)
    }

    /// Centerline point `back` mm before the far end of `tube`.
    fn near_end(tube: &TubeBuilder, back: f64) -> Vec3<f64> {
        let (pts, _) = tube.centerline::<f64>();
        let mut left = back;
        for w in pts.windows(2).rev() {
            let seg = w[0].distance(w[1]);
            if seg >= left {
                return w[1].lerp(w[0], left / seg);
            }
            left -= seg;
        }
        pts[0]
    }

    pub fn scenario_file(name: &str, tube: &TubeBuilder, mesh_file: &str) -> ScenarioFile {
        let end = near_end(tube, 15.0);
        ScenarioFile {
            name: name.into(),
            mesh: mesh_file.into(),
            centerline: "auto".into(),
            deformable: false,
            max_steps: 600,
            start_poses: [0.0, 1.5, -1.5]
                .iter()
                .map(|&x| StartPose { position: Vec3::new(x, 2.0, 0.0), alpha: 0.0, gamma: 0.0 })
                .collect(),
            target: TargetRegion { center: end, radius: LUMEN_RADIUS + 1.0 },
            catheter: CatheterSpec::default(),
            reward: RewardConfig::default(),
            rays: RayFan::default(),
            softbody: SoftBodyConfig::default(),
            heartbeat: HeartbeatConfig {
                enabled: false,
                amplitude: Vec3::new(0.0, 0.0, 2.5),
                period: 1.0,
                center: end,
                radius: 60.0,
            },
        }
    }

    pub fn curved() -> Arc<Scenario> {
        let tube = curved_tube();
        let file = scenario_file("toy-curved", &tube, "curved_tube.obj");
        Arc::new(Scenario::build(file, tube.build(), None).expect("built-in scenario is valid"))
    }

    pub fn straight() -> Arc<Scenario> {
        let tube = straight_tube();
        let file = scenario_file("toy-straight", &tube, "straight_tube.obj");
        Arc::new(Scenario::build(file, tube.build(), None).expect("built-in scenario is valid"))
    }
}
