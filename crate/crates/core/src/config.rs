//! Tunable constants and tolerances. Everything here can be overridden from a
//! JSON config file; missing keys fall back to the defaults below.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintId;
use crate::scene::{Category, EnvKind, Shape};

const SHAPES_JSON: &str = include_str!("../data/shapes.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConstants {
    /// `[[x_min, x_max], [y_min, y_max], [z_min, z_max]]`
    pub table_bounds: [[f64; 2]; 3],
    pub table_center: [f64; 3],
    pub block_size: f64,
    pub hover_offset: f64,
    pub pen_height: f64,
    pub gripper_max_opening: f64,
    /// Upper z limit of the reachable region.
    pub reach_z_max: f64,
}

impl Default for EnvConstants {
    fn default() -> Self {
        EnvConstants {
            table_bounds: [[-0.3, 0.3], [-0.8, -0.2], [0.0, 0.0]],
            table_center: [0.0, -0.5, 0.0],
            block_size: 0.04,
            hover_offset: 0.1,
            pen_height: 0.0,
            gripper_max_opening: 0.085,
            reach_z_max: 0.5,
        }
    }
}

impl EnvConstants {
    pub fn validate(&self) -> Result<(), String> {
        for (axis, [lo, hi]) in self.table_bounds.iter().enumerate() {
            if lo > hi {
                return Err(format!("table bound {axis} has min > max"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    /// Horizontal slack for a three-parameter pick around a block's top center.
    pub grasp_xy_tolerance: f64,
    /// Vertical slack for a three-parameter pick around a block's top center.
    pub grasp_z_tolerance: f64,
    /// Settle displacement above which a placement counts as unstable.
    pub placement_threshold: f64,
    /// Inset of the support polygon used for the stability test.
    pub support_margin: f64,
    /// Radius of the capsule swept by the gripper.
    pub gripper_radius: f64,
    /// Height of a bowl's interior floor above its base.
    pub bowl_floor_height: f64,
    /// Penetration depth below which two bodies are considered touching, not colliding.
    pub contact_tolerance: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            grasp_xy_tolerance: 0.02,
            grasp_z_tolerance: 0.02,
            placement_threshold: 0.01,
            support_margin: 0.0,
            gripper_radius: 0.02,
            bowl_floor_height: 0.01,
            contact_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalTolerances {
    pub rest_height: f64,
    pub line_deviation: f64,
    pub pyramid_gap_factor: f64,
    pub packing_radius: f64,
    pub endpoint_match: f64,
    pub arrow_angle_min_deg: f64,
    pub arrow_angle_max_deg: f64,
}

impl Default for GoalTolerances {
    fn default() -> Self {
        GoalTolerances {
            rest_height: 0.005,
            line_deviation: 0.01,
            pyramid_gap_factor: 1.5,
            packing_radius: 0.06,
            endpoint_match: 0.01,
            arrow_angle_min_deg: 10.0,
            arrow_angle_max_deg: 80.0,
        }
    }
}

/// Task-generation knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenSettings {
    pub obstacle_radius_range: [f64; 2],
    pub obstacle_clearance: f64,
    pub object_clearance: f64,
    pub packing_keepout: f64,
    pub max_attempts: usize,
}

impl Default for GenSettings {
    fn default() -> Self {
        GenSettings {
            obstacle_radius_range: [0.01, 0.05],
            obstacle_clearance: 0.01,
            object_clearance: 0.03,
            packing_keepout: 0.12,
            max_attempts: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub constants: EnvConstants,
    pub sim: SimSettings,
    pub goals: GoalTolerances,
    pub generation: GenSettings,
    pub shapes: BTreeMap<Category, Shape>,
    pub constraints: BTreeMap<EnvKind, Vec<ConstraintId>>,
}

impl Default for Config {
    fn default() -> Self {
        let shapes: BTreeMap<Category, Shape> =
            serde_json::from_str(SHAPES_JSON).expect("bundled shapes.json is valid");
        let mut constraints = BTreeMap::new();
        constraints.insert(
            EnvKind::Drawing,
            vec![ConstraintId::Kinematic, ConstraintId::Collision],
        );
        for env in [EnvKind::ArrangeBlocks, EnvKind::ArrangeYcb] {
            constraints.insert(env, ConstraintId::PHYSICAL.to_vec());
        }
        Config {
            constants: EnvConstants::default(),
            sim: SimSettings::default(),
            goals: GoalTolerances::default(),
            generation: GenSettings::default(),
            shapes,
            constraints,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl Config {
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let mut cfg: Config = serde_json::from_str(s)?;
        // a partial `shapes` table only overrides the listed categories
        let defaults = Config::default();
        for (cat, shape) in defaults.shapes {
            cfg.shapes.entry(cat).or_insert(shape);
        }
        for (env, ids) in defaults.constraints {
            cfg.constraints.entry(env).or_insert(ids);
        }
        cfg.constants.validate().map_err(ConfigError::Invalid)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Config::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn shape(&self, cat: Category) -> Option<Shape> {
        self.shapes.get(&cat).copied()
    }

    pub fn registry(&self, env: EnvKind) -> &[ConstraintId] {
        self.constraints.get(&env).map(Vec::as_slice).unwrap_or(&[])
    }
}
