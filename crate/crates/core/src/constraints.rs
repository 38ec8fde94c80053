//! Constraint classifiers over motion traces.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::geometry::{point_segment_distance, Prism, VerticalCapsule};
use crate::scene::{SceneObject, Shape, WorldState};
use crate::sim::{passes_into, settle, swept_prism, MotionTrace, Phase, SkillKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintId {
    Kinematic,
    Collision,
    Grasp,
    Placement,
    /// Not a physical constraint: the program failed to produce or execute an action.
    ProgramError,
}

impl ConstraintId {
    pub const PHYSICAL: [ConstraintId; 4] = [
        ConstraintId::Kinematic,
        ConstraintId::Collision,
        ConstraintId::Grasp,
        ConstraintId::Placement,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ConstraintId::Kinematic => "kinematic",
            ConstraintId::Collision => "collision",
            ConstraintId::Grasp => "grasp",
            ConstraintId::Placement => "placement",
            ConstraintId::ProgramError => "program_error",
        }
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub description: String,
    pub step_index: usize,
    pub action_name: String,
}

impl Violation {
    pub fn new(constraint: ConstraintId, description: impl Into<String>, trace: &MotionTrace) -> Self {
        Violation {
            constraint,
            description: description.into(),
            step_index: trace.step_index,
            action_name: trace.action.name.clone(),
        }
    }
}

pub const UNREACHABLE: &str = "Pose is not reachable by gripper";
pub const NOTHING_GRASPED: &str = "Grasp failed: no object between the gripper fingers";

pub fn collision_description(object: &str, other: &str) -> String {
    format!("Collision detected between object {object}, {other}")
}

fn push_unique(out: &mut Vec<Violation>, v: Violation) {
    if !out.iter().any(|o| o.constraint == v.constraint && o.description == v.description) {
        out.push(v);
    }
}

fn solid(o: &SceneObject) -> bool {
    !matches!(o.shape, Shape::Circle { .. })
}

pub fn check_kinematic(trace: &MotionTrace, config: &Config) -> Vec<Violation> {
    let mut out = Vec::new();
    for step in &trace.steps {
        if step.path.iter().any(|p| !crate::sim::reachable(config, *p)) {
            push_unique(&mut out, Violation::new(ConstraintId::Kinematic, UNREACHABLE, trace));
        }
    }
    out
}

pub fn check_collision(trace: &MotionTrace, config: &Config) -> Vec<Violation> {
    let tol = config.sim.contact_tolerance;
    let mut out = Vec::new();
    for (i, step) in trace.steps.iter().enumerate() {
        let [a, b] = step.path;
        if trace.skill == SkillKind::DrawLine {
            if !step.pen_down {
                continue;
            }
            for o in trace.state_before(i).objects.values() {
                if let Shape::Circle { radius } = o.shape {
                    let d = point_segment_distance([o.pose.x, o.pose.y], [a[0], a[1]], [b[0], b[1]]);
                    if d < radius {
                        push_unique(
                            &mut out,
                            Violation::new(ConstraintId::Collision, collision_description(&o.name, "gripper"), trace),
                        );
                    }
                }
            }
            continue;
        }
        if a == b {
            continue;
        }
        // obstacles are the objects that stay put during this phase
        let start = trace.state_before(i);
        let others: Vec<&SceneObject> = start
            .objects
            .values()
            .filter(|o| solid(o) && !step.carried.contains(&o.name))
            .collect();

        let capsule = VerticalCapsule {
            xy: [b[0], b[1]],
            z: [a[2].min(b[2]), a[2].max(b[2])],
            radius: config.sim.gripper_radius,
        };
        for o in &others {
            if step.exempt.contains(&o.name) || passes_into(o, capsule.xy) {
                continue;
            }
            if capsule.hits(&Prism::of(o), tol) {
                push_unique(
                    &mut out,
                    Violation::new(ConstraintId::Collision, collision_description(&o.name, "gripper"), trace),
                );
            }
        }

        for name in &step.carried {
            let moving = &step.state.objects[name];
            let swept = swept_prism(moving, &step.path);
            for o in &others {
                if passes_into(o, [moving.pose.x, moving.pose.y]) {
                    continue;
                }
                if swept.overlaps(&Prism::of(o), tol) {
                    push_unique(
                        &mut out,
                        Violation::new(ConstraintId::Collision, collision_description(&o.name, name), trace),
                    );
                }
            }
        }
    }
    out
}

pub fn check_grasp(trace: &MotionTrace, config: &Config) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some(attempt) = &trace.grasp else {
        return out;
    };
    let before = &trace.before;
    let tip = attempt.gripper.point();
    match &attempt.requested {
        Some(o) => {
            if let Some(obj) = before.get(o) {
                if obj.shape.grasp_width() > config.constants.gripper_max_opening + 1e-9 {
                    out.push(Violation::new(
                        ConstraintId::Grasp,
                        format!("Grasp failed: object {o} is wider than the gripper opening"),
                        trace,
                    ));
                } else if attempt.grasped.is_none() {
                    out.push(Violation::new(ConstraintId::Grasp, NOTHING_GRASPED, trace));
                }
            }
        }
        None => {
            if attempt.grasped.is_none() {
                out.push(Violation::new(ConstraintId::Grasp, NOTHING_GRASPED, trace));
            }
        }
    }
    let target = attempt.grasped.as_ref().or(attempt.requested.as_ref());
    for o in before.objects.values() {
        if !solid(o) || Some(&o.name) == target || passes_into(o, [tip[0], tip[1]]) {
            continue;
        }
        if Prism::of(o).contains(tip, config.sim.contact_tolerance) {
            out.push(Violation::new(
                ConstraintId::Grasp,
                format!("Grasp failed: gripper in collision with object {}", o.name),
                trace,
            ));
        }
    }
    out
}

pub fn check_placement(trace: &MotionTrace, config: &Config) -> Vec<Violation> {
    if trace.skill != SkillKind::Place {
        return vec![];
    }
    let Some(act) = trace.steps.iter().find(|s| s.phase == Phase::Act) else {
        return vec![];
    };
    let (_, disp) = settle(&act.state, config);
    if disp > config.sim.placement_threshold {
        let name = trace.released.first().cloned().unwrap_or_default();
        vec![Violation::new(
            ConstraintId::Placement,
            format!("Placement of object {name} is unstable"),
            trace,
        )]
    } else {
        vec![]
    }
}

pub fn check(id: ConstraintId, trace: &MotionTrace, config: &Config) -> Vec<Violation> {
    match id {
        ConstraintId::Kinematic => check_kinematic(trace, config),
        ConstraintId::Collision => check_collision(trace, config),
        ConstraintId::Grasp => check_grasp(trace, config),
        ConstraintId::Placement => check_placement(trace, config),
        ConstraintId::ProgramError => vec![],
    }
}

/// All violations from the registered classifiers, ordered by step then constraint id.
pub fn run_all(trace: &MotionTrace, registry: &[ConstraintId], config: &Config) -> Vec<Violation> {
    let mut ids = registry.to_vec();
    ids.sort();
    ids.dedup();
    let mut out: Vec<Violation> = ids.iter().flat_map(|id| check(*id, trace, config)).collect();
    out.sort_by_key(|v| (v.step_index, v.constraint));
    out
}

/// Objects in `s` intersecting the solid body of `o`, excluding `o` itself.
pub fn overlapping(s: &WorldState, o: &SceneObject, config: &Config) -> Vec<String> {
    let p = Prism::of(o);
    s.objects
        .values()
        .filter(|x| x.name != o.name && solid(x) && !passes_into(x, [o.pose.x, o.pose.y]))
        .filter(|x| p.overlaps(&Prism::of(x), config.sim.contact_tolerance))
        .map(|x| x.name.clone())
        .collect()
}
