//! Deterministic transition model. Executing a ground skill yields a motion trace:
//! the gripper (or pen) path of each phase and the world state at the end of it.
//! Feasibility is not judged here; the constraint checkers read the trace.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::geometry::{clip_convex, convex_hull, convex_inset_distance, dist, Footprint, Prism, Pt};
use crate::scene::{
    ActionParam, Category, EnvKind, GroundAction, HeldObject, Pose, SceneObject, Shape, WorldState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("gripper is already holding `{0}`")]
    AlreadyHolding(String),
    #[error("gripper is not holding an object")]
    NotHolding,
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("held object or grasp does not match the requested `{0}`")]
    GraspMismatch(String),
    #[error("skill `{0}` is not available in this environment")]
    UnknownSkill(String),
    #[error("bad parameters for `{0}`")]
    BadParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Approach,
    Act,
    Retreat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    DrawLine,
    Pick,
    Place,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub phase: Phase,
    /// Tool-tip path for this phase, start then end.
    pub path: [[f64; 3]; 2],
    /// Drawing only: pen in contact with the table.
    pub pen_down: bool,
    /// Objects rigidly moving with the gripper along `path`, at their end positions in `state`.
    pub carried: Vec<String>,
    /// Objects the tool is expected to touch during this phase.
    pub exempt: Vec<String>,
    pub state: WorldState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspAttempt {
    /// Gripper pose at the moment the fingers close.
    pub gripper: Pose,
    /// Object named by the skill, if the skill names one.
    pub requested: Option<String>,
    /// Object that ended up between the fingers.
    pub grasped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionTrace {
    pub step_index: usize,
    pub action: GroundAction,
    pub skill: SkillKind,
    pub before: WorldState,
    pub steps: Vec<TraceStep>,
    pub grasp: Option<GraspAttempt>,
    /// Place only: objects let go by the gripper.
    pub released: Vec<String>,
}

impl MotionTrace {
    pub fn final_state(&self) -> &WorldState {
        self.steps.last().map(|s| &s.state).unwrap_or(&self.before)
    }

    /// State at the start of phase `i`.
    pub fn state_before(&self, i: usize) -> &WorldState {
        if i == 0 {
            &self.before
        } else {
            &self.steps[i - 1].state
        }
    }

    pub fn act_step(&self) -> Option<&TraceStep> {
        self.steps.iter().find(|s| s.phase == Phase::Act)
    }
}

/// Simulator bound to one environment and configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub env: EnvKind,
    pub config: Config,
}

const EPS: f64 = 1e-9;

impl Simulator {
    pub fn new(env: EnvKind, config: Config) -> Self {
        Simulator { env, config }
    }

    fn hover(&self) -> f64 {
        self.config.constants.hover_offset
    }

    /// Analytic stand-in for inverse kinematics: inside the table's x/y bounds
    /// and no higher than the reach limit.
    pub fn reachable(&self, p: [f64; 3]) -> bool {
        reachable(&self.config, p)
    }

    pub fn execute(&self, s: &WorldState, a: &GroundAction) -> Result<MotionTrace, SimError> {
        let scalars = || {
            a.scalar_values()
                .ok_or_else(|| SimError::BadParams(a.name.clone()))
        };
        match (self.env, a.name.as_str()) {
            (EnvKind::Drawing, "draw_line") => {
                let v = scalars()?;
                let [p1x, p1y, p2x, p2y] = v[..] else {
                    return Err(SimError::BadParams(a.name.clone()));
                };
                Ok(self.execute_draw_line(s, p1x, p1y, p2x, p2y))
            }
            (EnvKind::ArrangeBlocks, "pick" | "place") => {
                let v = scalars()?;
                let [x, y, z] = v[..] else {
                    return Err(SimError::BadParams(a.name.clone()));
                };
                if a.name == "pick" {
                    self.execute_pick(s, x, y, z)
                } else {
                    self.execute_place(s, x, y, z)
                }
            }
            (EnvKind::ArrangeYcb, "pick") => match &a.params[..] {
                [ActionParam::Object(o), ActionParam::Pose(g)] => self.execute_pick_grasp(s, o, g),
                _ => Err(SimError::BadParams(a.name.clone())),
            },
            (EnvKind::ArrangeYcb, "place") => match &a.params[..] {
                [ActionParam::Object(o), ActionParam::Pose(g), ActionParam::Pose(p)] => {
                    self.execute_place_grasp(s, o, g, p)
                }
                _ => Err(SimError::BadParams(a.name.clone())),
            },
            _ => Err(SimError::UnknownSkill(a.name.clone())),
        }
    }

    pub fn execute_draw_line(&self, s: &WorldState, p1x: f64, p1y: f64, p2x: f64, p2y: f64) -> MotionTrace {
        let pen = self.config.constants.pen_height;
        let up = pen + self.hover();
        let action = GroundAction::scalars("draw_line", &[p1x, p1y, p2x, p2y]);
        let mut drawn = s.clone();
        drawn.drawn_lines.push(crate::scene::DrawnLine {
            p1: [p1x, p1y],
            p2: [p2x, p2y],
        });
        let step = |phase, path, pen_down, state: &WorldState| TraceStep {
            phase,
            path,
            pen_down,
            carried: vec![],
            exempt: vec![],
            state: state.clone(),
        };
        MotionTrace {
            step_index: 0,
            action,
            skill: SkillKind::DrawLine,
            before: s.clone(),
            steps: vec![
                step(Phase::Approach, [[p1x, p1y, up], [p1x, p1y, pen]], false, s),
                step(Phase::Act, [[p1x, p1y, pen], [p2x, p2y, pen]], true, &drawn),
                step(Phase::Retreat, [[p2x, p2y, pen], [p1x, p1y, up]], false, &drawn),
            ],
            grasp: None,
            released: vec![],
        }
    }

    /// Three-parameter pick: descend to `(x, y, z)`, close, lift back to hover.
    pub fn execute_pick(&self, s: &WorldState, x: f64, y: f64, z: f64) -> Result<MotionTrace, SimError> {
        if let Some(h) = s.held_name() {
            return Err(SimError::AlreadyHolding(h.to_string()));
        }
        let gripper = Pose::from_point(x, y, z);
        let target = pick_candidate(s, gripper.point(), &self.config);
        let action = GroundAction::scalars("pick", &[x, y, z]);
        Ok(self.pick_trace(s, action, gripper, None, target))
    }

    /// Pick object `o` at grasp `g` (gripper pose in the object frame).
    pub fn execute_pick_grasp(&self, s: &WorldState, o: &str, g: &Pose) -> Result<MotionTrace, SimError> {
        if let Some(h) = s.held_name() {
            return Err(SimError::AlreadyHolding(h.to_string()));
        }
        let obj = s.get(o).ok_or_else(|| SimError::UnknownObject(o.to_string()))?;
        let gripper = obj.pose.compose(g);
        let target = finger_gap_holds(obj, gripper.point(), &self.config).then(|| o.to_string());
        let action = GroundAction::new(
            "pick",
            vec![ActionParam::Object(o.to_string()), ActionParam::Pose(*g)],
        );
        Ok(self.pick_trace(s, action, gripper, Some(o.to_string()), target))
    }

    fn pick_trace(
        &self,
        s: &WorldState,
        action: GroundAction,
        gripper: Pose,
        requested: Option<String>,
        target: Option<String>,
    ) -> MotionTrace {
        let tip = gripper.point();
        let hover = [tip[0], tip[1], tip[2] + self.hover()];
        let exempt: Vec<String> = requested.iter().chain(target.iter()).cloned().collect();

        let mut closed = s.clone();
        let mut carried = Vec::new();
        if let Some(t) = &target {
            let obj_pose = s.objects[t].pose;
            closed.held = Some(HeldObject {
                object: t.clone(),
                grasp: obj_pose.inverse().compose(&gripper),
            });
            carried = carried_set(s, t, &self.config);
        }
        let mut lifted = closed.clone();
        for name in &carried {
            let o = lifted.objects.get_mut(name).expect("carried object exists");
            o.pose = o.pose.translated(0.0, 0.0, self.hover());
        }

        MotionTrace {
            step_index: 0,
            action,
            skill: SkillKind::Pick,
            before: s.clone(),
            steps: vec![
                TraceStep {
                    phase: Phase::Approach,
                    path: [hover, tip],
                    pen_down: false,
                    carried: vec![],
                    exempt: exempt.clone(),
                    state: s.clone(),
                },
                TraceStep {
                    phase: Phase::Act,
                    path: [tip, tip],
                    pen_down: false,
                    carried: vec![],
                    exempt: exempt.clone(),
                    state: closed,
                },
                TraceStep {
                    phase: Phase::Retreat,
                    path: [tip, hover],
                    pen_down: false,
                    carried: carried.clone(),
                    exempt: {
                        let mut e = exempt;
                        e.extend(carried.iter().cloned());
                        e.sort();
                        e.dedup();
                        e
                    },
                    state: lifted,
                },
            ],
            grasp: Some(GraspAttempt {
                gripper,
                requested,
                grasped: target,
            }),
            released: vec![],
        }
    }

    /// Three-parameter place: move the gripper to `(x, y, z)` and open it.
    pub fn execute_place(&self, s: &WorldState, x: f64, y: f64, z: f64) -> Result<MotionTrace, SimError> {
        let held = s.held.as_ref().ok_or(SimError::NotHolding)?;
        let gripper = Pose::from_point(x, y, z);
        let object_pose = gripper.compose(&held.grasp.inverse());
        let action = GroundAction::scalars("place", &[x, y, z]);
        Ok(self.place_trace(s, action, object_pose, held.grasp))
    }

    /// Place held object `o` (held at grasp `g`) at object pose `p`.
    pub fn execute_place_grasp(
        &self,
        s: &WorldState,
        o: &str,
        g: &Pose,
        p: &Pose,
    ) -> Result<MotionTrace, SimError> {
        let held = s.held.as_ref().ok_or(SimError::NotHolding)?;
        if !s.objects.contains_key(o) {
            return Err(SimError::UnknownObject(o.to_string()));
        }
        if held.object != o || !held.grasp.approx_eq(g, 1e-9) {
            return Err(SimError::GraspMismatch(o.to_string()));
        }
        let action = GroundAction::new(
            "place",
            vec![
                ActionParam::Object(o.to_string()),
                ActionParam::Pose(*g),
                ActionParam::Pose(*p),
            ],
        );
        Ok(self.place_trace(s, action, *p, held.grasp))
    }

    fn place_trace(&self, s: &WorldState, action: GroundAction, commanded: Pose, grasp: Pose) -> MotionTrace {
        let held_name = s.held_name().expect("caller checked held").to_string();
        let carried = carried_set(s, &held_name, &self.config);
        let held_obj = &s.objects[&held_name];

        let mut at_cmd = held_obj.clone();
        at_cmd.pose = commanded;
        let hover_bottom = at_cmd.bottom() + self.hover();
        let contact = contact_height(s, &at_cmd, &carried, hover_bottom, &self.config);
        let lift = (contact - at_cmd.bottom()).max(0.0);
        let released_pose = commanded.translated(0.0, 0.0, lift);

        let gripper_cmd = commanded.compose(&grasp);
        let gripper = released_pose.compose(&grasp);
        let hover = [gripper_cmd.x, gripper_cmd.y, gripper_cmd.z + self.hover()];
        let tip = gripper.point();

        let old = held_obj.pose;
        let (dx, dy, dz) = (
            released_pose.x - old.x,
            released_pose.y - old.y,
            released_pose.z - old.z,
        );
        let mut lowered = s.clone();
        for name in &carried {
            let o = lowered.objects.get_mut(name).expect("carried object exists");
            o.pose = if *name == held_name {
                released_pose
            } else {
                o.pose.translated(dx, dy, dz)
            };
        }
        let mut released = lowered.clone();
        released.held = None;
        let (settled, _) = settle(&released, &self.config);

        MotionTrace {
            step_index: 0,
            action,
            skill: SkillKind::Place,
            before: s.clone(),
            steps: vec![
                TraceStep {
                    phase: Phase::Approach,
                    path: [hover, tip],
                    pen_down: false,
                    carried: carried.clone(),
                    exempt: carried.clone(),
                    state: lowered,
                },
                TraceStep {
                    phase: Phase::Act,
                    path: [tip, tip],
                    pen_down: false,
                    carried: vec![],
                    exempt: carried.clone(),
                    state: released,
                },
                TraceStep {
                    phase: Phase::Retreat,
                    path: [tip, hover],
                    pen_down: false,
                    carried: vec![],
                    exempt: carried.clone(),
                    state: settled,
                },
            ],
            grasp: None,
            released: carried,
        }
    }
}

pub fn reachable(config: &Config, p: [f64; 3]) -> bool {
    let b = &config.constants.table_bounds;
    p.iter().all(|v| v.is_finite())
        && p[0] >= b[0][0]
        && p[0] <= b[0][1]
        && p[1] >= b[1][0]
        && p[1] <= b[1][1]
        && p[2] <= config.constants.reach_z_max
}

/// Whether a closing gripper with its tip at `tip` has part of `obj` between the fingers.
pub fn finger_gap_holds(obj: &SceneObject, tip: [f64; 3], config: &Config) -> bool {
    if obj.shape.grasp_width() > config.constants.gripper_max_opening + EPS {
        return false;
    }
    grasp_region_contains(obj, tip, config)
}

/// Region of tip positions from which closing the fingers catches `obj`.
///
/// Blocks: within the horizontal tolerance of the top center and within the
/// vertical tolerance of the top face. Cylinders: anywhere inside the body.
pub fn grasp_region_contains(obj: &SceneObject, tip: [f64; 3], config: &Config) -> bool {
    let st = &config.sim;
    match obj.shape {
        Shape::Cube { .. } => {
            let fp = Footprint::Rect {
                center: [obj.pose.x, obj.pose.y],
                half: st.grasp_xy_tolerance,
                yaw: obj.pose.yaw,
            };
            fp.contains([tip[0], tip[1]], EPS) && (tip[2] - obj.top()).abs() <= st.grasp_z_tolerance + EPS
        }
        Shape::Cylinder { radius, .. } => {
            dist([tip[0], tip[1]], [obj.pose.x, obj.pose.y]) <= radius + EPS
                && tip[2] >= obj.bottom() - EPS
                && tip[2] <= obj.top() + EPS
        }
        Shape::Circle { .. } => false,
    }
}

/// Object caught by a three-parameter pick at `tip`: the graspable object whose
/// center is nearest, ties broken by name.
pub fn pick_candidate(s: &WorldState, tip: [f64; 3], config: &Config) -> Option<String> {
    s.objects
        .values()
        .filter(|o| o.category != Category::Bowl && finger_gap_holds(o, tip, config))
        .map(|o| {
            let p = o.pose.point();
            let d = ((p[0] - tip[0]).powi(2) + (p[1] - tip[1]).powi(2) + (p[2] - tip[2]).powi(2)).sqrt();
            (d, o.name.clone())
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .map(|(_, n)| n)
}

fn is_container_for(support: &SceneObject, center: Pt) -> bool {
    support.category == Category::Bowl
        && dist(center, [support.pose.x, support.pose.y])
            <= match support.shape {
                Shape::Cylinder { radius, .. } => radius,
                _ => 0.0,
            }
}

/// Height of the surface `support` offers to an object centered at `center`.
fn support_surface(support: &SceneObject, center: Pt, config: &Config) -> f64 {
    if is_container_for(support, center) {
        support.bottom() + config.sim.bowl_floor_height
    } else {
        support.top()
    }
}

/// Bowls are open containers: bodies whose center is over the opening pass into them.
pub fn passes_into(support: &SceneObject, center: Pt) -> bool {
    is_container_for(support, center)
}

fn solid(o: &SceneObject) -> bool {
    !matches!(o.shape, Shape::Circle { .. })
}

/// True when `upper` rests directly on `lower`.
pub fn rests_on(upper: &SceneObject, lower: &SceneObject, config: &Config) -> bool {
    if !solid(upper) || !solid(lower) || upper.name == lower.name {
        return false;
    }
    let c = [upper.pose.x, upper.pose.y];
    let surface = support_surface(lower, c, config);
    (upper.bottom() - surface).abs() <= 1e-6
        && Footprint::of(upper).overlaps(&Footprint::of(lower), config.sim.contact_tolerance)
}

/// `name` plus every object transitively resting on it, sorted by name after `name`.
pub fn carried_set(s: &WorldState, name: &str, config: &Config) -> Vec<String> {
    let mut out = vec![name.to_string()];
    let mut frontier = vec![name.to_string()];
    while let Some(cur) = frontier.pop() {
        let base = &s.objects[&cur];
        for o in s.objects.values() {
            if !out.contains(&o.name) && rests_on(o, base, config) {
                out.push(o.name.clone());
                frontier.push(o.name.clone());
            }
        }
    }
    out[1..].sort();
    out
}

/// Highest surface the descending `obj` meets before reaching its commanded pose.
fn contact_height(
    s: &WorldState,
    obj: &SceneObject,
    ignore: &[String],
    hover_bottom: f64,
    config: &Config,
) -> f64 {
    let tol = config.sim.contact_tolerance;
    let fp = Footprint::of(obj);
    let c = [obj.pose.x, obj.pose.y];
    s.objects
        .values()
        .filter(|o| solid(o) && !ignore.contains(&o.name))
        .filter(|o| fp.overlaps(&Footprint::of(o), tol))
        .map(|o| support_surface(o, c, config))
        .filter(|h| *h <= hover_bottom + tol)
        .fold(0.0_f64, f64::max)
}

/// Quasi-static settling. Objects are visited bottom-up; each comes to rest on the
/// highest surface beneath it if its center of mass lies inside the support polygon
/// of that level (inset by the stability margin), otherwise it drops to the table.
/// Returns the settled state and the largest displacement.
pub fn settle(s: &WorldState, config: &Config) -> (WorldState, f64) {
    let tol = config.sim.contact_tolerance;
    let carried = match s.held_name() {
        Some(h) => carried_set(s, h, config),
        None => vec![],
    };
    let mut order: Vec<&SceneObject> = s
        .objects
        .values()
        .filter(|o| solid(o) && !carried.contains(&o.name))
        .collect();
    order.sort_by(|a, b| a.bottom().total_cmp(&b.bottom()).then_with(|| a.name.cmp(&b.name)));

    let mut out = s.clone();
    let mut settled: Vec<String> = Vec::new();
    let mut max_disp = 0.0_f64;
    for o in order {
        let cur = out.objects[&o.name].clone();
        let fp = Footprint::of(&cur);
        let com = [cur.pose.x, cur.pose.y];
        let bottom = cur.bottom();
        let candidates: Vec<(f64, &SceneObject)> = settled
            .iter()
            .map(|n| &out.objects[n])
            .filter(|sup| fp.overlaps(&Footprint::of(sup), tol))
            .map(|sup| (support_surface(sup, com, config), sup))
            .filter(|(h, _)| *h <= bottom + tol)
            .collect();
        let level = candidates.iter().map(|(h, _)| *h).fold(f64::NEG_INFINITY, f64::max);
        let rest_bottom = if candidates.is_empty() {
            0.0
        } else {
            let own = fp.polygon();
            let mut pts = Vec::new();
            for (h, sup) in &candidates {
                if *h >= level - tol {
                    pts.extend(clip_convex(&own, &Footprint::of(sup).polygon()));
                }
            }
            let hull = convex_hull(&pts);
            if convex_inset_distance(&hull, com) >= config.sim.support_margin - EPS {
                level
            } else {
                0.0
            }
        };
        let dz = rest_bottom - bottom;
        if dz.abs() > tol {
            let m = out.objects.get_mut(&o.name).expect("object exists");
            m.pose = m.pose.translated(0.0, 0.0, dz);
            max_disp = max_disp.max(dz.abs());
        }
        settled.push(o.name.clone());
    }
    (out, max_disp)
}

/// Prism of an object at its end-of-phase position, swept back along the phase's vertical motion.
pub fn swept_prism(obj: &SceneObject, path: &[[f64; 3]; 2]) -> Prism {
    Prism::of(obj).swept_vertically(path[0][2] - path[1][2])
}
