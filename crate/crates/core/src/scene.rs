//! Object-oriented world state, poses, skill schemas and table constants.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("unknown skill `{0}`")]
    UnknownSkill(String),
    #[error("skill `{name}` expects {expected} parameters, got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("skill `{name}` parameter `{param}` expects a {expected}, got {got}")]
    KindMismatch {
        name: String,
        param: String,
        expected: ParamKind,
        got: &'static str,
    },
    #[error("invalid object `{name}`: {reason}")]
    InvalidObject { name: String, reason: String },
    #[error("duplicate object name `{0}`")]
    DuplicateObject(String),
    #[error("non-finite pose component")]
    NonFinitePose,
}

/// 6-DoF placement. Orientation is intrinsic X-Y-Z Euler angles (roll, pitch, yaw).
///
/// Serialized as a flat `[x, y, z, roll, pitch, yaw]` array.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 6]", into = "[f64; 6]")]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

pub type Mat3 = [[f64; 3]; 3];

impl From<[f64; 6]> for Pose {
    fn from(a: [f64; 6]) -> Self {
        Pose::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }
}

impl From<Pose> for [f64; 6] {
    fn from(p: Pose) -> Self {
        [p.x, p.y, p.z, p.roll, p.pitch, p.yaw]
    }
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        roll: 0.0,
        pitch: 0.0,
        yaw: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Pose {
            x,
            y,
            z,
            roll,
            pitch,
            yaw,
        }
    }

    pub const fn from_point(x: f64, y: f64, z: f64) -> Self {
        Pose::new(x, y, z, 0.0, 0.0, 0.0)
    }

    pub fn point(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn euler(&self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }

    pub fn is_finite(&self) -> bool {
        <[f64; 6]>::from(*self).iter().all(|v| v.is_finite())
    }

    fn has_rotation(&self) -> bool {
        self.roll != 0.0 || self.pitch != 0.0 || self.yaw != 0.0
    }

    /// Rotation matrix `Rx(roll) * Ry(pitch) * Rz(yaw)`.
    pub fn rotation(&self) -> Mat3 {
        let (sa, ca) = self.roll.sin_cos();
        let (sb, cb) = self.pitch.sin_cos();
        let (sc, cc) = self.yaw.sin_cos();
        [
            [cb * cc, -cb * sc, sb],
            [ca * sc + sa * sb * cc, ca * cc - sa * sb * sc, -sa * cb],
            [sa * sc - ca * sb * cc, sa * cc + ca * sb * sc, ca * cb],
        ]
    }

    fn with_rotation(t: [f64; 3], r: &Mat3) -> Pose {
        let [roll, pitch, yaw] = euler_from_matrix(r);
        Pose::new(t[0], t[1], t[2], roll, pitch, yaw)
    }

    /// Rigid-body composition `self ∘ other`: `other` expressed in `self`'s frame.
    ///
    /// When either side has no rotation the other side's Euler angles are kept
    /// verbatim rather than round-tripped through a matrix.
    pub fn compose(&self, other: &Pose) -> Pose {
        let r = self.rotation();
        let t = mat_vec(&r, &other.point());
        let translation = [self.x + t[0], self.y + t[1], self.z + t[2]];
        if !other.has_rotation() {
            Pose::new(
                translation[0],
                translation[1],
                translation[2],
                self.roll,
                self.pitch,
                self.yaw,
            )
        } else if !self.has_rotation() {
            Pose::new(
                translation[0],
                translation[1],
                translation[2],
                other.roll,
                other.pitch,
                other.yaw,
            )
        } else {
            let m = mat_mul(&r, &other.rotation());
            Pose::with_rotation(translation, &m)
        }
    }

    pub fn inverse(&self) -> Pose {
        let r = self.rotation();
        let rt = transpose(&r);
        let t = mat_vec(&rt, &self.point());
        let translation = [-t[0], -t[1], -t[2]];
        if !self.has_rotation() {
            Pose::from_point(translation[0], translation[1], translation[2])
        } else {
            Pose::with_rotation(translation, &rt)
        }
    }

    /// Transforms a point from this pose's frame into the parent frame.
    pub fn transform_point(&self, p: [f64; 3]) -> [f64; 3] {
        let t = mat_vec(&self.rotation(), &p);
        [self.x + t[0], self.y + t[1], self.z + t[2]]
    }

    pub fn translated(&self, dx: f64, dy: f64, dz: f64) -> Pose {
        Pose {
            x: self.x + dx,
            y: self.y + dy,
            z: self.z + dz,
            ..*self
        }
    }

    /// Same rigid transform within `tol` (translation and rotation-matrix entries).
    pub fn approx_eq(&self, other: &Pose, tol: f64) -> bool {
        let ra = self.rotation();
        let rb = other.rotation();
        let t_ok = self
            .point()
            .iter()
            .zip(other.point())
            .all(|(a, b)| (a - b).abs() <= tol);
        let r_ok = (0..3).all(|i| (0..3).all(|j| (ra[i][j] - rb[i][j]).abs() <= tol));
        t_ok && r_ok
    }
}

pub fn euler_from_matrix(r: &Mat3) -> [f64; 3] {
    let sb = r[0][2].clamp(-1.0, 1.0);
    let pitch = sb.asin();
    if sb.abs() < 1.0 - 1e-12 {
        let roll = (-r[1][2]).atan2(r[2][2]);
        let yaw = (-r[0][1]).atan2(r[0][0]);
        [roll, pitch, yaw]
    } else {
        // gimbal lock: only roll ± yaw is observable
        let yaw = r[1][0].atan2(r[1][1]);
        [0.0, pitch, yaw]
    }
}

fn mat_vec(m: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Block,
    Bowl,
    Obstacle,
    Banana,
    Strawberry,
    MeatCan,
    PowerDrill,
    Apple,
    Pear,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::Block,
        Category::Bowl,
        Category::Obstacle,
        Category::Banana,
        Category::Strawberry,
        Category::MeatCan,
        Category::PowerDrill,
        Category::Apple,
        Category::Pear,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Block => "block",
            Category::Bowl => "bowl",
            Category::Obstacle => "obstacle",
            Category::Banana => "banana",
            Category::Strawberry => "strawberry",
            Category::MeatCan => "meat_can",
            Category::PowerDrill => "power_drill",
            Category::Apple => "apple",
            Category::Pear => "pear",
        }
    }

    pub fn is_ycb(&self) -> bool {
        !matches!(self, Category::Block | Category::Bowl | Category::Obstacle)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Primitive geometry standing in for an object's mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Flat disc on the table (drawing obstacles).
    Circle { radius: f64 },
    /// Cube with the given half side length.
    Cube { half_extent: f64 },
    /// Upright cylinder; the pose sits at its geometric center.
    Cylinder { radius: f64, height: f64 },
}

impl Shape {
    pub fn half_height(&self) -> f64 {
        match *self {
            Shape::Circle { .. } => 0.0,
            Shape::Cube { half_extent } => half_extent,
            Shape::Cylinder { height, .. } => height / 2.0,
        }
    }

    /// Width across the narrowest horizontal direction.
    pub fn grasp_width(&self) -> f64 {
        match *self {
            Shape::Circle { radius } | Shape::Cylinder { radius, .. } => 2.0 * radius,
            Shape::Cube { half_extent } => 2.0 * half_extent,
        }
    }

    fn dims_positive(&self) -> bool {
        match *self {
            Shape::Circle { radius } => radius > 0.0,
            Shape::Cube { half_extent } => half_extent > 0.0,
            Shape::Cylinder { radius, height } => radius > 0.0 && height > 0.0,
        }
    }

    fn matches_category(&self, cat: Category) -> bool {
        match (cat, self) {
            (Category::Obstacle, Shape::Circle { .. }) => true,
            (Category::Block, Shape::Cube { .. }) => true,
            (Category::Obstacle | Category::Block, _) => false,
            (_, Shape::Cylinder { .. }) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    pub category: Category,
    pub color: String,
    pub pose: Pose,
    pub shape: Shape,
}

impl SceneObject {
    pub fn new(
        name: impl Into<String>,
        category: Category,
        color: impl Into<String>,
        pose: Pose,
        shape: Shape,
    ) -> Result<Self, SceneError> {
        let obj = SceneObject {
            name: name.into(),
            category,
            color: color.into(),
            pose,
            shape,
        };
        obj.validate()?;
        Ok(obj)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let fail = |reason: &str| SceneError::InvalidObject {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.is_empty() {
            return Err(fail("empty name"));
        }
        if !self.pose.is_finite() {
            return Err(SceneError::NonFinitePose);
        }
        if !self.shape.dims_positive() {
            return Err(fail("shape dimensions must be positive"));
        }
        if !self.shape.matches_category(self.category) {
            return Err(fail("shape variant does not match category"));
        }
        Ok(())
    }

    pub fn bottom(&self) -> f64 {
        self.pose.z - self.shape.half_height()
    }

    pub fn top(&self) -> f64 {
        self.pose.z + self.shape.half_height()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct DrawnLine {
    pub p1: [f64; 2],
    pub p2: [f64; 2],
}

impl From<[[f64; 2]; 2]> for DrawnLine {
    fn from(a: [[f64; 2]; 2]) -> Self {
        DrawnLine { p1: a[0], p2: a[1] }
    }
}

impl From<DrawnLine> for [[f64; 2]; 2] {
    fn from(l: DrawnLine) -> Self {
        [l.p1, l.p2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldObject {
    pub object: String,
    /// Gripper pose expressed in the object frame.
    pub grasp: Pose,
}

/// Full simulator state: objects keyed by name, drawn lines in drawing order,
/// and at most one held object.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "WorldStateRepr")]
pub struct WorldState {
    pub objects: BTreeMap<String, SceneObject>,
    #[serde(default)]
    pub drawn_lines: Vec<DrawnLine>,
    #[serde(default)]
    pub held: Option<HeldObject>,
}

#[derive(Deserialize)]
struct WorldStateRepr {
    objects: BTreeMap<String, ObjectRepr>,
    #[serde(default)]
    drawn_lines: Vec<DrawnLine>,
    #[serde(default)]
    held: Option<HeldObject>,
}

#[derive(Deserialize)]
struct ObjectRepr {
    #[serde(default)]
    name: Option<String>,
    category: Category,
    color: String,
    pose: Pose,
    shape: Shape,
}

impl TryFrom<WorldStateRepr> for WorldState {
    type Error = SceneError;

    fn try_from(repr: WorldStateRepr) -> Result<Self, Self::Error> {
        let mut objects = BTreeMap::new();
        for (key, o) in repr.objects {
            if let Some(n) = &o.name {
                if n != &key {
                    return Err(SceneError::InvalidObject {
                        name: key,
                        reason: format!("name field `{n}` differs from key"),
                    });
                }
            }
            let obj = SceneObject::new(key.clone(), o.category, o.color, o.pose, o.shape)?;
            objects.insert(key, obj);
        }
        let state = WorldState {
            objects,
            drawn_lines: repr.drawn_lines,
            held: repr.held,
        };
        if let Some(h) = &state.held {
            if !state.objects.contains_key(&h.object) {
                return Err(SceneError::InvalidObject {
                    name: h.object.clone(),
                    reason: "held object not in scene".into(),
                });
            }
        }
        Ok(state)
    }
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, obj: SceneObject) -> Result<(), SceneError> {
        obj.validate()?;
        if self.objects.contains_key(&obj.name) {
            return Err(SceneError::DuplicateObject(obj.name));
        }
        self.objects.insert(obj.name.clone(), obj);
        Ok(())
    }

    pub fn with(mut self, obj: SceneObject) -> Result<Self, SceneError> {
        self.insert(obj)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&SceneObject> {
        self.objects.get(name)
    }

    pub fn held_name(&self) -> Option<&str> {
        self.held.as_ref().map(|h| h.object.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("world state serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Rounds to two decimals and renders the way Python's `repr` would.
pub fn fmt_round2(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    format!("{r:?}")
}

/// Human-readable rendering of a state for prompts. Objects appear sorted by name.
pub fn state_to_prompt_text(s: &WorldState) -> String {
    let mut lines = Vec::with_capacity(s.objects.len());
    for (name, o) in &s.objects {
        let pose: [f64; 6] = o.pose.into();
        let pose = pose.iter().map(|v| fmt_round2(*v)).collect::<Vec<_>>().join(", ");
        let mut line = format!(
            "\"{name}\": Object(cat=\"{}\", color=\"{}\", pose=[{pose}]",
            o.category, o.color
        );
        if let Shape::Circle { radius } = o.shape {
            line.push_str(&format!(", radius={}", fmt_round2(radius)));
        }
        line.push(')');
        lines.push(line);
    }
    let mut out = String::from("{");
    out.push_str(&lines.join("\n "));
    out.push('}');
    if !s.drawn_lines.is_empty() {
        let drawn = s
            .drawn_lines
            .iter()
            .map(|l| {
                format!(
                    "[{}, {}, {}, {}]",
                    fmt_round2(l.p1[0]),
                    fmt_round2(l.p1[1]),
                    fmt_round2(l.p2[0]),
                    fmt_round2(l.p2[1])
                )
            })
            .collect::<Vec<_>>()
            .join(", ");
        out.push_str(&format!("\ndrawn_lines=[{drawn}]"));
    }
    if let Some(h) = &s.held {
        out.push_str(&format!("\nheld=\"{}\"", h.object));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Drawing,
    ArrangeBlocks,
    ArrangeYcb,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Drawing, EnvKind::ArrangeBlocks, EnvKind::ArrangeYcb];

    pub fn as_str(&self) -> &'static str {
        match self {
            EnvKind::Drawing => "drawing",
            EnvKind::ArrangeBlocks => "arrange_blocks",
            EnvKind::ArrangeYcb => "arrange_ycb",
        }
    }

    pub fn parse(s: &str) -> Option<EnvKind> {
        EnvKind::ALL.into_iter().find(|e| e.as_str() == s)
    }

    /// Per-iteration sampling budget.
    pub fn default_budget(&self) -> usize {
        match self {
            EnvKind::Drawing => 10_000,
            _ => 1_000,
        }
    }

    /// Arrange rollouts stop at the first violating step; drawing continues.
    pub fn aborts_on_violation(&self) -> bool {
        !matches!(self, EnvKind::Drawing)
    }

    pub fn skills(&self) -> Vec<SkillSchema> {
        use ParamKind::*;
        match self {
            EnvKind::Drawing => vec![SkillSchema::new(
                "draw_line",
                "Draws a straight line from (p1_x, p1_y) to (p2_x, p2_y).\nThe pen is lifted up to get to the start of the next action.",
                &[("p1_x", Scalar), ("p1_y", Scalar), ("p2_x", Scalar), ("p2_y", Scalar)],
            )],
            EnvKind::ArrangeBlocks => vec![
                SkillSchema::new(
                    "pick",
                    "Move to the gripper to location x, y, z and close the gripper",
                    &[("x", Scalar), ("y", Scalar), ("z", Scalar)],
                ),
                SkillSchema::new(
                    "place",
                    "Move to the gripper to location x, y, z and open the gripper",
                    &[("x", Scalar), ("y", Scalar), ("z", Scalar)],
                ),
            ],
            EnvKind::ArrangeYcb => vec![
                SkillSchema::new(
                    "pick",
                    "Pick up object o at grasp g sampled from a grasp sampler. Grasps MUST come from grasp samplers.",
                    &[("o", ObjectRef), ("g", Grasp)],
                ),
                SkillSchema::new(
                    "place",
                    "If holding an object o at grasp g, place the object at pose p.",
                    &[("o", ObjectRef), ("g", Grasp), ("p", ParamKind::Pose)],
                ),
            ],
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Scalar,
    ObjectRef,
    Grasp,
    Pose,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::Scalar => "scalar",
            ParamKind::ObjectRef => "object reference",
            ParamKind::Grasp => "grasp",
            ParamKind::Pose => "pose",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillSchema {
    pub name: String,
    pub description: String,
    pub params: Vec<(String, ParamKind)>,
}

impl SkillSchema {
    pub fn new(name: &str, description: &str, params: &[(&str, ParamKind)]) -> Self {
        SkillSchema {
            name: name.to_string(),
            description: description.to_string(),
            params: params.iter().map(|(n, k)| (n.to_string(), *k)).collect(),
        }
    }

    /// `Action("pick", [x, y, z])` followed by the description.
    pub fn prompt_text(&self) -> String {
        let names = self
            .params
            .iter()
            .map(|(n, _)| n.as_str())
            .collect::<Vec<_>>()
            .join(", ");
        format!("Action(\"{}\", [{}])\n{}", self.name, names, self.description)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionParam {
    Scalar(f64),
    Object(String),
    Pose(Pose),
}

impl ActionParam {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ActionParam::Scalar(_) => "scalar",
            ActionParam::Object(_) => "object reference",
            ActionParam::Pose(_) => "pose",
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            ActionParam::Scalar(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundAction {
    pub name: String,
    pub params: Vec<ActionParam>,
}

impl GroundAction {
    pub fn new(name: impl Into<String>, params: Vec<ActionParam>) -> Self {
        GroundAction {
            name: name.into(),
            params,
        }
    }

    pub fn scalars(name: impl Into<String>, values: &[f64]) -> Self {
        GroundAction::new(name, values.iter().map(|v| ActionParam::Scalar(*v)).collect())
    }

    pub fn scalar_values(&self) -> Option<Vec<f64>> {
        self.params.iter().map(ActionParam::as_scalar).collect()
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match p {
                ActionParam::Scalar(v) => write!(f, "{v:.4}")?,
                ActionParam::Object(o) => write!(f, "{o}")?,
                ActionParam::Pose(p) => write!(f, "{:?}", <[f64; 6]>::from(*p))?,
            }
        }
        f.write_str(")")
    }
}

pub fn validate_action(a: &GroundAction, schemas: &[SkillSchema]) -> Result<(), SceneError> {
    let schema = schemas
        .iter()
        .find(|s| s.name == a.name)
        .ok_or_else(|| SceneError::UnknownSkill(a.name.clone()))?;
    if schema.params.len() != a.params.len() {
        return Err(SceneError::ArityMismatch {
            name: a.name.clone(),
            expected: schema.params.len(),
            got: a.params.len(),
        });
    }
    for ((pname, kind), value) in schema.params.iter().zip(&a.params) {
        let ok = matches!(
            (kind, value),
            (ParamKind::Scalar, ActionParam::Scalar(v)) if v.is_finite()
        ) || matches!(
            (kind, value),
            (ParamKind::ObjectRef, ActionParam::Object(_))
                | (ParamKind::Grasp, ActionParam::Pose(_))
                | (ParamKind::Pose, ActionParam::Pose(_))
        );
        if !ok {
            return Err(SceneError::KindMismatch {
                name: a.name.clone(),
                param: pname.clone(),
                expected: *kind,
                got: value.kind_name(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn block(name: &str, color: &str, pose: Pose) -> SceneObject {
        SceneObject::new(name, Category::Block, color, pose, Shape::Cube { half_extent: 0.02 })
            .unwrap()
    }

    #[test]
    fn compose_with_identity_is_neutral() {
        let p = Pose::new(0.1, -0.2, 0.3, 0.4, -0.5, 0.6);
        assert_eq!(Pose::IDENTITY.compose(&p), p);
        assert_eq!(p.compose(&Pose::IDENTITY), p);
    }

    #[test]
    fn compose_grasp_offset() {
        let p = Pose::IDENTITY.compose(&Pose::from_point(0.0, 0.0, -0.005));
        assert_eq!(p, Pose::from_point(0.0, 0.0, -0.005));
    }

    #[test]
    fn compose_rotated_translation() {
        let a = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, PI / 2.0);
        let p = a.compose(&Pose::from_point(0.1, 0.0, 0.0));
        assert!(p.x.abs() < 1e-9);
        assert!((p.y - 0.1).abs() < 1e-9);
    }

    #[test]
    fn inverse_cancels() {
        let p = Pose::new(0.3, -0.1, 0.2, 0.3, 1.0, -2.0);
        assert!(p.compose(&p.inverse()).approx_eq(&Pose::IDENTITY, 1e-12));
        assert!(p.inverse().compose(&p).approx_eq(&Pose::IDENTITY, 1e-12));
    }

    #[test]
    fn prompt_text_empty_and_single() {
        assert_eq!(state_to_prompt_text(&WorldState::new()), "{}");
        let s = WorldState::new()
            .with(block("o1", "yellow", Pose::new(0.04, -0.36, 0.02, 0.0, -0.0, -0.0)))
            .unwrap();
        let text = state_to_prompt_text(&s);
        assert!(text.contains(
            "cat=\"block\", color=\"yellow\", pose=[0.04, -0.36, 0.02, 0.0, -0.0, -0.0]"
        ));
    }

    #[test]
    fn prompt_text_sorted_by_name() {
        let s = WorldState::new()
            .with(block("b", "red", Pose::from_point(0.0, -0.5, 0.02)))
            .unwrap()
            .with(block("a", "blue", Pose::from_point(0.1, -0.5, 0.02)))
            .unwrap();
        let text = state_to_prompt_text(&s);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("\"a\""));
        assert!(lines[1].contains("\"b\""));
    }

    #[test]
    fn validate_actions() {
        let schemas = EnvKind::ArrangeBlocks.skills();
        assert!(validate_action(&GroundAction::scalars("pick", &[0.0, -0.5, 0.02]), &schemas).is_ok());
        assert!(matches!(
            validate_action(&GroundAction::scalars("pick", &[0.0, -0.5]), &schemas),
            Err(SceneError::ArityMismatch { .. })
        ));
        assert!(matches!(
            validate_action(&GroundAction::scalars("fly", &[1.0]), &schemas),
            Err(SceneError::UnknownSkill(_))
        ));
        let bad = GroundAction::new(
            "pick",
            vec![
                ActionParam::Object("o1".into()),
                ActionParam::Scalar(0.0),
                ActionParam::Scalar(0.0),
            ],
        );
        assert!(matches!(
            validate_action(&bad, &schemas),
            Err(SceneError::KindMismatch { .. })
        ));
    }

    #[test]
    fn shape_must_match_category() {
        let err = SceneObject::new(
            "x",
            Category::Block,
            "red",
            Pose::IDENTITY,
            Shape::Cylinder { radius: 0.1, height: 0.1 },
        );
        assert!(err.is_err());
        let err = SceneObject::new(
            "x",
            Category::Obstacle,
            "red",
            Pose::IDENTITY,
            Shape::Circle { radius: 0.0 },
        );
        assert!(err.is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let s = WorldState::new().with(block("a", "red", Pose::IDENTITY)).unwrap();
        assert!(matches!(
            s.with(block("a", "blue", Pose::IDENTITY)),
            Err(SceneError::DuplicateObject(_))
        ));
    }

    #[test]
    fn json_uses_flat_pose_arrays() {
        let s = WorldState::new()
            .with(block("o1", "red", Pose::from_point(0.1, -0.4, 0.02)))
            .unwrap();
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(v["objects"]["o1"]["pose"].as_array().unwrap().len(), 6);
        assert_eq!(WorldState::from_json(&s.to_json()).unwrap(), s);
    }
}
