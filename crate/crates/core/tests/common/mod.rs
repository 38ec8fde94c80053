//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use serde::Deserialize;
use serde_json::Value;

use sketchplan::lmp::{Domain, ParamVector};
use sketchplan::scene::{Category, GroundAction, Pose, SceneObject, Shape, WorldState};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fence(code: &str) -> String {
    format!("```python\n{code}\n```")
}

pub fn read(rel: &str) -> String {
    let p = fixtures_dir().join(rel);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Expected values for one program fixture, produced outside this crate.
#[derive(Debug, Deserialize)]
pub struct DslFixture {
    pub task: String,
    pub seed: u64,
    pub env: String,
    pub scene: WorldState,
    pub params: ParamVector,
    pub domain: Domain,
    pub plan: Vec<GroundAction>,
}

pub const DSL_FIXTURES: [&str; 10] = [
    "place_in_bowl",
    "clear_then_place",
    "five_block_line",
    "star",
    "arrow",
    "enclosed",
    "pyramid",
    "packing",
    "ycb_packing",
    "ycb_stack",
];

pub fn dsl_fixture(name: &str) -> (String, DslFixture) {
    let src = read(&format!("dsl/{name}.lmp"));
    let fx: DslFixture = serde_json::from_str(&read(&format!("dsl/{name}.json"))).expect("fixture json");
    (src, fx)
}

/// Structural equality of two JSON trees with numbers compared to `tol`.
pub fn json_close(a: &Value, b: &Value, tol: f64) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() <= tol {
                Ok(())
            } else {
                Err(format!("{x} vs {y}"))
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                return Err(format!("length {} vs {}", x.len(), y.len()));
            }
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                json_close(p, q, tol).map_err(|e| format!("[{i}] {e}"))?;
            }
            Ok(())
        }
        (Value::Object(x), Value::Object(y)) => {
            if x.len() != y.len() {
                return Err(format!("keys {:?} vs {:?}", x.keys(), y.keys()));
            }
            for (k, p) in x {
                let q = y.get(k).ok_or_else(|| format!("missing key {k}"))?;
                json_close(p, q, tol).map_err(|e| format!(".{k} {e}"))?;
            }
            Ok(())
        }
        _ if a == b => Ok(()),
        _ => Err(format!("{a} vs {b}")),
    }
}

pub fn close<T: serde::Serialize>(a: &T, b: &T, tol: f64) -> Result<(), String> {
    json_close(&serde_json::to_value(a).unwrap(), &serde_json::to_value(b).unwrap(), tol)
}

pub fn block(name: &str, x: f64, y: f64, z: f64, yaw: f64) -> SceneObject {
    SceneObject::new(
        name,
        Category::Block,
        "red",
        Pose::new(x, y, z, 0.0, 0.0, yaw),
        Shape::Cube { half_extent: 0.02 },
    )
    .unwrap()
}

pub fn obstacle(name: &str, x: f64, y: f64, r: f64) -> SceneObject {
    SceneObject::new(name, Category::Obstacle, "blue", Pose::from_point(x, y, 0.0), Shape::Circle { radius: r }).unwrap()
}

pub fn scene(objs: Vec<SceneObject>) -> WorldState {
    let mut s = WorldState::new();
    for o in objs {
        s.insert(o).unwrap();
    }
    s
}

/// Distance from `p` to segment `ab` by dense sampling of the segment followed by
/// repeated refinement around the best sample.
pub fn sampled_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let at = |t: f64| {
        let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut best = at(0.0).min(at(1.0));
    for _ in 0..6 {
        let n = 1000;
        let step = (hi - lo) / n as f64;
        let mut arg = lo;
        for i in 0..=n {
            let t = lo + step * i as f64;
            let d = at(t);
            if d < best {
                best = d;
                arg = t;
            }
        }
        lo = (arg - 2.0 * step).max(0.0);
        hi = (arg + 2.0 * step).min(1.0);
    }
    best
}

/// Intrinsic x-y-z rotation built from axis-angle factors.
pub fn rotation(roll: f64, pitch: f64, yaw: f64) -> nalgebra::Rotation3<f64> {
    use nalgebra::{Rotation3, Vector3};
    Rotation3::from_axis_angle(&Vector3::x_axis(), roll)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), pitch)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
}

pub fn isometry(p: &Pose) -> nalgebra::Isometry3<f64> {
    let r = rotation(p.roll, p.pitch, p.yaw);
    nalgebra::Isometry3::from_parts(
        nalgebra::Translation3::new(p.x, p.y, p.z),
        nalgebra::UnitQuaternion::from_rotation_matrix(&r),
    )
}

/// Pooled two-proportion z statistic, written out from its definition.
pub fn z_oracle(s1: usize, n1: usize, s2: usize, n2: usize) -> f64 {
    let p1 = s1 as f64 / n1 as f64;
    let p2 = s2 as f64 / n2 as f64;
    let p = (s1 + s2) as f64 / (n1 + n2) as f64;
    let var = p * (1.0 - p) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    if var == 0.0 {
        0.0
    } else {
        (p1 - p2) / var.sqrt()
    }
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
pub fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub const KS_CRITICAL_1PCT: f64 = 1.628;
