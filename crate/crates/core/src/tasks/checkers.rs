//! Goal predicates over final states. Each checker is a pure function of the
//! state and the configured tolerances.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{TaskError, TaskSpec};
use crate::config::Config;
use crate::geometry::{dist, point_in_polygon, point_segment_distance, segments_properly_intersect, Footprint, Pt};
use crate::scene::{Category, SceneObject, Shape, WorldState};
use crate::sim::rests_on;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalVerdict {
    pub success: bool,
    /// Empty on success.
    pub diagnostics: String,
}

impl GoalVerdict {
    pub fn pass() -> Self {
        GoalVerdict {
            success: true,
            diagnostics: String::new(),
        }
    }

    pub fn fail(why: impl Into<String>) -> Self {
        GoalVerdict {
            success: false,
            diagnostics: why.into(),
        }
    }
}

pub type CheckerFn = Arc<dyn Fn(&WorldState, &Config) -> GoalVerdict + Send + Sync>;

#[derive(Clone, Default)]
pub struct CheckerRegistry {
    checkers: BTreeMap<String, CheckerFn>,
}

impl CheckerRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn register(&mut self, id: &str, f: CheckerFn) -> Result<(), TaskError> {
        if self.checkers.contains_key(id) {
            return Err(TaskError::DuplicateChecker(id.to_string()));
        }
        self.checkers.insert(id.to_string(), f);
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.checkers.keys().map(String::as_str)
    }

    pub fn check(&self, id: &str, s: &WorldState, config: &Config) -> Result<GoalVerdict, TaskError> {
        let f = self
            .checkers
            .get(id)
            .ok_or_else(|| TaskError::UnknownChecker(id.to_string()))?;
        Ok(f(s, config))
    }

    pub fn evaluate(&self, spec: &TaskSpec, final_state: &WorldState, config: &Config) -> Result<GoalVerdict, TaskError> {
        self.check(&spec.checker, final_state, config)
    }
}

impl std::fmt::Debug for CheckerRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.checkers.keys()).finish()
    }
}

impl CheckerRegistry {
    /// All built-in checkers.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        let builtins: [(&str, CheckerFn); 11] = [
            ("star", Arc::new(star)),
            ("arrow", Arc::new(arrow)),
            ("enclosed", Arc::new(enclosed)),
            ("pyramid", Arc::new(pyramid)),
            ("line-3", Arc::new(|s: &WorldState, c: &Config| line(s, c, 3))),
            ("line-5", Arc::new(|s: &WorldState, c: &Config| line(s, c, 5))),
            ("packing", Arc::new(packing)),
            ("green-in-bowl", Arc::new(green_in_bowl)),
            ("ycb-packing", Arc::new(ycb_packing)),
            ("ycb-stack", Arc::new(ycb_stack)),
            ("sort", Arc::new(sort)),
        ];
        for (id, f) in builtins {
            r.register(id, f).expect("builtin ids are distinct");
        }
        r
    }
}

fn segments(s: &WorldState) -> Vec<(Pt, Pt)> {
    s.drawn_lines.iter().map(|l| (l.p1, l.p2)).collect()
}

fn obstacles(s: &WorldState) -> Vec<(&SceneObject, f64)> {
    s.objects
        .values()
        .filter_map(|o| match o.shape {
            Shape::Circle { radius } => Some((o, radius)),
            _ => None,
        })
        .collect()
}

fn xy(o: &SceneObject) -> Pt {
    [o.pose.x, o.pose.y]
}

fn touched_obstacle(s: &WorldState) -> Option<String> {
    let segs = segments(s);
    obstacles(s)
        .into_iter()
        .find(|(o, r)| segs.iter().any(|(a, b)| point_segment_distance(xy(o), *a, *b) <= *r))
        .map(|(o, _)| o.name.clone())
}

/// Orders the segments into one closed loop, independent of drawing order and
/// direction. Every endpoint must meet exactly one endpoint of another segment.
/// Returns the loop's vertices.
pub fn closed_loop(segs: &[(Pt, Pt)], tol: f64) -> Option<Vec<Pt>> {
    let n = segs.len();
    if n < 3 {
        return None;
    }
    let end = |i: usize, e: usize| if e == 0 { segs[i].0 } else { segs[i].1 };
    let partner = |i: usize, e: usize| -> Option<(usize, usize)> {
        let p = end(i, e);
        let mut found = None;
        for j in (0..n).filter(|j| *j != i) {
            for f in 0..2 {
                if dist(p, end(j, f)) <= tol {
                    if found.is_some() {
                        return None;
                    }
                    found = Some((j, f));
                }
            }
        }
        found
    };
    let mut verts = vec![segs[0].0];
    let mut visited = vec![false; n];
    let (mut i, mut e) = (0usize, 1usize);
    visited[0] = true;
    loop {
        let (j, f) = partner(i, e)?;
        if j == 0 {
            return (f == 0 && visited.iter().all(|v| *v)).then_some(verts);
        }
        if visited[j] {
            return None;
        }
        visited[j] = true;
        verts.push(end(j, f));
        (i, e) = (j, 1 - f);
    }
}

pub fn star(s: &WorldState, config: &Config) -> GoalVerdict {
    let segs = segments(s);
    if segs.len() != 5 {
        return GoalVerdict::fail(format!("expected 5 segments, found {}", segs.len()));
    }
    if closed_loop(&segs, config.goals.endpoint_match).is_none() {
        return GoalVerdict::fail("segments do not form one closed loop");
    }
    let mut crossings = 0;
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            if segments_properly_intersect(segs[i].0, segs[i].1, segs[j].0, segs[j].1) {
                crossings += 1;
            }
        }
    }
    if crossings != 5 {
        return GoalVerdict::fail(format!("expected 5 self-intersections, found {crossings}"));
    }
    if let Some(o) = touched_obstacle(s) {
        return GoalVerdict::fail(format!("drawing touches obstacle {o}"));
    }
    GoalVerdict::pass()
}

fn angle_deg(u: Pt, v: Pt) -> f64 {
    let c = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn arrow(s: &WorldState, config: &Config) -> GoalVerdict {
    let segs = segments(s);
    if segs.len() != 3 {
        return GoalVerdict::fail(format!("expected 3 segments, found {}", segs.len()));
    }
    let Some((target, _)) = obstacles(s)
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.name.cmp(&a.0.name)))
    else {
        return GoalVerdict::fail("no obstacle to point at");
    };
    let tol = config.goals.endpoint_match;
    let g = &config.goals;
    // the far end of segment i from point t, if one of its ends is at t
    let other_end = |i: usize, t: Pt| -> Option<Pt> {
        let (a, b) = segs[i];
        if dist(a, t) <= tol {
            Some(b)
        } else if dist(b, t) <= tol {
            Some(a)
        } else {
            None
        }
    };
    let mut ok = false;
    for tip in [segs[0].0, segs[0].1] {
        let Some(ends) = (0..3).map(|i| other_end(i, tip)).collect::<Option<Vec<_>>>() else {
            continue;
        };
        for shaft in 0..3 {
            let tail = ends[shaft];
            let heads: Vec<Pt> = (0..3).filter(|i| *i != shaft).map(|i| ends[i]).collect();
            let t = xy(target);
            if dist(tip, t) >= dist(tail, t) {
                continue;
            }
            let back = [tail[0] - tip[0], tail[1] - tip[1]];
            let angles_ok = heads.iter().all(|h| {
                let a = angle_deg(back, [h[0] - tip[0], h[1] - tip[1]]);
                a > g.arrow_angle_min_deg && a < g.arrow_angle_max_deg
            });
            let side = |h: &Pt| back[0] * (h[1] - tip[1]) - back[1] * (h[0] - tip[0]);
            if angles_ok && side(&heads[0]) * side(&heads[1]) < 0.0 {
                ok = true;
            }
        }
    }
    if !ok {
        return GoalVerdict::fail(format!("segments do not form an arrow pointing at {}", target.name));
    }
    if let Some(o) = touched_obstacle(s) {
        return GoalVerdict::fail(format!("drawing touches obstacle {o}"));
    }
    GoalVerdict::pass()
}

pub fn enclosed(s: &WorldState, config: &Config) -> GoalVerdict {
    let Some(poly) = closed_loop(&segments(s), config.goals.endpoint_match) else {
        return GoalVerdict::fail("segments do not form one closed loop");
    };
    let inside = obstacles(s)
        .iter()
        .filter(|(o, _)| point_in_polygon(&poly, xy(o)))
        .count();
    if inside < 2 {
        return GoalVerdict::fail(format!("shape encloses {inside} obstacle(s)"));
    }
    if let Some(o) = touched_obstacle(s) {
        return GoalVerdict::fail(format!("drawing touches obstacle {o}"));
    }
    GoalVerdict::pass()
}

fn blocks(s: &WorldState) -> Vec<&SceneObject> {
    s.objects.values().filter(|o| o.category == Category::Block).collect()
}

fn on_table(o: &SceneObject, config: &Config) -> bool {
    (o.pose.z - config.constants.block_size / 2.0).abs() <= config.goals.rest_height
}

pub fn pyramid(s: &WorldState, config: &Config) -> GoalVerdict {
    let bs = config.constants.block_size;
    let tol = config.goals.rest_height;
    let bl = blocks(s);
    let base: Vec<&&SceneObject> = bl.iter().filter(|o| on_table(o, config)).collect();
    for top in &bl {
        if (top.pose.z - 1.5 * bs).abs() > tol {
            continue;
        }
        let fp = Footprint::of(top);
        for (i, a) in base.iter().enumerate() {
            for b in &base[i + 1..] {
                let gap = dist(xy(a), xy(b));
                if gap <= config.goals.pyramid_gap_factor * bs
                    && fp.overlaps(&Footprint::of(a), config.sim.contact_tolerance)
                    && fp.overlaps(&Footprint::of(b), config.sim.contact_tolerance)
                {
                    return GoalVerdict::pass();
                }
            }
        }
    }
    GoalVerdict::fail("no block rests across two adjacent table blocks")
}

/// Largest distance of any point from the total-least-squares line through `pts`.
pub fn line_deviation(pts: &[Pt]) -> f64 {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let normal = [-theta.sin(), theta.cos()];
    pts.iter()
        .map(|p| ((p[0] - cx) * normal[0] + (p[1] - cy) * normal[1]).abs())
        .fold(0.0, f64::max)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn line(s: &WorldState, config: &Config, n: usize) -> GoalVerdict {
    let pts: Vec<Pt> = blocks(s).into_iter().filter(|o| on_table(o, config)).map(xy).collect();
    if pts.len() < n {
        return GoalVerdict::fail(format!("only {} blocks rest on the table", pts.len()));
    }
    let best = combinations(pts.len(), n)
        .into_iter()
        .map(|idx| line_deviation(&idx.iter().map(|i| pts[*i]).collect::<Vec<_>>()))
        .fold(f64::INFINITY, f64::min);
    if best <= config.goals.line_deviation {
        GoalVerdict::pass()
    } else {
        GoalVerdict::fail(format!("best {n}-block line deviates by {best:.4} m"))
    }
}

fn within_center(objs: &[&SceneObject], config: &Config) -> GoalVerdict {
    if objs.is_empty() {
        return GoalVerdict::fail("nothing to pack");
    }
    let c = config.constants.table_center;
    for o in objs {
        let d = dist(xy(o), [c[0], c[1]]);
        if d > config.goals.packing_radius {
            return GoalVerdict::fail(format!("{} is {d:.3} m from the center", o.name));
        }
    }
    GoalVerdict::pass()
}

pub fn packing(s: &WorldState, config: &Config) -> GoalVerdict {
    within_center(&blocks(s), config)
}

pub fn ycb_packing(s: &WorldState, config: &Config) -> GoalVerdict {
    let objs: Vec<&SceneObject> = s.objects.values().filter(|o| o.category.is_ycb()).collect();
    within_center(&objs, config)
}

fn inside_bowl(o: &SceneObject, bowl: &SceneObject) -> bool {
    Footprint::of(bowl).contains(xy(o), 0.0) && o.pose.z > bowl.bottom() && o.pose.z < bowl.top()
}

fn bowls(s: &WorldState) -> Vec<&SceneObject> {
    s.objects.values().filter(|o| o.category == Category::Bowl).collect()
}

pub fn green_in_bowl(s: &WorldState, _config: &Config) -> GoalVerdict {
    let bw = bowls(s);
    let hit = blocks(s)
        .into_iter()
        .filter(|o| o.color == "green")
        .any(|g| bw.iter().any(|b| inside_bowl(g, b)));
    if hit {
        GoalVerdict::pass()
    } else {
        GoalVerdict::fail("no green block is inside a bowl")
    }
}

pub fn ycb_stack(s: &WorldState, config: &Config) -> GoalVerdict {
    let objs: Vec<&SceneObject> = s.objects.values().filter(|o| o.category.is_ycb()).collect();
    for u in &objs {
        for l in &objs {
            if rests_on(u, l, config) {
                return GoalVerdict::pass();
            }
        }
    }
    GoalVerdict::fail("no object rests on another")
}

pub fn sort(s: &WorldState, _config: &Config) -> GoalVerdict {
    let bw = bowls(s);
    let mut sorted = 0;
    for b in blocks(s) {
        let same: Vec<_> = bw.iter().filter(|w| w.color == b.color).collect();
        if same.is_empty() {
            continue;
        }
        if !same.iter().any(|w| inside_bowl(b, w)) {
            return GoalVerdict::fail(format!("{} is not in a {} bowl", b.name, b.color));
        }
        sorted += 1;
    }
    if sorted == 0 {
        return GoalVerdict::fail("no block has a bowl of its color");
    }
    GoalVerdict::pass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{DrawnLine, Pose};

    fn obstacle(name: &str, x: f64, y: f64, r: f64) -> SceneObject {
        SceneObject::new(name, Category::Obstacle, "blue", Pose::from_point(x, y, 0.0), Shape::Circle { radius: r })
            .unwrap()
    }

    fn block(name: &str, x: f64, y: f64, z: f64) -> SceneObject {
        SceneObject::new(name, Category::Block, "red", Pose::from_point(x, y, z), Shape::Cube { half_extent: 0.02 })
            .unwrap()
    }

    fn with_lines(mut s: WorldState, pts: &[[f64; 2]]) -> WorldState {
        for w in pts.windows(2) {
            s.drawn_lines.push(DrawnLine { p1: w[0], p2: w[1] });
        }
        s
    }

    fn pentagram(c: Pt, r: f64) -> Vec<Pt> {
        (0..=5)
            .map(|k| {
                let a = std::f64::consts::FRAC_PI_2 + (k * 2 % 5) as f64 * 2.0 * std::f64::consts::PI / 5.0;
                [c[0] + r * a.cos(), c[1] + r * a.sin()]
            })
            .collect()
    }

    #[test]
    fn star_accepts_pentagram_rejects_pentagon() {
        let cfg = Config::default();
        let s = with_lines(WorldState::new(), &pentagram([0.0, -0.5], 0.1));
        assert!(star(&s, &cfg).success);
        let pentagon: Vec<Pt> = (0..=5)
            .map(|k| {
                let a = k as f64 * 2.0 * std::f64::consts::PI / 5.0;
                [0.1 * a.cos(), -0.5 + 0.1 * a.sin()]
            })
            .collect();
        assert!(!star(&with_lines(WorldState::new(), &pentagon), &cfg).success);
    }

    #[test]
    fn star_touching_obstacle_fails() {
        let cfg = Config::default();
        let s = WorldState::new().with(obstacle("o1", 0.0, -0.4, 0.02)).unwrap();
        let v = star(&with_lines(s, &pentagram([0.0, -0.5], 0.1)), &cfg);
        assert!(!v.success);
        assert!(v.diagnostics.contains("o1"));
    }

    #[test]
    fn arrow_points_at_largest() {
        let cfg = Config::default();
        let s = WorldState::new()
            .with(obstacle("o1", 0.2, -0.5, 0.05))
            .unwrap()
            .with(obstacle("o2", -0.2, -0.5, 0.02))
            .unwrap();
        let mut good = s.clone();
        good.drawn_lines = vec![
            DrawnLine { p1: [-0.05, -0.5], p2: [0.1, -0.5] },
            DrawnLine { p1: [0.1, -0.5], p2: [0.07, -0.47] },
            DrawnLine { p1: [0.1, -0.5], p2: [0.07, -0.53] },
        ];
        assert!(arrow(&good, &cfg).success);
        let mut backwards = s;
        backwards.drawn_lines = vec![
            DrawnLine { p1: [0.1, -0.5], p2: [-0.05, -0.5] },
            DrawnLine { p1: [-0.05, -0.5], p2: [-0.02, -0.47] },
            DrawnLine { p1: [-0.05, -0.5], p2: [-0.02, -0.53] },
        ];
        assert!(!arrow(&backwards, &cfg).success);
    }

    #[test]
    fn enclosed_needs_two_centers() {
        let cfg = Config::default();
        let s = WorldState::new()
            .with(obstacle("o1", -0.05, -0.5, 0.02))
            .unwrap()
            .with(obstacle("o2", 0.05, -0.5, 0.02))
            .unwrap();
        let square = [[-0.1, -0.6], [0.1, -0.6], [0.1, -0.4], [-0.1, -0.4], [-0.1, -0.6]];
        assert!(enclosed(&with_lines(s.clone(), &square), &cfg).success);
        let small = [[-0.1, -0.6], [0.0, -0.6], [0.0, -0.4], [-0.1, -0.4], [-0.1, -0.6]];
        assert!(!enclosed(&with_lines(s, &small), &cfg).success);
    }

    #[test]
    fn pyramid_and_line() {
        let cfg = Config::default();
        let s = WorldState::new()
            .with(block("a", 0.0, -0.5, 0.02))
            .unwrap()
            .with(block("b", 0.045, -0.5, 0.02))
            .unwrap()
            .with(block("c", 0.0225, -0.5, 0.06))
            .unwrap();
        assert!(pyramid(&s, &cfg).success);
        let mut lowered = s.clone();
        lowered.objects.get_mut("c").unwrap().pose.z -= 0.01;
        assert!(!pyramid(&lowered, &cfg).success);

        let mut row = WorldState::new();
        for i in 0..5 {
            row.insert(block(&format!("b{i}"), -0.1 + 0.05 * i as f64, -0.5, 0.02)).unwrap();
        }
        assert!(line(&row, &cfg, 5).success);
        row.objects.get_mut("b2").unwrap().pose.y += 0.02;
        assert!(!line(&row, &cfg, 5).success);
    }

    #[test]
    fn registry_errors() {
        let mut r = CheckerRegistry::builtin();
        assert!(matches!(
            r.register("star", Arc::new(star)),
            Err(TaskError::DuplicateChecker(_))
        ));
        assert!(matches!(
            r.check("letters", &WorldState::new(), &Config::default()),
            Err(TaskError::UnknownChecker(_))
        ));
    }
}
