//! Planar and prism geometry used by the simulator, constraint checkers and goal checkers.

use crate::scene::{SceneObject, Shape};

pub type Pt = [f64; 2];

const DISK_SEGMENTS: usize = 64;

pub fn sub(a: Pt, b: Pt) -> Pt {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn dot(a: Pt, b: Pt) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn cross(a: Pt, b: Pt) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub fn dist(a: Pt, b: Pt) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Euclidean distance from `p` to the closed segment `ab`.
pub fn point_segment_distance(p: Pt, a: Pt, b: Pt) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Closest distance between two closed segments.
pub fn segment_segment_distance(a1: Pt, a2: Pt, b1: Pt, b2: Pt) -> f64 {
    if segments_intersect(a1, a2, b1, b2) {
        return 0.0;
    }
    point_segment_distance(a1, b1, b2)
        .min(point_segment_distance(a2, b1, b2))
        .min(point_segment_distance(b1, a1, a2))
        .min(point_segment_distance(b2, a1, a2))
}

fn orient(a: Pt, b: Pt, c: Pt) -> f64 {
    cross(sub(b, a), sub(c, a))
}

/// True when the segments cross at a single interior point of both.
pub fn segments_properly_intersect(a1: Pt, a2: Pt, b1: Pt, b2: Pt) -> bool {
    let eps = 1e-12;
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps))
        && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}

fn on_segment(p: Pt, a: Pt, b: Pt) -> bool {
    p[0] >= a[0].min(b[0]) - 1e-12
        && p[0] <= a[0].max(b[0]) + 1e-12
        && p[1] >= a[1].min(b[1]) - 1e-12
        && p[1] <= a[1].max(b[1]) + 1e-12
}

pub fn segments_intersect(a1: Pt, a2: Pt, b1: Pt, b2: Pt) -> bool {
    if segments_properly_intersect(a1, a2, b1, b2) {
        return true;
    }
    let eps = 1e-12;
    (orient(b1, b2, a1).abs() <= eps && on_segment(a1, b1, b2))
        || (orient(b1, b2, a2).abs() <= eps && on_segment(a2, b1, b2))
        || (orient(a1, a2, b1).abs() <= eps && on_segment(b1, a1, a2))
        || (orient(a1, a2, b2).abs() <= eps && on_segment(b2, a1, a2))
}

/// Even-odd point-in-polygon test for a simple polygon.
pub fn point_in_polygon(poly: &[Pt], p: Pt) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Counter-clockwise convex hull (Andrew's monotone chain). Collinear points dropped.
pub fn convex_hull(points: &[Pt]) -> Vec<Pt> {
    let mut pts: Vec<Pt> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Pt> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && orient(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Pt> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && orient(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Signed distance from `p` to the boundary of a CCW convex polygon, positive inside.
pub fn convex_inset_distance(hull: &[Pt], p: Pt) -> f64 {
    match hull.len() {
        0 => f64::NEG_INFINITY,
        1 => -dist(hull[0], p),
        2 => -point_segment_distance(p, hull[0], hull[1]),
        n => {
            let mut min_inside = f64::INFINITY;
            let mut outside = false;
            for i in 0..n {
                let a = hull[i];
                let b = hull[(i + 1) % n];
                let e = sub(b, a);
                let len = dot(e, e).sqrt();
                let d = cross(e, sub(p, a)) / len;
                if d < 0.0 {
                    outside = true;
                }
                min_inside = min_inside.min(d);
            }
            if outside {
                -(0..n)
                    .map(|i| point_segment_distance(p, hull[i], hull[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            } else {
                min_inside
            }
        }
    }
}

/// Sutherland–Hodgman clip of a convex polygon by a CCW convex polygon.
pub fn clip_convex(subject: &[Pt], clip: &[Pt]) -> Vec<Pt> {
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let input = std::mem::take(&mut out);
        let inside = |p: Pt| orient(a, b, p) >= 0.0;
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let intersect = || {
                let d1 = orient(a, b, prev);
                let d2 = orient(a, b, cur);
                let t = d1 / (d1 - d2);
                [prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])]
            };
            match (inside(prev), inside(cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(intersect()),
                (false, true) => {
                    out.push(intersect());
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    out
}

pub fn polygon_area(poly: &[Pt]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| cross(poly[i], poly[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

/// Horizontal cross-section of an object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Footprint {
    Rect { center: Pt, half: f64, yaw: f64 },
    Disk { center: Pt, radius: f64 },
}

impl Footprint {
    pub fn of(obj: &SceneObject) -> Footprint {
        let center = [obj.pose.x, obj.pose.y];
        match obj.shape {
            Shape::Cube { half_extent } => Footprint::Rect {
                center,
                half: half_extent,
                yaw: obj.pose.yaw,
            },
            Shape::Circle { radius } | Shape::Cylinder { radius, .. } => {
                Footprint::Disk { center, radius }
            }
        }
    }

    pub fn center(&self) -> Pt {
        match *self {
            Footprint::Rect { center, .. } | Footprint::Disk { center, .. } => center,
        }
    }

    pub fn translated(&self, d: Pt) -> Footprint {
        match *self {
            Footprint::Rect { center, half, yaw } => Footprint::Rect {
                center: [center[0] + d[0], center[1] + d[1]],
                half,
                yaw,
            },
            Footprint::Disk { center, radius } => Footprint::Disk {
                center: [center[0] + d[0], center[1] + d[1]],
                radius,
            },
        }
    }

    fn rect_axes(yaw: f64) -> (Pt, Pt) {
        let (s, c) = yaw.sin_cos();
        ([c, s], [-s, c])
    }

    /// Point expressed in the footprint's local frame.
    fn local(&self, p: Pt) -> Pt {
        match *self {
            Footprint::Rect { center, yaw, .. } => {
                let (u, v) = Self::rect_axes(yaw);
                let d = sub(p, center);
                [dot(d, u), dot(d, v)]
            }
            Footprint::Disk { center, .. } => sub(p, center),
        }
    }

    /// Distance from `p` to the footprint, zero when inside.
    pub fn distance_to(&self, p: Pt) -> f64 {
        match *self {
            Footprint::Rect { half, .. } => {
                let l = self.local(p);
                let dx = (l[0].abs() - half).max(0.0);
                let dy = (l[1].abs() - half).max(0.0);
                dx.hypot(dy)
            }
            Footprint::Disk { center, radius } => (dist(p, center) - radius).max(0.0),
        }
    }

    pub fn contains(&self, p: Pt, tol: f64) -> bool {
        match *self {
            Footprint::Rect { half, .. } => {
                let l = self.local(p);
                l[0].abs() <= half + tol && l[1].abs() <= half + tol
            }
            Footprint::Disk { center, radius } => dist(p, center) <= radius + tol,
        }
    }

    /// Counter-clockwise polygon; disks are approximated by an inscribed 64-gon.
    pub fn polygon(&self) -> Vec<Pt> {
        match *self {
            Footprint::Rect { center, half, yaw } => {
                let (u, v) = Self::rect_axes(yaw);
                [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]
                    .iter()
                    .map(|[a, b]| {
                        [
                            center[0] + half * (a * u[0] + b * v[0]),
                            center[1] + half * (a * u[1] + b * v[1]),
                        ]
                    })
                    .collect()
            }
            Footprint::Disk { center, radius } => (0..DISK_SEGMENTS)
                .map(|i| {
                    let t = std::f64::consts::TAU * i as f64 / DISK_SEGMENTS as f64;
                    [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect(),
        }
    }

    /// Overlap with penetration deeper than `tol`.
    pub fn overlaps(&self, other: &Footprint, tol: f64) -> bool {
        match (*self, *other) {
            (Footprint::Disk { center: a, radius: ra }, Footprint::Disk { center: b, radius: rb }) => {
                dist(a, b) < ra + rb - tol
            }
            (Footprint::Rect { .. }, Footprint::Disk { center, radius })
            | (Footprint::Disk { center, radius }, Footprint::Rect { .. }) => {
                let rect = if matches!(self, Footprint::Rect { .. }) {
                    self
                } else {
                    other
                };
                let l = rect.local(center);
                let Footprint::Rect { half, .. } = *rect else {
                    unreachable!()
                };
                if l[0].abs() <= half && l[1].abs() <= half {
                    return true;
                }
                rect.distance_to(center) < radius - tol
            }
            (Footprint::Rect { .. }, Footprint::Rect { .. }) => {
                let pa = self.polygon();
                let pb = other.polygon();
                let axes = [
                    Self::edge_normal(&pa, 0),
                    Self::edge_normal(&pa, 1),
                    Self::edge_normal(&pb, 0),
                    Self::edge_normal(&pb, 1),
                ];
                axes.iter().all(|&ax| {
                    let (amin, amax) = project(&pa, ax);
                    let (bmin, bmax) = project(&pb, ax);
                    amax.min(bmax) - amin.max(bmin) > tol
                })
            }
        }
    }

    fn edge_normal(poly: &[Pt], i: usize) -> Pt {
        let e = sub(poly[(i + 1) % poly.len()], poly[i]);
        let len = dot(e, e).sqrt();
        [-e[1] / len, e[0] / len]
    }
}

fn project(poly: &[Pt], axis: Pt) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = dot(*p, axis);
        (lo.min(d), hi.max(d))
    })
}

/// Overlap length of two closed intervals (negative when disjoint).
pub fn interval_overlap(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[1].min(b[1]) - a[0].max(b[0])
}

/// Vertical prism: a footprint extruded over `[z_lo, z_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prism {
    pub footprint: Footprint,
    pub z: [f64; 2],
}

impl Prism {
    pub fn of(obj: &SceneObject) -> Prism {
        Prism {
            footprint: Footprint::of(obj),
            z: [obj.bottom(), obj.top()],
        }
    }

    /// Solid swept by this prism while translating vertically by `dz`.
    pub fn swept_vertically(&self, dz: f64) -> Prism {
        Prism {
            footprint: self.footprint,
            z: [self.z[0].min(self.z[0] + dz), self.z[1].max(self.z[1] + dz)],
        }
    }

    pub fn overlaps(&self, other: &Prism, tol: f64) -> bool {
        interval_overlap(self.z, other.z) > tol && self.footprint.overlaps(&other.footprint, tol)
    }

    pub fn contains(&self, p: [f64; 3], tol: f64) -> bool {
        p[2] >= self.z[0] - tol && p[2] <= self.z[1] + tol && self.footprint.contains([p[0], p[1]], tol)
    }
}

/// Capsule around a vertical segment at `xy` spanning `z` with the given radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalCapsule {
    pub xy: Pt,
    pub z: [f64; 2],
    pub radius: f64,
}

impl VerticalCapsule {
    pub fn distance_to(&self, prism: &Prism) -> f64 {
        let dxy = prism.footprint.distance_to(self.xy);
        let dz = (-interval_overlap(self.z, prism.z)).max(0.0);
        dxy.hypot(dz)
    }

    pub fn hits(&self, prism: &Prism, tol: f64) -> bool {
        self.distance_to(prism) < self.radius - tol
    }
}
