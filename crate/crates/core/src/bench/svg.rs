//! Top-down SVG rendering at a fixed 1000 px per metre. World y grows toward the
//! robot, which sits above the table, so the vertical axis is flipped.

use std::fmt::Write;
use std::path::Path;

use crate::config::Config;
use crate::scene::{Category, Shape, WorldState};

pub const PX_PER_M: f64 = 1000.0;

fn n(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

pub fn svg_string(s: &WorldState, config: &Config) -> String {
    let b = config.constants.table_bounds;
    let w = (b[0][1] - b[0][0]) * PX_PER_M;
    let h = (b[1][1] - b[1][0]) * PX_PER_M;
    let px = |x: f64| (x - b[0][0]) * PX_PER_M;
    let py = |y: f64| (b[1][1] - y) * PX_PER_M;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        n(w),
        n(h),
        n(w),
        n(h)
    );
    let _ = writeln!(
        out,
        "<rect class=\"table\" x=\"0.000\" y=\"0.000\" width=\"{}\" height=\"{}\" fill=\"#d8c8a8\"/>",
        n(w),
        n(h)
    );
    // lower objects first so stacks read correctly
    let mut objs: Vec<_> = s.objects.values().collect();
    objs.sort_by(|a, b| a.bottom().total_cmp(&b.bottom()).then_with(|| a.name.cmp(&b.name)));
    for o in objs {
        let (cx, cy) = (px(o.pose.x), py(o.pose.y));
        match o.shape {
            Shape::Circle { radius } => {
                let _ = writeln!(
                    out,
                    "<circle class=\"obstacle\" id=\"{}\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>",
                    o.name,
                    n(cx),
                    n(cy),
                    n(radius * PX_PER_M),
                    o.color
                );
            }
            Shape::Cube { half_extent } => {
                let side = 2.0 * half_extent * PX_PER_M;
                let _ = writeln!(
                    out,
                    "<rect class=\"block\" id=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"black\" transform=\"rotate({} {} {})\"/>",
                    o.name,
                    n(cx - side / 2.0),
                    n(cy - side / 2.0),
                    n(side),
                    n(side),
                    o.color,
                    n(-o.pose.yaw.to_degrees()),
                    n(cx),
                    n(cy)
                );
            }
            Shape::Cylinder { radius, .. } => {
                let (class, fill) = if o.category == Category::Bowl {
                    ("bowl", "none")
                } else {
                    ("item", o.color.as_str())
                };
                let _ = writeln!(
                    out,
                    "<circle class=\"{class}\" id=\"{}\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\" stroke=\"{}\" stroke-width=\"3\"/>",
                    o.name,
                    n(cx),
                    n(cy),
                    n(radius * PX_PER_M),
                    o.color
                );
            }
        }
    }
    for l in &s.drawn_lines {
        let _ = writeln!(
            out,
            "<line class=\"drawn\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"2\"/>",
            n(px(l.p1[0])),
            n(py(l.p1[1])),
            n(px(l.p2[0])),
            n(py(l.p2[1]))
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn emit_svg(s: &WorldState, config: &Config, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, svg_string(s, config))
}
