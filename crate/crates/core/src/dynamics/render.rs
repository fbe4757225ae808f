//! SVG snapshots of a world.

use super::geometry::{Polygon, WorldShape};
use super::hand::{LinkId, Segment};
use super::math::Vec2;
use super::World;
use crate::transmission::Finger;
use std::fmt::Write;

/// Spacing of the tick marks drawn on the crawler belt (m).
const TICK_SPACING: f64 = 0.005;
const SCALE: f64 = 2000.0;

struct View {
    min: Vec2,
    max: Vec2,
}

impl View {
    fn map(&self, p: Vec2) -> (f64, f64) {
        ((p.x - self.min.x) * SCALE, (self.max.y - p.y) * SCALE)
    }
}

fn polygon_path(view: &View, poly: &Polygon) -> String {
    let mut d = String::new();
    for (i, v) in poly.vertices.iter().enumerate() {
        let (x, y) = view.map(*v);
        let _ = write!(d, "{}{x:.2},{y:.2} ", if i == 0 { "M" } else { "L" });
    }
    d.push('Z');
    d
}

fn shape_element(view: &View, shape: &WorldShape, style: &str) -> String {
    match shape {
        WorldShape::Polygon(p) => format!("<path d=\"{}\" {style}/>\n", polygon_path(view, p)),
        WorldShape::Circle { center, radius } => {
            let (x, y) = view.map(*center);
            format!(
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{:.2}\" {style}/>\n",
                radius * SCALE
            )
        }
        WorldShape::HalfPlane { point, .. } => {
            let (_, y) = view.map(*point);
            format!(
                "<line x1=\"0\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#555\" stroke-width=\"2\"/>\n",
                (view.max.x - view.min.x) * SCALE
            )
        }
    }
}

/// Renders the world as a standalone SVG document. Thin lines across the
/// crawler finger's inner face move with the belt.
pub fn render_svg(world: &World, caption: &str) -> String {
    let half_width = world
        .hand
        .as_ref()
        .map_or(0.1, |h| h.params.mp_spacing / 2.0 + h.params.pp_length + h.params.dp_length);
    let top = world.hand.as_ref().map_or(0.2, |h| h.palm_y + h.geometry.palm_height) + 0.02;
    let view = View {
        min: Vec2::new(-half_width - 0.01, -0.01),
        max: Vec2::new(half_width + 0.01, top.max(0.1)),
    };
    let (w, h) = ((view.max.x - view.min.x) * SCALE, (view.max.y - view.min.y) * SCALE);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for s in &world.statics {
        let style = if s.belt_speed != 0.0 {
            "fill=\"#ccc\" stroke=\"#333\""
        } else {
            "fill=\"#eee\" stroke=\"#555\""
        };
        svg.push_str(&shape_element(&view, &s.shape, style));
    }
    for b in &world.bodies {
        svg.push_str(&shape_element(&view, &b.world_shape(), "fill=\"#f0c060\" stroke=\"#805000\""));
    }
    if let Some(hand) = &world.hand {
        svg.push_str(&shape_element(
            &view,
            &WorldShape::Polygon(hand.palm_outline()),
            "fill=\"#9ab\" stroke=\"#345\"",
        ));
        for link in LinkId::ALL {
            let outline = hand.outline(link);
            svg.push_str(&shape_element(
                &view,
                &WorldShape::Polygon(outline.polygon),
                "fill=\"#bcd\" stroke=\"#234\"",
            ));
        }
        let link = LinkId {
            finger: Finger::Crawler,
            segment: Segment::Distal,
        };
        let frame = hand.frame(link);
        let across = hand.geometry.thickness / 2.0;
        let shift = hand.state.crawler().rem_euclid(TICK_SPACING);
        let mut s = TICK_SPACING - shift;
        while s < frame.length {
            let (x1, y1) = view.map(frame.point(s, across * 0.6));
            let (x2, y2) = view.map(frame.point(s, across));
            let _ = writeln!(
                svg,
                "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"#c00\" stroke-width=\"1\"/>"
            );
            s += TICK_SPACING;
        }
    }
    let _ = writeln!(
        svg,
        "<text x=\"8\" y=\"20\" font-family=\"monospace\" font-size=\"14\">t = {:.3} s  {}</text>",
        world.time(),
        xml_escape(caption)
    );
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
