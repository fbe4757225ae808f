//! Collision shapes and narrow-phase contact generation.
//!
//! Polygons are convex with counter-clockwise vertices. Two polygons touch
//! along the edge of least penetration (the reference edge); the most
//! opposed edge of the other polygon is clipped to the reference edge's
//! extent, giving up to two contact points.

use super::math::Vec2;
use serde::{Deserialize, Serialize};

/// Shape in body coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Polygon { vertices: Vec<Vec2> },
    Circle { radius: f64 },
}

impl Shape {
    pub fn rectangle(width: f64, height: f64) -> Self {
        let (w, h) = (width / 2.0, height / 2.0);
        Shape::Polygon {
            vertices: vec![
                Vec2::new(-w, -h),
                Vec2::new(w, -h),
                Vec2::new(w, h),
                Vec2::new(-w, h),
            ],
        }
    }

    pub fn placed(&self, position: Vec2, angle: f64) -> WorldShape {
        match self {
            Shape::Polygon { vertices } => WorldShape::Polygon(Polygon::new(
                vertices.iter().map(|v| position + v.rotated(angle)).collect(),
            )),
            Shape::Circle { radius } => WorldShape::Circle {
                center: position,
                radius: *radius,
            },
        }
    }
}

/// Convex polygon in world coordinates with cached outward edge normals.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
    pub normals: Vec<Vec2>,
}

impl Polygon {
    /// Builds a polygon, reversing the vertex order if it is clockwise.
    pub fn new(mut vertices: Vec<Vec2>) -> Self {
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        let normals = (0..n)
            .map(|i| {
                let e = vertices[(i + 1) % n] - vertices[i];
                Vec2::new(e.y, -e.x).normalized()
            })
            .collect();
        Self { vertices, normals }
    }

    /// Largest edge-plane distance of `p` and the edge it belongs to.
    /// Exact signed distance inside the polygon, a lower bound outside.
    pub fn plane_distance(&self, p: Vec2) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, (v, n)) in self.vertices.iter().zip(&self.normals).enumerate() {
            let d = n.dot(p - *v);
            if d > best.0 {
                best = (d, i);
            }
        }
        best
    }

    /// Closest boundary point to `p`, its distance, and the edge it is on.
    pub fn closest_boundary_point(&self, p: Vec2) -> (Vec2, f64, usize) {
        let n = self.vertices.len();
        let mut best = (self.vertices[0], f64::INFINITY, 0);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let ab = b - a;
            let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
            let q = a + ab * t;
            let d = (p - q).length();
            if d < best.1 {
                best = (q, d, i);
            }
        }
        best
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }
}

pub fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorldShape {
    Polygon(Polygon),
    Circle { center: Vec2, radius: f64 },
    /// Solid half-plane behind the line through `point` with outward `normal`.
    HalfPlane { point: Vec2, normal: Vec2 },
}

impl WorldShape {
    pub fn bounds(&self) -> Aabb {
        match self {
            WorldShape::Polygon(p) => p.bounds(),
            WorldShape::Circle { center, radius } => Aabb {
                min: *center - Vec2::new(*radius, *radius),
                max: *center + Vec2::new(*radius, *radius),
            },
            WorldShape::HalfPlane { .. } => Aabb {
                min: Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
                max: Vec2::new(f64::INFINITY, f64::INFINITY),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    fn from_points(points: &[Vec2]) -> Self {
        let mut b = Aabb {
            min: Vec2::new(f64::INFINITY, f64::INFINITY),
            max: Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        };
        for p in points {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        b
    }

    pub fn overlaps(&self, o: &Aabb, margin: f64) -> bool {
        self.min.x - margin <= o.max.x
            && o.min.x - margin <= self.max.x
            && self.min.y - margin <= o.max.y
            && o.min.y - margin <= self.max.y
    }
}

/// Which features produced a contact. Used for warm starting and to look
/// up belt directions on the owning polygon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feature {
    /// Edge `first` of the first polygon against edge `second` of the
    /// second; `point` tells the two points of one manifold apart.
    Edges { first: usize, second: usize, point: u8 },
    /// Vertex of the first shape against a half-plane.
    VertexOfFirst { vertex: usize },
    /// Vertex of the second shape against a half-plane.
    VertexOfSecond { vertex: usize },
    /// Round second shape touching edge `edge` of the first polygon.
    RoundOnFirst { edge: usize },
    /// Round first shape touching edge `edge` of the second polygon.
    RoundOnSecond { edge: usize },
    /// A single contact of a round shape against a round shape or plane.
    Round,
}

/// Contact between a first and a second shape. The normal points from the
/// second shape toward the first; negative separation is penetration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawContact {
    pub point: Vec2,
    pub normal: Vec2,
    pub separation: f64,
    pub feature: Feature,
}

impl RawContact {
    fn flipped(self) -> Self {
        let feature = match self.feature {
            Feature::Edges { first, second, point } => Feature::Edges {
                first: second,
                second: first,
                point,
            },
            Feature::VertexOfFirst { vertex } => Feature::VertexOfSecond { vertex },
            Feature::VertexOfSecond { vertex } => Feature::VertexOfFirst { vertex },
            Feature::RoundOnFirst { edge } => Feature::RoundOnSecond { edge },
            Feature::RoundOnSecond { edge } => Feature::RoundOnFirst { edge },
            Feature::Round => Feature::Round,
        };
        RawContact {
            normal: -self.normal,
            feature,
            ..self
        }
    }
}

/// Appends all contacts between `a` and `b` closer than `margin`.
pub fn collide(a: &WorldShape, b: &WorldShape, margin: f64, out: &mut Vec<RawContact>) {
    use WorldShape::*;
    match (a, b) {
        (Polygon(pa), Polygon(pb)) => polygon_polygon(pa, pb, margin, out),
        (Polygon(p), Circle { center, radius }) => {
            out.extend(polygon_circle(p, *center, *radius, margin).map(RawContact::flipped))
        }
        (Circle { center, radius }, Polygon(p)) => {
            out.extend(polygon_circle(p, *center, *radius, margin))
        }
        (Circle { center: ca, radius: ra }, Circle { center: cb, radius: rb }) => {
            let d = *ca - *cb;
            let dist = d.length();
            let sep = dist - ra - rb;
            if sep <= margin {
                let normal = if dist > 1e-12 { d * (1.0 / dist) } else { Vec2::UP };
                out.push(RawContact {
                    point: *cb + normal * (rb + sep / 2.0),
                    normal,
                    separation: sep,
                    feature: Feature::Round,
                });
            }
        }
        (shape, HalfPlane { point, normal }) => half_plane(shape, *point, *normal, margin, out),
        (HalfPlane { point, normal }, shape) => {
            let start = out.len();
            half_plane(shape, *point, *normal, margin, out);
            for c in &mut out[start..] {
                *c = c.flipped();
            }
        }
    }
}

/// Deepest edge of `a` against `b`: the largest separation of `b` along
/// any outward normal of `a`.
fn max_separation(a: &Polygon, b: &Polygon) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, (v, n)) in a.vertices.iter().zip(&a.normals).enumerate() {
        let sep = b
            .vertices
            .iter()
            .map(|w| n.dot(*w - *v))
            .fold(f64::INFINITY, f64::min);
        if sep > best.0 {
            best = (sep, i);
        }
    }
    best
}

fn polygon_polygon(a: &Polygon, b: &Polygon, margin: f64, out: &mut Vec<RawContact>) {
    let (sep_a, edge_a) = max_separation(a, b);
    if sep_a > margin {
        return;
    }
    let (sep_b, edge_b) = max_separation(b, a);
    if sep_b > margin {
        return;
    }
    // Prefer the first polygon's edge unless the second's is clearly better,
    // so the choice does not flicker between nearly equal faces.
    let first_is_reference = sep_a + 1e-6 >= sep_b;
    let (reference, incident, ref_edge) = if first_is_reference {
        (a, b, edge_a)
    } else {
        (b, a, edge_b)
    };
    let normal = reference.normals[ref_edge];
    let inc_edge = (0..incident.normals.len())
        .min_by(|&i, &j| {
            normal
                .dot(incident.normals[i])
                .total_cmp(&normal.dot(incident.normals[j]))
        })
        .unwrap();
    let n_ref = reference.vertices.len();
    let r1 = reference.vertices[ref_edge];
    let r2 = reference.vertices[(ref_edge + 1) % n_ref];
    let tangent = (r2 - r1).normalized();
    let n_inc = incident.vertices.len();
    let mut seg = [
        incident.vertices[inc_edge],
        incident.vertices[(inc_edge + 1) % n_inc],
    ];
    // Clip the incident edge to the slab spanned by the reference edge.
    for (origin, dir) in [(r1, tangent), (r2, -tangent)] {
        let d0 = dir.dot(seg[0] - origin);
        let d1 = dir.dot(seg[1] - origin);
        if d0 < 0.0 && d1 < 0.0 {
            return;
        }
        if d0 < 0.0 {
            seg[0] = seg[0] + (seg[1] - seg[0]) * (d0 / (d0 - d1));
        } else if d1 < 0.0 {
            seg[1] = seg[1] + (seg[0] - seg[1]) * (d1 / (d1 - d0));
        }
    }
    for (k, p) in seg.iter().enumerate() {
        let sep = normal.dot(*p - r1);
        if sep > margin {
            continue;
        }
        let (first, second, n) = if first_is_reference {
            (ref_edge, inc_edge, -normal)
        } else {
            (inc_edge, ref_edge, normal)
        };
        out.push(RawContact {
            point: *p - normal * (sep / 2.0),
            normal: n,
            separation: sep,
            feature: Feature::Edges {
                first,
                second,
                point: k as u8,
            },
        });
    }
}

/// Contact of a circle (first) against a polygon (second).
fn polygon_circle(p: &Polygon, center: Vec2, radius: f64, margin: f64) -> Option<RawContact> {
    let (plane, edge) = p.plane_distance(center);
    let (normal, dist, edge) = if plane <= 0.0 {
        (p.normals[edge], plane, edge)
    } else {
        let (q, d, e) = p.closest_boundary_point(center);
        if d - radius > margin {
            return None;
        }
        ((center - q).normalized(), d, e)
    };
    let sep = dist - radius;
    (sep <= margin).then(|| RawContact {
        point: center - normal * (radius + sep / 2.0),
        normal,
        separation: sep,
        feature: Feature::RoundOnSecond { edge },
    })
}

fn half_plane(shape: &WorldShape, point: Vec2, normal: Vec2, margin: f64, out: &mut Vec<RawContact>) {
    match shape {
        WorldShape::Polygon(p) => {
            for (i, v) in p.vertices.iter().enumerate() {
                let d = normal.dot(*v - point);
                if d <= margin {
                    out.push(RawContact {
                        point: *v - normal * (d / 2.0),
                        normal,
                        separation: d,
                        feature: Feature::VertexOfFirst { vertex: i },
                    });
                }
            }
        }
        WorldShape::Circle { center, radius } => {
            let d = normal.dot(*center - point) - radius;
            if d <= margin {
                out.push(RawContact {
                    point: *center - normal * (radius + d / 2.0),
                    normal,
                    separation: d,
                    feature: Feature::Round,
                });
            }
        }
        WorldShape::HalfPlane { .. } => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(cx: f64, cy: f64, half: f64) -> WorldShape {
        Shape::rectangle(2.0 * half, 2.0 * half).placed(Vec2::new(cx, cy), 0.0)
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let p = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ]);
        assert!(signed_area(&p.vertices) > 0.0);
        assert_eq!(p.plane_distance(Vec2::new(0.5, 0.5)).0, -0.5);
    }

    #[test]
    fn box_on_ground_gives_two_contacts() {
        let ground = WorldShape::HalfPlane {
            point: Vec2::ZERO,
            normal: Vec2::UP,
        };
        let mut out = Vec::new();
        collide(&square(0.0, 0.099, 0.1), &ground, 0.001, &mut out);
        assert_eq!(out.len(), 2);
        for c in &out {
            assert_eq!(c.normal, Vec2::UP);
            assert!((c.separation + 0.001).abs() < 1e-12);
        }
    }

    #[test]
    fn stacked_boxes_normals_point_to_first() {
        let mut out = Vec::new();
        collide(&square(0.0, 0.19, 0.1), &square(0.0, 0.0, 0.1), 0.0, &mut out);
        assert_eq!(out.len(), 2);
        for c in &out {
            assert!((c.normal.y - 1.0).abs() < 1e-12);
            assert!((c.separation + 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_against_polygon_corner() {
        let circle = WorldShape::Circle {
            center: Vec2::new(0.2, 0.2),
            radius: 0.14,
        };
        let mut out = Vec::new();
        collide(&circle, &square(0.0, 0.0, 0.1), 0.0, &mut out);
        assert!(out.is_empty());
        collide(&circle, &square(0.0, 0.0, 0.1), 0.01, &mut out);
        assert_eq!(out.len(), 1);
        let c = out[0];
        let expected = 0.1 * 2f64.sqrt() - 0.14;
        assert!((c.separation - expected).abs() < 1e-12);
        assert!((c.normal.x - c.normal.y).abs() < 1e-12 && c.normal.x > 0.0);

        // Swapped order flips the normal.
        out.clear();
        collide(&square(0.0, 0.0, 0.1), &circle, 0.01, &mut out);
        assert!(out[0].normal.x < 0.0);
    }

    #[test]
    fn separated_shapes_have_no_contacts() {
        let mut out = Vec::new();
        collide(&square(0.0, 0.0, 0.1), &square(0.5, 0.0, 0.1), 0.01, &mut out);
        assert!(out.is_empty());
    }
}
