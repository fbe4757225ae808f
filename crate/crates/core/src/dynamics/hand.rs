//! Two-finger hand in reduced coordinates on a vertically sliding palm.
//!
//! The plain finger sits at `+mp_spacing / 2`, the crawler finger at
//! `-mp_spacing / 2`. With the finger extended the proximal link points
//! outward and is raised by `attach_angle - pi/2`; the distal link hangs
//! vertically whenever the IP joint sits on its parallel stop.

use super::geometry::{signed_area, Polygon};
use super::math::{spin, Vec2};
use crate::transmission::{dof, DesignParams, Finger, HandState, TransmissionConfig, HAND_DOF};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Physical shape and mass properties of the links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkGeometry {
    /// Link thickness in the finger plane (m).
    #[serde(rename = "thickness_m")]
    pub thickness: f64,
    /// Radius of the rounded fingertip corners (m).
    #[serde(rename = "tip_radius_m")]
    pub tip_radius: f64,
    /// Link extent along the depth axis, used for mass (m).
    #[serde(rename = "width_m")]
    pub width: f64,
    /// Link material density (kg/m³).
    #[serde(rename = "density_kg_per_m3")]
    pub density: f64,
    /// Height of the palm block above the base joints (m).
    #[serde(rename = "palm_height_m")]
    pub palm_height: f64,
    /// Segments per rounded fingertip corner.
    pub arc_segments: usize,
}

impl Default for LinkGeometry {
    fn default() -> Self {
        Self {
            thickness: 0.016,
            tip_radius: 0.004,
            width: 0.02,
            density: 1000.0,
            palm_height: 0.03,
            arc_segments: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Proximal,
    Distal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkId {
    pub finger: Finger,
    pub segment: Segment,
}

impl LinkId {
    pub const ALL: [LinkId; 4] = [
        LinkId { finger: Finger::Plain, segment: Segment::Proximal },
        LinkId { finger: Finger::Plain, segment: Segment::Distal },
        LinkId { finger: Finger::Crawler, segment: Segment::Proximal },
        LinkId { finger: Finger::Crawler, segment: Segment::Distal },
    ];

    pub fn carries_belt(self) -> bool {
        self.finger == Finger::Crawler && self.segment == Segment::Distal
    }
}

/// World placement of a link: joint position, unit axis toward the link
/// end, and the unit direction the link end moves in under flexion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFrame {
    pub origin: Vec2,
    pub axis: Vec2,
    pub inner: Vec2,
    pub length: f64,
}

impl LinkFrame {
    pub fn point(&self, along: f64, across: f64) -> Vec2 {
        self.origin + self.axis * along + self.inner * across
    }
}

/// Link outline in world coordinates with the belt direction of each edge.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutline {
    pub polygon: Polygon,
    /// Direction of belt surface motion per edge for a positive crawler
    /// rate, or `None` off the belt.
    pub edge_belt: Vec<Option<Vec2>>,
}

impl LinkOutline {
    /// Belt direction at a vertex; only vertices between two belt edges
    /// are on the belt.
    pub fn vertex_belt(&self, vertex: usize) -> Option<Vec2> {
        let n = self.edge_belt.len();
        let before = self.edge_belt[(vertex + n - 1) % n]?;
        let after = self.edge_belt[vertex]?;
        Some((before + after).normalized())
    }
}

fn finger_side(finger: Finger) -> f64 {
    match finger {
        Finger::Plain => 1.0,
        Finger::Crawler => -1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hand {
    pub params: DesignParams,
    pub transmission: TransmissionConfig,
    pub geometry: LinkGeometry,
    pub state: HandState,
    /// Height of the base joints (m).
    pub palm_y: f64,
    /// Vertical palm velocity (m/s).
    pub palm_velocity: f64,
}

/// Mass properties of one link about its centre of mass, which lies on the
/// link axis at half length.
#[derive(Debug, Clone, Copy)]
struct LinkMass {
    mass: f64,
    inertia: f64,
}

impl Hand {
    pub fn new(
        params: DesignParams,
        transmission: TransmissionConfig,
        geometry: LinkGeometry,
        palm_y: f64,
    ) -> Self {
        Self {
            state: HandState::extended(&transmission),
            params,
            transmission,
            geometry,
            palm_y,
            palm_velocity: 0.0,
        }
    }

    fn link_length(&self, segment: Segment) -> f64 {
        match segment {
            Segment::Proximal => self.params.pp_length,
            Segment::Distal => self.params.dp_length,
        }
    }

    fn link_mass(&self, segment: Segment) -> LinkMass {
        let g = &self.geometry;
        let l = self.link_length(segment);
        let mass = g.density * l * g.thickness * g.width;
        LinkMass {
            mass,
            inertia: mass * (l * l + g.thickness * g.thickness) / 12.0,
        }
    }

    pub fn mp_position(&self, finger: Finger) -> Vec2 {
        Vec2::new(finger_side(finger) * self.params.mp_spacing / 2.0, self.palm_y)
    }

    pub fn frame(&self, link: LinkId) -> LinkFrame {
        let side = finger_side(link.finger);
        let q = &self.state.position;
        let mp = q[link.finger.mp_index()];
        let ip = q[link.finger.ip_index()];
        let proximal_angle = self.transmission.attach_angle - FRAC_PI_2 - mp;
        let direction = |a: f64| {
            (
                Vec2::new(side * a.cos(), a.sin()),
                Vec2::new(side * a.sin(), -a.cos()),
            )
        };
        let (axis, inner) = direction(proximal_angle);
        let mp_pos = self.mp_position(link.finger);
        match link.segment {
            Segment::Proximal => LinkFrame {
                origin: mp_pos,
                axis,
                inner,
                length: self.params.pp_length,
            },
            Segment::Distal => {
                let (d_axis, d_inner) = direction(proximal_angle - ip);
                LinkFrame {
                    origin: mp_pos + axis * self.params.pp_length,
                    axis: d_axis,
                    inner: d_inner,
                    length: self.params.dp_length,
                }
            }
        }
    }

    /// Outline of a link. The distal links have rounded tips; the belt
    /// of the crawler finger runs around the tip and up the inner face.
    pub fn outline(&self, link: LinkId) -> LinkOutline {
        let f = self.frame(link);
        let h = self.geometry.thickness / 2.0;
        let l = f.length;
        // (along, across) vertices listed along the belt path: down the
        // outer face, around the tip, up the inner face, across the top.
        let mut local: Vec<(f64, f64)> = Vec::new();
        let mut belt_edges: Vec<bool> = Vec::new();
        match link.segment {
            Segment::Proximal => {
                local.extend([(0.0, -h), (l, -h), (l, h), (0.0, h)]);
                belt_edges.extend([false; 4]);
            }
            Segment::Distal => {
                let r = self.geometry.tip_radius.min(h).min(l / 2.0);
                let n = self.geometry.arc_segments.max(1);
                local.push((0.0, -h));
                belt_edges.push(false);
                let outer_centre = (l - r, -h + r);
                for k in 0..=n {
                    let a = FRAC_PI_2 * k as f64 / n as f64;
                    local.push((outer_centre.0 + r * a.sin(), outer_centre.1 - r * a.cos()));
                    belt_edges.push(true);
                }
                let inner_centre = (l - r, h - r);
                for k in 0..=n {
                    let a = FRAC_PI_2 * k as f64 / n as f64;
                    local.push((inner_centre.0 + r * a.cos(), inner_centre.1 + r * a.sin()));
                    belt_edges.push(true);
                }
                local.push((0.0, h));
                belt_edges.push(false);
            }
        }
        let has_belt = link.carries_belt();
        let mut vertices: Vec<Vec2> = local.iter().map(|&(a, b)| f.point(a, b)).collect();
        let n = vertices.len();
        let mut edge_belt: Vec<Option<Vec2>> = (0..n)
            .map(|i| {
                (has_belt && belt_edges[i])
                    .then(|| (vertices[(i + 1) % n] - vertices[i]).normalized())
            })
            .collect();
        if signed_area(&vertices) < 0.0 {
            // Mirrored finger: reverse the vertex order; the edge from new
            // vertex j to j + 1 is the old edge n - 2 - j.
            vertices.reverse();
            edge_belt = (0..n).map(|j| edge_belt[(2 * n - 2 - j) % n]).collect();
        }
        LinkOutline {
            polygon: Polygon::new(vertices),
            edge_belt,
        }
    }

    pub fn palm_outline(&self) -> Polygon {
        let w = self.params.mp_spacing / 2.0;
        let y0 = self.palm_y;
        let y1 = y0 + self.geometry.palm_height;
        Polygon::new(vec![
            Vec2::new(-w, y0),
            Vec2::new(w, y0),
            Vec2::new(w, y1),
            Vec2::new(-w, y1),
        ])
    }

    /// Lowest point of either fingertip.
    pub fn fingertip_height(&self) -> f64 {
        self.lowest_tip_point().1.y
    }

    /// Distal link and outline vertex with the lowest height.
    pub fn lowest_tip_point(&self) -> (LinkId, Vec2) {
        let mut best = (LinkId::ALL[1], Vec2::new(0.0, f64::INFINITY));
        for finger in Finger::BOTH {
            let link = LinkId { finger, segment: Segment::Distal };
            for v in self.outline(link).polygon.vertices {
                if v.y < best.1.y {
                    best = (link, v);
                }
            }
        }
        best
    }

    /// Velocity of a material point `p` of `link` per unit rate of each
    /// hand coordinate. The crawler column is left zero; belt motion is
    /// handled at the contact.
    pub fn point_jacobian(&self, link: LinkId, p: Vec2) -> [Vec2; HAND_DOF] {
        let side = finger_side(link.finger);
        let mut j = [Vec2::ZERO; HAND_DOF];
        j[link.finger.mp_index()] = spin(-side, p - self.mp_position(link.finger));
        if link.segment == Segment::Distal {
            let ip_pos = self.frame(link).origin;
            j[link.finger.ip_index()] = spin(-side, p - ip_pos);
        }
        j
    }

    /// Velocity of a material point of `link` for the current rates.
    pub fn point_velocity(&self, link: LinkId, p: Vec2) -> Vec2 {
        let j = self.point_jacobian(link, p);
        let mut v = Vec2::UP * self.palm_velocity;
        for (col, rate) in j.iter().zip(&self.state.velocity) {
            v += *col * *rate;
        }
        v
    }

    /// Joint-space mass matrix including the crawler belt inertia.
    pub fn mass_matrix(&self) -> [[f64; HAND_DOF]; HAND_DOF] {
        let mut m = [[0.0; HAND_DOF]; HAND_DOF];
        let pp = self.link_mass(Segment::Proximal);
        let dp = self.link_mass(Segment::Distal);
        let lp = self.params.pp_length;
        let rp = lp / 2.0;
        let rd = self.params.dp_length / 2.0;
        for finger in Finger::BOTH {
            let (a, b) = (finger.mp_index(), finger.ip_index());
            let c = self.state.position[b].cos();
            m[a][a] = pp.inertia + pp.mass * rp * rp + dp.inertia
                + dp.mass * (lp * lp + rd * rd + 2.0 * lp * rd * c);
            m[a][b] = dp.inertia + dp.mass * (rd * rd + lp * rd * c);
            m[b][a] = m[a][b];
            m[b][b] = dp.inertia + dp.mass * rd * rd;
        }
        m[dof::CRAWLER][dof::CRAWLER] = self.transmission.crawler_mass;
        m
    }

    /// Generalized gravity plus velocity-product forces for a vertical
    /// field `gravity` (m/s², negative downward, including the palm's
    /// acceleration as a fictitious force).
    pub fn passive_forces(&self, gravity: f64) -> [f64; HAND_DOF] {
        let mut f = [0.0; HAND_DOF];
        let dp = self.link_mass(Segment::Distal);
        let lp = self.params.pp_length;
        let rd = self.params.dp_length / 2.0;
        for finger in Finger::BOTH {
            for segment in [Segment::Proximal, Segment::Distal] {
                let link = LinkId { finger, segment };
                let frame = self.frame(link);
                let com = frame.point(frame.length / 2.0, 0.0);
                let weight = Vec2::UP * (self.link_mass(segment).mass * gravity);
                let j = self.point_jacobian(link, com);
                for (fi, col) in f.iter_mut().zip(&j) {
                    *fi += col.dot(weight);
                }
            }
            // M depends on the IP angle only, through its cosine.
            let (a, b) = (finger.mp_index(), finger.ip_index());
            let s = -dp.mass * lp * rd * self.state.position[b].sin();
            let (qa, qb) = (self.state.velocity[a], self.state.velocity[b]);
            f[a] -= s * (2.0 * qa * qb + qb * qb);
            f[b] += s * qa * qa;
        }
        f
    }

    /// Kinetic energy of the links and belt, in the palm frame.
    pub fn kinetic_energy(&self) -> f64 {
        let m = self.mass_matrix();
        let v = &self.state.velocity;
        (0..HAND_DOF)
            .map(|i| (0..HAND_DOF).map(|j| v[i] * m[i][j] * v[j]).sum::<f64>())
            .sum::<f64>()
            / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn hand() -> Hand {
        Hand::new(
            DesignParams::table_optimum(),
            TransmissionConfig::default(),
            LinkGeometry::default(),
            0.05,
        )
    }

    #[test]
    fn extended_distal_links_hang_vertically() {
        let h = hand();
        for finger in Finger::BOTH {
            let f = h.frame(LinkId { finger, segment: Segment::Distal });
            assert!((f.axis.y + 1.0).abs() < 1e-12);
            // flexion moves the tip toward the other finger
            assert!(f.inner.x * finger_side(finger) < 0.0);
        }
        let p = h.frame(LinkId::ALL[0]);
        assert!((p.axis.y - 0.5).abs() < 1e-12, "proximal link raised 30 degrees");
    }

    #[test]
    fn fingertip_height_matches_geometry() {
        let h = hand();
        let expected = 0.05 + 0.092 * 0.5 - 0.074;
        assert!((h.fingertip_height() - expected).abs() < 1e-12);
    }

    #[test]
    fn belt_runs_up_the_inner_face() {
        let mut h = hand();
        h.state.position[dof::MP2] = 1.0;
        h.state.position[dof::IP2] = 2.0 * PI / 3.0 - 1.0;
        let outline = h.outline(LinkId::ALL[3]);
        let frame = h.frame(LinkId::ALL[3]);
        let belted: Vec<_> = outline.edge_belt.iter().flatten().collect();
        assert_eq!(belted.len(), 2 * 3 + 2);
        // Inner face edge: normal along `inner`, belt pointing back to the IP joint.
        let n = outline.polygon.normals.len();
        let inner_face = (0..n)
            .find(|&i| outline.polygon.normals[i].dot(frame.inner) > 0.999)
            .unwrap();
        let dir = outline.edge_belt[inner_face].unwrap();
        assert!(dir.dot(frame.axis) < -0.999);
        // The plain finger carries no belt.
        assert!(h.outline(LinkId::ALL[1]).edge_belt.iter().all(Option::is_none));
    }

    #[test]
    fn outlines_are_counter_clockwise_with_tangent_belt() {
        let h = hand();
        for link in LinkId::ALL {
            assert!(signed_area(&h.outline(link).polygon.vertices) > 0.0);
        }
        let outline = h.outline(LinkId::ALL[3]);
        let n = outline.polygon.vertices.len();
        for i in 0..n {
            if let Some(d) = outline.edge_belt[i] {
                let e = (outline.polygon.vertices[(i + 1) % n] - outline.polygon.vertices[i])
                    .normalized();
                assert!((d.dot(e).abs() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mass_matrix_matches_link_kinetic_energy() {
        let mut h = hand();
        h.state.position = [0.7, 1.1, 0.3, 2.0, 0.0];
        h.state.velocity = [1.3, -0.4, 2.2, 0.9, 0.0];
        // Direct sum over links using finite-difference point velocities.
        let mut energy = 0.0;
        let eps = 1e-7;
        for link in LinkId::ALL {
            let lm = h.link_mass(link.segment);
            let f0 = h.frame(link);
            let mut moved = h.clone();
            for i in 0..HAND_DOF {
                moved.state.position[i] += eps * h.state.velocity[i];
            }
            let f1 = moved.frame(link);
            let c0 = f0.point(f0.length / 2.0, 0.0);
            let c1 = f1.point(f1.length / 2.0, 0.0);
            let v = (c1 - c0) * (1.0 / eps);
            let omega = f0.axis.cross(f1.axis) / eps;
            energy += 0.5 * lm.mass * v.dot(v) + 0.5 * lm.inertia * omega * omega;
        }
        let ke = h.kinetic_energy();
        assert!((ke - energy).abs() < 1e-6 * energy, "{ke} vs {energy}");
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let mut h = hand();
        h.state.position = [0.4, 1.5, 0.9, 1.3, 0.0];
        let link = LinkId::ALL[3];
        let p = h.frame(link).point(0.05, 0.008);
        let j = h.point_jacobian(link, p);
        for k in 0..4 {
            let mut moved = h.clone();
            moved.state.position[k] += 1e-7;
            let p1 = moved.frame(link).point(0.05, 0.008);
            let fd = (p1 - p) * 1e7;
            assert!((fd - j[k]).length() < 1e-5, "dof {k}: {fd:?} vs {:?}", j[k]);
        }
    }
}
