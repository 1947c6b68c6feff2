//! Narrow-phase collision between circles, oriented boxes and the ground.
//!
//! Every routine returns at most two contact points with a shared normal
//! pointing from shape A towards shape B, plus witness points on each
//! surface. Points are reported while separation is below `margin` so the
//! solver can treat them speculatively.

use super::model::Shape;
use crate::math::{Pose2, Rot, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct ManifoldPoint {
    /// Witness point on A, world frame.
    pub pa: Vec2,
    /// Witness point on B, world frame.
    pub pb: Vec2,
    pub separation: f64,
    pub id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Manifold {
    pub normal: Vec2,
    pub points: [ManifoldPoint; 2],
    pub count: usize,
}

impl Manifold {
    fn push(&mut self, p: ManifoldPoint) {
        if self.count < 2 {
            self.points[self.count] = p;
            self.count += 1;
        }
    }

    fn flipped(mut self) -> Manifold {
        self.normal = -self.normal;
        for p in &mut self.points[..self.count] {
            std::mem::swap(&mut p.pa, &mut p.pb);
        }
        self
    }
}

/// Ground plane (A) against a shape (B).
pub(crate) fn collide_ground(shape: &Shape, pose: Pose2, margin: f64) -> Option<Manifold> {
    let normal = Vec2::new(0.0, 1.0);
    let mut m = Manifold {
        normal,
        ..Default::default()
    };
    match *shape {
        Shape::Circle { radius } => {
            let sep = pose.pos.z - radius;
            if sep > margin {
                return None;
            }
            let pb = pose.pos - normal * radius;
            m.push(ManifoldPoint {
                pa: Vec2::new(pose.pos.x, 0.0),
                pb,
                separation: sep,
                id: 0,
            });
        }
        Shape::Box { half_extents } => {
            let mut corners: [(f64, Vec2, u32); 4] = [(0.0, Vec2::ZERO, 0); 4];
            for (i, v) in box_vertices(half_extents).iter().enumerate() {
                let w = pose.transform_point(*v);
                corners[i] = (w.z, w, i as u32);
            }
            // Two deepest corners, ties broken by corner index for determinism.
            corners.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
            for &(sep, w, id) in corners.iter().take(2) {
                if sep <= margin {
                    m.push(ManifoldPoint {
                        pa: Vec2::new(w.x, 0.0),
                        pb: w,
                        separation: sep,
                        id,
                    });
                }
            }
        }
    }
    (m.count > 0).then_some(m)
}

pub(crate) fn collide_shapes(
    sa: &Shape,
    pa: Pose2,
    sb: &Shape,
    pb: Pose2,
    margin: f64,
) -> Option<Manifold> {
    let reach = sa.bounding_radius() + sb.bounding_radius() + margin;
    if (pb.pos - pa.pos).length_squared() > reach * reach {
        return None;
    }
    match (sa, sb) {
        (Shape::Circle { radius: ra }, Shape::Circle { radius: rb }) => {
            circle_circle(pa.pos, *ra, pb.pos, *rb, margin)
        }
        (Shape::Box { half_extents }, Shape::Circle { radius }) => {
            box_circle(pa, *half_extents, pb.pos, *radius, margin)
        }
        (Shape::Circle { radius }, Shape::Box { half_extents }) => {
            box_circle(pb, *half_extents, pa.pos, *radius, margin).map(Manifold::flipped)
        }
        (Shape::Box { half_extents: ha }, Shape::Box { half_extents: hb }) => {
            box_box(pa, *ha, pb, *hb, margin)
        }
    }
}

fn circle_circle(ca: Vec2, ra: f64, cb: Vec2, rb: f64, margin: f64) -> Option<Manifold> {
    let d = cb - ca;
    let dist = d.length();
    let sep = dist - ra - rb;
    if sep > margin {
        return None;
    }
    let normal = d.normalized().unwrap_or(Vec2::new(0.0, 1.0));
    let mut m = Manifold {
        normal,
        ..Default::default()
    };
    m.push(ManifoldPoint {
        pa: ca + normal * ra,
        pb: cb - normal * rb,
        separation: sep,
        id: 0,
    });
    Some(m)
}

fn box_circle(pose: Pose2, h: Vec2, center: Vec2, radius: f64, margin: f64) -> Option<Manifold> {
    let rot = Rot::new(pose.angle);
    let c = rot.apply_inverse(center - pose.pos);
    let clamped = Vec2::new(c.x.clamp(-h.x, h.x), c.z.clamp(-h.z, h.z));
    let (local_normal, local_point, sep) = if clamped != c {
        let d = c - clamped;
        let dist = d.length();
        let sep = dist - radius;
        if sep > margin {
            return None;
        }
        (d / dist, clamped, sep)
    } else {
        // Centre inside the box: push out through the nearest face.
        let dx = h.x - c.x.abs();
        let dz = h.z - c.z.abs();
        if dx < dz {
            let s = if c.x >= 0.0 { 1.0 } else { -1.0 };
            (Vec2::new(s, 0.0), Vec2::new(s * h.x, c.z), -dx - radius)
        } else {
            let s = if c.z >= 0.0 { 1.0 } else { -1.0 };
            (Vec2::new(0.0, s), Vec2::new(c.x, s * h.z), -dz - radius)
        }
    };
    let normal = rot.apply(local_normal);
    let mut m = Manifold {
        normal,
        ..Default::default()
    };
    m.push(ManifoldPoint {
        pa: pose.transform_point(local_point),
        pb: center - normal * radius,
        separation: sep,
        id: 0,
    });
    Some(m)
}

/// Counter-clockwise box corners; edge `i` runs from corner `i` to `i+1`.
fn box_vertices(h: Vec2) -> [Vec2; 4] {
    [
        Vec2::new(-h.x, -h.z),
        Vec2::new(h.x, -h.z),
        Vec2::new(h.x, h.z),
        Vec2::new(-h.x, h.z),
    ]
}

const BOX_NORMALS: [Vec2; 4] = [
    Vec2::new(0.0, -1.0),
    Vec2::new(1.0, 0.0),
    Vec2::new(0.0, 1.0),
    Vec2::new(-1.0, 0.0),
];

struct WorldBox {
    verts: [Vec2; 4],
    normals: [Vec2; 4],
}

impl WorldBox {
    fn new(pose: Pose2, h: Vec2) -> Self {
        let rot = Rot::new(pose.angle);
        let local = box_vertices(h);
        Self {
            verts: local.map(|v| pose.pos + rot.apply(v)),
            normals: BOX_NORMALS.map(|n| rot.apply(n)),
        }
    }
}

/// Largest separation of `b` along the face normals of `a`, and that face.
fn max_separation(a: &WorldBox, b: &WorldBox) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for i in 0..4 {
        let n = a.normals[i];
        let v = a.verts[i];
        let s = b
            .verts
            .iter()
            .map(|w| n.dot(*w - v))
            .fold(f64::INFINITY, f64::min);
        if s > best.0 {
            best = (s, i);
        }
    }
    best
}

fn box_box(pa: Pose2, ha: Vec2, pb: Pose2, hb: Vec2, margin: f64) -> Option<Manifold> {
    let a = WorldBox::new(pa, ha);
    let b = WorldBox::new(pb, hb);
    let (sep_a, edge_a) = max_separation(&a, &b);
    if sep_a > margin {
        return None;
    }
    let (sep_b, edge_b) = max_separation(&b, &a);
    if sep_b > margin {
        return None;
    }
    // Prefer A as reference unless B is clearly better, to avoid flip-flopping.
    let flip = sep_b > sep_a + 1e-4;
    let (reference, incident, edge) = if flip { (&b, &a, edge_b) } else { (&a, &b, edge_a) };

    let ref_normal = reference.normals[edge];
    let v1 = reference.verts[edge];
    let v2 = reference.verts[(edge + 1) % 4];

    let inc_edge = (0..4)
        .min_by(|&i, &j| {
            incident.normals[i]
                .dot(ref_normal)
                .total_cmp(&incident.normals[j].dot(ref_normal))
        })
        .expect("four edges");
    let mut seg = [incident.verts[inc_edge], incident.verts[(inc_edge + 1) % 4]];

    let tangent = (v2 - v1).normalized()?;
    seg = clip_segment(seg, -tangent, -tangent.dot(v1))?;
    seg = clip_segment(seg, tangent, tangent.dot(v2))?;

    let mut m = Manifold {
        normal: if flip { -ref_normal } else { ref_normal },
        ..Default::default()
    };
    for (k, p) in seg.iter().enumerate() {
        let sep = ref_normal.dot(*p - v1);
        if sep <= margin {
            let on_ref = *p - ref_normal * sep;
            let id = ((edge as u32) << 8) | ((inc_edge as u32) << 4) | (k as u32) | ((flip as u32) << 12);
            let (wa, wb) = if flip { (*p, on_ref) } else { (on_ref, *p) };
            m.push(ManifoldPoint {
                pa: wa,
                pb: wb,
                separation: sep,
                id,
            });
        }
    }
    (m.count > 0).then_some(m)
}

/// Keeps the part of a segment with `dot(n, p) <= offset`.
fn clip_segment(seg: [Vec2; 2], n: Vec2, offset: f64) -> Option<[Vec2; 2]> {
    let d0 = n.dot(seg[0]) - offset;
    let d1 = n.dot(seg[1]) - offset;
    match (d0 <= 0.0, d1 <= 0.0) {
        (true, true) => Some(seg),
        (false, false) => None,
        (in0, _) => {
            let t = d0 / (d0 - d1);
            let x = seg[0] + (seg[1] - seg[0]) * t;
            Some(if in0 { [seg[0], x] } else { [x, seg[1]] })
        }
    }
}
