//! Time stepping with a sequential-impulse solver.
//!
//! One step: gravity, collision detection on the step-start poses, warm
//! start, velocity iterations (joint motors, joint limits, joint anchors,
//! contacts), semi-implicit position update, non-linear position
//! correction, and finally a projection that puts every joint back inside
//! its limits.
//!
//! PD actuation is solved implicitly as a soft angular constraint, which
//! keeps stiff gains stable at the physics rate while producing the same
//! torque law `kp (θ_target − θ) − kd θ̇` evaluated at the end of the step.

use super::collide::{collide_ground, collide_shapes, Manifold};
use super::contact::{ContactPoint, ContactReport};
use super::state::{CachedContact, JointImpulse, SimState, WarmStart};
use super::world::{BodyId, WorldModel, GROUND};
use super::SimError;
use crate::math::{angle_diff, Pose2, Vec2};

#[derive(Debug, Clone, Copy)]
struct Body {
    pos: Vec2,
    angle: f64,
    vel: Vec2,
    w: f64,
    im: f64,
    ii: f64,
}

impl Body {
    fn pose(&self) -> Pose2 {
        Pose2::new(self.pos, self.angle)
    }

    fn point_vel(&self, r: Vec2) -> Vec2 {
        self.vel + Vec2::cross_scalar(self.w, r)
    }

    fn apply_impulse(&mut self, p: Vec2, r: Vec2) {
        self.vel += p * self.im;
        self.w += self.ii * r.cross(p);
    }
}

#[derive(Debug, Clone, Copy)]
struct Motor {
    gamma: f64,
    bias: f64,
    mass: f64,
    max_impulse: f64,
}

#[derive(Debug, Clone, Copy)]
struct JointRow {
    p: usize,
    c: usize,
    local_p: Vec2,
    local_c: Vec2,
    rp: Vec2,
    rc: Vec2,
    q: f64,
    limits: [f64; 2],
    axial_mass: f64,
    motor: Option<Motor>,
    imp: JointImpulse,
}

#[derive(Debug, Clone, Copy)]
struct ContactRow {
    a: BodyId,
    b: BodyId,
    ia: usize,
    ib: usize,
    feature: u32,
    normal: Vec2,
    point: Vec2,
    ra: Vec2,
    rb: Vec2,
    normal_mass: f64,
    tangent_mass: f64,
    friction: f64,
    min_vn: f64,
    separation: f64,
    local_a: Vec2,
    local_b: Vec2,
    local_normal: Vec2,
    ln: f64,
    lt: f64,
}

/// Advances `state` by `dt` with joints driven toward `joint_targets`.
/// Returns the new state and the contacts solved during the step.
pub fn step(
    world: &WorldModel,
    state: &SimState,
    joint_targets: &[f64],
    dt: f64,
) -> Result<(SimState, ContactReport), SimError> {
    let mut next = state.clone();
    let report = step_in_place(world, &mut next, joint_targets, dt)?;
    Ok((next, report))
}

/// As [`step`], mutating the state. Input validation errors leave the
/// state untouched.
pub fn step_in_place(
    world: &WorldModel,
    state: &mut SimState,
    joint_targets: &[f64],
    dt: f64,
) -> Result<ContactReport, SimError> {
    let nj = world.joint_count();
    if joint_targets.len() != nj {
        return Err(SimError::Dimension {
            what: "joint_targets",
            expected: nj,
            actual: joint_targets.len(),
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::Invalid {
            field: "dt".into(),
            reason: "must be finite and > 0".into(),
        });
    }
    if joint_targets.iter().any(|t| !t.is_finite()) {
        return Err(SimError::NonFinite("joint_targets"));
    }
    if state.bodies.len() != world.body_count() {
        return Err(SimError::Dimension {
            what: "state bodies",
            expected: world.body_count(),
            actual: state.bodies.len(),
        });
    }
    if !state.is_finite() {
        return Err(SimError::NonFinite("state"));
    }

    let settings = &world.settings;
    let n = world.body_count();
    let fixed = n;
    let index = |id: BodyId| if id == GROUND { fixed } else { id };

    let mut bodies: Vec<Body> = state
        .bodies
        .iter()
        .zip(world.bodies())
        .map(|(s, def)| Body {
            pos: s.pose.pos,
            angle: s.pose.angle,
            vel: s.vel,
            w: s.ang_vel,
            im: def.inv_mass,
            ii: def.inv_inertia,
        })
        .collect();
    bodies.push(Body {
        pos: Vec2::ZERO,
        angle: 0.0,
        vel: Vec2::ZERO,
        w: 0.0,
        im: 0.0,
        ii: 0.0,
    });

    for b in &mut bodies[..n] {
        if b.im > 0.0 {
            b.vel += settings.gravity * dt;
        }
    }

    let mut joints = build_joint_rows(world, state, &bodies, joint_targets, dt, fixed);
    let mut contacts = if settings.contacts_enabled {
        build_contact_rows(world, state, &bodies, dt, &index)
    } else {
        Vec::new()
    };

    // Warm start.
    for j in &joints {
        let p = j.imp.point;
        let ang = j.imp.lower - j.imp.upper + j.imp.motor;
        let (bp, bc) = pair_mut(&mut bodies, j.p, j.c);
        bp.apply_impulse(-p, j.rp);
        bp.w -= bp.ii * ang;
        bc.apply_impulse(p, j.rc);
        bc.w += bc.ii * ang;
    }
    for c in &contacts {
        let p = c.normal * c.ln + c.normal.perp() * c.lt;
        let (ba, bb) = pair_mut(&mut bodies, c.ia, c.ib);
        ba.apply_impulse(-p, c.ra);
        bb.apply_impulse(p, c.rb);
    }

    for _ in 0..settings.velocity_iterations {
        for j in &mut joints {
            solve_joint_velocity(j, &mut bodies, dt);
        }
        for c in &mut contacts {
            solve_contact_velocity(c, &mut bodies);
        }
    }

    for b in &mut bodies[..n] {
        b.pos += b.vel * dt;
        b.angle += b.w * dt;
    }

    for _ in 0..settings.position_iterations {
        for j in &joints {
            solve_joint_position(j, &mut bodies);
        }
        for c in &contacts {
            solve_contact_position(c, &mut bodies, settings.slop, settings.position_beta, settings.max_correction);
        }
    }

    project_limits(world, &mut bodies, fixed);

    for (s, b) in state.bodies.iter_mut().zip(&bodies) {
        s.pose = b.pose();
        s.vel = b.vel;
        s.ang_vel = b.w;
    }
    state.refresh_joint_coordinates(world);
    for (j, row) in joints.iter().enumerate().take(nj) {
        let limit = world.joints[j].torque_limit;
        state.joint_torque[j] = (row.imp.motor / dt).clamp(-limit, limit);
    }
    state.time += dt;
    state.step_count += 1;

    let report = ContactReport {
        contacts: contacts
            .iter()
            .filter(|c| c.ln > 0.0 || c.separation <= 0.0)
            .map(|c| ContactPoint {
                body_a: c.a,
                body_b: c.b,
                point: c.point,
                normal: c.normal,
                force: c.ln / dt,
                tangent_force: c.lt / dt,
            })
            .collect(),
        dt,
    };
    state.warm = WarmStart {
        joints: joints.iter().map(|j| j.imp).collect(),
        contacts: contacts
            .iter()
            .map(|c| CachedContact {
                a: c.a,
                b: c.b,
                feature: c.feature,
                normal: c.ln,
                tangent: c.lt,
            })
            .collect(),
    };
    if !state.is_finite() {
        return Err(SimError::NonFinite("simulation state after step"));
    }
    Ok(report)
}

fn pair_mut(bodies: &mut [Body], a: usize, b: usize) -> (&mut Body, &mut Body) {
    debug_assert_ne!(a, b);
    if a < b {
        let (lo, hi) = bodies.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = bodies.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

fn build_joint_rows(
    world: &WorldModel,
    state: &SimState,
    bodies: &[Body],
    targets: &[f64],
    dt: f64,
    fixed: usize,
) -> Vec<JointRow> {
    world
        .joints
        .iter()
        .enumerate()
        .map(|(j, def)| {
            let p = def.parent.unwrap_or(fixed);
            let c = def.child;
            let (bp, bc) = (&bodies[p], &bodies[c]);
            let q = angle_diff(bc.angle, bp.angle);
            let inv_sum = bp.ii + bc.ii;
            let axial_mass = if inv_sum > 0.0 { 1.0 / inv_sum } else { 0.0 };
            let target = targets.get(j).copied();
            let motor = motor_for(def.kp, def.kd, def.torque_limit, q, target, inv_sum, dt);
            let mut imp = state.warm.joints.get(j).copied().unwrap_or_default();
            match motor {
                Some(m) => imp.motor = imp.motor.clamp(-m.max_impulse, m.max_impulse),
                None => imp.motor = 0.0,
            }
            JointRow {
                p,
                c,
                local_p: def.anchor_parent,
                local_c: def.anchor_child,
                rp: def.anchor_parent.rotate(bp.angle),
                rc: def.anchor_child.rotate(bc.angle),
                q,
                limits: def.limits,
                axial_mass,
                motor,
                imp,
            }
        })
        .collect()
}

fn motor_for(
    kp: f64,
    kd: f64,
    torque_limit: f64,
    q: f64,
    target: Option<f64>,
    inv_sum: f64,
    dt: f64,
) -> Option<Motor> {
    let denom = dt * kp + kd;
    if denom <= 0.0 || inv_sum <= 0.0 {
        return None;
    }
    let gamma = 1.0 / (dt * denom);
    let error = target.map_or(0.0, |t| q - t);
    Some(Motor {
        gamma,
        bias: error * kp / denom,
        mass: 1.0 / (inv_sum + gamma),
        max_impulse: torque_limit * dt,
    })
}

fn build_contact_rows(
    world: &WorldModel,
    state: &SimState,
    bodies: &[Body],
    dt: f64,
    index: &dyn Fn(BodyId) -> usize,
) -> Vec<ContactRow> {
    let settings = &world.settings;
    let margin = settings.speculative_margin;
    let defs = world.bodies();
    let object = world.object_body;
    let mut rows = Vec::new();

    let add = |a: BodyId, b: BodyId, m: Manifold, rows: &mut Vec<ContactRow>| {
        let (ia, ib) = (index(a), index(b));
        let (ba, bb) = (&bodies[ia], &bodies[ib]);
        let (fa, ea) = if a == GROUND {
            (world.ground_friction, 0.0)
        } else {
            (defs[a].friction, defs[a].restitution)
        };
        let (fb, eb) = (defs[b].friction, defs[b].restitution);
        let friction = (fa * fb).sqrt();
        let restitution = ea.max(eb);
        let normal = m.normal;
        let tangent = normal.perp();
        for mp in &m.points[..m.count] {
            let point = (mp.pa + mp.pb) * 0.5;
            let ra = point - ba.pos;
            let rb = point - bb.pos;
            let kn = ba.im + bb.im + ba.ii * ra.cross(normal).powi(2) + bb.ii * rb.cross(normal).powi(2);
            let kt = ba.im + bb.im + ba.ii * ra.cross(tangent).powi(2) + bb.ii * rb.cross(tangent).powi(2);
            if kn <= 0.0 {
                continue;
            }
            let vn = normal.dot(bb.point_vel(rb) - ba.point_vel(ra));
            let mut min_vn = if mp.separation > 0.0 {
                -mp.separation / dt
            } else {
                0.0
            };
            if restitution > 0.0 && vn < -settings.restitution_threshold {
                min_vn = min_vn.max(-restitution * vn);
            }
            let cached = state
                .warm
                .contacts
                .iter()
                .find(|c| c.a == a && c.b == b && c.feature == mp.id);
            let (ln, lt) = cached.map_or((0.0, 0.0), |c| (c.normal, c.tangent));
            let pose_a = ba.pose();
            rows.push(ContactRow {
                a,
                b,
                ia,
                ib,
                feature: mp.id,
                normal,
                point,
                ra,
                rb,
                normal_mass: 1.0 / kn,
                tangent_mass: if kt > 0.0 { 1.0 / kt } else { 0.0 },
                friction,
                min_vn,
                separation: mp.separation,
                local_a: pose_a.inverse_transform_point(mp.pa),
                local_b: bb.pose().inverse_transform_point(mp.pb),
                local_normal: normal.rotate(-pose_a.angle),
                ln,
                lt,
            });
        }
    };

    if settings.ground_enabled {
        for (id, def) in defs.iter().enumerate() {
            if def.is_static {
                continue;
            }
            let pose = state.bodies[id].pose;
            if let Some(m) = collide_ground(&def.shape, pose, margin) {
                add(GROUND, id, m, &mut rows);
            }
        }
    }
    let obj_def = &defs[object];
    let obj_pose = state.bodies[object].pose;
    for id in 0..world.robot_body_count() {
        let def = &defs[id];
        if let Some(m) = collide_shapes(&def.shape, state.bodies[id].pose, &obj_def.shape, obj_pose, margin) {
            add(id, object, m, &mut rows);
        }
    }
    rows
}

fn solve_joint_velocity(j: &mut JointRow, bodies: &mut [Body], dt: f64) {
    let (bp, bc) = pair_mut(bodies, j.p, j.c);

    if let Some(m) = j.motor {
        let wrel = bc.w - bp.w;
        let impulse = -m.mass * (wrel + m.bias + m.gamma * j.imp.motor);
        let old = j.imp.motor;
        j.imp.motor = (old + impulse).clamp(-m.max_impulse, m.max_impulse);
        let d = j.imp.motor - old;
        bp.w -= bp.ii * d;
        bc.w += bc.ii * d;
    }

    if j.axial_mass > 0.0 {
        let c_lo = j.q - j.limits[0];
        let bias = if c_lo > 0.0 { c_lo / dt } else { 0.0 };
        let impulse = -j.axial_mass * (bc.w - bp.w + bias);
        let old = j.imp.lower;
        j.imp.lower = (old + impulse).max(0.0);
        let d = j.imp.lower - old;
        bp.w -= bp.ii * d;
        bc.w += bc.ii * d;

        let c_hi = j.limits[1] - j.q;
        let bias = if c_hi > 0.0 { c_hi / dt } else { 0.0 };
        let impulse = -j.axial_mass * (bp.w - bc.w + bias);
        let old = j.imp.upper;
        j.imp.upper = (old + impulse).max(0.0);
        let d = j.imp.upper - old;
        bp.w += bp.ii * d;
        bc.w -= bc.ii * d;
    }

    let cdot = bc.point_vel(j.rc) - bp.point_vel(j.rp);
    if let Some(p) = solve_point(bp, bc, j.rp, j.rc, -cdot) {
        j.imp.point += p;
        bp.apply_impulse(-p, j.rp);
        bc.apply_impulse(p, j.rc);
    }
}

/// Solves `K p = rhs` for the 2×2 point-constraint mass matrix.
fn solve_point(bp: &Body, bc: &Body, rp: Vec2, rc: Vec2, rhs: Vec2) -> Option<Vec2> {
    let m = bp.im + bc.im;
    let kxx = m + bp.ii * rp.z * rp.z + bc.ii * rc.z * rc.z;
    let kxz = -bp.ii * rp.x * rp.z - bc.ii * rc.x * rc.z;
    let kzz = m + bp.ii * rp.x * rp.x + bc.ii * rc.x * rc.x;
    let det = kxx * kzz - kxz * kxz;
    if det.abs() <= f64::EPSILON * (kxx * kzz).abs().max(f64::MIN_POSITIVE) {
        return None;
    }
    Some(Vec2::new(
        (kzz * rhs.x - kxz * rhs.z) / det,
        (kxx * rhs.z - kxz * rhs.x) / det,
    ))
}

fn solve_contact_velocity(c: &mut ContactRow, bodies: &mut [Body]) {
    let (ba, bb) = pair_mut(bodies, c.ia, c.ib);
    let tangent = c.normal.perp();

    let vt = tangent.dot(bb.point_vel(c.rb) - ba.point_vel(c.ra));
    let max_f = c.friction * c.ln;
    let old = c.lt;
    c.lt = (old - c.tangent_mass * vt).clamp(-max_f, max_f);
    let p = tangent * (c.lt - old);
    ba.apply_impulse(-p, c.ra);
    bb.apply_impulse(p, c.rb);

    let vn = c.normal.dot(bb.point_vel(c.rb) - ba.point_vel(c.ra));
    let old = c.ln;
    c.ln = (old + c.normal_mass * (c.min_vn - vn)).max(0.0);
    let p = c.normal * (c.ln - old);
    ba.apply_impulse(-p, c.ra);
    bb.apply_impulse(p, c.rb);
}

fn apply_position(b: &mut Body, p: Vec2, r: Vec2) {
    b.pos += p * b.im;
    b.angle += b.ii * r.cross(p);
}

fn solve_joint_position(j: &JointRow, bodies: &mut [Body]) {
    let (bp, bc) = pair_mut(bodies, j.p, j.c);
    let rp = j.local_p.rotate(bp.angle);
    let rc = j.local_c.rotate(bc.angle);
    let err = (bc.pos + rc) - (bp.pos + rp);
    if let Some(p) = solve_point(bp, bc, rp, rc, -err) {
        apply_position(bp, -p, rp);
        apply_position(bc, p, rc);
    }
}

fn solve_contact_position(c: &ContactRow, bodies: &mut [Body], slop: f64, beta: f64, max_correction: f64) {
    let (ba, bb) = pair_mut(bodies, c.ia, c.ib);
    let pa = ba.pose().transform_point(c.local_a);
    let pb = bb.pose().transform_point(c.local_b);
    let normal = c.local_normal.rotate(ba.angle);
    let separation = normal.dot(pb - pa);
    let correction = (beta * (separation + slop)).clamp(-max_correction, 0.0);
    if correction >= 0.0 {
        return;
    }
    let ra = pb - ba.pos;
    let rb = pb - bb.pos;
    let k = ba.im + bb.im + ba.ii * ra.cross(normal).powi(2) + bb.ii * rb.cross(normal).powi(2);
    if k <= 0.0 {
        return;
    }
    let p = normal * (-correction / k);
    apply_position(ba, -p, ra);
    apply_position(bb, p, rb);
}

/// Rotates joint subtrees so every relative angle sits inside its limits.
fn project_limits(world: &WorldModel, bodies: &mut [Body], fixed: usize) {
    let project = |bodies: &mut [Body], parent: usize, child: usize, anchor: Vec2, limits: [f64; 2], moved: &[BodyId]| {
        let q = angle_diff(bodies[child].angle, bodies[parent].angle);
        let clamped = q.clamp(limits[0], limits[1]);
        if clamped == q {
            return;
        }
        let delta = clamped - q;
        let pivot = bodies[parent].pose().transform_point(anchor);
        for &b in moved {
            let body = &mut bodies[b];
            body.pos = pivot + (body.pos - pivot).rotate(delta);
            body.angle += delta;
        }
    };
    for &j in &world.joint_order {
        let def = &world.joints[j];
        let parent = def.parent.expect("robot joint");
        project(bodies, parent, def.child, def.anchor_parent, def.limits, &world.subtrees[j]);
    }
    for def in &world.joints[world.joint_count()..] {
        let parent = def.parent.unwrap_or(fixed);
        project(bodies, parent, def.child, def.anchor_parent, def.limits, &[def.child]);
    }
}
