//! Rigid boxes, contact constraints and the time stepper.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::collide::{self, Manifold};
use super::SimConfig;
use crate::scene::Block;

/// Position correction parameters.
const BAUMGARTE: f64 = 0.2;
const LINEAR_SLOP: f64 = 0.005;
const MAX_CORRECTION: f64 = 0.2;
/// A velocity sweep whose impulses all changed by less than this ends the
/// solve before `velocity_iterations` sweeps.
const CONVERGED_IMPULSE: f64 = 1e-8;
/// Warm-start impulses carry over to contacts whose anchor moved less than this.
const ANCHOR_MATCH: f64 = 0.02;
/// Approach speed above which restitution applies.
const RESTITUTION_THRESHOLD: f64 = 0.5;
/// Impulses of contacts closing faster than this are not carried over to the
/// next step, where they would overshoot once the impact is resolved.
const IMPACT_SPEED: f64 = 0.1;
/// Bodies slower than this at the start of a step take part in shock
/// propagation; moving stacks are left to the regular solve.
const REST_SPEED: f64 = 0.003;
/// Most sweeps per level in the shock propagation pass.
const SHOCK_ITERATIONS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub id: String,
    pub half: Vector3<f64>,
    pub mass: f64,
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub linvel: Vector3<f64>,
    pub angvel: Vector3<f64>,
    inv_inertia_local: Vector3<f64>,
}

impl Body {
    pub fn new(
        id: impl Into<String>,
        dims: Vector3<f64>,
        mass: f64,
        position: Vector3<f64>,
        orientation: UnitQuaternion<f64>,
    ) -> Self {
        let (x2, y2, z2) = (dims.x * dims.x, dims.y * dims.y, dims.z * dims.z);
        let inertia = Vector3::new(y2 + z2, x2 + z2, x2 + y2) * (mass / 12.0);
        Body {
            id: id.into(),
            half: dims / 2.0,
            mass,
            position,
            orientation,
            linvel: Vector3::zeros(),
            angvel: Vector3::zeros(),
            inv_inertia_local: inertia.map(|i| 1.0 / i),
        }
    }

    pub fn from_block(b: &Block) -> Self {
        Body::new(
            b.id.clone(),
            b.dims,
            b.mass,
            b.position,
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), b.yaw),
        )
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        *self.orientation.to_rotation_matrix().matrix()
    }

    fn inv_inertia_world(&self) -> Matrix3<f64> {
        let r = self.rotation();
        r * Matrix3::from_diagonal(&self.inv_inertia_local) * r.transpose()
    }

    fn inv_mass(&self) -> f64 {
        1.0 / self.mass
    }

    fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.orientation.coords.iter().all(|x| x.is_finite())
            && self.linvel.iter().all(|x| x.is_finite())
            && self.angvel.iter().all(|x| x.is_finite())
    }
}

/// Per-body quantities frozen for the duration of one step's solve.
struct Frame {
    inv_mass: f64,
    inv_inertia: Matrix3<f64>,
}

#[derive(Debug, Clone)]
struct Constraint {
    a: usize,
    b: Option<usize>,
    normal: Vector3<f64>,
    tangents: [Vector3<f64>; 2],
    /// Anchor in a's body frame.
    local_a: Vector3<f64>,
    /// Anchor in b's body frame, or in world coordinates for the ground.
    local_b: Vector3<f64>,
    ra: Vector3<f64>,
    rb: Vector3<f64>,
    normal_mass: f64,
    tangent_mass: [f64; 2],
    /// Target lower bound on the normal relative velocity.
    velocity_bias: f64,
    separation: f64,
    /// The bodies approached faster than [`IMPACT_SPEED`] before the solve.
    impact: bool,
    normal_impulse: f64,
    tangent_impulse: [f64; 2],
}

type PairKey = (usize, Option<usize>);

/// A contact as seen from the lower-indexed body of its pair, so that a
/// manifold whose reference face switched sides still finds its impulses.
#[derive(Debug, Clone, Copy)]
struct CachedContact {
    anchor: Vector3<f64>,
    /// World-frame impulse on the lower-indexed body.
    impulse: Vector3<f64>,
}

impl Constraint {
    fn swapped(&self) -> bool {
        self.b.is_some_and(|b| b < self.a)
    }

    fn key(&self) -> PairKey {
        match self.b {
            Some(b) if b < self.a => (b, Some(self.a)),
            _ => (self.a, self.b),
        }
    }

    fn anchor(&self) -> Vector3<f64> {
        if self.swapped() {
            self.local_b
        } else {
            self.local_a
        }
    }

    fn impulse(&self) -> Vector3<f64> {
        self.normal * self.normal_impulse
            + self.tangents[0] * self.tangent_impulse[0]
            + self.tangents[1] * self.tangent_impulse[1]
    }
}

/// Collection of boxes resting on the ground plane `z = 0`.
#[derive(Debug, Clone)]
pub struct World {
    pub bodies: Vec<Body>,
    config: SimConfig,
    cache: BTreeMap<PairKey, Vec<CachedContact>>,
}

fn tangent_basis(n: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let helper = if n.x.abs() < 0.57 { Vector3::x() } else { Vector3::y() };
    let t1 = n.cross(&helper).normalize();
    let t2 = n.cross(&t1);
    [t1, t2]
}

impl World {
    pub fn new(bodies: Vec<Body>, config: SimConfig) -> Self {
        World {
            bodies,
            config,
            cache: BTreeMap::new(),
        }
    }

    pub fn from_blocks(blocks: &[Block], config: SimConfig) -> Self {
        World::new(blocks.iter().map(Body::from_block).collect(), config)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Kinetic plus gravitational potential energy.
    pub fn energy(&self) -> f64 {
        self.bodies.iter().map(|b| self.kinetic(b) + self.potential(b)).sum()
    }

    fn kinetic(&self, b: &Body) -> f64 {
        let w_local = b.rotation().transpose() * b.angvel;
        let inertia = self_inertia_local(b);
        0.5 * b.mass * b.linvel.norm_squared() + 0.5 * w_local.component_mul(&inertia).dot(&w_local)
    }

    fn potential(&self, b: &Body) -> f64 {
        b.mass * self.config.gravity * b.position.z
    }

    pub fn is_finite(&self) -> bool {
        self.bodies.iter().all(Body::is_finite)
    }

    fn collide(&self) -> Vec<Manifold> {
        let mut out = Vec::new();
        for (i, b) in self.bodies.iter().enumerate() {
            collide::box_ground(i, b, &mut out);
        }
        for i in 0..self.bodies.len() {
            for j in (i + 1)..self.bodies.len() {
                let (bi, bj) = (&self.bodies[i], &self.bodies[j]);
                let reach = bi.half.norm() + bj.half.norm() + collide::MARGIN;
                if (bi.position - bj.position).norm_squared() < reach * reach {
                    collide::box_box(i, bi, j, bj, &mut out);
                }
            }
        }
        out
    }

    /// Advances the world by one time step.
    pub fn step(&mut self) {
        let dt = self.config.dt;
        let manifolds = self.collide();
        let frames: Vec<Frame> = self
            .bodies
            .iter()
            .map(|b| Frame {
                inv_mass: b.inv_mass(),
                inv_inertia: b.inv_inertia_world(),
            })
            .collect();

        let resting: Vec<bool> = self
            .bodies
            .iter()
            .map(|b| b.linvel.norm() < REST_SPEED && b.angvel.norm() < REST_SPEED)
            .collect();
        let g = Vector3::new(0.0, 0.0, -self.config.gravity);
        for b in &mut self.bodies {
            b.linvel += g * dt;
        }

        let mut constraints: Vec<Constraint> =
            manifolds.iter().map(|m| self.prepare(m, &frames)).collect();
        self.warm_start(&mut constraints, &frames);
        // alternating sweep direction keeps the solve free of an ordering bias
        for it in 0..self.config.velocity_iterations {
            let mut change: f64 = 0.0;
            if it % 2 == 0 {
                for c in constraints.iter_mut() {
                    change = change.max(self.solve_velocity(c, &frames));
                }
            } else {
                for c in constraints.iter_mut().rev() {
                    change = change.max(self.solve_velocity(c, &frames));
                }
            }
            if change < CONVERGED_IMPULSE {
                break;
            }
        }
        self.store_impulses(&constraints);
        self.propagate_shock(&mut constraints, &frames, &resting);

        for b in &mut self.bodies {
            b.position += b.linvel * dt;
            b.orientation = integrate_rotation(b.orientation, &b.angvel, dt);
        }

        for _ in 0..self.config.position_iterations {
            for c in &constraints {
                self.solve_position(c);
            }
        }
    }

    fn prepare(&self, m: &Manifold, frames: &[Frame]) -> Constraint {
        let a = &self.bodies[m.a];
        let ra = m.point_a - a.position;
        let (rb, local_b) = match m.b {
            Some(j) => {
                let b = &self.bodies[j];
                let rb = m.point_b - b.position;
                (rb, b.rotation().transpose() * rb)
            }
            None => (Vector3::zeros(), m.point_b),
        };
        let tangents = tangent_basis(&m.normal);
        let k = |d: &Vector3<f64>| effective_inv_mass(d, &ra, &rb, m.a, m.b, frames);

        let vn = self.relative_velocity(m.a, m.b, &ra, &rb).dot(&m.normal);
        let mut velocity_bias = -m.separation.max(0.0) / self.config.dt;
        if self.config.restitution > 0.0 && vn < -RESTITUTION_THRESHOLD {
            velocity_bias = velocity_bias.max(-self.config.restitution * vn);
        }
        Constraint {
            a: m.a,
            b: m.b,
            normal: m.normal,
            tangents,
            local_a: a.rotation().transpose() * ra,
            local_b,
            ra,
            rb,
            normal_mass: 1.0 / k(&m.normal),
            tangent_mass: [1.0 / k(&tangents[0]), 1.0 / k(&tangents[1])],
            velocity_bias,
            separation: m.separation,
            impact: vn < -IMPACT_SPEED,
            normal_impulse: 0.0,
            tangent_impulse: [0.0; 2],
        }
    }

    fn relative_velocity(&self, a: usize, b: Option<usize>, ra: &Vector3<f64>, rb: &Vector3<f64>) -> Vector3<f64> {
        let ba = &self.bodies[a];
        let va = ba.linvel + ba.angvel.cross(ra);
        match b {
            Some(j) => {
                let bb = &self.bodies[j];
                va - (bb.linvel + bb.angvel.cross(rb))
            }
            None => va,
        }
    }

    fn apply_impulse(&mut self, c: &Constraint, p: Vector3<f64>, frames: &[Frame]) {
        self.apply_impulse_to(c, p, frames, [true, true]);
    }

    fn apply_impulse_to(&mut self, c: &Constraint, p: Vector3<f64>, frames: &[Frame], mobile: [bool; 2]) {
        if mobile[0] {
            let fa = &frames[c.a];
            let a = &mut self.bodies[c.a];
            a.linvel += p * fa.inv_mass;
            a.angvel += fa.inv_inertia * c.ra.cross(&p);
        }
        if let Some(j) = c.b.filter(|_| mobile[1]) {
            let fb = &frames[j];
            let b = &mut self.bodies[j];
            b.linvel -= p * fb.inv_mass;
            b.angvel -= fb.inv_inertia * c.rb.cross(&p);
        }
    }

    fn warm_start(&mut self, constraints: &mut [Constraint], frames: &[Frame]) {
        // each cached impulse seeds at most one new contact
        let mut used: BTreeMap<PairKey, Vec<bool>> = BTreeMap::new();
        for c in constraints.iter_mut() {
            let key = c.key();
            let Some(old) = self.cache.get(&key) else {
                continue;
            };
            let anchor = c.anchor();
            let taken = used.entry(key).or_insert_with(|| vec![false; old.len()]);
            let hit = old
                .iter()
                .enumerate()
                .filter(|(k, o)| !taken[*k] && (o.anchor - anchor).norm() < ANCHOR_MATCH)
                .min_by(|x, y| (x.1.anchor - anchor).norm().total_cmp(&(y.1.anchor - anchor).norm()));
            if let Some((k, o)) = hit {
                taken[k] = true;
                let p = if c.swapped() { -o.impulse } else { o.impulse };
                c.normal_impulse = p.dot(&c.normal).max(0.0);
                let limit = self.config.friction_mu * c.normal_impulse;
                let t = [p.dot(&c.tangents[0]), p.dot(&c.tangents[1])];
                let mag = (t[0] * t[0] + t[1] * t[1]).sqrt();
                let s = if mag > limit { limit / mag } else { 1.0 };
                c.tangent_impulse = [t[0] * s, t[1] * s];
            }
        }
        for c in constraints.iter() {
            self.apply_impulse(c, c.impulse(), frames);
        }
    }

    fn solve_velocity(&mut self, c: &mut Constraint, frames: &[Frame]) -> f64 {
        let masses = (c.normal_mass, c.tangent_mass);
        self.solve_velocity_with(c, frames, masses, [true, true])
    }

    /// One projected Gauss-Seidel update of a contact. `mobile` says which
    /// of the two bodies receive impulses; the masses must match it. Returns
    /// the largest change of an accumulated impulse.
    fn solve_velocity_with(
        &mut self,
        c: &mut Constraint,
        frames: &[Frame],
        (normal_mass, tangent_mass): (f64, [f64; 2]),
        mobile: [bool; 2],
    ) -> f64 {
        let vn = self.relative_velocity(c.a, c.b, &c.ra, &c.rb).dot(&c.normal);
        let lambda = -normal_mass * (vn - c.velocity_bias);
        let total = (c.normal_impulse + lambda).max(0.0);
        let applied = total - c.normal_impulse;
        c.normal_impulse = total;
        self.apply_impulse_to(c, c.normal * applied, frames, mobile);

        let v = self.relative_velocity(c.a, c.b, &c.ra, &c.rb);
        let limit = self.config.friction_mu * c.normal_impulse;
        let old = c.tangent_impulse;
        let mut t = [
            old[0] - tangent_mass[0] * v.dot(&c.tangents[0]),
            old[1] - tangent_mass[1] * v.dot(&c.tangents[1]),
        ];
        let mag = (t[0] * t[0] + t[1] * t[1]).sqrt();
        if mag > limit {
            let s = if mag > 0.0 { limit / mag } else { 0.0 };
            t = [t[0] * s, t[1] * s];
        }
        c.tangent_impulse = t;
        let p = c.tangents[0] * (t[0] - old[0]) + c.tangents[1] * (t[1] - old[1]);
        self.apply_impulse_to(c, p, frames, mobile);
        applied.abs().max((t[0] - old[0]).abs()).max((t[1] - old[1]).abs())
    }

    /// Shock propagation: sweeps the resting contacts level by level up from
    /// the ground, treating bodies of lower levels as immovable, so that a
    /// stack at rest ends the step exactly at rest.
    fn propagate_shock(&mut self, constraints: &mut [Constraint], frames: &[Frame], resting: &[bool]) {
        let n = self.bodies.len();
        let touching = |c: &Constraint| c.separation < LINEAR_SLOP;
        // level 0 touches the ground; level k rests on level k - 1
        let mut level = vec![usize::MAX; n];
        let mut frontier: Vec<usize> = Vec::new();
        for c in constraints.iter().filter(|c| c.b.is_none() && touching(c)) {
            if level[c.a] == usize::MAX && resting[c.a] {
                level[c.a] = 0;
                frontier.push(c.a);
            }
        }
        let mut depth = 0;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for c in constraints.iter().filter(|c| touching(c)) {
                let Some(b) = c.b else { continue };
                for (x, y) in [(c.a, b), (b, c.a)] {
                    if level[x] == depth && level[y] == usize::MAX && resting[y] {
                        level[y] = depth + 1;
                        next.push(y);
                    }
                }
            }
            frontier = next;
            depth += 1;
        }

        for current in 0..depth {
            let members: Vec<usize> = (0..constraints.len())
                .filter(|&k| {
                    let c = &constraints[k];
                    let la = level[c.a];
                    let lb = c.b.map_or(0, |b| level[b]);
                    touching(c) && la.max(lb) == current && (c.b.is_none() || la.min(lb) + 1 >= current)
                })
                .collect();
            for it in 0..SHOCK_ITERATIONS {
                let mut change: f64 = 0.0;
                for idx in 0..members.len() {
                    let k = if it % 2 == 0 { members[idx] } else { members[members.len() - 1 - idx] };
                    let c = &mut constraints[k];
                    let mobile = [level[c.a] == current, c.b.is_some_and(|b| level[b] == current)];
                    let (ma, mb) = (mobile[0].then_some(c.a), if mobile[1] { c.b } else { None });
                    let Some(first) = ma.or(mb) else { continue };
                    let second = if ma.is_some() { mb } else { None };
                    // effective masses with the immovable side removed
                    let sign_ra = if ma.is_some() { c.ra } else { c.rb };
                    let k = |d: &Vector3<f64>| effective_inv_mass(d, &sign_ra, &c.rb, first, second, frames);
                    let masses = (1.0 / k(&c.normal), [1.0 / k(&c.tangents[0]), 1.0 / k(&c.tangents[1])]);
                    change = change.max(self.solve_velocity_with(c, frames, masses, mobile));
                }
                if change < CONVERGED_IMPULSE {
                    break;
                }
            }
        }
    }

    fn store_impulses(&mut self, constraints: &[Constraint]) {
        // an impact anywhere in a group of touching bodies invalidates the
        // group's impulses as a guess for the next step
        let mut group = UnionFind::new(self.bodies.len());
        for c in constraints {
            if let Some(b) = c.b {
                group.union(c.a, b);
            }
        }
        let mut hit = vec![false; self.bodies.len()];
        for c in constraints.iter().filter(|c| c.impact) {
            hit[group.find(c.a)] = true;
        }
        self.cache.clear();
        for c in constraints {
            let impulse = if hit[group.find(c.a)] {
                Vector3::zeros()
            } else if c.swapped() {
                -c.impulse()
            } else {
                c.impulse()
            };
            let entry = CachedContact {
                anchor: c.anchor(),
                impulse,
            };
            self.cache.entry(c.key()).or_default().push(entry);
        }
    }

    /// One nonlinear Gauss-Seidel pass on a contact's penetration.
    fn solve_position(&mut self, c: &Constraint) {
        let a = &self.bodies[c.a];
        let ra = a.rotation() * c.local_a;
        let pa = a.position + ra;
        let (pb, rb) = match c.b {
            Some(j) => {
                let b = &self.bodies[j];
                let rb = b.rotation() * c.local_b;
                (b.position + rb, rb)
            }
            None => (c.local_b, Vector3::zeros()),
        };
        let separation = (pa - pb).dot(&c.normal);
        let correction = (BAUMGARTE * (separation + LINEAR_SLOP)).clamp(-MAX_CORRECTION, 0.0);
        if correction >= 0.0 {
            return;
        }
        let ia = a.inv_inertia_world();
        let ib = c.b.map(|j| self.bodies[j].inv_inertia_world());
        let mut k = a.inv_mass() + c.normal.dot(&(ia * ra.cross(&c.normal)).cross(&ra));
        if let (Some(j), Some(ib)) = (c.b, ib) {
            k += self.bodies[j].inv_mass() + c.normal.dot(&(ib * rb.cross(&c.normal)).cross(&rb));
        }
        let p = c.normal * (-correction / k);

        let a = &mut self.bodies[c.a];
        a.position += p * a.inv_mass();
        a.orientation = rotate_by(a.orientation, &(ia * ra.cross(&p)));
        if let (Some(j), Some(ib)) = (c.b, ib) {
            let b = &mut self.bodies[j];
            b.position -= p * b.inv_mass();
            b.orientation = rotate_by(b.orientation, &(-(ib * rb.cross(&p))));
        }
    }

    /// True when every body moves slower than the settle thresholds.
    pub fn is_at_rest(&self) -> bool {
        self.bodies.iter().all(|b| {
            b.linvel.norm() < self.config.settle_lin_vel && b.angvel.norm() < self.config.settle_ang_vel
        })
    }
}

fn self_inertia_local(b: &Body) -> Vector3<f64> {
    b.inv_inertia_local.map(|x| 1.0 / x)
}

fn effective_inv_mass(
    d: &Vector3<f64>,
    ra: &Vector3<f64>,
    rb: &Vector3<f64>,
    a: usize,
    b: Option<usize>,
    frames: &[Frame],
) -> f64 {
    let fa = &frames[a];
    let mut k = fa.inv_mass + d.dot(&(fa.inv_inertia * ra.cross(d)).cross(ra));
    if let Some(j) = b {
        let fb = &frames[j];
        k += fb.inv_mass + d.dot(&(fb.inv_inertia * rb.cross(d)).cross(rb));
    }
    k
}

fn integrate_rotation(q: UnitQuaternion<f64>, w: &Vector3<f64>, dt: f64) -> UnitQuaternion<f64> {
    rotate_by(q, &(w * dt))
}

/// Applies a small rotation vector to an orientation.
fn rotate_by(q: UnitQuaternion<f64>, theta: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*theta) * q
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, x: usize, y: usize) {
        let (rx, ry) = (self.find(x), self.find(y));
        self.0[rx.max(ry)] = rx.min(ry);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_world(blocks: &[Block]) -> World {
        World::from_blocks(blocks, SimConfig::default())
    }

    #[test]
    fn free_fall_matches_semi_implicit_euler() {
        let mut w = cube_world(&[Block::cube("a", 0.0, 0.0, 5.0)]);
        let dt = w.config().dt;
        for _ in 0..10 {
            w.step();
        }
        let g = w.config().gravity;
        // semi-implicit Euler: z_n = z_0 - g dt^2 n (n + 1) / 2
        let expected = 5.0 - g * dt * dt * 55.0;
        assert!((w.bodies[0].position.z - expected).abs() < 1e-12);
    }

    #[test]
    fn resting_cube_stays_put() {
        let mut w = cube_world(&[Block::cube("a", 0.0, 0.0, 0.5)]);
        for _ in 0..240 {
            w.step();
        }
        let b = &w.bodies[0];
        assert!((b.position - Vector3::new(0.0, 0.0, 0.5)).norm() < 1e-3);
        assert!(w.is_at_rest());
    }

    #[test]
    fn dropped_cube_lands_without_bouncing() {
        let mut w = cube_world(&[Block::cube("a", 0.0, 0.0, 1.5)]);
        for _ in 0..480 {
            w.step();
        }
        let b = &w.bodies[0];
        assert!((b.position.z - 0.5).abs() < 0.01, "{}", b.position.z);
        assert!(w.is_at_rest());
    }
}

