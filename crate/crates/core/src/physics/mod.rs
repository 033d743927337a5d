//! Forward simulation of box stacks and a quasi-static stability check.

mod collide;
mod stable;
mod world;

use std::io::Write;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::Scene;

pub use stable::{stability_margin, static_stable};
pub use world::{Body, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub gravity: f64,
    pub friction_mu: f64,
    pub restitution: f64,
    pub max_sim_time: f64,
    pub settle_lin_vel: f64,
    pub settle_ang_vel: f64,
    /// Consecutive at-rest steps required before the run stops early.
    pub settle_steps: usize,
    /// A block that ends farther than this from where it started counts as fallen.
    pub fall_threshold: f64,
    pub velocity_iterations: usize,
    pub position_iterations: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1.0 / 240.0,
            gravity: 9.81,
            friction_mu: 0.5,
            restitution: 0.0,
            max_sim_time: 4.0,
            settle_lin_vel: 1e-3,
            settle_ang_vel: 1e-3,
            settle_steps: 12,
            fall_threshold: 0.25,
            velocity_iterations: 300,
            position_iterations: 4,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("gravity", self.gravity),
            ("settle_lin_vel", self.settle_lin_vel),
            ("settle_ang_vel", self.settle_ang_vel),
            ("fall_threshold", self.fall_threshold),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.max_sim_time.is_finite() && self.max_sim_time >= self.dt) {
            return Err(Error::Validation(format!(
                "max_sim_time must be at least dt, got {}",
                self.max_sim_time
            )));
        }
        if !(self.friction_mu >= 0.0 && self.friction_mu.is_finite()) {
            return Err(Error::Validation("friction_mu must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.restitution) {
            return Err(Error::Validation("restitution must lie in [0, 1]".into()));
        }
        if self.settle_steps == 0 || self.velocity_iterations == 0 {
            return Err(Error::Validation("settle_steps and velocity_iterations must be positive".into()));
        }
        Ok(())
    }

    fn max_steps(&self) -> usize {
        (self.max_sim_time / self.dt).round().max(1.0) as usize
    }
}

/// Final pose of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub id: String,
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub final_poses: Vec<Pose>,
    pub fell: bool,
    pub max_displacement: f64,
    pub elapsed: f64,
    pub steps: usize,
}

/// Runs the scene under gravity until it comes to rest or time runs out.
pub fn simulate(scene: &Scene, config: &SimConfig) -> Result<SimOutcome> {
    simulate_observed(scene, config, |_, _| Ok(()))
}

/// As [`simulate`], calling `observe(step, world)` after every step.
pub fn simulate_observed<F>(scene: &Scene, config: &SimConfig, mut observe: F) -> Result<SimOutcome>
where
    F: FnMut(usize, &World) -> Result<()>,
{
    config.validate()?;
    let mut world = World::from_blocks(&scene.blocks, *config);
    let mut quiet = 0;
    let mut steps = 0;
    for step in 1..=config.max_steps() {
        world.step();
        steps = step;
        if !world.is_finite() {
            return Err(Error::Simulation { step });
        }
        observe(step, &world)?;
        quiet = if world.is_at_rest() { quiet + 1 } else { 0 };
        if quiet >= config.settle_steps {
            break;
        }
    }

    let max_displacement = scene
        .blocks
        .iter()
        .zip(&world.bodies)
        .map(|(b, body)| (body.position - b.position).norm())
        .fold(0.0, f64::max);
    Ok(SimOutcome {
        final_poses: world
            .bodies
            .iter()
            .map(|b| Pose {
                id: b.id.clone(),
                position: b.position,
                orientation: b.orientation,
            })
            .collect(),
        fell: max_displacement > config.fall_threshold,
        max_displacement,
        elapsed: steps as f64 * config.dt,
        steps,
    })
}

/// Simulates while writing `step,id,x,y,z,qw,qx,qy,qz` rows for every body.
pub fn simulate_traced<W: Write>(scene: &Scene, config: &SimConfig, out: W) -> Result<SimOutcome> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "id", "x", "y", "z", "qw", "qx", "qy", "qz"])?;
    let outcome = simulate_observed(scene, config, |step, world| {
        for b in &world.bodies {
            let p = b.position;
            let q = b.orientation.quaternion();
            let mut row = vec![step.to_string(), b.id.clone()];
            row.extend([p.x, p.y, p.z, q.w, q.i, q.j, q.k].map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        Ok(())
    })?;
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(outcome)
}
