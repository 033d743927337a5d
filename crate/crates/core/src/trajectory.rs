//! Point-gripper transport trajectories and their kinetic-energy cost.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;

use crate::assign::assign_blocks;
use crate::error::{Error, Result};
use crate::scene::{Scene, TrialSpec};
use crate::symplan::{plan_symbolic, SymbolicPlan};

/// Scatter samples averaged per effort estimate.
pub const DEFAULT_M: usize = 30;
/// Duration of one transport, in time units.
pub const DEFAULT_DURATION: f64 = 2.0;
/// Discretization intervals per trajectory segment.
pub const DEFAULT_STEPS: usize = 128;
pub const MIN_STEPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub duration: f64,
    pub waypoints: Vec<Vector3<f64>>,
}

impl Trajectory {
    pub fn peak_speed(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.velocity.norm())
            .fold(0.0, f64::max)
    }

    /// Writes `time,x,y,z,vx,vy,vz` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "x", "y", "z", "vx", "vy", "vz"])?;
        for s in &self.samples {
            let p = s.position;
            let v = s.velocity;
            w.write_record([s.time, p.x, p.y, p.z, v.x, v.y, v.z].map(|x| x.to_string()))?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))
    }
}

/// Discrete minimum-acceleration profile on `n` intervals: `s[0] = 0`,
/// `s[n] = 1`, zero end velocities through mirrored ghost points, minimizing
/// the trapezoid-weighted sum of squared second differences.
fn unit_profile(n: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(p) = cache.lock().expect("profile cache").get(&n) {
        return p.clone();
    }
    let p = Arc::new(solve_profile(n));
    cache.lock().expect("profile cache").insert(n, p.clone());
    p
}

fn solve_profile(n: usize) -> Vec<f64> {
    let m = n - 1;
    // Row k of the residual is D_k = s[k+1] - 2 s[k] + s[k-1], for k = 0..=n,
    // expressed over unknowns s[1..n-1] plus a constant from s[n] = 1.
    let mut rows = DMatrix::<f64>::zeros(n + 1, m);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for k in 0..=n {
        let w = if k == 0 || k == n { 0.5f64.sqrt() } else { 1.0 };
        for (idx, c) in [(k as isize + 1, 1.0), (k as isize, -2.0), (k as isize - 1, 1.0)] {
            let idx = match idx {
                -1 => 1,
                i if i == n as isize + 1 => n - 1,
                i => i as usize,
            };
            if idx == 0 {
                continue;
            }
            if idx == n {
                rhs[k] -= w * c;
            } else {
                rows[(k, idx - 1)] += w * c;
            }
        }
    }
    // QR keeps the conditioning at that of the difference operator itself.
    let qr = rows.qr();
    let x = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * rhs))
        .expect("difference operator has full column rank");
    let mut s = Vec::with_capacity(n + 1);
    s.push(0.0);
    s.extend(x.iter().copied());
    s.push(1.0);
    s
}

/// Rest-to-rest transport from `start` to `goal` via lifted waypoints.
///
/// The path visits `[start, start + clearance·z, goal + clearance·z, goal]`,
/// stopping at each. Every segment follows the discrete minimum-acceleration
/// profile on `steps` intervals. Segment durations are proportional to the
/// square root of segment length, which minimizes the total squared
/// acceleration for a fixed overall `duration`. Zero-length segments take no
/// time.
pub fn plan_transport(
    start: Vector3<f64>,
    goal: Vector3<f64>,
    clearance: f64,
    duration: f64,
    steps: usize,
) -> Result<Trajectory> {
    if !(start.iter().all(|x| x.is_finite()) && goal.iter().all(|x| x.is_finite())) {
        return Err(Error::Validation("transport endpoints must be finite".into()));
    }
    if !(clearance.is_finite() && clearance >= 0.0) {
        return Err(Error::Validation(format!("clearance must be finite and >= 0, got {clearance}")));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::Validation(format!("duration must be positive, got {duration}")));
    }
    if steps < MIN_STEPS {
        return Err(Error::Validation(format!("steps must be at least {MIN_STEPS}, got {steps}")));
    }

    let lift = Vector3::new(0.0, 0.0, clearance);
    let waypoints = vec![start, start + lift, goal + lift, goal];
    let lengths: Vec<f64> = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let weight: f64 = lengths.iter().map(|l| l.sqrt()).sum();

    let rest = |time, position| Sample {
        time,
        position,
        velocity: Vector3::zeros(),
    };
    if weight == 0.0 {
        return Ok(Trajectory {
            samples: vec![rest(0.0, start), rest(duration, goal)],
            duration,
            waypoints,
        });
    }

    let profile = unit_profile(steps);
    let mut samples = vec![rest(0.0, start)];
    let mut t0 = 0.0;
    for (i, &len) in lengths.iter().enumerate() {
        if len == 0.0 {
            continue;
        }
        let tau = duration * len.sqrt() / weight;
        let (a, b) = (waypoints[i], waypoints[i + 1]);
        let delta = b - a;
        let h = tau / steps as f64;
        for k in 1..=steps {
            let ds = if k == steps {
                0.0
            } else {
                (profile[k + 1] - profile[k - 1]) / (2.0 * h)
            };
            let position = if k == steps { b } else { a + delta * profile[k] };
            let time = if k == steps { t0 + tau } else { t0 + k as f64 * h };
            samples.push(Sample {
                time,
                position,
                velocity: delta * ds,
            });
        }
        t0 += tau;
    }
    samples.last_mut().expect("nonempty").time = duration;
    Ok(Trajectory {
        samples,
        duration,
        waypoints,
    })
}

/// Kinetic energy of the block at the trajectory's peak speed.
pub fn action_energy(traj: &Trajectory, mass: f64) -> f64 {
    0.5 * mass * traj.peak_speed().powi(2)
}

/// Transport settings shared by every action of an effort estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportParams {
    pub duration: f64,
    pub steps: usize,
    /// Extra height above the tallest point of B for the lift-over waypoints.
    pub headroom: f64,
}

impl Default for TransportParams {
    fn default() -> Self {
        TransportParams {
            duration: DEFAULT_DURATION,
            steps: DEFAULT_STEPS,
            headroom: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffortEstimate {
    /// Energy of each transport in the first sample, in plan order.
    pub per_action_energy: Vec<f64>,
    /// Sum of `per_action_energy`.
    pub total_energy: f64,
    pub sample_mean: f64,
    /// Population standard deviation of `sample_totals`.
    pub sample_std: f64,
    pub m: usize,
    pub sample_totals: Vec<f64>,
}

/// Transport trajectory of every moved block, in plan order.
pub fn plan_trajectories(
    a: &Scene,
    b: &Scene,
    plan: &SymbolicPlan,
    params: &TransportParams,
) -> Result<Vec<Trajectory>> {
    let clearance = b.max_height() + params.headroom;
    plan.transports
        .iter()
        .map(|t| {
            let from = a.get(&t.subject).expect("subject in A");
            let to = b.get(&t.target).expect("target in B");
            plan_transport(from.position, to.position, clearance, params.duration, params.steps)
        })
        .collect()
}

/// Energies of each transport for one realization of the trial.
pub fn sample_energies(trial: &TrialSpec, sample_seed: u64, params: &TransportParams) -> Result<Vec<f64>> {
    let (a, b) = trial.realize(sample_seed)?;
    let assignment = assign_blocks(&a, &b)?;
    let plan = plan_symbolic(&a, &b, &assignment)?;
    let trajectories = plan_trajectories(&a, &b, &plan, params)?;
    Ok(plan
        .transports
        .iter()
        .zip(&trajectories)
        .map(|(t, traj)| action_energy(traj, a.get(&t.subject).expect("subject in A").mass))
        .collect())
}

/// Effort with default transport settings.
pub fn estimate_effort(trial: &TrialSpec, m: usize, seed: u64) -> Result<EffortEstimate> {
    estimate_effort_with(trial, m, seed, &TransportParams::default())
}

/// Mean total transport energy over `m` realizations of the trial, sample
/// `i` drawn with seed `seed + i`. Samples run in parallel and are reduced
/// in index order.
pub fn estimate_effort_with(
    trial: &TrialSpec,
    m: usize,
    seed: u64,
    params: &TransportParams,
) -> Result<EffortEstimate> {
    if m == 0 {
        return Err(Error::Validation("effort sample count must be at least 1".into()));
    }
    let per_sample: Vec<Vec<f64>> = if trial.is_random() {
        (0..m)
            .into_par_iter()
            .map(|i| sample_energies(trial, seed.wrapping_add(i as u64), params))
            .collect::<Result<_>>()?
    } else {
        vec![sample_energies(trial, seed, params)?; m]
    };
    let sample_totals: Vec<f64> = per_sample.iter().map(|e| e.iter().sum()).collect();
    let mean = sample_totals.iter().sum::<f64>() / m as f64;
    let var = sample_totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / m as f64;
    let per_action_energy = per_sample.into_iter().next().expect("m >= 1");
    Ok(EffortEstimate {
        total_energy: per_action_energy.iter().sum(),
        per_action_energy,
        sample_mean: mean,
        sample_std: var.sqrt(),
        m,
        sample_totals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(len: f64, duration: f64, steps: usize) -> Trajectory {
        plan_transport(Vector3::zeros(), Vector3::new(len, 0.0, 0.0), 0.0, duration, steps).unwrap()
    }

    #[test]
    fn null_move() {
        let t = plan_transport(Vector3::new(1.0, 2.0, 0.5), Vector3::new(1.0, 2.0, 0.5), 0.0, 2.0, 16).unwrap();
        assert!(t.samples.iter().all(|s| s.velocity == Vector3::zeros()));
        assert_eq!(action_energy(&t, 1.0), 0.0);
    }

    #[test]
    fn profile_is_symmetric_and_monotone() {
        let s = solve_profile(64);
        for k in 0..=64 {
            assert!((s[k] + s[64 - k] - 1.0).abs() < 1e-11);
        }
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn peak_speed_matches_cubic() {
        let t = straight(3.0, 2.0, 256);
        assert!((t.peak_speed() / 2.25 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn endpoints_at_rest_and_times_increase() {
        let t = plan_transport(Vector3::zeros(), Vector3::new(4.0, -1.0, 1.5), 3.0, 2.0, 32).unwrap();
        assert_eq!(t.samples[0].velocity, Vector3::zeros());
        assert_eq!(t.samples.last().unwrap().velocity, Vector3::zeros());
        assert!(t.samples.windows(2).all(|w| w[1].time > w[0].time));
        assert_eq!(t.samples.last().unwrap().time, 2.0);
        for w in &t.waypoints {
            assert!(t.samples.iter().any(|s| (s.position - w).norm() < 1e-6));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let z = Vector3::zeros();
        assert!(plan_transport(z, Vector3::new(f64::NAN, 0.0, 0.0), 0.0, 1.0, 16).is_err());
        assert!(plan_transport(z, z, -1.0, 1.0, 16).is_err());
        assert!(plan_transport(z, z, 0.0, 0.0, 16).is_err());
        assert!(plan_transport(z, z, 0.0, 1.0, 4).is_err());
    }

    #[test]
    fn csv_trace_header() {
        let mut buf = Vec::new();
        straight(1.0, 1.0, 8).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,x,y,z,vx,vy,vz\n"));
        assert_eq!(text.lines().count(), 1 + 9);
    }
}
