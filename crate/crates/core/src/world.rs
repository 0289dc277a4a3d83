//! Kinematics of vehicles and APs in a square world.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_WORLD_SIZE_M: f64 = 20.0;
pub const DEFAULT_VEHICLE_SPEED_MPS: f64 = 0.9;
pub const DEFAULT_AP_SPEED_MPS: f64 = 0.05;
pub const DEFAULT_GOAL_RADIUS_M: f64 = 0.5;
pub const DEFAULT_MAX_STEPS: usize = 100;

/// Vehicle lanes start and end this fraction of the world size away from
/// the left and right borders.
pub const LANE_INSET_FRAC: f64 = 0.2;
/// Square-formation APs sit this fraction of the world size inside the corners.
pub const CORNER_INSET_FRAC: f64 = 0.1;
/// Smallest spacing between neighbouring lanes or APs a layout may use.
pub const MIN_SPACING_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn clamp_to(self, world_size: f64) -> Self {
        Self {
            x: self.x.clamp(0.0, world_size),
            y: self.y.clamp(0.0, world_size),
        }
    }

    /// Moves at most `step` metres toward `goal`, landing exactly on it when
    /// the remaining distance is shorter than the step.
    fn advance_toward(self, goal: Pose, step: f64) -> (Pose, bool) {
        let dist = self.distance(&goal);
        if dist <= step {
            return (goal, true);
        }
        let f = step / dist;
        (
            Pose::new(self.x + (goal.x - self.x) * f, self.y + (goal.y - self.y) * f),
            false,
        )
    }
}

impl From<[f64; 2]> for Pose {
    fn from([x, y]: [f64; 2]) -> Self {
        Pose::new(x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: usize,
    pub pose: Pose,
    pub target: Pose,
    pub speed_mps: f64,
    pub arrived: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApState {
    pub id: usize,
    pub pose: Pose,
    /// Zero means a static AP.
    pub speed_mps: f64,
    pub waypoint: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// APs in one column across the middle of the world.
    Scenario1,
    /// APs in a square formation near the corners.
    Scenario2,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub world_size_m: f64,
    pub vehicle_starts: Vec<Pose>,
    pub vehicle_targets: Vec<Pose>,
    pub ap_starts: Vec<Pose>,
    pub goal_radius_m: f64,
    pub dt_s: f64,
    pub max_steps: usize,
    pub vehicle_speed_mps: f64,
    pub ap_speed_mps: f64,
}

impl Scenario {
    pub fn n_vehicles(&self) -> usize {
        self.vehicle_starts.len()
    }

    pub fn n_aps(&self) -> usize {
        self.ap_starts.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.world_size_m.is_finite() && self.world_size_m > 0.0) {
            return Err(Error::domain("world_size_m must be > 0"));
        }
        if self.vehicle_starts.is_empty() || self.ap_starts.is_empty() {
            return Err(Error::domain("scenario needs at least one vehicle and one AP"));
        }
        if self.vehicle_starts.len() != self.vehicle_targets.len() {
            return Err(Error::domain(format!(
                "{} vehicle starts but {} targets",
                self.vehicle_starts.len(),
                self.vehicle_targets.len()
            )));
        }
        let inside = |p: &Pose| {
            p.x.is_finite()
                && p.y.is_finite()
                && (0.0..=self.world_size_m).contains(&p.x)
                && (0.0..=self.world_size_m).contains(&p.y)
        };
        for p in self
            .vehicle_starts
            .iter()
            .chain(&self.vehicle_targets)
            .chain(&self.ap_starts)
        {
            if !inside(p) {
                return Err(Error::domain(format!(
                    "pose ({}, {}) lies outside the {} m world",
                    p.x, p.y, self.world_size_m
                )));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::domain("max_steps must be > 0"));
        }
        if !(self.dt_s > 0.0) || !(self.vehicle_speed_mps > 0.0) {
            return Err(Error::domain("dt_s and vehicle speed must be > 0"));
        }
        if !(self.ap_speed_mps >= 0.0) || !(self.goal_radius_m >= 0.0) {
            return Err(Error::domain("AP speed and goal radius must be >= 0"));
        }
        Ok(())
    }

    fn with_defaults(
        kind: ScenarioKind,
        world_size_m: f64,
        vehicle_starts: Vec<Pose>,
        vehicle_targets: Vec<Pose>,
        ap_starts: Vec<Pose>,
    ) -> Self {
        Self {
            kind,
            world_size_m,
            vehicle_starts,
            vehicle_targets,
            ap_starts,
            goal_radius_m: DEFAULT_GOAL_RADIUS_M,
            dt_s: 1.0,
            max_steps: DEFAULT_MAX_STEPS,
            vehicle_speed_mps: DEFAULT_VEHICLE_SPEED_MPS,
            ap_speed_mps: DEFAULT_AP_SPEED_MPS,
        }
    }
}

fn check_layout(n_vehicles: usize, n_aps: usize, world_size: f64) -> Result<()> {
    if n_vehicles == 0 || n_aps == 0 {
        return Err(Error::domain("vehicle and AP counts must be >= 1"));
    }
    if !(world_size.is_finite() && world_size > 0.0) {
        return Err(Error::domain("world size must be > 0"));
    }
    let lane_spacing = world_size / (n_vehicles + 1) as f64;
    if lane_spacing < MIN_SPACING_M {
        return Err(Error::domain(format!(
            "{n_vehicles} vehicle lanes do not fit in a {world_size} m world"
        )));
    }
    Ok(())
}

/// Vehicles drive left to right on evenly spaced horizontal lanes.
fn vehicle_lanes(n_vehicles: usize, world_size: f64) -> (Vec<Pose>, Vec<Pose>) {
    let inset = LANE_INSET_FRAC * world_size;
    let lane_y = |i: usize| world_size * (i + 1) as f64 / (n_vehicles + 1) as f64;
    let starts = (0..n_vehicles).map(|i| Pose::new(inset, lane_y(i))).collect();
    let targets = (0..n_vehicles)
        .map(|i| Pose::new(world_size - inset, lane_y(i)))
        .collect();
    (starts, targets)
}

pub fn make_scenario1(n_vehicles: usize, n_aps: usize, world_size: f64) -> Result<Scenario> {
    check_layout(n_vehicles, n_aps, world_size)?;
    if world_size / (n_aps as f64) < MIN_SPACING_M {
        return Err(Error::domain(format!(
            "{n_aps} APs do not fit in one column of a {world_size} m world"
        )));
    }
    let aps = (0..n_aps)
        .map(|j| {
            Pose::new(
                world_size / 2.0,
                world_size * (j as f64 + 0.5) / n_aps as f64,
            )
        })
        .collect();
    let (starts, targets) = vehicle_lanes(n_vehicles, world_size);
    Ok(Scenario::with_defaults(
        ScenarioKind::Scenario1,
        world_size,
        starts,
        targets,
        aps,
    ))
}

/// Square formation. Four APs land on the inset corners; other counts are
/// spread evenly along the inset square's perimeter starting at the
/// lower-left corner.
pub fn make_scenario2(n_vehicles: usize, n_aps: usize, world_size: f64) -> Result<Scenario> {
    check_layout(n_vehicles, n_aps, world_size)?;
    let lo = CORNER_INSET_FRAC * world_size;
    let side = world_size - 2.0 * lo;
    let perimeter = 4.0 * side;
    if perimeter / (n_aps as f64) < MIN_SPACING_M {
        return Err(Error::domain(format!(
            "{n_aps} APs do not fit on the square perimeter"
        )));
    }
    let aps = (0..n_aps)
        .map(|j| {
            let s = perimeter * j as f64 / n_aps as f64;
            let (edge, along) = ((s / side).floor() as usize, s % side);
            match edge {
                0 => Pose::new(lo, lo + along),
                1 => Pose::new(lo + along, lo + side),
                2 => Pose::new(lo + side, lo + side - along),
                _ => Pose::new(lo + side - along, lo),
            }
        })
        .collect();
    let (starts, targets) = vehicle_lanes(n_vehicles, world_size);
    Ok(Scenario::with_defaults(
        ScenarioKind::Scenario2,
        world_size,
        starts,
        targets,
        aps,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub world_size_m: f64,
    pub goal_radius_m: f64,
    pub vehicles: Vec<VehicleState>,
    pub aps: Vec<ApState>,
    pub time_s: f64,
}

impl WorldState {
    /// Places every entity at its scenario start. Moving APs draw their
    /// first waypoint from `rng`; static APs consume nothing.
    pub fn from_scenario<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Self> {
        scenario.validate()?;
        let vehicles = scenario
            .vehicle_starts
            .iter()
            .zip(&scenario.vehicle_targets)
            .enumerate()
            .map(|(id, (&pose, &target))| VehicleState {
                id,
                pose,
                target,
                speed_mps: scenario.vehicle_speed_mps,
                arrived: pose.distance(&target) <= scenario.goal_radius_m,
            })
            .collect();
        let mut world = Self {
            world_size_m: scenario.world_size_m,
            goal_radius_m: scenario.goal_radius_m,
            vehicles,
            aps: Vec::with_capacity(scenario.n_aps()),
            time_s: 0.0,
        };
        for (id, &pose) in scenario.ap_starts.iter().enumerate() {
            let waypoint = if scenario.ap_speed_mps > 0.0 {
                world.random_point(rng)
            } else {
                pose
            };
            world.aps.push(ApState {
                id,
                pose,
                speed_mps: scenario.ap_speed_mps,
                waypoint,
            });
        }
        Ok(world)
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Pose {
        Pose::new(
            rng.random_range(0.0..=self.world_size_m),
            rng.random_range(0.0..=self.world_size_m),
        )
    }

    pub fn all_arrived(&self) -> bool {
        self.vehicles.iter().all(|v| v.arrived)
    }

    pub fn step_vehicles(&mut self, dt: f64) {
        let size = self.world_size_m;
        for v in self.vehicles.iter_mut().filter(|v| !v.arrived) {
            let (pose, _) = v.pose.advance_toward(v.target, v.speed_mps * dt);
            v.pose = pose.clamp_to(size);
            v.arrived = v.pose.distance(&v.target) <= self.goal_radius_m;
        }
    }

    /// Random-waypoint motion for the APs.
    pub fn step_aps<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        let size = self.world_size_m;
        for j in 0..self.aps.len() {
            let ap = &self.aps[j];
            if ap.speed_mps <= 0.0 {
                continue;
            }
            let (pose, reached) = ap.pose.advance_toward(ap.waypoint, ap.speed_mps * dt);
            let waypoint = if reached {
                self.random_point(rng)
            } else {
                ap.waypoint
            };
            let ap = &mut self.aps[j];
            ap.pose = pose.clamp_to(size);
            ap.waypoint = waypoint;
        }
    }

    /// Advances vehicles then APs by one tick and the clock by `dt`.
    pub fn step<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        self.step_vehicles(dt);
        self.step_aps(dt, rng);
        self.time_s += dt;
    }

    pub fn distance_matrix(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.vehicles.len(), self.aps.len()), |(i, j)| {
            self.vehicles[i].pose.distance(&self.aps[j].pose)
        })
    }
}
