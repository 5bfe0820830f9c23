//! Deterministic synthetic traffic.
//!
//! Vehicles move radially toward (or away from) the robot along a fixed
//! approach angle. Every tick, each vehicle's true state is gated against
//! the radar coverage; a detection is emitted only if the true state is
//! covered, and only the emitted record is perturbed by Gaussian noise.
//!
//! Window labels come from noise-free ground truth. The crossing decision
//! is taken at the window end, so a window is unsafe iff some real
//! (non-ghost) vehicle that has appeared by then will reach the robot,
//! following its scripted kinematics, less than `ttc_threshold` seconds
//! later. Vehicles that already passed during the window do not count.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{wrap_angle, DomainError, Label, Sensor, TrackRecord, DEFAULT_WINDOW_S};
use crate::exec;
use crate::ingest::AnnotationRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SynthError> {
    Err(SynthError::InvalidScript(msg.into()))
}

/// Dual-coverage automotive radar: narrow long-range beam plus wide mid-range beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    pub long_range_m: f64,
    pub long_fov_deg: f64,
    pub mid_range_m: f64,
    pub mid_fov_deg: f64,
    pub range_noise_m: f64,
    pub velocity_noise_mps: f64,
    pub angle_noise_deg: f64,
    pub rate_hz: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            long_range_m: 174.0,
            long_fov_deg: 10.0,
            mid_range_m: 60.0,
            mid_fov_deg: 45.0,
            range_noise_m: 0.5,
            velocity_noise_mps: 0.25,
            angle_noise_deg: 0.5,
            rate_hz: 10.0,
        }
    }
}

impl SensorModel {
    pub fn noise_free() -> Self {
        SensorModel {
            range_noise_m: 0.0,
            velocity_noise_mps: 0.0,
            angle_noise_deg: 0.0,
            ..Default::default()
        }
    }

    /// Whether a true state `(range, angle)` lies in either coverage region.
    pub fn covers(&self, range: f64, angle: f64) -> bool {
        let a = angle.abs();
        range >= 0.0
            && ((range <= self.long_range_m && a <= self.long_fov_deg)
                || (range <= self.mid_range_m && a <= self.mid_fov_deg))
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let pos = [
            self.long_range_m,
            self.long_fov_deg,
            self.mid_range_m,
            self.mid_fov_deg,
            self.rate_hz,
        ];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return invalid("sensor ranges, fields of view and rate must be > 0");
        }
        let noise = [
            self.range_noise_m,
            self.velocity_noise_mps,
            self.angle_noise_deg,
        ];
        if noise.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return invalid("noise standard deviations must be >= 0");
        }
        Ok(())
    }
}

/// Speed over time since spawn. Speeds are toward the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeedProfile {
    /// Negative speed means receding.
    Constant { v: f64 },
    /// Brakes at `a < 0` and stays stopped once the speed reaches zero.
    Decelerating { v0: f64, a: f64 },
    /// `a1` until `t_switch` (stopping at zero if it gets there), then `a2`.
    DecelerateThenAccelerate {
        v0: f64,
        a1: f64,
        t_switch: f64,
        a2: f64,
    },
}

/// One constant-acceleration phase with the speed clamped at zero once braking stops it.
#[derive(Debug, Clone, Copy)]
struct Phase {
    u: f64,
    a: f64,
}

impl Phase {
    fn stop_time(&self) -> f64 {
        if self.a < 0.0 && self.u >= 0.0 {
            self.u / -self.a
        } else {
            f64::INFINITY
        }
    }

    /// (distance covered, speed) after `s` seconds.
    fn advance(&self, s: f64) -> (f64, f64) {
        let ts = self.stop_time();
        if s >= ts {
            (self.u * self.u / (2.0 * -self.a), 0.0)
        } else {
            (self.u * s + 0.5 * self.a * s * s, self.u + self.a * s)
        }
    }

    /// Earliest time to cover `d >= 0`, if it ever happens.
    fn time_to_cover(&self, d: f64) -> Option<f64> {
        if d <= 0.0 {
            return Some(0.0);
        }
        if self.a == 0.0 {
            return (self.u > 0.0).then(|| d / self.u);
        }
        let disc = self.u * self.u + 2.0 * self.a * d;
        if disc < 0.0 {
            return None;
        }
        let denom = self.u + disc.sqrt();
        if denom <= 0.0 {
            return None;
        }
        let t = 2.0 * d / denom;
        (t <= self.stop_time()).then_some(t)
    }
}

impl SpeedProfile {
    fn phases(&self) -> (Phase, Option<(f64, f64)>) {
        match *self {
            SpeedProfile::Constant { v } => (Phase { u: v, a: 0.0 }, None),
            SpeedProfile::Decelerating { v0, a } => (Phase { u: v0, a }, None),
            SpeedProfile::DecelerateThenAccelerate {
                v0,
                a1,
                t_switch,
                a2,
            } => (Phase { u: v0, a: a1 }, Some((t_switch, a2))),
        }
    }

    /// (distance covered toward the robot, speed) `tau` seconds after spawn.
    pub fn advance(&self, tau: f64) -> (f64, f64) {
        let (p1, second) = self.phases();
        match second {
            Some((ts, a2)) if tau > ts => {
                let (d1, v1) = p1.advance(ts);
                let (d2, v2) = Phase { u: v1, a: a2 }.advance(tau - ts);
                (d1 + d2, v2)
            }
            _ => p1.advance(tau),
        }
    }

    /// Time after spawn at which distance `d` has been covered.
    pub fn time_to_cover(&self, d: f64) -> Option<f64> {
        let (p1, second) = self.phases();
        match second {
            None => p1.time_to_cover(d),
            Some((ts, a2)) => match p1.time_to_cover(d) {
                Some(t) if t <= ts => Some(t),
                _ => {
                    let (d1, v1) = p1.advance(ts);
                    Phase { u: v1, a: a2 }.time_to_cover(d - d1).map(|t| ts + t)
                }
            },
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        match *self {
            SpeedProfile::Constant { v } if v.is_finite() => Ok(()),
            SpeedProfile::Decelerating { v0, a }
                if v0 >= 0.0 && a < 0.0 && v0.is_finite() && a.is_finite() =>
            {
                Ok(())
            }
            SpeedProfile::DecelerateThenAccelerate {
                v0,
                a1,
                t_switch,
                a2,
            } if v0 >= 0.0
                && t_switch >= 0.0
                && [v0, a1, t_switch, a2].iter().all(|x| x.is_finite()) =>
            {
                Ok(())
            }
            ref p => invalid(format!("bad speed profile {p:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    Left,
    Right,
}

impl Side {
    pub fn sensor(self) -> Sensor {
        match self {
            Side::Left => Sensor::RadarLeft,
            Side::Right => Sensor::RadarRight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleScript {
    pub spawn_time: f64,
    pub initial_range: f64,
    /// Degrees off the boresight of the radar on `side`.
    pub angle: f64,
    pub profile: SpeedProfile,
    #[serde(default)]
    pub side: Side,
    /// Spurious track with no physical object; never affects labels.
    #[serde(default)]
    pub ghost: bool,
    /// Detections stop this long after spawn. Required for ghosts.
    #[serde(default)]
    pub lifetime: Option<f64>,
}

impl VehicleScript {
    pub fn constant(spawn_time: f64, initial_range: f64, angle: f64, v: f64) -> Self {
        VehicleScript {
            spawn_time,
            initial_range,
            angle,
            profile: SpeedProfile::Constant { v },
            side: Side::Left,
            ghost: false,
            lifetime: None,
        }
    }

    pub fn on_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    pub fn as_ghost(mut self, lifetime: f64) -> Self {
        self.ghost = true;
        self.lifetime = Some(lifetime);
        self
    }

    /// True `(range, speed)` at absolute time `t`, or `None` before spawn
    /// and once the vehicle has reached the robot.
    pub fn true_state(&self, t: f64) -> Option<(f64, f64)> {
        if t < self.spawn_time {
            return None;
        }
        let (d, v) = self.profile.advance(t - self.spawn_time);
        let r = self.initial_range - d;
        (r > 0.0).then_some((r, v))
    }

    /// Whether the tracker reports this vehicle at `t` (ignoring coverage).
    pub fn tracked_at(&self, t: f64) -> bool {
        match self.lifetime {
            Some(l) => t < self.spawn_time + l,
            None => true,
        }
    }

    /// Absolute time at which the range reaches zero; `+inf` if never.
    pub fn arrival_time(&self) -> f64 {
        self.profile
            .time_to_cover(self.initial_range)
            .map_or(f64::INFINITY, |t| self.spawn_time + t)
    }

    fn validate(&self, episode: f64) -> Result<(), SynthError> {
        if !(self.initial_range > 0.0 && self.initial_range.is_finite()) {
            return invalid(format!("initial range {} must be > 0", self.initial_range));
        }
        if !self.angle.is_finite() {
            return invalid("angle must be finite");
        }
        if !(self.spawn_time >= 0.0 && self.spawn_time < episode) {
            return invalid(format!(
                "spawn time {} outside episode [0, {episode})",
                self.spawn_time
            ));
        }
        if let Some(l) = self.lifetime {
            if !(l > 0.0 && l.is_finite()) {
                return invalid("lifetime must be > 0");
            }
        } else if self.ghost {
            return invalid("ghost scripts need a lifetime");
        }
        self.profile.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_site")]
    pub site_id: String,
    pub episode_length: f64,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub ttc_threshold: f64,
    #[serde(default)]
    pub sensor: SensorModel,
    #[serde(default, rename = "vehicle")]
    pub vehicles: Vec<VehicleScript>,
}

fn default_site() -> String {
    "synthetic".to_string()
}
fn default_window() -> f64 {
    DEFAULT_WINDOW_S
}
fn default_threshold() -> f64 {
    10.0
}

impl Scenario {
    pub fn new(name: &str, episode_length: f64, vehicles: Vec<VehicleScript>) -> Self {
        Scenario {
            name: name.to_string(),
            site_id: default_site(),
            episode_length,
            window: DEFAULT_WINDOW_S,
            seed: 0,
            ttc_threshold: default_threshold(),
            sensor: SensorModel::default(),
            vehicles,
        }
    }

    pub fn with_site(mut self, site: &str) -> Self {
        self.site_id = site.to_string();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn num_windows(&self) -> usize {
        (self.episode_length / self.window).round() as usize
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.sensor.validate()?;
        if !(self.window > 0.0 && self.episode_length > 0.0) {
            return invalid("window and episode length must be > 0");
        }
        let ratio = self.episode_length / self.window;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return invalid(format!(
                "episode length {} is not a multiple of the window {}",
                self.episode_length, self.window
            ));
        }
        if self.ttc_threshold.is_nan() || self.ttc_threshold <= 0.0 {
            return invalid("ttc threshold must be > 0");
        }
        for v in &self.vehicles {
            v.validate(self.episode_length)?;
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self, SynthError> {
        let sc: Scenario = toml::from_str(s)
            .map_err(|e| SynthError::InvalidScript(e.to_string().trim_end().to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

/// Oracle label of the window ending at `end`: unsafe iff a spawned real
/// vehicle has a noise-free time to arrival from `end` in `[0, threshold)`.
pub fn oracle_label(vehicles: &[VehicleScript], end: f64, threshold: f64) -> Label {
    let threat = vehicles.iter().filter(|v| !v.ghost).any(|v| {
        let ttc = v.arrival_time() - end;
        v.spawn_time < end && (0.0..threshold).contains(&ttc)
    });
    Label::from_bool_safe(!threat)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub scenario: String,
    pub site_id: String,
    pub records: Vec<TrackRecord>,
    pub annotations: Vec<AnnotationRecord>,
}

impl SimulationRun {
    pub fn labels(&self) -> Vec<Label> {
        self.annotations.iter().map(|a| a.label).collect()
    }
}

pub fn simulate(sc: &Scenario) -> Result<SimulationRun, SynthError> {
    sc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let s = &sc.sensor;
    let noise = |sd: f64| Normal::new(0.0, sd).expect("validated std");
    let (nr, nv, na) = (
        noise(s.range_noise_m),
        noise(s.velocity_noise_mps),
        noise(s.angle_noise_deg),
    );
    let ticks = (sc.episode_length * s.rate_hz).round() as u64;
    let mut records = Vec::new();
    for i in 0..ticks {
        let t = i as f64 / s.rate_hz;
        if t >= sc.episode_length {
            break;
        }
        for (id, veh) in sc.vehicles.iter().enumerate() {
            if !veh.tracked_at(t) {
                continue;
            }
            let Some((r, v)) = veh.true_state(t) else {
                continue;
            };
            if !s.covers(r, veh.angle) {
                continue;
            }
            let mut sample =
                |d: &Normal<f64>, sd: f64| if sd > 0.0 { d.sample(&mut rng) } else { 0.0 };
            let r_obs = (r + sample(&nr, s.range_noise_m)).max(0.0);
            let v_obs = v + sample(&nv, s.velocity_noise_mps);
            let a_obs = wrap_angle(veh.angle + sample(&na, s.angle_noise_deg));
            records.push(TrackRecord::new(
                t,
                veh.side.sensor(),
                id as u64,
                r_obs,
                v_obs,
                a_obs,
            )?);
        }
    }
    let annotations = (0..sc.num_windows())
        .map(|w| {
            let start = w as f64 * sc.window;
            let end = (w + 1) as f64 * sc.window;
            AnnotationRecord::new(
                start,
                end,
                oracle_label(&sc.vehicles, end, sc.ttc_threshold),
            )
            .expect("window has positive length")
        })
        .collect();
    Ok(SimulationRun {
        scenario: sc.name.clone(),
        site_id: sc.site_id.clone(),
        records,
        annotations,
    })
}

pub fn simulate_all(scenarios: &[Scenario]) -> Result<Vec<SimulationRun>, SynthError> {
    exec::try_map(scenarios, simulate)
}

/// Back-to-back concatenation: run `i` is shifted by the summed episode
/// lengths before it and its object ids by `i · id_stride`.
pub fn concat_runs(
    name: &str,
    site_id: &str,
    runs: &[SimulationRun],
    episode_lengths: &[f64],
    id_stride: u64,
) -> Result<SimulationRun, SynthError> {
    let mut records = Vec::new();
    let mut annotations = Vec::new();
    let mut offset = 0.0;
    for (i, (run, len)) in runs.iter().zip(episode_lengths).enumerate() {
        for r in &run.records {
            records.push(r.shifted(offset, i as u64 * id_stride)?);
        }
        for a in &run.annotations {
            annotations.push(
                AnnotationRecord::new(a.interval_start + offset, a.interval_end + offset, a.label)
                    .map_err(|e| SynthError::InvalidScript(e.to_string()))?,
            );
        }
        offset += len;
    }
    Ok(SimulationRun {
        scenario: name.to_string(),
        site_id: site_id.to_string(),
        records,
        annotations,
    })
}

/// Named scenarios covering the typical and the failure cases.
pub fn scenario_library() -> Vec<Scenario> {
    use SpeedProfile::*;
    let veh = |spawn, r0, angle, profile| VehicleScript {
        spawn_time: spawn,
        initial_range: r0,
        angle,
        profile,
        side: Side::Left,
        ghost: false,
        lifetime: None,
    };
    vec![
        Scenario::new("clear_road", 10.0, vec![]),
        // TTC 5 s: reaches the robot at t = 5
        Scenario::new(
            "fast_approach",
            10.0,
            vec![VehicleScript::constant(0.0, 100.0, 5.0, 20.0)],
        ),
        // TTC 20 s
        Scenario::new(
            "slow_far",
            5.0,
            vec![VehicleScript::constant(0.0, 100.0, 5.0, 5.0)],
        ),
        // brakes from 12 m/s at 2 m/s² and stops 14 m short of the robot
        Scenario::new(
            "decelerating_yield",
            10.0,
            vec![veh(0.0, 50.0, 4.0, Decelerating { v0: 12.0, a: -2.0 })],
        ),
        // slows for the first half of the window, then speeds up
        Scenario::new(
            "slow_then_speed",
            10.0,
            vec![veh(
                0.0,
                90.0,
                4.0,
                DecelerateThenAccelerate {
                    v0: 8.0,
                    a1: -2.0,
                    t_switch: 2.5,
                    a2: 2.5,
                },
            )],
        ),
        // two short-lived spurious close tracks, no real traffic
        Scenario::new(
            "ghost_burst",
            10.0,
            vec![
                VehicleScript::constant(1.0, 25.0, -20.0, 3.0).as_ghost(0.6),
                VehicleScript::constant(6.5, 12.0, 25.0, 6.0)
                    .on_side(Side::Right)
                    .as_ghost(0.4),
            ],
        ),
        // fast car beyond long-range coverage: unsafe while still unseen
        Scenario::new(
            "late_appearance",
            10.0,
            vec![VehicleScript::constant(0.0, 330.0, 2.0, 30.0)],
        ),
        Scenario::new(
            "two_lane_mixed",
            30.0,
            vec![
                VehicleScript::constant(0.0, 120.0, 6.0, 15.0),
                VehicleScript::constant(17.0, 150.0, -6.0, 10.0).on_side(Side::Right),
                VehicleScript::constant(2.0, 30.0, 30.0, -5.0).on_side(Side::Right),
                VehicleScript::constant(8.0, 170.0, 3.0, 4.0),
            ],
        ),
    ]
}

pub fn library_scenario(name: &str) -> Result<Scenario, SynthError> {
    scenario_library()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| SynthError::UnknownScenario(name.to_string()))
}

/// Relative frequency of each window type in a random corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficMix {
    pub constant: f64,
    pub decelerating_yield: f64,
    pub slow_then_speed: f64,
    /// Per-window probability of an added ghost track.
    pub ghost_probability: f64,
}

impl Default for TrafficMix {
    fn default() -> Self {
        TrafficMix::constant_only()
    }
}

impl TrafficMix {
    pub fn constant_only() -> Self {
        TrafficMix {
            constant: 1.0,
            decelerating_yield: 0.0,
            slow_then_speed: 0.0,
            ghost_probability: 0.0,
        }
    }

    pub fn mixed() -> Self {
        TrafficMix {
            constant: 0.5,
            decelerating_yield: 0.3,
            slow_then_speed: 0.2,
            ghost_probability: 0.1,
        }
    }
}

/// Behaviour mix of constant-velocity traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantTraffic {
    /// Probability that a window has no vehicles at all.
    pub empty_probability: f64,
    /// Relative weights of the three behaviours.
    pub through: f64,
    pub stopped: f64,
    pub receding: f64,
    /// Approach speed of through traffic, m/s.
    pub through_speed: (f64, f64),
    /// Probability that a vehicle appears after the window start.
    pub late_spawn_probability: f64,
}

impl Default for ConstantTraffic {
    fn default() -> Self {
        ConstantTraffic {
            empty_probability: 0.15,
            through: 0.55,
            stopped: 0.25,
            receding: 0.20,
            through_speed: (8.0, 16.0),
            late_spawn_probability: 0.1,
        }
    }
}

/// Random single-window scenarios for one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub windows: usize,
    pub seed: u64,
    pub site_id: String,
    pub mix: TrafficMix,
    pub traffic: ConstantTraffic,
    /// Extra constant-velocity vehicles per window, uniform in `0..=max`.
    pub max_extra_vehicles: usize,
    pub sensor: SensorModel,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            windows: 100,
            seed: 0,
            site_id: "synthetic".to_string(),
            mix: TrafficMix::default(),
            traffic: ConstantTraffic::default(),
            max_extra_vehicles: 1,
            sensor: SensorModel::default(),
        }
    }
}

fn random_side(rng: &mut ChaCha8Rng) -> Side {
    if rng.random_bool(0.5) {
        Side::Left
    } else {
        Side::Right
    }
}

/// Closest range an approaching random vehicle may reach by the window end.
const MIN_END_RANGE_M: f64 = 5.0;

fn random_constant(rng: &mut ChaCha8Rng, t: &ConstantTraffic, window: f64) -> VehicleScript {
    let side = random_side(rng);
    let spawn = if rng.random_bool(t.late_spawn_probability) {
        rng.random_range(0.0..window * 0.6)
    } else {
        0.0
    };
    let total = t.through + t.stopped + t.receding;
    let x = rng.random_range(0.0..total.max(f64::MIN_POSITIVE));
    let v = if x < t.through {
        rng.random_range(t.through_speed.0..t.through_speed.1)
    } else if x < t.through + t.stopped {
        rng.random_range(-0.2..0.2)
    } else {
        -rng.random_range(t.through_speed.0 * 0.4..t.through_speed.1)
    };
    // Start inside a coverage region, far enough out that an approaching
    // vehicle is still short of the robot when the window ends.
    let min_r = if v > 0.0 {
        v * (window - spawn) + MIN_END_RANGE_M
    } else {
        0.0
    };
    let mid = (8.0f64.max(min_r), 58.0, 40.0);
    let long = (20.0f64.max(min_r), 170.0, 9.0);
    let (r_lo, r_hi, fov) = if mid.0 < mid.1 && rng.random_bool(0.4) {
        mid
    } else {
        long
    };
    let r0 = rng.random_range(r_lo..r_hi);
    let angle = rng.random_range(-fov..fov);
    VehicleScript::constant(spawn, r0, angle, v).on_side(side)
}

fn random_yield(rng: &mut ChaCha8Rng) -> VehicleScript {
    let v0 = rng.random_range(8.0..15.0);
    let stop_after = rng.random_range(2.5..6.0);
    let margin = rng.random_range(2.0..8.0);
    let r0 = v0 * stop_after / 2.0 + margin;
    VehicleScript {
        spawn_time: 0.0,
        initial_range: r0,
        angle: rng.random_range(-9.0..9.0),
        profile: SpeedProfile::Decelerating {
            v0,
            a: -v0 / stop_after,
        },
        side: random_side(rng),
        ghost: false,
        lifetime: None,
    }
}

fn random_slow_then_speed(rng: &mut ChaCha8Rng) -> VehicleScript {
    VehicleScript {
        spawn_time: 0.0,
        initial_range: rng.random_range(40.0..120.0),
        angle: rng.random_range(-9.0..9.0),
        profile: SpeedProfile::DecelerateThenAccelerate {
            v0: rng.random_range(8.0..14.0),
            a1: rng.random_range(-3.0..-1.5),
            t_switch: rng.random_range(1.5..3.0),
            a2: rng.random_range(2.0..4.0),
        },
        side: random_side(rng),
        ghost: false,
        lifetime: None,
    }
}

fn random_ghost(rng: &mut ChaCha8Rng, window: f64) -> VehicleScript {
    VehicleScript::constant(
        rng.random_range(0.0..window * 0.8),
        rng.random_range(5.0..40.0),
        rng.random_range(-40.0..40.0),
        rng.random_range(3.0..12.0),
    )
    .as_ghost(rng.random_range(0.2..0.8))
}

/// Builds `cfg.windows` independent single-window scenarios. Scenario `i`
/// has seed `cfg.seed + i` for its sensor noise.
pub fn random_corpus(cfg: &CorpusConfig) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let window = DEFAULT_WINDOW_S;
    let m = &cfg.mix;
    let total = m.constant + m.decelerating_yield + m.slow_then_speed;
    (0..cfg.windows)
        .map(|i| {
            let mut vehicles = Vec::new();
            if !rng.random_bool(cfg.traffic.empty_probability) {
                let pick = rng.random_range(0.0..total.max(f64::MIN_POSITIVE));
                if pick < m.constant {
                    vehicles.push(random_constant(&mut rng, &cfg.traffic, window));
                } else if pick < m.constant + m.decelerating_yield {
                    vehicles.push(random_yield(&mut rng));
                } else {
                    vehicles.push(random_slow_then_speed(&mut rng));
                }
                let extra = rng.random_range(0..=cfg.max_extra_vehicles);
                for _ in 0..extra {
                    vehicles.push(random_constant(&mut rng, &cfg.traffic, window));
                }
            }
            if m.ghost_probability > 0.0 && rng.random_bool(m.ghost_probability.min(1.0)) {
                vehicles.push(random_ghost(&mut rng, window));
            }
            Scenario {
                name: format!("{}_{i:05}", cfg.site_id),
                site_id: cfg.site_id.clone(),
                episode_length: window,
                window,
                seed: cfg.seed.wrapping_add(i as u64),
                ttc_threshold: default_threshold(),
                sensor: cfg.sensor.clone(),
                vehicles,
            }
        })
        .collect()
}

/// Summary of window labels per scenario name.
pub fn label_summary(runs: &[SimulationRun]) -> BTreeMap<String, (usize, usize)> {
    let mut out = BTreeMap::new();
    for r in runs {
        let e = out.entry(r.scenario.clone()).or_insert((0, 0));
        for l in r.labels() {
            if l.is_safe() {
                e.1 += 1;
            } else {
                e.0 += 1;
            }
        }
    }
    out
}
