//! Synthetic station generator with a known ground-truth theta.
//!
//! The indoor temperature is integrated forward from the energy balance,
//! `T(t+1) = T(t) + (L - S) / (c·M_z)`, with load and supply evaluated by
//! [`crate::models`]. A thermostat-like controller picks the HVAC mode and
//! actuator levels. Sensor noise is applied to the emitted records only;
//! the latent trajectory is always exact.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, TimeDelta, TimeZone, Timelike, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    interpolate_passengers, write_records, ColumnMap, FrameSeries, IngestError, SensorRecord,
};
use crate::models::{load, supply};
use crate::regression::{assemble, DEFAULT_MODE_FILTER};
use crate::types::{Frame, HvacMode, StationConstants, Theta};

/// Regressor columns correlated above this are flagged as not identifiable.
pub const COLLINEARITY_LIMIT: f64 = 0.99;

const TEMPERATURE_LIMITS: (f64, f64) = (-20.0, 60.0);

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("indoor temperature left [-20, 60] °C at step {step} ({temperature} °C)")]
    DivergedState { step: usize, temperature: f64 },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Diurnal outdoor temperature: `mean + amplitude·cos(2π(h - peak_hour)/24)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutdoorProfile {
    pub mean: f64,
    pub amplitude: f64,
    pub peak_hour: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayKind {
    /// Morning and evening rush-hour peaks.
    Weekday,
    /// Roughly flat from 08:00 to 20:00.
    Weekend,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassengerProfile {
    pub kind: DayKind,
    /// Passengers per day; rounded to a whole number.
    pub daily_total: f64,
}

/// Operating schedule and actuator sizing. Energies are per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HvacSchedule {
    /// HVAC may run in `[on_hour, off_hour)` (hours of the UTC day).
    pub on_hour: f64,
    pub off_hour: f64,
    pub setpoint: f64,
    /// Cooling starts at `setpoint + deadband/2` and stops at
    /// `setpoint - deadband/2`.
    pub deadband: f64,
    /// Proportional gain, J per step per K above setpoint.
    pub gain: f64,
    /// Largest refrigerator supply.
    pub capacity: f64,
    /// Smallest refrigerator supply while running.
    pub min_supply: f64,
    /// Chilled-water volume per step while the refrigerator runs.
    pub water_flow: f64,
    /// Refrigerator outlet temperature, °C.
    pub chilled_water_temp: f64,
    /// Use outdoor air when it is colder than the station.
    pub free_cooling: bool,
    /// Outdoor air must be at least this much colder to be used, K.
    pub free_cooling_margin: f64,
    pub fan_energy_max: f64,
    pub fan_energy_min: f64,
}

impl Default for HvacSchedule {
    fn default() -> Self {
        Self {
            on_hour: 5.0,
            off_hour: 23.0,
            setpoint: 26.0,
            deadband: 1.0,
            gain: 40_000.0,
            capacity: 150_000.0,
            min_supply: 7_500.0,
            water_flow: 6.0,
            chilled_water_temp: 7.0,
            free_cooling: true,
            free_cooling_margin: 0.5,
            fan_energy_max: 20_000.0,
            fan_energy_min: 1_000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Rounding step of temperature sensors, °C; 0 disables.
    pub quantization: f64,
    /// Standard deviation of additive Gaussian sensor noise, °C.
    pub std: f64,
}

impl NoiseModel {
    pub fn is_silent(&self) -> bool {
        self.quantization == 0.0 && self.std == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorLayout {
    pub indoor: usize,
    pub outdoor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub start: DateTime<Utc>,
    /// Number of steps.
    pub duration: usize,
    /// Defaults to the setpoint.
    pub initial_temperature: Option<f64>,
    pub outdoor: OutdoorProfile,
    pub passengers: PassengerProfile,
    pub hvac: HvacSchedule,
    pub theta_true: Theta,
    pub constants: StationConstants,
    pub noise: NoiseModel,
    pub sensors: SensorLayout,
    pub seed: u64,
}

impl Default for Scenario {
    /// Three weekdays at minute resolution, starting one step after
    /// midnight so every hour of every day is fully covered.
    fn default() -> Self {
        Self {
            start: Utc.with_ymd_and_hms(2013, 8, 21, 0, 1, 0).unwrap(),
            duration: 3 * 1440,
            initial_temperature: None,
            outdoor: OutdoorProfile {
                mean: 28.0,
                amplitude: 6.0,
                peak_hour: 14.0,
            },
            passengers: PassengerProfile {
                kind: DayKind::Weekday,
                daily_total: 40_000.0,
            },
            hvac: HvacSchedule::default(),
            theta_true: Theta::new(100.0, 5000.0, 2000.0),
            constants: StationConstants::new(1000.0, 0.5),
            noise: NoiseModel::default(),
            sensors: SensorLayout {
                indoor: 4,
                outdoor: 2,
            },
            seed: 0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: &str| Err(SynthError::InvalidScenario(msg.to_string()));
        if self.duration < 2 {
            return bad("duration must be at least 2 steps");
        }
        if !(self.outdoor.amplitude >= 0.0) {
            return bad("outdoor.amplitude must be non-negative");
        }
        if !(self.passengers.daily_total >= 0.0) {
            return bad("passengers.daily_total must be non-negative");
        }
        if !(self.noise.std >= 0.0 && self.noise.quantization >= 0.0) {
            return bad("noise parameters must be non-negative");
        }
        if self.sensors.indoor == 0 || self.sensors.outdoor == 0 {
            return bad("at least one indoor and one outdoor sensor required");
        }
        if !self.theta_true.is_feasible() {
            return bad("theta_true must satisfy c_p > 0, alpha > 0, beta_ac >= 0");
        }
        let h = &self.hvac;
        if !(h.capacity >= h.min_supply && h.min_supply >= 0.0 && h.gain >= 0.0) {
            return bad("hvac needs 0 <= min_supply <= capacity and gain >= 0");
        }
        if !(h.water_flow > 0.0) {
            return bad("hvac.water_flow must be positive");
        }
        if !(h.fan_energy_max >= h.fan_energy_min && h.fan_energy_min >= 0.0) {
            return bad("hvac needs 0 <= fan_energy_min <= fan_energy_max");
        }
        if !(h.deadband >= 0.0) {
            return bad("hvac.deadband must be non-negative");
        }
        self.constants
            .validate()
            .map_err(|e| SynthError::InvalidScenario(e.to_string()))
    }

    fn outdoor_at(&self, t: DateTime<Utc>) -> f64 {
        let h = hour_of_day(t);
        let o = &self.outdoor;
        o.mean + o.amplitude * (2.0 * PI * (h - o.peak_hour) / 24.0).cos()
    }

    fn scheduled(&self, t: DateTime<Utc>) -> bool {
        let h = hour_of_day(t);
        let (on, off) = (self.hvac.on_hour, self.hvac.off_hour);
        if on <= off {
            on <= h && h < off
        } else {
            h >= on || h < off
        }
    }
}

fn hour_of_day(t: DateTime<Utc>) -> f64 {
    f64::from(t.num_seconds_from_midnight()) / 3600.0 + f64::from(t.nanosecond()) / 3.6e12
}

/// Relative passenger intensity for the hour starting at `hour` (0..24).
fn hour_weight(kind: DayKind, hour: usize) -> f64 {
    let mid = hour as f64 + 0.5;
    let bump = |centre: f64, width: f64| (-(mid - centre).powi(2) / (2.0 * width * width)).exp();
    match kind {
        DayKind::Weekday => {
            if !(5.0..23.0).contains(&mid) {
                return 0.0;
            }
            0.25 + 2.5 * bump(8.0, 1.0) + 2.0 * bump(18.0, 1.2)
        }
        DayKind::Weekend => {
            if (8.0..20.0).contains(&mid) {
                1.0
            } else if (6.0..23.0).contains(&mid) {
                0.2
            } else {
                0.0
            }
        }
    }
}

/// Whole-passenger counts for the 24 hours of a day, summing exactly to
/// `daily_total` (rounded). Index `h` is the hour `[h, h+1)`.
pub fn hourly_profile(profile: &PassengerProfile) -> [f64; 24] {
    let total = profile.daily_total.round().max(0.0) as u64;
    let weights: Vec<f64> = (0..24).map(|h| hour_weight(profile.kind, h)).collect();
    let wsum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / wsum).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..24).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    let mut out = [0.0; 24];
    for (o, c) in out.iter_mut().zip(counts) {
        *o = c as f64;
    }
    out
}

/// Hour-boundary anchors inside `grid`: the count for the hour that ends at
/// each boundary.
fn passenger_anchors(
    profile: &PassengerProfile,
    grid: &[DateTime<Utc>],
) -> Vec<(DateTime<Utc>, f64)> {
    let hourly = hourly_profile(profile);
    grid.iter()
        .filter(|t| t.timestamp().rem_euclid(3600) == 0 && t.nanosecond() == 0)
        .map(|&t| {
            let hour = (t - TimeDelta::minutes(30)).hour() as usize;
            (t, hourly[hour])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub refrigerator_frames: usize,
    /// Largest absolute pairwise correlation between regressor columns on
    /// refrigerator frames; `None` when it cannot be computed.
    pub max_regressor_correlation: Option<f64>,
    pub identifiable: bool,
    pub mode_counts: [(HvacMode, usize); 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRun {
    /// Latent, noise-free frames.
    pub truth: FrameSeries,
    pub anchors: Vec<(DateTime<Utc>, f64)>,
    /// Sensor rows as they would be logged, noise included.
    pub records: Vec<SensorRecord>,
    pub diagnostics: RunDiagnostics,
}

struct Actuation {
    mode: HvacMode,
    refrigerator: f64,
    e_v: f64,
}

fn control(scenario: &Scenario, t_in: f64, t_out: f64, cooling: bool) -> Actuation {
    let h = &scenario.hvac;
    let k = &scenario.constants;
    if !cooling {
        return Actuation {
            mode: HvacMode::Off,
            refrigerator: 0.0,
            e_v: 0.0,
        };
    }
    let demand = (h.gain * (t_in - h.setpoint)).clamp(h.min_supply, h.capacity);
    let lift = t_in - t_out;
    if h.free_cooling && k.beta_v > 0.0 && lift > h.free_cooling_margin {
        // supply per unit of cube-root fan energy
        let per_unit = k.c * k.beta_v * lift;
        let max_air = per_unit * h.fan_energy_max.cbrt();
        if demand <= max_air {
            let e_v = (demand / per_unit)
                .powi(3)
                .clamp(h.fan_energy_min, h.fan_energy_max);
            return Actuation {
                mode: HvacMode::NewAir,
                refrigerator: 0.0,
                e_v,
            };
        }
        return Actuation {
            mode: HvacMode::Mixed,
            refrigerator: (demand - max_air).clamp(h.min_supply, h.capacity),
            e_v: h.fan_energy_max,
        };
    }
    Actuation {
        mode: HvacMode::Refrigerator,
        refrigerator: demand,
        e_v: 0.0,
    }
}

/// Runs the scenario forward.
pub fn simulate(scenario: &Scenario) -> Result<SimulatedRun, SynthError> {
    scenario.validate()?;
    let k = &scenario.constants;
    let theta = &scenario.theta_true;
    let h = &scenario.hvac;
    let grid: Vec<DateTime<Utc>> = (0..scenario.duration)
        .map(|i| scenario.start + TimeDelta::seconds(i64::from(k.step) * i as i64))
        .collect();

    let anchors = passenger_anchors(&scenario.passengers, &grid);
    let n_series = if anchors.is_empty() {
        vec![0.0; grid.len()]
    } else {
        interpolate_passengers(&anchors, &grid, k.step)?
    };

    let capacity = k.zone_capacity();
    let mut t_in = scenario.initial_temperature.unwrap_or(h.setpoint);
    let mut cooling = false;
    let mut frames = Vec::with_capacity(grid.len());
    for (i, &t) in grid.iter().enumerate() {
        if !(TEMPERATURE_LIMITS.0..=TEMPERATURE_LIMITS.1).contains(&t_in) {
            return Err(SynthError::DivergedState {
                step: i,
                temperature: t_in,
            });
        }
        let t_out = scenario.outdoor_at(t);
        if !scenario.scheduled(t) || t_in <= h.setpoint - h.deadband / 2.0 {
            cooling = false;
        } else if t_in >= h.setpoint + h.deadband / 2.0 {
            cooling = true;
        }
        let act = control(scenario, t_in, t_out, cooling);
        let (v_cool_w, lift) = if act.refrigerator > 0.0 {
            (
                h.water_flow,
                act.refrigerator / (theta.beta_ac * h.water_flow),
            )
        } else {
            (0.0, 0.0)
        };
        let mut frame = Frame {
            t_in,
            t_out,
            n: n_series[i],
            t_water_in: h.chilled_water_temp + lift,
            t_water_out: h.chilled_water_temp,
            v_cool_w,
            e_v: act.e_v,
            mode: act.mode,
            delta: None,
        };
        let net = load(&frame, theta, k).total - supply(&frame, theta, k).total;
        let next = t_in + net / capacity;
        if i + 1 < grid.len() {
            frame.delta = Some(next - t_in);
        }
        frames.push(frame);
        t_in = next;
    }

    let truth = FrameSeries {
        start: scenario.start,
        step: k.step,
        frames,
    };
    let records = observe(scenario, &truth, &anchors);
    let diagnostics = diagnose(&truth, k);
    match diagnostics.max_regressor_correlation {
        Some(c) if c > COLLINEARITY_LIMIT => {
            log::warn!("regressor columns nearly collinear (max |corr| = {c:.4}); recovery is not expected")
        }
        None => log::warn!(
            "too few refrigerator frames to check identifiability; recovery is not expected"
        ),
        _ => {}
    }
    Ok(SimulatedRun {
        truth,
        anchors,
        records,
        diagnostics,
    })
}

fn observe(
    scenario: &Scenario,
    truth: &FrameSeries,
    anchors: &[(DateTime<Utc>, f64)],
) -> Vec<SensorRecord> {
    let noise = scenario.noise;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let normal = Normal::new(0.0, noise.std).expect("std validated non-negative");
    let mut sense = |value: f64| -> f64 {
        let mut v = value;
        if noise.std > 0.0 {
            v += normal.sample(&mut rng);
        }
        if noise.quantization > 0.0 {
            v = (v / noise.quantization).round() * noise.quantization;
        }
        v
    };
    let mut anchor_iter = anchors.iter().peekable();
    truth
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let timestamp = truth.timestamp(i);
            let passengers = match anchor_iter.peek() {
                Some((t, c)) if *t == timestamp => {
                    anchor_iter.next();
                    Some(*c)
                }
                _ => None,
            };
            SensorRecord {
                timestamp,
                indoor_temps: (0..scenario.sensors.indoor)
                    .map(|_| Some(sense(f.t_in)))
                    .collect(),
                outdoor_temps: (0..scenario.sensors.outdoor)
                    .map(|_| Some(sense(f.t_out)))
                    .collect(),
                t_water_in: Some(sense(f.t_water_in)),
                t_water_out: Some(sense(f.t_water_out)),
                v_cool_w: Some(f.v_cool_w),
                e_v: Some(f.e_v),
                passengers,
            }
        })
        .collect()
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Largest absolute pairwise correlation of the regressor columns. A
/// constant column counts as fully collinear.
pub fn max_regressor_correlation(rows: &[[f64; 3]]) -> Option<f64> {
    if rows.len() < 3 {
        return None;
    }
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<_>>();
    let cols = [col(0), col(1), col(2)];
    let mut worst: f64 = 0.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        worst = worst.max(pearson(&cols[i], &cols[j]).map_or(1.0, f64::abs));
    }
    Some(worst)
}

fn diagnose(truth: &FrameSeries, constants: &StationConstants) -> RunDiagnostics {
    let mut mode_counts = HvacMode::ALL.map(|m| (m, 0));
    for f in &truth.frames {
        if let Some(slot) = mode_counts.iter_mut().find(|(m, _)| *m == f.mode) {
            slot.1 += 1;
        }
    }
    let (refrigerator_frames, max_corr) = match assemble(truth, constants, DEFAULT_MODE_FILTER) {
        Ok(sys) => (sys.len(), max_regressor_correlation(&sys.rows)),
        Err(_) => (0, None),
    };
    RunDiagnostics {
        refrigerator_frames,
        max_regressor_correlation: max_corr,
        identifiable: max_corr.is_some_and(|c| c <= COLLINEARITY_LIMIT),
        mode_counts,
    }
}

/// Writes the run's sensor records in the ingest CSV schema.
pub fn write_csv<W: Write>(run: &SimulatedRun, writer: W) -> Result<(), SynthError> {
    write_records(&run.records, &ColumnMap::default(), writer)?;
    Ok(())
}

pub fn emit_csv(run: &SimulatedRun, path: impl AsRef<Path>) -> Result<(), SynthError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(run, &mut w)?;
    w.flush()?;
    Ok(())
}
