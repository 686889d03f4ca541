//! Sensor CSV ingestion.
//!
//! Raw rows are parsed into [`SensorRecord`]s, aligned to a fixed step grid,
//! short gaps are filled per channel, redundant temperature sensors are
//! averaged, hourly passenger counts are spread over the grid and every
//! sample is classified into an [`HvacMode`].
//!
//! Passenger anchors follow the ticketing convention: the count attached to
//! boundary `H` is the number of passengers seen during `(H - 1h, H]`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Frame, HvacMode, StationConstants};

const SECS_PER_HOUR: i64 = 3600;

/// Fixed-point resolution used when spreading an hourly count over its
/// steps. Counts that are multiples of it (whole passengers included) split
/// into multiples of it, so sums across hours stay exact too.
const PASSENGER_UNIT: f64 = 1.0 / 1_048_576.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Indoor,
    Outdoor,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Indoor => "indoor",
            Side::Outdoor => "outdoor",
        })
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: bad timestamp `{value}`")]
    BadTimestamp { line: u64, value: String },
    #[error("line {line}: column `{column}` is not a number: `{value}`")]
    BadValue {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: column `{column}` is negative")]
    NegativeValue { line: u64, column: String },
    #[error("no {0} temperature reading present")]
    AllChannelsMissing(Side),
    #[error("no passenger anchors")]
    EmptyAnchors,
    #[error("passenger anchors are not strictly increasing at {0}")]
    UnsortedAnchors(DateTime<Utc>),
    #[error("negative passenger anchor at {0}")]
    NegativeAnchor(DateTime<Utc>),
    #[error("timestamps not strictly increasing at {0}")]
    UnsortedTimestamps(DateTime<Utc>),
    #[error("timestamp {0} is not on the {1} s step grid")]
    Misaligned(DateTime<Utc>, u32),
    #[error("gap in `{channel}` starting at {at} cannot be filled")]
    GapTooLong { at: DateTime<Utc>, channel: String },
    #[error("series too short: {0} frames (need at least 2)")]
    TooShort(usize),
}

/// Maps CSV header names onto record fields.
///
/// Indoor and outdoor sensors are matched by prefix so any number of them
/// may be present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub timestamp: String,
    pub indoor_prefix: String,
    pub outdoor_prefix: String,
    pub t_water_in: String,
    pub t_water_out: String,
    pub v_cool_w: String,
    pub e_v: String,
    pub passengers: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            indoor_prefix: "t_in_".into(),
            outdoor_prefix: "t_out_".into(),
            t_water_in: "t_water_in".into(),
            t_water_out: "t_water_out".into(),
            v_cool_w: "v_cool_w".into(),
            e_v: "e_v".into(),
            passengers: "passengers".into(),
        }
    }
}

/// One raw CSV row. Empty cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecord {
    pub timestamp: DateTime<Utc>,
    pub indoor_temps: Vec<Option<f64>>,
    pub outdoor_temps: Vec<Option<f64>>,
    pub t_water_in: Option<f64>,
    pub t_water_out: Option<f64>,
    pub v_cool_w: Option<f64>,
    pub e_v: Option<f64>,
    /// Hourly count, populated on hour-boundary rows only.
    pub passengers: Option<f64>,
}

struct ColumnIndex {
    timestamp: usize,
    indoor: Vec<usize>,
    outdoor: Vec<usize>,
    t_water_in: usize,
    t_water_out: usize,
    v_cool_w: usize,
    e_v: usize,
    passengers: Option<usize>,
}

impl ColumnIndex {
    fn resolve(headers: &csv::StringRecord, map: &ColumnMap) -> Result<Self, IngestError> {
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
        };
        let with_prefix = |prefix: &str| -> Result<Vec<usize>, IngestError> {
            let cols: Vec<usize> = headers
                .iter()
                .enumerate()
                .filter(|(_, h)| h.trim().starts_with(prefix))
                .map(|(i, _)| i)
                .collect();
            if cols.is_empty() {
                Err(IngestError::MissingColumn(format!("{prefix}*")))
            } else {
                Ok(cols)
            }
        };
        Ok(Self {
            timestamp: find(&map.timestamp)?,
            indoor: with_prefix(&map.indoor_prefix)?,
            outdoor: with_prefix(&map.outdoor_prefix)?,
            t_water_in: find(&map.t_water_in)?,
            t_water_out: find(&map.t_water_out)?,
            v_cool_w: find(&map.v_cool_w)?,
            e_v: find(&map.e_v)?,
            passengers: find(&map.passengers).ok(),
        })
    }
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
    ]
    .iter()
    .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
    .map(|naive| naive.and_utc())
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

pub fn parse_csv(
    path: impl AsRef<Path>,
    map: &ColumnMap,
) -> Result<Vec<SensorRecord>, IngestError> {
    parse_reader(File::open(path)?, map)
}

pub fn parse_reader<R: Read>(reader: R, map: &ColumnMap) -> Result<Vec<SensorRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = ColumnIndex::resolve(&headers, map)?;

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let cell = |i: usize| row.get(i).unwrap_or("");
        let number = |i: usize| -> Result<Option<f64>, IngestError> {
            let raw = cell(i);
            if raw.is_empty() {
                return Ok(None);
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(IngestError::BadValue {
                    line,
                    column: headers[i].to_string(),
                    value: raw.to_string(),
                }),
            }
        };
        let non_negative = |i: usize| -> Result<Option<f64>, IngestError> {
            let v = number(i)?;
            if v.is_some_and(|v| v < 0.0) {
                return Err(IngestError::NegativeValue {
                    line,
                    column: headers[i].to_string(),
                });
            }
            Ok(v)
        };

        let raw_ts = cell(idx.timestamp);
        let timestamp = parse_timestamp(raw_ts).ok_or_else(|| IngestError::BadTimestamp {
            line,
            value: raw_ts.to_string(),
        })?;
        out.push(SensorRecord {
            timestamp,
            indoor_temps: idx
                .indoor
                .iter()
                .map(|&i| number(i))
                .collect::<Result<_, _>>()?,
            outdoor_temps: idx
                .outdoor
                .iter()
                .map(|&i| number(i))
                .collect::<Result<_, _>>()?,
            t_water_in: number(idx.t_water_in)?,
            t_water_out: number(idx.t_water_out)?,
            v_cool_w: non_negative(idx.v_cool_w)?,
            e_v: non_negative(idx.e_v)?,
            passengers: idx.passengers.map(non_negative).transpose()?.flatten(),
        });
    }
    Ok(out)
}

/// Shortest text that parses back to the same f64, switching to exponent
/// form for very large or very small magnitudes.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !a.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Writes records in the ingest schema. Numbers use the shortest
/// representation that parses back to the same f64.
pub fn write_records<W: Write>(
    records: &[SensorRecord],
    map: &ColumnMap,
    writer: W,
) -> Result<(), IngestError> {
    let n_in = records
        .iter()
        .map(|r| r.indoor_temps.len())
        .max()
        .unwrap_or(1);
    let n_out = records
        .iter()
        .map(|r| r.outdoor_temps.len())
        .max()
        .unwrap_or(1);

    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![map.timestamp.clone()];
    header.extend((1..=n_in).map(|i| format!("{}{i}", map.indoor_prefix)));
    header.extend((1..=n_out).map(|i| format!("{}{i}", map.outdoor_prefix)));
    header.extend([
        map.t_water_in.clone(),
        map.t_water_out.clone(),
        map.v_cool_w.clone(),
        map.e_v.clone(),
        map.passengers.clone(),
    ]);
    wtr.write_record(&header)?;

    let fmt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    for r in records {
        let mut row = vec![format_timestamp(&r.timestamp)];
        row.extend((0..n_in).map(|i| fmt(r.indoor_temps.get(i).copied().flatten())));
        row.extend((0..n_out).map(|i| fmt(r.outdoor_temps.get(i).copied().flatten())));
        row.extend([
            fmt(r.t_water_in),
            fmt(r.t_water_out),
            fmt(r.v_cool_w),
            fmt(r.e_v),
            fmt(r.passengers),
        ]);
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

fn mean_present(values: &[Option<f64>]) -> Option<f64> {
    let (sum, count) = values
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Averages the redundant indoor and outdoor sensors of one record,
/// ignoring missing readings.
pub fn average_channels(record: &SensorRecord) -> Result<(f64, f64), IngestError> {
    let t_in =
        mean_present(&record.indoor_temps).ok_or(IngestError::AllChannelsMissing(Side::Indoor))?;
    let t_out = mean_present(&record.outdoor_temps)
        .ok_or(IngestError::AllChannelsMissing(Side::Outdoor))?;
    Ok((t_in, t_out))
}

/// Spreads hourly passenger counts over a step grid.
///
/// Counts are interpolated linearly in time between anchors (held flat
/// outside the anchor span) and then renormalised so the steps of each
/// anchored hour sum exactly to that hour's count. Steps that fall in an
/// hour without an anchor get the interpolated hourly rate scaled to one
/// step.
pub fn interpolate_passengers(
    anchors: &[(DateTime<Utc>, f64)],
    grid: &[DateTime<Utc>],
    step_secs: u32,
) -> Result<Vec<f64>, IngestError> {
    if anchors.is_empty() {
        return Err(IngestError::EmptyAnchors);
    }
    for w in anchors.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(IngestError::UnsortedAnchors(w[1].0));
        }
    }
    if let Some((t, _)) = anchors.iter().find(|(_, c)| !(*c >= 0.0)) {
        return Err(IngestError::NegativeAnchor(*t));
    }

    let secs: Vec<i64> = anchors.iter().map(|(t, _)| t.timestamp()).collect();
    let counts: Vec<f64> = anchors.iter().map(|(_, c)| *c).collect();
    let step = i64::from(step_secs.max(1));
    let steps_per_hour = (SECS_PER_HOUR / step).max(1) as usize;

    // hourly rate at time t
    let rate = |t: i64| -> f64 {
        let k = secs.partition_point(|&a| a < t);
        if k == 0 {
            counts[0]
        } else if k == secs.len() {
            counts[k - 1]
        } else if secs[k] == t {
            counts[k]
        } else {
            let (t0, t1) = (secs[k - 1], secs[k]);
            let f = (t - t0) as f64 / (t1 - t0) as f64;
            counts[k - 1] + (counts[k] - counts[k - 1]) * f
        }
    };

    // apportioned steps of the most recently used anchored hour
    let mut cached: Option<(usize, Vec<f64>, f64)> = None;
    let mut out = Vec::with_capacity(grid.len());
    for t in grid {
        let t = t.timestamp();
        let k = secs.partition_point(|&a| a < t);
        let bucket = (k < secs.len() && secs[k] - t < SECS_PER_HOUR).then_some(k);
        let Some(k) = bucket else {
            out.push(rate(t) * step as f64 / SECS_PER_HOUR as f64);
            continue;
        };
        if cached.as_ref().map(|c| c.0) != Some(k) {
            // weights[j] is the rate at (anchor - j * step)
            let weights: Vec<f64> = (0..steps_per_hour)
                .map(|j| rate(secs[k] - j as i64 * step))
                .collect();
            let total: f64 = weights.iter().sum();
            cached = Some((k, apportion(counts[k], &weights), total));
        }
        let (_, shares, total) = cached.as_ref().expect("filled above");
        let offset = secs[k] - t;
        if offset % step == 0 {
            out.push(shares[(offset / step) as usize]);
        } else if *total > 0.0 {
            out.push(counts[k] * rate(t) / total);
        } else {
            out.push(0.0);
        }
    }
    Ok(out)
}

/// Largest-remainder split of `count` proportional to `weights`.
///
/// Parts are whole multiples of [`PASSENGER_UNIT`] when `count` is, and
/// otherwise of the spacing between `count` and its predecessor float.
/// Either way every partial sum is representable and the parts add up to
/// `count` exactly.
fn apportion(count: f64, weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    if count <= 0.0 || total <= 0.0 {
        return vec![0.0; weights.len()];
    }
    let fixed = count / PASSENGER_UNIT;
    let unit = if fixed.fract() == 0.0 && fixed < 2f64.powi(53) {
        PASSENGER_UNIT
    } else {
        count - f64::from_bits(count.to_bits() - 1)
    };
    let units = (count / unit) as i64;
    let quotas: Vec<f64> = weights.iter().map(|w| units as f64 * w / total).collect();
    let mut parts: Vec<i64> = quotas.iter().map(|q| q.floor() as i64).collect();
    let mut remainder = units - parts.iter().sum::<i64>();

    let mut order: Vec<usize> = (0..parts.len()).collect();
    let frac = |i: usize| quotas[i] - quotas[i].floor();
    if remainder >= 0 {
        order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
        for &i in order.iter().cycle().take(remainder as usize) {
            parts[i] += 1;
        }
    } else {
        order.sort_by(|&a, &b| frac(a).total_cmp(&frac(b)).then(a.cmp(&b)));
        for &i in order.iter().cycle() {
            if remainder == 0 {
                break;
            }
            if parts[i] > 0 {
                parts[i] -= 1;
                remainder += 1;
            }
        }
    }
    parts.into_iter().map(|p| p as f64 * unit).collect()
}

/// How the ventilator idle level is decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdleThreshold {
    /// Fraction of the largest ventilator energy in the dataset.
    FractionOfMax(f64),
    /// Fixed energy per step.
    Absolute(f64),
}

/// Rule used to infer the HVAC mode from channel readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeRule {
    /// Ventilator energy at or below this level counts as idle.
    pub ventilator_idle: IdleThreshold,
    /// Water side is active when `v_cool_w · |t_water_in - t_water_out|`
    /// exceeds this value.
    pub water_active_above: f64,
}

impl Default for ModeRule {
    fn default() -> Self {
        Self {
            ventilator_idle: IdleThreshold::FractionOfMax(0.01),
            water_active_above: 0.0,
        }
    }
}

impl ModeRule {
    pub fn resolve(&self, max_e_v: f64) -> ModeThresholds {
        let ventilator_idle = match self.ventilator_idle {
            IdleThreshold::FractionOfMax(f) => f * max_e_v.max(0.0),
            IdleThreshold::Absolute(e) => e,
        };
        ModeThresholds {
            ventilator_idle,
            water_active_above: self.water_active_above,
        }
    }
}

/// A [`ModeRule`] with its data-dependent parts fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeThresholds {
    pub ventilator_idle: f64,
    pub water_active_above: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeChannels {
    pub t_water_in: f64,
    pub t_water_out: f64,
    pub v_cool_w: f64,
    pub e_v: f64,
}

pub fn classify_mode(ch: &ModeChannels, th: &ModeThresholds) -> HvacMode {
    let water = ch.v_cool_w * (ch.t_water_in - ch.t_water_out).abs() > th.water_active_above;
    let air = ch.e_v > th.ventilator_idle;
    match (air, water) {
        (true, true) => HvacMode::Mixed,
        (false, true) => HvacMode::Refrigerator,
        (true, false) => HvacMode::NewAir,
        (false, false) => HvacMode::Off,
    }
}

/// Gap-free, step-aligned frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSeries {
    pub start: DateTime<Utc>,
    /// Step in seconds.
    pub step: u32,
    pub frames: Vec<Frame>,
}

impl FrameSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn timestamp(&self, i: usize) -> DateTime<Utc> {
        self.start + TimeDelta::seconds(i64::from(self.step) * i as i64)
    }

    pub fn timestamps(&self) -> Vec<DateTime<Utc>> {
        (0..self.len()).map(|i| self.timestamp(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildOptions {
    /// Longest run of missing samples (per channel) that is filled by
    /// linear interpolation.
    pub max_gap: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { max_gap: 5 }
    }
}

const CHANNELS: [&str; 6] = [
    "t_in",
    "t_out",
    "t_water_in",
    "t_water_out",
    "v_cool_w",
    "e_v",
];

struct Aligned {
    start: DateTime<Utc>,
    grid: Vec<DateTime<Utc>>,
    /// channel-major, indexed like `CHANNELS`
    channels: [Vec<Option<f64>>; 6],
    n: Vec<f64>,
}

fn align(records: &[SensorRecord], step: u32, max_gap: usize) -> Result<Aligned, IngestError> {
    let Some(first) = records.first() else {
        return Err(IngestError::TooShort(0));
    };
    let start = first.timestamp;
    let step_i = i64::from(step);

    let mut slots = Vec::with_capacity(records.len());
    let mut prev: Option<i64> = None;
    for r in records {
        let dt = (r.timestamp - start).num_seconds();
        if prev.is_some_and(|p| dt <= p * step_i) {
            return Err(IngestError::UnsortedTimestamps(r.timestamp));
        }
        if dt % step_i != 0
            || r.timestamp.timestamp_subsec_nanos() != first.timestamp.timestamp_subsec_nanos()
        {
            return Err(IngestError::Misaligned(r.timestamp, step));
        }
        prev = Some(dt / step_i);
        slots.push((dt / step_i) as usize);
    }
    let len = slots.last().map_or(0, |s| s + 1);
    let grid: Vec<DateTime<Utc>> = (0..len)
        .map(|i| start + TimeDelta::seconds(step_i * i as i64))
        .collect();

    let mut channels: [Vec<Option<f64>>; 6] = Default::default();
    for c in channels.iter_mut() {
        *c = vec![None; len];
    }
    for (r, &slot) in records.iter().zip(&slots) {
        channels[0][slot] = mean_present(&r.indoor_temps);
        channels[1][slot] = mean_present(&r.outdoor_temps);
        channels[2][slot] = r.t_water_in;
        channels[3][slot] = r.t_water_out;
        channels[4][slot] = r.v_cool_w;
        channels[5][slot] = r.e_v;
    }
    for c in channels.iter_mut() {
        fill_short_gaps(c, max_gap);
    }

    let anchors: Vec<(DateTime<Utc>, f64)> = records
        .iter()
        .filter_map(|r| r.passengers.map(|p| (r.timestamp, p)))
        .collect();
    let n = interpolate_passengers(&anchors, &grid, step)?;

    Ok(Aligned {
        start,
        grid,
        channels,
        n,
    })
}

/// Linearly fills interior runs of `None` no longer than `max_gap`.
fn fill_short_gaps(values: &mut [Option<f64>], max_gap: usize) {
    let mut last_known: Option<usize> = None;
    let mut i = 0;
    while i < values.len() {
        if values[i].is_some() {
            last_known = Some(i);
            i += 1;
            continue;
        }
        let run_start = i;
        while i < values.len() && values[i].is_none() {
            i += 1;
        }
        let (Some(l), true) = (last_known, i < values.len()) else {
            continue;
        };
        if i - run_start > max_gap {
            continue;
        }
        let (a, b) = (values[l].unwrap(), values[i].unwrap());
        let span = (i - l) as f64;
        for (k, v) in values.iter_mut().enumerate().take(i).skip(run_start) {
            *v = Some(a + (b - a) * (k - l) as f64 / span);
        }
    }
}

fn frames_from(aligned: &Aligned, range: std::ops::Range<usize>, rule: &ModeRule) -> Vec<Frame> {
    let max_e_v = aligned.channels[5]
        .iter()
        .flatten()
        .fold(0.0_f64, |m, &v| m.max(v));
    let th = rule.resolve(max_e_v);
    let ch = |c: usize, i: usize| aligned.channels[c][i].expect("range holds complete slots");

    let end = range.end;
    range
        .map(|i| {
            let channels = ModeChannels {
                t_water_in: ch(2, i),
                t_water_out: ch(3, i),
                v_cool_w: ch(4, i),
                e_v: ch(5, i),
            };
            Frame {
                t_in: ch(0, i),
                t_out: ch(1, i),
                n: aligned.n[i],
                t_water_in: channels.t_water_in,
                t_water_out: channels.t_water_out,
                v_cool_w: channels.v_cool_w,
                e_v: channels.e_v,
                mode: classify_mode(&channels, &th),
                delta: (i + 1 < end).then(|| ch(0, i + 1) - ch(0, i)),
            }
        })
        .collect()
}

fn complete(aligned: &Aligned, i: usize) -> Result<(), &'static str> {
    match CHANNELS
        .iter()
        .zip(&aligned.channels)
        .find(|(_, c)| c[i].is_none())
    {
        Some((name, _)) => Err(name),
        None => Ok(()),
    }
}

/// Builds a single gap-free series. Any gap longer than
/// `options.max_gap` is an error.
pub fn build_frames(
    records: &[SensorRecord],
    constants: &StationConstants,
    rule: &ModeRule,
    options: &BuildOptions,
) -> Result<FrameSeries, IngestError> {
    let aligned = align(records, constants.step, options.max_gap)?;
    for i in 0..aligned.grid.len() {
        if let Err(channel) = complete(&aligned, i) {
            return Err(IngestError::GapTooLong {
                at: aligned.grid[i],
                channel: channel.to_string(),
            });
        }
    }
    if aligned.grid.len() < 2 {
        return Err(IngestError::TooShort(aligned.grid.len()));
    }
    Ok(FrameSeries {
        start: aligned.start,
        step: constants.step,
        frames: frames_from(&aligned, 0..aligned.grid.len(), rule),
    })
}

/// Like [`build_frames`] but splits the series at gaps that cannot be
/// filled. Pieces shorter than two frames are dropped.
pub fn build_segments(
    records: &[SensorRecord],
    constants: &StationConstants,
    rule: &ModeRule,
    options: &BuildOptions,
) -> Result<Vec<FrameSeries>, IngestError> {
    let aligned = align(records, constants.step, options.max_gap)?;
    let mut segments = Vec::new();
    let mut i = 0;
    while i < aligned.grid.len() {
        if complete(&aligned, i).is_err() {
            i += 1;
            continue;
        }
        let begin = i;
        while i < aligned.grid.len() && complete(&aligned, i).is_ok() {
            i += 1;
        }
        if i - begin >= 2 {
            segments.push(FrameSeries {
                start: aligned.grid[begin],
                step: constants.step,
                frames: frames_from(&aligned, begin..i, rule),
            });
        }
    }
    if segments.is_empty() {
        return Err(IngestError::TooShort(0));
    }
    Ok(segments)
}
