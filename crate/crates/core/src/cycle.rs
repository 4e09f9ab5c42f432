//! Driving cycles: ingestion, resampling, statistics and synthesis.
//!
//! A [`DrivingCycle`] is a time-indexed speed trace (km/h) with an optional
//! road grade (%). Cycles are exchanged as a small CSV dialect with a header
//! row `t,v` or `t,v,grade`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speeds at or below this value (km/h) count as stopped.
pub const DEFAULT_STOP_THRESHOLD: f64 = 0.1;

const WLTC_CLASS3B: &str = include_str!("../data/wltc_class3b.csv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CycleError {
    #[error("cycle input is empty")]
    Empty,
    #[error("line {line}: expected header `t,v` or `t,v,grade`")]
    BadHeader { line: u64 },
    #[error("line {line}: malformed row")]
    MalformedRow { line: u64 },
    #[error("line {line}: time is not strictly increasing")]
    NonMonotoneTime { line: u64 },
    #[error("line {line}: negative speed")]
    NegativeSpeed { line: u64 },
    #[error("line {line}: first sample must be at t = 0")]
    NonZeroStart { line: u64 },
    #[error("a cycle needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid sample at index {index}: {reason}")]
    InvalidSample { index: usize, reason: &'static str },
    #[error("resampling step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("window [{start}, {end}] s lies outside the cycle")]
    InvalidWindow { start: f64, end: f64 },
    #[error("infeasible synthesis spec: {0}")]
    InfeasibleSpec(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// One point of a speed trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSample {
    /// Seconds since cycle start.
    pub t: f64,
    /// Speed in km/h.
    pub v: f64,
    /// Road grade in percent.
    #[serde(default)]
    pub grade: f64,
}

impl CycleSample {
    pub fn new(t: f64, v: f64) -> Self {
        Self { t, v, grade: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingCycle {
    pub name: String,
    samples: Vec<CycleSample>,
    pub dt_nominal: f64,
}

impl DrivingCycle {
    /// Builds a validated cycle. `dt_nominal` is the median sample spacing.
    pub fn new(name: impl Into<String>, samples: Vec<CycleSample>) -> Result<Self, CycleError> {
        validate(&samples)?;
        let dt_nominal = median_spacing(&samples);
        Ok(Self {
            name: name.into(),
            samples,
            dt_nominal,
        })
    }

    /// Convenience constructor for a uniformly sampled speed trace on flat road.
    pub fn from_speeds(name: impl Into<String>, dt: f64, speeds: &[f64]) -> Result<Self, CycleError> {
        let samples = speeds
            .iter()
            .enumerate()
            .map(|(i, &v)| CycleSample::new(i as f64 * dt, v))
            .collect();
        Self::new(name, samples)
    }

    /// WLTC class 3b, 1800 s.
    pub fn wltc() -> Self {
        parse_cycle(WLTC_CLASS3B, "WLTC").expect("bundled WLTC trace is valid")
    }

    pub fn samples(&self) -> &[CycleSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t) - self.samples[0].t
    }

    /// Speed and grade at time `t` by linear interpolation, clamped at the ends.
    pub fn interpolate(&self, t: f64) -> (f64, f64) {
        let s = &self.samples;
        if t <= s[0].t {
            return (s[0].v, s[0].grade);
        }
        let last = s[s.len() - 1];
        if t >= last.t {
            return (last.v, last.grade);
        }
        // first index with sample.t > t
        let hi = s.partition_point(|p| p.t <= t);
        let (a, b) = (s[hi - 1], s[hi]);
        let frac = (t - a.t) / (b.t - a.t);
        (a.v + frac * (b.v - a.v), a.grade + frac * (b.grade - a.grade))
    }

    /// Sub-cycle covering `[start, end]`, shifted so it starts at t = 0.
    /// Interior samples are kept; the endpoints are interpolated when they
    /// fall between samples.
    pub fn window(&self, start: f64, end: f64) -> Result<DrivingCycle, CycleError> {
        let t_end = self.samples[self.samples.len() - 1].t;
        if !(start >= 0.0 && end > start && end <= t_end + 1e-9) {
            return Err(CycleError::InvalidWindow { start, end });
        }
        let end = end.min(t_end);
        let mut out = Vec::new();
        let (v0, g0) = self.interpolate(start);
        out.push(CycleSample { t: 0.0, v: v0, grade: g0 });
        for s in self.samples.iter().filter(|s| s.t > start && s.t < end) {
            out.push(CycleSample { t: s.t - start, ..*s });
        }
        let (v1, g1) = self.interpolate(end);
        out.push(CycleSample { t: end - start, v: v1, grade: g1 });
        DrivingCycle::new(format!("{}[{start}..{end}]", self.name), out)
    }

    /// Serializes to the `t,v[,grade]` CSV format. The grade column is
    /// written only when some grade is nonzero. Numbers use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_csv(&self) -> String {
        let with_grade = self.samples.iter().any(|s| s.grade != 0.0);
        let mut out = String::with_capacity(self.samples.len() * 12);
        out.push_str(if with_grade { "t,v,grade\n" } else { "t,v\n" });
        for s in &self.samples {
            if with_grade {
                out.push_str(&format!("{},{},{}\n", s.t, s.v, s.grade));
            } else {
                out.push_str(&format!("{},{}\n", s.t, s.v));
            }
        }
        out
    }
}

fn validate(samples: &[CycleSample]) -> Result<(), CycleError> {
    if samples.len() < 2 {
        return Err(CycleError::TooFewSamples(samples.len()));
    }
    if samples[0].t != 0.0 {
        return Err(CycleError::InvalidSample { index: 0, reason: "first sample must be at t = 0" });
    }
    for (index, s) in samples.iter().enumerate() {
        if !s.t.is_finite() || !s.v.is_finite() || !s.grade.is_finite() {
            return Err(CycleError::InvalidSample { index, reason: "non-finite value" });
        }
        if s.v < 0.0 {
            return Err(CycleError::InvalidSample { index, reason: "negative speed" });
        }
        if index > 0 && s.t <= samples[index - 1].t {
            return Err(CycleError::InvalidSample { index, reason: "time not strictly increasing" });
        }
    }
    Ok(())
}

fn median_spacing(samples: &[CycleSample]) -> f64 {
    let mut d: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

/// Parses the `t,v[,grade]` CSV dialect. Line numbers in errors are 1-based
/// and count the header.
pub fn parse_cycle(text: &str, name: &str) -> Result<DrivingCycle, CycleError> {
    if text.trim().is_empty() {
        return Err(CycleError::Empty);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| CycleError::Csv(e.to_string()))?.clone();
    let cols: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    let with_grade = match cols.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["t", "v"] => false,
        ["t", "v", "grade"] => true,
        _ => return Err(CycleError::BadHeader { line: 1 }),
    };
    let width = if with_grade { 3 } else { 2 };

    let mut samples: Vec<CycleSample> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CycleError::Csv(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(CycleError::MalformedRow { line });
        }
        let num = |i: usize| -> Result<f64, CycleError> {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or(CycleError::MalformedRow { line })
        };
        let t = num(0)?;
        let v = num(1)?;
        let grade = if with_grade { num(2)? } else { 0.0 };
        if samples.is_empty() && t != 0.0 {
            return Err(CycleError::NonZeroStart { line });
        }
        if let Some(prev) = samples.last() {
            if t <= prev.t {
                return Err(CycleError::NonMonotoneTime { line });
            }
        }
        if v < 0.0 {
            return Err(CycleError::NegativeSpeed { line });
        }
        samples.push(CycleSample { t, v, grade });
    }
    DrivingCycle::new(name, samples)
}

/// Resamples onto a uniform grid `0, dt, 2dt, ...` by linear interpolation of
/// speed and grade. The final sample of the input is always kept.
pub fn resample(cycle: &DrivingCycle, dt: f64) -> Result<DrivingCycle, CycleError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CycleError::InvalidStep(dt));
    }
    let t_end = cycle.samples[cycle.samples.len() - 1].t;
    let n = (t_end / dt + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(n + 2);
    for k in 0..=n {
        let t = k as f64 * dt;
        if t > t_end {
            break;
        }
        let (v, grade) = cycle.interpolate(t);
        out.push(CycleSample { t, v, grade });
    }
    let last = out[out.len() - 1].t;
    if t_end - last > 1e-9 * dt.max(1.0) {
        let s = cycle.samples[cycle.samples.len() - 1];
        out.push(s);
    } else if last != t_end {
        // snap the last grid point onto the exact endpoint
        let end = out.len() - 1;
        out[end] = cycle.samples[cycle.samples.len() - 1];
    }
    DrivingCycle::new(cycle.name.clone(), out)
}

/// Aggregate descriptors of a cycle, in the units used by cycle tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    /// m
    pub total_distance: f64,
    /// s
    pub total_time: f64,
    /// s
    pub driving_time: f64,
    /// s
    pub stop_time: f64,
    /// km/h
    pub avg_speed: f64,
    /// km/h
    pub max_speed: f64,
    pub num_stops: usize,
}

/// Computes cycle statistics.
///
/// An interval counts as stopped when both its endpoints are at or below
/// `stop_threshold`. A stop is a maximal run of stopped intervals lasting at
/// least 1 s; a run that begins at t = 0 is idle before the first motion and
/// is not counted as a stop (its duration still counts as stop time).
pub fn stats(cycle: &DrivingCycle, stop_threshold: f64) -> CycleStats {
    let s = cycle.samples();
    let total_time = cycle.duration();
    let mut distance = 0.0;
    let mut stop_time = 0.0;
    let mut num_stops = 0;
    let mut run: Option<(f64, f64)> = None; // (start, end) of the current stopped run
    let close_run = |run: Option<(f64, f64)>, num_stops: &mut usize| {
        if let Some((start, end)) = run {
            if start > 0.0 && end - start >= 1.0 - 1e-9 {
                *num_stops += 1;
            }
        }
    };
    for w in s.windows(2) {
        let dt = w[1].t - w[0].t;
        distance += 0.5 * (w[0].v + w[1].v) / 3.6 * dt;
        if w[0].v <= stop_threshold && w[1].v <= stop_threshold {
            stop_time += dt;
            run = Some(match run {
                Some((start, _)) => (start, w[1].t),
                None => (w[0].t, w[1].t),
            });
        } else {
            close_run(run.take(), &mut num_stops);
        }
    }
    close_run(run, &mut num_stops);
    let max_speed = s.iter().map(|p| p.v).fold(0.0, f64::max);
    let avg_speed = if total_time > 0.0 { distance / total_time * 3.6 } else { 0.0 };
    CycleStats {
        total_distance: distance,
        total_time,
        driving_time: total_time - stop_time,
        stop_time,
        avg_speed,
        max_speed,
        num_stops,
    }
}

/// Targets for [`synthesize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// s
    pub total_time: f64,
    /// km/h
    pub avg_speed: f64,
    /// km/h
    pub max_speed: f64,
    pub num_stops: usize,
    /// s
    pub stop_time: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Descriptors of the six recorded Tehran routes (time, average speed,
    /// maximum speed, stops, stop time), indexed 1..=6.
    pub fn tehran(route: usize, seed: u64) -> Option<SynthSpec> {
        let (total_time, avg_speed, max_speed, num_stops, stop_time) = match route {
            1 => (1822.0, 38.45, 86.39, 2, 87.0),
            2 => (2588.0, 7.88, 72.67, 25, 318.0),
            3 => (1975.0, 18.59, 53.23, 4, 141.0),
            4 => (4485.0, 44.59, 94.15, 3, 1598.0),
            5 => (969.0, 43.97, 98.30, 1, 38.0),
            6 => (1468.0, 34.04, 79.81, 3, 100.0),
            _ => return None,
        };
        Some(SynthSpec { total_time, avg_speed, max_speed, num_stops, stop_time, seed })
    }
}

/// Maximum number of bisection steps before giving up.
const SYNTH_MAX_ITER: usize = 1000;
/// Relative distance error at which the search stops.
const SYNTH_TOL: f64 = 1e-3;
/// Shortest trip between two stops, s.
const SYNTH_MIN_TRIP: i64 = 6;

#[derive(Debug, Clone, Copy)]
struct Trip {
    start: f64,
    duration: f64,
    /// m/s^2
    accel: f64,
    /// relative cruise level
    weight: f64,
    /// the trip that touches the maximum speed
    peak: bool,
}

impl Trip {
    /// Speed (m/s) at local time `tau` for a given cruise level.
    fn speed(&self, tau: f64, cruise: f64, v_max: f64) -> f64 {
        let ramps = (self.accel * tau).min(self.accel * (self.duration - tau));
        let mut level = cruise.min(v_max);
        if self.peak {
            let center = (self.duration / 2.0).floor();
            let bump = v_max - self.accel * ((tau - center).abs() - 1.0).max(0.0);
            level = level.max(bump);
        }
        ramps.min(level).max(0.0)
    }
}

/// Synthesizes a deterministic speed trace of trapezoidal trips separated by
/// full stops. One trip carries a short plateau at the maximum speed.
///
/// Total time and stop count are hit exactly. Stop time is exact up to
/// rounding to whole seconds, maximum speed is exact on the 1 s grid, and
/// the average speed lands within 0.1%. The target distance is
/// `avg_speed * total_time`.
pub fn synthesize(spec: &SynthSpec) -> Result<DrivingCycle, CycleError> {
    let infeasible = |msg: String| Err(CycleError::InfeasibleSpec(msg));
    let SynthSpec { total_time, avg_speed, max_speed, num_stops, stop_time, seed } = *spec;
    if [total_time, avg_speed, max_speed, stop_time].iter().any(|x| !x.is_finite() || *x < 0.0) {
        return infeasible("targets must be finite and nonnegative".into());
    }
    if avg_speed > max_speed {
        return infeasible(format!("average speed {avg_speed} exceeds maximum {max_speed}"));
    }
    if stop_time >= total_time {
        return infeasible("stop time must be shorter than total time".into());
    }
    if avg_speed <= 0.0 {
        return infeasible("the cycle must move".into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = total_time.round() as i64;
    let stop_total = stop_time.round() as i64;
    if num_stops as i64 > stop_total {
        return infeasible(format!("{num_stops} stops cannot fit in {stop_total} s of stop time"));
    }
    // without interior stops the stop time becomes leading idle
    let (lead_idle, stops) = if num_stops == 0 {
        (stop_total, Vec::new())
    } else {
        (0, split_integer(stop_total, num_stops, 1, &mut rng))
    };
    let trips_n = num_stops + 1;
    let driving_total = total - stop_total;
    if driving_total < SYNTH_MIN_TRIP * trips_n as i64 {
        return infeasible("driving time too short for the number of trips".into());
    }

    let v_max = max_speed / 3.6;
    let target = avg_speed / 3.6 * total_time;
    let peak_accel = 1.0;
    let peak_min = 2 * (v_max / peak_accel).ceil() as i64 + 4;
    let mut durations = split_integer(driving_total, trips_n, SYNTH_MIN_TRIP, &mut rng);
    let peak = rng.gen_range(0..trips_n);
    let mut need = peak_min - durations[peak];
    while need > 0 {
        let donor = (0..trips_n)
            .filter(|&i| i != peak && durations[i] > SYNTH_MIN_TRIP)
            .max_by_key(|&i| durations[i]);
        let Some(d) = donor else {
            return infeasible("not enough driving time to reach the maximum speed".into());
        };
        let give = need.min(durations[d] - SYNTH_MIN_TRIP);
        durations[d] -= give;
        durations[peak] += give;
        need -= give;
    }

    let mut trips = Vec::with_capacity(trips_n);
    let mut t = lead_idle as f64;
    for (i, &d) in durations.iter().enumerate() {
        let accel = if i == peak { peak_accel } else { rng.gen_range(0.6..1.2) };
        let weight = rng.gen_range(0.7..1.3);
        trips.push(Trip { start: t, duration: d as f64, accel, weight, peak: i == peak });
        t += d as f64;
        if let Some(s) = stops.get(i) {
            t += *s as f64;
        }
    }

    let speeds_at = |scale: f64| render(&trips, total as usize, scale, v_max);
    let distance = |v: &[f64]| v.windows(2).map(|w| 0.5 * (w[0] + w[1]) / 3.6).sum::<f64>();

    let (mut lo, mut hi) = (0.0, v_max / 0.7);
    let d_lo = distance(&speeds_at(lo));
    let d_hi = distance(&speeds_at(hi));
    if d_lo > target * (1.0 + SYNTH_TOL) {
        return infeasible(format!(
            "reaching {max_speed} km/h already covers more than the target distance"
        ));
    }
    if d_hi < target * (1.0 - SYNTH_TOL) {
        return infeasible(format!(
            "average speed {avg_speed} km/h is unreachable with {num_stops} stops and maximum {max_speed} km/h"
        ));
    }
    for _ in 0..SYNTH_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let v = speeds_at(mid);
        let err = (distance(&v) - target) / target;
        if err.abs() < SYNTH_TOL {
            let name = format!(
                "synth(T={total_time},avg={avg_speed},max={max_speed},stops={num_stops},seed={seed})"
            );
            let mut cycle = DrivingCycle::from_speeds(name, 1.0, &v)?;
            let last = cycle.samples.len() - 1;
            if (total as f64) != total_time {
                cycle.samples[last].t = total_time.max(cycle.samples[last - 1].t + 1e-3);
            }
            return Ok(cycle);
        }
        if err < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    infeasible(format!("could not match distance {target:.1} m within {SYNTH_MAX_ITER} iterations"))
}

/// Samples the trip layout on a 1 s grid, returning km/h.
fn render(trips: &[Trip], total: usize, scale: f64, v_max: f64) -> Vec<f64> {
    let mut speeds = vec![0.0; total + 1];
    for trip in trips {
        let a = trip.start as usize;
        let b = (trip.start + trip.duration) as usize;
        for (k, v) in speeds.iter_mut().enumerate().take(b).skip(a + 1) {
            let tau = k as f64 - trip.start;
            let s = trip.speed(tau, scale * trip.weight, v_max) * 3.6;
            // interior samples stay above the stop threshold
            *v = s.max(2.0 * DEFAULT_STOP_THRESHOLD);
        }
    }
    speeds
}

/// Splits `total` into `parts` integers, each at least `min`, with seeded
/// random proportions.
/// random proportions.
fn split_integer(total: i64, parts: usize, min: i64, rng: &mut ChaCha8Rng) -> Vec<i64> {
    let spare = total - min * parts as i64;
    let weights: Vec<f64> = (0..parts).map(|_| rng.gen_range(0.5..1.5)).collect();
    let wsum: f64 = weights.iter().sum();
    let mut out: Vec<i64> = weights
        .iter()
        .map(|w| min + (spare as f64 * w / wsum).floor() as i64)
        .collect();
    let mut rest = total - out.iter().sum::<i64>();
    let mut i = 0;
    while rest > 0 {
        out[i % parts] += 1;
        rest -= 1;
        i += 1;
    }
    out
}
