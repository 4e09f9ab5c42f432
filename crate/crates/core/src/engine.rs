//! Engine fuel and emission model on a load-based BSFC surface.
//!
//! Operating points are described by brake power alone; the normalized load
//! is `u = P / max_power`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("engine power {power} kW outside (0, {max}] kW")]
    PowerOutOfRange { power: f64, max: f64 },
    #[error("BSFC table: {0}")]
    BadTable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineMap {
    /// kW
    pub max_power: f64,
    /// cc
    pub displacement: f64,
    /// g/kWh
    pub bsfc_min: f64,
    /// Load of best BSFC, in (0, 1).
    pub u_opt: f64,
    /// Curvature below `u_opt`.
    pub c_lo: f64,
    /// Curvature above `u_opt`.
    pub c_hi: f64,
    /// Minimum load fraction when the engine runs as a generator set.
    pub min_load: f64,
    /// Optional tabulated `(u, bsfc)` points replacing the analytic surface.
    pub bsfc_table: Option<Vec<[f64; 2]>>,
}

impl Default for EngineMap {
    fn default() -> Self {
        Self {
            max_power: 99.0,
            displacement: 2360.0,
            bsfc_min: 175.0,
            u_opt: 0.36,
            c_lo: 15.0,
            c_hi: 0.6,
            min_load: 0.25,
            bsfc_table: None,
        }
    }
}

impl EngineMap {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.max_power > 0.0) {
            return Err(format!("engine.max_power must be positive, got {}", self.max_power));
        }
        if !(self.bsfc_min > 0.0) {
            return Err(format!("engine.bsfc_min must be positive, got {}", self.bsfc_min));
        }
        if !(self.u_opt > 0.0 && self.u_opt < 1.0) {
            return Err(format!("engine.u_opt must lie in (0, 1), got {}", self.u_opt));
        }
        if !(self.c_lo >= 0.0 && self.c_hi >= 0.0) {
            return Err("engine curvatures must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.min_load) {
            return Err(format!("engine.min_load must lie in [0, 1], got {}", self.min_load));
        }
        if let Some(t) = &self.bsfc_table {
            check_table(t).map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    /// BSFC at normalized load `u` without envelope checks, g/kWh.
    pub fn surface(&self, u: f64) -> f64 {
        if let Some(table) = &self.bsfc_table {
            return interp_table(table, u);
        }
        let d = self.u_opt - u;
        let c = if d > 0.0 { self.c_lo } else { self.c_hi };
        self.bsfc_min * (1.0 + c * d * d)
    }

    /// Power of minimum BSFC, kW.
    pub fn optimal_power(&self) -> f64 {
        self.u_opt * self.max_power
    }

    /// Smallest power the engine runs at when used as a generator set, kW.
    pub fn floor_power(&self) -> f64 {
        self.min_load * self.max_power
    }
}

fn check_table(t: &[[f64; 2]]) -> Result<(), EngineError> {
    if t.len() < 2 {
        return Err(EngineError::BadTable("need at least 2 points".into()));
    }
    for w in t.windows(2) {
        if w[1][0] <= w[0][0] {
            return Err(EngineError::BadTable("u must be strictly increasing".into()));
        }
    }
    if t.iter().any(|p| !(p[1] > 0.0) || !p[0].is_finite()) {
        return Err(EngineError::BadTable("bsfc must be positive".into()));
    }
    Ok(())
}

fn interp_table(t: &[[f64; 2]], u: f64) -> f64 {
    if u <= t[0][0] {
        return t[0][1];
    }
    let last = t[t.len() - 1];
    if u >= last[0] {
        return last[1];
    }
    let hi = t.partition_point(|p| p[0] <= u);
    let (a, b) = (t[hi - 1], t[hi]);
    a[1] + (u - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
}

/// Parses a `u,bsfc` CSV table.
pub fn parse_bsfc_table(text: &str) -> Result<Vec<[f64; 2]>, EngineError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.deserialize::<(f64, f64)>() {
        let (u, b) = rec.map_err(|e| EngineError::BadTable(e.to_string()))?;
        out.push([u, b]);
    }
    check_table(&out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuelProperties {
    /// Lower heating value, J/g.
    pub h_u: f64,
    /// Density, kg/L.
    pub density: f64,
    /// g CO2 per g fuel.
    pub co2_per_gram_fuel: f64,
}

impl Default for FuelProperties {
    fn default() -> Self {
        Self { h_u: 43000.0, density: 0.745, co2_per_gram_fuel: 3.17 }
    }
}

impl FuelProperties {
    /// Liters of fuel carrying `kwh` of chemical energy.
    pub fn liters_equivalent(&self, kwh: f64) -> f64 {
        kwh * 3.6e6 / (self.h_u * self.density * 1000.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.h_u > 0.0 && self.density > 0.0 && self.co2_per_gram_fuel > 0.0) {
            return Err("fuel properties must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    CO2,
    CO,
    HC,
    NOx,
}

impl Species {
    pub const ALL: [Species; 4] = [Species::CO2, Species::CO, Species::HC, Species::NOx];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::CO2 => "co2",
            Species::CO => "co",
            Species::HC => "hc",
            Species::NOx => "nox",
        }
    }
}

/// Specific emission of one pollutant: `base·(1 + c_lo·(u_opt−u)²)` below
/// the best-efficiency load and `base·(1 + c_hi·(u−u_opt)²)` above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PollutantSurface {
    /// g/kWh at the engine's best-BSFC load.
    pub base: f64,
    pub c_lo: f64,
    pub c_hi: f64,
}

impl PollutantSurface {
    fn at(&self, u: f64, u_opt: f64) -> f64 {
        let d = u_opt - u;
        let c = if d > 0.0 { self.c_lo } else { self.c_hi };
        self.base * (1.0 + c * d * d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmissionMap {
    pub co: PollutantSurface,
    pub hc: PollutantSurface,
    pub nox: PollutantSurface,
    /// Pollutant multiplier at the first second of engine operation.
    pub cold_multiplier: f64,
    /// Cumulative engine-on time over which the multiplier decays to 1, s.
    pub warmup_s: f64,
}

impl Default for EmissionMap {
    fn default() -> Self {
        Self {
            co: PollutantSurface { base: 1.2, c_lo: 4.0, c_hi: 6.0 },
            hc: PollutantSurface { base: 0.15, c_lo: 8.0, c_hi: 1.0 },
            nox: PollutantSurface { base: 0.5, c_lo: 0.5, c_hi: 4.0 },
            cold_multiplier: 2.5,
            warmup_s: 120.0,
        }
    }
}

impl EmissionMap {
    /// Cold-start excess factor after `engine_on_s` seconds of running.
    pub fn cold_factor(&self, engine_on_s: f64) -> f64 {
        if self.warmup_s <= 0.0 {
            return 1.0;
        }
        let frac = (1.0 - engine_on_s / self.warmup_s).max(0.0);
        1.0 + (self.cold_multiplier - 1.0) * frac
    }

    fn pollutant(&self, species: Species) -> Option<&PollutantSurface> {
        match species {
            Species::CO2 => None,
            Species::CO => Some(&self.co),
            Species::HC => Some(&self.hc),
            Species::NOx => Some(&self.nox),
        }
    }

    /// Scales every pollutant surface by `k`.
    pub fn scaled(&self, k: f64) -> EmissionMap {
        let s = |p: PollutantSurface| PollutantSurface { base: p.base * k, ..p };
        EmissionMap { co: s(self.co), hc: s(self.hc), nox: s(self.nox), ..self.clone() }
    }
}

fn check_power(map: &EngineMap, p: f64) -> Result<(), EngineError> {
    if p > 0.0 && p <= map.max_power * (1.0 + 1e-12) {
        Ok(())
    } else {
        Err(EngineError::PowerOutOfRange { power: p, max: map.max_power })
    }
}

/// Brake-specific fuel consumption at `p` kW, g/kWh.
pub fn bsfc_at(map: &EngineMap, p: f64) -> Result<f64, EngineError> {
    check_power(map, p)?;
    Ok(map.surface(p / map.max_power))
}

/// Brake thermal efficiency of an operating point with the given BSFC.
pub fn efficiency(bsfc: f64, fp: &FuelProperties) -> f64 {
    3.6e6 / (bsfc * fp.h_u)
}

/// Fuel mass flow at `p` kW, g/s. Zero when the engine is off.
pub fn fuel_rate(map: &EngineMap, p: f64) -> Result<f64, EngineError> {
    if p == 0.0 {
        return Ok(0.0);
    }
    Ok(bsfc_at(map, p)? * p / 3600.0)
}

/// Fuel volume for a trace of `(power kW, duration s)` segments, L.
pub fn integrate_fuel(trace: &[(f64, f64)], map: &EngineMap, fp: &FuelProperties) -> Result<f64, EngineError> {
    let mut liters = 0.0;
    for &(p, dt) in trace {
        if p == 0.0 {
            continue;
        }
        liters += p * bsfc_at(map, p)? / (1000.0 * fp.density) * (dt / 3600.0);
    }
    Ok(liters)
}

/// Specific emission of `species` at `p` kW, g/kWh. Pollutants include the
/// cold-start excess; CO2 follows the fuel by carbon balance.
pub fn specific_emission(
    map: &EngineMap,
    emap: &EmissionMap,
    fp: &FuelProperties,
    species: Species,
    p: f64,
    engine_on_s: f64,
) -> Result<f64, EngineError> {
    let bsfc = bsfc_at(map, p)?;
    let u = p / map.max_power;
    Ok(match emap.pollutant(species) {
        None => bsfc * fp.co2_per_gram_fuel,
        Some(s) => s.at(u, map.u_opt) * emap.cold_factor(engine_on_s),
    })
}

/// Emission mass flow of `species` at `p` kW, g/s.
pub fn emission_rate(
    map: &EngineMap,
    emap: &EmissionMap,
    fp: &FuelProperties,
    species: Species,
    p: f64,
    engine_on_s: f64,
) -> Result<f64, EngineError> {
    if p == 0.0 {
        return Ok(0.0);
    }
    Ok(specific_emission(map, emap, fp, species, p, engine_on_s)? * p / 3600.0)
}

/// How much power the battery can take in or give out to let the engine run
/// away from the requested load, kW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryBuffer {
    pub charge_kw: f64,
    pub discharge_kw: f64,
}

impl BatteryBuffer {
    pub const NONE: BatteryBuffer = BatteryBuffer { charge_kw: 0.0, discharge_kw: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadPoint {
    /// kW
    pub power: f64,
    /// Whether the point was moved toward best BSFC using the battery.
    pub snapped: bool,
}

/// Chooses the generator-set operating point for a requested power.
///
/// The request is clamped to `[min_load·max, max]`, then moved toward the
/// best-BSFC power as far as the battery buffer allows.
pub fn best_bsfc_power(map: &EngineMap, p_req: f64, buffer: BatteryBuffer) -> LoadPoint {
    let clamped = p_req.clamp(map.floor_power(), map.max_power);
    let target = map.optimal_power();
    let delta = target - clamped;
    let moved = if delta > 0.0 {
        // running harder than needed: the surplus charges the battery
        let room = (buffer.charge_kw - (clamped - p_req).max(0.0)).max(0.0);
        delta.min(room)
    } else {
        // running lighter: the battery covers the rest
        let room = (buffer.discharge_kw - (p_req - clamped).max(0.0)).max(0.0);
        -((-delta).min(room))
    };
    LoadPoint { power: clamped + moved, snapped: moved != 0.0 }
}
