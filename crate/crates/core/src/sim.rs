//! Backward-facing time stepping: cycle → wheel demand → controller →
//! power split → battery and engine accounting. Also the scenario sweeps
//! and the electric range search.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{self, BatteryState, CellParams, PackConfig};
use crate::controller::{self, ControllerConfig, Inputs};
use crate::cycle::{self, CycleError, DrivingCycle, SynthSpec};
use crate::drivetrain::{self, DrivetrainParams, OperatingMode, Powertrain};
use crate::dynamics::{self, Environment, VehicleParams};
use crate::engine::{self, EmissionMap, EngineMap, FuelProperties, Species};
use crate::predictor::{self, Dataset, Hyper, PredictorError, RegressionModel, MIN_WINDOW_S};

/// Lookahead horizon for the SOC prediction, s.
pub const DEFAULT_HORIZON: f64 = 300.0;
/// Initial SOC of the pure-electric runs that label predictor windows, %.
pub const LABEL_SOC: f64 = 90.0;
/// SOC consumption per km assumed when no trained model is used, %/km.
pub const DEFAULT_FALLBACK_PER_KM: f64 = 1.1;
/// Acceleration of the ramp-in for constant-speed runs, m/s².
pub const RAMP_ACCEL: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
}

/// Every physical parameter of the vehicle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleModel {
    pub vehicle: VehicleParams,
    pub environment: Environment,
    pub engine: EngineMap,
    pub fuel: FuelProperties,
    pub emissions: EmissionMap,
    pub cell: CellParams,
    pub pack: PackConfig,
    pub drivetrain: DrivetrainParams,
}

impl VehicleModel {
    pub fn validate(&self) -> Result<(), String> {
        self.vehicle.validate()?;
        self.engine.validate()?;
        self.fuel.validate()?;
        self.cell.validate()?;
        self.pack.validate()?;
        self.drivetrain.validate()
    }
}

/// Where the controller's SOC forecast comes from.
#[derive(Debug, Clone)]
pub enum SocPredictor {
    /// No forecast: `soc_pred = soc`.
    Off,
    /// A fixed consumption rate over the lookahead distance, %/km.
    Constant { per_km: f64 },
    /// A given trained model.
    Model(Arc<RegressionModel>),
    /// A model trained on pure-electric runs of this very vehicle (cached).
    Auto { hyper: Hyper },
}

impl Default for SocPredictor {
    fn default() -> Self {
        SocPredictor::Auto { hyper: Hyper::default() }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub cycle: DrivingCycle,
    /// %
    pub init_soc: f64,
    /// %, applied to the model's battery before the run
    pub soh: f64,
    /// °C
    pub ambient: f64,
    /// s
    pub dt: f64,
    pub model: VehicleModel,
    pub controller: ControllerConfig,
    pub predictor: SocPredictor,
    /// s
    pub horizon: f64,
    pub forced_mode: Option<OperatingMode>,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Default vehicle and rule base on `cycle`, starting at 90 % SOC.
    pub fn new(cycle: DrivingCycle) -> Self {
        let model = VehicleModel::default();
        Self {
            cycle,
            init_soc: 90.0,
            soh: model.pack.soh,
            ambient: model.environment.ambient_temp,
            dt: 1.0,
            model,
            controller: controller::default_rulebase(),
            predictor: SocPredictor::default(),
            horizon: DEFAULT_HORIZON,
            forced_mode: None,
            seed: 0,
        }
    }

    /// Same settings on another cycle.
    pub fn with_cycle(&self, cycle: DrivingCycle) -> Self {
        Self {
            cycle,
            model: self.model.clone(),
            controller: self.controller.clone(),
            predictor: self.predictor.clone(),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if let Err(m) = self.model.validate() {
            return bad(m);
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.soh > 0.0 && self.soh <= 100.0) {
            return bad(format!("soh must be in (0, 100], got {}", self.soh));
        }
        let (lo, hi) = self.model.pack.usable_window;
        if !(self.init_soc >= lo && self.init_soc <= hi) {
            return bad(format!("init_soc {} outside the usable window [{lo}, {hi}]", self.init_soc));
        }
        if !(self.horizon >= MIN_WINDOW_S) {
            return bad(format!("horizon must be at least {MIN_WINDOW_S} s, got {}", self.horizon));
        }
        if !self.ambient.is_finite() {
            return bad("ambient temperature must be finite".into());
        }
        Ok(())
    }
}

/// State after one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// s, end of the step
    pub t: f64,
    /// km/h
    pub v: f64,
    /// kW
    pub p_demand: f64,
    pub mode: OperatingMode,
    /// kW
    pub p_engine: f64,
    /// kW, discharge-positive
    pub p_batt: f64,
    /// %
    pub soc: f64,
    /// g
    pub fuel_cum: f64,
    /// g
    pub co2_cum: f64,
    /// g
    pub co_cum: f64,
    /// g
    pub hc_cum: f64,
    /// g
    pub nox_cum: f64,
    /// °C
    pub batt_temp: f64,
    /// V
    pub pack_voltage: f64,
    /// A
    pub pack_current: f64,
    /// kW of demand left unserved
    pub shortfall: f64,
}

impl StepRecord {
    pub fn emissions_cum(&self, s: Species) -> f64 {
        match s {
            Species::CO2 => self.co2_cum,
            Species::CO => self.co_cum,
            Species::HC => self.hc_cum,
            Species::NOx => self.nox_cum,
        }
    }
}

/// Energy flows over a run, kWh.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub fuel: f64,
    /// Change in stored chemical energy (positive when drawn down).
    pub battery_drawn: f64,
    pub battery_terminal: f64,
    /// Mechanical energy reaching the wheels from the powertrain (signed).
    pub delivered: f64,
    pub engine_loss: f64,
    pub gear_loss: f64,
    pub generator_loss: f64,
    pub motor_loss: f64,
    pub aux: f64,
    pub battery_heat: f64,
    pub friction_brake: f64,
    pub unserved: f64,
}

impl EnergyLedger {
    /// Sources minus sinks.
    pub fn residual(&self) -> f64 {
        self.fuel + self.battery_drawn
            - (self.delivered
                + self.engine_loss
                + self.gear_loss
                + self.generator_loss
                + self.motor_loss
                + self.aux
                + self.battery_heat)
    }

    /// Residual relative to the total energy supplied.
    pub fn relative_residual(&self) -> f64 {
        let scale = self.fuel + self.battery_drawn.abs();
        if scale > 0.0 {
            self.residual().abs() / scale
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Emissions {
    pub co2: f64,
    pub co: f64,
    pub hc: f64,
    pub nox: f64,
}

impl Emissions {
    pub fn get(&self, s: Species) -> f64 {
        match s {
            Species::CO2 => self.co2,
            Species::CO => self.co,
            Species::HC => self.hc,
            Species::NOx => self.nox,
        }
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self { co2: a[0], co: a[1], hc: a[2], nox: a[3] }
    }
}

/// Shares of the energy sourced from the engine and from the battery, %.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergySplit {
    pub ice: f64,
    pub battery: f64,
}

/// Time spent in each mode, s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeTimes {
    pub ev: f64,
    pub series: f64,
    pub parallel: f64,
    pub ice: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub cycle: String,
    /// km
    pub distance: f64,
    /// s
    pub duration: f64,
    /// L
    pub fuel_liters: f64,
    /// L/100 km
    pub fc_gasoline: f64,
    /// L/100 km gasoline equivalent of the net battery energy
    pub fc_elect: f64,
    /// L/100 km
    pub fc_total: f64,
    pub init_soc: f64,
    pub final_soc: f64,
    /// SOC consumed, percentage points (negative when the battery gained charge)
    pub delta_soc: f64,
    /// g/km
    pub emissions: Emissions,
    pub energy_split: EnergySplit,
    pub ev_time_fraction: f64,
    pub mode_time: ModeTimes,
    pub ledger: EnergyLedger,
    pub saturated_steps: usize,
    /// kW
    pub max_shortfall: f64,
    /// kW
    pub max_bus_residual: f64,
    /// kW
    pub max_wheel_residual: f64,
}

impl Summary {
    /// All-zero summary at an unchanged SOC.
    pub fn zeroed(cycle: &str, soc: f64) -> Self {
        Summary { cycle: cycle.into(), init_soc: soc, final_soc: soc, ..Default::default() }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<StepRecord>,
    pub summary: Summary,
}

/// Runs a scenario.
pub fn run(sc: &ScenarioConfig) -> Result<RunOutput, SimError> {
    sc.validate()?;
    let look = resolve_predictor(sc)?;
    simulate(sc, &look)
}

enum Lookahead {
    Off,
    Constant(f64),
    Model(Arc<RegressionModel>),
}

fn resolve_predictor(sc: &ScenarioConfig) -> Result<Lookahead, SimError> {
    if sc.forced_mode.is_some() {
        return Ok(Lookahead::Off);
    }
    Ok(match &sc.predictor {
        SocPredictor::Off => Lookahead::Off,
        SocPredictor::Constant { per_km } => Lookahead::Constant(*per_km),
        SocPredictor::Model(m) => Lookahead::Model(m.clone()),
        SocPredictor::Auto { hyper } => Lookahead::Model(auto_model(sc, hyper)?),
    })
}

/// Forecast SOC consumption over the window starting at `t0`. Windows cut
/// short by the end of the cycle are evaluated as a full-horizon window of
/// the same character and scaled back by their length.
fn forecast(look: &Lookahead, cyc: &DrivingCycle, t0: f64, horizon: f64) -> Result<f64, SimError> {
    if matches!(look, Lookahead::Off) {
        return Ok(0.0);
    }
    let t_end = cyc.samples()[cyc.len() - 1].t;
    let end = (t0 + horizon).min(t_end);
    if end - t0 < MIN_WINDOW_S {
        return Ok(0.0);
    }
    let mut f = predictor::extract_features(&cyc.window(t0, end)?)?;
    Ok(match look {
        Lookahead::Off => 0.0,
        Lookahead::Constant(per_km) => per_km * f.distance,
        Lookahead::Model(m) => {
            let frac = (end - t0) / m.horizon;
            f.distance /= frac;
            predictor::predict(m, &f) * frac
        }
    })
}

fn simulate(sc: &ScenarioConfig, look: &Lookahead) -> Result<RunOutput, SimError> {
    let m = &sc.model;
    let (cell, pack) = battery::apply_soh(&m.cell, &m.pack, sc.soh);
    let cyc = cycle::resample(&sc.cycle, sc.dt)?;
    let pt = Powertrain { drivetrain: &m.drivetrain, engine: &m.engine, cell: &cell, pack: &pack };
    let g = m.drivetrain.gear_efficiency;
    let kwh = |p_kw: f64, dt: f64| p_kw * dt / 3600.0;

    let mut state = BatteryState::new(sc.init_soc, sc.ambient, &cell);
    let mut prev: Option<(OperatingMode, f64)> = None;
    let mut engine_on_s = 0.0;
    let mut fuel_g = 0.0;
    let mut emis = [0.0f64; 4];
    let mut led = EnergyLedger::default();
    let mut mode_time = [0.0f64; 4];
    let mut distance_m = 0.0;
    let mut e_engine = 0.0;
    let mut sum = Summary { cycle: sc.cycle.name.clone(), init_soc: sc.init_soc, ..Default::default() };
    let mut trace = Vec::with_capacity(cyc.len());

    for w in cyc.samples().windows(2) {
        let (s0, s1) = (w[0], w[1]);
        let dt = s1.t - s0.t;
        let v = (s0.v + s1.v) / 2.0 / 3.6;
        let a = (s1.v - s0.v) / 3.6 / dt;
        let grade = (s0.grade + s1.grade) / 2.0;
        let p_d = dynamics::power_demand(&m.vehicle, &m.environment, v, a, grade);

        let mode = match sc.forced_mode {
            Some(fm) => fm,
            None => {
                let soc_pred = state.soc - forecast(look, &cyc, s0.t, sc.horizon)?;
                let inputs = Inputs { speed: v * 3.6, soc: state.soc, soc_pred, p_req: p_d };
                controller::select_mode(&sc.controller, &inputs, prev, pack.soc_ceiling()).0
            }
        };
        prev = match prev {
            Some((pm, held)) if pm == mode => Some((mode, held + dt)),
            _ => Some((mode, dt)),
        };

        let split = drivetrain::execute_mode(mode, p_d, v, &state, &pt);
        let mut saturated = split.infeasibility().is_some();
        let mut p_batt = split.p_batt;
        let out = match battery::step(&state, p_batt, dt, &cell, &pack, sc.ambient) {
            Ok(o) => o,
            Err(_) => {
                // the drivetrain respects the battery limits, so this is a
                // numerical edge; fall back to the largest feasible draw
                saturated = true;
                p_batt = p_batt.clamp(
                    -battery::max_charge_power(&state, &cell, &pack),
                    battery::max_discharge_power(&state, &cell, &pack),
                );
                battery::step(&state, p_batt, dt, &cell, &pack, sc.ambient)
                    .or_else(|_| battery::step(&state, 0.0, dt, &cell, &pack, sc.ambient))
                    .map_err(|e| SimError::Config(format!("battery cannot idle: {e}")))?
            }
        };
        saturated |= out.soc_clamped;

        let p_eng = split.p_engine_mech.min(m.engine.max_power);
        if p_eng > 0.0 {
            let rate = engine::fuel_rate(&m.engine, p_eng).unwrap_or(0.0);
            fuel_g += rate * dt;
            for sp in Species::ALL {
                let r = engine::emission_rate(&m.engine, &m.emissions, &m.fuel, sp, p_eng, engine_on_s).unwrap_or(0.0);
                emis[sp.index()] += r * dt;
            }
            engine_on_s += dt;
            e_engine += kwh(p_eng, dt);
        }

        led.battery_terminal += kwh(p_batt, dt);
        led.delivered += kwh(split.wheel_delivered(g), dt);
        led.gear_loss += kwh(split.p_engine_traction * (1.0 - g), dt);
        led.generator_loss += kwh(split.p_engine_mech - split.p_engine_traction - split.p_gen_elec, dt);
        led.motor_loss += kwh(split.p_motor_elec - split.p_motor_mech, dt);
        led.aux += kwh(split.p_aux, dt);
        led.battery_heat += out.heat_dissipated * dt / 3.6e6;
        led.friction_brake += kwh(split.p_friction_brake, dt);
        led.unserved += kwh(split.shortfall, dt);

        if saturated {
            sum.saturated_steps += 1;
        }
        sum.max_shortfall = sum.max_shortfall.max(split.shortfall);
        sum.max_bus_residual = sum.max_bus_residual.max(split.bus_residual().abs());
        sum.max_wheel_residual = sum.max_wheel_residual.max(split.wheel_residual(g).abs());
        mode_time[mode.index()] += dt;
        distance_m += v * dt;

        state = out.state;
        trace.push(StepRecord {
            t: s1.t,
            v: s1.v,
            p_demand: p_d,
            mode,
            p_engine: p_eng,
            p_batt,
            soc: state.soc,
            fuel_cum: fuel_g,
            co2_cum: emis[0],
            co_cum: emis[1],
            hc_cum: emis[2],
            nox_cum: emis[3],
            batt_temp: state.temp,
            pack_voltage: out.voltage,
            pack_current: out.current,
            shortfall: split.shortfall,
        });
    }

    led.fuel = fuel_g * m.fuel.h_u / 3.6e6;
    led.engine_loss = led.fuel - e_engine;
    led.battery_drawn =
        battery::stored_energy_kwh(sc.init_soc, &cell, &pack) - battery::stored_energy_kwh(state.soc, &cell, &pack);

    let km = distance_m / 1000.0;
    let per_100 = |x: f64| if km > 0.0 { x / km * 100.0 } else { 0.0 };
    let per_km = |x: f64| if km > 0.0 { x / km } else { 0.0 };
    sum.distance = km;
    sum.duration = cyc.duration();
    sum.fuel_liters = fuel_g / 1000.0 / m.fuel.density;
    sum.fc_gasoline = per_100(sum.fuel_liters);
    sum.fc_elect = per_100(m.fuel.liters_equivalent(led.battery_terminal));
    sum.fc_total = sum.fc_gasoline + sum.fc_elect;
    sum.final_soc = state.soc;
    sum.delta_soc = sc.init_soc - state.soc;
    sum.emissions = Emissions::from_array(emis.map(per_km));
    let batt_src = led.battery_terminal.max(0.0);
    sum.energy_split = if e_engine + batt_src > 0.0 {
        let ice = 100.0 * e_engine / (e_engine + batt_src);
        EnergySplit { ice, battery: 100.0 - ice }
    } else {
        EnergySplit::default()
    };
    let total_t: f64 = mode_time.iter().sum();
    sum.ev_time_fraction = if total_t > 0.0 { mode_time[0] / total_t } else { 0.0 };
    sum.mode_time = ModeTimes { ev: mode_time[0], series: mode_time[1], parallel: mode_time[2], ice: mode_time[3] };
    sum.ledger = led;
    Ok(RunOutput { trace, summary: sum })
}

/// SOC consumed by a pure-electric run over `window` starting at
/// [`LABEL_SOC`] (capped by the usable ceiling), percentage points.
pub fn ev_consumption(base: &ScenarioConfig, window: &DrivingCycle) -> Result<f64, SimError> {
    let mut sc = base.with_cycle(window.clone());
    sc.forced_mode = Some(OperatingMode::EV);
    sc.predictor = SocPredictor::Off;
    sc.init_soc = LABEL_SOC.min(sc.model.pack.usable_window.1);
    Ok(simulate(&sc, &Lookahead::Off)?.summary.delta_soc)
}

/// WLTC, the six Tehran-style routes and eight random synthetic cycles, all
/// derived from `seed`.
pub fn training_corpus(seed: u64) -> Vec<DrivingCycle> {
    let mut out = vec![DrivingCycle::wltc()];
    for route in 1..=6 {
        let spec = SynthSpec::tehran(route, seed).expect("routes 1..=6 exist");
        if let Ok(mut c) = cycle::synthesize(&spec) {
            c.name = format!("tehran{route}");
            out.push(c);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c1c1e);
    let mut k = 0;
    while k < 8 {
        let total_time: f64 = rng.gen_range(900.0..2400.0f64).round();
        let avg_speed: f64 = rng.gen_range(10.0..60.0);
        let max_speed = (avg_speed * rng.gen_range(1.6..2.6)).min(135.0);
        let num_stops = rng.gen_range(1..15);
        let stop_time = (total_time * rng.gen_range(0.05..0.25)).round();
        let spec = SynthSpec { total_time, avg_speed, max_speed, num_stops, stop_time, seed: rng.gen() };
        if let Ok(mut c) = cycle::synthesize(&spec) {
            c.name = format!("random{k}");
            out.push(c);
            k += 1;
        }
    }
    out
}

/// Builds the window dataset for `sc`'s vehicle and trains the forecast
/// model on it.
pub fn train_predictor(sc: &ScenarioConfig, hyper: &Hyper) -> Result<(RegressionModel, Dataset), SimError> {
    let corpus = training_corpus(sc.seed);
    let ds = predictor::build_dataset(&corpus, sc.horizon, sc.seed, |w| ev_consumption(sc, w).map_err(|e| e.to_string()))?;
    let model = predictor::train(&ds, hyper)?;
    Ok((model, ds))
}

type ModelCache = Mutex<HashMap<String, Arc<RegressionModel>>>;

fn auto_model(sc: &ScenarioConfig, hyper: &Hyper) -> Result<Arc<RegressionModel>, SimError> {
    static CACHE: OnceLock<ModelCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = serde_json::to_string(&(&sc.model, sc.soh, sc.ambient, sc.dt, sc.horizon, sc.seed, hyper))
        .expect("parameters serialize");
    if let Some(m) = cache.lock().expect("cache lock").get(&key) {
        return Ok(m.clone());
    }
    let (model, _) = train_predictor(sc, hyper)?;
    let model = Arc::new(model);
    cache.lock().expect("cache lock").insert(key, model.clone());
    Ok(model)
}

/// Distance at which a piecewise-linear SOC-versus-distance curve first
/// reaches `floor`. Points are `(km, soc)`.
pub fn floor_crossing(points: &[(f64, f64)], floor: f64) -> Option<f64> {
    let first = points.first()?;
    if first.1 <= floor {
        return Some(first.0);
    }
    points.windows(2).find_map(|w| {
        let ((d0, s0), (d1, s1)) = (w[0], w[1]);
        (s1 <= floor).then(|| d0 + (d1 - d0) * (s0 - floor) / (s0 - s1))
    })
}

/// Upper bound on cycle repetitions in [`ev_range`].
const RANGE_MAX_REPEATS: usize = 10_000;

/// Pure-electric distance from `sc.init_soc` down to the usable floor,
/// repeating the cycle as needed, km. Returns infinity when a full cycle
/// does not lower the SOC.
pub fn ev_range(sc: &ScenarioConfig) -> Result<f64, SimError> {
    sc.validate()?;
    let floor = battery::apply_soh(&sc.model.cell, &sc.model.pack, sc.soh).1.soc_floor();
    if sc.init_soc <= floor {
        return Ok(0.0);
    }
    let mut run_sc = sc.clone();
    run_sc.forced_mode = Some(OperatingMode::EV);
    run_sc.predictor = SocPredictor::Off;
    let mut dist = 0.0;
    for _ in 0..RANGE_MAX_REPEATS {
        let out = simulate(&run_sc, &Lookahead::Off)?;
        let mut pts = Vec::with_capacity(out.trace.len() + 1);
        pts.push((dist, run_sc.init_soc));
        let (mut t_prev, mut v_prev) = (0.0, run_sc.cycle.samples()[0].v);
        for r in &out.trace {
            dist += (v_prev + r.v) / 2.0 / 3600.0 * (r.t - t_prev);
            (t_prev, v_prev) = (r.t, r.v);
            pts.push((dist, r.soc));
        }
        if let Some(d) = floor_crossing(&pts, floor) {
            return Ok(d);
        }
        if out.summary.delta_soc <= 0.0 {
            return Ok(f64::INFINITY);
        }
        run_sc.init_soc = out.summary.final_soc;
    }
    Ok(f64::INFINITY)
}

/// Ramp from standstill at [`RAMP_ACCEL`] to `speed` km/h, then hold it
/// until `duration` s, on a 1 s grid.
pub fn constant_speed_cycle(speed: f64, duration: f64) -> Result<DrivingCycle, CycleError> {
    let n = duration.round().max(1.0) as usize;
    let step = RAMP_ACCEL * 3.6;
    let speeds: Vec<f64> = (0..=n).map(|k| (k as f64 * step).min(speed)).collect();
    DrivingCycle::from_speeds(format!("constant{speed}"), 1.0, &speeds)
}

/// One run per speed at constant cruise. A zero speed yields an all-zero
/// summary. Results follow the input order.
pub fn sweep_constant_speed(speeds: &[f64], duration: f64, base: &ScenarioConfig) -> Result<Vec<Summary>, SimError> {
    if let Some(s) = speeds.iter().find(|s| !(**s >= 0.0)) {
        return Err(SimError::Config(format!("speeds must be non-negative, got {s}")));
    }
    prime_predictor(base)?;
    speeds
        .par_iter()
        .map(|&speed| {
            if speed == 0.0 {
                return Ok(Summary::zeroed("constant0", base.init_soc));
            }
            let sc = base.with_cycle(constant_speed_cycle(speed, duration)?);
            Ok(run(&sc)?.summary)
        })
        .collect()
}

/// One run per initial SOC, otherwise identical.
pub fn sweep_init_soc(socs: &[f64], base: &ScenarioConfig) -> Result<Vec<Summary>, SimError> {
    prime_predictor(base)?;
    socs.par_iter()
        .map(|&soc| run(&ScenarioConfig { init_soc: soc, ..base.clone() }).map(|o| o.summary))
        .collect()
}

/// One run per battery state of health, otherwise identical.
pub fn sweep_soh(sohs: &[f64], base: &ScenarioConfig) -> Result<Vec<Summary>, SimError> {
    sohs.par_iter()
        .map(|&soh| run(&ScenarioConfig { soh, ..base.clone() }).map(|o| o.summary))
        .collect()
}

/// Trains the shared forecast model once before a parallel sweep.
fn prime_predictor(base: &ScenarioConfig) -> Result<(), SimError> {
    if base.forced_mode.is_none() {
        if let SocPredictor::Auto { hyper } = &base.predictor {
            auto_model(base, hyper)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quick(cycle: DrivingCycle) -> ScenarioConfig {
        ScenarioConfig { predictor: SocPredictor::Constant { per_km: DEFAULT_FALLBACK_PER_KM }, ..ScenarioConfig::new(cycle) }
    }

    #[test]
    fn standstill_only_runs_auxiliaries() {
        let sc = quick(DrivingCycle::from_speeds("idle", 1.0, &[0.0; 201]).unwrap());
        let s = run(&sc).unwrap().summary;
        assert_eq!(s.distance, 0.0);
        assert_eq!(s.fuel_liters, 0.0);
        assert!(s.delta_soc > 0.0 && s.delta_soc <= 0.1, "{}", s.delta_soc);
    }

    #[test]
    fn floor_crossing_at_constant_consumption() {
        // 190 Wh/km from a 20 kWh pack is 0.95 % per km
        let pts: Vec<(f64, f64)> = (0..=100).map(|k| (k as f64, 100.0 - 0.95 * k as f64)).collect();
        assert_relative_eq!(floor_crossing(&pts, 20.0).unwrap(), 16000.0 / 190.0, max_relative = 1e-12);
        assert_eq!(floor_crossing(&pts, 100.0), Some(0.0));
        assert_eq!(floor_crossing(&pts[..10], 20.0), None);
    }

    #[test]
    fn range_is_zero_at_the_floor() {
        let sc = ScenarioConfig { init_soc: 20.0, ..quick(DrivingCycle::wltc()) };
        assert_eq!(ev_range(&sc).unwrap(), 0.0);
    }

    #[test]
    fn balances_close_every_step_and_overall() {
        let sc = quick(DrivingCycle::wltc());
        let s = run(&sc).unwrap().summary;
        assert!(s.max_bus_residual < 1e-9 && s.max_wheel_residual < 1e-9);
        assert!(s.ledger.relative_residual() < 5e-3, "{:?}", s.ledger);
    }

    #[test]
    fn trace_invariants() {
        let sc = quick(DrivingCycle::wltc());
        let out = run(&sc).unwrap();
        let ceiling = sc.model.pack.soc_ceiling();
        let mut last_switch = f64::NEG_INFINITY;
        for w in out.trace.windows(2) {
            assert!(w[1].fuel_cum >= w[0].fuel_cum);
            for s in Species::ALL {
                assert!(w[1].emissions_cum(s) >= w[0].emissions_cum(s));
            }
            assert!(w[1].soc <= ceiling && w[1].soc >= 0.0);
            if w[1].mode != w[0].mode {
                // the step ending at w[1].t started at w[0].t
                let t_switch = w[0].t;
                assert!(t_switch - last_switch >= sc.controller.min_dwell - 1e-9);
                last_switch = t_switch;
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let sc = quick(DrivingCycle::wltc());
        let a = run(&sc).unwrap();
        let b = run(&sc).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn fc_total_is_the_sum() {
        let s = run(&quick(DrivingCycle::wltc())).unwrap().summary;
        assert_eq!(s.fc_total, s.fc_gasoline + s.fc_elect);
        if s.energy_split.ice + s.energy_split.battery > 0.0 {
            assert_relative_eq!(s.energy_split.ice + s.energy_split.battery, 100.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn forced_ev_burns_no_fuel() {
        let sc = ScenarioConfig { forced_mode: Some(OperatingMode::EV), init_soc: 100.0, ..quick(DrivingCycle::wltc()) };
        let s = run(&sc).unwrap().summary;
        assert_eq!(s.fuel_liters, 0.0);
        assert!(s.delta_soc > 0.0);
        assert_eq!(s.ev_time_fraction, 1.0);
    }

    #[test]
    fn zero_speed_in_sweep() {
        let base = quick(DrivingCycle::wltc());
        let out = sweep_constant_speed(&[0.0, 30.0], 600.0, &base).unwrap();
        assert_eq!(out[0], Summary::zeroed("constant0", base.init_soc));
        assert!(out[1].distance > 4.0);
    }

    #[test]
    fn identical_socs_identical_summaries() {
        let base = quick(DrivingCycle::wltc());
        let out = sweep_init_soc(&[70.0, 70.0], &base).unwrap();
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn constant_speed_cycle_shape() {
        let c = constant_speed_cycle(90.0, 600.0).unwrap();
        assert_eq!(c.duration(), 600.0);
        assert_eq!(c.samples()[0].v, 0.0);
        assert_eq!(c.samples()[50].v, 90.0);
        assert_eq!(c.samples()[600].v, 90.0);
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let base = quick(DrivingCycle::wltc());
        assert!(run(&ScenarioConfig { dt: 0.0, ..base.clone() }).is_err());
        assert!(run(&ScenarioConfig { init_soc: 10.0, ..base.clone() }).is_err());
        assert!(run(&ScenarioConfig { soh: 0.0, ..base }).is_err());
    }
}
