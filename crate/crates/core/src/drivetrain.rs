//! Electric machines, generator and the per-mode power split.
//!
//! Sign conventions: wheel and machine mechanical powers are positive when
//! driving the vehicle, battery power is positive when discharging, motor
//! electrical power is positive when drawn from the DC bus.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{self, BatteryState, CellParams, PackConfig};
use crate::engine::{self, BatteryBuffer, EngineMap};

/// Below this wheel speed regeneration fades out linearly, km/h.
pub const REGEN_FADE_KMH: f64 = 5.0;
/// Powers below this are treated as zero, kW.
const P_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DrivetrainError {
    #[error("machine asked for {power:.2} kW, limit {max:.2} kW")]
    MachineOverload { power: f64, max: f64 },
    #[error("demand exceeds available power by {shortfall:.2} kW")]
    InfeasibleDemand { shortfall: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum OperatingMode {
    EV,
    Series,
    Parallel,
    ICE,
}

impl OperatingMode {
    /// Fixed preference order used to break ties.
    pub const ALL: [OperatingMode; 4] =
        [OperatingMode::EV, OperatingMode::Series, OperatingMode::Parallel, OperatingMode::ICE];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatingMode::EV => "EV",
            OperatingMode::Series => "Series",
            OperatingMode::Parallel => "Parallel",
            OperatingMode::ICE => "ICE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for OperatingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Machine with efficiency `η(P) = η_peak − c·(P/max − p_opt)²`, floored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineParams {
    /// kW
    pub max_power: f64,
    /// N·m
    pub max_torque: f64,
    /// kW
    pub rated_power: f64,
    pub eta_peak: f64,
    pub eta_c: f64,
    pub p_opt: f64,
    pub eta_min: f64,
}

impl MachineParams {
    pub fn front_motor() -> Self {
        Self { max_power: 60.0, max_torque: 137.0, rated_power: 30.0, eta_peak: 0.80, eta_c: 1.0, p_opt: 0.12, eta_min: 0.70 }
    }

    pub fn rear_motor() -> Self {
        Self { max_power: 70.0, max_torque: 195.0, rated_power: 35.0, eta_peak: 0.80, eta_c: 1.0, p_opt: 0.12, eta_min: 0.70 }
    }

    pub fn generator() -> Self {
        Self { max_power: 70.0, max_torque: 0.0, rated_power: 25.0, eta_peak: 0.94, eta_c: 0.5, p_opt: 0.40, eta_min: 0.75 }
    }

    /// Efficiency at mechanical power magnitude `p`, kW.
    pub fn efficiency(&self, p: f64) -> f64 {
        let x = p.abs() / self.max_power - self.p_opt;
        (self.eta_peak - self.eta_c * x * x).max(self.eta_min).min(1.0)
    }

    pub fn validate(&self, name: &str) -> Result<(), String> {
        if !(self.max_power >= self.rated_power && self.rated_power > 0.0) {
            return Err(format!("{name}: need max_power >= rated_power > 0"));
        }
        if !(self.eta_min > 0.0 && self.eta_peak <= 1.0 && self.eta_min <= self.eta_peak && self.eta_c >= 0.0) {
            return Err(format!("{name}: efficiency must stay within (0, 1]"));
        }
        Ok(())
    }
}

/// Electrical power for a mechanical power, kW. Driving draws `P/η`,
/// regeneration returns `P·η`.
pub fn motor_elec_power(p_mech: f64, mp: &MachineParams) -> Result<f64, DrivetrainError> {
    if p_mech.abs() > mp.max_power * (1.0 + 1e-12) {
        return Err(DrivetrainError::MachineOverload { power: p_mech, max: mp.max_power });
    }
    let eta = mp.efficiency(p_mech);
    Ok(if p_mech >= 0.0 { p_mech / eta } else { p_mech * eta })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrivetrainParams {
    pub front: MachineParams,
    pub rear: MachineParams,
    pub generator: MachineParams,
    /// Engine-to-wheel mechanical efficiency.
    pub gear_efficiency: f64,
    /// Constant auxiliary load, kW.
    pub p_aux: f64,
    /// Charge-sustaining target, %.
    pub soc_target: f64,
    /// Extra charging requested per SOC point below the target, kW/%.
    pub charge_gain: f64,
    /// Cap on deliberate engine charging, kW (electrical).
    pub charge_max: f64,
    /// Engine load (fraction of its maximum) above which the motors assist
    /// in Parallel mode while the SOC is above the target.
    pub assist_load: f64,
}

impl Default for DrivetrainParams {
    fn default() -> Self {
        Self {
            front: MachineParams::front_motor(),
            rear: MachineParams::rear_motor(),
            generator: MachineParams::generator(),
            gear_efficiency: 0.95,
            p_aux: 0.1,
            soc_target: 80.0,
            charge_gain: 0.5,
            charge_max: 15.0,
            assist_load: 0.42,
        }
    }
}

impl DrivetrainParams {
    /// Combined traction rating, kW.
    pub fn traction_max(&self) -> f64 {
        self.front.max_power + self.rear.max_power
    }

    /// Bus power drawn by both motors delivering `p_mech` at the wheels,
    /// shared in proportion to their ratings.
    pub fn traction_elec(&self, p_mech: f64) -> Result<f64, DrivetrainError> {
        let total = self.traction_max();
        if p_mech.abs() > total * (1.0 + 1e-12) {
            return Err(DrivetrainError::MachineOverload { power: p_mech, max: total });
        }
        let pf = p_mech * self.front.max_power / total;
        let pr = p_mech - pf;
        Ok(motor_elec_power(pf, &self.front)? + motor_elec_power(pr, &self.rear)?)
    }

    /// Generator electrical output for `p_mech` kW of shaft input.
    pub fn generator_elec(&self, p_mech: f64) -> f64 {
        p_mech * self.generator.efficiency(p_mech)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.front.validate("drivetrain.front")?;
        self.rear.validate("drivetrain.rear")?;
        self.generator.validate("drivetrain.generator")?;
        if !(self.gear_efficiency > 0.0 && self.gear_efficiency <= 1.0) {
            return Err("drivetrain.gear_efficiency must lie in (0, 1]".into());
        }
        if !(self.p_aux >= 0.0) {
            return Err("drivetrain.p_aux must be nonnegative".into());
        }
        if !(0.0..=100.0).contains(&self.soc_target) {
            return Err("drivetrain.soc_target must lie in [0, 100]".into());
        }
        if !(self.assist_load > 0.0 && self.assist_load <= 1.0) {
            return Err("drivetrain.assist_load must lie in (0, 1]".into());
        }
        Ok(())
    }

    /// Traction power at the wheels whose bus draw equals `elec`, for
    /// `elec` in `[0, traction_elec(max)]`.
    fn traction_for_elec(&self, elec: f64) -> f64 {
        invert_increasing(|p| self.traction_elec(p).unwrap_or(f64::INFINITY), elec, self.traction_max())
    }

    /// Regenerated wheel power whose bus return equals `elec` (positive).
    fn regen_for_elec(&self, elec: f64) -> f64 {
        invert_increasing(|p| -self.traction_elec(-p).unwrap_or(f64::NEG_INFINITY), elec, self.traction_max())
    }

    /// Generator shaft power producing `elec` kW.
    fn generator_for_elec(&self, elec: f64) -> f64 {
        invert_increasing(|p| self.generator_elec(p), elec, self.generator.max_power)
    }
}

/// Solves `f(x) = y` on `[0, hi]` for increasing `f`; clamps outside the range.
fn invert_increasing(f: impl Fn(f64) -> f64, y: f64, hi: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if f(hi) <= y {
        return hi;
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..100 {
        let mid = 0.5 * (lo + up);
        if f(mid) <= y {
            lo = mid;
        } else {
            up = mid;
        }
        if up - lo <= 1e-12 * hi {
            break;
        }
    }
    lo
}

/// Bus-side charge power the drivetrain may return by regenerative braking
/// at `v` m/s, kW (positive).
pub fn regen_capacity(v: f64, state: &BatteryState, front: &MachineParams, rear: &MachineParams, cp: &CellParams, pc: &PackConfig) -> f64 {
    let kmh = v * 3.6;
    if kmh <= 0.0 {
        return 0.0;
    }
    let fade = (kmh / REGEN_FADE_KMH).min(1.0);
    let ratings = front.max_power + rear.max_power;
    ratings.min(battery::max_charge_power(state, cp, pc)) * fade
}

/// A concrete power flow for one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSplit {
    pub mode: OperatingMode,
    /// Wheel demand, kW.
    pub p_demand: f64,
    /// Engine shaft power, kW.
    pub p_engine_mech: f64,
    /// Engine shaft power routed mechanically to the wheels, kW.
    pub p_engine_traction: f64,
    /// Generator output to the bus, kW.
    pub p_gen_elec: f64,
    /// Motor power at the wheels, kW (signed).
    pub p_motor_mech: f64,
    /// Motor power on the bus, kW (signed).
    pub p_motor_elec: f64,
    /// Battery terminal power, kW (discharge-positive).
    pub p_batt: f64,
    /// Power dissipated by friction brakes, kW (≥ 0).
    pub p_friction_brake: f64,
    /// kW
    pub p_aux: f64,
    /// Demand left unserved, kW (≥ 0).
    pub shortfall: f64,
    pub engine_snapped: bool,
}

impl PowerSplit {
    /// Mechanical power reaching the wheels from engine and motors, kW.
    pub fn wheel_delivered(&self, gear_efficiency: f64) -> f64 {
        self.p_engine_traction * gear_efficiency + self.p_motor_mech
    }

    /// `P_batt + P_gen − P_motor − P_aux`; zero up to rounding.
    pub fn bus_residual(&self) -> f64 {
        self.p_batt + self.p_gen_elec - self.p_motor_elec - self.p_aux
    }

    /// `delivered − friction + shortfall − P_d`; zero up to rounding.
    pub fn wheel_residual(&self, gear_efficiency: f64) -> f64 {
        self.wheel_delivered(gear_efficiency) - self.p_friction_brake + self.shortfall - self.p_demand
    }

    pub fn infeasibility(&self) -> Option<DrivetrainError> {
        (self.shortfall > 1e-6).then_some(DrivetrainError::InfeasibleDemand { shortfall: self.shortfall })
    }
}

/// Everything `execute_mode` needs besides the demand.
#[derive(Debug, Clone, Copy)]
pub struct Powertrain<'a> {
    pub drivetrain: &'a DrivetrainParams,
    pub engine: &'a EngineMap,
    pub cell: &'a CellParams,
    pub pack: &'a PackConfig,
}

struct Limits {
    /// kW the battery can deliver
    discharge: f64,
    /// kW the battery can absorb (positive)
    charge: f64,
}

/// Turns a mode decision and wheel demand `p_d` (kW) at speed `v` (m/s)
/// into a power flow that satisfies the bus and wheel balances. Demand that
/// cannot be met is reported in `shortfall`.
pub fn execute_mode(mode: OperatingMode, p_d: f64, v: f64, state: &BatteryState, pt: &Powertrain) -> PowerSplit {
    let dtp = pt.drivetrain;
    let lim = Limits {
        discharge: battery::max_discharge_power(state, pt.cell, pt.pack),
        charge: battery::max_charge_power(state, pt.cell, pt.pack),
    };
    let mut s = PowerSplit {
        mode,
        p_demand: p_d,
        p_engine_mech: 0.0,
        p_engine_traction: 0.0,
        p_gen_elec: 0.0,
        p_motor_mech: 0.0,
        p_motor_elec: 0.0,
        p_batt: 0.0,
        p_friction_brake: 0.0,
        p_aux: dtp.p_aux,
        shortfall: 0.0,
        engine_snapped: false,
    };

    if p_d < 0.0 {
        // braking: engine off; in ICE mode the friction brakes do the work
        if mode != OperatingMode::ICE {
            let cap = regen_capacity(v, state, &dtp.front, &dtp.rear, pt.cell, pt.pack);
            // the bus also feeds the auxiliaries, so the motors may return
            // that much more than the battery accepts
            let regen = dtp.regen_for_elec(cap + dtp.p_aux).min(-p_d);
            s.p_motor_mech = -regen;
            s.p_motor_elec = dtp.traction_elec(-regen).unwrap_or(0.0);
        }
        finish(&mut s, dtp);
        return s;
    }

    match mode {
        OperatingMode::EV => {
            let want = p_d.min(dtp.traction_max());
            let afford = dtp.traction_for_elec(lim.discharge - dtp.p_aux);
            let m = want.min(afford);
            s.p_motor_mech = m;
            s.p_motor_elec = dtp.traction_elec(m).unwrap_or(0.0);
        }
        OperatingMode::Series => series(&mut s, state, &lim, pt),
        OperatingMode::Parallel => parallel(&mut s, state, &lim, pt),
        OperatingMode::ICE => ice(&mut s, state, &lim, pt),
    }
    finish(&mut s, dtp);
    s
}

/// Deliberate charging requested at the present SOC, kW (electrical).
fn charge_request(state: &BatteryState, dtp: &DrivetrainParams, lim: &Limits) -> f64 {
    let deficit = (dtp.soc_target - state.soc).max(0.0);
    (deficit * dtp.charge_gain).min(dtp.charge_max).min(lim.charge)
}

fn series(s: &mut PowerSplit, state: &BatteryState, lim: &Limits, pt: &Powertrain) {
    let dtp = pt.drivetrain;
    let map = pt.engine;
    let gen_cap_elec = dtp.generator_elec(dtp.generator.max_power.min(map.max_power));
    let want = s.p_demand.min(dtp.traction_max());
    // traction bus draw the generator and battery together can supply
    let m = want.min(dtp.traction_for_elec(gen_cap_elec + lim.discharge - dtp.p_aux));
    s.p_motor_mech = m;
    s.p_motor_elec = dtp.traction_elec(m).unwrap_or(0.0);

    let load = s.p_motor_elec + dtp.p_aux;
    let bias = charge_request(state, dtp, lim);
    let mech_cap = dtp.generator.max_power.min(map.max_power);
    let p_req = dtp.generator_for_elec(load + bias).min(mech_cap);
    let charge_room = dtp.generator_for_elec(load + lim.charge) - p_req;
    let discharge_room = if state.soc > dtp.soc_target { (p_req - dtp.generator_for_elec((load - lim.discharge).max(0.0))).max(0.0) } else { 0.0 };
    let point = engine::best_bsfc_power(
        map,
        p_req,
        BatteryBuffer { charge_kw: charge_room.max(0.0), discharge_kw: discharge_room },
    );
    // never push more into the battery than it accepts
    let max_mech = dtp.generator_for_elec(load + lim.charge).min(mech_cap);
    let p_eng = point.power.min(max_mech);
    s.engine_snapped = point.snapped;
    s.p_engine_mech = p_eng;
    s.p_gen_elec = dtp.generator_elec(p_eng);
}

fn parallel(s: &mut PowerSplit, state: &BatteryState, lim: &Limits, pt: &Powertrain) {
    let dtp = pt.drivetrain;
    let map = pt.engine;
    let g = dtp.gear_efficiency;
    let need = s.p_demand / g;
    let p_opt = map.optimal_power();
    let p_assist = (dtp.assist_load * map.max_power).max(p_opt);
    let bias = charge_request(state, dtp, lim);
    let target = if bias > 0.0 { need + dtp.regen_for_elec(bias + dtp.p_aux) / g } else { need };
    let mut p_eng = target.min(map.max_power);
    if target < p_opt && state.soc < pt.pack.soc_ceiling() {
        // run harder toward best BSFC and charge with the surplus
        let room_mech = dtp.regen_for_elec(lim.charge + dtp.p_aux) / g;
        p_eng = p_opt.min(need + room_mech).max(target);
        s.engine_snapped = p_eng > target;
    } else if need > p_assist && state.soc > dtp.soc_target {
        // hold the engine at the top of its efficient band, motors assist
        let motor_avail = dtp.traction_max().min(dtp.traction_for_elec(lim.discharge - dtp.p_aux));
        p_eng = p_assist.max(need - motor_avail / g).min(map.max_power);
    }
    if p_eng < P_EPS {
        p_eng = 0.0;
    }
    s.p_engine_mech = p_eng;
    s.p_engine_traction = p_eng;
    let residual = s.p_demand - p_eng * g;
    assign_motor(s, residual, lim, dtp);
}

fn ice(s: &mut PowerSplit, state: &BatteryState, lim: &Limits, pt: &Powertrain) {
    let dtp = pt.drivetrain;
    let map = pt.engine;
    let g = dtp.gear_efficiency;
    let need = s.p_demand / g;
    let mut p_eng = need.min(map.max_power);
    if state.soc < dtp.soc_target && p_eng > 0.0 {
        let bias = charge_request(state, dtp, lim);
        let surplus = dtp.regen_for_elec(bias + dtp.p_aux) / g;
        let headroom = (map.optimal_power().max(need) - need).max(0.0);
        p_eng = (need + surplus.min(headroom)).min(map.max_power);
        s.engine_snapped = p_eng > need;
    }
    s.p_engine_mech = p_eng;
    s.p_engine_traction = p_eng;
    let residual = s.p_demand - p_eng * g;
    if residual < 0.0 {
        assign_motor(s, residual, lim, dtp);
    }
}

/// Lets the motors take `residual` wheel power: assist when positive,
/// absorb surplus engine power when negative. Limits apply.
fn assign_motor(s: &mut PowerSplit, residual: f64, lim: &Limits, dtp: &DrivetrainParams) {
    let m = if residual >= 0.0 {
        residual.min(dtp.traction_max()).min(dtp.traction_for_elec(lim.discharge - dtp.p_aux))
    } else {
        let absorb = (-residual).min(dtp.regen_for_elec(lim.charge + dtp.p_aux));
        if absorb < -residual {
            // surplus the battery cannot take: back the engine off instead
            let excess = -residual - absorb;
            let g = dtp.gear_efficiency;
            s.p_engine_mech = (s.p_engine_mech - excess / g).max(0.0);
            s.p_engine_traction = s.p_engine_mech;
        }
        -absorb
    };
    s.p_motor_mech = m;
    s.p_motor_elec = dtp.traction_elec(m).unwrap_or(0.0);
}

/// Closes the bus with the battery and the wheel with brakes or shortfall.
fn finish(s: &mut PowerSplit, dtp: &DrivetrainParams) {
    s.p_batt = s.p_motor_elec + s.p_aux - s.p_gen_elec;
    let delivered = s.wheel_delivered(dtp.gear_efficiency);
    let gap = s.p_demand - delivered;
    if gap >= 0.0 {
        s.shortfall = gap;
    } else {
        s.p_friction_brake = -gap;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fixtures() -> (DrivetrainParams, EngineMap, CellParams, PackConfig) {
        (DrivetrainParams::default(), EngineMap::default(), CellParams::default(), PackConfig::default())
    }

    #[test]
    fn motor_power_examples() {
        let flat = MachineParams { eta_peak: 0.9, eta_c: 0.0, eta_min: 0.5, ..MachineParams::rear_motor() };
        assert_eq!(motor_elec_power(0.0, &flat).unwrap(), 0.0);
        assert_relative_eq!(motor_elec_power(50.0, &flat).unwrap(), 55.56, epsilon = 0.01);
        assert_relative_eq!(motor_elec_power(-50.0, &flat).unwrap(), -45.0, max_relative = 1e-12);
        assert!(matches!(motor_elec_power(80.0, &flat), Err(DrivetrainError::MachineOverload { .. })));
    }

    #[test]
    fn regen_capacity_examples() {
        let (dtp, _, cp, pc) = fixtures();
        let mid = BatteryState::new(50.0, 25.0, &cp);
        assert_eq!(regen_capacity(0.0, &mid, &dtp.front, &dtp.rear, &cp, &pc), 0.0);
        let full = BatteryState::new(100.0, 25.0, &cp);
        assert_eq!(regen_capacity(60.0 / 3.6, &full, &dtp.front, &dtp.rear, &cp, &pc), 0.0);
        let pc40 = PackConfig { max_charge_kw: 40.0, ..pc.clone() };
        assert_relative_eq!(regen_capacity(60.0 / 3.6, &mid, &dtp.front, &dtp.rear, &cp, &pc40), 40.0);
        let slow = regen_capacity(2.5 / 3.6, &mid, &dtp.front, &dtp.rear, &cp, &pc40);
        assert_relative_eq!(slow, 20.0, max_relative = 1e-9);
    }

    fn check_balances(s: &PowerSplit, dtp: &DrivetrainParams) {
        assert!(s.bus_residual().abs() < 1e-9, "bus residual {}", s.bus_residual());
        assert!(s.wheel_residual(dtp.gear_efficiency).abs() < 1e-9, "wheel residual");
        assert!(s.p_friction_brake >= 0.0 && s.shortfall >= 0.0);
    }

    #[test]
    fn ev_drive_and_brake() {
        let (dtp, map, cp, pc) = fixtures();
        let pt = Powertrain { drivetrain: &dtp, engine: &map, cell: &cp, pack: &pc };
        let state = BatteryState::new(60.0, 25.0, &cp);
        let s = execute_mode(OperatingMode::EV, 10.0, 10.0, &state, &pt);
        assert_eq!(s.p_engine_mech, 0.0);
        assert!(s.p_motor_elec > 10.0);
        check_balances(&s, &dtp);

        let b = execute_mode(OperatingMode::EV, -20.0, 60.0 / 3.6, &state, &pt);
        assert!(b.p_batt < 0.0);
        assert_eq!(b.p_engine_mech, 0.0);
        check_balances(&b, &dtp);

        let hard = execute_mode(OperatingMode::EV, -100.0, 60.0 / 3.6, &state, &pt);
        assert!(hard.p_friction_brake > 0.0);
        assert!(-hard.p_batt <= battery::max_charge_power(&state, &cp, &pc) + 1e-6);
        check_balances(&hard, &dtp);
    }

    #[test]
    fn series_routes_engine_through_generator() {
        let (dtp, map, cp, pc) = fixtures();
        let pt = Powertrain { drivetrain: &dtp, engine: &map, cell: &cp, pack: &pc };
        // above the charge-sustaining target no extra charging is requested
        let state = BatteryState::new(85.0, 25.0, &cp);
        let s = execute_mode(OperatingMode::Series, 20.0, 15.0, &state, &pt);
        assert_eq!(s.p_engine_traction, 0.0);
        assert_relative_eq!(s.p_engine_mech, map.optimal_power(), max_relative = 1e-9);
        assert!(s.engine_snapped);
        // the battery absorbs generator output minus motor and aux draw
        assert_relative_eq!(-s.p_batt, s.p_gen_elec - s.p_motor_elec - s.p_aux, max_relative = 1e-12);
        assert!(s.p_batt < 0.0);
        check_balances(&s, &dtp);
    }

    #[test]
    fn parallel_and_ice_balances() {
        let (dtp, map, cp, pc) = fixtures();
        let pt = Powertrain { drivetrain: &dtp, engine: &map, cell: &cp, pack: &pc };
        for soc in [25.0, 60.0, 95.0] {
            let state = BatteryState::new(soc, 25.0, &cp);
            for p in [0.0, 5.0, 25.0, 60.0, 110.0, 180.0] {
                for mode in [OperatingMode::Parallel, OperatingMode::ICE] {
                    let s = execute_mode(mode, p, 25.0, &state, &pt);
                    check_balances(&s, &dtp);
                    assert!(s.p_engine_mech <= map.max_power + 1e-9);
                }
            }
        }
        let state = BatteryState::new(60.0, 25.0, &cp);
        let s = execute_mode(OperatingMode::ICE, 200.0, 30.0, &state, &pt);
        assert!(s.infeasibility().is_some());
        assert_eq!(s.p_motor_mech, 0.0);
    }

    #[test]
    fn ice_charges_below_target() {
        let (dtp, map, cp, pc) = fixtures();
        let pt = Powertrain { drivetrain: &dtp, engine: &map, cell: &cp, pack: &pc };
        let low = BatteryState::new(40.0, 25.0, &cp);
        let s = execute_mode(OperatingMode::ICE, 15.0, 20.0, &low, &pt);
        assert!(s.p_motor_mech < 0.0 && s.p_batt < 0.0);
        let high = BatteryState::new(90.0, 25.0, &cp);
        let s = execute_mode(OperatingMode::ICE, 15.0, 20.0, &high, &pt);
        assert_eq!(s.p_motor_mech, 0.0);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in OperatingMode::ALL {
            assert_eq!(OperatingMode::parse(m.name()), Some(m));
        }
    }
}
