//! Lithium-ion pack equivalent-circuit model.
//!
//! Current is discharge-positive everywhere: a positive `I` drains the pack
//! and lowers its terminal voltage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const KELVIN: f64 = 273.15;
/// SOC excursions smaller than this are rounding, not clamping.
const SOC_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BatteryError {
    #[error("pack current {current:.1} A exceeds the {limit:.1} A limit")]
    CurrentLimit { current: f64, limit: f64 },
    #[error("requested {requested:.2} kW exceeds the deliverable maximum {max:.2} kW")]
    PowerInfeasible { requested: f64, max: f64 },
    #[error("end-of-life resistance {r_eol} must exceed new-cell resistance {r_new}")]
    DegenerateBounds { r_eol: f64, r_new: f64 },
    #[error("OCV curve: {0}")]
    BadCurve(String),
}

/// One RC diffusion branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcBranch {
    /// Ω
    pub r: f64,
    /// F
    pub c: f64,
}

impl RcBranch {
    pub fn tau(&self) -> f64 {
        self.r * self.c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellParams {
    /// Rated capacity, A·s.
    pub q_rated: f64,
    /// `(soc %, V)` breakpoints, piecewise linear.
    pub ocv_curve: Vec<[f64; 2]>,
    /// Hysteresis midline; `None` means no hysteresis offset.
    pub ocv_eq_curve: Option<Vec<[f64; 2]>>,
    /// Ω
    pub r_ohm: f64,
    /// Ω
    pub r_ct: f64,
    pub rc_branches: Vec<RcBranch>,
    /// Entropic coefficient, V/K.
    pub du_dt: f64,
    pub eta_farad: f64,
}

impl Default for CellParams {
    fn default() -> Self {
        Self {
            q_rated: 126_245.0,
            ocv_curve: vec![
                [0.0, 3.00],
                [5.0, 3.30],
                [10.0, 3.42],
                [20.0, 3.50],
                [40.0, 3.56],
                [60.0, 3.61],
                [80.0, 3.67],
                [90.0, 3.71],
                [100.0, 3.75],
            ],
            ocv_eq_curve: None,
            r_ohm: 4.0e-3,
            r_ct: 0.5e-3,
            rc_branches: vec![RcBranch { r: 0.5e-3, c: 40_000.0 }],
            du_dt: 1.0e-4,
            eta_farad: 0.99,
        }
    }
}

impl CellParams {
    pub fn ocv(&self, soc: f64) -> f64 {
        interp(&self.ocv_curve, soc)
    }

    pub fn ocv_eq(&self, soc: f64) -> f64 {
        match &self.ocv_eq_curve {
            Some(c) => interp(c, soc),
            None => self.ocv(soc),
        }
    }

    /// Series resistance seen instantly by a step in current, Ω per cell.
    pub fn r_series(&self) -> f64 {
        self.r_ohm + self.r_ct
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.q_rated > 0.0) {
            return Err(format!("battery.cell.q_rated must be positive, got {}", self.q_rated));
        }
        check_curve(&self.ocv_curve).map_err(|e| e.to_string())?;
        if let Some(c) = &self.ocv_eq_curve {
            check_curve(c).map_err(|e| e.to_string())?;
        }
        let rs = [self.r_ohm, self.r_ct];
        if rs.iter().chain(self.rc_branches.iter().map(|b| &b.r)).any(|r| !(*r >= 0.0)) {
            return Err("battery resistances must be nonnegative".into());
        }
        if self.rc_branches.iter().any(|b| !(b.c > 0.0)) {
            return Err("RC capacitances must be positive".into());
        }
        if !(self.eta_farad > 0.0 && self.eta_farad <= 1.0) {
            return Err(format!("battery.cell.eta_farad must lie in (0, 1], got {}", self.eta_farad));
        }
        Ok(())
    }
}

fn check_curve(c: &[[f64; 2]]) -> Result<(), BatteryError> {
    if c.len() < 2 {
        return Err(BatteryError::BadCurve("need at least 2 points".into()));
    }
    for w in c.windows(2) {
        if w[1][0] <= w[0][0] {
            return Err(BatteryError::BadCurve("SOC breakpoints must increase".into()));
        }
        if w[1][1] < w[0][1] {
            return Err(BatteryError::BadCurve("OCV must be nondecreasing in SOC".into()));
        }
    }
    Ok(())
}

/// Parses a `soc,ocv` CSV curve.
pub fn parse_ocv_curve(text: &str) -> Result<Vec<[f64; 2]>, BatteryError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.deserialize::<(f64, f64)>() {
        let (s, v) = rec.map_err(|e| BatteryError::BadCurve(e.to_string()))?;
        out.push([s, v]);
    }
    check_curve(&out)?;
    Ok(out)
}

fn interp(c: &[[f64; 2]], x: f64) -> f64 {
    if x <= c[0][0] {
        return c[0][1];
    }
    let last = c[c.len() - 1];
    if x >= last[0] {
        return last[1];
    }
    let hi = c.partition_point(|p| p[0] <= x);
    let (a, b) = (c[hi - 1], c[hi]);
    a[1] + (x - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
}

/// Integral of a piecewise-linear curve from 0 to `x`.
fn integral(c: &[[f64; 2]], x: f64) -> f64 {
    let mut acc = 0.0;
    let mut prev = [0.0, interp(c, 0.0)];
    for p in c.iter().filter(|p| p[0] > 0.0 && p[0] < x) {
        acc += 0.5 * (prev[1] + p[1]) * (p[0] - prev[0]);
        prev = *p;
    }
    let end = interp(c, x);
    acc + 0.5 * (prev[1] + end) * (x - prev[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PackConfig {
    pub n_series: u32,
    pub n_parallel: u32,
    /// Interconnect resistance, Ω.
    pub r_add: f64,
    /// State of health, %.
    pub soh: f64,
    /// Usable SOC window `(floor, ceiling)`, %.
    pub usable_window: (f64, f64),
    /// Heat capacity of the pack, J/K.
    pub c_th: f64,
    /// Heat transfer to ambient, W/K.
    pub h_a: f64,
    /// Nominal energy, kWh (informational; capacity comes from the cells).
    pub nominal_energy: f64,
    /// Pack current limit, A (both directions).
    pub max_current: f64,
    /// Discharge power limit, kW.
    pub max_discharge_kw: f64,
    /// Charge power limit, kW.
    pub max_charge_kw: f64,
    /// Charge power tapers linearly to zero over this many SOC points below
    /// the ceiling.
    pub charge_taper: f64,
    /// End-of-life to new resistance ratio.
    pub r_eol_ratio: f64,
}

impl Default for PackConfig {
    fn default() -> Self {
        Self {
            n_series: 80,
            n_parallel: 2,
            r_add: 0.01,
            soh: 100.0,
            usable_window: (20.0, 100.0),
            c_th: 150_000.0,
            h_a: 20.0,
            nominal_energy: 20.0,
            max_current: 400.0,
            max_discharge_kw: 80.0,
            max_charge_kw: 60.0,
            charge_taper: 2.0,
            r_eol_ratio: 2.0,
        }
    }
}

impl PackConfig {
    /// Table 1 preset: 13.8 kWh at the same 300 V top voltage.
    pub fn table1_preset() -> (CellParams, PackConfig) {
        let cp = CellParams { q_rated: CellParams::default().q_rated * 13.8 / 20.0, ..Default::default() };
        (cp, PackConfig { nominal_energy: 13.8, ..Default::default() })
    }

    pub fn soc_floor(&self) -> f64 {
        self.usable_window.0
    }

    pub fn soc_ceiling(&self) -> f64 {
        self.usable_window.1
    }

    /// Effective capacity of the pack, A·s.
    pub fn q_effective(&self, cp: &CellParams) -> f64 {
        cp.q_rated * self.n_parallel as f64 * self.soh / 100.0
    }

    /// Instantaneous series resistance of the pack, Ω.
    pub fn r_pack(&self, cp: &CellParams) -> f64 {
        self.n_series as f64 / self.n_parallel as f64 * cp.r_series() + self.r_add
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_series < 1 || self.n_parallel < 1 {
            return Err("battery pack needs at least one cell in series and in parallel".into());
        }
        if !(self.soh > 0.0 && self.soh <= 100.0) {
            return Err(format!("battery.pack.soh must lie in (0, 100], got {}", self.soh));
        }
        let (lo, hi) = self.usable_window;
        if !(0.0 <= lo && lo < hi && hi <= 100.0) {
            return Err(format!("battery.pack.usable_window must satisfy 0 <= floor < ceiling <= 100, got ({lo}, {hi})"));
        }
        if !(self.c_th > 0.0 && self.h_a >= 0.0) {
            return Err("battery thermal parameters must be positive".into());
        }
        if !(self.max_current > 0.0 && self.max_discharge_kw > 0.0 && self.max_charge_kw >= 0.0) {
            return Err("battery limits must be positive".into());
        }
        if !(self.r_add >= 0.0) {
            return Err("battery.pack.r_add must be nonnegative".into());
        }
        if !(self.r_eol_ratio > 1.0) {
            return Err("battery.pack.r_eol_ratio must exceed 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    /// %
    pub soc: f64,
    /// Per-cell RC branch voltages, V.
    pub u_diff: Vec<f64>,
    /// Per-cell hysteresis offset, V.
    pub u_hyst: f64,
    /// °C
    pub temp: f64,
    /// A·h moved through the pack terminals, both directions.
    pub throughput_ah: f64,
}

impl BatteryState {
    /// A pack at rest.
    pub fn new(soc: f64, temp: f64, cp: &CellParams) -> Self {
        Self {
            soc,
            u_diff: vec![0.0; cp.rc_branches.len()],
            u_hyst: cp.ocv_eq(soc) - cp.ocv(soc),
            temp,
            throughput_ah: 0.0,
        }
    }

    /// Per-cell open-circuit voltage including hysteresis and RC branches.
    fn cell_source(&self, cp: &CellParams) -> f64 {
        cp.ocv(self.soc) + self.u_hyst + self.u_diff.iter().sum::<f64>()
    }
}

/// Result of [`soc_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct SocUpdate {
    pub state: BatteryState,
    pub clamped: bool,
}

fn eta_eff(i: f64, cp: &CellParams) -> f64 {
    if i < 0.0 {
        cp.eta_farad
    } else {
        1.0
    }
}

/// Coulomb counting over `dt` seconds at pack current `i`.
pub fn soc_step(
    state: &BatteryState,
    i: f64,
    dt: f64,
    cp: &CellParams,
    pc: &PackConfig,
) -> Result<SocUpdate, BatteryError> {
    if i.abs() > pc.max_current * (1.0 + 1e-12) {
        return Err(BatteryError::CurrentLimit { current: i, limit: pc.max_current });
    }
    let raw = state.soc - 100.0 * i * eta_eff(i, cp) * dt / pc.q_effective(cp);
    let clamped = !(-SOC_EPS..=100.0 + SOC_EPS).contains(&raw);
    let soc = raw.clamp(0.0, 100.0);
    let mut next = state.clone();
    next.soc = soc;
    next.u_hyst = cp.ocv_eq(soc) - cp.ocv(soc);
    next.throughput_ah += i.abs() * dt / 3600.0;
    Ok(SocUpdate { state: next, clamped })
}

/// Advances the RC branches by the exact solution for constant current.
pub fn rc_step(state: &BatteryState, i: f64, dt: f64, cp: &CellParams, pc: &PackConfig) -> BatteryState {
    let i_cell = i / pc.n_parallel as f64;
    let mut next = state.clone();
    for (u, b) in next.u_diff.iter_mut().zip(&cp.rc_branches) {
        *u = rc_exact(*u, i_cell, b.r, b.c, dt);
    }
    next
}

/// `u·e^{−dt/τ} − I·R·(1 − e^{−dt/τ})`, evaluated with `expm1` so that small
/// `dt/τ` keeps full precision.
pub fn rc_exact(u: f64, i: f64, r: f64, c: f64, dt: f64) -> f64 {
    let tau = r * c;
    if tau <= 0.0 {
        return -i * r;
    }
    let em1 = (-dt / tau).exp_m1(); // e^{-dt/τ} − 1
    u + (u + i * r) * em1
}

/// Pack terminal voltage at current `i`, V.
pub fn terminal_voltage(state: &BatteryState, i: f64, cp: &CellParams, pc: &PackConfig) -> f64 {
    let i_cell = i / pc.n_parallel as f64;
    pc.n_series as f64 * (state.cell_source(cp) - i_cell * cp.r_series()) - i * pc.r_add
}

/// Per-cell heat sources, W.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct HeatBreakdown {
    /// Cell share of interconnect loss.
    pub q_add: f64,
    pub q_farad: f64,
    /// Reversible entropic heat.
    pub q_entropic: f64,
    pub q_hyst: f64,
    pub q_ohm: f64,
    pub q_ct: f64,
    pub q_diff: f64,
}

impl HeatBreakdown {
    pub fn total(&self) -> f64 {
        self.dissipated() + self.q_entropic
    }

    /// Heat drawn from electrical energy; excludes the reversible term.
    pub fn dissipated(&self) -> f64 {
        self.q_add + self.q_farad + self.q_hyst + self.q_ohm + self.q_ct + self.q_diff
    }
}

/// Heat generated per cell at pack current `i`.
pub fn heat_rate(state: &BatteryState, i: f64, cp: &CellParams, pc: &PackConfig) -> HeatBreakdown {
    let ic = i / pc.n_parallel as f64;
    let eta = eta_eff(i, cp);
    let r_add_cell = pc.r_add * pc.n_parallel as f64 / pc.n_series as f64;
    HeatBreakdown {
        q_add: ic * ic * r_add_cell,
        // charge-side Faraday loss, positive on charge
        q_farad: -ic * cp.ocv_eq(state.soc) * (1.0 - eta),
        q_entropic: -ic * cp.du_dt * (state.temp + KELVIN) * eta,
        q_hyst: -ic * state.u_hyst,
        q_ohm: ic * ic * cp.r_ohm,
        q_ct: ic * ic * cp.r_ct,
        q_diff: -ic * state.u_diff.iter().sum::<f64>(),
    }
}

/// Lumped thermal node update for a pack generating `q_pack` watts.
pub fn thermal_step(state: &BatteryState, q_pack: f64, dt: f64, pc: &PackConfig, ambient: f64) -> BatteryState {
    let mut next = state.clone();
    next.temp = state.temp + dt * (q_pack - pc.h_a * (state.temp - ambient)) / pc.c_th;
    next
}

/// Capacity-based state of health, %.
pub fn soh_capacity(c_a: f64, c_rated: f64) -> f64 {
    100.0 * c_a / c_rated
}

/// Resistance-based state of health, %.
pub fn soh_resistance(r_cur: f64, r_eol: f64, r_new: f64) -> Result<f64, BatteryError> {
    if r_eol <= r_new {
        return Err(BatteryError::DegenerateBounds { r_eol, r_new });
    }
    Ok(100.0 * (r_eol - r_cur) / (r_eol - r_new))
}

/// Resistance multiplier relative to a new cell at the given health.
pub fn resistance_factor(soh: f64, r_eol_ratio: f64) -> f64 {
    1.0 + (100.0 - soh) / 100.0 * (r_eol_ratio - 1.0)
}

/// Ages the parameters to `soh`. Capacity follows through
/// [`PackConfig::q_effective`]; resistances grow linearly toward the
/// end-of-life ratio. Re-applying with a different `soh` rescales from the
/// current health, so calls compose.
pub fn apply_soh(cp: &CellParams, pc: &PackConfig, soh: f64) -> (CellParams, PackConfig) {
    let k = resistance_factor(soh, pc.r_eol_ratio) / resistance_factor(pc.soh, pc.r_eol_ratio);
    if k == 1.0 {
        return (cp.clone(), PackConfig { soh, ..pc.clone() });
    }
    let mut c = cp.clone();
    c.r_ohm *= k;
    c.r_ct *= k;
    for b in &mut c.rc_branches {
        // keep the time constant of each branch
        let tau = b.tau();
        b.r *= k;
        b.c = if b.r > 0.0 { tau / b.r } else { b.c };
    }
    let p = PackConfig { r_add: pc.r_add * k, soh, ..pc.clone() };
    (c, p)
}

/// Pack current (A) delivering `p_kw` at the terminals with RC and
/// hysteresis voltages frozen over the step. Negative power charges.
pub fn solve_current(state: &BatteryState, p_kw: f64, cp: &CellParams, pc: &PackConfig) -> Result<f64, BatteryError> {
    let u_oc = pc.n_series as f64 * state.cell_source(cp);
    solve_quadratic(u_oc, pc.r_pack(cp), p_kw)
}

/// Smaller-magnitude root of `R·I² − U·I + 1000·P = 0`.
pub fn solve_quadratic(u_oc: f64, r: f64, p_kw: f64) -> Result<f64, BatteryError> {
    let p = p_kw * 1000.0;
    if r <= 0.0 {
        return Ok(p / u_oc);
    }
    let disc = u_oc * u_oc - 4.0 * r * p;
    if disc < 0.0 {
        return Err(BatteryError::PowerInfeasible { requested: p_kw, max: max_power_kw(u_oc, r) });
    }
    // rationalized form avoids cancellation for small P
    Ok(2.0 * p / (u_oc + disc.sqrt()))
}

/// Maximum power transferable into a matched load, kW.
pub fn max_power_kw(u_oc: f64, r: f64) -> f64 {
    u_oc * u_oc / (4.0 * r) / 1000.0
}

/// Energy stored between 0% and `soc`, kWh, by integrating the OCV curve.
pub fn stored_energy_kwh(soc: f64, cp: &CellParams, pc: &PackConfig) -> f64 {
    let volt_percent = integral(&cp.ocv_curve, soc);
    pc.q_effective(cp) * pc.n_series as f64 * volt_percent / 100.0 / 3.6e6
}

/// Largest charge power the pack accepts at its present state, kW (positive).
pub fn max_charge_power(state: &BatteryState, cp: &CellParams, pc: &PackConfig) -> f64 {
    let ceiling = pc.soc_ceiling();
    if state.soc >= ceiling {
        return 0.0;
    }
    let taper = if pc.charge_taper > 0.0 { ((ceiling - state.soc) / pc.charge_taper).min(1.0) } else { 1.0 };
    let u_at_limit = terminal_voltage(state, -pc.max_current, cp, pc);
    let current_cap = u_at_limit * pc.max_current / 1000.0;
    pc.max_charge_kw.min(current_cap) * taper
}

/// Largest discharge power the pack delivers at its present state, kW.
pub fn max_discharge_power(state: &BatteryState, cp: &CellParams, pc: &PackConfig) -> f64 {
    if state.soc <= 0.0 {
        return 0.0;
    }
    let u_at_limit = terminal_voltage(state, pc.max_current, cp, pc).max(0.0);
    let current_cap = u_at_limit * pc.max_current / 1000.0;
    let u_oc = pc.n_series as f64 * state.cell_source(cp);
    pc.max_discharge_kw.min(current_cap).min(max_power_kw(u_oc, pc.r_pack(cp)))
}

/// Everything that happens to the pack over one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: BatteryState,
    /// Pack current, A.
    pub current: f64,
    /// Terminal voltage during the step, V.
    pub voltage: f64,
    /// Dissipated heat over the whole pack, W.
    pub heat_dissipated: f64,
    /// Reversible heat over the whole pack, W.
    pub heat_entropic: f64,
    pub soc_clamped: bool,
}

/// Draws `p_kw` from the terminals for `dt` seconds. Voltage and heat are
/// evaluated on the state at the start of the step; SOC, RC branches and
/// temperature then advance together.
pub fn step(
    state: &BatteryState,
    p_kw: f64,
    dt: f64,
    cp: &CellParams,
    pc: &PackConfig,
    ambient: f64,
) -> Result<StepOutcome, BatteryError> {
    let current = solve_current(state, p_kw, cp, pc)?;
    let voltage = terminal_voltage(state, current, cp, pc);
    let heat = heat_rate(state, current, cp, pc);
    let cells = (pc.n_series * pc.n_parallel) as f64;
    let SocUpdate { state: s1, clamped } = soc_step(state, current, dt, cp, pc)?;
    let s2 = rc_step(&s1, current, dt, cp, pc);
    let s3 = thermal_step(&s2, heat.total() * cells, dt, pc, ambient);
    Ok(StepOutcome {
        state: s3,
        current,
        voltage,
        heat_dissipated: heat.dissipated() * cells,
        heat_entropic: heat.q_entropic * cells,
        soc_clamped: clamped,
    })
}
