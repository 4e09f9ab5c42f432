//! Longitudinal vehicle dynamics: road loads and wheel power demand.

use serde::{Deserialize, Serialize};

/// Which road-load law [`road_load`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RoadLoadMode {
    /// Grade + aerodynamic + rolling terms from physical parameters.
    #[default]
    Physical,
    /// `A·[v>0] + B·v + C·v²` plus the grade term.
    Coefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// Curb mass, kg.
    pub mass: f64,
    /// Additional payload, kg.
    pub load: f64,
    /// Frontal area S, m².
    pub frontal_area: f64,
    /// Drag coefficient C_x.
    pub drag_coeff: f64,
    /// Rolling coefficient f.
    pub roll_f: f64,
    /// Rolling coefficient k, s/m.
    pub roll_k: f64,
    /// Rolling coefficient w, s²/m².
    pub roll_w: f64,
    /// Road-load constant A, N.
    pub coeff_a: f64,
    /// Road-load linear term B, N·s/m.
    pub coeff_b: f64,
    /// Road-load quadratic term C, N·s²/m².
    pub coeff_c: f64,
    /// Rotating-mass factor δ.
    pub equiv_mass_factor: f64,
    pub mode: RoadLoadMode,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1880.0,
            load: 120.0,
            frontal_area: 2.6,
            drag_coeff: 0.40,
            roll_f: 0.0075,
            roll_k: 0.0,
            roll_w: 0.0,
            coeff_a: 0.0,
            coeff_b: 0.0,
            coeff_c: 0.0,
            equiv_mass_factor: 1.05,
            mode: RoadLoadMode::Physical,
        }
    }
}

impl VehicleParams {
    /// m + load, kg.
    pub fn total_mass(&self) -> f64 {
        self.mass + self.load
    }

    /// δ·(m + load), kg.
    pub fn equivalent_mass(&self) -> f64 {
        self.equiv_mass_factor * self.total_mass()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.mass > 0.0) {
            return Err(format!("vehicle.mass must be positive, got {}", self.mass));
        }
        if !(self.load >= 0.0) {
            return Err(format!("vehicle.load must be nonnegative, got {}", self.load));
        }
        if !(self.frontal_area > 0.0) {
            return Err(format!("vehicle.frontal_area must be positive, got {}", self.frontal_area));
        }
        if !(self.drag_coeff > 0.0) {
            return Err(format!("vehicle.drag_coeff must be positive, got {}", self.drag_coeff));
        }
        if !(self.equiv_mass_factor >= 1.0) {
            return Err(format!("vehicle.equiv_mass_factor must be >= 1, got {}", self.equiv_mass_factor));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Environment {
    /// kg/m³
    pub air_density: f64,
    /// m/s²
    pub gravity: f64,
    /// Head wind, m/s (positive opposes motion).
    pub wind_speed: f64,
    /// °C
    pub ambient_temp: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Self { air_density: 1.2, gravity: 9.81, wind_speed: 0.0, ambient_temp: 25.0 }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.air_density > 0.0) {
            return Err(format!("environment.air_density must be positive, got {}", self.air_density));
        }
        if !(self.gravity > 0.0) {
            return Err(format!("environment.gravity must be positive, got {}", self.gravity));
        }
        Ok(())
    }
}

/// Grade resistance, N. `grade` is in percent.
pub fn grade_force(vp: &VehicleParams, env: &Environment, grade: f64) -> f64 {
    vp.total_mass() * env.gravity * (grade / 100.0).atan().sin()
}

/// Aerodynamic drag, N.
pub fn aero_force(vp: &VehicleParams, env: &Environment, v: f64) -> f64 {
    let rel = v + env.wind_speed;
    0.5 * env.air_density * vp.frontal_area * vp.drag_coeff * rel * rel
}

/// Rolling resistance, N. Zero at standstill.
pub fn roll_force(vp: &VehicleParams, env: &Environment, v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let rel = v + env.wind_speed;
    vp.total_mass() * env.gravity * (vp.roll_f + vp.roll_k * rel + vp.roll_w * rel * rel)
}

/// Total resisting force at speed `v` (m/s) on `grade` percent, N.
pub fn road_load(vp: &VehicleParams, env: &Environment, v: f64, grade: f64) -> f64 {
    let fg = grade_force(vp, env, grade);
    match vp.mode {
        RoadLoadMode::Physical => {
            let aero = if v > 0.0 { aero_force(vp, env, v) } else { 0.0 };
            aero + roll_force(vp, env, v) + fg
        }
        RoadLoadMode::Coefficient => {
            let a = if v > 0.0 { vp.coeff_a } else { 0.0 };
            a + vp.coeff_b * v + vp.coeff_c * v * v + fg
        }
    }
}

/// Wheel power demand, kW. Negative values are braking demand.
pub fn power_demand(vp: &VehicleParams, env: &Environment, v: f64, a: f64, grade: f64) -> f64 {
    (a * vp.equivalent_mass() + road_load(vp, env, v, grade)) * v / 1000.0
}

/// Least-squares fit of `A + B·v + C·v²` to the physical road load on flat
/// road over 1..=140 km/h. Returns a copy of `vp` in coefficient mode.
pub fn fit_coefficients(vp: &VehicleParams, env: &Environment) -> VehicleParams {
    let phys = VehicleParams { mode: RoadLoadMode::Physical, ..vp.clone() };
    // normal equations for the basis (1, v, v²)
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for kmh in 1..=140 {
        let v = kmh as f64 / 3.6;
        let basis = [1.0, v, v * v];
        let f = road_load(&phys, env, v, 0.0);
        for i in 0..3 {
            atb[i] += basis[i] * f;
            for j in 0..3 {
                ata[i][j] += basis[i] * basis[j];
            }
        }
    }
    let [a, b, c] = solve3(ata, atb);
    VehicleParams { coeff_a: a, coeff_b: b, coeff_c: c, mode: RoadLoadMode::Coefficient, ..vp.clone() }
}

/// Gaussian elimination with partial pivoting on a 3×3 system.
fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap_or(col);
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let k = m[row][col] / m[col][col];
            for j in col..3 {
                m[row][j] -= k * m[col][j];
            }
            r[row] -= k * r[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|j| m[i][j] * x[j]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vp_with_mass(total: f64) -> VehicleParams {
        VehicleParams { mass: total, load: 0.0, ..Default::default() }
    }

    #[test]
    fn grade_force_examples() {
        let env = Environment::default();
        let vp = vp_with_mass(1500.0);
        assert_eq!(grade_force(&vp, &env, 0.0), 0.0);
        assert_relative_eq!(grade_force(&vp, &env, 5.0), 734.8, epsilon = 0.1);
        assert_relative_eq!(
            grade_force(&vp, &env, 100.0),
            1500.0 * 9.81 * std::f64::consts::FRAC_PI_4.sin(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn aero_force_examples() {
        let env = Environment { air_density: 1.2, wind_speed: 0.0, ..Default::default() };
        let vp = VehicleParams { frontal_area: 2.0, drag_coeff: 0.3, ..Default::default() };
        assert_relative_eq!(aero_force(&vp, &env, 20.0), 144.0, max_relative = 1e-12);
        assert_relative_eq!(aero_force(&vp, &env, 40.0), 4.0 * 144.0, max_relative = 1e-12);
        let headwind = Environment { wind_speed: -20.0, ..env };
        assert_eq!(aero_force(&vp, &headwind, 20.0), 0.0);
    }

    #[test]
    fn roll_force_examples() {
        let env = Environment::default();
        let vp = VehicleParams { roll_f: 0.01, roll_k: 0.0, roll_w: 0.0, ..vp_with_mass(2000.0) };
        assert_eq!(roll_force(&vp, &env, 0.0), 0.0);
        assert_relative_eq!(roll_force(&vp, &env, 10.0), 196.2, max_relative = 1e-12);
        let lin = VehicleParams { roll_k: 1e-4, ..vp };
        let d1 = roll_force(&lin, &env, 20.0) - roll_force(&lin, &env, 10.0);
        let d2 = roll_force(&lin, &env, 30.0) - roll_force(&lin, &env, 20.0);
        assert!(d1 > 0.0);
        assert_relative_eq!(d1, d2, max_relative = 1e-9);
    }

    #[test]
    fn road_load_forms() {
        let env = Environment::default();
        let vp = VehicleParams::default();
        assert_eq!(road_load(&vp, &env, 0.0, 0.0), 0.0);
        let coeff = VehicleParams {
            coeff_a: 100.0,
            coeff_b: 5.0,
            coeff_c: 0.4,
            mode: RoadLoadMode::Coefficient,
            ..Default::default()
        };
        assert_relative_eq!(road_load(&coeff, &env, 10.0, 0.0), 190.0, max_relative = 1e-12);
        assert_eq!(road_load(&coeff, &env, 0.0, 0.0), 0.0);

        let phys = VehicleParams {
            frontal_area: 2.0,
            drag_coeff: 0.3,
            roll_f: 0.01,
            ..vp_with_mass(2000.0)
        };
        let expected = 144.0 + roll_force(&phys, &env, 20.0);
        assert_relative_eq!(road_load(&phys, &env, 20.0, 0.0), expected, max_relative = 1e-12);
    }

    #[test]
    fn power_demand_examples() {
        let env = Environment::default();
        let vp = VehicleParams::default();
        assert_eq!(power_demand(&vp, &env, 0.0, 3.0, 0.0), 0.0);
        // F_tot = 1000 N at 20 m/s
        let coeff = VehicleParams {
            coeff_a: 1000.0,
            mode: RoadLoadMode::Coefficient,
            ..Default::default()
        };
        assert_relative_eq!(power_demand(&coeff, &env, 20.0, 0.0, 0.0), 20.0, max_relative = 1e-12);
        let v = 25.0;
        assert_relative_eq!(
            power_demand(&vp, &env, v, 0.0, 0.0),
            road_load(&vp, &env, v, 0.0) * v / 1000.0,
            max_relative = 1e-12
        );
        assert!(power_demand(&vp, &env, 20.0, -2.0, 0.0) < 0.0);
    }

    #[test]
    fn fitted_coefficients_match_physical_form() {
        let env = Environment::default();
        for vp in [
            VehicleParams::default(),
            VehicleParams { roll_k: 2e-4, roll_w: 1e-5, ..Default::default() },
        ] {
            let fit = fit_coefficients(&vp, &env);
            for kmh in 1..=140 {
                let v = kmh as f64 / 3.6;
                let p = road_load(&vp, &env, v, 0.0);
                let c = road_load(&fit, &env, v, 0.0);
                assert!((p - c).abs() / p < 0.01, "{kmh} km/h: {p} vs {c}");
            }
        }
    }
}
