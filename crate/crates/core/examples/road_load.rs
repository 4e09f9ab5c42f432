//! Road-load forces and cruise power of the default vehicle, with the
//! equivalent `A + B·v + C·v²` coefficients.

use phev_sim::dynamics::{self, Environment, VehicleParams};

fn main() {
    let vp = VehicleParams::default();
    let env = Environment::default();
    println!("speed  aero_N  roll_N  cruise_kW  6%grade_kW");
    for kmh in (20..=140).step_by(20) {
        let v = kmh as f64 / 3.6;
        println!(
            "{kmh:>5} {:>7.1} {:>7.1} {:>10.2} {:>11.2}",
            dynamics::aero_force(&vp, &env, v),
            dynamics::roll_force(&vp, &env, v),
            dynamics::power_demand(&vp, &env, v, 0.0, 0.0),
            dynamics::power_demand(&vp, &env, v, 0.0, 6.0),
        );
    }
    let fit = dynamics::fit_coefficients(&vp, &env);
    println!("A = {:.2} N, B = {:.4} N·s/m, C = {:.4} N·s²/m²", fit.coeff_a, fit.coeff_b, fit.coeff_c);
}
