//! BSFC, efficiency and specific emissions across the engine's load range,
//! and where the best-BSFC search moves a light request.

use phev_sim::engine::{self, BatteryBuffer, EmissionMap, EngineMap, FuelProperties, Species};

/// Seconds since start; long enough that no cold-start excess remains.
const WARM: f64 = 3600.0;

fn main() -> anyhow::Result<()> {
    let map = EngineMap::default();
    let fuel = FuelProperties::default();
    let em = EmissionMap::default();
    println!("kW     bsfc  eff    CO2    CO     HC     NOx   (g/kWh)");
    for k in 1..=10 {
        let p = map.max_power * k as f64 / 10.0;
        let b = engine::bsfc_at(&map, p)?;
        let e: Vec<f64> =
            Species::ALL.iter().map(|&s| engine::specific_emission(&map, &em, &fuel, s, p, WARM)).collect::<Result<_, _>>()?;
        println!(
            "{p:>5.1} {b:>6.1} {:>5.3} {:>6.1} {:>6.2} {:>6.3} {:>6.3}",
            engine::efficiency(b, &fuel),
            e[0],
            e[1],
            e[2],
            e[3]
        );
    }
    let lp = engine::best_bsfc_power(&map, 8.0, BatteryBuffer { charge_kw: 30.0, discharge_kw: 0.0 });
    println!("an 8 kW request runs at {:.1} kW (best point {:.1} kW)", lp.power, map.optimal_power());
    Ok(())
}
