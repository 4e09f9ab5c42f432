//! A 30 s, 40 kW discharge pulse followed by rest: terminal voltage sags
//! and relaxes through the RC branches while the pack warms up.

use phev_sim::battery::{self, BatteryState, CellParams, PackConfig};

fn main() -> anyhow::Result<()> {
    let cell = CellParams::default();
    let pack = PackConfig::default();
    let mut state = BatteryState::new(80.0, 25.0, &cell);
    println!("t    P_kW   I_A     U_V     SOC     T_C");
    for t in 0..120 {
        let p = if t < 30 { 40.0 } else { 0.0 };
        let out = battery::step(&state, p, 1.0, &cell, &pack, 25.0)?;
        if t % 10 == 0 || t == 29 || t == 30 {
            println!("{t:>3} {p:>5.1} {:>6.1} {:>7.2} {:>7.3} {:>6.2}", out.current, out.voltage, out.state.soc, out.state.temp);
        }
        state = out.state;
    }

    let (aged_cell, aged_pack) = battery::apply_soh(&cell, &pack, 80.0);
    println!(
        "at 80 % SOH: {:.1} kWh stored at full charge (new: {:.1}), max discharge {:.0} kW (new: {:.0})",
        battery::stored_energy_kwh(100.0, &aged_cell, &aged_pack),
        battery::stored_energy_kwh(100.0, &cell, &pack),
        battery::max_discharge_power(&BatteryState::new(50.0, 25.0, &aged_cell), &aged_cell, &aged_pack),
        battery::max_discharge_power(&BatteryState::new(50.0, 25.0, &cell), &cell, &pack),
    );
    Ok(())
}
