//! One WLTC in hybrid operation from 90 % SOC: consumption, energy split,
//! time per mode and the energy ledger.

use phev_sim::cycle::DrivingCycle;
use phev_sim::sim::{self, ScenarioConfig};

fn main() -> anyhow::Result<()> {
    let out = sim::run(&ScenarioConfig::new(DrivingCycle::wltc()))?;
    let s = &out.summary;
    println!("distance {:.2} km, SOC {:.1} -> {:.2} %", s.distance, s.init_soc, s.final_soc);
    println!(
        "fuel {:.3} L/100km + electricity {:.3} L/100km = {:.3} L/100km",
        s.fc_gasoline, s.fc_elect, s.fc_total
    );
    println!("energy from engine {:.1} %, from battery {:.1} %", s.energy_split.ice, s.energy_split.battery);
    let m = s.mode_time;
    println!("time: EV {} s, series {} s, parallel {} s, ICE {} s", m.ev, m.series, m.parallel, m.ice);
    println!(
        "CO2 {:.1} g/km, CO {:.3}, HC {:.4}, NOx {:.4}",
        s.emissions.co2, s.emissions.co, s.emissions.hc, s.emissions.nox
    );
    println!("ledger residual {:.2e} of the supplied energy", s.ledger.relative_residual());
    Ok(())
}
