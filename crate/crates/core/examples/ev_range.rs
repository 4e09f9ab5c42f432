//! Pure-electric range on repeated WLTCs from a full charge to the usable
//! floor, new and aged.

use phev_sim::cycle::DrivingCycle;
use phev_sim::sim::{self, ScenarioConfig};

fn main() -> anyhow::Result<()> {
    for soh in [100.0, 90.0, 80.0] {
        let sc = ScenarioConfig { init_soc: 100.0, soh, ..ScenarioConfig::new(DrivingCycle::wltc()) };
        println!("SOH {soh:>5.1} %: {:.1} km", sim::ev_range(&sc)?);
    }
    Ok(())
}
