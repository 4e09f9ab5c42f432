//! Twenty minutes at each constant speed from a high SOC. Below the
//! highway threshold the car drives electrically; above it the engine
//! takes over and may recharge the battery.

use phev_sim::cli::summary_table;
use phev_sim::cycle::DrivingCycle;
use phev_sim::sim::{self, ScenarioConfig};

fn main() -> anyhow::Result<()> {
    let base = ScenarioConfig::new(DrivingCycle::wltc());
    let speeds = [20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0];
    print!("{}", summary_table(&sim::sweep_constant_speed(&speeds, 1200.0, &base)?));
    Ok(())
}
