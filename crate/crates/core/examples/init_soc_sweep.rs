//! WLTC from several initial SOC levels.

use phev_sim::cli::summary_table;
use phev_sim::cycle::DrivingCycle;
use phev_sim::sim::{self, ScenarioConfig};

fn main() -> anyhow::Result<()> {
    let base = ScenarioConfig::new(DrivingCycle::wltc());
    print!("{}", summary_table(&sim::sweep_init_soc(&[90.0, 80.0, 70.0, 60.0, 50.0], &base)?));
    Ok(())
}
