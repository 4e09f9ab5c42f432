//! WLTC with a progressively aged battery.

use phev_sim::cli::summary_table;
use phev_sim::cycle::DrivingCycle;
use phev_sim::sim::{self, ScenarioConfig};

fn main() -> anyhow::Result<()> {
    let base = ScenarioConfig::new(DrivingCycle::wltc());
    let sohs = [100.0, 95.0, 90.0, 85.0, 80.0];
    let rows = sim::sweep_soh(&sohs, &base)?;
    print!("{}", summary_table(&rows));
    for (soh, s) in sohs.iter().zip(&rows) {
        println!("SOH {soh:>5.1} %: CO2 {:.1} g/km, NOx {:.4} g/km", s.emissions.co2, s.emissions.nox);
    }
    Ok(())
}
