//! Hybrid runs over the six synthesized Tehran-style routes.

use phev_sim::cli::summary_table;
use phev_sim::cycle::{self, DrivingCycle, SynthSpec};
use phev_sim::sim::{self, ScenarioConfig};

fn main() -> anyhow::Result<()> {
    let base = ScenarioConfig::new(DrivingCycle::wltc());
    let mut rows = Vec::new();
    for route in 1..=6 {
        let mut c = cycle::synthesize(&SynthSpec::tehran(route, base.seed).expect("route exists"))?;
        c.name = format!("tehran{route}");
        rows.push(sim::run(&base.with_cycle(c))?.summary);
    }
    print!("{}", summary_table(&rows));
    Ok(())
}
