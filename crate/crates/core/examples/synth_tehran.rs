//! Synthesizes the six Tehran-style routes and checks that each one hits
//! its target statistics.

use phev_sim::cycle::{self, SynthSpec, DEFAULT_STOP_THRESHOLD};

fn main() -> anyhow::Result<()> {
    println!("route   time  avg(target)      max(target)   stops  stop_s");
    for route in 1..=6 {
        let spec = SynthSpec::tehran(route, 0).expect("route exists");
        let c = cycle::synthesize(&spec)?;
        let s = cycle::stats(&c, DEFAULT_STOP_THRESHOLD);
        println!(
            "{route:>5} {:>6} {:>6.2} ({:>5.2}) {:>7.2} ({:>5.2}) {:>5} {:>7}",
            s.total_time, s.avg_speed, spec.avg_speed, s.max_speed, spec.max_speed, s.num_stops, s.stop_time
        );
    }
    Ok(())
}
