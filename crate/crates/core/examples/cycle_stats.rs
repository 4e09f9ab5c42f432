//! Statistics of the bundled WLTC trace, and how the stop threshold moves
//! the stop time.

use phev_sim::cycle::{self, DrivingCycle, DEFAULT_STOP_THRESHOLD};

fn main() {
    let wltc = DrivingCycle::wltc();
    let s = cycle::stats(&wltc, DEFAULT_STOP_THRESHOLD);
    println!("WLTC: {:.2} km in {} s", s.total_distance / 1000.0, s.total_time);
    println!("  average {:.2} km/h, maximum {:.1} km/h", s.avg_speed, s.max_speed);
    println!("  {} stops, {} s stopped", s.num_stops, s.stop_time);

    for threshold in [0.1, 1.0, 3.0, 5.0] {
        let s = cycle::stats(&wltc, threshold);
        println!("threshold {threshold:>4} km/h: {:>3} s stopped, {} stops", s.stop_time, s.num_stops);
    }
}
