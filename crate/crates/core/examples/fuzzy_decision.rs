//! Mode activations of the bundled rule base for a few driving situations.

use phev_sim::controller::{self, Inputs};
use phev_sim::drivetrain::OperatingMode;

fn main() {
    let cfg = controller::default_rulebase();
    println!("{} rules", cfg.rules.len());
    let cases = [
        ("city, full battery", Inputs { speed: 40.0, soc: 85.0, soc_pred: 80.0, p_req: 12.0 }),
        ("highway, low SOC", Inputs { speed: 120.0, soc: 25.0, soc_pred: 20.0, p_req: 30.0 }),
        ("hard acceleration", Inputs { speed: 70.0, soc: 60.0, soc_pred: 55.0, p_req: 110.0 }),
        ("braking", Inputs { speed: 50.0, soc: 60.0, soc_pred: 60.0, p_req: -20.0 }),
        ("mid SOC cruise", Inputs { speed: 80.0, soc: 50.0, soc_pred: 40.0, p_req: 20.0 }),
    ];
    for (name, inp) in cases {
        let (mode, act) = controller::select_mode(&cfg, &inp, None, 95.0);
        let acts: Vec<String> = OperatingMode::ALL.iter().map(|m| format!("{m}={:.2}", act.get(*m))).collect();
        println!("{name:<20} -> {mode:<8} [{}]", acts.join(" "));
    }
}
