//! Builds the pure-electric window dataset for the default vehicle, trains
//! the SOC forecaster and reports its fit on the held-out split.

use phev_sim::cycle::DrivingCycle;
use phev_sim::predictor::{self, Hyper, Split};
use phev_sim::sim::{self, ScenarioConfig};

fn main() -> anyhow::Result<()> {
    let sc = ScenarioConfig::new(DrivingCycle::wltc());
    let (model, ds) = sim::train_predictor(&sc, &Hyper::default())?;
    println!("rows {} (train {}, test {})", ds.rows.len(), ds.train.len(), ds.test.len());
    println!("train loss {:.5}, final step {:.4}", model.train_loss, model.final_learning_rate);
    println!("R2 train {:.4}", predictor::r2(&model, &ds, Split::Train)?);
    println!("R2 test  {:.4}", predictor::r2(&model, &ds, Split::Test)?);

    let fv = predictor::extract_features(&DrivingCycle::wltc().window(0.0, 300.0)?)?;
    println!("forecast for the first 300 s of WLTC: {:.3} % SOC", predictor::predict(&model, &fv));
    Ok(())
}
