//! Command-line front end. Every command reads the same JSON configuration,
//! applies `--set` overrides and writes its artifacts under `--out`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{self, Config};
use crate::cycle::{self, SynthSpec, DEFAULT_STOP_THRESHOLD};
use crate::predictor::{self, Split};
use crate::sim::{self, Summary};

/// Exit status for a run whose saturated-step fraction exceeds the
/// configured threshold.
pub const EXIT_SATURATED: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "phev-sim", version, about = "Plug-in hybrid powertrain simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// JSON configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Overrides scenario.seed
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Dotted-path override, e.g. scenario.init_soc=70 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Speed at or below which the vehicle counts as stopped, km/h
    #[arg(long, global = true, value_name = "KMH")]
    pub stop_threshold: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured scenario; writes trace.csv and summary.json
    Simulate {
        /// Cycle to drive instead of scenario.cycle
        #[arg(long)]
        cycle: Option<String>,
    },
    /// Statistics of a cycle (name or CSV path); writes stats.json
    Stats { cycle: Option<String> },
    /// Synthesize a cycle from target statistics; writes <name>.csv
    Synth(SynthArgs),
    /// Train the SOC forecaster; writes model.json and predictions.csv
    Train,
    /// Sweep one parameter; writes sweep.csv and sweep.json
    Sweep(SweepArgs),
    /// Pure-electric range over repeated cycles; writes range.json
    Range {
        /// Starting SOC, %; full charge when absent
        #[arg(long)]
        from_soc: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// One of the six Tehran-style routes
    #[arg(long, conflicts_with_all = ["time", "avg", "max", "stops", "stop_time"])]
    pub route: Option<usize>,
    /// Total time, s
    #[arg(long)]
    pub time: Option<f64>,
    /// Average speed, km/h
    #[arg(long)]
    pub avg: Option<f64>,
    /// Maximum speed, km/h
    #[arg(long)]
    pub max: Option<f64>,
    #[arg(long)]
    pub stops: Option<usize>,
    /// Total stop time, s
    #[arg(long)]
    pub stop_time: Option<f64>,
}

#[derive(Debug, Args)]
#[group(skip)]
#[command(group = clap::ArgGroup::new("param").required(true).multiple(false).args(["init_soc", "soh", "speeds"]))]
pub struct SweepArgs {
    /// Initial SOC values, %
    #[arg(long, value_delimiter = ',')]
    pub init_soc: Option<Vec<f64>>,
    /// State-of-health values, %
    #[arg(long, value_delimiter = ',')]
    pub soh: Option<Vec<f64>>,
    /// Constant cruise speeds, km/h
    #[arg(long, value_delimiter = ',')]
    pub speeds: Option<Vec<f64>>,
    /// Length of each constant-speed run, s
    #[arg(long, default_value_t = 1200.0)]
    pub duration: f64,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn load(g: &Global) -> anyhow::Result<Config> {
    let mut sets = g.sets.clone();
    if let Some(s) = g.seed {
        sets.push(format!("scenario.seed={s}"));
    }
    Ok(Config::load(g.config.as_deref(), &sets)?)
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = dir.join(name);
    std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
    Ok(p)
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes") + "\n"
}

pub fn execute(cli: &Cli) -> anyhow::Result<i32> {
    let g = &cli.global;
    let cfg = load(g)?;
    let stop = g.stop_threshold.unwrap_or(DEFAULT_STOP_THRESHOLD);
    if !(stop >= 0.0) {
        bail!("--stop-threshold must be nonnegative");
    }
    match &cli.command {
        Command::Simulate { cycle } => simulate(&cfg, g, cycle.as_deref()),
        Command::Stats { cycle } => {
            let c = cfg.cycle_by_name(cycle.as_deref().unwrap_or(&cfg.scenario.cycle))?;
            let json = to_json(&cycle::stats(&c, stop));
            write(&g.out, "stats.json", &json)?;
            print!("{json}");
            Ok(0)
        }
        Command::Synth(a) => synth(&cfg, g, a, stop),
        Command::Train => train(&cfg, g),
        Command::Sweep(a) => sweep(&cfg, g, a),
        Command::Range { from_soc } => {
            let mut sc = cfg.scenario()?;
            sc.init_soc = from_soc.unwrap_or(sc.model.pack.usable_window.1);
            let km = sim::ev_range(&sc)?;
            #[derive(Serialize)]
            struct Range {
                cycle: String,
                init_soc: f64,
                /// None when the SOC never falls
                range_km: Option<f64>,
            }
            let r = Range { cycle: sc.cycle.name.clone(), init_soc: sc.init_soc, range_km: km.is_finite().then_some(km) };
            write(&g.out, "range.json", &to_json(&r))?;
            match r.range_km {
                Some(km) => println!("EV range on repeated {}: {km:.1} km", r.cycle),
                None => println!("EV range on repeated {}: unbounded", r.cycle),
            }
            Ok(0)
        }
    }
}

fn simulate(cfg: &Config, g: &Global, cycle: Option<&str>) -> anyhow::Result<i32> {
    let mut sc = cfg.scenario()?;
    if let Some(name) = cycle {
        sc.cycle = cfg.cycle_by_name(name)?;
    }
    let out = sim::run(&sc)?;
    write(&g.out, "trace.csv", &config::trace_to_csv(&out.trace))?;
    write(&g.out, "summary.json", &(config::summary_to_json(&out.summary) + "\n"))?;
    print!("{}", summary_table(std::slice::from_ref(&out.summary)));

    let frac = out.summary.saturated_steps as f64 / out.trace.len().max(1) as f64;
    if frac > cfg.scenario.saturation_threshold {
        eprintln!(
            "saturated on {} of {} steps ({:.1} %), above the threshold of {:.1} %",
            out.summary.saturated_steps,
            out.trace.len(),
            100.0 * frac,
            100.0 * cfg.scenario.saturation_threshold
        );
        return Ok(EXIT_SATURATED);
    }
    Ok(0)
}

fn synth(cfg: &Config, g: &Global, a: &SynthArgs, stop: f64) -> anyhow::Result<i32> {
    let seed = cfg.scenario.seed;
    let (name, spec) = match a.route {
        Some(r) => (
            format!("tehran{r}"),
            SynthSpec::tehran(r, seed).with_context(|| format!("no route {r}; routes are 1..=6"))?,
        ),
        None => {
            let (Some(total_time), Some(avg_speed), Some(max_speed), Some(num_stops), Some(stop_time)) =
                (a.time, a.avg, a.max, a.stops, a.stop_time)
            else {
                bail!("synth needs --route or all of --time, --avg, --max, --stops, --stop-time");
            };
            ("synth".to_string(), SynthSpec { total_time, avg_speed, max_speed, num_stops, stop_time, seed })
        }
    };
    let mut c = cycle::synthesize(&spec)?;
    c.name = name.clone();
    let p = write(&g.out, &format!("{name}.csv"), &c.to_csv())?;
    eprintln!("wrote {}", p.display());
    print!("{}", to_json(&cycle::stats(&c, stop)));
    Ok(0)
}

fn train(cfg: &Config, g: &Global) -> anyhow::Result<i32> {
    let sc = cfg.scenario()?;
    let (model, ds) = sim::train_predictor(&sc, &cfg.predictor.hyper)?;
    write(&g.out, "model.json", &to_json(&model))?;

    let mut csv = String::from("source,start,split,label,predicted\n");
    for (split, idx) in [("train", &ds.train), ("test", &ds.test)] {
        for &i in idx {
            let r = &ds.rows[i];
            let _ = writeln!(csv, "{},{},{split},{},{}", r.source, r.start, r.label, predictor::predict(&model, &r.features));
        }
    }
    write(&g.out, "predictions.csv", &csv)?;
    println!("rows: {} train, {} test", ds.train.len(), ds.test.len());
    println!("R2 train: {:.4}", predictor::r2(&model, &ds, Split::Train)?);
    println!("R2 test:  {:.4}", predictor::r2(&model, &ds, Split::Test)?);
    Ok(0)
}

fn sweep(cfg: &Config, g: &Global, a: &SweepArgs) -> anyhow::Result<i32> {
    let base = cfg.scenario()?;
    let (param, values, rows) = if let Some(v) = &a.init_soc {
        ("init_soc", v, sim::sweep_init_soc(v, &base)?)
    } else if let Some(v) = &a.soh {
        ("soh", v, sim::sweep_soh(v, &base)?)
    } else if let Some(v) = &a.speeds {
        ("speed", v, sim::sweep_constant_speed(v, a.duration, &base)?)
    } else {
        bail!("sweep needs one of --init-soc, --soh, --speeds");
    };
    let mut csv = format!("{param},{}\n", SUMMARY_COLUMNS.join(","));
    for (x, s) in values.iter().zip(&rows) {
        let _ = writeln!(csv, "{x},{}", summary_row(s).join(","));
    }
    write(&g.out, "sweep.csv", &csv)?;
    write(&g.out, "sweep.json", &to_json(&rows))?;
    print!("{}", summary_table(&rows));
    Ok(0)
}

const SUMMARY_COLUMNS: [&str; 12] = [
    "cycle",
    "distance_km",
    "fc_gasoline",
    "fc_elect",
    "fc_total",
    "init_soc",
    "final_soc",
    "delta_soc",
    "ice_share",
    "ev_time_fraction",
    "co2_g_km",
    "nox_g_km",
];

fn summary_row(s: &Summary) -> Vec<String> {
    let mut v = vec![s.cycle.clone()];
    v.extend(
        [
            s.distance,
            s.fc_gasoline,
            s.fc_elect,
            s.fc_total,
            s.init_soc,
            s.final_soc,
            s.delta_soc,
            s.energy_split.ice,
            s.ev_time_fraction,
            s.emissions.co2,
            s.emissions.nox,
        ]
        .map(|x| x.to_string()),
    );
    v
}

/// Fixed-width comparison table, one row per summary.
pub fn summary_table(rows: &[Summary]) -> String {
    let mut t = format!(
        "{:<12} {:>8} {:>8} {:>8} {:>8} {:>7} {:>7} {:>7} {:>6}\n",
        "cycle", "km", "fc_gas", "fc_elec", "fc_tot", "soc0", "soc1", "dsoc", "ice%"
    );
    for s in rows {
        let _ = writeln!(
            t,
            "{:<12} {:>8.2} {:>8.3} {:>8.3} {:>8.3} {:>7.1} {:>7.2} {:>7.2} {:>6.1}",
            s.cycle,
            s.distance,
            s.fc_gasoline,
            s.fc_elect,
            s.fc_total,
            s.init_soc,
            s.final_soc,
            s.delta_soc,
            s.energy_split.ice
        );
    }
    t
}
