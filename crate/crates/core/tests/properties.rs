//! Property tests for the invariants each module promises.

use proptest::prelude::*;

use phev_sim::battery::{self, BatteryState, CellParams, PackConfig, RcBranch};
use phev_sim::controller::{self, Activations, Inputs};
use phev_sim::cycle::{self, DrivingCycle, SynthSpec, DEFAULT_STOP_THRESHOLD};
use phev_sim::drivetrain::{self, DrivetrainParams, OperatingMode, Powertrain};
use phev_sim::dynamics::{self, Environment, VehicleParams};
use phev_sim::engine::{self, EmissionMap, EngineMap, FuelProperties, Species};
use phev_sim::sim::{self, ScenarioConfig, SocPredictor};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Synthesizes `spec`, rejecting the case when the targets contradict each
/// other.
fn synthesize(spec: &SynthSpec) -> Result<DrivingCycle, TestCaseError> {
    match cycle::synthesize(spec) {
        Ok(c) => Ok(c),
        Err(cycle::CycleError::InfeasibleSpec(_)) => Err(TestCaseError::reject("infeasible targets")),
        Err(e) => Err(TestCaseError::fail(e.to_string())),
    }
}

/// Speed traces whose changes stay within what a car can do in a second.
fn drive_trace() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-8.0..8.0f64, 2..400).prop_map(|steps| {
        let mut v = 0.0f64;
        steps.into_iter().map(|d| { v = (v + d).clamp(0.0, 130.0); v }).collect()
    })
}

fn mode() -> impl Strategy<Value = OperatingMode> {
    prop::sample::select(OperatingMode::ALL.to_vec())
}

/// Synthesis targets in the range of urban and suburban routes. Some are
/// infeasible; callers skip those through [`synthesize`].
fn synth_spec() -> impl Strategy<Value = SynthSpec> {
    (600u32..2400, 12.0..50.0f64, 1.7..2.6f64, 0usize..8, 0.05..0.2f64, any::<u64>()).prop_map(
        |(t, avg, ratio, stops, stop_frac, seed)| SynthSpec {
            total_time: t as f64,
            avg_speed: avg,
            max_speed: (avg * ratio).min(130.0),
            num_stops: stops,
            stop_time: (t as f64 * stop_frac).round(),
            seed,
        },
    )
}

mod cycles {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn synthesis_hits_its_targets(spec in synth_spec()) {
            let c = synthesize(&spec)?;
            let s = cycle::stats(&c, DEFAULT_STOP_THRESHOLD);
            prop_assert_eq!(s.total_time, spec.total_time);
            prop_assert_eq!(s.num_stops, spec.num_stops);
            prop_assert!(rel(s.avg_speed, spec.avg_speed) <= 0.05, "avg {} vs {}", s.avg_speed, spec.avg_speed);
            prop_assert!(rel(s.max_speed, spec.max_speed) <= 0.05, "max {} vs {}", s.max_speed, spec.max_speed);
            prop_assert!(rel(s.stop_time, spec.stop_time) <= 0.05, "stop {} vs {}", s.stop_time, spec.stop_time);
        }

        #[test]
        fn finer_grid_keeps_distance(speeds in drive_trace(), dt in 0.1..0.9f64) {
            let c = DrivingCycle::from_speeds("x", 1.0, &speeds).unwrap();
            let fine = cycle::resample(&c, dt).unwrap();
            let d0 = cycle::stats(&c, DEFAULT_STOP_THRESHOLD).total_distance;
            let d1 = cycle::stats(&fine, DEFAULT_STOP_THRESHOLD).total_distance;
            prop_assert!((d1 - d0).abs() <= 0.005 * d0 + 1e-6, "{d0} vs {d1}");
        }

        #[test]
        fn csv_round_trip_is_exact(
            speeds in prop::collection::vec(0.0..150.0f64, 2..100),
            grade in prop::option::of(-8.0..8.0f64),
        ) {
            let mut text = String::from(if grade.is_some() { "t,v,grade\n" } else { "t,v\n" });
            for (k, v) in speeds.iter().enumerate() {
                match grade {
                    Some(g) => text.push_str(&format!("{k},{v},{g}\n")),
                    None => text.push_str(&format!("{k},{v}\n")),
                }
            }
            let c = cycle::parse_cycle(&text, "x").unwrap();
            let back = cycle::parse_cycle(&c.to_csv(), "x").unwrap();
            prop_assert_eq!(c.samples(), back.samples());
        }
    }
}

mod vehicle {
    use super::*;

    proptest! {
        #[test]
        fn power_demand_monotone_in_accel(v in 0.1..45.0f64, a in -4.0..4.0f64, da in 0.0..2.0f64, grade in -10.0..10.0f64) {
            let vp = VehicleParams::default();
            let env = Environment::default();
            prop_assert!(dynamics::power_demand(&vp, &env, v, a + da, grade) >= dynamics::power_demand(&vp, &env, v, a, grade));
        }

        #[test]
        fn road_load_continuous_in_speed(v in 0.1..45.0f64, grade in -10.0..10.0f64) {
            let vp = VehicleParams { roll_k: 1e-4, roll_w: 1e-6, ..VehicleParams::default() };
            let env = Environment::default();
            let h = 1e-7;
            let jump = (dynamics::road_load(&vp, &env, v + h, grade) - dynamics::road_load(&vp, &env, v, grade)).abs();
            prop_assert!(jump < 1e-3, "{jump}");
        }

        #[test]
        fn fitted_coefficients_track_physical_form(
            mass in 1000.0..3000.0f64,
            cx in 0.2..0.5f64,
            area in 1.8..3.2f64,
            f in 0.005..0.015f64,
            k in 0.0..2e-4f64,
        ) {
            let vp = VehicleParams { mass, drag_coeff: cx, frontal_area: area, roll_f: f, roll_k: k, ..VehicleParams::default() };
            let env = Environment::default();
            let fit = dynamics::fit_coefficients(&vp, &env);
            for kmh in 1..=140 {
                let v = kmh as f64 / 3.6;
                let a = dynamics::road_load(&vp, &env, v, 0.0);
                let b = dynamics::road_load(&fit, &env, v, 0.0);
                prop_assert!(rel(b, a) < 0.01, "{kmh} km/h: {a} vs {b}");
            }
        }
    }
}

mod combustion {
    use super::*;

    proptest! {
        #[test]
        fn efficiency_inverts_bsfc(u in 0.001..1.0f64) {
            let map = EngineMap::default();
            let fp = FuelProperties::default();
            let b = engine::bsfc_at(&map, u * map.max_power).unwrap();
            prop_assert!(rel(engine::efficiency(b, &fp) * b * fp.h_u, 3.6e6) <= 1e-9);
        }

        #[test]
        fn fuel_is_nonnegative_and_additive(
            a in prop::collection::vec((0.0..1.0f64, 0.1..10.0f64), 0..30),
            b in prop::collection::vec((0.0..1.0f64, 0.1..10.0f64), 0..30),
        ) {
            let map = EngineMap::default();
            let fp = FuelProperties::default();
            let scale = |t: Vec<(f64, f64)>| t.into_iter().map(|(u, dt)| (u * map.max_power, dt)).collect::<Vec<_>>();
            let (a, b) = (scale(a), scale(b));
            let fa = engine::integrate_fuel(&a, &map, &fp).unwrap();
            let fb = engine::integrate_fuel(&b, &map, &fp).unwrap();
            let ab: Vec<_> = a.iter().chain(&b).copied().collect();
            let fab = engine::integrate_fuel(&ab, &map, &fp).unwrap();
            prop_assert!(fa >= 0.0 && fb >= 0.0);
            prop_assert!((fab - (fa + fb)).abs() <= 1e-12 * fab.max(1.0));
        }

        #[test]
        fn emissions_scale_with_the_surface(u in 0.01..1.0f64, k in 0.1..10.0f64, on in 0.0..300.0f64) {
            let map = EngineMap::default();
            let fp = FuelProperties::default();
            let em = EmissionMap::default();
            let p = u * map.max_power;
            for s in [Species::CO, Species::HC, Species::NOx] {
                let r1 = engine::emission_rate(&map, &em, &fp, s, p, on).unwrap();
                let rk = engine::emission_rate(&map, &em.scaled(k), &fp, s, p, on).unwrap();
                prop_assert!(rel(rk, k * r1) <= 1e-12);
            }
        }
    }
}

mod cells {
    use super::*;

    proptest! {
        #[test]
        fn rc_step_is_the_closed_form(
            r in 1e-4..0.1f64,
            c in 10.0..1e5f64,
            i in -300.0..300.0f64,
            dt in 1e-3..1e4f64,
            u0 in -1.0..1.0f64,
        ) {
            let cell = CellParams { rc_branches: vec![RcBranch { r, c }], ..CellParams::default() };
            let pack = PackConfig { n_parallel: 1, ..PackConfig::default() };
            let mut st = BatteryState::new(50.0, 25.0, &cell);
            st.u_diff[0] = u0;
            let got = battery::rc_step(&st, i, dt, &cell, &pack).u_diff[0];
            let e = (-dt / (r * c)).exp();
            let want = u0 * e - i * r * (1.0 - e);
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(u0.abs()).max((i * r).abs()));
        }

        #[test]
        fn open_circuit_voltage_at_rest(soc in 0.0..100.0f64) {
            let cell = CellParams::default();
            let pack = PackConfig::default();
            let mut st = BatteryState::new(soc, 25.0, &cell);
            st.u_hyst = 0.0;
            let u = battery::terminal_voltage(&st, 0.0, &cell, &pack);
            prop_assert!(rel(u, pack.n_series as f64 * cell.ocv(soc)) <= 1e-12);
        }

        #[test]
        fn soh_measures_are_linear(a in 0.0..40.0f64, b in 0.0..40.0f64, rated in 10.0..40.0f64) {
            let mid = battery::soh_capacity((a + b) / 2.0, rated);
            let avg = (battery::soh_capacity(a, rated) + battery::soh_capacity(b, rated)) / 2.0;
            prop_assert!((mid - avg).abs() <= 1e-9);
            let (rn, re) = (0.1, 0.2);
            let ra = rn + (re - rn) * a / 40.0;
            let rb = rn + (re - rn) * b / 40.0;
            let mid = battery::soh_resistance((ra + rb) / 2.0, re, rn).unwrap();
            let avg = (battery::soh_resistance(ra, re, rn).unwrap() + battery::soh_resistance(rb, re, rn).unwrap()) / 2.0;
            prop_assert!((mid - avg).abs() <= 1e-9);
        }

        #[test]
        fn solved_current_delivers_the_power(soc in 10.0..95.0f64, frac in -0.95..0.95f64) {
            let cell = CellParams::default();
            let pack = PackConfig::default();
            let st = BatteryState::new(soc, 25.0, &cell);
            let p = frac * if frac > 0.0 {
                battery::max_discharge_power(&st, &cell, &pack)
            } else {
                battery::max_charge_power(&st, &cell, &pack).max(1.0)
            };
            prop_assume!(p.abs() > 1e-3);
            let i = battery::solve_current(&st, p, &cell, &pack).unwrap();
            let u = battery::terminal_voltage(&st, i, &cell, &pack);
            prop_assert!(rel(u * i / 1000.0, p) <= 1e-6);
        }
    }
}

mod powertrain {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn balances_hold_in_every_mode(m in mode(), p_d in -100.0..120.0f64, soc in 5.0..100.0f64, kmh in 0.0..160.0f64) {
            let (dtp, map, cell, pack) = (DrivetrainParams::default(), EngineMap::default(), CellParams::default(), PackConfig::default());
            let pt = Powertrain { drivetrain: &dtp, engine: &map, cell: &cell, pack: &pack };
            let st = BatteryState::new(soc, 25.0, &cell);
            let s = drivetrain::execute_mode(m, p_d, kmh / 3.6, &st, &pt);
            let g = dtp.gear_efficiency;
            prop_assert!(s.bus_residual().abs() <= 1e-9, "bus {}", s.bus_residual());
            prop_assert!(s.wheel_residual(g).abs() <= 1e-9, "wheel {}", s.wheel_residual(g));
            prop_assert!(s.p_friction_brake >= 0.0 && s.shortfall >= 0.0);
            match m {
                OperatingMode::EV => prop_assert_eq!(s.p_engine_mech, 0.0),
                OperatingMode::ICE | OperatingMode::Series if s.p_engine_mech > 0.0 => {
                    prop_assert!(engine::fuel_rate(&map, s.p_engine_mech).unwrap() > 0.0);
                }
                _ => {}
            }
        }

        #[test]
        fn regen_respects_the_ceiling(m in mode(), p_d in -100.0..0.0f64, soc in 5.0..100.0f64, kmh in 1.0..160.0f64) {
            let (dtp, map, cell, pack) = (DrivetrainParams::default(), EngineMap::default(), CellParams::default(), PackConfig::default());
            let pt = Powertrain { drivetrain: &dtp, engine: &map, cell: &cell, pack: &pack };
            let st = BatteryState::new(soc.min(pack.soc_ceiling()), 25.0, &cell);
            let s = drivetrain::execute_mode(m, p_d, kmh / 3.6, &st, &pt);
            let out = battery::step(&st, s.p_batt, 1.0, &cell, &pack, 25.0).unwrap();
            prop_assert!(out.state.soc <= pack.soc_ceiling() + 1e-9, "{}", out.state.soc);
        }
    }
}

mod supervisor {
    use super::*;

    proptest! {
        #[test]
        fn ev_activation_grows_with_soc(a in 0.0..100.0f64, b in 0.0..100.0f64) {
            let cfg = controller::default_rulebase();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let ev = |soc: f64| controller::evaluate(&cfg, &Inputs { speed: 30.0, soc, soc_pred: soc, p_req: 10.0 }).get(OperatingMode::EV);
            prop_assert!(ev(hi) >= ev(lo));
        }

        #[test]
        fn decisions_are_scale_free(
            act in prop::array::uniform4(0.0..1.0f64),
            lambda in 0.01..100.0f64,
            prev in prop::option::of((mode(), 0.0..10.0f64)),
        ) {
            let cfg = controller::default_rulebase();
            let a = Activations(act);
            let mut scaled_cfg = cfg.clone();
            scaled_cfg.hysteresis_margin *= lambda;
            prop_assert_eq!(a.argmax(), a.scaled(lambda).argmax());
            prop_assert_eq!(controller::decide(&a, prev, &cfg), controller::decide(&a.scaled(lambda), prev, &scaled_cfg));
        }

        #[test]
        fn some_rule_always_fires(speed in 0.0..=160.0f64, soc in 0.0..=100.0f64, soc_pred in 0.0..=100.0f64, p_req in -80.0..=120.0f64) {
            let cfg = controller::default_rulebase();
            let act = controller::evaluate(&cfg, &Inputs { speed, soc, soc_pred, p_req });
            prop_assert!(act.0.iter().any(|&x| x > 0.0));
        }

        #[test]
        fn braking_below_the_ceiling_selects_ev(
            speed in 0.0..160.0f64,
            soc in 0.0..94.9f64,
            soc_pred in 0.0..100.0f64,
            p_req in -80.0..-1e-6f64,
            prev in prop::option::of(mode()),
        ) {
            let cfg = controller::default_rulebase();
            let inp = Inputs { speed, soc, soc_pred, p_req };
            prop_assert!(controller::regen_override(&inp, 95.0));
            let prev = prev.map(|m| (m, cfg.min_dwell));
            prop_assert_eq!(controller::select_mode(&cfg, &inp, prev, 95.0).0, OperatingMode::EV);
        }
    }
}

mod runs {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn trace_invariants_on_random_routes(spec in synth_spec(), init_soc in 25.0..95.0f64) {
            let c = synthesize(&spec)?;
            let sc = ScenarioConfig {
                init_soc,
                predictor: SocPredictor::Constant { per_km: sim::DEFAULT_FALLBACK_PER_KM },
                ..ScenarioConfig::new(c)
            };
            let out = sim::run(&sc).unwrap();
            let s = &out.summary;
            prop_assert!(s.ledger.relative_residual() < 5e-3, "{:?}", s.ledger);
            prop_assert!(s.max_bus_residual < 1e-9 && s.max_wheel_residual < 1e-9);
            let ceiling = sc.model.pack.soc_ceiling();
            let mut last_switch = f64::NEG_INFINITY;
            let mut prev = &out.trace[0];
            prop_assert!(prev.soc >= 0.0 && prev.soc <= ceiling);
            for r in &out.trace[1..] {
                prop_assert!(r.fuel_cum >= prev.fuel_cum);
                for sp in Species::ALL {
                    prop_assert!(r.emissions_cum(sp) >= prev.emissions_cum(sp));
                }
                prop_assert!(r.soc >= 0.0 && r.soc <= ceiling);
                if r.mode != prev.mode {
                    prop_assert!(prev.t - last_switch >= sc.controller.min_dwell - 1e-9);
                    last_switch = prev.t;
                }
                prev = r;
            }
            let again = sim::run(&sc).unwrap();
            prop_assert_eq!(&again.trace, &out.trace);
        }
    }
}
