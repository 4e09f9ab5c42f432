//! Mamdani fuzzy supervisor choosing the operating mode.
//!
//! Inputs are vehicle speed (km/h), SOC (%), predicted SOC at the end of the
//! lookahead horizon (%) and required wheel power (kW). Rule firing uses
//! min-AND scaled by the rule weight, modes aggregate by max, and the crisp
//! output is the mode with the largest activation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drivetrain::OperatingMode;

const DEFAULT_RULEBASE: &str = include_str!("../data/rulebase.json");

/// Input variable names, in [`Inputs::as_array`] order.
pub const INPUT_NAMES: [&str; 4] = ["speed", "soc", "soc_pred", "p_req"];
pub const RULE_COUNT: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("rule base JSON: {0}")]
    Json(String),
    #[error("expected {RULE_COUNT} rules, found {0}")]
    RuleCount(usize),
    #[error("rule {rule}: {reason}")]
    BadRule { rule: usize, reason: String },
    #[error("variable {var}: {reason}")]
    BadVariable { var: String, reason: String },
    #[error("mode {0} is not the consequent of any rule")]
    UnusedMode(OperatingMode),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", content = "points", rename_all = "lowercase")]
pub enum MembershipFunction {
    Triangular([f64; 3]),
    Trapezoidal([f64; 4]),
}

impl MembershipFunction {
    fn corners(&self) -> [f64; 4] {
        match *self {
            MembershipFunction::Triangular([a, b, c]) => [a, b, b, c],
            MembershipFunction::Trapezoidal(p) => p,
        }
    }

    /// Degree of membership of `x`, in `[0, 1]`.
    pub fn membership(&self, x: f64) -> f64 {
        let [a, b, c, d] = self.corners();
        if x < a || x > d {
            0.0
        } else if x < b {
            (x - a) / (b - a)
        } else if x <= c {
            1.0
        } else {
            (d - x) / (d - c)
        }
    }

    fn is_ordered(&self) -> bool {
        let p = self.corners();
        p.iter().all(|x| x.is_finite()) && p.windows(2).all(|w| w[0] <= w[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    #[serde(flatten)]
    pub mf: MembershipFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticVariable {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub universe: (f64, f64),
    pub terms: Vec<Term>,
}

impl LinguisticVariable {
    fn term_index(&self, name: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.name == name)
    }
}

/// Memberships of `value` (clamped to the universe) in each term of `var`.
pub fn fuzzify(value: f64, var: &LinguisticVariable) -> Vec<f64> {
    let x = value.clamp(var.universe.0, var.universe.1);
    var.terms.iter().map(|t| t.mf.membership(x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    #[serde(rename = "if")]
    pub antecedents: Vec<(String, String)>,
    #[serde(rename = "then")]
    pub consequent: OperatingMode,
    pub weight: f64,
}

/// A validated rule base. Rules are stored with resolved indices so that
/// evaluation does no string lookups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct ControllerConfig {
    pub variables: Vec<LinguisticVariable>,
    pub rules: Vec<FuzzyRule>,
    /// Activation a challenger must exceed the incumbent by.
    pub hysteresis_margin: f64,
    /// Minimum time in a mode before a fuzzy-driven switch, s.
    pub min_dwell: f64,
    compiled: Vec<CompiledRule>,
}

#[derive(Debug, Clone, PartialEq)]
struct CompiledRule {
    /// (input index, term index)
    terms: Vec<(usize, usize)>,
    mode: OperatingMode,
    weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawConfig {
    hysteresis_margin: f64,
    min_dwell: f64,
    variables: Vec<LinguisticVariable>,
    rules: Vec<FuzzyRule>,
}

impl TryFrom<RawConfig> for ControllerConfig {
    type Error = ControllerError;

    fn try_from(raw: RawConfig) -> Result<Self, Self::Error> {
        ControllerConfig::new(raw.variables, raw.rules, raw.hysteresis_margin, raw.min_dwell)
    }
}

impl From<ControllerConfig> for RawConfig {
    fn from(c: ControllerConfig) -> Self {
        RawConfig { hysteresis_margin: c.hysteresis_margin, min_dwell: c.min_dwell, variables: c.variables, rules: c.rules }
    }
}

impl ControllerConfig {
    /// Validates and compiles a rule base.
    pub fn new(
        variables: Vec<LinguisticVariable>,
        rules: Vec<FuzzyRule>,
        hysteresis_margin: f64,
        min_dwell: f64,
    ) -> Result<Self, ControllerError> {
        // variables must be exactly the four inputs, in order
        let names: Vec<&str> = variables.iter().map(|v| v.name.as_str()).collect();
        if names != INPUT_NAMES {
            return Err(ControllerError::BadVariable {
                var: names.join(","),
                reason: format!("expected variables {INPUT_NAMES:?} in this order"),
            });
        }
        for v in &variables {
            let bad = |reason: &str| ControllerError::BadVariable { var: v.name.clone(), reason: reason.into() };
            if !(v.universe.0 < v.universe.1) {
                return Err(bad("empty universe"));
            }
            if v.terms.is_empty() {
                return Err(bad("no terms"));
            }
            if let Some(t) = v.terms.iter().find(|t| !t.mf.is_ordered()) {
                return Err(bad(&format!("term {} has unordered breakpoints", t.name)));
            }
        }
        if rules.len() != RULE_COUNT {
            return Err(ControllerError::RuleCount(rules.len()));
        }
        let index: HashMap<&str, usize> = INPUT_NAMES.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let mut compiled = Vec::with_capacity(rules.len());
        for (k, r) in rules.iter().enumerate() {
            let bad = |reason: String| ControllerError::BadRule { rule: k + 1, reason };
            if !(r.weight > 0.0 && r.weight <= 1.0) {
                return Err(bad(format!("weight {} outside (0, 1]", r.weight)));
            }
            if r.antecedents.is_empty() {
                return Err(bad("no antecedents".into()));
            }
            let mut terms = Vec::new();
            for (var, term) in &r.antecedents {
                let vi = *index.get(var.as_str()).ok_or_else(|| bad(format!("unknown variable {var}")))?;
                if terms.iter().any(|&(i, _)| i == vi) {
                    return Err(bad(format!("variable {var} used twice")));
                }
                let ti = variables[vi].term_index(term).ok_or_else(|| bad(format!("unknown term {var}.{term}")))?;
                terms.push((vi, ti));
            }
            compiled.push(CompiledRule { terms, mode: r.consequent, weight: r.weight });
        }
        if let Some(m) = OperatingMode::ALL.into_iter().find(|m| !rules.iter().any(|r| r.consequent == *m)) {
            return Err(ControllerError::UnusedMode(m));
        }
        if !(hysteresis_margin >= 0.0 && min_dwell >= 0.0) {
            return Err(ControllerError::Json("hysteresis_margin and min_dwell must be nonnegative".into()));
        }
        Ok(Self { variables, rules, hysteresis_margin, min_dwell, compiled })
    }

    pub fn from_json(text: &str) -> Result<Self, ControllerError> {
        serde_json::from_str(text).map_err(|e| ControllerError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rule base serializes")
    }
}

/// The bundled 30-rule base.
pub fn default_rulebase() -> ControllerConfig {
    ControllerConfig::from_json(DEFAULT_RULEBASE).expect("bundled rule base is valid")
}

impl Default for ControllerConfig {
    fn default() -> Self {
        default_rulebase()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    /// km/h
    pub speed: f64,
    /// %
    pub soc: f64,
    /// %
    pub soc_pred: f64,
    /// kW
    pub p_req: f64,
}

impl Inputs {
    pub fn as_array(&self) -> [f64; 4] {
        [self.speed, self.soc, self.soc_pred, self.p_req]
    }
}

/// Aggregated activation per mode, indexed by [`OperatingMode::index`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Activations(pub [f64; 4]);

impl Activations {
    pub fn get(&self, m: OperatingMode) -> f64 {
        self.0[m.index()]
    }

    /// Highest activation, ties going to the earlier mode in
    /// [`OperatingMode::ALL`].
    pub fn argmax(&self) -> OperatingMode {
        let mut best = OperatingMode::EV;
        for m in OperatingMode::ALL {
            if self.get(m) > self.get(best) {
                best = m;
            }
        }
        best
    }

    pub fn scaled(&self, k: f64) -> Activations {
        Activations(self.0.map(|a| a * k))
    }
}

/// Fires every rule and aggregates per mode.
pub fn evaluate(cfg: &ControllerConfig, inputs: &Inputs) -> Activations {
    let mu: Vec<Vec<f64>> = cfg
        .variables
        .iter()
        .zip(inputs.as_array())
        .map(|(var, x)| fuzzify(x, var))
        .collect();
    let mut act = [0.0f64; 4];
    for r in &cfg.compiled {
        let strength = r.terms.iter().map(|&(v, t)| mu[v][t]).fold(1.0, f64::min) * r.weight;
        let slot = &mut act[r.mode.index()];
        *slot = slot.max(strength);
    }
    Activations(act)
}

/// Picks the next mode from activations with hysteresis and minimum dwell.
///
/// `prev` is the current mode and how long it has been held. A challenger
/// replaces it only when its activation beats the incumbent's by
/// `hysteresis_margin` and the dwell time has elapsed. When every mode has
/// zero activation the incumbent is kept.
pub fn decide(act: &Activations, prev: Option<(OperatingMode, f64)>, cfg: &ControllerConfig) -> OperatingMode {
    let best = act.argmax();
    let Some((cur, held)) = prev else {
        return best;
    };
    if best == cur {
        return cur;
    }
    let beats = act.get(best) >= act.get(cur) + cfg.hysteresis_margin;
    let dwelt = held >= cfg.min_dwell;
    if beats && dwelt && act.get(best) > 0.0 {
        best
    } else {
        cur
    }
}

/// Whether braking forces EV: negative demand with room left to charge.
pub fn regen_override(inputs: &Inputs, soc_ceiling: f64) -> bool {
    inputs.p_req < 0.0 && inputs.soc < soc_ceiling
}

/// Full controller step: regen override, then fuzzy inference and
/// [`decide`]. The override still honours the minimum dwell so that mode
/// switches stay at least `min_dwell` apart; braking in Series or Parallel
/// recovers energy through the motors anyway.
pub fn select_mode(
    cfg: &ControllerConfig,
    inputs: &Inputs,
    prev: Option<(OperatingMode, f64)>,
    soc_ceiling: f64,
) -> (OperatingMode, Activations) {
    let act = evaluate(cfg, inputs);
    if regen_override(inputs, soc_ceiling) {
        let mode = match prev {
            Some((cur, held)) if held < cfg.min_dwell => cur,
            _ => OperatingMode::EV,
        };
        return (mode, act);
    }
    (decide(&act, prev, cfg), act)
}

#[cfg(test)]
mod tests {
    use super::*;
    use OperatingMode::*;

    fn strictly_highest(act: &Activations, m: OperatingMode) -> bool {
        OperatingMode::ALL.into_iter().filter(|&o| o != m).all(|o| act.get(m) > act.get(o))
    }

    #[test]
    fn membership_examples() {
        let tri = MembershipFunction::Triangular([0.0, 50.0, 100.0]);
        assert_eq!(tri.membership(50.0), 1.0);
        assert_eq!(tri.membership(25.0), 0.5);
        assert_eq!(tri.membership(-1.0), 0.0);
        assert_eq!(tri.membership(101.0), 0.0);
        let shoulder = MembershipFunction::Trapezoidal([0.0, 0.0, 25.0, 45.0]);
        assert_eq!(shoulder.membership(0.0), 1.0);
        assert_eq!(shoulder.membership(35.0), 0.5);
    }

    #[test]
    fn fuzzify_clamps_to_universe() {
        let cfg = default_rulebase();
        let p = &cfg.variables[3];
        assert_eq!(fuzzify(-500.0, p), fuzzify(-80.0, p));
        assert!(fuzzify(42.0, p).iter().all(|m| (0.0..=1.0).contains(m)));
    }

    #[test]
    fn default_rulebase_structure() {
        let cfg = default_rulebase();
        assert_eq!(cfg.rules.len(), 30);
        for m in OperatingMode::ALL {
            assert!(cfg.rules.iter().any(|r| r.consequent == m));
        }
        assert_eq!(cfg.hysteresis_margin, 0.05);
        assert_eq!(cfg.min_dwell, 2.0);
    }

    #[test]
    fn grid_scan_coverage() {
        let cfg = default_rulebase();
        let axis = |lo: f64, hi: f64| (0..20).map(move |k| lo + (hi - lo) * k as f64 / 19.0);
        for speed in axis(0.0, 160.0) {
            for soc in axis(0.0, 100.0) {
                for soc_pred in axis(0.0, 100.0) {
                    for p_req in axis(-80.0, 120.0) {
                        let act = evaluate(&cfg, &Inputs { speed, soc, soc_pred, p_req });
                        assert!(act.0.iter().any(|&a| a > 0.0), "no rule fires at {speed} {soc} {soc_pred} {p_req}");
                    }
                }
            }
        }
    }

    #[test]
    fn behavioral_examples() {
        let cfg = default_rulebase();
        let ev = evaluate(&cfg, &Inputs { speed: 30.0, soc: 90.0, soc_pred: 85.0, p_req: 10.0 });
        assert!(strictly_highest(&ev, EV), "{ev:?}");
        let series = evaluate(&cfg, &Inputs { speed: 120.0, soc: 25.0, soc_pred: 15.0, p_req: 30.0 });
        assert!(strictly_highest(&series, Series), "{series:?}");
        for speed in [20.0, 60.0, 100.0, 140.0] {
            for soc_pred in [20.0, 50.0, 90.0] {
                let par = evaluate(&cfg, &Inputs { speed, soc: 50.0, soc_pred, p_req: 90.0 });
                assert!(strictly_highest(&par, Parallel), "{speed} {soc_pred}: {par:?}");
            }
        }
        let braking = Inputs { speed: 50.0, soc: 60.0, soc_pred: 50.0, p_req: -15.0 };
        for prev in OperatingMode::ALL {
            assert_eq!(select_mode(&cfg, &braking, Some((prev, 5.0)), 100.0).0, EV);
            assert_eq!(select_mode(&cfg, &braking, None, 100.0).0, EV);
            // a fresh switch is not undone within the dwell time
            assert_eq!(select_mode(&cfg, &braking, Some((prev, 1.0)), 100.0).0, prev);
        }
    }

    #[test]
    fn ev_activation_monotone_in_soc() {
        let cfg = default_rulebase();
        let mut prev = 0.0;
        for k in 0..=1000 {
            let soc = k as f64 * 0.1;
            let a = evaluate(&cfg, &Inputs { speed: 30.0, soc, soc_pred: soc, p_req: 10.0 }).get(EV);
            assert!(a >= prev - 1e-12, "EV activation drops at soc {soc}");
            prev = a;
        }
    }

    #[test]
    fn decide_examples() {
        let cfg = default_rulebase();
        let dominant = Activations([0.9, 0.3, 0.2, 0.1]);
        for prev in OperatingMode::ALL {
            assert_eq!(decide(&dominant, Some((prev, 10.0)), &cfg), EV);
        }
        assert_eq!(decide(&Activations([0.5, 0.5, 0.0, 0.0]), None, &cfg), EV);
        // inside the hysteresis band the incumbent stays
        assert_eq!(decide(&Activations([0.52, 0.5, 0.0, 0.0]), Some((Series, 10.0)), &cfg), Series);
        // dwell not yet satisfied
        assert_eq!(decide(&dominant, Some((Series, 1.0)), &cfg), Series);
    }

    #[test]
    fn json_round_trip() {
        let cfg = default_rulebase();
        let back = ControllerConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_wrong_rule_count() {
        let cfg = default_rulebase();
        let mut rules = cfg.rules.clone();
        rules.pop();
        assert_eq!(
            ControllerConfig::new(cfg.variables.clone(), rules, 0.05, 2.0),
            Err(ControllerError::RuleCount(29))
        );
    }
}
