//! The BER-satisfiability decision (BSD).
//!
//! A scenario passes when its BER is strictly below the tolerance. Measured
//! power levels predict that outcome through single-threshold rules, which
//! are either fixed ([`ThresholdRuleSet`]) or learned from labelled data as a
//! depth-one decision tree ([`DecisionStump`]).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::PowerDbm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PassFail {
    Pass,
    Fail,
}

impl PassFail {
    pub fn is_pass(self) -> bool {
        self == PassFail::Pass
    }
}

impl fmt::Display for PassFail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PassFail::Pass => "Pass",
            PassFail::Fail => "Fail",
        })
    }
}

/// Measured power features a sample can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    /// Power at the amplifier input.
    Preamp,
    /// Received power.
    Rx,
    /// Launch power.
    Launch,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Preamp, Feature::Rx, Feature::Launch];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Preamp => "preamp",
            Feature::Rx => "rx",
            Feature::Launch => "launch",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown feature {s:?} (expected preamp, rx or launch)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub scenario: String,
    pub features: BTreeMap<Feature, f64>,
    pub label: PassFail,
}

impl LabeledSample {
    pub fn feature(&self, feature: Feature) -> Result<f64> {
        self.features.get(&feature).copied().ok_or_else(|| {
            Error::Config(format!(
                "scenario {} has no {feature} feature",
                self.scenario
            ))
        })
    }
}

/// Pass iff `log10_ber < tolerance_log10`; the boundary itself fails.
pub fn label_from_ber(log10_ber: f64, tolerance_log10: f64) -> PassFail {
    if log10_ber < tolerance_log10 {
        PassFail::Pass
    } else {
        PassFail::Fail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafCounts {
    pub low: usize,
    pub high: usize,
}

/// A depth-one decision tree over one power feature.
///
/// A sample goes to the low leaf iff its feature value is `<= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionStump {
    pub feature: Feature,
    pub threshold: f64,
    pub low_label: PassFail,
    pub high_label: PassFail,
    pub counts: LeafCounts,
    /// Weighted Gini impurity of the two leaves.
    pub impurity: f64,
    pub misclassified: usize,
}

impl DecisionStump {
    pub fn predict(&self, value: f64) -> PassFail {
        if value <= self.threshold {
            self.low_label
        } else {
            self.high_label
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Class counts of one leaf.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    pass: u64,
    fail: u64,
}

impl Tally {
    fn add(&mut self, label: PassFail) {
        match label {
            PassFail::Pass => self.pass += 1,
            PassFail::Fail => self.fail += 1,
        }
    }

    fn n(self) -> u64 {
        self.pass + self.fail
    }

    /// Majority label; an even split goes to Fail.
    fn majority(self) -> PassFail {
        if self.pass > self.fail {
            PassFail::Pass
        } else {
            PassFail::Fail
        }
    }

    fn minority(self) -> u64 {
        self.pass.min(self.fail)
    }
}

/// Weighted Gini impurity of a two-leaf split, kept as an exact fraction.
///
/// For a leaf with counts (p, f) and size n, n * gini = 2pf/n, so the split
/// impurity is (p_l f_l / n_l + p_h f_h / n_h) * 2 / N. Comparing the bracket
/// as a fraction avoids ties being decided by rounding.
#[derive(Debug, Clone, Copy)]
struct SplitImpurity {
    num: u128,
    den: u128,
}

impl SplitImpurity {
    fn of(low: Tally, high: Tally) -> Self {
        let (nl, nh) = (low.n() as u128, high.n() as u128);
        SplitImpurity {
            num: (low.pass * low.fail) as u128 * nh + (high.pass * high.fail) as u128 * nl,
            den: nl * nh,
        }
    }

    fn value(self, total: usize) -> f64 {
        2.0 * self.num as f64 / self.den as f64 / total as f64
    }
}

impl PartialEq for SplitImpurity {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SplitImpurity {}

impl PartialOrd for SplitImpurity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SplitImpurity {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

/// Learns the Gini-minimizing single-threshold split on `feature`.
///
/// Candidate thresholds are midpoints between adjacent distinct feature
/// values. Among equally pure splits the lowest threshold wins.
pub fn learn_stump(data: &[LabeledSample], feature: Feature) -> Result<DecisionStump> {
    let mut points: Vec<(f64, PassFail)> = data
        .iter()
        .map(|s| Ok((s.feature(feature)?, s.label)))
        .collect::<Result<_>>()?;
    if let Some((v, _)) = points.iter().find(|(v, _)| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{feature} value {v} is not finite"
        )));
    }
    if !(points.iter().any(|p| p.1.is_pass()) && points.iter().any(|p| !p.1.is_pass())) {
        return Err(Error::DegenerateTraining(format!(
            "{} samples all carry one label",
            points.len()
        )));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut total = Tally::default();
    for &(_, label) in &points {
        total.add(label);
    }

    let mut best: Option<(SplitImpurity, usize, Tally, Tally)> = None;
    let mut low = Tally::default();
    for i in 0..points.len() - 1 {
        low.add(points[i].1);
        if points[i].0 == points[i + 1].0 {
            continue;
        }
        let high = Tally {
            pass: total.pass - low.pass,
            fail: total.fail - low.fail,
        };
        let imp = SplitImpurity::of(low, high);
        // strict comparison keeps the earliest (lowest) threshold on ties
        if best.as_ref().is_none_or(|(b, ..)| imp < *b) {
            best = Some((imp, i, low, high));
        }
    }

    let (imp, i, low, high) = best.ok_or_else(|| {
        Error::NoSplit(format!(
            "all {} samples share one {feature} value",
            points.len()
        ))
    })?;
    Ok(DecisionStump {
        feature,
        threshold: 0.5 * (points[i].0 + points[i + 1].0),
        low_label: low.majority(),
        high_label: high.majority(),
        counts: LeafCounts {
            low: low.n() as usize,
            high: high.n() as usize,
        },
        impurity: imp.value(points.len()),
        misclassified: (low.minority() + high.minority()) as usize,
    })
}

/// Empirical power floors of the BSD rules. Floors are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdRuleSet {
    /// Minimum received power for links without amplifier.
    pub rx_floor_no_amp: f64,
    /// Minimum power at the amplifier input.
    pub preamp_floor: f64,
    /// Minimum received power for amplified links.
    pub rx_floor_with_amp: f64,
    pub ber_tolerance_log10: f64,
}

impl Default for ThresholdRuleSet {
    fn default() -> Self {
        ThresholdRuleSet {
            rx_floor_no_amp: -16.25,
            preamp_floor: -26.38,
            rx_floor_with_amp: -12.25,
            ber_tolerance_log10: -12.0,
        }
    }
}

impl ThresholdRuleSet {
    pub fn validate(&self) -> Result<()> {
        let floors = [
            self.rx_floor_no_amp,
            self.preamp_floor,
            self.rx_floor_with_amp,
        ];
        if floors.iter().any(|f| !f.is_finite()) {
            return Err(Error::Config(format!(
                "rule floors must be finite: {self:?}"
            )));
        }
        if !(self.ber_tolerance_log10.is_finite() && self.ber_tolerance_log10 < 0.0) {
            return Err(Error::Config(format!(
                "BER tolerance log10 must be negative, got {}",
                self.ber_tolerance_log10
            )));
        }
        Ok(())
    }

    pub fn floor(&self, rule: Rule) -> f64 {
        match rule {
            Rule::RxFloorNoAmp => self.rx_floor_no_amp,
            Rule::PreampFloor => self.preamp_floor,
            Rule::RxFloorWithAmp => self.rx_floor_with_amp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    RxFloorNoAmp,
    PreampFloor,
    RxFloorWithAmp,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::RxFloorNoAmp => "rx_floor_no_amp",
            Rule::PreampFloor => "preamp_floor",
            Rule::RxFloorWithAmp => "rx_floor_with_amp",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BsdVerdict {
    pub decision: PassFail,
    /// Feature value minus floor, per applied rule.
    pub margins: BTreeMap<Rule, f64>,
    pub failed_rules: Vec<Rule>,
}

impl BsdVerdict {
    fn from_checks(rules: &ThresholdRuleSet, checks: &[(Rule, f64)]) -> Self {
        let mut margins = BTreeMap::new();
        let mut failed_rules = Vec::new();
        for &(rule, value) in checks {
            let margin = value - rules.floor(rule);
            if value < rules.floor(rule) {
                failed_rules.push(rule);
            }
            margins.insert(rule, margin);
        }
        let decision = if failed_rules.is_empty() {
            PassFail::Pass
        } else {
            PassFail::Fail
        };
        BsdVerdict {
            decision,
            margins,
            failed_rules,
        }
    }

    /// Smallest margin across the applied rules.
    pub fn min_margin(&self) -> f64 {
        self.margins.values().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn classify_no_amp(rx: PowerDbm, rules: &ThresholdRuleSet) -> BsdVerdict {
    BsdVerdict::from_checks(rules, &[(Rule::RxFloorNoAmp, rx.value())])
}

pub fn classify_with_amp(preamp: PowerDbm, rx: PowerDbm, rules: &ThresholdRuleSet) -> BsdVerdict {
    BsdVerdict::from_checks(
        rules,
        &[
            (Rule::PreampFloor, preamp.value()),
            (Rule::RxFloorWithAmp, rx.value()),
        ],
    )
}

/// Applies whichever rules the sample's features support: the amplifier rules
/// when a preamp power is present (the receiver floor only if rx is known too),
/// otherwise the no-amplifier receiver floor.
pub fn classify_sample(sample: &LabeledSample, rules: &ThresholdRuleSet) -> Result<BsdVerdict> {
    let preamp = sample.features.get(&Feature::Preamp);
    let rx = sample.features.get(&Feature::Rx);
    let checks: Vec<(Rule, f64)> = match (preamp, rx) {
        (Some(&p), Some(&r)) => vec![(Rule::PreampFloor, p), (Rule::RxFloorWithAmp, r)],
        (Some(&p), None) => vec![(Rule::PreampFloor, p)],
        (None, Some(&r)) => vec![(Rule::RxFloorNoAmp, r)],
        (None, None) => {
            return Err(Error::Config(format!(
                "scenario {} has neither preamp nor rx power",
                sample.scenario
            )))
        }
    };
    Ok(BsdVerdict::from_checks(rules, &checks))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleAccuracy {
    pub correct: usize,
    pub total: usize,
    /// Scenario ids whose predicted label disagrees with the measured one.
    pub errors: Vec<String>,
}

pub fn evaluate_rule_accuracy(
    rules: &ThresholdRuleSet,
    data: &[LabeledSample],
) -> Result<RuleAccuracy> {
    let mut errors = Vec::new();
    for sample in data {
        if classify_sample(sample, rules)?.decision != sample.label {
            errors.push(sample.scenario.clone());
        }
    }
    Ok(RuleAccuracy {
        correct: data.len() - errors.len(),
        total: data.len(),
        errors,
    })
}
