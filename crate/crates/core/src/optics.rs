//! Optical components, component sequences and dB-domain power propagation.
//!
//! Every quantity is kept in the log domain: launch and stage powers in dBm,
//! component effects in dB. Passive losses are stored as positive numbers and
//! subtracted; amplifier gain is stored as a positive number and added.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two wavelengths closer than this are treated as the same channel.
const WAVELENGTH_MATCH_NM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerDbm(pub f64);

impl PowerDbm {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(PowerDbm(value))
        } else {
            Err(Error::InvalidInput(format!(
                "power {value} dBm is not finite"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Applies a signed dB change (negative for loss).
    pub fn shifted(self, delta_db: f64) -> Self {
        PowerDbm(self.0 + delta_db)
    }
}

impl fmt::Display for PowerDbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dBm", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct WavelengthNm(f64);

impl WavelengthNm {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(WavelengthNm(value))
        } else {
            Err(Error::InvalidInput(format!(
                "wavelength {value} nm must be positive and finite"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn matches(self, other: WavelengthNm) -> bool {
        (self.0 - other.0).abs() < WAVELENGTH_MATCH_NM
    }
}

impl TryFrom<f64> for WavelengthNm {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        WavelengthNm::new(value)
    }
}

impl From<WavelengthNm> for f64 {
    fn from(w: WavelengthNm) -> f64 {
        w.0
    }
}

impl fmt::Display for WavelengthNm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    /// Power splitter or combiner (letter `S`).
    #[serde(alias = "S", alias = "PowerSplit")]
    PowerSplit,
    /// Wavelength multiplexer or demultiplexer (letter `M`).
    #[serde(alias = "M", alias = "WavelengthMux")]
    WavelengthMux,
    #[serde(alias = "Amplifier")]
    Amplifier,
}

impl ComponentKind {
    pub fn is_passive(self) -> bool {
        !matches!(self, ComponentKind::Amplifier)
    }

    pub fn letter(self) -> char {
        match self {
            ComponentKind::PowerSplit => 'S',
            ComponentKind::WavelengthMux => 'M',
            ComponentKind::Amplifier => 'A',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ComponentKind::PowerSplit => "power_split",
            ComponentKind::WavelengthMux => "wavelength_mux",
            ComponentKind::Amplifier => "amplifier",
        }
    }
}

/// A component type together with its per-wavelength effect in dB.
///
/// For passive kinds the effect is an insertion loss, for the amplifier it
/// is a gain. Both are stored as strictly positive values.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    kind: ComponentKind,
    effects: Vec<(WavelengthNm, f64)>,
}

impl ComponentSpec {
    pub fn new(kind: ComponentKind, effects: Vec<(WavelengthNm, f64)>) -> Result<Self> {
        let what = if kind.is_passive() { "loss" } else { "gain" };
        for (i, &(wl, db)) in effects.iter().enumerate() {
            if !(db.is_finite() && db > 0.0) {
                return Err(Error::Config(format!(
                    "{} {what} at {wl} nm must be a positive finite dB value, got {db}",
                    kind.name()
                )));
            }
            if effects[..i].iter().any(|(other, _)| other.matches(wl)) {
                return Err(Error::Config(format!(
                    "{} has duplicate entries for {wl} nm",
                    kind.name()
                )));
            }
        }
        Ok(ComponentSpec { kind, effects })
    }

    /// Convenience constructor for an amplifier with the same gain on every listed wavelength.
    pub fn amplifier(gain_db: f64, wavelengths: &[WavelengthNm]) -> Result<Self> {
        ComponentSpec::new(
            ComponentKind::Amplifier,
            wavelengths.iter().map(|&w| (w, gain_db)).collect(),
        )
    }

    pub fn kind(&self) -> ComponentKind {
        self.kind
    }

    pub fn effects(&self) -> &[(WavelengthNm, f64)] {
        &self.effects
    }

    /// Magnitude of the effect (loss or gain) at `wavelength`.
    pub fn effect_db(&self, wavelength: WavelengthNm) -> Option<f64> {
        self.effects
            .iter()
            .find(|(wl, _)| wl.matches(wavelength))
            .map(|&(_, db)| db)
    }

    /// Signed power change across the component: negative for losses.
    pub fn signed_delta_db(&self, wavelength: WavelengthNm) -> Result<f64> {
        let db = self.effect_db(wavelength).ok_or_else(|| {
            Error::Config(format!(
                "{} has no entry for {wavelength} nm",
                self.kind.name()
            ))
        })?;
        Ok(if self.kind.is_passive() { -db } else { db })
    }
}

/// An ordered chain of passive components, written as a string of `S`/`M` letters.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentSequence(Vec<ComponentKind>);

impl ComponentSequence {
    pub fn new(items: Vec<ComponentKind>) -> Result<Self> {
        if let Some(pos) = items.iter().position(|k| !k.is_passive()) {
            return Err(Error::InvalidInput(format!(
                "component sequences hold passive components only (amplifier at position {pos})"
            )));
        }
        Ok(ComponentSequence(items))
    }

    pub fn empty() -> Self {
        ComponentSequence(Vec::new())
    }

    pub fn items(&self) -> &[ComponentKind] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn push(&mut self, kind: ComponentKind) {
        debug_assert!(kind.is_passive());
        self.0.push(kind);
    }

    pub(crate) fn pop(&mut self) {
        self.0.pop();
    }
}

impl fmt::Display for ComponentSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        for kind in &self.0 {
            write!(f, "{}", kind.letter())?;
        }
        Ok(())
    }
}

impl std::str::FromStr for ComponentSequence {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_sequence(s)
    }
}

/// Parses a letter string such as `"SMMS"`. `S` and `M` are accepted in either
/// case; `"-"` and `""` both denote the empty sequence. Positions in errors are
/// one-based character offsets.
pub fn parse_sequence(text: &str) -> Result<ComponentSequence> {
    let text = text.trim();
    if text.is_empty() || text == "-" {
        return Ok(ComponentSequence::empty());
    }
    text.chars()
        .enumerate()
        .map(|(position, c)| match c.to_ascii_uppercase() {
            'S' => Ok(ComponentKind::PowerSplit),
            'M' => Ok(ComponentKind::WavelengthMux),
            _ => Err(Error::MalformedSequence {
                found: c,
                position: position + 1,
            }),
        })
        .collect::<Result<Vec<_>>>()
        .map(ComponentSequence)
}

/// Occurrence counts `(n_split, n_mux)`.
pub fn component_counts(seq: &ComponentSequence) -> (usize, usize) {
    seq.items().iter().fold((0, 0), |(s, m), kind| match kind {
        ComponentKind::PowerSplit => (s + 1, m),
        ComponentKind::WavelengthMux => (s, m + 1),
        ComponentKind::Amplifier => (s, m),
    })
}

/// A link between one transmitter and one receiver.
///
/// Without an amplifier the whole black box sits in `left` and `right` is
/// empty. With an amplifier, `left` (transmitter to amplifier input) must be
/// non-empty while `right` (amplifier output to receiver) may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkDesign {
    left: ComponentSequence,
    amplifier: Option<ComponentSpec>,
    right: ComponentSequence,
    launch: PowerDbm,
    wavelength: WavelengthNm,
}

impl LinkDesign {
    pub fn new(
        left: ComponentSequence,
        amplifier: Option<ComponentSpec>,
        right: ComponentSequence,
        launch: PowerDbm,
        wavelength: WavelengthNm,
    ) -> Result<Self> {
        match &amplifier {
            None if !right.is_empty() => {
                return Err(Error::InvalidInput(
                    "a design without amplifier has no right black box".into(),
                ))
            }
            Some(spec) if spec.kind() != ComponentKind::Amplifier => {
                return Err(Error::InvalidInput(format!(
                    "amplifier slot holds a {} spec",
                    spec.kind().name()
                )))
            }
            Some(_) if left.is_empty() => {
                return Err(Error::InvalidInput(
                    "the left black box cannot be empty when an amplifier is present".into(),
                ))
            }
            _ => {}
        }
        PowerDbm::new(launch.0)?;
        Ok(LinkDesign {
            left,
            amplifier,
            right,
            launch,
            wavelength,
        })
    }

    /// A design with no amplifier.
    pub fn passive(
        seq: ComponentSequence,
        launch: PowerDbm,
        wavelength: WavelengthNm,
    ) -> Result<Self> {
        LinkDesign::new(seq, None, ComponentSequence::empty(), launch, wavelength)
    }

    pub fn left(&self) -> &ComponentSequence {
        &self.left
    }

    pub fn right(&self) -> &ComponentSequence {
        &self.right
    }

    pub fn amplifier(&self) -> Option<&ComponentSpec> {
        self.amplifier.as_ref()
    }

    pub fn has_amplifier(&self) -> bool {
        self.amplifier.is_some()
    }

    pub fn launch(&self) -> PowerDbm {
        self.launch
    }

    pub fn wavelength(&self) -> WavelengthNm {
        self.wavelength
    }

    pub fn component_count(&self) -> usize {
        self.left.len() + self.right.len() + usize::from(self.amplifier.is_some())
    }

    pub fn with_launch(&self, launch: PowerDbm) -> Self {
        LinkDesign {
            launch,
            ..self.clone()
        }
    }
}

/// Passive component losses keyed by kind, plus an optional amplifier gain spec.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComponentLibrary {
    passive: BTreeMap<ComponentKind, ComponentSpec>,
    amplifier: Option<ComponentSpec>,
}

impl ComponentLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, spec: ComponentSpec) {
        if spec.kind().is_passive() {
            self.passive.insert(spec.kind(), spec);
        } else {
            self.amplifier = Some(spec);
        }
    }

    pub fn with(mut self, spec: ComponentSpec) -> Self {
        self.insert(spec);
        self
    }

    pub fn get(&self, kind: ComponentKind) -> Option<&ComponentSpec> {
        if kind.is_passive() {
            self.passive.get(&kind)
        } else {
            self.amplifier.as_ref()
        }
    }

    pub fn amplifier(&self) -> Option<&ComponentSpec> {
        self.amplifier.as_ref()
    }

    pub fn specs(&self) -> impl Iterator<Item = &ComponentSpec> {
        self.passive.values().chain(self.amplifier.iter())
    }

    /// Positive loss of a passive kind at `wavelength`.
    pub fn loss_db(&self, kind: ComponentKind, wavelength: WavelengthNm) -> Result<f64> {
        let spec = self
            .passive
            .get(&kind)
            .ok_or_else(|| Error::Config(format!("library has no {} spec", kind.name())))?;
        spec.effect_db(wavelength).ok_or_else(|| {
            Error::Config(format!("{} has no entry for {wavelength} nm", kind.name()))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub label: String,
    pub power: PowerDbm,
}

/// Power at every component boundary of a design, starting at the launch power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerTrace {
    stages: Vec<Stage>,
    preamp_index: Option<usize>,
}

impl PowerTrace {
    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn powers(&self) -> impl Iterator<Item = PowerDbm> + '_ {
        self.stages.iter().map(|s| s.power)
    }

    pub fn preamp_index(&self) -> Option<usize> {
        self.preamp_index
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

pub fn propagate(design: &LinkDesign, library: &ComponentLibrary) -> Result<PowerTrace> {
    let wl = design.wavelength();
    let mut stages = Vec::with_capacity(design.component_count() + 1);
    stages.push(Stage {
        label: "launch".into(),
        power: design.launch(),
    });
    push_passive(&mut stages, 'L', design.left(), library, wl)?;

    let mut preamp_index = None;
    if let Some(amp) = design.amplifier() {
        let last = stages.len() - 1;
        preamp_index = Some(last);
        let power = stages[last].power.shifted(amp.signed_delta_db(wl)?);
        stages.push(Stage {
            label: "amp".into(),
            power,
        });
        push_passive(&mut stages, 'R', design.right(), library, wl)?;
    }

    Ok(PowerTrace {
        stages,
        preamp_index,
    })
}

fn push_passive(
    stages: &mut Vec<Stage>,
    side: char,
    seq: &ComponentSequence,
    library: &ComponentLibrary,
    wl: WavelengthNm,
) -> Result<()> {
    for (i, &kind) in seq.items().iter().enumerate() {
        let power = stages[stages.len() - 1]
            .power
            .shifted(-library.loss_db(kind, wl)?);
        stages.push(Stage {
            label: format!("{side}{}:{}", i + 1, kind.letter()),
            power,
        });
    }
    Ok(())
}

/// Power at the amplifier input, or `None` for a design without amplifier.
pub fn preamp_power(trace: &PowerTrace) -> Option<PowerDbm> {
    trace.preamp_index.map(|i| trace.stages[i].power)
}

/// Power arriving at the receiver.
pub fn rx_power(trace: &PowerTrace) -> PowerDbm {
    trace
        .stages
        .last()
        .map(|s| s.power)
        .expect("a trace always holds the launch stage")
}
