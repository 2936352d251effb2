//! Design-space enumeration and feasibility search.
//!
//! A design space fixes the launch power, wavelength, amplifier policy and
//! the maximum length of each black box. [`enumerate`] lists every design in
//! it; [`explore`] keeps the designs that pass the BSD rules and ranks them.

pub mod calibration;

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsd::{classify_no_amp, classify_with_amp, BsdVerdict, ThresholdRuleSet};
use crate::error::{Error, Result};
use crate::optics::{
    preamp_power, propagate, rx_power, ComponentKind, ComponentLibrary, ComponentSequence,
    ComponentSpec, LinkDesign, PowerDbm, PowerTrace, WavelengthNm,
};

pub use self::calibration::{
    calibrate_losses, calibrated_library, default_library, CalibrationResult,
};

const ALPHABET: [ComponentKind; 2] = [ComponentKind::PowerSplit, ComponentKind::WavelengthMux];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplifierMode {
    Required,
    Forbidden,
    Optional,
}

impl AmplifierMode {
    fn allows_passive(self) -> bool {
        self != AmplifierMode::Required
    }

    fn allows_amplified(self) -> bool {
        self != AmplifierMode::Forbidden
    }
}

/// On-disk form of a design space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpaceFile {
    pub max_left: usize,
    #[serde(default)]
    pub max_right: usize,
    pub amplifier: AmplifierMode,
    #[serde(default)]
    pub gain_db: Option<f64>,
    pub launch_dbm: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpace {
    max_left: usize,
    max_right: usize,
    mode: AmplifierMode,
    amplifier: Option<ComponentSpec>,
    launch: PowerDbm,
    wavelength: WavelengthNm,
}

impl DesignSpace {
    /// `gain_db` is required unless the amplifier is forbidden.
    pub fn new(
        max_left: usize,
        max_right: usize,
        mode: AmplifierMode,
        gain_db: Option<f64>,
        launch: PowerDbm,
        wavelength: WavelengthNm,
    ) -> Result<Self> {
        PowerDbm::new(launch.value()).map_err(|e| Error::Config(e.to_string()))?;
        let amplifier = match mode {
            AmplifierMode::Forbidden => {
                if max_right != 0 {
                    return Err(Error::Config(
                        "max_right must be 0 when the amplifier is forbidden".into(),
                    ));
                }
                None
            }
            _ => {
                let gain = gain_db.ok_or_else(|| {
                    Error::Config("an amplifier gain (gain_db) is required for this space".into())
                })?;
                Some(ComponentSpec::amplifier(gain, &[wavelength])?)
            }
        };
        Ok(DesignSpace {
            max_left,
            max_right,
            mode,
            amplifier,
            launch,
            wavelength,
        })
    }

    pub fn from_file(file: &DesignSpaceFile) -> Result<Self> {
        DesignSpace::new(
            file.max_left,
            file.max_right,
            file.amplifier,
            file.gain_db,
            PowerDbm(file.launch_dbm),
            WavelengthNm::new(file.wavelength_nm).map_err(|e| Error::Config(e.to_string()))?,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DesignSpaceFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("design space: {e}")))?;
        Self::from_file(&file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn max_left(&self) -> usize {
        self.max_left
    }

    pub fn max_right(&self) -> usize {
        self.max_right
    }

    pub fn mode(&self) -> AmplifierMode {
        self.mode
    }

    pub fn amplifier(&self) -> Option<&ComponentSpec> {
        self.amplifier.as_ref()
    }

    pub fn launch(&self) -> PowerDbm {
        self.launch
    }

    pub fn wavelength(&self) -> WavelengthNm {
        self.wavelength
    }

    pub fn with_launch(&self, launch: PowerDbm) -> Self {
        DesignSpace {
            launch,
            ..self.clone()
        }
    }

    fn passive_design(&self, left: ComponentSequence) -> LinkDesign {
        LinkDesign::passive(left, self.launch, self.wavelength)
            .expect("passive designs are always valid")
    }

    fn amplified_design(&self, left: ComponentSequence, right: ComponentSequence) -> LinkDesign {
        LinkDesign::new(
            left,
            self.amplifier.clone(),
            right,
            self.launch,
            self.wavelength,
        )
        .expect("left box is non-empty")
    }
}

/// Every `S`/`M` string of length `min..=max`, shortest first, `S` before `M`.
pub fn sequences(min: usize, max: usize) -> impl Iterator<Item = ComponentSequence> {
    (min..=max).flat_map(|len| {
        (0u64..1 << len).map(move |code| {
            let items = (0..len)
                .map(|i| ALPHABET[((code >> (len - 1 - i)) & 1) as usize])
                .collect();
            ComponentSequence::new(items).expect("alphabet is passive")
        })
    })
}

/// All designs in `space`: passive designs first (when allowed), then
/// amplified designs ordered by left box and then right box.
pub fn enumerate(space: &DesignSpace) -> impl Iterator<Item = LinkDesign> + '_ {
    let passive = space
        .mode
        .allows_passive()
        .then(|| sequences(0, space.max_left).map(|left| space.passive_design(left)));
    let amplified = space.mode.allows_amplified().then(|| {
        sequences(1, space.max_left).flat_map(move |left| {
            sequences(0, space.max_right)
                .map(move |right| space.amplified_design(left.clone(), right))
        })
    });
    passive
        .into_iter()
        .flatten()
        .chain(amplified.into_iter().flatten())
}

/// Closed-form size of [`enumerate`]'s output.
pub fn design_count(space: &DesignSpace) -> u128 {
    let upto = |n: usize| (1u128 << (n + 1)) - 1;
    let mut count = 0;
    if space.mode.allows_passive() {
        count += upto(space.max_left);
    }
    if space.mode.allows_amplified() {
        count += (upto(space.max_left) - 1) * upto(space.max_right);
    }
    count
}

/// Propagates a design and applies the matching BSD rule set.
pub fn evaluate(
    design: &LinkDesign,
    library: &ComponentLibrary,
    rules: &ThresholdRuleSet,
) -> Result<(PowerTrace, BsdVerdict)> {
    let trace = propagate(design, library)?;
    let rx = rx_power(&trace);
    let verdict = match preamp_power(&trace) {
        Some(preamp) => classify_with_amp(preamp, rx, rules),
        None => classify_no_amp(rx, rules),
    };
    Ok((trace, verdict))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibleDesign {
    #[serde(skip)]
    pub design: LinkDesign,
    pub trace: PowerTrace,
    pub verdict: BsdVerdict,
    pub min_margin: f64,
}

/// Enumeration order: passive before amplified, then left box, then right box,
/// each shortest first with `S < M`.
pub fn design_order(a: &LinkDesign, b: &LinkDesign) -> Ordering {
    let key = |d: &LinkDesign| (d.has_amplifier(), d.left().len(), d.right().len());
    let (ah, al, _) = key(a);
    let (bh, bl, _) = key(b);
    ah.cmp(&bh)
        .then(al.cmp(&bl))
        .then_with(|| a.left().cmp(b.left()))
        .then(a.right().len().cmp(&b.right().len()))
        .then_with(|| a.right().cmp(b.right()))
}

/// Ranking: fewest components, then largest minimum margin, then [`design_order`].
pub fn rank_order(a: &FeasibleDesign, b: &FeasibleDesign) -> Ordering {
    a.design
        .component_count()
        .cmp(&b.design.component_count())
        .then(b.min_margin.total_cmp(&a.min_margin))
        .then_with(|| design_order(&a.design, &b.design))
}

/// Depth-first candidate generation that skips every extension of a prefix
/// whose power already sits below all floors it could still satisfy.
/// Passive losses only lower the power, so a skipped design cannot pass.
fn pruned_candidates(
    space: &DesignSpace,
    library: &ComponentLibrary,
    rules: &ThresholdRuleSet,
) -> Result<Vec<LinkDesign>> {
    let wl = space.wavelength;
    let gain = match &space.amplifier {
        Some(amp) => Some(amp.signed_delta_db(wl)?),
        None => None,
    };
    let passive_floor = space.mode.allows_passive().then_some(rules.rx_floor_no_amp);
    let amp_floor = gain.map(|g| rules.preamp_floor.max(rules.rx_floor_with_amp - g));
    let viable =
        |p: f64| passive_floor.is_some_and(|f| p >= f) || amp_floor.is_some_and(|f| p >= f);

    let mut out = Vec::new();
    let mut left = ComponentSequence::empty();
    walk_left(
        space,
        library,
        rules,
        gain,
        &viable,
        &mut left,
        space.launch.value(),
        &mut out,
    )?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn walk_left(
    space: &DesignSpace,
    library: &ComponentLibrary,
    rules: &ThresholdRuleSet,
    gain: Option<f64>,
    viable: &dyn Fn(f64) -> bool,
    left: &mut ComponentSequence,
    power: f64,
    out: &mut Vec<LinkDesign>,
) -> Result<()> {
    if space.mode.allows_passive() && power >= rules.rx_floor_no_amp {
        out.push(space.passive_design(left.clone()));
    }
    if let Some(g) = gain {
        if !left.is_empty() && power >= rules.preamp_floor {
            let mut right = ComponentSequence::empty();
            walk_right(space, library, rules, left, &mut right, power + g, out)?;
        }
    }
    if left.len() == space.max_left {
        return Ok(());
    }
    for kind in ALPHABET {
        let next = power + -library.loss_db(kind, space.wavelength)?;
        if viable(next) {
            left.push(kind);
            walk_left(space, library, rules, gain, viable, left, next, out)?;
            left.pop();
        }
    }
    Ok(())
}

fn walk_right(
    space: &DesignSpace,
    library: &ComponentLibrary,
    rules: &ThresholdRuleSet,
    left: &ComponentSequence,
    right: &mut ComponentSequence,
    power: f64,
    out: &mut Vec<LinkDesign>,
) -> Result<()> {
    if power < rules.rx_floor_with_amp {
        return Ok(());
    }
    out.push(space.amplified_design(left.clone(), right.clone()));
    if right.len() == space.max_right {
        return Ok(());
    }
    for kind in ALPHABET {
        let next = power + -library.loss_db(kind, space.wavelength)?;
        right.push(kind);
        walk_right(space, library, rules, left, right, next, out)?;
        right.pop();
    }
    Ok(())
}

/// Passing designs of `space`, ranked by [`rank_order`].
///
/// Candidates are evaluated in parallel; the result is identical to a
/// sequential run.
pub fn explore(
    space: &DesignSpace,
    library: &ComponentLibrary,
    rules: &ThresholdRuleSet,
) -> Result<Vec<FeasibleDesign>> {
    rules.validate()?;
    let candidates = pruned_candidates(space, library, rules)?;
    let evaluated = candidates
        .into_par_iter()
        .map(|design| {
            let (trace, verdict) = evaluate(&design, library, rules)?;
            Ok(FeasibleDesign {
                min_margin: verdict.min_margin(),
                design,
                trace,
                verdict,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut feasible: Vec<FeasibleDesign> = evaluated
        .into_iter()
        .filter(|f| f.verdict.decision.is_pass())
        .collect();
    feasible.sort_by(rank_order);
    Ok(feasible)
}

pub const RESULTS_HEADER: [&str; 7] = [
    "rank",
    "left_seq",
    "right_seq",
    "amp",
    "rx_dbm",
    "preamp_dbm",
    "min_margin_db",
];

/// Ranked results as CSV. `amp` holds the gain in dB, empty without amplifier.
pub fn results_csv(results: &[FeasibleDesign]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER).expect("in-memory write");
    for (i, f) in results.iter().enumerate() {
        let wl = f.design.wavelength();
        let amp = f
            .design
            .amplifier()
            .and_then(|a| a.effect_db(wl))
            .map(|g| g.to_string())
            .unwrap_or_default();
        w.write_record([
            (i + 1).to_string(),
            f.design.left().to_string(),
            f.design.right().to_string(),
            amp,
            rx_power(&f.trace).value().to_string(),
            preamp_power(&f.trace)
                .map(|p| p.value().to_string())
                .unwrap_or_default(),
            f.min_margin.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
