//! Measurement records: the two built-in experiment tables and CSV ingestion.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::bsd::{label_from_ber, Feature, LabeledSample};
use crate::error::{Error, Result};
use crate::optics::{parse_sequence, ComponentSequence, PowerDbm, WavelengthNm};
use crate::signal::BerValue;

pub const CSV_HEADER: [&str; 8] = [
    "scenario",
    "left_seq",
    "right_seq",
    "wavelength_nm",
    "launch_dbm",
    "preamp_dbm",
    "rx_dbm",
    "ber",
];

/// One experimental scenario.
///
/// A record with a pre-amplification power describes an amplified link;
/// otherwise it must carry a received power.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub scenario: String,
    pub left_seq: ComponentSequence,
    pub right_seq: ComponentSequence,
    pub wavelength: Option<WavelengthNm>,
    pub launch: Option<PowerDbm>,
    pub preamp: Option<PowerDbm>,
    pub rx: Option<PowerDbm>,
    pub ber: BerValue,
}

impl MeasurementRecord {
    pub fn has_amplifier(&self) -> bool {
        self.preamp.is_some()
    }

    pub fn feature(&self, feature: Feature) -> Option<f64> {
        match feature {
            Feature::Preamp => self.preamp,
            Feature::Rx => self.rx,
            Feature::Launch => self.launch,
        }
        .map(PowerDbm::value)
    }

    fn validate(&self) -> Result<()> {
        let id = &self.scenario;
        if id.is_empty() {
            return Err(Error::Data("empty scenario id".into()));
        }
        if !self.has_amplifier() {
            if self.rx.is_none() {
                return Err(Error::Data(format!(
                    "scenario {id}: a record without preamp power needs rx power"
                )));
            }
            if !self.right_seq.is_empty() {
                return Err(Error::Data(format!(
                    "scenario {id}: right black box given without preamp power"
                )));
            }
        }
        if !(self.ber.log10.is_finite() && self.ber.log10 < 0.0) {
            return Err(Error::Data(format!(
                "scenario {id}: BER must lie in (0, 1), got log10 {}",
                self.ber.log10
            )));
        }
        for p in [self.launch, self.preamp, self.rx].into_iter().flatten() {
            PowerDbm::new(p.value()).map_err(|e| Error::Data(format!("scenario {id}: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<MeasurementRecord>,
    pub provenance: String,
    /// Free-text annotations keyed by scenario id.
    pub notes: BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(records: Vec<MeasurementRecord>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            r.validate()?;
            if !seen.insert(r.scenario.as_str()) {
                return Err(Error::Data(format!(
                    "duplicate scenario id {:?}",
                    r.scenario
                )));
            }
        }
        Ok(Dataset {
            records,
            provenance: provenance.into(),
            notes: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, scenario: &str) -> Option<&MeasurementRecord> {
        self.records.iter().find(|r| r.scenario == scenario)
    }

    /// Records measured at `wavelength`.
    pub fn at_wavelength(
        &self,
        wavelength: WavelengthNm,
    ) -> impl Iterator<Item = &MeasurementRecord> {
        self.records
            .iter()
            .filter(move |r| r.wavelength.is_some_and(|w| w.matches(wavelength)))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if !self.provenance.is_empty() {
            let _ = writeln!(out, "# provenance: {}", self.provenance.replace('\n', " "));
        }
        for (id, note) in &self.notes {
            let _ = writeln!(out, "# note {id}: {}", note.replace('\n', " "));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.scenario.clone(),
                r.left_seq.to_string(),
                r.right_seq.to_string(),
                opt(r.wavelength.map(f64::from)),
                opt(r.launch.map(PowerDbm::value)),
                opt(r.preamp.map(PowerDbm::value)),
                opt(r.rx.map(PowerDbm::value)),
                format_ber(&r.ber),
            ])
            .expect("in-memory write");
        }
        let bytes = w.into_inner().expect("in-memory flush");
        out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn parse_csv(text: &str, default_provenance: &str) -> Result<Self> {
        let mut provenance = None;
        let mut notes = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            if let Some(p) = body.strip_prefix("provenance:") {
                provenance = Some(p.trim().to_string());
            } else if let Some(rest) = body.strip_prefix("note ") {
                if let Some((id, note)) = rest.split_once(':') {
                    notes.insert(id.trim().to_string(), note.trim().to_string());
                }
            }
        }

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Data(format!("cannot read CSV header: {e}")))?
            .clone();
        let columns: Vec<&str> = headers.iter().collect();
        for want in CSV_HEADER {
            if !columns.contains(&want) {
                return Err(Error::Data(format!("missing column {want:?}")));
            }
        }
        if let Some(extra) = columns.iter().find(|c| !CSV_HEADER.contains(c)) {
            return Err(Error::Data(format!("unexpected column {extra:?}")));
        }
        let col = |name: &str| {
            columns
                .iter()
                .position(|c| *c == name)
                .expect("checked above")
        };
        let idx: Vec<usize> = CSV_HEADER.iter().map(|h| col(h)).collect();

        let mut records = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| Error::Data(format!("malformed CSV: {e}")))?;
            let line = row.position().map_or(0, |p| p.line());
            let cell = |i: usize| row.get(idx[i]).unwrap_or("");
            let ctx = |e: Error| Error::Data(format!("line {line}: {e}"));

            let number = |i: usize| -> Result<Option<f64>> {
                let text = cell(i);
                if text.is_empty() {
                    return Ok(None);
                }
                text.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Some)
                    .ok_or_else(|| {
                        Error::Data(format!("{} is not a number: {text:?}", CSV_HEADER[i]))
                    })
            };

            let record = (|| -> Result<MeasurementRecord> {
                let wavelength = number(3)?.map(WavelengthNm::new).transpose()?;
                Ok(MeasurementRecord {
                    scenario: cell(0).to_string(),
                    left_seq: parse_sequence(cell(1))?,
                    right_seq: parse_sequence(cell(2))?,
                    wavelength,
                    launch: number(4)?.map(PowerDbm),
                    preamp: number(5)?.map(PowerDbm),
                    rx: number(6)?.map(PowerDbm),
                    ber: parse_ber(cell(7))?,
                })
            })()
            .map_err(ctx)?;
            record.validate().map_err(ctx)?;
            records.push(record);
        }

        let mut ds = Dataset::new(
            records,
            provenance.unwrap_or_else(|| default_provenance.to_string()),
        )?;
        ds.notes = notes;
        Ok(ds)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse_csv(&text, &path.display().to_string())
    }
}

/// Parses a BER written in decimal or scientific notation.
///
/// Values below the f64 range keep an exact log10 from the mantissa and exponent.
pub fn parse_ber(text: &str) -> Result<BerValue> {
    let text = text.trim();
    let bad = || Error::Data(format!("BER {text:?} must be a number in (0, 1)"));
    let prob: f64 = text.parse().map_err(|_| bad())?;
    if prob.is_normal() && prob > 0.0 {
        if prob >= 1.0 {
            return Err(bad());
        }
        return BerValue::from_prob(prob);
    }
    // underflowed (or zero): recover the magnitude from the exponent
    let (mantissa, exponent) = text.split_once(['e', 'E']).ok_or_else(bad)?;
    let mantissa: f64 = mantissa.parse().map_err(|_| bad())?;
    let exponent: i32 = exponent.parse().map_err(|_| bad())?;
    if !(mantissa.is_finite() && mantissa > 0.0) {
        return Err(bad());
    }
    Ok(BerValue::from_log10(mantissa.log10() + f64::from(exponent)))
}

fn format_ber(ber: &BerValue) -> String {
    if ber.prob.is_normal() && ber.prob.log10() == ber.log10 {
        format!("{:e}", ber.prob)
    } else {
        let exponent = ber.log10.floor();
        format!("{}e{}", 10f64.powf(ber.log10 - exponent), exponent as i64)
    }
}

/// One labelled sample per record, in record order.
pub fn to_labeled(
    ds: &Dataset,
    features: &[Feature],
    tolerance_log10: f64,
) -> Result<Vec<LabeledSample>> {
    ds.records
        .iter()
        .map(|r| {
            let features = features
                .iter()
                .map(|&f| {
                    r.feature(f).map(|v| (f, v)).ok_or_else(|| {
                        Error::Config(format!("scenario {} has no {f} value", r.scenario))
                    })
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(LabeledSample {
                scenario: r.scenario.clone(),
                features,
                label: label_from_ber(r.ber.log10, tolerance_log10),
            })
        })
        .collect()
}

fn ber(text: &str) -> BerValue {
    parse_ber(text).expect("embedded BER literal")
}

fn seq(text: &str) -> ComponentSequence {
    parse_sequence(text).expect("embedded sequence literal")
}

/// Black box, wavelength (nm), received power (dBm), BER.
const TABLE1_ROWS: [(&str, f64, f64, &str); 10] = [
    ("SS", 1510.0, -16.25, "4.08E-21"),
    ("SS", 1550.0, -16.65, "1.9E-08"),
    ("MM", 1510.0, -11.45, "1.22E-21"),
    ("MM", 1550.0, -10.55, "2.24E-15"),
    ("SMMS", 1510.0, -17.15, "2.43E-06"),
    ("SMMS", 1550.0, -18.95, "3.57E-09"),
    ("SMSSMS", 1510.0, -28.15, "4.20E-04"),
    ("SMSSMS", 1550.0, -25.65, "1.48E-05"),
    ("SMSMMSMS", 1510.0, -29.65, "4.23E-03"),
    ("SMSMMSMS", 1550.0, -32.25, "1.81E-03"),
];

/// Links without amplifier. Ids are `<row>-<wavelength>`.
pub fn table1() -> Dataset {
    let records = TABLE1_ROWS
        .iter()
        .enumerate()
        .map(|(i, &(bb, wl, rx, b))| MeasurementRecord {
            scenario: format!("{}-{}", i / 2 + 1, wl),
            left_seq: seq(bb),
            right_seq: ComponentSequence::empty(),
            wavelength: Some(WavelengthNm::new(wl).expect("positive")),
            launch: None,
            preamp: None,
            rx: Some(PowerDbm(rx)),
            ber: ber(b),
        })
        .collect();
    Dataset::new(
        records,
        "experiment scenarios without amplifier (5 black boxes x 2 wavelengths)",
    )
    .expect("embedded table is valid")
}

/// Left black box, right black box, power before amplification (dBm), BER.
const TABLE2_ROWS: [(&str, &str, f64, &str); 23] = [
    ("M", "-", -20.38, "3.01E-15"),
    ("MM", "-", -12.37, "4.76E-38"),
    ("MM", "-", -24.24, "8.47E-21"),
    ("MM", "S", -3.97, "9.35E-15"),
    ("MM", "S", -26.62, "3.57E-03"),
    ("MS", "-", -29.99, "9.13E-08"),
    ("MS", "-", -21.53, "2.38E-74"),
    ("MS", "M", -8.53, "1.51E-14"),
    ("MS", "S", -6.58, "1.44E-22"),
    ("MS", "S", -29.93, "6.47E-03"),
    ("MS", "S", -29.99, "1.67E-04"),
    ("S", "-", -18.66, "2.11E-17"),
    ("SM", "M", -7.23, "1.05E-133"),
    ("SM", "M", -23.94, "4.41E-22"),
    ("SM", "M", -24.05, "8.50E-30"),
    ("SM", "M", -26.64, "4.89E-17"),
    ("SM", "S", -11.24, "9.38E-07"),
    ("SM", "S", -11.25, "4.42E-35"),
    ("SM", "S", -21.53, "2.63E-29"),
    ("SM", "S", -26.38, "6.18E-26"),
    ("SS", "-", -12.13, "2.94E-59"),
    ("SS", "-", -31.76, "3.48E-10"),
    ("SS", "M", -10.26, "5.24E-28"),
];

/// Launch powers reported only in running text, by row.
const TABLE2_LAUNCH: [(usize, f64); 3] = [(4, -1.63), (5, -22.2), (16, -19.28)];

pub const TABLE2_FLAGGED_ROW: &str = "17";

/// Amplified links. Ids are the row numbers `1`..`23`; wavelength and
/// received power are not reported per row.
pub fn table2() -> Dataset {
    let records = TABLE2_ROWS
        .iter()
        .enumerate()
        .map(|(i, &(left, right, preamp, b))| {
            let row = i + 1;
            MeasurementRecord {
                scenario: row.to_string(),
                left_seq: seq(left),
                right_seq: seq(right),
                wavelength: None,
                launch: TABLE2_LAUNCH
                    .iter()
                    .find(|(r, _)| *r == row)
                    .map(|&(_, p)| PowerDbm(p)),
                preamp: Some(PowerDbm(preamp)),
                rx: None,
                ber: ber(b),
            }
        })
        .collect();
    let mut ds = Dataset::new(records, "experiment scenarios with amplifier (23 rows)")
        .expect("embedded table is valid");
    for (row, _) in TABLE2_LAUNCH {
        ds.notes.insert(
            row.to_string(),
            "launch power taken from the accompanying text, not the table".into(),
        );
    }
    ds.notes.insert(
        TABLE2_FLAGGED_ROW.into(),
        "marked with an asterisk in the source table".into(),
    );
    ds
}

pub fn builtin(name: &str) -> Option<Dataset> {
    match name {
        "table1" => Some(table1()),
        "table2" => Some(table2()),
        _ => None,
    }
}
