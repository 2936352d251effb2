//! Least-squares fit of per-component insertion losses.
//!
//! Each record at one wavelength gives an equation
//! `rx = P - n_S * L_S - n_M * L_M` in the unknown launch power `P` and the
//! two passive losses. The over-determined system is solved with a
//! Householder QR factorization.

use serde::Serialize;

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::optics::{
    component_counts, ComponentKind, ComponentLibrary, ComponentSpec, PowerDbm, WavelengthNm,
};

pub const COLUMNS: [&str; 3] = ["launch", "loss_split", "loss_mux"];

/// Relative size of an R diagonal entry below which its column counts as dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowResidual {
    pub scenario: String,
    pub measured: f64,
    pub predicted: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub wavelength: WavelengthNm,
    pub launch_est: PowerDbm,
    pub loss_split: f64,
    pub loss_mux: f64,
    pub residual_rms: f64,
    pub residuals: Vec<RowResidual>,
}

impl CalibrationResult {
    pub fn predict(&self, n_split: usize, n_mux: usize) -> f64 {
        self.launch_est.value() - n_split as f64 * self.loss_split - n_mux as f64 * self.loss_mux
    }

    /// Passive component specs at this wavelength.
    pub fn specs(&self) -> Result<[ComponentSpec; 2]> {
        let s = ComponentSpec::new(
            ComponentKind::PowerSplit,
            vec![(self.wavelength, self.loss_split)],
        );
        let m = ComponentSpec::new(
            ComponentKind::WavelengthMux,
            vec![(self.wavelength, self.loss_mux)],
        );
        match (s, m) {
            (Ok(s), Ok(m)) => Ok([s, m]),
            (Err(e), _) | (_, Err(e)) => Err(Error::Config(format!(
                "calibration at {} nm gave a non-physical loss: {e}",
                self.wavelength
            ))),
        }
    }
}

/// Solves min ||A x - b||_2 for a tall matrix with three columns.
///
/// Returns the indices of numerically dependent columns on failure.
pub(crate) fn solve_least_squares(
    a: &[[f64; 3]],
    b: &[f64],
) -> std::result::Result<[f64; 3], Vec<usize>> {
    let m = a.len();
    assert_eq!(m, b.len());
    let mut r: Vec<[f64; 3]> = a.to_vec();
    let mut y = b.to_vec();
    let norms: Vec<f64> = (0..3)
        .map(|j| r.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt())
        .collect();

    let mut dependent = Vec::new();
    for k in 0..3.min(m) {
        let alpha = r[k..].iter().map(|row| row[k] * row[k]).sum::<f64>().sqrt();
        if alpha <= RANK_TOL * norms[k].max(f64::MIN_POSITIVE) {
            dependent.push(k);
            continue;
        }
        let alpha = if r[k][k] > 0.0 { -alpha } else { alpha };
        let mut v: Vec<f64> = r[k..].iter().map(|row| row[k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..3 {
            let dot: f64 = v.iter().zip(&r[k..]).map(|(vi, row)| vi * row[j]).sum();
            let f = 2.0 * dot / vnorm2;
            for (vi, row) in v.iter().zip(&mut r[k..]) {
                row[j] -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&y[k..]).map(|(vi, yi)| vi * yi).sum();
        let f = 2.0 * dot / vnorm2;
        for (vi, yi) in v.iter().zip(&mut y[k..]) {
            *yi -= f * vi;
        }
    }
    for k in m..3 {
        dependent.push(k);
    }
    if !dependent.is_empty() {
        return Err(dependent);
    }

    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let s: f64 = (k + 1..3).map(|j| r[k][j] * x[j]).sum();
        x[k] = (y[k] - s) / r[k][k];
    }
    Ok(x)
}

/// Fits launch power and the two passive losses to the records measured at
/// `wavelength` that carry a received power and no amplifier.
pub fn calibrate_losses(ds: &Dataset, wavelength: WavelengthNm) -> Result<CalibrationResult> {
    let rows: Vec<_> = ds
        .at_wavelength(wavelength)
        .filter(|r| !r.has_amplifier())
        .filter_map(|r| r.rx.map(|rx| (r, rx.value())))
        .collect();
    if rows.len() < 3 {
        return Err(Error::Unidentifiable {
            columns: COLUMNS.to_vec(),
        });
    }

    let a: Vec<[f64; 3]> = rows
        .iter()
        .map(|(r, _)| {
            let (ns, nm) = component_counts(&r.left_seq);
            [1.0, -(ns as f64), -(nm as f64)]
        })
        .collect();
    let b: Vec<f64> = rows.iter().map(|&(_, rx)| rx).collect();
    let x = solve_least_squares(&a, &b).map_err(|cols| Error::Unidentifiable {
        columns: cols.into_iter().map(|c| COLUMNS[c]).collect(),
    })?;

    let mut result = CalibrationResult {
        wavelength,
        launch_est: PowerDbm(x[0]),
        loss_split: x[1],
        loss_mux: x[2],
        residual_rms: 0.0,
        residuals: Vec::with_capacity(rows.len()),
    };
    let mut sq = 0.0;
    for (r, rx) in rows {
        let (ns, nm) = component_counts(&r.left_seq);
        let predicted = result.predict(ns, nm);
        let residual = rx - predicted;
        sq += residual * residual;
        result.residuals.push(RowResidual {
            scenario: r.scenario.clone(),
            measured: rx,
            predicted,
            residual,
        });
    }
    result.residual_rms = (sq / result.residuals.len() as f64).sqrt();
    Ok(result)
}

/// Calibrates every wavelength present in `ds` and merges the losses into one library.
pub fn calibrated_library(ds: &Dataset) -> Result<(ComponentLibrary, Vec<CalibrationResult>)> {
    let mut wavelengths: Vec<WavelengthNm> = Vec::new();
    for w in ds.records.iter().filter_map(|r| r.wavelength) {
        if !wavelengths.iter().any(|x| x.matches(w)) {
            wavelengths.push(w);
        }
    }
    wavelengths.sort_by(|a, b| a.value().total_cmp(&b.value()));

    let results = wavelengths
        .iter()
        .map(|&w| calibrate_losses(ds, w))
        .collect::<Result<Vec<_>>>()?;
    let mut split = Vec::new();
    let mut mux = Vec::new();
    for r in &results {
        let [s, m] = r.specs()?;
        split.extend_from_slice(s.effects());
        mux.extend_from_slice(m.effects());
    }
    let library = ComponentLibrary::new()
        .with(ComponentSpec::new(ComponentKind::PowerSplit, split)?)
        .with(ComponentSpec::new(ComponentKind::WavelengthMux, mux)?);
    Ok((library, results))
}

/// Library with losses calibrated on the built-in no-amplifier table.
pub fn default_library() -> ComponentLibrary {
    calibrated_library(&crate::datasets::table1())
        .expect("built-in table is identifiable")
        .0
}
