//! BER estimation from received-signal amplitudes.
//!
//! The amplitude histogram of an on-off keyed signal is a mixture of two
//! Gaussians, one per bit value. Fitting that mixture yields the level means
//! and spreads, from which the Q factor and then the BER follow:
//!
//! ```text
//! Q   = (mu1 - mu0) / (sigma1 + sigma0)
//! BER = erfc(Q / sqrt 2) / 2
//! ```

pub mod erfc;

use std::f64::consts::{LN_10, LN_2, SQRT_2};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub use self::erfc::{erfc, ln_erfc, log10_erfc};

/// Minimum number of samples accepted for a mixture fit.
pub const MIN_SAMPLES: usize = 100;

/// A fitted standard deviation below this fraction of the sample range is a collapse.
const DEGENERATE_SIGMA_RATIO: f64 = 1e-12;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSamples(Vec<f64>);

impl SignalSamples {
    pub fn new(amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() < MIN_SAMPLES {
            return Err(Error::InvalidInput(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                amplitudes.len()
            )));
        }
        if let Some(i) = amplitudes.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sample {i} is not finite ({})",
                amplitudes[i]
            )));
        }
        Ok(SignalSamples(amplitudes))
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reads a samples file: either one amplitude per line, or CSV with an
    /// `amplitude` header column. Lines starting with `#` are comments.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .peekable();

        let mut column = None;
        if let Some(&(lineno, first)) = lines.peek() {
            if first.parse::<f64>().is_err() {
                let idx = first
                    .split(',')
                    .position(|h| h.trim().eq_ignore_ascii_case("amplitude"))
                    .ok_or_else(|| {
                        Error::Data(format!(
                            "line {lineno}: expected a number or a CSV header with an \"amplitude\" column"
                        ))
                    })?;
                column = Some(idx);
                lines.next();
            }
        }

        let mut values = Vec::new();
        for (lineno, line) in lines {
            let cell = match column {
                Some(idx) => line.split(',').nth(idx).ok_or_else(|| {
                    Error::Data(format!("line {lineno}: missing amplitude column"))
                })?,
                None => line,
            };
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("line {lineno}: cannot parse {cell:?}")))?;
            values.push(v);
        }
        SignalSamples::new(values).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::Data(msg),
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Relative log-likelihood change that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            tol: 1e-9,
            max_iter: 500,
        }
    }
}

/// Two-component Gaussian mixture, ordered so that `mu1 > mu0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureFit {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub w0: f64,
    pub w1: f64,
    pub loglik: f64,
    pub iterations: usize,
}

impl MixtureFit {
    fn canonical(mut self) -> Self {
        if self.mu0 > self.mu1 {
            std::mem::swap(&mut self.mu0, &mut self.mu1);
            std::mem::swap(&mut self.sigma0, &mut self.sigma1);
            std::mem::swap(&mut self.w0, &mut self.w1);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct QFactor(f64);

impl QFactor {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(QFactor(value))
        } else {
            Err(Error::InvalidInput(format!(
                "Q factor must be finite and >= 0, got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Bit error probability, carried alongside its base-10 logarithm.
///
/// `log10` stays exact in the far tail where `prob` has been clamped to the
/// smallest normal f64.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerValue {
    pub prob: f64,
    pub log10: f64,
}

impl BerValue {
    pub fn from_log10(log10: f64) -> Self {
        BerValue {
            prob: 10f64.powf(log10).max(f64::MIN_POSITIVE),
            log10,
        }
    }

    pub fn from_prob(prob: f64) -> Result<Self> {
        if !(prob.is_finite() && prob > 0.0) {
            return Err(Error::InvalidInput(format!(
                "BER must be positive, got {prob}"
            )));
        }
        Ok(BerValue {
            prob,
            log10: prob.log10(),
        })
    }
}

/// Compensated summation; keeps the log-likelihood free of order-n rounding drift.
#[derive(Default)]
struct NeumaierSum {
    sum: f64,
    carry: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn ln_normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - LN_SQRT_2PI
}

fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fits a two-component Gaussian mixture by expectation-maximization.
pub fn fit_mixture(samples: &SignalSamples, config: FitConfig) -> Result<MixtureFit> {
    fit_mixture_with_history(samples, config).map(|(fit, _)| fit)
}

/// As [`fit_mixture`], also returning the log-likelihood after every E-step.
pub fn fit_mixture_with_history(
    samples: &SignalSamples,
    config: FitConfig,
) -> Result<(MixtureFit, Vec<f64>)> {
    if config.tol.is_nan() || config.tol <= 0.0 || config.max_iter == 0 {
        return Err(Error::InvalidInput(format!(
            "fit config needs tol > 0 and max_iter >= 1, got {config:?}"
        )));
    }
    let xs = samples.amplitudes();
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let range = hi - lo;
    if range <= 0.0 {
        return Err(Error::DegenerateFit("all samples are identical".into()));
    }
    let floor = DEGENERATE_SIGMA_RATIO * range;

    // median split initialisation
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lower, upper) = sorted.split_at(sorted.len() / 2);
    let (mut mu0, mut sigma0) = mean_and_sd(lower);
    let (mut mu1, mut sigma1) = mean_and_sd(upper);
    let (mut w0, mut w1) = (0.5_f64, 0.5_f64);
    if sigma0 < floor || sigma1 < floor {
        return Err(Error::DegenerateFit(format!(
            "initial component spread collapsed (sigma0 {sigma0:e}, sigma1 {sigma1:e})"
        )));
    }

    let n = xs.len() as f64;
    let mut resp = vec![0.0; xs.len()];
    let mut history = Vec::new();
    let mut prev: Option<f64> = None;

    for iteration in 1..=config.max_iter {
        // E-step: responsibility of component 1, computed in the log domain
        let (lw0, lw1) = (w0.ln(), w1.ln());
        let mut loglik = NeumaierSum::default();
        for (r, &x) in resp.iter_mut().zip(xs) {
            let a = lw0 + ln_normal_pdf(x, mu0, sigma0);
            let b = lw1 + ln_normal_pdf(x, mu1, sigma1);
            let m = a.max(b);
            let lse = m + ((a - m).exp() + (b - m).exp()).ln();
            *r = (b - lse).exp();
            loglik.add(lse);
        }
        let loglik = loglik.value();
        debug_assert!(
            prev.is_none_or(|p| loglik >= p - 1e-12 * p.abs()),
            "EM log-likelihood decreased: {prev:?} -> {loglik}"
        );
        history.push(loglik);

        let fit = MixtureFit {
            mu0,
            mu1,
            sigma0,
            sigma1,
            w0,
            w1,
            loglik,
            iterations: iteration,
        };
        if let Some(p) = prev {
            if (loglik - p).abs() <= config.tol * p.abs() {
                return Ok((fit.canonical(), history));
            }
        }
        if iteration == config.max_iter {
            return Err(Error::NotConverged {
                iterations: iteration,
                last: Box::new(fit.canonical()),
            });
        }
        prev = Some(loglik);

        // M-step
        let n1: f64 = resp.iter().sum();
        let n0 = n - n1;
        if n0 <= 0.0 || n1 <= 0.0 {
            return Err(Error::DegenerateFit(
                "a component lost all its weight".into(),
            ));
        }
        let (s0, s1) = resp.iter().zip(xs).fold((0.0, 0.0), |(s0, s1), (&r, &x)| {
            (s0 + (1.0 - r) * x, s1 + r * x)
        });
        mu0 = s0 / n0;
        mu1 = s1 / n1;
        let (v0, v1) = resp.iter().zip(xs).fold((0.0, 0.0), |(v0, v1), (&r, &x)| {
            (
                v0 + (1.0 - r) * (x - mu0).powi(2),
                v1 + r * (x - mu1).powi(2),
            )
        });
        sigma0 = (v0 / n0).sqrt();
        sigma1 = (v1 / n1).sqrt();
        w0 = n0 / n;
        w1 = n1 / n;
        if sigma0 < floor || sigma1 < floor || !(w0 > 0.0 && w1 > 0.0) {
            return Err(Error::DegenerateFit(format!(
                "component collapsed at iteration {iteration} (sigma0 {sigma0:e}, sigma1 {sigma1:e})"
            )));
        }
    }
    unreachable!("loop returns on its final iteration")
}

pub fn q_factor(fit: &MixtureFit) -> QFactor {
    QFactor(((fit.mu1 - fit.mu0) / (fit.sigma1 + fit.sigma0)).max(0.0))
}

/// BER = erfc(Q / sqrt 2) / 2, with the logarithm evaluated directly.
pub fn ber_from_q(q: QFactor) -> BerValue {
    let x = q.value() / SQRT_2;
    let ln_ber = ln_erfc(x) - LN_2;
    let prob = if x < 2.0 {
        0.5 * erfc(x)
    } else {
        ln_ber.exp().max(f64::MIN_POSITIVE)
    };
    let log10 = ln_ber / LN_10;
    BerValue { prob, log10 }
}

/// Inverts [`ber_from_q`] on the log10 scale by bisection.
pub fn q_from_log10_ber(log10_ber: f64) -> Result<QFactor> {
    let half = 0.5f64.log10();
    if !(log10_ber.is_finite() && log10_ber <= half) {
        return Err(Error::InvalidInput(format!(
            "log10 BER must be finite and <= log10(0.5), got {log10_ber}"
        )));
    }
    let f = |q: f64| ber_from_q(QFactor(q)).log10 - log10_ber;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.max(1.0) {
            break;
        }
    }
    QFactor::new(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerEstimate {
    pub fit: MixtureFit,
    pub q: QFactor,
    pub ber: BerValue,
}

/// Runs fit, Q factor and BER in sequence, keeping every intermediate.
pub fn estimate_ber(samples: &SignalSamples, config: FitConfig) -> Result<BerEstimate> {
    let fit = fit_mixture(samples, config)?;
    let q = q_factor(&fit);
    let ber = ber_from_q(q);
    Ok(BerEstimate { fit, q, ber })
}
