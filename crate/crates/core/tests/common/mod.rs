//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the code under test beyond plain data accessors.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, LN_10, PI};

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

/// I(x) = integral over u in [0, inf) of exp(-u^2 - 2xu), by exp-sinh quadrature.
fn tail_integral(x: f64) -> f64 {
    let h: f64 = 1.0 / 64.0;
    let mut sum = 0.0;
    let mut k: f64 = -6.0 / h;
    while k * h <= 4.5 {
        let t = k * h;
        let u = (FRAC_PI_2 * t.sinh()).exp();
        let du = FRAC_PI_2 * t.cosh() * u;
        let f = (-u * u - 2.0 * x * u).exp();
        sum += f * du;
        k += 1.0;
    }
    sum * h
}

/// erfc(x) = 2/sqrt(pi) * exp(-x^2) * I(x), valid for x >= 0.
pub fn erfc_oracle(x: f64) -> f64 {
    2.0 / PI.sqrt() * (-x * x).exp() * tail_integral(x)
}

/// log10 of erfc(x)/2 without forming exp(-x^2).
pub fn log10_ber_oracle(q: f64) -> f64 {
    let x = q / 2f64.sqrt();
    (1.0 / PI.sqrt()).log10() - x * x / LN_10 + tail_integral(x).log10()
}

pub fn ber_oracle(q: f64) -> f64 {
    0.5 * erfc_oracle(q / 2f64.sqrt())
}

/// Equal-weight two-level samples with Q = 1 / (2 sigma) for levels 0 and 1.
pub fn two_level_samples(n: usize, q: f64, seed: u64) -> Vec<f64> {
    let sigma = 1.0 / (2.0 * q);
    let mut rng = StdRng::seed_from_u64(seed);
    let zero = Normal::new(0.0, sigma).unwrap();
    let one = Normal::new(1.0, sigma).unwrap();
    (0..n)
        .map(|i| {
            if i % 2 == 0 {
                zero.sample(&mut rng)
            } else {
                one.sample(&mut rng)
            }
        })
        .collect()
}

/// Brute-force stump: scans every midpoint, computes Gini in floating point,
/// keeps the first minimum (ties within 1e-12 favour the lower threshold).
#[derive(Debug, Clone, PartialEq)]
pub struct StumpOracle {
    pub threshold: f64,
    pub low_pass: bool,
    pub high_pass: bool,
    pub low_count: usize,
    pub high_count: usize,
    pub misclassified: usize,
    pub impurity: f64,
}

pub fn stump_oracle(points: &[(f64, bool)]) -> Option<StumpOracle> {
    let mut values: Vec<f64> = points.iter().map(|p| p.0).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    let n = points.len() as f64;
    let gini = |pass: usize, fail: usize| {
        let m = (pass + fail) as f64;
        if m == 0.0 {
            0.0
        } else {
            1.0 - (pass as f64 / m).powi(2) - (fail as f64 / m).powi(2)
        }
    };
    let mut best: Option<StumpOracle> = None;
    for w in values.windows(2) {
        let t = (w[0] + w[1]) / 2.0;
        let lp = points.iter().filter(|p| p.0 <= t && p.1).count();
        let lf = points.iter().filter(|p| p.0 <= t && !p.1).count();
        let hp = points.iter().filter(|p| p.0 > t && p.1).count();
        let hf = points.iter().filter(|p| p.0 > t && !p.1).count();
        let imp = ((lp + lf) as f64 * gini(lp, lf) + (hp + hf) as f64 * gini(hp, hf)) / n;
        if best.as_ref().is_none_or(|b| imp < b.impurity - 1e-12) {
            best = Some(StumpOracle {
                threshold: t,
                low_pass: lp > lf,
                high_pass: hp > hf,
                low_count: lp + lf,
                high_count: hp + hf,
                misclassified: if lp > lf { lf } else { lp } + if hp > hf { hf } else { hp },
                impurity: imp,
            });
        }
    }
    best
}

/// Least squares for rx = P - nS*LS - nM*LM via the 3x3 normal equations and Cramer's rule.
pub fn normal_equation_oracle(rows: &[(f64, f64, f64)]) -> [f64; 3] {
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for &(ns, nm, rx) in rows {
        let a = [1.0, -ns, -nm];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += a[i] * a[j];
            }
            atb[i] += a[i] * rx;
        }
    }
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(ata);
    let mut x = [0.0; 3];
    for (k, xk) in x.iter_mut().enumerate() {
        let mut m = ata;
        for i in 0..3 {
            m[i][k] = atb[i];
        }
        *xk = det3(m) / d;
    }
    x
}

pub fn sum_sq_residual(rows: &[(f64, f64, f64)], x: [f64; 3]) -> f64 {
    rows.iter()
        .map(|&(ns, nm, rx)| (rx - (x[0] - ns * x[1] - nm * x[2])).powi(2))
        .sum()
}

/// One design of the brute-force explorer oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleDesign {
    pub left: String,
    pub amplified: bool,
    pub right: String,
    pub rx: f64,
    pub preamp: Option<f64>,
    pub min_margin: f64,
}

pub struct OracleSpace {
    pub max_left: usize,
    pub max_right: usize,
    /// (allow passive, allow amplified)
    pub modes: (bool, bool),
    pub gain: f64,
    pub launch: f64,
    pub loss_s: f64,
    pub loss_m: f64,
    pub rx_floor_no_amp: f64,
    pub preamp_floor: f64,
    pub rx_floor_with_amp: f64,
}

fn strings_upto(max: usize) -> Vec<String> {
    let mut all = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max {
        let next: Vec<String> = layer
            .iter()
            .flat_map(|s| [format!("{s}S"), format!("{s}M")])
            .collect();
        all.extend(next.iter().cloned());
        layer = next;
    }
    all
}

fn shortlex(a: &str, b: &str) -> std::cmp::Ordering {
    // 'M' < 'S' in ASCII, so map to S=0, M=1 first
    let key = |s: &str| {
        s.chars()
            .map(|c| if c == 'S' { 0u8 } else { 1 })
            .collect::<Vec<_>>()
    };
    a.len().cmp(&b.len()).then(key(a).cmp(&key(b)))
}

/// Enumerate, propagate, filter and rank every design by direct evaluation.
pub fn explore_oracle(s: &OracleSpace) -> Vec<OracleDesign> {
    let apply = |mut p: f64, seq: &str| {
        for c in seq.chars() {
            p += -(if c == 'S' { s.loss_s } else { s.loss_m });
        }
        p
    };
    let mut out = Vec::new();
    for left in strings_upto(s.max_left) {
        if s.modes.0 {
            let rx = apply(s.launch, &left);
            if rx >= s.rx_floor_no_amp {
                out.push(OracleDesign {
                    left: left.clone(),
                    amplified: false,
                    right: String::new(),
                    rx,
                    preamp: None,
                    min_margin: rx - s.rx_floor_no_amp,
                });
            }
        }
        if s.modes.1 && !left.is_empty() {
            for right in strings_upto(s.max_right) {
                let pre = apply(s.launch, &left);
                let rx = apply(pre + s.gain, &right);
                if pre >= s.preamp_floor && rx >= s.rx_floor_with_amp {
                    out.push(OracleDesign {
                        left: left.clone(),
                        amplified: true,
                        right,
                        rx,
                        preamp: Some(pre),
                        min_margin: (pre - s.preamp_floor).min(rx - s.rx_floor_with_amp),
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| {
        let count = |d: &OracleDesign| d.left.len() + d.right.len() + usize::from(d.amplified);
        count(a)
            .cmp(&count(b))
            .then(b.min_margin.partial_cmp(&a.min_margin).unwrap())
            .then(a.amplified.cmp(&b.amplified))
            .then(shortlex(&a.left, &b.left))
            .then(shortlex(&a.right, &b.right))
    });
    out
}
