//! Fluorescence detection: Poisson photon counts per shot, and recovery of
//! the three class populations from a photon-number histogram.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::populations::Populations;
use crate::rng::seed_policy;

const TRUNCATION_MASS: f64 = 1e-12;
const LOGLIK_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100_000;
const MIN_SHOTS: u64 = 100;
/// Reported when the observed information cannot be inverted.
const FALLBACK_STDERR: f64 = 0.5;

pub const SHOT_BATCH: u64 = 4096;

/// Bright-ion count of each fitted class, in the order P_dd, P_uu, P_mixed.
pub const CLASS_BRIGHT: [usize; 3] = [2, 0, 1];

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionModel {
    /// Photons per window from one bright ion.
    pub mean_bright: f64,
    /// Photons per window from one dark ion.
    pub mean_dark: f64,
    /// Detection window in seconds; not used by the statistics.
    pub window: f64,
    pub n_ions: usize,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self { mean_bright: 40.0, mean_dark: 6.0, window: 160e-6, n_ions: 2 }
    }
}

impl DetectionModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_dark > 0.0 && self.mean_bright > self.mean_dark && self.mean_bright.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need mean_bright > mean_dark > 0, got {} and {}",
                self.mean_bright, self.mean_dark
            )));
        }
        if self.n_ions != 2 {
            return Err(Error::InvalidParameter(format!("n_ions must be 2, got {}", self.n_ions)));
        }
        Ok(())
    }

    pub fn class_mean(&self, k_bright: usize) -> Result<f64> {
        if k_bright > self.n_ions {
            return Err(Error::InvalidBrightCount(k_bright));
        }
        Ok(k_bright as f64 * self.mean_bright + (self.n_ions - k_bright) as f64 * self.mean_dark)
    }

    /// Largest histogram bin used by the fit; higher counts fold into it.
    pub fn support_cap(&self) -> u64 {
        let top = self.n_ions as f64 * self.mean_bright;
        (top + 10.0 * top.sqrt()).floor() as u64
    }
}

/// Poisson mass over `offset .. offset + mass.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution {
    pub mean: f64,
    pub offset: u64,
    pub mass: Vec<f64>,
}

impl PhotonDistribution {
    pub fn probability(&self, n: u64) -> f64 {
        n.checked_sub(self.offset).and_then(|i| self.mass.get(i as usize)).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn sample_mean(&self) -> f64 {
        self.mass.iter().enumerate().map(|(i, p)| (self.offset + i as u64) as f64 * p).sum::<f64>() / self.total()
    }
}

/// Poisson pmf at 0, 1, ..., `last` by the ratio recursion.
fn poisson_pmf(mean: f64, last: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(last as usize + 1);
    let mut p = (-mean).exp();
    out.push(p);
    for n in 1..=last {
        p *= mean / n as f64;
        out.push(p);
    }
    out
}

pub fn reference_distribution(k_bright: usize, model: &DetectionModel) -> Result<PhotonDistribution> {
    model.validate()?;
    let mean = model.class_mean(k_bright)?;
    let last = (mean + 20.0 * mean.sqrt() + 20.0).ceil() as u64;
    let pmf = poisson_pmf(mean, last);
    let first = pmf.iter().position(|&p| p >= TRUNCATION_MASS).unwrap_or(0);
    let end = pmf.iter().rposition(|&p| p >= TRUNCATION_MASS).map_or(first + 1, |i| i + 1);
    Ok(PhotonDistribution { mean, offset: first as u64, mass: pmf[first..end].to_vec() })
}

/// Per-class probabilities on bins `0..=cap`, the last bin carrying the tail.
fn binned_references(model: &DetectionModel) -> Result<[Vec<f64>; 3]> {
    let cap = model.support_cap();
    let mut out: [Vec<f64>; 3] = Default::default();
    for (slot, &k) in out.iter_mut().zip(CLASS_BRIGHT.iter()) {
        let mean = model.class_mean(k)?;
        let mut pmf = poisson_pmf(mean, cap);
        let mut term = pmf[cap as usize];
        let mut tail = term;
        let mut n = cap;
        while term > tail * 1e-18 || (n as f64) < mean {
            n += 1;
            term *= mean / n as f64;
            tail += term;
        }
        pmf[cap as usize] = tail;
        *slot = pmf;
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhotonHistogram {
    pub counts: BTreeMap<u64, u64>,
    pub n_shots: u64,
}

impl PhotonHistogram {
    pub fn record(&mut self, photons: u64) {
        *self.counts.entry(photons).or_insert(0) += 1;
        self.n_shots += 1;
    }

    pub fn merge(&mut self, other: &PhotonHistogram) {
        for (&n, &c) in &other.counts {
            *self.counts.entry(n).or_insert(0) += c;
        }
        self.n_shots += other.n_shots;
    }

    pub fn validate(&self) -> Result<()> {
        let total: u64 = self.counts.values().sum();
        if total != self.n_shots {
            return Err(Error::InvalidParameter(format!(
                "histogram counts sum to {total} but n_shots is {}",
                self.n_shots
            )));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        let s: u64 = self.counts.iter().map(|(n, c)| n * c).sum();
        s as f64 / self.n_shots as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("photons,count\n");
        for (n, c) in &self.counts {
            let _ = writeln!(out, "{n},{c}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("photons,count") {
            return Err(Error::InvalidParameter("histogram CSV must start with `photons,count`".into()));
        }
        let mut hist = Self::default();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::InvalidParameter(format!("histogram CSV line {}: {line:?}", i + 2));
            let (n, c) = line.split_once(',').ok_or_else(bad)?;
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let c: u64 = c.trim().parse().map_err(|_| bad())?;
            *hist.counts.entry(n).or_insert(0) += c;
            hist.n_shots += c;
        }
        Ok(hist)
    }
}

fn simulate_batch(
    probs: &Populations,
    poissons: &[Poisson<f64>; 3],
    shots: u64,
    seed: u64,
    batch: u64,
) -> PhotonHistogram {
    let mut rng = seed_policy(seed, batch);
    let mut hist = PhotonHistogram::default();
    for _ in 0..shots {
        let u: f64 = rng.random();
        let class = if u < probs.p_dd {
            0
        } else if u < probs.p_dd + probs.p_uu {
            1
        } else {
            2
        };
        hist.record(poissons[class].sample(&mut rng) as u64);
    }
    hist
}

/// Draws `n_shots` shots in batches of [`SHOT_BATCH`]; batch `b` uses
/// `seed_policy(seed, b)`, so the result does not depend on thread count.
pub fn simulate_shots(
    probs: &Populations,
    model: &DetectionModel,
    n_shots: u64,
    seed: u64,
) -> Result<PhotonHistogram> {
    probs.validate()?;
    if probs.as_array().iter().any(|p| *p < 0.0) {
        return Err(Error::InvalidProbabilities(probs.p_dd, probs.p_uu, probs.p_mixed));
    }
    model.validate()?;
    let mut poissons = Vec::with_capacity(3);
    for k in CLASS_BRIGHT {
        let mean = model.class_mean(k)?;
        poissons.push(Poisson::new(mean).map_err(|e| Error::InvalidParameter(e.to_string()))?);
    }
    let poissons: [Poisson<f64>; 3] = [poissons[0], poissons[1], poissons[2]];
    let n_batches = n_shots.div_ceil(SHOT_BATCH);
    let batches: Vec<PhotonHistogram> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let shots = SHOT_BATCH.min(n_shots - b * SHOT_BATCH);
            simulate_batch(probs, &poissons, shots, seed, b)
        })
        .collect();
    let mut hist = PhotonHistogram::default();
    for b in &batches {
        hist.merge(b);
    }
    Ok(hist)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationEstimate {
    pub populations: Populations,
    /// Standard errors in the order P_dd, P_uu, P_mixed.
    pub stderr: [f64; 3],
    pub loglik: f64,
    pub iterations: usize,
    pub n_shots: u64,
}

/// Maximum-likelihood mixture weights by expectation-maximisation, which
/// keeps the weights on the simplex at every iteration.
pub fn fit_populations(hist: &PhotonHistogram, model: &DetectionModel) -> Result<PopulationEstimate> {
    model.validate()?;
    hist.validate()?;
    if hist.n_shots < MIN_SHOTS {
        return Err(Error::TooFewShots(hist.n_shots));
    }
    let cap = model.support_cap();
    let refs = binned_references(model)?;
    let mut bins: BTreeMap<u64, f64> = BTreeMap::new();
    for (&n, &c) in &hist.counts {
        *bins.entry(n.min(cap)).or_insert(0.0) += c as f64;
    }
    let data: Vec<(f64, [f64; 3])> = bins
        .iter()
        .map(|(&n, &h)| (h, [refs[0][n as usize], refs[1][n as usize], refs[2][n as usize]]))
        .collect();

    let loglik = |w: &[f64; 3]| -> f64 {
        data.iter().map(|(h, q)| h * (w[0] * q[0] + w[1] * q[1] + w[2] * q[2]).max(f64::MIN_POSITIVE).ln()).sum()
    };

    let mut w = [1.0 / 3.0; 3];
    let mut ll = loglik(&w);
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next = [0.0; 3];
        for (h, q) in &data {
            let mix = w[0] * q[0] + w[1] * q[1] + w[2] * q[2];
            if mix <= 0.0 {
                continue;
            }
            for k in 0..3 {
                next[k] += h * w[k] * q[k] / mix;
            }
        }
        let norm: f64 = next.iter().sum();
        if norm <= 0.0 || !norm.is_finite() {
            break;
        }
        w = next.map(|x| x / norm);
        let new_ll = loglik(&w);
        last_change = new_ll - ll;
        ll = new_ll;
        if last_change.abs() < LOGLIK_TOL {
            break;
        }
    }
    if !(last_change.abs() < LOGLIK_TOL) {
        return Err(Error::FitNotConverged { iterations, last_change });
    }

    let populations = Populations { p_dd: w[0], p_uu: w[1], p_mixed: w[2] };
    Ok(PopulationEstimate { populations, stderr: observed_stderr(&data, &w), loglik: ll, iterations, n_shots: hist.n_shots })
}

/// Inverse observed information in the free coordinates (P_dd, P_uu).
fn observed_stderr(data: &[(f64, [f64; 3])], w: &[f64; 3]) -> [f64; 3] {
    let mut info = [[0.0; 2]; 2];
    for (h, q) in data {
        let mix = w[0] * q[0] + w[1] * q[1] + w[2] * q[2];
        if mix <= 0.0 {
            continue;
        }
        let d = [q[0] - q[2], q[1] - q[2]];
        for a in 0..2 {
            for b in 0..2 {
                info[a][b] += h * d[a] * d[b] / (mix * mix);
            }
        }
    }
    let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
    let scale = info[0][0].abs().max(info[1][1].abs());
    if !(det.is_finite() && det > 1e-12 * scale * scale) {
        return [FALLBACK_STDERR; 3];
    }
    let v00 = info[1][1] / det;
    let v11 = info[0][0] / det;
    let v01 = -info[0][1] / det;
    [v00, v11, v00 + v11 + 2.0 * v01].map(|v| v.max(0.0).sqrt())
}
