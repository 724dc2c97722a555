//! Simulated homodyne measurements and the finite-sample witness estimator.
//!
//! Outcomes are drawn by inverting a tabulated CDF. The table is built once
//! per `(state, theta)` and then shared read-only by all workers. Samples are
//! produced in fixed-size chunks, each with its own ChaCha stream keyed by
//! `(seed, chunk index)`, so a batch does not depend on the worker count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, WitnessError};
use crate::par;
use crate::quadrature::gauss_legendre;
use crate::states::{lossy_single_photon, MixedState, QuadratureAngle, QuadratureView, State, StellarState};
use crate::witness::{same_angle, WindowSet};
use crate::zeros::{find_real_zeros, DEFAULT_TOL_IMAG};

const BASE_CELLS: usize = 1 << 14;
const CHUNK: usize = 4096;
const MASS_TOL: f64 = 1e-9;
const CELL_RULE: usize = 8;

/// Monotone cubic interpolant of one component's CDF.
#[derive(Debug, Clone)]
struct CdfTable {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
    /// Limited end slopes per cell.
    slopes: Vec<(f64, f64)>,
}

impl CdfTable {
    fn build(view: &QuadratureView, zeros: &[f64]) -> Result<Self> {
        let half_width = (10.0 + 2.0 * (view.rank() as f64).sqrt()) * view.sigma;
        let (a, b) = (view.mu - half_width, view.mu + half_width);
        let h = (b - a) / BASE_CELLS as f64;
        let mut nodes: Vec<f64> = (0..=BASE_CELLS).map(|i| a + i as f64 * h).collect();
        // Extra resolution where the density touches zero.
        for &z in zeros.iter().filter(|z| **z > a && **z < b) {
            nodes.extend((-16..=16).map(|j| z + j as f64 * h / 8.0).filter(|q| *q > a && *q < b));
        }
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|x, y| (*x - *y).abs() < 1e-14 * half_width);

        let (gx, gw) = gauss_legendre(CELL_RULE);
        let mut cdf = Vec::with_capacity(nodes.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            let (c, hh) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            acc += hh * gx.iter().zip(&gw).map(|(x, wt)| wt * view.pdf(c + hh * x)).sum::<f64>();
            cdf.push(acc);
        }
        if !((acc - 1.0).abs() <= MASS_TOL) {
            return Err(WitnessError::TabulationFailed { mass: acc });
        }
        for v in cdf.iter_mut() {
            *v /= acc;
        }
        let dens: Vec<f64> = nodes.iter().map(|&q| view.pdf(q) / acc).collect();
        let slopes = nodes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let secant = (cdf[i + 1] - cdf[i]) / (w[1] - w[0]);
                if secant <= 0.0 {
                    return (0.0, 0.0);
                }
                let (al, be) = (dens[i] / secant, dens[i + 1] / secant);
                let norm = al.hypot(be);
                if norm > 3.0 {
                    let tau = 3.0 / norm;
                    (tau * dens[i], tau * dens[i + 1])
                } else {
                    (dens[i], dens[i + 1])
                }
            })
            .collect();
        Ok(CdfTable { nodes, cdf, slopes })
    }

    fn invert(&self, u: f64) -> f64 {
        let i = match self.cdf.partition_point(|&c| c <= u) {
            0 => 0,
            k => (k - 1).min(self.nodes.len() - 2),
        };
        let (q0, q1) = (self.nodes[i], self.nodes[i + 1]);
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        if f1 <= f0 {
            return q0;
        }
        let h = q1 - q0;
        let (d0, d1) = self.slopes[i];
        let hermite = |t: f64| -> (f64, f64) {
            let (t2, t3) = (t * t, t * t * t);
            let v = (2.0 * t3 - 3.0 * t2 + 1.0) * f0
                + (t3 - 2.0 * t2 + t) * h * d0
                + (-2.0 * t3 + 3.0 * t2) * f1
                + (t3 - t2) * h * d1;
            let dv = (6.0 * t2 - 6.0 * t) * f0 + (3.0 * t2 - 4.0 * t + 1.0) * h * d0 + (-6.0 * t2 + 6.0 * t) * f1
                + (3.0 * t2 - 2.0 * t) * h * d1;
            (v, dv)
        };
        // Safeguarded Newton on the monotone cubic.
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut t = ((u - f0) / (f1 - f0)).clamp(0.0, 1.0);
        for _ in 0..50 {
            let (v, dv) = hermite(t);
            let r = v - u;
            if r.abs() <= 1e-15 {
                break;
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let newton = t - r / dv;
            t = if dv > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 {
                break;
            }
        }
        q0 + t * h
    }
}

/// Reusable sampler for one quadrature of a pure state or mixture.
#[derive(Debug, Clone)]
pub struct QuadratureSampler {
    theta: QuadratureAngle,
    cumulative_weights: Vec<f64>,
    tables: Vec<CdfTable>,
}

impl QuadratureSampler {
    pub fn new(state: &State, theta: QuadratureAngle) -> Result<Self> {
        let mut cumulative_weights = Vec::new();
        let mut tables = Vec::new();
        let mut acc = 0.0;
        for (w, s) in state.components() {
            let view = s.view(theta);
            let zeros = if s.rank() > 0 {
                find_real_zeros(s, theta, DEFAULT_TOL_IMAG)?.zeros
            } else {
                Vec::new()
            };
            tables.push(CdfTable::build(&view, &zeros)?);
            acc += w;
            cumulative_weights.push(acc);
        }
        Ok(QuadratureSampler {
            theta,
            cumulative_weights,
            tables,
        })
    }

    pub fn theta(&self) -> QuadratureAngle {
        self.theta
    }

    /// Tabulated CDF of one pure component.
    pub fn component_cdf(&self, component: usize, q: f64) -> f64 {
        let t = &self.tables[component];
        let i = t.nodes.partition_point(|&x| x <= q);
        if i == 0 {
            0.0
        } else if i >= t.nodes.len() {
            1.0
        } else {
            let f = (q - t.nodes[i - 1]) / (t.nodes[i] - t.nodes[i - 1]);
            t.cdf[i - 1] + f * (t.cdf[i] - t.cdf[i - 1])
        }
    }

    fn draw_one(&self, rng: &mut ChaCha8Rng) -> f64 {
        let k = if self.tables.len() == 1 {
            0
        } else {
            let total = *self.cumulative_weights.last().expect("nonempty");
            let v = rng.random::<f64>() * total;
            self.cumulative_weights.partition_point(|&c| c <= v).min(self.tables.len() - 1)
        };
        self.tables[k].invert(rng.random::<f64>())
    }

    fn chunk(&self, seed: u64, index: usize, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        (0..len).map(|_| self.draw_one(&mut rng)).collect()
    }

    /// `m` outcomes; identical for a given seed whichever backend runs.
    pub fn draw(&self, m: usize, seed: u64) -> Vec<f64> {
        self.draw_with(m, seed, true)
    }

    pub fn draw_with(&self, m: usize, seed: u64, parallel: bool) -> Vec<f64> {
        let chunks = m.div_ceil(CHUNK);
        let job = |c: usize| self.chunk(seed, c, CHUNK.min(m - c * CHUNK));
        let parts = if parallel {
            par::map_indexed(chunks, job)
        } else {
            par::map_indexed_seq(chunks, job)
        };
        parts.into_iter().flatten().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub theta: QuadratureAngle,
    pub outcomes: Vec<f64>,
    pub seed: u64,
    pub state_descriptor: serde_json::Value,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// CSV with `#` comment lines for angle, seed and state hash, then a `q` column.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# theta={}", fmt17(self.theta.radians()))?;
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# state_hash={}", hash_json(&self.state_descriptor))?;
        writeln!(out, "q")?;
        for q in &self.outcomes {
            writeln!(out, "{}", fmt17(*q))?;
        }
        Ok(())
    }
}

/// Reads a batch written by [`SampleBatch::write_csv`]. The angle comment is
/// required; seed and state hash are optional.
pub fn read_batch_csv(text: &str) -> Result<SampleBatch> {
    let mut theta = None;
    let mut seed = 0;
    let mut outcomes = Vec::new();
    let bad = |m: String| WitnessError::InvalidArgument(m);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == "q" {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            let c = c.trim();
            if let Some(v) = c.strip_prefix("theta=") {
                theta = Some(v.parse::<f64>().map_err(|_| bad(format!("line {}: bad theta", i + 1)))?);
            } else if let Some(v) = c.strip_prefix("seed=") {
                seed = v.parse().map_err(|_| bad(format!("line {}: bad seed", i + 1)))?;
            }
            continue;
        }
        let q: f64 = line.parse().map_err(|_| bad(format!("line {}: bad outcome {line:?}", i + 1)))?;
        if !q.is_finite() {
            return Err(bad(format!("line {}: non-finite outcome", i + 1)));
        }
        outcomes.push(q);
    }
    Ok(SampleBatch {
        theta: QuadratureAngle::new(theta.ok_or_else(|| bad("batch has no '# theta=' line".into()))?),
        outcomes,
        seed,
        state_descriptor: serde_json::Value::Null,
    })
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// SHA-256 of a JSON value's compact serialization, hex encoded.
pub fn hash_json(v: &serde_json::Value) -> String {
    let digest = Sha256::digest(v.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// `m` i.i.d. outcomes of `q_theta`.
pub fn sample(state: &State, theta: QuadratureAngle, m: usize, seed: u64) -> Result<SampleBatch> {
    if m == 0 {
        return Err(WitnessError::InvalidArgument("sample count must be at least 1".into()));
    }
    let sampler = QuadratureSampler::new(state, theta)?;
    Ok(SampleBatch {
        theta,
        outcomes: sampler.draw(m, seed),
        seed,
        state_descriptor: serde_json::to_value(state)?,
    })
}

/// Seed for the batch at a given angle index, so batches in one run differ.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // SplitMix64 finalizer.
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub per_window_fractions: Vec<f64>,
    pub total: f64,
    pub samples_used: Vec<usize>,
}

/// Fraction of outcomes inside each window, taken from the batch at its angle.
pub fn estimate_witness(batches: &[SampleBatch], ws: &WindowSet) -> Result<EstimatorResult> {
    let mut per_window_fractions = Vec::with_capacity(ws.len());
    let mut samples_used = Vec::with_capacity(ws.len());
    for w in ws.windows() {
        let batch = batches
            .iter()
            .find(|b| same_angle(b.theta, w.theta))
            .ok_or(WitnessError::AngleMismatch { theta: w.theta.radians() })?;
        if batch.is_empty() {
            return Err(WitnessError::InvalidArgument("empty sample batch".into()));
        }
        let hits = batch.outcomes.iter().filter(|&&q| w.contains(q)).count();
        per_window_fractions.push(hits as f64 / batch.len() as f64);
        samples_used.push(batch.len());
    }
    Ok(EstimatorResult {
        total: per_window_fractions.iter().sum(),
        per_window_fractions,
        samples_used,
    })
}

/// `p |0><0| + (1 - p) |1><1|`.
pub fn apply_loss_single_photon(p: f64) -> Result<MixedState> {
    lossy_single_photon(p)
}

/// Kolmogorov-Smirnov distance between a sample and a reference CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let f = cdf(q);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Convenience for pure states.
pub fn sample_pure(state: &StellarState, theta: QuadratureAngle, m: usize, seed: u64) -> Result<SampleBatch> {
    sample(&State::Pure(state.clone()), theta, m, seed)
}
